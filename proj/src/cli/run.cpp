#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "causalrd/baseline.hpp"
#include "causalrd/cli.hpp"
#include "causalrd/errors.hpp"
#include "causalrd/measures.hpp"
#include "causalrd/numeric.hpp"

namespace causalrd::cli {

using nlohmann::json;

namespace {

constexpr double kDominanceTolerance = 1e-9;
constexpr double kMarkovTolerance = 1e-10;
constexpr double kStationarityTolerance = 1e-8;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

double in_units(double nats, Units units) {
  return units == Units::bits ? nats_to_bits(nats) : nats;
}

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double secs = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return secs;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

SolverConfig solver_config(const RunConfig& c) {
  SolverConfig sc;
  sc.fp_tol = c.solver.fp_tol;
  sc.max_sweeps = c.solver.max_sweeps;
  sc.damping = c.solver.damping;
  return sc;
}

// One solved instance kept around for the invariant checks.
struct Solved {
  SourceModel source;
  DistortionSpec spec;
  SolveResult result;
};

CurvePoint point_from(const SolveResult& r, std::size_t n) {
  CurvePoint p;
  p.s = r.s;
  p.distortion_per_symbol = r.distortion_per_symbol;
  p.rate_total_nats = r.rate_nats;
  p.rate_per_symbol_nats = r.rate_nats / static_cast<double>(n);
  p.sweeps = r.sweeps_used;
  p.converged = r.converged;
  p.residual = r.residual;
  return p;
}

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// Solves one distortion target; returns the exit code contribution.
int target_point(const SourceModel& src, const DistortionSpec& spec, double d_target,
                 const SolverConfig& sc, RunResult& out, std::vector<Solved>& solved,
                 json& detail) {
  const std::size_t n = src.n_stages();
  TargetResult t = solve_for_target_distortion(src, spec, d_target, sc);
  detail["target_status"] = to_string(t.status);
  detail["D_target"] = d_target;
  if (t.status == TargetStatus::infeasible) {
    CurvePoint p;
    p.s = t.s;
    p.distortion_per_symbol = d_target;
    p.rate_total_nats = t.rate_nats;
    p.rate_per_symbol_nats = t.rate_nats;
    p.residual = kNaN;
    p.error = "target distortion is below the minimum achievable distortion";
    out.curve.points.push_back(p);
    return kExitInfeasible;
  }
  out.curve.points.push_back(point_from(*t.solve, n));
  solved.push_back({src, spec, std::move(*t.solve)});
  return t.status == TargetStatus::multiplier_cap ? kExitNumerical : kExitOk;
}

void run_checks(const RunConfig& c, const std::vector<Solved>& solved, RunResult& out) {
  double dominance = std::numeric_limits<double>::infinity();
  double markov = 0.0;
  double stationarity = 0.0;
  for (const Solved& s : solved) {
    const double block =
        classical_block_rdf(s.source, s.spec, s.result.distortion_per_symbol, 1e-10).rate_total_nats;
    dominance = std::min(dominance, s.result.rate_nats - block);
    const JointLaw joint = joint_law(s.source, s.result.policy);
    for (int v = 1; v <= 4; ++v) {
      markov = std::max(markov, markov_chain_check(joint, static_cast<MarkovVariant>(v)));
    }
    stationarity = std::max(stationarity,
                            verify_stationarity(s.source, s.spec, s.result, c.checks.perturbations,
                                                c.checks.epsilon, c.checks.seed));
  }
  if (solved.empty()) dominance = 0.0;
  out.checks.push_back({"dominance", dominance >= -kDominanceTolerance, dominance, kDominanceTolerance});
  if (c.mode != Mode::horizon_sweep) {
    const CurveChecks cc = check_curve(out.curve);
    const double worst = std::max(cc.monotone_violation, cc.convexity_violation);
    out.checks.push_back({"convexity", cc.monotone && cc.convex, worst, kCurveTolerance});
  }
  out.checks.push_back({"mc_residual", markov < kMarkovTolerance, markov, kMarkovTolerance});
  out.checks.push_back(
      {"stationarity", stationarity <= kStationarityTolerance, stationarity, kStationarityTolerance});
}

void solve_all(const RunConfig& c, RunResult& out, std::vector<Solved>& solved) {
  const SolverConfig sc = solver_config(c);
  auto note = [&](int code, const std::string& msg) {
    if (code > out.exit_code) out.exit_code = code;
    if (!msg.empty()) out.message += (out.message.empty() ? "" : "; ") + msg;
  };

  if (c.mode == Mode::horizon_sweep) {
    for (std::size_t h : c.solver.horizons) {
      const SourceModel src = build_source(c, h);
      const DistortionSpec spec = build_distortion(c, src.alphabets());
      json detail{{"horizon", h}};
      const int code = target_point(src, spec, *c.solver.d_target, sc, out, solved, detail);
      if (code == kExitInfeasible) note(code, "horizon " + std::to_string(h) + ": infeasible target");
      if (code == kExitNumerical) note(code, "horizon " + std::to_string(h) + ": multiplier cap reached");
      out.point_details.push_back(detail);
    }
    out.curve.n_stages = c.solver.horizons.back();
    return;
  }

  const SourceModel src = build_source(c, *c.horizon);
  const DistortionSpec spec = build_distortion(c, src.alphabets());
  out.curve.n_stages = src.n_stages();

  const bool by_target = c.mode == Mode::target_d || (c.mode == Mode::verify && c.solver.d_target);
  if (by_target) {
    json detail{{"horizon", src.n_stages()}};
    const int code = target_point(src, spec, *c.solver.d_target, sc, out, solved, detail);
    if (code == kExitInfeasible) note(code, "infeasible target distortion");
    if (code == kExitNumerical) note(code, "multiplier cap reached before the target distortion");
    out.point_details.push_back(detail);
    return;
  }

  const std::vector<double> s_values =
      c.mode == Mode::curve ? c.solver.s_values : std::vector<double>{*c.solver.s};
  std::vector<std::optional<SolveResult>> results;
  out.curve = trace_curve(src, spec, s_values, sc, &results);
  for (const CurvePoint& p : out.curve.points) {
    json detail{{"horizon", src.n_stages()}};
    if (!p.error.empty()) {
      detail["error"] = p.error;
      note(kExitNumerical, "s = " + fmt(p.s) + ": " + p.error);
    } else if (!p.converged) {
      note(kExitNumerical, "s = " + fmt(p.s) + ": no convergence after " + std::to_string(p.sweeps) +
                               " sweeps (residual " + fmt(p.residual) + ")");
    }
    out.point_details.push_back(detail);
  }
  for (auto& r : results) {
    if (r && r->converged) solved.push_back({src, spec, std::move(*r)});
  }
}

json build_report(const RunConfig& c, const RunResult& r) {
  json points = json::array();
  for (std::size_t k = 0; k < r.curve.points.size(); ++k) {
    const CurvePoint& p = r.curve.points[k];
    json row = k < r.point_details.size() ? r.point_details[k] : json::object();
    row["s"] = nullable(p.s);
    row["D_per_symbol"] = nullable(p.distortion_per_symbol);
    row["R_total"] = nullable(in_units(p.rate_total_nats, c.output.units));
    row["R_per_symbol"] = nullable(in_units(p.rate_per_symbol_nats, c.output.units));
    row["sweeps"] = p.sweeps;
    row["converged"] = p.converged;
    row["residual"] = nullable(p.residual);
    if (!p.error.empty() && !row.contains("error")) row["error"] = p.error;
    points.push_back(row);
  }
  json checks = json::array();
  for (const CheckOutcome& ch : r.checks) {
    checks.push_back({{"name", ch.name},
                      {"passed", ch.passed},
                      {"value", nullable(ch.value)},
                      {"tolerance", ch.tolerance}});
  }
  return json{{"config", to_json(c)},
              {"exit_code", r.exit_code},
              {"message", r.message},
              {"units", to_string(c.output.units)},
              {"points", points},
              {"checks", checks},
              {"timing_seconds", r.timing}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

void emit_csv(const RdCurve& curve, Units units, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const CurvePoint& p : curve.points) {
    out << fmt(p.s) << ',' << fmt(p.distortion_per_symbol) << ','
        << fmt(in_units(p.rate_total_nats, units)) << ','
        << fmt(in_units(p.rate_per_symbol_nats, units)) << ',' << p.sweeps << ','
        << (p.converged ? "true" : "false") << ',' << fmt(p.residual) << '\n';
  }
}

void write_csv(const RdCurve& curve, Units units, const std::filesystem::path& path) {
  std::ostringstream os;
  emit_csv(curve, units, os);
  write_text(path, os.str());
}

RunResult execute(const RunConfig& config) {
  RunResult out;
  Stopwatch clock;
  std::vector<Solved> solved;
  try {
    solve_all(config, out, solved);
  } catch (const NonConvergenceError& e) {
    out.exit_code = kExitNumerical;
    out.message = std::string(e.what());
  } catch (const ConfigError& e) {
    out.exit_code = kExitConfig;
    out.message = e.what();
  } catch (const std::exception& e) {
    out.exit_code = kExitNumerical;
    out.message = e.what();
  }
  out.timing["solve"] = clock.lap();

  const bool checks_on = config.checks.enabled || config.mode == Mode::verify;
  if (checks_on && out.exit_code != kExitConfig) {
    try {
      run_checks(config, solved, out);
      for (const CheckOutcome& ch : out.checks) {
        if (!ch.passed) {
          out.exit_code = std::max(out.exit_code, kExitNumerical);
          out.message += (out.message.empty() ? "" : "; ") + ("check " + ch.name + " failed");
        }
      }
    } catch (const std::exception& e) {
      out.exit_code = std::max(out.exit_code, kExitNumerical);
      out.message += (out.message.empty() ? "" : "; ") + std::string("checks aborted: ") + e.what();
    }
    out.timing["checks"] = clock.lap();
  }

  std::ostringstream csv;
  emit_csv(out.curve, config.output.units, csv);
  out.csv = csv.str();
  out.report = build_report(config, out);
  out.timing["render"] = clock.lap();
  out.report["timing_seconds"] = out.timing;
  return out;
}

int run(const std::filesystem::path& config_path, const Overrides& overrides, std::ostream& err) {
  Stopwatch clock;
  RunConfig config;
  try {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("", "cannot read config file " + config_path.string());
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    if (doc.is_object()) {
      if (overrides.mode) doc["mode"] = to_string(*overrides.mode);
      if (overrides.out) doc["output"]["path"] = *overrides.out;
      if (overrides.units) doc["output"]["units"] = to_string(*overrides.units);
      if (overrides.seed) doc["checks"]["seed"] = *overrides.seed;
      if (overrides.check) doc["checks"]["enabled"] = true;
    }
    config = parse_config(doc);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  const double load_secs = clock.lap();

  RunResult result = execute(config);
  result.timing["load"] = load_secs;
  result.report["timing_seconds"] = result.timing;

  for (const CheckOutcome& ch : result.checks) {
    err << "check " << ch.name << ": " << (ch.passed ? "pass" : "FAIL") << " (value "
        << fmt(ch.value) << ", tolerance " << fmt(ch.tolerance) << ")\n";
  }
  if (result.exit_code != kExitOk) err << "error: " << result.message << '\n';

  try {
    const std::string& path = config.output.path;
    if (config.output.format == Format::csv) {
      if (path.empty()) {
        std::cout << result.csv;
      } else {
        write_text(path, result.csv);
        write_text(path + ".report.json", result.report.dump(2) + "\n");
      }
    } else if (path.empty()) {
      std::cout << result.report.dump(2) << '\n';
    } else {
      write_text(path, result.report.dump(2) + "\n");
    }
  } catch (const std::exception& e) {
    err << "output error: " << e.what() << '\n';
    return 1;
  }
  return result.exit_code;
}

}  // namespace causalrd::cli
