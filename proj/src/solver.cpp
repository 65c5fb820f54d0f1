#include "causalrd/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "causalrd/errors.hpp"
#include "causalrd/numeric.hpp"

namespace causalrd {

namespace {

constexpr double kConsistencyTolerance = 1e-6;
constexpr std::size_t kMaxBisections = 200;

void check_inputs(const SourceModel& source, const DistortionSpec& spec,
                  const MarginalProcess& nu) {
  spec.check_compatible(source.alphabets());
  if (!(nu.alphabets() == source.alphabets())) {
    throw std::invalid_argument("marginal process alphabets do not match the source");
  }
}

[[noreturn]] void throw_degenerate(std::size_t stage, std::uint64_t y_prev) {
  throw DegenerateMarginalError("output marginal at stage " + std::to_string(stage) +
                                ", y-history " + std::to_string(y_prev) +
                                " leaves no admissible reproduction symbol");
}

// Exponents s*rho_i - g_i + log nu_i over y_i for row (y^{i-1}, x^i).
void tilt_exponents(const DistortionSpec& spec, const MarginalProcess& nu, const Table& g_stage,
                    double s, std::size_t stage, std::uint64_t x_code, std::uint64_t y_prev,
                    std::vector<double>& out) {
  auto nu_row = nu.row(stage, y_prev);
  const std::size_t ys = nu_row.size();
  out.resize(ys);
  for (std::size_t y = 0; y < ys; ++y) {
    const std::uint64_t yc = y_prev * ys + y;
    out[y] = nu_row[y] > 0.0
                 ? s * spec.at(stage, x_code, yc) - g_stage(x_code, yc) + std::log(nu_row[y])
                 : kNegInf;
  }
}

double sup_change(const MarginalProcess& from, const std::vector<Table>& to,
                  const MarginalProcess& reach_source) {
  double worst = 0.0;
  for (std::size_t i = 0; i < to.size(); ++i) {
    for (std::uint64_t h = 0; h < to[i].rows(); ++h) {
      if (!reach_source.reachable(i, h)) continue;
      auto a = from.row(i, h);
      auto b = to[i].row(h);
      for (std::size_t y = 0; y < a.size(); ++y) worst = std::max(worst, std::abs(a[y] - b[y]));
    }
  }
  return worst;
}

SolveResult finish(const SourceModel& source, const DistortionSpec& spec, double s,
                   MarginalProcess nu, std::size_t sweeps, bool converged, double residual) {
  GTable g = backward_g(source, spec, nu, s);
  CausalPolicy policy = tilted_policy(source, spec, nu, g, s);
  const auto mu = full_joint_source(source);
  const DistortionValue d = expected_distortion(joint_law(mu, policy), spec);
  // The closed form is only valid at a fixed point; otherwise report the
  // directed information actually achieved by the returned policy.
  const double rate = converged
                          ? rdf_value(source, spec, policy, nu, g, s, d.per_symbol)
                          : directed_information(mu, policy).nats;
  return SolveResult{.s = s,
                     .policy = std::move(policy),
                     .nu = std::move(nu),
                     .g = std::move(g),
                     .rate_nats = rate,
                     .distortion_total = d.total,
                     .distortion_per_symbol = d.per_symbol,
                     .sweeps_used = sweeps,
                     .converged = converged,
                     .residual = residual};
}

std::vector<double> random_simplex_row(std::size_t k, std::mt19937_64& rng) {
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> row(k);
  double sum = 0.0;
  for (double& v : row) sum += (v = expo(rng));
  for (double& v : row) v /= sum;
  return row;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(s <= 0.0)) throw std::invalid_argument("SolverConfig: s must be <= 0");
  if (!(fp_tol > 0.0)) throw std::invalid_argument("SolverConfig: fp_tol must be > 0");
  if (!(damping > 0.0 && damping <= 1.0)) {
    throw std::invalid_argument("SolverConfig: damping must lie in (0, 1]");
  }
  if (max_sweeps == 0) throw std::invalid_argument("SolverConfig: max_sweeps must be >= 1");
}

GTable backward_g(const SourceModel& source, const DistortionSpec& spec,
                  const MarginalProcess& nu, double s) {
  if (!(s <= 0.0)) throw std::invalid_argument("backward_g: s must be <= 0");
  check_inputs(source, spec, nu);
  const auto& alph = source.alphabets();
  const std::size_t n = alph.n_stages();
  GTable g;
  for (std::size_t i = 0; i < n; ++i) {
    g.stages.emplace_back(alph.x_prefixes(i + 1), alph.y_prefixes(i + 1), 0.0);
  }
  std::vector<double> exps;
  for (std::size_t i = n - 1; i-- > 0;) {
    const std::size_t next = i + 1;
    const std::size_t xs = alph.x_size(next);
    Table& gi = g.stages[i];
    for (std::uint64_t xc = 0; xc < gi.rows(); ++xc) {
      auto p = source.row(next, xc);
      for (std::uint64_t yc = 0; yc < gi.cols(); ++yc) {
        double acc = 0.0;
        for (std::size_t x = 0; x < xs; ++x) {
          if (p[x] == 0.0) continue;
          tilt_exponents(spec, nu, g.stages[next], s, next, xc * xs + x, yc, exps);
          const double lse = log_sum_exp(exps);
          if (lse == kNegInf) throw_degenerate(next, yc);
          acc += p[x] * lse;
        }
        gi(xc, yc) = -acc;
      }
    }
  }
  return g;
}

CausalPolicy tilted_policy(const SourceModel& source, const DistortionSpec& spec,
                           const MarginalProcess& nu, const GTable& g, double s) {
  check_inputs(source, spec, nu);
  const auto& alph = source.alphabets();
  if (g.stages.size() != alph.n_stages()) {
    throw std::invalid_argument("tilted_policy: g table has the wrong number of stages");
  }
  std::vector<Table> kernels;
  std::vector<double> exps;
  for (std::size_t i = 0; i < alph.n_stages(); ++i) {
    const std::size_t nx = alph.x_prefixes(i + 1);
    const std::size_t ys = alph.y_size(i);
    Table k(alph.y_prefixes(i) * nx, ys);
    for (std::uint64_t yh = 0; yh < alph.y_prefixes(i); ++yh) {
      for (std::uint64_t xc = 0; xc < nx; ++xc) {
        tilt_exponents(spec, nu, g.stages[i], s, i, xc, yh, exps);
        const double lse = log_sum_exp(exps);
        if (lse == kNegInf) throw_degenerate(i, yh);
        auto row = k.row(yh * nx + xc);
        for (std::size_t y = 0; y < ys; ++y) row[y] = std::exp(exps[y] - lse);
      }
    }
    kernels.push_back(std::move(k));
  }
  return CausalPolicy(alph, std::move(kernels));
}

MarginalProcess marginal_update(const SourceModel& source, const CausalPolicy& policy) {
  return output_marginal(joint_law(source, policy));
}

SolveResult fixed_point_solve(const SourceModel& source, const DistortionSpec& spec,
                              const SolverConfig& config) {
  config.validate();
  const auto& alph = source.alphabets();
  MarginalProcess nu = config.nu_init ? *config.nu_init : MarginalProcess::uniform(alph);
  check_inputs(source, spec, nu);

  double residual = std::numeric_limits<double>::infinity();
  std::size_t sweep = 0;
  bool converged = false;
  while (sweep < config.max_sweeps) {
    ++sweep;
    const GTable g = backward_g(source, spec, nu, config.s);
    const CausalPolicy q = tilted_policy(source, spec, nu, g, config.s);
    MarginalProcess updated = marginal_update(source, q);
    std::vector<Table> next = updated.kernels();
    if (config.damping < 1.0) {
      for (std::size_t i = 0; i < next.size(); ++i) {
        auto& d = next[i].data();
        const auto& old = nu.kernels()[i].data();
        for (std::size_t k = 0; k < d.size(); ++k) {
          d[k] = (1.0 - config.damping) * old[k] + config.damping * d[k];
        }
      }
    }
    residual = sup_change(nu, next, updated);
    nu = MarginalProcess(alph, std::move(next), updated.reach());
    if (residual <= config.fp_tol) {
      converged = true;
      break;
    }
  }
  return finish(source, spec, config.s, std::move(nu), sweep, converged, residual);
}

double rdf_value(const SourceModel& source, const DistortionSpec& spec,
                 const CausalPolicy& policy, const MarginalProcess& nu, const GTable& g,
                 double s, double distortion_per_symbol) {
  check_inputs(source, spec, nu);
  const auto& alph = source.alphabets();
  const std::size_t n = alph.n_stages();
  const auto laws = prefix_joint_laws(source, policy);

  // sum_i E[ sum_y q*_i g_i + log sum_y exp(s rho_i - g_i) nu_i ] over the
  // law of (x^i, y^{i-1}).
  double correction = 0.0;
  std::vector<double> exps;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t xs = alph.x_size(i);
    const std::size_t nx = alph.x_prefixes(i + 1);
    const Table& gi = g.stages[i];
    for (std::uint64_t xc = 0; xc < nx; ++xc) {
      const std::uint64_t x_prev = xc / xs;
      const double px = source.prob(i, x_prev, xc % xs);
      for (std::uint64_t yh = 0; yh < alph.y_prefixes(i); ++yh) {
        const double w = i == 0 ? px : laws[i - 1](x_prev, yh) * px;
        if (w == 0.0) continue;
        tilt_exponents(spec, nu, gi, s, i, xc, yh, exps);
        const double log_z = log_sum_exp(exps);
        if (log_z == kNegInf) throw_degenerate(i, yh);
        auto q = policy.row(i, yh, xc);
        double gq = 0.0;
        for (std::size_t y = 0; y < q.size(); ++y) gq += q[y] * gi(xc, yh * q.size() + y);
        correction += w * (gq + log_z);
      }
    }
  }
  const double rate = s * static_cast<double>(n) * distortion_per_symbol - correction;

  const double di = directed_information(full_joint_source(source), policy).nats;
  if (std::abs(rate - di) > kConsistencyTolerance) {
    std::ostringstream os;
    os.precision(12);
    os << "closed-form rate " << rate << " differs from directed information " << di;
    throw ConsistencyError(os.str());
  }
  return std::max(rate, 0.0);
}

ZeroRatePoint max_distortion(const SourceModel& source, const DistortionSpec& spec) {
  spec.check_compatible(source.alphabets());
  const auto& alph = source.alphabets();
  const std::size_t n = alph.n_stages();
  const auto mu = source_prefix_laws(source);

  // cost_to_go[h] over y-prefixes of the current length; backward in stages.
  std::vector<double> cost_to_go(alph.y_prefixes(n), 0.0);
  std::vector<Table> kernels(n);
  for (std::size_t i = n; i-- > 0;) {
    const std::size_t ys = alph.y_size(i);
    std::vector<double> here(alph.y_prefixes(i), 0.0);
    Table k(alph.y_prefixes(i), ys, 0.0);
    for (std::uint64_t h = 0; h < here.size(); ++h) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t y = 0; y < ys; ++y) {
        const std::uint64_t yc = h * ys + y;
        double expected = 0.0;
        for (std::uint64_t xc = 0; xc < mu[i].size(); ++xc) {
          if (mu[i][xc] > 0.0) expected += mu[i][xc] * spec.at(i, xc, yc);
        }
        const double total = expected + cost_to_go[yc];
        if (total < best) {
          best = total;
          arg = y;
        }
      }
      here[h] = best;
      k(h, arg) = 1.0;
    }
    kernels[i] = std::move(k);
    cost_to_go = std::move(here);
  }
  return ZeroRatePoint{cost_to_go[0] / static_cast<double>(n),
                       MarginalProcess(alph, std::move(kernels))};
}

double min_distortion(const SourceModel& source, const DistortionSpec& spec) {
  spec.check_compatible(source.alphabets());
  const auto& alph = source.alphabets();
  const std::size_t n = alph.n_stages();
  // value[(x^i, y^i)] = optimal expected future distortion after stage i.
  Table value(alph.x_prefixes(n), alph.y_prefixes(n), 0.0);
  for (std::size_t i = n; i-- > 0;) {
    const std::size_t ys = alph.y_size(i);
    Table here(alph.x_prefixes(i + 1), alph.y_prefixes(i), 0.0);
    for (std::uint64_t xc = 0; xc < here.rows(); ++xc) {
      for (std::uint64_t yh = 0; yh < here.cols(); ++yh) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t y = 0; y < ys; ++y) {
          const std::uint64_t yc = yh * ys + y;
          double future = 0.0;
          if (i + 1 < n) {
            const std::size_t xs = alph.x_size(i + 1);
            auto p = source.row(i + 1, xc);
            for (std::size_t x = 0; x < xs; ++x) {
              if (p[x] > 0.0) future += p[x] * value(xc * xs + x, yc);
            }
          }
          best = std::min(best, spec.at(i, xc, yc) + future);
        }
        here(xc, yh) = best;
      }
    }
    value = std::move(here);
  }
  double total = 0.0;
  auto p0 = source.row(0, 0);
  for (std::size_t x = 0; x < p0.size(); ++x) total += p0[x] * value(x, 0);
  return total / static_cast<double>(n);
}

std::string to_string(TargetStatus status) {
  switch (status) {
    case TargetStatus::solved:
      return "solved";
    case TargetStatus::at_max_distortion:
      return "at_max_distortion";
    case TargetStatus::infeasible:
      return "infeasible";
    case TargetStatus::multiplier_cap:
      return "multiplier_cap";
  }
  return "unknown";
}

TargetResult solve_for_target_distortion(const SourceModel& source, const DistortionSpec& spec,
                                         double d_target, const SolverConfig& config,
                                         double distortion_tol) {
  if (!(d_target >= 0.0)) {
    throw std::invalid_argument("solve_for_target_distortion: D_target must be >= 0");
  }
  SolverConfig probe = config;
  probe.s = 0.0;
  probe.validate();

  TargetResult out;
  auto solve_at = [&](double s) {
    probe.s = s;
    SolveResult r = fixed_point_solve(source, spec, probe);
    ++out.probes;
    if (!r.converged) {
      std::ostringstream os;
      os << "fixed-point solve did not converge at s = " << s << " (residual " << r.residual
         << " after " << r.sweeps_used << " sweeps)";
      throw NonConvergenceError(os.str(), s);
    }
    return r;
  };
  auto accept = [&](SolveResult r, TargetStatus status) {
    out.status = status;
    out.s = r.s;
    out.rate_nats = r.rate_nats;
    out.distortion_per_symbol = r.distortion_per_symbol;
    out.solve = std::move(r);
    return out;
  };

  ZeroRatePoint zero = max_distortion(source, spec);
  if (d_target >= zero.distortion_per_symbol) {
    if (!probe.nu_init) probe.nu_init = std::move(zero.nu);
    SolveResult r = solve_at(0.0);
    probe.nu_init = config.nu_init;
    return accept(std::move(r), TargetStatus::at_max_distortion);
  }
  if (d_target < min_distortion(source, spec)) {
    out.status = TargetStatus::infeasible;
    out.s = -std::numeric_limits<double>::infinity();
    out.rate_nats = std::numeric_limits<double>::infinity();
    out.distortion_per_symbol = d_target;
    return out;
  }

  // Expand the bracket until D(lo) is at or below the target.
  double hi = 0.0;
  double lo = -1.0;
  SolveResult at_lo = solve_at(lo);
  while (at_lo.distortion_per_symbol > d_target + distortion_tol) {
    if (std::abs(lo) >= kMultiplierCap) return accept(std::move(at_lo), TargetStatus::multiplier_cap);
    hi = lo;
    lo = std::max(2.0 * lo, -kMultiplierCap);
    at_lo = solve_at(lo);
  }
  if (std::abs(at_lo.distortion_per_symbol - d_target) <= distortion_tol) {
    return accept(std::move(at_lo), TargetStatus::solved);
  }

  SolveResult best = std::move(at_lo);
  for (std::size_t it = 0; it < kMaxBisections; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    SolveResult r = solve_at(mid);
    const double gap = r.distortion_per_symbol - d_target;
    const bool closer =
        std::abs(gap) < std::abs(best.distortion_per_symbol - d_target);
    if (std::abs(gap) <= distortion_tol) return accept(std::move(r), TargetStatus::solved);
    if (gap > 0.0) {
      hi = mid;
    } else {
      lo = mid;
    }
    if (closer) best = std::move(r);
  }
  return accept(std::move(best), TargetStatus::solved);
}

CurveChecks check_curve(const RdCurve& curve) {
  CurveChecks c;
  std::vector<const CurvePoint*> pts;
  for (const auto& p : curve.points) {
    if (p.error.empty()) pts.push_back(&p);
  }
  const double n = static_cast<double>(curve.n_stages);
  for (std::size_t k = 1; k < pts.size(); ++k) {
    c.monotone_violation = std::max(
        c.monotone_violation, pts[k]->rate_total_nats - pts[k - 1]->rate_total_nats);
  }
  for (std::size_t k = 1; k + 1 < pts.size(); ++k) {
    const auto &a = *pts[k - 1], &b = *pts[k], &d = *pts[k + 1];
    const double span = d.distortion_per_symbol - a.distortion_per_symbol;
    if (span <= 1e-12) continue;
    const double t = (b.distortion_per_symbol - a.distortion_per_symbol) / span;
    const double chord = a.rate_total_nats + t * (d.rate_total_nats - a.rate_total_nats);
    c.convexity_violation = std::max(c.convexity_violation, b.rate_total_nats - chord);
    if (b.s != 0.0) {
      const double slope = (d.rate_total_nats - a.rate_total_nats) / (n * span);
      c.slope_rel_error = std::max(c.slope_rel_error, std::abs(slope - b.s) / std::abs(b.s));
    }
  }
  std::vector<const CurvePoint*> by_s = pts;
  std::stable_sort(by_s.begin(), by_s.end(),
                   [](const CurvePoint* a, const CurvePoint* b) { return a->s < b->s; });
  for (std::size_t k = 1; k < by_s.size(); ++k) {
    // Larger s (closer to zero) must not lower D or raise R.
    c.multiplier_violation = std::max(
        {c.multiplier_violation,
         by_s[k - 1]->distortion_per_symbol - by_s[k]->distortion_per_symbol,
         by_s[k]->rate_total_nats - by_s[k - 1]->rate_total_nats});
  }
  c.monotone = c.monotone_violation <= kCurveTolerance;
  c.convex = c.convexity_violation <= kCurveTolerance;
  c.multiplier_ordered = c.multiplier_violation <= kCurveTolerance;
  c.slope_ok = c.slope_rel_error <= kSlopeRelTolerance;
  return c;
}

RdCurve trace_curve(const SourceModel& source, const DistortionSpec& spec,
                    std::span<const double> s_values, const SolverConfig& config,
                    std::vector<std::optional<SolveResult>>* solves) {
  if (s_values.empty()) throw std::invalid_argument("trace_curve: no multiplier values");
  if (solves) solves->clear();
  RdCurve curve;
  curve.n_stages = source.n_stages();
  const double n = static_cast<double>(source.n_stages());
  for (double s : s_values) {
    CurvePoint p;
    p.s = s;
    try {
      SolverConfig c = config;
      c.s = s;
      // At s = 0 every source-independent policy is optimal; start from the
      // one with the least distortion so the point sits at D_max.
      if (s == 0.0 && !c.nu_init) c.nu_init = max_distortion(source, spec).nu;
      SolveResult r = fixed_point_solve(source, spec, c);
      p.distortion_per_symbol = r.distortion_per_symbol;
      p.rate_total_nats = r.rate_nats;
      p.rate_per_symbol_nats = r.rate_nats / n;
      p.sweeps = r.sweeps_used;
      p.converged = r.converged;
      p.residual = r.residual;
      if (solves) solves->emplace_back(std::move(r));
    } catch (const std::exception& e) {
      if (solves) solves->emplace_back(std::nullopt);
      p.error = e.what();
      p.distortion_per_symbol = std::numeric_limits<double>::quiet_NaN();
      p.rate_total_nats = std::numeric_limits<double>::quiet_NaN();
      p.rate_per_symbol_nats = std::numeric_limits<double>::quiet_NaN();
    }
    curve.points.push_back(std::move(p));
  }
  std::stable_sort(curve.points.begin(), curve.points.end(),
                   [](const CurvePoint& a, const CurvePoint& b) {
                     if (a.error.empty() != b.error.empty()) return a.error.empty();
                     if (a.distortion_per_symbol != b.distortion_per_symbol) {
                       return a.distortion_per_symbol < b.distortion_per_symbol;
                     }
                     return a.s < b.s;
                   });
  curve.checks = check_curve(curve);
  return curve;
}

std::vector<HorizonRate> rate_limit_estimate(const SourceFamily& family,
                                             const DistortionSpec& spec, double d_target,
                                             std::span<const std::size_t> horizons,
                                             const SolverConfig& config) {
  if (!std::is_sorted(horizons.begin(), horizons.end())) {
    throw std::invalid_argument("rate_limit_estimate: horizons must be ascending");
  }
  std::vector<HorizonRate> out;
  for (std::size_t h : horizons) {
    const SourceModel source = family(h);
    const TargetResult r = solve_for_target_distortion(source, spec, d_target, config);
    out.push_back({h, r.rate_nats / static_cast<double>(h), r.distortion_per_symbol, r.s,
                   r.status});
  }
  return out;
}

double verify_stationarity(const SourceModel& source, const DistortionSpec& spec,
                           const CausalPolicy& center, double s, std::size_t n_perturbations,
                           double epsilon, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double base = lagrangian(source, center, spec, s);
  double worst = n_perturbations == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < n_perturbations; ++t) {
    std::vector<Table> kernels = center.kernels();
    for (Table& k : kernels) {
      for (std::size_t r = 0; r < k.rows(); ++r) {
        const auto target = random_simplex_row(k.cols(), rng);
        auto row = k.row(r);
        for (std::size_t y = 0; y < row.size(); ++y) row[y] += epsilon * (target[y] - row[y]);
      }
    }
    const CausalPolicy moved(center.alphabets(), std::move(kernels));
    worst = std::max(worst, base - lagrangian(source, moved, spec, s));
  }
  return worst;
}

double verify_stationarity(const SourceModel& source, const DistortionSpec& spec,
                           const SolveResult& result, std::size_t n_perturbations,
                           double epsilon, std::uint64_t seed) {
  return verify_stationarity(source, spec, result.policy, result.s, n_perturbations, epsilon,
                             seed);
}

}  // namespace causalrd
