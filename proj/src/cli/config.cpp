#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "causalrd/cli.hpp"
#include "causalrd/errors.hpp"

namespace causalrd::cli {

using nlohmann::json;

namespace {

std::string at_key(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}
std::string at_index(const std::string& path, std::size_t k) {
  return path + "[" + std::to_string(k) + "]";
}

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
}

void only_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) throw ConfigError(at_key(path, item.key()), "unknown field");
  }
}

const json& need(const json& obj, const std::string& key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(at_key(path, key), "missing required field");
  return *it;
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

std::size_t as_count(const json& j, const std::string& path, std::size_t min_value) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  if (j.is_number_unsigned()) {
    const auto v = j.get<std::uint64_t>();
    if (v < min_value) throw ConfigError(path, "must be >= " + std::to_string(min_value));
    return static_cast<std::size_t>(v);
  }
  const auto v = j.get<std::int64_t>();
  if (v < static_cast<std::int64_t>(min_value)) {
    throw ConfigError(path, "must be >= " + std::to_string(min_value));
  }
  return static_cast<std::size_t>(v);
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

std::vector<double> as_vector(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a nonempty array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(as_number(j[k], at_index(path, k)));
  return out;
}

Table as_matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a nonempty array of rows");
  std::vector<double> data;
  std::size_t cols = 0;
  for (std::size_t r = 0; r < j.size(); ++r) {
    const auto row = as_vector(j[r], at_index(path, r));
    if (r == 0) cols = row.size();
    if (row.size() != cols) {
      throw ConfigError(at_index(path, r), "row has " + std::to_string(row.size()) +
                                               " entries, expected " + std::to_string(cols));
    }
    data.insert(data.end(), row.begin(), row.end());
  }
  return Table(j.size(), cols, std::move(data));
}

std::vector<Table> as_matrices(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a nonempty array of tables");
  std::vector<Table> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(as_matrix(j[k], at_index(path, k)));
  return out;
}

json matrix_json(const Table& t) {
  json rows = json::array();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto row = t.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

SourceSpec parse_source(const json& j, const std::string& path) {
  require_object(j, path);
  SourceSpec src;
  const std::string type = as_string(need(j, "type", path), at_key(path, "type"));
  if (type == "iid") {
    only_keys(j, path, {"type", "pmf"});
    src.type = SourceSpec::Type::iid;
    src.pmf = as_vector(need(j, "pmf", path), at_key(path, "pmf"));
  } else if (type == "markov") {
    only_keys(j, path, {"type", "initial", "transition"});
    src.type = SourceSpec::Type::markov;
    src.initial = as_vector(need(j, "initial", path), at_key(path, "initial"));
    src.transition = as_matrix(need(j, "transition", path), at_key(path, "transition"));
    if (src.transition.rows() != src.initial.size() || src.transition.cols() != src.initial.size()) {
      throw ConfigError(at_key(path, "transition"),
                        "must be " + std::to_string(src.initial.size()) + "x" +
                            std::to_string(src.initial.size()) + " to match initial");
    }
  } else if (type == "general") {
    only_keys(j, path, {"type", "kernels", "memory"});
    src.type = SourceSpec::Type::general;
    src.kernels = as_matrices(need(j, "kernels", path), at_key(path, "kernels"));
    if (j.contains("memory")) src.memory = as_count(j["memory"], at_key(path, "memory"), 0);
  } else {
    throw ConfigError(at_key(path, "type"), "must be one of iid, markov, general");
  }
  return src;
}

DistortionConfig parse_distortion(const json& j, const std::string& path) {
  require_object(j, path);
  DistortionConfig d;
  const std::string type = as_string(need(j, "type", path), at_key(path, "type"));
  if (type == "hamming") {
    only_keys(j, path, {"type"});
    d.type = DistortionConfig::Type::hamming;
  } else if (type == "single_letter") {
    only_keys(j, path, {"type", "table"});
    d.type = DistortionConfig::Type::single_letter;
    d.table = as_matrix(need(j, "table", path), at_key(path, "table"));
  } else if (type == "stage_tables") {
    only_keys(j, path, {"type", "tables"});
    d.type = DistortionConfig::Type::stage_tables;
    d.tables = as_matrices(need(j, "tables", path), at_key(path, "tables"));
  } else {
    throw ConfigError(at_key(path, "type"), "must be one of hamming, single_letter, stage_tables");
  }
  return d;
}

SolverParams parse_solver(const json& j, const std::string& path) {
  require_object(j, path);
  only_keys(j, path, {"s", "s_values", "D_target", "horizons", "fp_tol", "max_sweeps", "damping"});
  SolverParams p;
  if (j.contains("s")) {
    p.s = as_number(j["s"], at_key(path, "s"));
    if (!(*p.s <= 0.0)) throw ConfigError(at_key(path, "s"), "must be <= 0");
  }
  if (j.contains("s_values")) {
    const std::string sp = at_key(path, "s_values");
    p.s_values = as_vector(j["s_values"], sp);
    for (std::size_t k = 0; k < p.s_values.size(); ++k) {
      if (!(p.s_values[k] <= 0.0)) throw ConfigError(at_index(sp, k), "must be <= 0");
    }
  }
  if (j.contains("D_target")) {
    p.d_target = as_number(j["D_target"], at_key(path, "D_target"));
    if (!(*p.d_target >= 0.0)) throw ConfigError(at_key(path, "D_target"), "must be >= 0");
  }
  if (j.contains("horizons")) {
    const std::string hp = at_key(path, "horizons");
    const json& h = j["horizons"];
    if (!h.is_array() || h.empty()) throw ConfigError(hp, "expected a nonempty array of integers");
    for (std::size_t k = 0; k < h.size(); ++k) {
      p.horizons.push_back(as_count(h[k], at_index(hp, k), 1));
      if (k > 0 && p.horizons[k] <= p.horizons[k - 1]) {
        throw ConfigError(at_index(hp, k), "horizons must be strictly ascending");
      }
    }
  }
  if (j.contains("fp_tol")) {
    p.fp_tol = as_number(j["fp_tol"], at_key(path, "fp_tol"));
    if (!(p.fp_tol > 0.0)) throw ConfigError(at_key(path, "fp_tol"), "must be > 0");
  }
  if (j.contains("max_sweeps")) p.max_sweeps = as_count(j["max_sweeps"], at_key(path, "max_sweeps"), 1);
  if (j.contains("damping")) {
    p.damping = as_number(j["damping"], at_key(path, "damping"));
    if (!(p.damping > 0.0 && p.damping <= 1.0)) {
      throw ConfigError(at_key(path, "damping"), "must lie in (0, 1]");
    }
  }
  return p;
}

CheckParams parse_checks(const json& j, const std::string& path) {
  require_object(j, path);
  only_keys(j, path, {"enabled", "seed", "perturbations", "epsilon"});
  CheckParams c;
  if (j.contains("enabled")) {
    if (!j["enabled"].is_boolean()) throw ConfigError(at_key(path, "enabled"), "expected a boolean");
    c.enabled = j["enabled"].get<bool>();
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) {
      throw ConfigError(at_key(path, "seed"), "expected a nonnegative integer");
    }
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("perturbations")) {
    c.perturbations = as_count(j["perturbations"], at_key(path, "perturbations"), 1);
  }
  if (j.contains("epsilon")) {
    c.epsilon = as_number(j["epsilon"], at_key(path, "epsilon"));
    if (!(c.epsilon > 0.0 && c.epsilon <= 1.0)) {
      throw ConfigError(at_key(path, "epsilon"), "must lie in (0, 1]");
    }
  }
  return c;
}

OutputParams parse_output(const json& j, const std::string& path) {
  require_object(j, path);
  only_keys(j, path, {"format", "path", "units"});
  OutputParams o;
  if (j.contains("format")) {
    const std::string f = as_string(j["format"], at_key(path, "format"));
    if (f == "csv") {
      o.format = Format::csv;
    } else if (f == "json") {
      o.format = Format::json;
    } else {
      throw ConfigError(at_key(path, "format"), "must be csv or json");
    }
  }
  if (j.contains("path")) o.path = as_string(j["path"], at_key(path, "path"));
  if (j.contains("units")) {
    try {
      o.units = parse_units(as_string(j["units"], at_key(path, "units")));
    } catch (const ConfigError& e) {
      throw ConfigError(at_key(path, "units"), e.what());
    }
  }
  return o;
}

// Kernel row problems, reported against the field the row came from.
void check_rows(const SourceModel& model, const SourceSpec& spec) {
  const auto violations = validate_source(model);
  if (violations.empty()) return;
  const RowViolation& v = violations.front();
  std::string path;
  switch (spec.type) {
    case SourceSpec::Type::iid:
      path = "source.pmf";
      break;
    case SourceSpec::Type::markov:
      path = v.stage == 0 ? "source.initial" : at_index("source.transition", v.history);
      break;
    case SourceSpec::Type::general:
      path = at_index(at_index("source.kernels", v.stage), v.history);
      break;
  }
  std::string message = v.describe();
  if (violations.size() > 1) {
    message += " (and " + std::to_string(violations.size() - 1) + " more rows)";
  }
  throw ConfigError(path, message);
}

std::vector<std::size_t> source_sizes(const RunConfig& config, std::size_t n) {
  const SourceSpec& s = config.source;
  switch (s.type) {
    case SourceSpec::Type::iid:
      return std::vector<std::size_t>(n, s.pmf.size());
    case SourceSpec::Type::markov:
      return std::vector<std::size_t>(n, s.initial.size());
    case SourceSpec::Type::general: {
      if (s.kernels.size() != n) {
        throw ConfigError("source.kernels", "has " + std::to_string(s.kernels.size()) +
                                                " stages, horizon is " + std::to_string(n));
      }
      std::vector<std::size_t> sizes;
      for (const Table& k : s.kernels) sizes.push_back(k.cols());
      return sizes;
    }
  }
  return {};
}

std::vector<std::size_t> reproduction_sizes(const RunConfig& config, std::size_t n,
                                            const std::vector<std::size_t>& x_sizes) {
  if (!config.reproduction_sizes.empty()) {
    if (config.reproduction_sizes.size() != n) {
      throw ConfigError("reproduction.sizes", "has " +
                                                  std::to_string(config.reproduction_sizes.size()) +
                                                  " entries, horizon is " + std::to_string(n));
    }
    return config.reproduction_sizes;
  }
  if (config.reproduction_size) return std::vector<std::size_t>(n, *config.reproduction_size);
  return x_sizes;
}

StageAlphabets make_alphabets(const RunConfig& config, std::size_t n) {
  auto xs = source_sizes(config, n);
  auto ys = reproduction_sizes(config, n, xs);
  try {
    return StageAlphabets(std::move(xs), std::move(ys));
  } catch (const ResourceError& e) {
    throw ConfigError("horizon", e.what());
  }
}

void check_mode_fields(const RunConfig& c) {
  const SolverParams& p = c.solver;
  switch (c.mode) {
    case Mode::solve_s:
      if (!p.s) throw ConfigError("solver.s", "required by mode solve_s");
      break;
    case Mode::target_d:
      if (!p.d_target) throw ConfigError("solver.D_target", "required by mode target_d");
      break;
    case Mode::curve:
      if (p.s_values.empty()) throw ConfigError("solver.s_values", "required by mode curve");
      break;
    case Mode::horizon_sweep:
      if (!p.d_target) throw ConfigError("solver.D_target", "required by mode horizon_sweep");
      if (p.horizons.empty()) throw ConfigError("solver.horizons", "required by mode horizon_sweep");
      if (c.source.type == SourceSpec::Type::general) {
        throw ConfigError("source.type", "horizon_sweep needs an iid or markov source");
      }
      if (c.distortion.type == DistortionConfig::Type::stage_tables) {
        throw ConfigError("distortion.type", "horizon_sweep needs a single-letter distortion");
      }
      if (!c.reproduction_sizes.empty()) {
        throw ConfigError("reproduction.sizes", "horizon_sweep needs a single reproduction size");
      }
      break;
    case Mode::verify:
      if (p.s.has_value() == p.d_target.has_value()) {
        throw ConfigError("solver", "mode verify needs exactly one of s and D_target");
      }
      break;
  }
  if (c.mode != Mode::horizon_sweep && !c.horizon) throw ConfigError("horizon", "missing required field");
}

}  // namespace

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::solve_s:
      return "solve_s";
    case Mode::target_d:
      return "target_d";
    case Mode::curve:
      return "curve";
    case Mode::horizon_sweep:
      return "horizon_sweep";
    case Mode::verify:
      return "verify";
  }
  return "unknown";
}

std::string to_string(Units units) { return units == Units::bits ? "bits" : "nats"; }

Mode parse_mode(const std::string& text) {
  for (Mode m : {Mode::solve_s, Mode::target_d, Mode::curve, Mode::horizon_sweep, Mode::verify}) {
    if (to_string(m) == text) return m;
  }
  throw ConfigError("mode", "must be one of solve_s, target_d, curve, horizon_sweep, verify");
}

Units parse_units(const std::string& text) {
  if (text == "nats") return Units::nats;
  if (text == "bits") return Units::bits;
  throw ConfigError("", "units must be nats or bits");
}

SourceModel build_source(const RunConfig& config, std::size_t n_stages) {
  const SourceSpec& s = config.source;
  StageAlphabets alph = make_alphabets(config, n_stages);
  std::optional<SourceModel> model;
  try {
    switch (s.type) {
      // Raw kernels here; rows are checked below so errors can name the field.
      case SourceSpec::Type::iid:
        model.emplace(alph, std::vector<Table>(n_stages, Table(1, s.pmf.size(), s.pmf)), 0);
        break;
      case SourceSpec::Type::markov: {
        std::vector<Table> kernels(n_stages, s.transition);
        kernels[0] = Table(1, s.initial.size(), s.initial);
        model.emplace(alph, std::move(kernels), 1);
        break;
      }
      case SourceSpec::Type::general: {
        for (std::size_t i = 0; i < s.kernels.size(); ++i) {
          const std::size_t ctx = s.memory ? std::min(i, *s.memory) : i;
          const std::size_t rows = alph.x_prefixes(i) / alph.x_prefixes(i - ctx);
          if (s.kernels[i].rows() != rows) {
            throw ConfigError(at_index("source.kernels", i),
                              "expected " + std::to_string(rows) + " rows, got " +
                                  std::to_string(s.kernels[i].rows()));
          }
        }
        model.emplace(alph, s.kernels, s.memory);
        break;
      }
    }
  } catch (const ResourceError& e) {
    throw ConfigError("source", e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError("source", e.what());
  }
  check_rows(*model, s);
  return SourceModel::ingest(alph, model->kernels(), model->memory());
}

DistortionSpec build_distortion(const RunConfig& config, const StageAlphabets& alphabets) {
  const DistortionConfig& d = config.distortion;
  std::optional<DistortionSpec> spec;
  std::string path = "distortion";
  try {
    switch (d.type) {
      case DistortionConfig::Type::hamming:
        spec = DistortionSpec::hamming(alphabets.x_size(0));
        break;
      case DistortionConfig::Type::single_letter:
        path = "distortion.table";
        spec = DistortionSpec::single_letter(d.table);
        break;
      case DistortionConfig::Type::stage_tables:
        path = "distortion.tables";
        if (d.tables.size() != alphabets.n_stages()) {
          throw ConfigError(path, "has " + std::to_string(d.tables.size()) +
                                      " stages, horizon is " + std::to_string(alphabets.n_stages()));
        }
        for (std::size_t i = 0; i < d.tables.size(); ++i) {
          const std::size_t rows = alphabets.x_prefixes(i + 1), cols = alphabets.y_prefixes(i + 1);
          if (d.tables[i].rows() != rows || d.tables[i].cols() != cols) {
            throw ConfigError(at_index(path, i), "must be " + std::to_string(rows) + "x" +
                                                     std::to_string(cols));
          }
        }
        spec = DistortionSpec::stage_tables(d.tables);
        break;
    }
    spec->check_compatible(alphabets);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
  return *spec;
}

RunConfig parse_config(const json& doc) {
  require_object(doc, "");
  only_keys(doc, "", {"schema_version", "horizon", "source", "reproduction", "distortion", "mode",
                      "solver", "checks", "output"});
  RunConfig c;
  const json& version = need(doc, "schema_version", "");
  if (!version.is_number_integer() || version.get<std::int64_t>() != 1) {
    throw ConfigError("schema_version", "must be 1");
  }
  if (doc.contains("horizon")) c.horizon = as_count(doc["horizon"], "horizon", 1);
  c.source = parse_source(need(doc, "source", ""), "source");
  if (doc.contains("reproduction")) {
    const json& r = doc["reproduction"];
    require_object(r, "reproduction");
    only_keys(r, "reproduction", {"size", "sizes"});
    if (r.contains("size") == r.contains("sizes")) {
      throw ConfigError("reproduction", "give exactly one of size and sizes");
    }
    if (r.contains("size")) c.reproduction_size = as_count(r["size"], "reproduction.size", 1);
    if (r.contains("sizes")) {
      const json& sz = r["sizes"];
      if (!sz.is_array() || sz.empty()) throw ConfigError("reproduction.sizes", "expected a nonempty array");
      for (std::size_t k = 0; k < sz.size(); ++k) {
        c.reproduction_sizes.push_back(as_count(sz[k], at_index("reproduction.sizes", k), 1));
      }
    }
  }
  c.distortion = parse_distortion(need(doc, "distortion", ""), "distortion");
  c.mode = parse_mode(as_string(need(doc, "mode", ""), "mode"));
  if (doc.contains("solver")) c.solver = parse_solver(doc["solver"], "solver");
  if (doc.contains("checks")) c.checks = parse_checks(doc["checks"], "checks");
  if (doc.contains("output")) c.output = parse_output(doc["output"], "output");
  check_mode_fields(c);

  // Build every instance the run will touch so shape and row errors surface now.
  std::vector<std::size_t> horizons = c.mode == Mode::horizon_sweep
                                          ? c.solver.horizons
                                          : std::vector<std::size_t>{*c.horizon};
  for (std::size_t n : horizons) {
    const SourceModel src = build_source(c, n);
    build_distortion(c, src.alphabets());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc);
}

json to_json(const RunConfig& c) {
  json doc;
  doc["schema_version"] = c.schema_version;
  if (c.horizon) doc["horizon"] = *c.horizon;
  json src;
  switch (c.source.type) {
    case SourceSpec::Type::iid:
      src["type"] = "iid";
      src["pmf"] = c.source.pmf;
      break;
    case SourceSpec::Type::markov:
      src["type"] = "markov";
      src["initial"] = c.source.initial;
      src["transition"] = matrix_json(c.source.transition);
      break;
    case SourceSpec::Type::general: {
      src["type"] = "general";
      json ks = json::array();
      for (const Table& k : c.source.kernels) ks.push_back(matrix_json(k));
      src["kernels"] = ks;
      if (c.source.memory) src["memory"] = *c.source.memory;
      break;
    }
  }
  doc["source"] = src;
  if (c.reproduction_size) doc["reproduction"]["size"] = *c.reproduction_size;
  if (!c.reproduction_sizes.empty()) doc["reproduction"]["sizes"] = c.reproduction_sizes;
  json dist;
  switch (c.distortion.type) {
    case DistortionConfig::Type::hamming:
      dist["type"] = "hamming";
      break;
    case DistortionConfig::Type::single_letter:
      dist["type"] = "single_letter";
      dist["table"] = matrix_json(c.distortion.table);
      break;
    case DistortionConfig::Type::stage_tables: {
      dist["type"] = "stage_tables";
      json ts = json::array();
      for (const Table& t : c.distortion.tables) ts.push_back(matrix_json(t));
      dist["tables"] = ts;
      break;
    }
  }
  doc["distortion"] = dist;
  doc["mode"] = to_string(c.mode);
  json solver;
  if (c.solver.s) solver["s"] = *c.solver.s;
  if (!c.solver.s_values.empty()) solver["s_values"] = c.solver.s_values;
  if (c.solver.d_target) solver["D_target"] = *c.solver.d_target;
  if (!c.solver.horizons.empty()) solver["horizons"] = c.solver.horizons;
  solver["fp_tol"] = c.solver.fp_tol;
  solver["max_sweeps"] = c.solver.max_sweeps;
  solver["damping"] = c.solver.damping;
  doc["solver"] = solver;
  doc["checks"] = {{"enabled", c.checks.enabled},
                   {"seed", c.checks.seed},
                   {"perturbations", c.checks.perturbations},
                   {"epsilon", c.checks.epsilon}};
  doc["output"] = {{"format", c.output.format == Format::csv ? "csv" : "json"},
                   {"path", c.output.path},
                   {"units", to_string(c.output.units)}};
  return doc;
}

}  // namespace causalrd::cli
