#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalrd/model.hpp"
#include "causalrd/solver.hpp"

namespace causalrd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitInfeasible = 4;

inline constexpr char kCsvHeader[] = "s,D_per_symbol,R_total,R_per_symbol,sweeps,converged,residual";

// Schema violation; `path` names the offending field, e.g. "source.kernels[1][3]".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::runtime_error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

enum class Mode { solve_s, target_d, curve, horizon_sweep, verify };
enum class Units { nats, bits };
enum class Format { csv, json };

std::string to_string(Mode mode);
std::string to_string(Units units);
Mode parse_mode(const std::string& text);    // throws ConfigError
Units parse_units(const std::string& text);  // throws ConfigError

struct SourceSpec {
  enum class Type { iid, markov, general };
  Type type = Type::iid;
  std::vector<double> pmf;         // iid
  std::vector<double> initial;     // markov
  Table transition;                // markov
  std::vector<Table> kernels;      // general
  std::optional<std::size_t> memory;  // general
};

struct DistortionConfig {
  enum class Type { hamming, single_letter, stage_tables };
  Type type = Type::hamming;
  Table table;               // single_letter
  std::vector<Table> tables;  // stage_tables
};

struct SolverParams {
  std::optional<double> s;
  std::vector<double> s_values;
  std::optional<double> d_target;
  std::vector<std::size_t> horizons;
  double fp_tol = 1e-9;
  std::size_t max_sweeps = 10000;
  double damping = 1.0;
};

struct CheckParams {
  bool enabled = false;
  std::uint64_t seed = 0;
  std::size_t perturbations = 100;
  double epsilon = 1e-3;
};

struct OutputParams {
  Format format = Format::csv;
  std::string path;  // empty writes the main artifact to stdout
  Units units = Units::nats;
};

struct RunConfig {
  int schema_version = 1;
  std::optional<std::size_t> horizon;
  SourceSpec source;
  // Reproduction alphabet: one size for every stage, or per-stage sizes.
  // Both empty means the source sizes.
  std::optional<std::size_t> reproduction_size;
  std::vector<std::size_t> reproduction_sizes;
  DistortionConfig distortion;
  Mode mode = Mode::solve_s;
  SolverParams solver;
  CheckParams checks;
  OutputParams output;
};

// Parses and checks the whole document, including kernel rows. Throws ConfigError.
RunConfig parse_config(const nlohmann::json& document);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

// Problem instance for a given horizon. Throws ConfigError.
SourceModel build_source(const RunConfig& config, std::size_t n_stages);
DistortionSpec build_distortion(const RunConfig& config, const StageAlphabets& alphabets);

// Rate columns are converted to the requested units; distortion is not.
void emit_csv(const RdCurve& curve, Units units, std::ostream& out);
void write_csv(const RdCurve& curve, Units units, const std::filesystem::path& path);

struct CheckOutcome {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double tolerance = 0.0;
};

struct RunResult {
  int exit_code = kExitOk;
  std::string message;  // diagnostic for nonzero exit codes
  RdCurve curve;        // rows in emission order
  std::vector<nlohmann::json> point_details;
  std::vector<CheckOutcome> checks;
  nlohmann::json timing;  // seconds per phase
  nlohmann::json report;  // full JSON report
  std::string csv;        // rendered CSV
};

// Runs a parsed config; never throws for numerical trouble, it is folded into
// the exit code and message.
RunResult execute(const RunConfig& config);

struct Overrides {
  std::optional<Mode> mode;
  std::optional<std::string> out;
  std::optional<Units> units;
  std::optional<std::uint64_t> seed;
  bool check = false;
};

// Loads, executes and writes artifacts. With csv output the JSON report goes
// next to the CSV as <path>.report.json.
int run(const std::filesystem::path& config_path, const Overrides& overrides, std::ostream& err);

}  // namespace causalrd::cli
