#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "causalrd/table.hpp"

namespace causalrd {

inline constexpr std::size_t kDefaultTableBudget = 100'000'000;
inline constexpr double kRowTolerance = 1e-12;

// Per-stage source and reproduction alphabet sizes for stages 0..n_stages-1,
// plus the entry budget every full-history table is checked against.
class StageAlphabets {
 public:
  StageAlphabets(std::vector<std::size_t> x_sizes, std::vector<std::size_t> y_sizes,
                 std::size_t table_budget = kDefaultTableBudget);

  static StageAlphabets uniform(std::size_t n_stages, std::size_t x_size, std::size_t y_size,
                                std::size_t table_budget = kDefaultTableBudget);

  std::size_t n_stages() const noexcept { return x_sizes_.size(); }
  std::size_t x_size(std::size_t stage) const { return x_sizes_.at(stage); }
  std::size_t y_size(std::size_t stage) const { return y_sizes_.at(stage); }
  const std::vector<std::size_t>& x_sizes() const noexcept { return x_sizes_; }
  const std::vector<std::size_t>& y_sizes() const noexcept { return y_sizes_; }
  std::size_t table_budget() const noexcept { return table_budget_; }

  // Number of source (reproduction) prefixes of the given length, 0..n_stages.
  // Length i+1 prefixes are the histories x^i.
  std::size_t x_prefixes(std::size_t length) const { return x_prefix_counts_.at(length); }
  std::size_t y_prefixes(std::size_t length) const { return y_prefix_counts_.at(length); }

  // Throws ResourceError if `entries` exceeds the budget.
  void require_within_budget(std::size_t entries, const std::string& what) const;

  bool operator==(const StageAlphabets&) const = default;

 private:
  std::vector<std::size_t> x_sizes_;
  std::vector<std::size_t> y_sizes_;
  std::size_t table_budget_;
  std::vector<std::size_t> x_prefix_counts_;
  std::vector<std::size_t> y_prefix_counts_;
};

// Mixed-radix code of a symbol prefix, stage 0 most significant.
struct HistoryCode {
  std::size_t length = 0;  // number of symbols (stage + 1)
  std::uint64_t code = 0;
  bool operator==(const HistoryCode&) const = default;
};

HistoryCode encode_history(std::span<const std::size_t> symbols,
                           std::span<const std::size_t> sizes);
std::vector<std::size_t> decode_history(HistoryCode history, std::span<const std::size_t> sizes);

// One malformed probability row.
struct RowViolation {
  std::size_t stage = 0;
  std::uint64_t history = 0;  // row index within the stage table
  double sum = 0.0;
  double deficit = 0.0;  // 1 - sum
  bool has_negative = false;

  std::string describe() const;
};

// Nonstationary source law: stage i holds p_i(x_i | x^{i-1}).
//
// With memory m the stage-i kernel only has rows for the last min(i, m)
// symbols; row lookups from a full-history code reduce it modulo the row
// count, which keeps exactly the trailing digits.
class SourceModel {
 public:
  SourceModel(StageAlphabets alphabets, std::vector<Table> kernels,
              std::optional<std::size_t> memory = std::nullopt);

  // Validates, throws ValidationError listing all violations, then
  // renormalizes rows that are within tolerance.
  static SourceModel ingest(StageAlphabets alphabets, std::vector<Table> kernels,
                            std::optional<std::size_t> memory = std::nullopt);

  static SourceModel iid(const StageAlphabets& alphabets, std::span<const double> pmf);
  static SourceModel markov(const StageAlphabets& alphabets, std::span<const double> initial,
                            const Table& transition);

  const StageAlphabets& alphabets() const noexcept { return alphabets_; }
  std::size_t n_stages() const noexcept { return alphabets_.n_stages(); }
  std::optional<std::size_t> memory() const noexcept { return memory_; }
  const std::vector<Table>& kernels() const noexcept { return kernels_; }

  std::size_t context_length(std::size_t stage) const;

  // Row p_stage(. | x^{stage-1}) addressed by the full-history code.
  std::span<const double> row(std::size_t stage, std::uint64_t x_prev_code) const {
    const Table& k = kernels_[stage];
    return k.row(x_prev_code % k.rows());
  }
  double prob(std::size_t stage, std::uint64_t x_prev_code, std::size_t symbol) const {
    return row(stage, x_prev_code)[symbol];
  }

 private:
  StageAlphabets alphabets_;
  std::vector<Table> kernels_;
  std::optional<std::size_t> memory_;
};

std::vector<RowViolation> validate_source(const SourceModel& source);

// Dense law over all x^{n} (full length) histories.
std::vector<double> full_joint_source(const SourceModel& source);

// laws[i] is the law of x^i over codes of length i+1.
std::vector<std::vector<double>> source_prefix_laws(const SourceModel& source);

// Additive distortion d = sum_i rho_i(x^i, y^i).
class DistortionSpec {
 public:
  enum class Mode { single_letter, stage_tables };

  static DistortionSpec single_letter(Table rho);
  static DistortionSpec hamming(std::size_t alphabet_size);
  // tables[i] has rows indexed by the x^i code and columns by the y^i code.
  static DistortionSpec stage_tables(std::vector<Table> tables);

  Mode mode() const noexcept { return mode_; }
  const Table& letter_table() const noexcept { return letter_; }
  const std::vector<Table>& tables() const noexcept { return tables_; }

  // Throws std::invalid_argument if the spec cannot serve these alphabets.
  void check_compatible(const StageAlphabets& alphabets) const;

  // Unchecked lookup; callers must have passed check_compatible.
  double at(std::size_t stage, std::uint64_t x_code, std::uint64_t y_code) const {
    if (mode_ == Mode::single_letter) {
      return letter_(x_code % letter_.rows(), y_code % letter_.cols());
    }
    return tables_[stage](x_code, y_code);
  }

  // Exact expansion of a single-letter spec into per-stage tables.
  DistortionSpec expanded(const StageAlphabets& alphabets) const;

 private:
  DistortionSpec() = default;
  Mode mode_ = Mode::single_letter;
  Table letter_;
  std::vector<Table> tables_;
};

// Range-checked rho_stage(x^stage, y^stage).
double distortion_lookup(const DistortionSpec& spec, const StageAlphabets& alphabets,
                         std::size_t stage, HistoryCode x_hist, HistoryCode y_hist);

// Causal reproduction kernels q_i(y_i | y^{i-1}, x^i). Stage i rows are
// ordered by (y^{i-1} code, x^i code), y-history major.
class CausalPolicy {
 public:
  CausalPolicy(StageAlphabets alphabets, std::vector<Table> kernels);

  static CausalPolicy uniform(const StageAlphabets& alphabets);

  const StageAlphabets& alphabets() const noexcept { return alphabets_; }
  const std::vector<Table>& kernels() const noexcept { return kernels_; }

  std::size_t row_index(std::size_t stage, std::uint64_t y_prev, std::uint64_t x_code) const {
    return y_prev * alphabets_.x_prefixes(stage + 1) + x_code;
  }
  std::span<const double> row(std::size_t stage, std::uint64_t y_prev,
                              std::uint64_t x_code) const {
    return kernels_[stage].row(row_index(stage, y_prev, x_code));
  }

  std::vector<RowViolation> validate() const;

 private:
  StageAlphabets alphabets_;
  std::vector<Table> kernels_;
};

// Policy whose causal conditional is weight * Q_a + (1 - weight) * Q_b. The
// causal conditionals form a convex set, so the mixture is again causal.
CausalPolicy mix(const CausalPolicy& a, const CausalPolicy& b, double weight);

}  // namespace causalrd
