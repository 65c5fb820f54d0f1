#include "causalrd/model.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "causalrd/errors.hpp"

namespace causalrd {

namespace {

constexpr std::size_t kSaturated = std::numeric_limits<std::size_t>::max();

std::size_t saturating_mul(std::size_t a, std::size_t b) {
  if (a != 0 && b > kSaturated / a) return kSaturated;
  return a * b;
}

std::vector<std::size_t> prefix_counts(const std::vector<std::size_t>& sizes) {
  std::vector<std::size_t> counts(sizes.size() + 1, 1);
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    counts[i + 1] = saturating_mul(counts[i], sizes[i]);
  }
  return counts;
}

void check_row(std::span<const double> row, std::size_t stage, std::uint64_t history,
               std::vector<RowViolation>& out) {
  double sum = 0.0;
  bool negative = false;
  for (double p : row) {
    sum += p;
    if (p < 0.0 || !std::isfinite(p)) negative = true;
  }
  if (negative || !(std::abs(sum - 1.0) <= kRowTolerance)) {
    out.push_back({stage, history, sum, 1.0 - sum, negative});
  }
}

std::string join_violations(const std::vector<RowViolation>& violations) {
  std::ostringstream os;
  for (std::size_t k = 0; k < violations.size(); ++k) {
    if (k) os << "; ";
    os << violations[k].describe();
  }
  return os.str();
}

}  // namespace

StageAlphabets::StageAlphabets(std::vector<std::size_t> x_sizes, std::vector<std::size_t> y_sizes,
                               std::size_t table_budget)
    : x_sizes_(std::move(x_sizes)), y_sizes_(std::move(y_sizes)), table_budget_(table_budget) {
  if (x_sizes_.empty()) throw std::invalid_argument("StageAlphabets: n_stages must be >= 1");
  if (x_sizes_.size() != y_sizes_.size()) {
    throw std::invalid_argument("StageAlphabets: x_sizes and y_sizes differ in length");
  }
  for (std::size_t i = 0; i < x_sizes_.size(); ++i) {
    if (x_sizes_[i] == 0 || y_sizes_[i] == 0) {
      throw std::invalid_argument("StageAlphabets: alphabet size at stage " + std::to_string(i) +
                                  " must be >= 1");
    }
  }
  x_prefix_counts_ = prefix_counts(x_sizes_);
  y_prefix_counts_ = prefix_counts(y_sizes_);
  // The largest table any module builds is the full joint over (x^n, y^n).
  require_within_budget(saturating_mul(x_prefix_counts_.back(), y_prefix_counts_.back()),
                        "joint table over full histories");
}

StageAlphabets StageAlphabets::uniform(std::size_t n_stages, std::size_t x_size,
                                       std::size_t y_size, std::size_t table_budget) {
  return StageAlphabets(std::vector<std::size_t>(n_stages, x_size),
                        std::vector<std::size_t>(n_stages, y_size), table_budget);
}

void StageAlphabets::require_within_budget(std::size_t entries, const std::string& what) const {
  if (entries > table_budget_) {
    throw ResourceError(what + " needs " +
                        (entries == kSaturated ? std::string("more than 2^64")
                                               : std::to_string(entries)) +
                        " entries, budget is " + std::to_string(table_budget_));
  }
}

HistoryCode encode_history(std::span<const std::size_t> symbols,
                           std::span<const std::size_t> sizes) {
  if (symbols.size() > sizes.size()) {
    throw std::invalid_argument("encode_history: more symbols than alphabet sizes");
  }
  std::uint64_t code = 0;
  for (std::size_t j = 0; j < symbols.size(); ++j) {
    if (symbols[j] >= sizes[j]) {
      throw std::invalid_argument("encode_history: symbol " + std::to_string(symbols[j]) +
                                  " out of range at position " + std::to_string(j));
    }
    code = code * sizes[j] + symbols[j];
  }
  return {symbols.size(), code};
}

std::vector<std::size_t> decode_history(HistoryCode history, std::span<const std::size_t> sizes) {
  if (history.length > sizes.size()) {
    throw std::invalid_argument("decode_history: prefix longer than alphabet list");
  }
  std::vector<std::size_t> symbols(history.length);
  std::uint64_t code = history.code;
  for (std::size_t j = history.length; j-- > 0;) {
    symbols[j] = code % sizes[j];
    code /= sizes[j];
  }
  if (code != 0) throw std::invalid_argument("decode_history: code out of range");
  return symbols;
}

std::string RowViolation::describe() const {
  std::ostringstream os;
  os.precision(12);
  os << "stage " << stage << ", history " << history << ": row sums to " << sum << " (deficit "
     << deficit << ")";
  if (has_negative) os << ", has negative or non-finite entry";
  return os.str();
}

SourceModel::SourceModel(StageAlphabets alphabets, std::vector<Table> kernels,
                         std::optional<std::size_t> memory)
    : alphabets_(std::move(alphabets)), kernels_(std::move(kernels)), memory_(memory) {
  if (kernels_.size() != alphabets_.n_stages()) {
    throw std::invalid_argument("SourceModel: expected " + std::to_string(alphabets_.n_stages()) +
                                " stage kernels, got " + std::to_string(kernels_.size()));
  }
  for (std::size_t i = 0; i < kernels_.size(); ++i) {
    const std::size_t ctx = context_length(i);
    const std::size_t rows = alphabets_.x_prefixes(i) / alphabets_.x_prefixes(i - ctx);
    alphabets_.require_within_budget(saturating_mul(rows, alphabets_.x_size(i)),
                                     "source kernel at stage " + std::to_string(i));
    if (kernels_[i].rows() != rows || kernels_[i].cols() != alphabets_.x_size(i)) {
      throw std::invalid_argument("SourceModel: stage " + std::to_string(i) + " kernel must be " +
                                  std::to_string(rows) + "x" +
                                  std::to_string(alphabets_.x_size(i)));
    }
  }
}

SourceModel SourceModel::ingest(StageAlphabets alphabets, std::vector<Table> kernels,
                                std::optional<std::size_t> memory) {
  SourceModel model(std::move(alphabets), std::move(kernels), memory);
  auto violations = validate_source(model);
  if (!violations.empty()) throw ValidationError(join_violations(violations));
  for (Table& k : model.kernels_) {
    for (std::size_t r = 0; r < k.rows(); ++r) {
      auto row = k.row(r);
      double sum = 0.0;
      for (double p : row) sum += p;
      for (double& p : row) p /= sum;
    }
  }
  return model;
}

SourceModel SourceModel::iid(const StageAlphabets& alphabets, std::span<const double> pmf) {
  std::vector<Table> kernels;
  for (std::size_t i = 0; i < alphabets.n_stages(); ++i) {
    kernels.emplace_back(1, pmf.size(), std::vector<double>(pmf.begin(), pmf.end()));
  }
  return ingest(alphabets, std::move(kernels), 0);
}

SourceModel SourceModel::markov(const StageAlphabets& alphabets, std::span<const double> initial,
                                const Table& transition) {
  std::vector<Table> kernels;
  kernels.emplace_back(1, initial.size(), std::vector<double>(initial.begin(), initial.end()));
  for (std::size_t i = 1; i < alphabets.n_stages(); ++i) kernels.push_back(transition);
  return ingest(alphabets, std::move(kernels), 1);
}

std::size_t SourceModel::context_length(std::size_t stage) const {
  return memory_ ? std::min(stage, *memory_) : stage;
}

std::vector<RowViolation> validate_source(const SourceModel& source) {
  std::vector<RowViolation> out;
  for (std::size_t i = 0; i < source.n_stages(); ++i) {
    const Table& k = source.kernels()[i];
    for (std::size_t r = 0; r < k.rows(); ++r) check_row(k.row(r), i, r, out);
  }
  return out;
}

std::vector<std::vector<double>> source_prefix_laws(const SourceModel& source) {
  const auto& alph = source.alphabets();
  std::vector<std::vector<double>> laws;
  std::vector<double> prev{1.0};
  for (std::size_t i = 0; i < source.n_stages(); ++i) {
    const std::size_t xs = alph.x_size(i);
    std::vector<double> cur(prev.size() * xs);
    for (std::uint64_t h = 0; h < prev.size(); ++h) {
      auto row = source.row(i, h);
      for (std::size_t x = 0; x < xs; ++x) cur[h * xs + x] = prev[h] * row[x];
    }
    laws.push_back(cur);
    prev = std::move(cur);
  }
  return laws;
}

std::vector<double> full_joint_source(const SourceModel& source) {
  const auto& alph = source.alphabets();
  alph.require_within_budget(alph.x_prefixes(alph.n_stages()), "full source law");
  return source_prefix_laws(source).back();
}

DistortionSpec DistortionSpec::single_letter(Table rho) {
  for (double v : rho.data()) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument("DistortionSpec: entries must be finite and >= 0");
    }
  }
  if (rho.rows() == 0 || rho.cols() == 0) {
    throw std::invalid_argument("DistortionSpec: empty single-letter table");
  }
  DistortionSpec spec;
  spec.mode_ = Mode::single_letter;
  spec.letter_ = std::move(rho);
  return spec;
}

DistortionSpec DistortionSpec::hamming(std::size_t alphabet_size) {
  Table rho(alphabet_size, alphabet_size, 1.0);
  for (std::size_t k = 0; k < alphabet_size; ++k) rho(k, k) = 0.0;
  return single_letter(std::move(rho));
}

DistortionSpec DistortionSpec::stage_tables(std::vector<Table> tables) {
  for (std::size_t i = 0; i < tables.size(); ++i) {
    for (double v : tables[i].data()) {
      if (!std::isfinite(v) || v < 0.0) {
        throw std::invalid_argument("DistortionSpec: stage " + std::to_string(i) +
                                    " has a negative or non-finite entry");
      }
    }
  }
  DistortionSpec spec;
  spec.mode_ = Mode::stage_tables;
  spec.tables_ = std::move(tables);
  return spec;
}

void DistortionSpec::check_compatible(const StageAlphabets& alphabets) const {
  if (mode_ == Mode::single_letter) {
    for (std::size_t i = 0; i < alphabets.n_stages(); ++i) {
      if (alphabets.x_size(i) != letter_.rows() || alphabets.y_size(i) != letter_.cols()) {
        throw std::invalid_argument(
            "DistortionSpec: single-letter table is " + std::to_string(letter_.rows()) + "x" +
            std::to_string(letter_.cols()) + " but stage " + std::to_string(i) +
            " alphabets are " + std::to_string(alphabets.x_size(i)) + "x" +
            std::to_string(alphabets.y_size(i)));
      }
    }
    return;
  }
  if (tables_.size() != alphabets.n_stages()) {
    throw std::invalid_argument("DistortionSpec: expected " +
                                std::to_string(alphabets.n_stages()) + " stage tables, got " +
                                std::to_string(tables_.size()));
  }
  for (std::size_t i = 0; i < tables_.size(); ++i) {
    if (tables_[i].rows() != alphabets.x_prefixes(i + 1) ||
        tables_[i].cols() != alphabets.y_prefixes(i + 1)) {
      throw std::invalid_argument("DistortionSpec: stage " + std::to_string(i) +
                                  " table must be " + std::to_string(alphabets.x_prefixes(i + 1)) +
                                  "x" + std::to_string(alphabets.y_prefixes(i + 1)));
    }
  }
}

DistortionSpec DistortionSpec::expanded(const StageAlphabets& alphabets) const {
  check_compatible(alphabets);
  if (mode_ == Mode::stage_tables) return *this;
  std::vector<Table> tables;
  for (std::size_t i = 0; i < alphabets.n_stages(); ++i) {
    const std::size_t xr = alphabets.x_prefixes(i + 1);
    const std::size_t yr = alphabets.y_prefixes(i + 1);
    alphabets.require_within_budget(xr * yr, "expanded distortion table");
    Table t(xr, yr);
    for (std::uint64_t x = 0; x < xr; ++x) {
      for (std::uint64_t y = 0; y < yr; ++y) {
        t(x, y) = letter_(x % alphabets.x_size(i), y % alphabets.y_size(i));
      }
    }
    tables.push_back(std::move(t));
  }
  return stage_tables(std::move(tables));
}

double distortion_lookup(const DistortionSpec& spec, const StageAlphabets& alphabets,
                         std::size_t stage, HistoryCode x_hist, HistoryCode y_hist) {
  if (stage >= alphabets.n_stages()) {
    throw std::invalid_argument("distortion_lookup: stage out of range");
  }
  if (x_hist.length != stage + 1 || y_hist.length != stage + 1) {
    throw std::invalid_argument("distortion_lookup: history lengths must equal stage + 1");
  }
  if (x_hist.code >= alphabets.x_prefixes(stage + 1) ||
      y_hist.code >= alphabets.y_prefixes(stage + 1)) {
    throw std::invalid_argument("distortion_lookup: history code out of range");
  }
  spec.check_compatible(alphabets);
  return spec.at(stage, x_hist.code, y_hist.code);
}

CausalPolicy::CausalPolicy(StageAlphabets alphabets, std::vector<Table> kernels)
    : alphabets_(std::move(alphabets)), kernels_(std::move(kernels)) {
  if (kernels_.size() != alphabets_.n_stages()) {
    throw std::invalid_argument("CausalPolicy: wrong number of stage kernels");
  }
  for (std::size_t i = 0; i < kernels_.size(); ++i) {
    const std::size_t rows = alphabets_.y_prefixes(i) * alphabets_.x_prefixes(i + 1);
    if (kernels_[i].rows() != rows || kernels_[i].cols() != alphabets_.y_size(i)) {
      throw std::invalid_argument("CausalPolicy: stage " + std::to_string(i) + " kernel must be " +
                                  std::to_string(rows) + "x" +
                                  std::to_string(alphabets_.y_size(i)));
    }
  }
}

CausalPolicy CausalPolicy::uniform(const StageAlphabets& alphabets) {
  std::vector<Table> kernels;
  for (std::size_t i = 0; i < alphabets.n_stages(); ++i) {
    const std::size_t rows = alphabets.y_prefixes(i) * alphabets.x_prefixes(i + 1);
    alphabets.require_within_budget(rows * alphabets.y_size(i), "policy kernel");
    kernels.emplace_back(rows, alphabets.y_size(i), 1.0 / alphabets.y_size(i));
  }
  return CausalPolicy(alphabets, std::move(kernels));
}

std::vector<RowViolation> CausalPolicy::validate() const {
  std::vector<RowViolation> out;
  for (std::size_t i = 0; i < kernels_.size(); ++i) {
    for (std::size_t r = 0; r < kernels_[i].rows(); ++r) check_row(kernels_[i].row(r), i, r, out);
  }
  return out;
}

CausalPolicy mix(const CausalPolicy& a, const CausalPolicy& b, double weight) {
  const auto& alph = a.alphabets();
  if (!(alph == b.alphabets())) {
    throw std::invalid_argument("mix: policies over different alphabets");
  }
  // Mix the prefix conditionals Q_{0,i}(y^i | x^i) and read the stage kernels
  // back off as ratios of consecutive prefixes.
  std::vector<Table> kernels;
  Table prev_a(1, 1, 1.0), prev_b(1, 1, 1.0);
  for (std::size_t i = 0; i < alph.n_stages(); ++i) {
    const std::size_t xs = alph.x_size(i), ys = alph.y_size(i);
    const std::size_t nx = alph.x_prefixes(i + 1);
    Table cur_a(nx, alph.y_prefixes(i + 1)), cur_b(nx, alph.y_prefixes(i + 1));
    Table k(alph.y_prefixes(i) * nx, ys);
    for (std::uint64_t xc = 0; xc < nx; ++xc) {
      for (std::uint64_t yh = 0; yh < alph.y_prefixes(i); ++yh) {
        const double wa = weight * prev_a(xc / xs, yh);
        const double wb = (1.0 - weight) * prev_b(xc / xs, yh);
        auto qa = a.row(i, yh, xc);
        auto qb = b.row(i, yh, xc);
        auto out = k.row(a.row_index(i, yh, xc));
        for (std::size_t y = 0; y < ys; ++y) {
          cur_a(xc, yh * ys + y) = prev_a(xc / xs, yh) * qa[y];
          cur_b(xc, yh * ys + y) = prev_b(xc / xs, yh) * qb[y];
          out[y] = wa + wb > 0.0 ? (wa * qa[y] + wb * qb[y]) / (wa + wb)
                                 : weight * qa[y] + (1.0 - weight) * qb[y];
        }
      }
    }
    kernels.push_back(std::move(k));
    prev_a = std::move(cur_a);
    prev_b = std::move(cur_b);
  }
  return CausalPolicy(alph, std::move(kernels));
}

}  // namespace causalrd
