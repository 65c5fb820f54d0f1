#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "causalrd/model.hpp"
#include "causalrd/table.hpp"

namespace causalrd {

inline constexpr double kMassTolerance = 1e-10;
inline constexpr double kConditioningFloor = 1e-12;

// Law of (x^n, y^n): rows are full source codes, columns full reproduction codes.
class JointLaw {
 public:
  JointLaw(StageAlphabets alphabets, Table table);

  const StageAlphabets& alphabets() const noexcept { return alphabets_; }
  const Table& table() const noexcept { return table_; }

 private:
  StageAlphabets alphabets_;
  Table table_;
};

// Output conditionals nu_i(y_i | y^{i-1}). `reach[i][h]` is the probability of
// reaching y-history h before stage i; an empty reach vector means every row
// counts as reachable (e.g. a solver initialization).
class MarginalProcess {
 public:
  MarginalProcess(StageAlphabets alphabets, std::vector<Table> kernels,
                  std::vector<std::vector<double>> reach = {});

  static MarginalProcess uniform(const StageAlphabets& alphabets);

  const StageAlphabets& alphabets() const noexcept { return alphabets_; }
  const std::vector<Table>& kernels() const noexcept { return kernels_; }
  const std::vector<std::vector<double>>& reach() const noexcept { return reach_; }

  std::span<const double> row(std::size_t stage, std::uint64_t y_prev) const {
    return kernels_[stage].row(y_prev);
  }
  bool reachable(std::size_t stage, std::uint64_t y_prev) const {
    return reach_.empty() || reach_[stage][y_prev] > 0.0;
  }

 private:
  StageAlphabets alphabets_;
  std::vector<Table> kernels_;
  std::vector<std::vector<double>> reach_;
};

struct InfoValue {
  double nats = 0.0;
};

struct DistortionValue {
  double total = 0.0;       // E[sum_i rho_i]
  double per_symbol = 0.0;  // total / n_stages
};

enum class MarkovVariant {
  kernel_factorization = 1,  // P(y^n|x^n) equals the causally conditioned product
  output_given_past = 2,     // Y_i <-> (X^i, Y^{i-1}) <-> X_{i+1}^n
  prefix_next_symbol = 3,    // Y^i <-> X^i <-> X_{i+1}
  future_given_past = 4,     // X_{i+1}^n <-> X^i <-> Y^i
};

// Q(y^n | x^n) = prod_i q_i(y_i | y^{i-1}, x^i), rows x^n, columns y^n.
Table causal_conditional(const CausalPolicy& policy);

JointLaw joint_law(std::span<const double> mu, const CausalPolicy& policy);
JointLaw joint_law(const SourceModel& source, const CausalPolicy& policy);

// laws[i] is the law of (x^i, y^i); the last entry is the full joint table.
std::vector<Table> prefix_joint_laws(const SourceModel& source, const CausalPolicy& policy);

MarginalProcess output_marginal(const JointLaw& joint);

InfoValue directed_information(std::span<const double> mu, const CausalPolicy& policy);
InfoValue directed_information(const SourceModel& source, const CausalPolicy& policy);
InfoValue mutual_information(const JointLaw& joint);

DistortionValue expected_distortion(const JointLaw& joint, const DistortionSpec& spec);
DistortionValue expected_distortion(std::span<const double> mu, const CausalPolicy& policy,
                                    const DistortionSpec& spec);

// Sup-norm conditional-independence residual over all stages i < n_stages-1.
double markov_chain_check(const JointLaw& joint, MarkovVariant variant);

// I(X^n -> Y^n) - s * E[d]; the quantity the solver minimizes at fixed s.
double lagrangian(const SourceModel& source, const CausalPolicy& policy,
                  const DistortionSpec& spec, double s);

}  // namespace causalrd
