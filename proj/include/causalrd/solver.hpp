#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "causalrd/measures.hpp"
#include "causalrd/model.hpp"

namespace causalrd {

// g_{i,n}(x^i, y^i) for every stage; stage i has rows indexed by the x^i code
// and columns by the y^i code. The last stage is identically zero.
struct GTable {
  std::vector<Table> stages;
};

struct SolverConfig {
  double s = 0.0;  // Lagrange multiplier, <= 0
  std::optional<MarginalProcess> nu_init;  // uniform when empty
  double fp_tol = 1e-9;
  std::size_t max_sweeps = 10000;
  double damping = 1.0;

  // Throws std::invalid_argument on an out-of-range field.
  void validate() const;
};

struct SolveResult {
  double s = 0.0;
  CausalPolicy policy;
  MarginalProcess nu;
  GTable g;
  double rate_nats = 0.0;  // total over all stages
  double distortion_total = 0.0;
  double distortion_per_symbol = 0.0;
  std::size_t sweeps_used = 0;
  bool converged = false;
  double residual = 0.0;
};

GTable backward_g(const SourceModel& source, const DistortionSpec& spec,
                  const MarginalProcess& nu, double s);

CausalPolicy tilted_policy(const SourceModel& source, const DistortionSpec& spec,
                           const MarginalProcess& nu, const GTable& g, double s);

MarginalProcess marginal_update(const SourceModel& source, const CausalPolicy& policy);

// Alternates nu -> g -> q* -> nu until the reachable rows of nu move by at
// most fp_tol. Non-convergence is reported in the result, not thrown.
SolveResult fixed_point_solve(const SourceModel& source, const DistortionSpec& spec,
                              const SolverConfig& config);

// Closed-form total rate at a fixed point, cross-checked against the directed
// information of `policy`; a gap above 1e-6 throws ConsistencyError.
double rdf_value(const SourceModel& source, const DistortionSpec& spec,
                 const CausalPolicy& policy, const MarginalProcess& nu, const GTable& g,
                 double s, double distortion_per_symbol);

// Best source-independent reproduction (the rate-zero end of the curve).
struct ZeroRatePoint {
  double distortion_per_symbol = 0.0;
  MarginalProcess nu;  // point-mass marginal of the minimizing reproduction
};
ZeroRatePoint max_distortion(const SourceModel& source, const DistortionSpec& spec);

// Smallest per-symbol distortion any causal policy can reach.
double min_distortion(const SourceModel& source, const DistortionSpec& spec);

enum class TargetStatus { solved, at_max_distortion, infeasible, multiplier_cap };

std::string to_string(TargetStatus status);

struct TargetResult {
  TargetStatus status = TargetStatus::solved;
  double s = 0.0;
  double rate_nats = 0.0;  // +inf when infeasible
  double distortion_per_symbol = 0.0;
  std::size_t probes = 0;
  std::optional<SolveResult> solve;  // empty when infeasible
};

inline constexpr double kDistortionTolerance = 1e-6;
inline constexpr double kMultiplierCap = 1e6;

// Bisects s so that the achieved per-symbol distortion is within
// `distortion_tol` of the target. config.s is ignored. Throws
// NonConvergenceError if an inner solve does not converge.
TargetResult solve_for_target_distortion(const SourceModel& source, const DistortionSpec& spec,
                                         double d_target, const SolverConfig& config,
                                         double distortion_tol = kDistortionTolerance);

struct CurvePoint {
  double s = 0.0;
  double distortion_per_symbol = 0.0;
  double rate_total_nats = 0.0;
  double rate_per_symbol_nats = 0.0;
  std::size_t sweeps = 0;
  bool converged = false;
  double residual = 0.0;
  std::string error;  // non-empty when the solve threw
};

struct CurveChecks {
  double monotone_violation = 0.0;    // max increase of R along increasing D
  double convexity_violation = 0.0;   // max excess of R over the chord of its neighbours
  double multiplier_violation = 0.0;  // max breach of D(s), R(s) ordering in s
  double slope_rel_error = 0.0;       // max |dR/dl - s| / |s| at interior points
  bool monotone = true;
  bool convex = true;
  bool multiplier_ordered = true;
  bool slope_ok = true;
};

inline constexpr double kCurveTolerance = 1e-9;
inline constexpr double kSlopeRelTolerance = 0.02;

struct RdCurve {
  std::size_t n_stages = 1;
  std::vector<CurvePoint> points;  // sorted by distortion ascending
  CurveChecks checks;
};

// When `solves` is given it receives one entry per s value, in input order;
// entries for points that threw are empty.
RdCurve trace_curve(const SourceModel& source, const DistortionSpec& spec,
                    std::span<const double> s_values, const SolverConfig& config,
                    std::vector<std::optional<SolveResult>>* solves = nullptr);

CurveChecks check_curve(const RdCurve& curve);

struct HorizonRate {
  std::size_t n_stages = 0;
  double rate_per_symbol_nats = 0.0;
  double distortion_per_symbol = 0.0;
  double s = 0.0;
  TargetStatus status = TargetStatus::solved;
};

using SourceFamily = std::function<SourceModel(std::size_t n_stages)>;

std::vector<HorizonRate> rate_limit_estimate(const SourceFamily& family,
                                             const DistortionSpec& spec, double d_target,
                                             std::span<const std::size_t> horizons,
                                             const SolverConfig& config);

// Largest Lagrangian decrease L(center) - L(center + eps * (q - center)) over
// random policies q with rows drawn uniformly from the simplex.
double verify_stationarity(const SourceModel& source, const DistortionSpec& spec,
                           const CausalPolicy& center, double s, std::size_t n_perturbations,
                           double epsilon, std::uint64_t seed);
double verify_stationarity(const SourceModel& source, const DistortionSpec& spec,
                           const SolveResult& result, std::size_t n_perturbations,
                           double epsilon, std::uint64_t seed);

}  // namespace causalrd
