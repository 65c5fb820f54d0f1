#pragma once

#include <cstddef>

#include "causalrd/measures.hpp"
#include "causalrd/model.hpp"

namespace causalrd {

// Simplex grid for brute-force policy search: each row entry is a multiple of
// `resolution`, which must divide 1.
struct GridSpec {
  double resolution = 0.02;
  std::size_t max_cells = 50'000'000;  // cap on policies (or sub-searches) enumerated
};

struct OracleResult {
  double value = 0.0;  // I(X^n -> Y^n) - s E[d] of `policy`, evaluated by measures
  CausalPolicy policy;
  std::size_t enumerated = 0;
};

// Minimum of the Lagrangian over every grid policy, for binary reproduction
// alphabets and at most two stages.
//
// Stage-0 rows are enumerated outright. For each of them the last-stage rows
// are optimized per y-history: the conditional objective sum_x w_x c_x(a_x)
// minus the output entropy term equals min over an auxiliary output law nu of
// a row-separable sum, so only row-wise minimizers of c_x(a) - a*L need to be
// visited as L sweeps the real line. That set is finite and contains a grid
// optimum, so the result is the exact grid minimum.
OracleResult brute_force_lagrangian_min(const SourceModel& source, const DistortionSpec& spec,
                                        double s, const GridSpec& grid = {});

// Plain enumeration of every grid policy table. Only for very coarse grids.
OracleResult exhaustive_lagrangian_min(const SourceModel& source, const DistortionSpec& spec,
                                       double s, const GridSpec& grid);

// Directed information recomputed from the raw joint: every conditional
// factor q_i and nu_i is rebuilt from marginals of the joint.
InfoValue exhaustive_directed_info(const JointLaw& joint);

}  // namespace causalrd
