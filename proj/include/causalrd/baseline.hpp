#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "causalrd/model.hpp"
#include "causalrd/table.hpp"

namespace causalrd {

// One parametric point of the classical rate-distortion curve.
struct BaPoint {
  double s = 0.0;
  double rate_nats = 0.0;
  double distortion = 0.0;  // E[rho] under the returned test channel
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> output;  // reproduction marginal q(y)
};

// Classical Blahut-Arimoto at multiplier s: alternates the tilted test channel
// Q(y|x) ~ q(y) exp(s rho(x,y)) with its output marginal, starting from a
// uniform q, until q moves by at most `tol` in sup-norm.
BaPoint blahut_arimoto(std::span<const double> px, const Table& rho, double s,
                       double tol = 1e-9, std::size_t max_iters = 10000);

struct BlockRdfResult {
  double rate_total_nats = 0.0;
  double distortion_total = 0.0;  // achieved by the BA point closest to the target
  double s = 0.0;
  bool converged = true;
};

// Classical (noncausal) RDF of the whole block X^n -> Y^n with additive
// distortion, at per-symbol target `d_target`. The returned rate is corrected
// to the exact target along the supporting line of slope s.
BlockRdfResult classical_block_rdf(const SourceModel& source, const DistortionSpec& spec,
                                   double d_target, double distortion_tol = 1e-6,
                                   double ba_tol = 1e-12, std::size_t max_iters = 100000);

}  // namespace causalrd
