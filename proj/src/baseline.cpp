#include "causalrd/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "causalrd/numeric.hpp"

namespace causalrd {

namespace {

// Q(y|x) proportional to q(y) exp(s rho(x, y)), computed in log space.
Table tilt(std::span<const double> px, const Table& rho, std::span<const double> q, double s) {
  Table channel(rho.rows(), rho.cols(), 0.0);
  std::vector<double> e(rho.cols());
  for (std::size_t x = 0; x < rho.rows(); ++x) {
    if (px[x] == 0.0) continue;
    for (std::size_t y = 0; y < rho.cols(); ++y) {
      e[y] = q[y] > 0.0 ? std::log(q[y]) + s * rho(x, y) : kNegInf;
    }
    const double lse = log_sum_exp(e);
    for (std::size_t y = 0; y < rho.cols(); ++y) channel(x, y) = std::exp(e[y] - lse);
  }
  return channel;
}

std::vector<double> output_of(std::span<const double> px, const Table& channel) {
  std::vector<double> q(channel.cols(), 0.0);
  for (std::size_t x = 0; x < channel.rows(); ++x) {
    for (std::size_t y = 0; y < channel.cols(); ++y) q[y] += px[x] * channel(x, y);
  }
  double sum = 0.0;
  for (double v : q) sum += v;
  for (double& v : q) v /= sum;
  return q;
}

Table block_distortion(const SourceModel& source, const DistortionSpec& spec) {
  const auto& alph = source.alphabets();
  const std::size_t n = alph.n_stages();
  const std::size_t nx = alph.x_prefixes(n), ny = alph.y_prefixes(n);
  alph.require_within_budget(nx * ny, "block distortion table");
  Table d(nx, ny, 0.0);
  for (std::uint64_t x = 0; x < nx; ++x) {
    for (std::uint64_t y = 0; y < ny; ++y) {
      std::uint64_t xd = 1, yd = 1;
      double sum = 0.0;
      for (std::size_t i = n; i-- > 0;) {
        sum += spec.at(i, x / xd, y / yd);
        xd *= alph.x_size(i);
        yd *= alph.y_size(i);
      }
      d(x, y) = sum;
    }
  }
  return d;
}

}  // namespace

BaPoint blahut_arimoto(std::span<const double> px, const Table& rho, double s, double tol,
                       std::size_t max_iters) {
  if (px.size() != rho.rows() || rho.cols() == 0) {
    throw std::invalid_argument("blahut_arimoto: distortion table shape mismatch");
  }
  if (!(s <= 0.0)) throw std::invalid_argument("blahut_arimoto: s must be <= 0");
  for (double v : rho.data()) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument("blahut_arimoto: distortion must be finite and >= 0");
    }
  }
  BaPoint out;
  out.s = s;
  std::vector<double> q(rho.cols(), 1.0 / static_cast<double>(rho.cols()));
  while (out.iterations < max_iters) {
    ++out.iterations;
    std::vector<double> next = output_of(px, tilt(px, rho, q, s));
    double change = 0.0;
    for (std::size_t y = 0; y < q.size(); ++y) change = std::max(change, std::abs(next[y] - q[y]));
    q = std::move(next);
    if (change <= tol) {
      out.converged = true;
      break;
    }
  }
  const Table channel = tilt(px, rho, q, s);
  const std::vector<double> induced = output_of(px, channel);
  double rate = 0.0, distortion = 0.0;
  for (std::size_t x = 0; x < rho.rows(); ++x) {
    for (std::size_t y = 0; y < rho.cols(); ++y) {
      const double p = px[x] * channel(x, y);
      if (p == 0.0) continue;
      distortion += p * rho(x, y);
      rate += p * (std::log(channel(x, y)) - std::log(induced[y]));
    }
  }
  out.rate_nats = std::max(rate, 0.0);
  out.distortion = distortion;
  out.output = induced;
  return out;
}

BlockRdfResult classical_block_rdf(const SourceModel& source, const DistortionSpec& spec,
                                   double d_target, double distortion_tol, double ba_tol,
                                   std::size_t max_iters) {
  if (!(d_target >= 0.0)) throw std::invalid_argument("classical_block_rdf: D_target < 0");
  spec.check_compatible(source.alphabets());
  const double n = static_cast<double>(source.n_stages());
  const std::vector<double> mu = full_joint_source(source);
  const Table rho = block_distortion(source, spec);
  const double target = d_target * n;

  double d_max = std::numeric_limits<double>::infinity();
  for (std::size_t y = 0; y < rho.cols(); ++y) {
    double e = 0.0;
    for (std::size_t x = 0; x < rho.rows(); ++x) e += mu[x] * rho(x, y);
    d_max = std::min(d_max, e);
  }
  if (target >= d_max) return {0.0, d_max, 0.0, true};

  double d_min = 0.0;
  for (std::size_t x = 0; x < rho.rows(); ++x) {
    auto r = rho.row(x);
    d_min += mu[x] * *std::min_element(r.begin(), r.end());
  }
  if (target < d_min) {
    return {std::numeric_limits<double>::infinity(), d_min,
            -std::numeric_limits<double>::infinity(), true};
  }

  const double tol_total = distortion_tol * n;
  double hi = 0.0, lo = -1.0;
  BaPoint at = blahut_arimoto(mu, rho, lo, ba_tol, max_iters);
  bool converged = at.converged;
  while (at.distortion > target + tol_total && lo > -1e6) {
    hi = lo;
    lo *= 2.0;
    at = blahut_arimoto(mu, rho, lo, ba_tol, max_iters);
    converged = converged && at.converged;
  }
  BaPoint best = at;
  for (int it = 0; it < 200 && std::abs(best.distortion - target) > tol_total; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    BaPoint p = blahut_arimoto(mu, rho, mid, ba_tol, max_iters);
    converged = converged && p.converged;
    (p.distortion > target ? hi : lo) = mid;
    if (std::abs(p.distortion - target) < std::abs(best.distortion - target)) best = std::move(p);
  }
  const double corrected = best.rate_nats + best.s * (target - best.distortion);
  return {std::max(corrected, 0.0), best.distortion, best.s, converged};
}

}  // namespace causalrd
