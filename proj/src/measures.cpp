#include "causalrd/measures.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace causalrd {

namespace {

// Code of the length-(i+1) prefix of a full-length code.
struct PrefixCodes {
  std::vector<std::uint64_t> divisors;  // full code / divisors[i] = code of prefix x^i

  PrefixCodes(const std::vector<std::size_t>& sizes) : divisors(sizes.size()) {
    std::uint64_t d = 1;
    for (std::size_t i = sizes.size(); i-- > 0;) {
      divisors[i] = d;
      d *= sizes[i];
    }
  }
  std::uint64_t prefix(std::uint64_t full, std::size_t stage) const {
    return full / divisors[stage];
  }
  // Code of the symbols after `stage` (x_{stage+1}^n).
  std::uint64_t suffix(std::uint64_t full, std::size_t stage) const {
    return full % divisors[stage];
  }
};

// Prefix laws of the y-marginal: laws[len][code] = P(y^{len-1}), len = 0..n.
std::vector<std::vector<double>> y_prefix_laws(const JointLaw& joint) {
  const auto& alph = joint.alphabets();
  const Table& t = joint.table();
  const std::size_t n = alph.n_stages();
  std::vector<std::vector<double>> laws(n + 1);
  laws[n].assign(t.cols(), 0.0);
  for (std::size_t x = 0; x < t.rows(); ++x) {
    for (std::size_t y = 0; y < t.cols(); ++y) laws[n][y] += t(x, y);
  }
  for (std::size_t len = n; len-- > 0;) {
    const std::size_t ys = alph.y_size(len);
    laws[len].assign(alph.y_prefixes(len), 0.0);
    for (std::size_t c = 0; c < laws[len + 1].size(); ++c) laws[len][c / ys] += laws[len + 1][c];
  }
  return laws;
}

// max over c with P(c) > floor of |P(a,b|c) - P(a|c) P(b|c)|, where cell
// (x, y) of the joint maps to (a, b, c) through `index`.
template <typename Index>
double ci_residual(const Table& joint, std::size_t na, std::size_t nb, std::size_t nc,
                   Index index) {
  std::vector<double> abc(na * nb * nc, 0.0);
  for (std::uint64_t x = 0; x < joint.rows(); ++x) {
    for (std::uint64_t y = 0; y < joint.cols(); ++y) {
      const double p = joint(x, y);
      if (p == 0.0) continue;
      auto [a, b, c] = index(x, y);
      abc[(c * na + a) * nb + b] += p;
    }
  }
  double worst = 0.0;
  std::vector<double> pa(na), pb(nb);
  for (std::size_t c = 0; c < nc; ++c) {
    const double* block = abc.data() + c * na * nb;
    double pc = 0.0;
    std::fill(pa.begin(), pa.end(), 0.0);
    std::fill(pb.begin(), pb.end(), 0.0);
    for (std::size_t a = 0; a < na; ++a) {
      for (std::size_t b = 0; b < nb; ++b) {
        pa[a] += block[a * nb + b];
        pb[b] += block[a * nb + b];
        pc += block[a * nb + b];
      }
    }
    if (pc <= kConditioningFloor) continue;
    for (std::size_t a = 0; a < na; ++a) {
      for (std::size_t b = 0; b < nb; ++b) {
        const double r = std::abs(block[a * nb + b] / pc - (pa[a] / pc) * (pb[b] / pc));
        worst = std::max(worst, r);
      }
    }
  }
  return worst;
}

double kernel_factorization_residual(const JointLaw& joint) {
  const auto& alph = joint.alphabets();
  const Table& t = joint.table();
  const std::size_t n = alph.n_stages();
  const PrefixCodes xc(alph.x_sizes()), yc(alph.y_sizes());

  // xy[i] = P(x^i, y^i); xy_prev[i] = P(x^i, y^{i-1}).
  std::vector<Table> xy, xy_prev;
  for (std::size_t i = 0; i < n; ++i) {
    xy.emplace_back(alph.x_prefixes(i + 1), alph.y_prefixes(i + 1));
    xy_prev.emplace_back(alph.x_prefixes(i + 1), alph.y_prefixes(i));
  }
  std::vector<double> px(t.rows(), 0.0);
  for (std::uint64_t x = 0; x < t.rows(); ++x) {
    for (std::uint64_t y = 0; y < t.cols(); ++y) {
      const double p = t(x, y);
      px[x] += p;
      for (std::size_t i = 0; i < n; ++i) {
        xy[i](xc.prefix(x, i), yc.prefix(y, i)) += p;
        xy_prev[i](xc.prefix(x, i), yc.prefix(y, i) / alph.y_size(i)) += p;
      }
    }
  }
  double worst = 0.0;
  for (std::uint64_t x = 0; x < t.rows(); ++x) {
    if (px[x] <= kConditioningFloor) continue;
    for (std::uint64_t y = 0; y < t.cols(); ++y) {
      double product = 1.0;
      for (std::size_t i = 0; i < n && product != 0.0; ++i) {
        const std::uint64_t xi = xc.prefix(x, i);
        const std::uint64_t yi = yc.prefix(y, i);
        const double den = xy_prev[i](xi, yi / alph.y_size(i));
        product = den > 0.0 ? product * xy[i](xi, yi) / den : 0.0;
      }
      worst = std::max(worst, std::abs(t(x, y) / px[x] - product));
    }
  }
  return worst;
}

}  // namespace

JointLaw::JointLaw(StageAlphabets alphabets, Table table)
    : alphabets_(std::move(alphabets)), table_(std::move(table)) {
  const std::size_t n = alphabets_.n_stages();
  if (table_.rows() != alphabets_.x_prefixes(n) || table_.cols() != alphabets_.y_prefixes(n)) {
    throw std::invalid_argument("JointLaw: table shape does not match alphabets");
  }
  double mass = 0.0;
  for (double p : table_.data()) {
    if (p < 0.0 || !std::isfinite(p)) throw std::invalid_argument("JointLaw: negative entry");
    mass += p;
  }
  if (std::abs(mass - 1.0) > kMassTolerance) {
    throw std::invalid_argument("JointLaw: total mass " + std::to_string(mass) + " is not 1");
  }
}

MarginalProcess::MarginalProcess(StageAlphabets alphabets, std::vector<Table> kernels,
                                 std::vector<std::vector<double>> reach)
    : alphabets_(std::move(alphabets)), kernels_(std::move(kernels)), reach_(std::move(reach)) {
  if (kernels_.size() != alphabets_.n_stages()) {
    throw std::invalid_argument("MarginalProcess: wrong number of stage tables");
  }
  for (std::size_t i = 0; i < kernels_.size(); ++i) {
    if (kernels_[i].rows() != alphabets_.y_prefixes(i) ||
        kernels_[i].cols() != alphabets_.y_size(i)) {
      throw std::invalid_argument("MarginalProcess: stage " + std::to_string(i) +
                                  " table has the wrong shape");
    }
  }
  if (!reach_.empty() && reach_.size() != kernels_.size()) {
    throw std::invalid_argument("MarginalProcess: reach must cover every stage");
  }
}

MarginalProcess MarginalProcess::uniform(const StageAlphabets& alphabets) {
  std::vector<Table> kernels;
  for (std::size_t i = 0; i < alphabets.n_stages(); ++i) {
    kernels.emplace_back(alphabets.y_prefixes(i), alphabets.y_size(i), 1.0 / alphabets.y_size(i));
  }
  return MarginalProcess(alphabets, std::move(kernels));
}

Table causal_conditional(const CausalPolicy& policy) {
  const auto& alph = policy.alphabets();
  const std::size_t n = alph.n_stages();
  const std::size_t nx = alph.x_prefixes(n);
  const std::size_t ny = alph.y_prefixes(n);
  alph.require_within_budget(nx * ny, "causal conditional table");
  const PrefixCodes xc(alph.x_sizes());
  Table out(nx, ny);
  std::vector<double> cur, next;
  for (std::uint64_t x = 0; x < nx; ++x) {
    cur.assign(1, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t ys = alph.y_size(i);
      const std::uint64_t xi = xc.prefix(x, i);
      next.assign(cur.size() * ys, 0.0);
      for (std::uint64_t h = 0; h < cur.size(); ++h) {
        if (cur[h] == 0.0) continue;
        auto q = policy.row(i, h, xi);
        for (std::size_t y = 0; y < ys; ++y) next[h * ys + y] = cur[h] * q[y];
      }
      cur.swap(next);
    }
    std::copy(cur.begin(), cur.end(), out.row(x).begin());
  }
  return out;
}

JointLaw joint_law(std::span<const double> mu, const CausalPolicy& policy) {
  const auto& alph = policy.alphabets();
  if (mu.size() != alph.x_prefixes(alph.n_stages())) {
    throw std::invalid_argument("joint_law: source law has " + std::to_string(mu.size()) +
                                " entries, policy expects " +
                                std::to_string(alph.x_prefixes(alph.n_stages())));
  }
  Table t = causal_conditional(policy);
  for (std::size_t x = 0; x < t.rows(); ++x) {
    for (double& v : t.row(x)) v *= mu[x];
  }
  return JointLaw(alph, std::move(t));
}

JointLaw joint_law(const SourceModel& source, const CausalPolicy& policy) {
  if (!(source.alphabets() == policy.alphabets())) {
    throw std::invalid_argument("joint_law: source and policy alphabets differ");
  }
  Table t = prefix_joint_laws(source, policy).back();
  return JointLaw(source.alphabets(), std::move(t));
}

std::vector<Table> prefix_joint_laws(const SourceModel& source, const CausalPolicy& policy) {
  const auto& alph = source.alphabets();
  if (!(alph == policy.alphabets())) {
    throw std::invalid_argument("prefix_joint_laws: source and policy alphabets differ");
  }
  std::vector<Table> laws;
  Table prev(1, 1, 1.0);
  for (std::size_t i = 0; i < alph.n_stages(); ++i) {
    const std::size_t xs = alph.x_size(i), ys = alph.y_size(i);
    Table cur(prev.rows() * xs, prev.cols() * ys);
    for (std::uint64_t xh = 0; xh < prev.rows(); ++xh) {
      auto p = source.row(i, xh);
      for (std::size_t x = 0; x < xs; ++x) {
        const std::uint64_t xi = xh * xs + x;
        for (std::uint64_t yh = 0; yh < prev.cols(); ++yh) {
          const double w = prev(xh, yh) * p[x];
          if (w == 0.0) continue;
          auto q = policy.row(i, yh, xi);
          for (std::size_t y = 0; y < ys; ++y) cur(xi, yh * ys + y) = w * q[y];
        }
      }
    }
    laws.push_back(cur);
    prev = std::move(cur);
  }
  return laws;
}

MarginalProcess output_marginal(const JointLaw& joint) {
  const auto& alph = joint.alphabets();
  const auto laws = y_prefix_laws(joint);
  std::vector<Table> kernels;
  std::vector<std::vector<double>> reach;
  for (std::size_t i = 0; i < alph.n_stages(); ++i) {
    const std::size_t ys = alph.y_size(i);
    Table k(alph.y_prefixes(i), ys);
    for (std::uint64_t h = 0; h < k.rows(); ++h) {
      const double ph = laws[i][h];
      if (ph > 0.0) {
        double sum = 0.0;
        for (std::size_t y = 0; y < ys; ++y) sum += laws[i + 1][h * ys + y];
        for (std::size_t y = 0; y < ys; ++y) k(h, y) = laws[i + 1][h * ys + y] / sum;
      } else {
        for (std::size_t y = 0; y < ys; ++y) k(h, y) = 1.0 / ys;
      }
    }
    kernels.push_back(std::move(k));
    reach.push_back(laws[i]);
  }
  return MarginalProcess(alph, std::move(kernels), std::move(reach));
}

InfoValue directed_information(std::span<const double> mu, const CausalPolicy& policy) {
  const JointLaw joint = joint_law(mu, policy);
  const Table q = causal_conditional(policy);
  const Table& t = joint.table();
  std::vector<double> py(t.cols(), 0.0);
  for (std::size_t x = 0; x < t.rows(); ++x) {
    for (std::size_t y = 0; y < t.cols(); ++y) py[y] += t(x, y);
  }
  double sum = 0.0;
  for (std::size_t x = 0; x < t.rows(); ++x) {
    for (std::size_t y = 0; y < t.cols(); ++y) {
      const double p = t(x, y);
      if (p > 0.0) sum += p * (std::log(q(x, y)) - std::log(py[y]));
    }
  }
  return {std::max(sum, 0.0)};
}

InfoValue directed_information(const SourceModel& source, const CausalPolicy& policy) {
  return directed_information(full_joint_source(source), policy);
}

InfoValue mutual_information(const JointLaw& joint) {
  const Table& t = joint.table();
  std::vector<double> px(t.rows(), 0.0), py(t.cols(), 0.0);
  for (std::size_t x = 0; x < t.rows(); ++x) {
    for (std::size_t y = 0; y < t.cols(); ++y) {
      px[x] += t(x, y);
      py[y] += t(x, y);
    }
  }
  double sum = 0.0;
  for (std::size_t x = 0; x < t.rows(); ++x) {
    for (std::size_t y = 0; y < t.cols(); ++y) {
      const double p = t(x, y);
      if (p > 0.0) sum += p * (std::log(p) - std::log(px[x]) - std::log(py[y]));
    }
  }
  return {std::max(sum, 0.0)};
}

DistortionValue expected_distortion(const JointLaw& joint, const DistortionSpec& spec) {
  const auto& alph = joint.alphabets();
  spec.check_compatible(alph);
  const PrefixCodes xc(alph.x_sizes()), yc(alph.y_sizes());
  const Table& t = joint.table();
  const std::size_t n = alph.n_stages();
  double total = 0.0;
  for (std::uint64_t x = 0; x < t.rows(); ++x) {
    for (std::uint64_t y = 0; y < t.cols(); ++y) {
      const double p = t(x, y);
      if (p == 0.0) continue;
      double d = 0.0;
      for (std::size_t i = 0; i < n; ++i) d += spec.at(i, xc.prefix(x, i), yc.prefix(y, i));
      total += p * d;
    }
  }
  return {total, total / static_cast<double>(n)};
}

DistortionValue expected_distortion(std::span<const double> mu, const CausalPolicy& policy,
                                    const DistortionSpec& spec) {
  return expected_distortion(joint_law(mu, policy), spec);
}

double markov_chain_check(const JointLaw& joint, MarkovVariant variant) {
  if (variant == MarkovVariant::kernel_factorization) return kernel_factorization_residual(joint);

  const auto& alph = joint.alphabets();
  const std::size_t n = alph.n_stages();
  const PrefixCodes xc(alph.x_sizes()), yc(alph.y_sizes());
  const std::size_t nx = alph.x_prefixes(n);
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t x_past = alph.x_prefixes(i + 1);
    const std::size_t x_future = nx / x_past;
    const std::size_t y_past = alph.y_prefixes(i + 1);
    double r = 0.0;
    switch (variant) {
      case MarkovVariant::output_given_past: {
        const std::size_t ys = alph.y_size(i);
        r = ci_residual(joint.table(), ys, x_future, x_past * alph.y_prefixes(i),
                        [&](std::uint64_t x, std::uint64_t y) {
                          const std::uint64_t yi = yc.prefix(y, i);
                          return std::array<std::uint64_t, 3>{
                              yi % ys, xc.suffix(x, i), xc.prefix(x, i) * (y_past / ys) + yi / ys};
                        });
        break;
      }
      case MarkovVariant::prefix_next_symbol: {
        const std::size_t next = alph.x_size(i + 1);
        r = ci_residual(joint.table(), y_past, next, x_past,
                        [&](std::uint64_t x, std::uint64_t y) {
                          return std::array<std::uint64_t, 3>{
                              yc.prefix(y, i), xc.prefix(x, i + 1) % next, xc.prefix(x, i)};
                        });
        break;
      }
      case MarkovVariant::future_given_past:
        r = ci_residual(joint.table(), x_future, y_past, x_past,
                        [&](std::uint64_t x, std::uint64_t y) {
                          return std::array<std::uint64_t, 3>{xc.suffix(x, i), yc.prefix(y, i),
                                                              xc.prefix(x, i)};
                        });
        break;
      default:
        throw std::invalid_argument("markov_chain_check: unknown variant");
    }
    worst = std::max(worst, r);
  }
  return worst;
}

double lagrangian(const SourceModel& source, const CausalPolicy& policy,
                  const DistortionSpec& spec, double s) {
  const auto mu = full_joint_source(source);
  const JointLaw joint = joint_law(mu, policy);
  return directed_information(mu, policy).nats - s * expected_distortion(joint, spec).total;
}

}  // namespace causalrd
