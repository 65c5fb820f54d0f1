#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "causalrd/measures.hpp"
#include "causalrd/numeric.hpp"
#include "fixtures.hpp"

using namespace causalrd;
using namespace causalrd::testing;

namespace {

const double kLn2 = std::log(2.0);

// The y-marginal of a joint, summed directly over x.
std::vector<double> y_marginal(const JointLaw& joint) {
  const Table& t = joint.table();
  std::vector<double> out(t.cols(), 0.0);
  for (std::size_t x = 0; x < t.rows(); ++x) {
    for (std::size_t y = 0; y < t.cols(); ++y) out[y] += t(x, y);
  }
  return out;
}

}  // namespace

TEST_CASE("joint_law examples") {
  SUBCASE("identity channel, one stage") {
    const auto joint = joint_law(fair_iid(1), identity_policy(binary(1)));
    CHECK(joint.table()(0, 0) == 0.5);
    CHECK(joint.table()(1, 1) == 0.5);
    CHECK(joint.table()(0, 1) == 0.0);
    CHECK(joint.table()(1, 0) == 0.0);
  }
  SUBCASE("uniform policy gives the product with the uniform law") {
    const auto src = flip_markov(2, 0.3);
    const auto mu = full_joint_source(src);
    const auto joint = joint_law(src, CausalPolicy::uniform(binary(2)));
    for (std::size_t x = 0; x < 4; ++x) {
      for (std::size_t y = 0; y < 4; ++y) CHECK(joint.table()(x, y) == doctest::Approx(mu[x] * 0.25));
    }
  }
  SUBCASE("markov source through per-stage BSC, 16 hand products") {
    const double f = 0.3, e = 0.1;
    const auto joint = joint_law(flip_markov(2, f), bsc_policy(binary(2), e));
    for (std::size_t x0 = 0; x0 < 2; ++x0) {
      for (std::size_t x1 = 0; x1 < 2; ++x1) {
        for (std::size_t y0 = 0; y0 < 2; ++y0) {
          for (std::size_t y1 = 0; y1 < 2; ++y1) {
            const double px = 0.5 * (x0 == x1 ? 1 - f : f);
            const double q = (y0 == x0 ? 1 - e : e) * (y1 == x1 ? 1 - e : e);
            CHECK(joint.table()(2 * x0 + x1, 2 * y0 + y1) == doctest::Approx(px * q).epsilon(1e-14));
          }
        }
      }
    }
  }
  SUBCASE("shape mismatch") {
    const std::vector<double> mu(8, 0.125);
    CHECK_THROWS_AS(joint_law(mu, identity_policy(binary(2))), std::invalid_argument);
  }
}

TEST_CASE("output_marginal examples") {
  SUBCASE("identity on fair iid is uniform") {
    const auto nu = output_marginal(joint_law(fair_iid(3), identity_policy(binary(3))));
    for (std::size_t i = 0; i < 3; ++i) {
      for (double v : nu.kernels()[i].data()) CHECK(v == doctest::Approx(0.5));
    }
  }
  SUBCASE("constant policy is a point mass") {
    const auto nu = output_marginal(joint_law(fair_iid(2), constant_policy(binary(2), 0)));
    CHECK(nu.row(0, 0)[0] == 1.0);
    CHECK(nu.row(1, 0)[0] == 1.0);
    CHECK(nu.reachable(1, 0));
    CHECK_FALSE(nu.reachable(1, 1));
    CHECK(nu.row(1, 1)[0] == 0.5);  // unreachable rows are uniform
  }
}

TEST_CASE("output_marginal rows normalize and rebuild the y-marginal") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const StageAlphabets alph({2, 3, 2}, {2, 2, 3});
    const auto src = random_source(alph, rng);
    const auto joint = joint_law(src, random_policy(alph, rng));
    const auto nu = output_marginal(joint);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t r = 0; r < nu.kernels()[i].rows(); ++r) {
        double sum = 0.0;
        for (double v : nu.row(i, r)) sum += v;
        CHECK(std::abs(sum - 1.0) < 1e-12);
      }
    }
    const auto direct = y_marginal(joint);
    for (std::size_t y = 0; y < direct.size(); ++y) {
      const auto ys = decode_history({3, y}, alph.y_sizes());
      double chain = 1.0;
      std::uint64_t prev = 0;
      for (std::size_t i = 0; i < 3; ++i) {
        chain *= nu.row(i, prev)[ys[i]];
        prev = prev * alph.y_size(i) + ys[i];
      }
      CHECK(std::abs(chain - direct[y]) < 1e-12);
    }
  }
}

TEST_CASE("directed_information examples") {
  CHECK(directed_information(fair_iid(2), CausalPolicy::uniform(binary(2))).nats == doctest::Approx(0.0));
  CHECK(directed_information(fair_iid(3), constant_policy(binary(3), 1)).nats == 0.0);
  CHECK(directed_information(fair_iid(2), identity_policy(binary(2))).nats ==
        doctest::Approx(2 * kLn2).epsilon(1e-14));
  const double direct = 2 * 0.5 * (0.9 * std::log(0.9 / 0.5) + 0.1 * std::log(0.1 / 0.5));
  const double di = directed_information(fair_iid(1), bsc_policy(binary(1), 0.1)).nats;
  CHECK(di == doctest::Approx(kLn2 - hb(0.1)).epsilon(1e-14));
  CHECK(di == doctest::Approx(direct).epsilon(1e-14));
}

TEST_CASE("mutual_information examples") {
  CHECK(mutual_information(joint_law(fair_iid(2), CausalPolicy::uniform(binary(2)))).nats ==
        doctest::Approx(0.0));
  CHECK(mutual_information(joint_law(fair_iid(2), identity_policy(binary(2)))).nats ==
        doctest::Approx(2 * kLn2).epsilon(1e-14));
}

TEST_CASE("directed information is nonnegative and equals mutual information for causal joints") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const StageAlphabets alph({2, 2, 3}, {3, 2, 2});
    const auto src = random_source(alph, rng);
    const auto policy = random_policy(alph, rng);
    const double di = directed_information(src, policy).nats;
    const double mi = mutual_information(joint_law(src, policy)).nats;
    CHECK(di >= 0.0);
    CHECK(std::abs(di - mi) < 1e-10);
  }
}

TEST_CASE("expected_distortion examples") {
  const auto ham = DistortionSpec::hamming(2);
  const auto mu2 = full_joint_source(fair_iid(2));
  CHECK(expected_distortion(mu2, identity_policy(binary(2)), ham).total == 0.0);
  const auto mu3 = full_joint_source(fair_iid(3));
  const auto d0 = expected_distortion(mu3, constant_policy(binary(3), 0), ham);
  CHECK(d0.per_symbol == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(d0.total == doctest::Approx(1.5).epsilon(1e-14));
  const auto mm = full_joint_source(flip_markov(3, 0.3));
  CHECK(expected_distortion(mm, bsc_policy(binary(3), 0.1), ham).per_symbol ==
        doctest::Approx(0.1).epsilon(1e-13));
}

TEST_CASE("distortion is linear and directed information convex in the policy") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const StageAlphabets alph({2, 3, 2}, {2, 2, 2});
    const auto src = random_source(alph, rng);
    const auto mu = full_joint_source(src);
    const auto spec = random_stage_distortion(alph, rng);
    const auto a = random_policy(alph, rng);
    const auto b = random_policy(alph, rng);
    const double w = unif(rng);
    const auto m = mix(a, b, w);
    CHECK(m.validate().empty());
    const double da = expected_distortion(mu, a, spec).total;
    const double db = expected_distortion(mu, b, spec).total;
    CHECK(std::abs(expected_distortion(mu, m, spec).total - (w * da + (1 - w) * db)) < 1e-12);
    const double ia = directed_information(mu, a).nats;
    const double ib = directed_information(mu, b).nats;
    CHECK(directed_information(mu, m).nats <= w * ia + (1 - w) * ib + 1e-10);
  }
}

TEST_CASE("markov_chain_check") {
  const MarkovVariant all[] = {MarkovVariant::kernel_factorization, MarkovVariant::output_given_past,
                               MarkovVariant::prefix_next_symbol, MarkovVariant::future_given_past};
  SUBCASE("causal joints satisfy every variant") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      const StageAlphabets alph({2, 2, 2}, {2, 3, 2});
      const auto joint = joint_law(random_source(alph, rng), random_policy(alph, rng));
      for (auto v : all) CHECK(markov_chain_check(joint, v) < 1e-10);
    }
  }
  SUBCASE("identity joint has zero residual") {
    const auto joint = joint_law(flip_markov(3, 0.3), identity_policy(binary(3)));
    for (auto v : all) CHECK(markov_chain_check(joint, v) == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("anticipative kernel is caught") {
    // y_0 copies x_1 with probability 0.9; y_1 copies x_1.
    const auto alph = binary(2);
    const auto mu = full_joint_source(fair_iid(2));
    Table t(4, 4, 0.0);
    for (std::size_t x = 0; x < 4; ++x) {
      const std::size_t x1 = x % 2;
      t(x, 2 * x1 + x1) += mu[x] * 0.9;
      t(x, 2 * (1 - x1) + x1) += mu[x] * 0.1;
    }
    const JointLaw joint(alph, t);
    CHECK(markov_chain_check(joint, MarkovVariant::prefix_next_symbol) > 0.01);
    CHECK(markov_chain_check(joint, MarkovVariant::future_given_past) > 0.01);
    CHECK(markov_chain_check(joint, MarkovVariant::kernel_factorization) > 0.01);
  }
}
