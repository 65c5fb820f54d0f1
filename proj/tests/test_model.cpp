#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "causalrd/errors.hpp"
#include "causalrd/model.hpp"
#include "fixtures.hpp"

using namespace causalrd;
using namespace causalrd::testing;

TEST_CASE("encode_history follows the mixed-radix contract") {
  const std::vector<std::size_t> none;
  const std::vector<std::size_t> sizes22{2, 2}, sizes23{2, 3};
  CHECK(encode_history(none, sizes22).code == 0);
  CHECK(encode_history(std::vector<std::size_t>{1, 0}, sizes22).code == 2);
  CHECK(encode_history(std::vector<std::size_t>{1, 2}, sizes23).code == 5);
  CHECK(encode_history(std::vector<std::size_t>{1, 2}, sizes23).length == 2);
  CHECK_THROWS_AS(encode_history(std::vector<std::size_t>{2, 0}, sizes22), std::invalid_argument);
  CHECK_THROWS_AS(decode_history({2, 6}, sizes23), std::invalid_argument);
}

TEST_CASE("decode inverts encode on every prefix") {
  const std::vector<std::size_t> sizes{2, 3, 2, 4};
  for (std::size_t len = 0; len <= sizes.size(); ++len) {
    std::size_t count = 1;
    for (std::size_t j = 0; j < len; ++j) count *= sizes[j];
    for (std::uint64_t c = 0; c < count; ++c) {
      const auto symbols = decode_history({len, c}, sizes);
      CHECK(encode_history(symbols, sizes) == HistoryCode{len, c});
    }
  }
}

TEST_CASE("StageAlphabets rejects bad shapes and enforces the budget") {
  CHECK_THROWS_AS(StageAlphabets({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(StageAlphabets({2, 2}, {2}), std::invalid_argument);
  CHECK_THROWS_AS(StageAlphabets({2, 0}, {2, 2}), std::invalid_argument);
  CHECK_THROWS_AS(StageAlphabets::uniform(20, 2, 2, 1'000'000), ResourceError);
  CHECK_THROWS_AS(StageAlphabets::uniform(80, 2, 2), ResourceError);
  const auto alph = StageAlphabets::uniform(3, 2, 3);
  CHECK(alph.x_prefixes(0) == 1);
  CHECK(alph.x_prefixes(3) == 8);
  CHECK(alph.y_prefixes(2) == 9);
}

TEST_CASE("validate_source reports malformed rows") {
  CHECK(validate_source(fair_iid(4)).empty());

  SUBCASE("deficit row") {
    SourceModel bad(binary(1), {Table(1, 2, {0.5, 0.4})}, 0);
    const auto report = validate_source(bad);
    REQUIRE(report.size() == 1);
    CHECK(report[0].stage == 0);
    CHECK(report[0].history == 0);
    CHECK(report[0].deficit == doctest::Approx(0.1).epsilon(1e-12));
    CHECK_THROWS_AS(SourceModel::ingest(binary(1), {Table(1, 2, {0.5, 0.4})}), ValidationError);
  }
  SUBCASE("within tolerance") {
    SourceModel ok(binary(1), {Table(1, 2, {1.0 + 1e-15, 0.0})}, 0);
    CHECK(validate_source(ok).empty());
  }
  SUBCASE("negative entry") {
    SourceModel bad(binary(1), {Table(1, 2, {1.5, -0.5})}, 0);
    const auto report = validate_source(bad);
    REQUIRE(report.size() == 1);
    CHECK(report[0].has_negative);
  }
  SUBCASE("violation names stage and history") {
    SourceModel bad(binary(2), {Table(1, 2, {0.5, 0.5}), Table(2, 2, {0.5, 0.5, 0.6, 0.3})});
    const auto report = validate_source(bad);
    REQUIRE(report.size() == 1);
    CHECK(report[0].stage == 1);
    CHECK(report[0].history == 1);
  }
}

TEST_CASE("ingest renormalizes rows inside the tolerance") {
  const double a = 0.3 + 4e-13;
  auto model = SourceModel::ingest(binary(1), {Table(1, 2, {a, 0.7})});
  CHECK(model.kernels()[0](0, 0) + model.kernels()[0](0, 1) == doctest::Approx(1.0).epsilon(1e-16));
}

TEST_CASE("SourceModel checks kernel shapes against memory") {
  CHECK_THROWS_AS(SourceModel(binary(2), {Table(1, 2, 0.5), Table(1, 2, 0.5)}),
                  std::invalid_argument);
  CHECK_NOTHROW(SourceModel(binary(2), {Table(1, 2, 0.5), Table(1, 2, 0.5)}, 0));
  const auto m = flip_markov(4, 0.3);
  CHECK(m.kernels()[3].rows() == 2);
  // History (1,0,1) ends in 1, so the flip row for "previous = 1" applies.
  const std::vector<std::size_t> sizes{2, 2, 2};
  const auto h = encode_history(std::vector<std::size_t>{1, 0, 1}, sizes);
  CHECK(m.prob(3, h.code, 0) == doctest::Approx(0.3));
}

TEST_CASE("full_joint_source") {
  SUBCASE("fair iid") {
    const auto mu = full_joint_source(fair_iid(2));
    REQUIRE(mu.size() == 4);
    for (double p : mu) CHECK(p == doctest::Approx(0.25));
  }
  SUBCASE("deterministic source is a point mass") {
    SourceModel det(binary(3), {Table(1, 2, {0.0, 1.0}), Table(2, 2, {1.0, 0.0, 1.0, 0.0}),
                                Table(4, 2, {0, 1, 0, 1, 0, 1, 0, 1})});
    const auto mu = full_joint_source(det);
    // Trajectory (1, 0, 1) has code 5.
    for (std::size_t c = 0; c < mu.size(); ++c) CHECK(mu[c] == (c == 5 ? 1.0 : 0.0));
  }
  SUBCASE("markov entry is the hand product") {
    const auto mu = full_joint_source(flip_markov(2, 0.3));
    CHECK(mu[1] == doctest::Approx(0.5 * 0.3).epsilon(1e-14));
    CHECK(mu[0] == doctest::Approx(0.5 * 0.7).epsilon(1e-14));
  }
  SUBCASE("budget") {
    // The joint over 6 binary stages needs 64 entries.
    CHECK_THROWS_AS(StageAlphabets::uniform(6, 2, 1, 32), ResourceError);
    CHECK_NOTHROW(StageAlphabets::uniform(5, 2, 1, 32));
  }
}

TEST_CASE("full joint marginalizes to p_0 and sums to one") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const StageAlphabets alph({3, 2, 2}, {2, 2, 2});
    const auto src = random_source(alph, rng);
    const auto mu = full_joint_source(src);
    double total = 0.0;
    std::vector<double> first(3, 0.0);
    for (std::size_t c = 0; c < mu.size(); ++c) {
      total += mu[c];
      first[c / 4] += mu[c];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
    for (std::size_t x = 0; x < 3; ++x) CHECK(std::abs(first[x] - src.prob(0, 0, x)) < 1e-12);
  }
}

TEST_CASE("distortion_lookup") {
  const auto alph = binary(2);
  const auto ham = DistortionSpec::hamming(2);
  CHECK(distortion_lookup(ham, alph, 0, {1, 0}, {1, 0}) == 0.0);
  CHECK(distortion_lookup(ham, alph, 0, {1, 0}, {1, 1}) == 1.0);
  CHECK(distortion_lookup(ham, alph, 1, {2, 2}, {2, 2}) == 0.0);

  // rho_1(x^1, y^1) = |x_0 - y_1|
  Table stage1(4, 4);
  for (std::size_t x = 0; x < 4; ++x) {
    for (std::size_t y = 0; y < 4; ++y) stage1(x, y) = std::abs(double(x / 2) - double(y % 2));
  }
  const auto tables = DistortionSpec::stage_tables({Table(2, 2, {0, 1, 1, 0}), stage1});
  CHECK(distortion_lookup(tables, alph, 1, {2, 2}, {2, 0}) == 1.0);

  CHECK_THROWS_AS(distortion_lookup(ham, alph, 2, {3, 0}, {3, 0}), std::invalid_argument);
  CHECK_THROWS_AS(distortion_lookup(ham, alph, 1, {2, 4}, {2, 0}), std::invalid_argument);
  CHECK_THROWS_AS(DistortionSpec::single_letter(Table(2, 2, {0, -1, 1, 0})),
                  std::invalid_argument);
  CHECK_THROWS_AS(DistortionSpec::hamming(3).check_compatible(alph), std::invalid_argument);
}

TEST_CASE("single-letter expansion agrees with per-letter sums") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.0, 2.0);
  Table rho(3, 2);
  for (double& v : rho.data()) v = unif(rng);
  const auto spec = DistortionSpec::single_letter(rho);
  const auto alph = StageAlphabets::uniform(4, 3, 2);
  const auto wide = spec.expanded(alph);
  CHECK(wide.mode() == DistortionSpec::Mode::stage_tables);
  std::uniform_int_distribution<std::size_t> xs(0, 2), ys(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> x(4), y(4);
    double direct = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      x[i] = xs(rng);
      y[i] = ys(rng);
      direct += rho(x[i], y[i]);
    }
    double via_tables = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      const auto xc = encode_history(std::span(x.data(), i + 1), alph.x_sizes());
      const auto yc = encode_history(std::span(y.data(), i + 1), alph.y_sizes());
      via_tables += distortion_lookup(wide, alph, i, xc, yc);
    }
    CHECK(via_tables == direct);
  }
}

TEST_CASE("CausalPolicy validation") {
  const auto alph = binary(2);
  CHECK(CausalPolicy::uniform(alph).validate().empty());
  CHECK(identity_policy(alph).validate().empty());
  CHECK_THROWS_AS(CausalPolicy(alph, {Table(2, 2, 0.5)}), std::invalid_argument);
  CausalPolicy bad(alph, {Table(2, 2, {0.5, 0.5, 0.2, 0.2}), Table(8, 2, 0.5)});
  const auto report = bad.validate();
  REQUIRE(report.size() == 1);
  CHECK(report[0].stage == 0);
  CHECK(report[0].history == 1);
}
