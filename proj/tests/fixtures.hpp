#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "causalrd/model.hpp"

namespace causalrd::testing {

inline StageAlphabets binary(std::size_t n_stages) { return StageAlphabets::uniform(n_stages, 2, 2); }

inline SourceModel fair_iid(std::size_t n_stages) {
  const std::vector<double> pmf{0.5, 0.5};
  return SourceModel::iid(binary(n_stages), pmf);
}

// Symmetric binary Markov chain started uniform.
inline SourceModel flip_markov(std::size_t n_stages, double flip) {
  const std::vector<double> init{0.5, 0.5};
  const Table transition(2, 2, {1.0 - flip, flip, flip, 1.0 - flip});
  return SourceModel::markov(binary(n_stages), init, transition);
}

// Every stage reproduces the current source symbol through a BSC(eps),
// ignoring the reproduction history.
inline CausalPolicy bsc_policy(const StageAlphabets& alph, double eps) {
  std::vector<Table> kernels;
  for (std::size_t i = 0; i < alph.n_stages(); ++i) {
    const std::size_t nx = alph.x_prefixes(i + 1);
    Table k(alph.y_prefixes(i) * nx, 2);
    for (std::size_t r = 0; r < k.rows(); ++r) {
      const std::size_t x = (r % nx) % 2;
      k(r, x) = 1.0 - eps;
      k(r, 1 - x) = eps;
    }
    kernels.push_back(std::move(k));
  }
  return CausalPolicy(alph, std::move(kernels));
}

inline CausalPolicy identity_policy(const StageAlphabets& alph) { return bsc_policy(alph, 0.0); }

inline CausalPolicy constant_policy(const StageAlphabets& alph, std::size_t symbol) {
  std::vector<Table> kernels;
  for (std::size_t i = 0; i < alph.n_stages(); ++i) {
    Table k(alph.y_prefixes(i) * alph.x_prefixes(i + 1), alph.y_size(i), 0.0);
    for (std::size_t r = 0; r < k.rows(); ++r) k(r, symbol) = 1.0;
    kernels.push_back(std::move(k));
  }
  return CausalPolicy(alph, std::move(kernels));
}

inline std::vector<double> random_pmf(std::size_t k, std::mt19937_64& rng) {
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> p(k);
  double sum = 0.0;
  for (double& v : p) sum += (v = expo(rng));
  for (double& v : p) v /= sum;
  return p;
}

inline CausalPolicy random_policy(const StageAlphabets& alph, std::mt19937_64& rng) {
  std::vector<Table> kernels;
  for (std::size_t i = 0; i < alph.n_stages(); ++i) {
    Table k(alph.y_prefixes(i) * alph.x_prefixes(i + 1), alph.y_size(i));
    for (std::size_t r = 0; r < k.rows(); ++r) {
      const auto p = random_pmf(k.cols(), rng);
      std::copy(p.begin(), p.end(), k.row(r).begin());
    }
    kernels.push_back(std::move(k));
  }
  return CausalPolicy(alph, std::move(kernels));
}

// Full-history source with random kernels.
inline SourceModel random_source(const StageAlphabets& alph, std::mt19937_64& rng) {
  std::vector<Table> kernels;
  for (std::size_t i = 0; i < alph.n_stages(); ++i) {
    Table k(alph.x_prefixes(i), alph.x_size(i));
    for (std::size_t r = 0; r < k.rows(); ++r) {
      const auto p = random_pmf(k.cols(), rng);
      std::copy(p.begin(), p.end(), k.row(r).begin());
    }
    kernels.push_back(std::move(k));
  }
  return SourceModel::ingest(alph, std::move(kernels));
}

// Per-stage tables with entries uniform on [0, 1].
inline DistortionSpec random_stage_distortion(const StageAlphabets& alph, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Table> tables;
  for (std::size_t i = 0; i < alph.n_stages(); ++i) {
    Table t(alph.x_prefixes(i + 1), alph.y_prefixes(i + 1));
    for (double& v : t.data()) v = unif(rng);
    tables.push_back(std::move(t));
  }
  return DistortionSpec::stage_tables(std::move(tables));
}

inline double hb(double p) { return -p * std::log(p) - (1.0 - p) * std::log(1.0 - p); }

}  // namespace causalrd::testing
