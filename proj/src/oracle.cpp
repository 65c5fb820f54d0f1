#include "causalrd/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "causalrd/errors.hpp"
#include "causalrd/numeric.hpp"

namespace causalrd {

namespace {

std::size_t grid_steps(const GridSpec& grid) {
  if (!(grid.resolution > 0.0 && grid.resolution <= 0.5)) {
    throw std::invalid_argument("GridSpec: resolution must lie in (0, 0.5]");
  }
  const auto steps = static_cast<std::size_t>(std::llround(1.0 / grid.resolution));
  if (std::abs(static_cast<double>(steps) * grid.resolution - 1.0) > 1e-9) {
    throw std::invalid_argument("GridSpec: resolution must divide 1");
  }
  return steps;
}

void require_oracle_shape(const SourceModel& source, const DistortionSpec& spec, double s,
                          std::size_t max_stages) {
  const auto& alph = source.alphabets();
  if (alph.n_stages() > max_stages) {
    throw std::invalid_argument("oracle: at most " + std::to_string(max_stages) +
                                " stages are supported");
  }
  for (std::size_t i = 0; i < alph.n_stages(); ++i) {
    if (alph.y_size(i) != 2) throw std::invalid_argument("oracle: reproduction must be binary");
  }
  spec.check_compatible(alph);
  if (!(s <= 0.0)) throw std::invalid_argument("oracle: s must be <= 0");
}

std::size_t checked_power(std::size_t base, std::size_t exp, std::size_t cap) {
  std::size_t out = 1;
  for (std::size_t k = 0; k < exp; ++k) {
    if (out > cap / base) throw ResourceError("oracle: enumeration exceeds max_cells");
    out *= base;
  }
  return out;
}

// One binary row: weight and the distortions of reproducing 0 and 1.
struct Row {
  double weight = 0.0;
  double rho0 = 0.0;
  double rho1 = 0.0;
};

double row_cost(const Row& r, std::size_t k, std::size_t steps, double s) {
  const double a = static_cast<double>(k) / static_cast<double>(steps);
  return xlogx(a) + xlogx(1.0 - a) - s * (a * r.rho1 + (1.0 - a) * r.rho0);
}

// W * I(X; Y) - s * E[rho] for rows sharing one output history, given the
// weighted row cost sum and the mass sent to symbol 1.
double conditional_objective(double cost_sum, double total, double mass1) {
  const double mass0 = std::max(total - mass1, 0.0);
  return cost_sum - (xlogx(mass1) + xlogx(mass0) - xlogx(total));
}

struct RowChoice {
  double value = 0.0;
  std::vector<std::size_t> steps;  // grid index of q(1 | row)
};

RowChoice last_stage_min(const std::vector<Row>& rows, std::size_t steps, double s) {
  RowChoice best{0.0, std::vector<std::size_t>(rows.size(), 0)};
  double total = 0.0;
  for (const Row& r : rows) total += r.weight;
  if (total == 0.0) return best;

  struct Event {
    double slope;
    std::size_t row;
  };
  std::vector<Event> events;
  double cost_sum = 0.0;
  for (std::size_t x = 0; x < rows.size(); ++x) {
    if (rows[x].weight == 0.0) continue;
    cost_sum += rows[x].weight * row_cost(rows[x], 0, steps, s);
    for (std::size_t k = 0; k < steps; ++k) {
      const double slope = (row_cost(rows[x], k + 1, steps, s) - row_cost(rows[x], k, steps, s)) *
                           static_cast<double>(steps);
      events.push_back({slope, x});
    }
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return a.slope < b.slope; });

  std::vector<std::size_t> current(rows.size(), 0);
  double mass1 = 0.0;
  best.value = conditional_objective(cost_sum, total, mass1);
  for (const Event& e : events) {
    const Row& r = rows[e.row];
    const std::size_t k = current[e.row];
    cost_sum += r.weight * (row_cost(r, k + 1, steps, s) - row_cost(r, k, steps, s));
    mass1 += r.weight / static_cast<double>(steps);
    current[e.row] = k + 1;
    const double v = conditional_objective(cost_sum, total, mass1);
    if (v < best.value) {
      best.value = v;
      best.steps = current;
    }
  }
  return best;
}

Table binary_rows(const std::vector<std::size_t>& steps, std::size_t grid) {
  Table t(steps.size(), 2);
  for (std::size_t r = 0; r < steps.size(); ++r) {
    const double a = static_cast<double>(steps[r]) / static_cast<double>(grid);
    t(r, 0) = 1.0 - a;
    t(r, 1) = a;
  }
  return t;
}

}  // namespace

OracleResult brute_force_lagrangian_min(const SourceModel& source, const DistortionSpec& spec,
                                        double s, const GridSpec& grid) {
  require_oracle_shape(source, spec, s, 2);
  const std::size_t steps = grid_steps(grid);
  const auto& alph = source.alphabets();
  const std::size_t x0_size = alph.x_size(0);
  auto p0 = source.row(0, 0);

  auto stage0_rows = [&] {
    std::vector<Row> rows(x0_size);
    for (std::size_t x = 0; x < x0_size; ++x) {
      rows[x] = {p0[x], spec.at(0, x, 0), spec.at(0, x, 1)};
    }
    return rows;
  };

  if (alph.n_stages() == 1) {
    const RowChoice c = last_stage_min(stage0_rows(), steps, s);
    CausalPolicy policy(alph, {binary_rows(c.steps, steps)});
    const double value = lagrangian(source, policy, spec, s);
    return {value, std::move(policy), 1};
  }

  const std::size_t x1_size = alph.x_size(1);
  const std::size_t n_x1 = alph.x_prefixes(2);
  const std::size_t combos = checked_power(steps + 1, x0_size, grid.max_cells);
  const std::vector<Row> first = stage0_rows();

  double best_value = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best_stage0(x0_size, 0);
  std::vector<std::size_t> best_stage1(2 * n_x1, 0);

  std::vector<std::size_t> digits(x0_size, 0);
  std::vector<Row> rows(n_x1);
  for (std::size_t c = 0; c < combos; ++c) {
    // Row x0 = 0 is the most significant digit.
    std::size_t rem = c;
    for (std::size_t x = x0_size; x-- > 0;) {
      digits[x] = rem % (steps + 1);
      rem /= steps + 1;
    }
    double cost_sum = 0.0, mass1 = 0.0;
    for (std::size_t x = 0; x < x0_size; ++x) {
      cost_sum += first[x].weight * row_cost(first[x], digits[x], steps, s);
      mass1 += first[x].weight * static_cast<double>(digits[x]) / static_cast<double>(steps);
    }
    double total = conditional_objective(cost_sum, 1.0, mass1);
    std::vector<std::size_t> stage1(2 * n_x1, 0);
    for (std::uint64_t y0 = 0; y0 < 2 && total < best_value; ++y0) {
      for (std::size_t x0 = 0; x0 < x0_size; ++x0) {
        const double a = static_cast<double>(digits[x0]) / static_cast<double>(steps);
        const double q0 = y0 == 1 ? a : 1.0 - a;
        auto p1 = source.row(1, x0);
        for (std::size_t x1 = 0; x1 < x1_size; ++x1) {
          const std::uint64_t xc = x0 * x1_size + x1;
          rows[xc] = {p0[x0] * q0 * p1[x1], spec.at(1, xc, y0 * 2), spec.at(1, xc, y0 * 2 + 1)};
        }
      }
      const RowChoice choice = last_stage_min(rows, steps, s);
      total += choice.value;
      std::copy(choice.steps.begin(), choice.steps.end(), stage1.begin() + y0 * n_x1);
    }
    if (total < best_value) {
      best_value = total;
      best_stage0 = digits;
      best_stage1 = stage1;
    }
  }
  CausalPolicy policy(alph, {binary_rows(best_stage0, steps), binary_rows(best_stage1, steps)});
  const double value = lagrangian(source, policy, spec, s);
  return {value, std::move(policy), combos};
}

OracleResult exhaustive_lagrangian_min(const SourceModel& source, const DistortionSpec& spec,
                                       double s, const GridSpec& grid) {
  require_oracle_shape(source, spec, s, 2);
  const std::size_t steps = grid_steps(grid);
  const auto& alph = source.alphabets();
  std::vector<std::size_t> stage_rows;
  std::size_t total_rows = 0;
  for (std::size_t i = 0; i < alph.n_stages(); ++i) {
    stage_rows.push_back(alph.y_prefixes(i) * alph.x_prefixes(i + 1));
    total_rows += stage_rows.back();
  }
  const std::size_t combos = checked_power(steps + 1, total_rows, grid.max_cells);

  std::vector<std::size_t> digits(total_rows, 0);
  double best_value = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best = digits;
  auto build = [&](const std::vector<std::size_t>& d) {
    std::vector<Table> kernels;
    std::size_t offset = 0;
    for (std::size_t rows : stage_rows) {
      kernels.push_back(binary_rows({d.begin() + offset, d.begin() + offset + rows}, steps));
      offset += rows;
    }
    return CausalPolicy(alph, std::move(kernels));
  };
  for (std::size_t c = 0; c < combos; ++c) {
    const double v = lagrangian(source, build(digits), spec, s);
    if (v < best_value) {
      best_value = v;
      best = digits;
    }
    // Odometer, last row fastest.
    for (std::size_t k = total_rows; k-- > 0;) {
      if (++digits[k] <= steps) break;
      digits[k] = 0;
    }
  }
  return {best_value, build(best), combos};
}

InfoValue exhaustive_directed_info(const JointLaw& joint) {
  const auto& alph = joint.alphabets();
  const std::size_t n = alph.n_stages();
  const auto& xs = alph.x_sizes();
  const auto& ys = alph.y_sizes();
  const Table& t = joint.table();

  // Marginals keyed by (prefix length of x, prefix length of y, x code, y code).
  using Key = std::tuple<std::size_t, std::size_t, std::uint64_t, std::uint64_t>;
  std::map<Key, double> marginal;
  std::vector<std::vector<std::size_t>> x_symbols(t.rows()), y_symbols(t.cols());
  for (std::uint64_t x = 0; x < t.rows(); ++x) x_symbols[x] = decode_history({n, x}, xs);
  for (std::uint64_t y = 0; y < t.cols(); ++y) y_symbols[y] = decode_history({n, y}, ys);

  auto code = [](const std::vector<std::size_t>& sym, std::size_t len,
                 const std::vector<std::size_t>& sizes) {
    return encode_history(std::span<const std::size_t>(sym.data(), len), sizes).code;
  };
  for (std::uint64_t x = 0; x < t.rows(); ++x) {
    for (std::uint64_t y = 0; y < t.cols(); ++y) {
      const double p = t(x, y);
      if (p == 0.0) continue;
      for (std::size_t i = 0; i < n; ++i) {
        const auto xi = code(x_symbols[x], i + 1, xs);
        const auto yi = code(y_symbols[y], i + 1, ys);
        const auto yp = code(y_symbols[y], i, ys);
        marginal[{i + 1, i + 1, xi, yi}] += p;
        marginal[{i + 1, i, xi, yp}] += p;
        marginal[{0, i + 1, 0, yi}] += p;
        marginal[{0, i, 0, yp}] += p;
      }
    }
  }
  // Each cell contributes sum_i log q_i(y_i | y^{i-1}, x^i) - log nu_i(y_i | y^{i-1}).
  double sum = 0.0;
  for (std::uint64_t x = 0; x < t.rows(); ++x) {
    for (std::uint64_t y = 0; y < t.cols(); ++y) {
      const double p = t(x, y);
      if (p == 0.0) continue;
      double log_ratio = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto xi = code(x_symbols[x], i + 1, xs);
        const auto yi = code(y_symbols[y], i + 1, ys);
        const auto yp = code(y_symbols[y], i, ys);
        const double q = marginal[{i + 1, i + 1, xi, yi}] / marginal[{i + 1, i, xi, yp}];
        const double nu = marginal[{0, i + 1, 0, yi}] / marginal[{0, i, 0, yp}];
        log_ratio += std::log(q) - std::log(nu);
      }
      sum += p * log_ratio;
    }
  }
  return {std::max(sum, 0.0)};
}

}  // namespace causalrd
