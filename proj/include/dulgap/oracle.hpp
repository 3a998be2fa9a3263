/**
 * @file oracle.hpp
 * @brief Exact and baseline GAP solvers used as ground truth.
 */
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "dulgap/error.hpp"
#include "dulgap/gap.hpp"

namespace dulgap {

struct Matching {
  std::vector<Index> row_to_col;
  double cost = 0.0;
};

/// Minimum-cost perfect matching of a square cost matrix (Hungarian method
/// with row/column potentials, O(n^3)).
inline Matching hungarian(const Matrix &cost) {
  const Index n = cost.rows();
  if (cost.cols() != n)
    throw DimensionError("Hungarian needs a square cost matrix");
  if (!cost.allFinite())
    throw InvalidArgument("Hungarian cost matrix must be finite");
  Matching out;
  if (n == 0)
    return out;

  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is a virtual start column.
  std::vector<double> u(std::size_t(n) + 1, 0.0), v(std::size_t(n) + 1, 0.0);
  std::vector<Index> match(std::size_t(n) + 1, 0); // column -> row
  std::vector<Index> way(std::size_t(n) + 1, 0);
  std::vector<double> minv(std::size_t(n) + 1);
  std::vector<char> used(std::size_t(n) + 1);

  for (Index row = 1; row <= n; ++row) {
    match[0] = row;
    Index col0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[std::size_t(col0)] = 1;
      const Index row0 = match[std::size_t(col0)];
      double delta = kInf;
      Index col1 = 0;
      for (Index c = 1; c <= n; ++c) {
        if (used[std::size_t(c)])
          continue;
        const double cur = cost(row0 - 1, c - 1) - u[std::size_t(row0)] -
                           v[std::size_t(c)];
        if (cur < minv[std::size_t(c)]) {
          minv[std::size_t(c)] = cur;
          way[std::size_t(c)] = col0;
        }
        if (minv[std::size_t(c)] < delta) {
          delta = minv[std::size_t(c)];
          col1 = c;
        }
      }
      for (Index c = 0; c <= n; ++c) {
        if (used[std::size_t(c)]) {
          u[std::size_t(match[std::size_t(c)])] += delta;
          v[std::size_t(c)] -= delta;
        } else {
          minv[std::size_t(c)] -= delta;
        }
      }
      col0 = col1;
    } while (match[std::size_t(col0)] != 0);
    do {
      const Index col1 = way[std::size_t(col0)];
      match[std::size_t(col0)] = match[std::size_t(col1)];
      col0 = col1;
    } while (col0 != 0);
  }

  out.row_to_col.assign(std::size_t(n), 0);
  for (Index c = 1; c <= n; ++c)
    out.row_to_col[std::size_t(match[std::size_t(c)] - 1)] = c - 1;
  for (Index r = 0; r < n; ++r)
    out.cost += cost(r, out.row_to_col[std::size_t(r)]);
  return out;
}

enum class OracleMethod { hungarian_expansion, brute_force, greedy };

inline std::string to_string(OracleMethod m) {
  switch (m) {
  case OracleMethod::hungarian_expansion:
    return "hungarian_expansion";
  case OracleMethod::brute_force:
    return "brute_force";
  case OracleMethod::greedy:
    return "greedy";
  }
  return "unknown";
}

struct OracleSolution {
  Assignment assignment;
  double objective = 0.0;
  double solve_time = 0.0; // seconds
  OracleMethod method;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

inline OracleSolution make_solution(const GapInstance &inst,
                                    const std::vector<Index> &choice,
                                    OracleMethod method,
                                    Clock::time_point start) {
  Assignment a = Assignment::from_choice(choice, inst.n_knapsacks());
  const double z = objective(inst, a);
  return OracleSolution{std::move(a), z, seconds_since(start), method};
}

inline bool fits(double weight, double residual) {
  return weight <= residual + 1e-9;
}

} // namespace detail

/// Exact optimum for unit-weight instances with integer capacities:
/// knapsack j is replicated into min(c_j, I) slots, dummy zero-profit items
/// pad the problem to a square matrix, and the Hungarian method is run on
/// negated profits.
inline OracleSolution solve_unit_weight_exact(const GapInstance &inst) {
  const auto start = detail::Clock::now();
  if (!inst.has_unit_weights())
    throw InvalidArgument("unit-weight solver needs w_ij = 1 everywhere");
  const Index I = inst.n_items();
  const Index J = inst.n_knapsacks();
  std::vector<Index> slot_owner;
  double total_capacity = 0.0;
  for (Index j = 0; j < J; ++j) {
    const double c = inst.capacities()(j);
    if (c != std::floor(c))
      throw InvalidArgument("unit-weight solver needs integer capacities");
    total_capacity += c;
    const Index slots = std::min<Index>(static_cast<Index>(c), I);
    slot_owner.insert(slot_owner.end(), std::size_t(slots), j);
  }
  if (total_capacity < static_cast<double>(I))
    throw InfeasibleError("total capacity " + std::to_string(total_capacity) +
                          " is below the item count " + std::to_string(I));
  const Index n = static_cast<Index>(slot_owner.size());
  Matrix cost = Matrix::Zero(n, n);
  for (Index i = 0; i < I; ++i)
    for (Index s = 0; s < n; ++s)
      cost(i, s) = -inst.profits()(i, slot_owner[std::size_t(s)]);
  const Matching m = hungarian(cost);
  std::vector<Index> choice(static_cast<std::size_t>(I));
  for (Index i = 0; i < I; ++i)
    choice[std::size_t(i)] = slot_owner[std::size_t(m.row_to_col[std::size_t(i)])];
  return detail::make_solution(inst, choice, OracleMethod::hungarian_expansion,
                               start);
}

/// Depth-first enumeration of all J^I assignments with capacity pruning and
/// a row-maximum bound. Works for arbitrary weights.
inline OracleSolution solve_brute_force(const GapInstance &inst,
                                        double limit = 1e7) {
  const auto start = detail::Clock::now();
  const Index I = inst.n_items();
  const Index J = inst.n_knapsacks();
  const double size = std::pow(static_cast<double>(J), static_cast<double>(I));
  if (size > limit)
    throw TooLargeError(std::to_string(J) + "^" + std::to_string(I) +
                        " assignments exceed the enumeration limit");

  // bound[i] = sum of row maxima of items i..I-1
  std::vector<double> bound(std::size_t(I) + 1, 0.0);
  for (Index i = I; i-- > 0;)
    bound[std::size_t(i)] =
        bound[std::size_t(i) + 1] + inst.profits().row(i).maxCoeff();

  std::vector<double> residual(inst.capacities().data(),
                               inst.capacities().data() + J);
  std::vector<Index> current(std::size_t(I), 0), best;
  double best_value = -std::numeric_limits<double>::infinity();

  auto dfs = [&](auto &&self, Index i, double value) -> void {
    if (i == I) {
      if (value > best_value) {
        best_value = value;
        best = current;
      }
      return;
    }
    if (value + bound[std::size_t(i)] <
        best_value - 1e-9 * (1.0 + std::abs(best_value)))
      return;
    for (Index j = 0; j < J; ++j) {
      const double w = inst.weights()(i, j);
      if (!detail::fits(w, residual[std::size_t(j)]))
        continue;
      residual[std::size_t(j)] -= w;
      current[std::size_t(i)] = j;
      self(self, i + 1, value + inst.profits()(i, j));
      residual[std::size_t(j)] += w;
    }
  };
  dfs(dfs, 0, 0.0);

  if (best.empty())
    throw InfeasibleError("no assignment satisfies the capacities");
  return detail::make_solution(inst, best, OracleMethod::brute_force, start);
}

/// Regret heuristic: items in descending order of (best - second best
/// profit), each placed in its most profitable knapsack with room left.
/// Ties go to the lower item index, then the lower knapsack index.
inline OracleSolution greedy_baseline(const GapInstance &inst) {
  const auto start = detail::Clock::now();
  const Index I = inst.n_items();
  const Index J = inst.n_knapsacks();
  std::vector<double> regret(std::size_t(I), 0.0);
  for (Index i = 0; i < I; ++i) {
    if (J < 2)
      continue;
    double first = -std::numeric_limits<double>::infinity(), second = first;
    for (Index j = 0; j < J; ++j) {
      const double p = inst.profits()(i, j);
      if (p > first) {
        second = first;
        first = p;
      } else if (p > second) {
        second = p;
      }
    }
    regret[std::size_t(i)] = first - second;
  }
  std::vector<Index> order(static_cast<std::size_t>(I));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return regret[std::size_t(a)] > regret[std::size_t(b)];
  });

  std::vector<double> residual(inst.capacities().data(),
                               inst.capacities().data() + J);
  std::vector<Index> choice(std::size_t(I), -1);
  for (Index i : order) {
    Index pick = -1;
    for (Index j = 0; j < J; ++j) {
      if (!detail::fits(inst.weights()(i, j), residual[std::size_t(j)]))
        continue;
      if (pick < 0 || inst.profits()(i, j) > inst.profits()(i, pick))
        pick = j;
    }
    if (pick < 0)
      throw InfeasibleError("greedy ran out of capacity for item " +
                            std::to_string(i));
    residual[std::size_t(pick)] -= inst.weights()(i, pick);
    choice[std::size_t(i)] = pick;
  }
  return detail::make_solution(inst, choice, OracleMethod::greedy, start);
}

} // namespace dulgap
