/**
 * @file gap.hpp
 * @brief Generalized assignment problem instances and assignment semantics.
 *
 * A GAP assigns I items to J knapsacks:
 *
 *   maximize   Z = sum_ij u_ij p_ij
 *   subject to sum_j u_ij = 1               for every item i       (C1)
 *              sum_i w_ij u_ij <= c_j       for every knapsack j   (C2)
 *              u_ij in {0, 1}                                      (C3)
 *
 * Association matrices are I x J with items as rows. Whenever a matrix is
 * flattened (feature vectors, network outputs, JSON) the layout is row-major,
 * index i * J + j.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dulgap/error.hpp"

namespace dulgap {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kDefaultFeasibilityEps = 1e-6;
inline constexpr double kRowSumTolerance = 1e-6;

/// Profit matrix, weight matrix and capacity vector of one GAP.
class GapInstance {
public:
  GapInstance(Matrix profits, Matrix weights, Vector capacities)
      : profits_(std::move(profits)), weights_(std::move(weights)),
        capacities_(std::move(capacities)) {
    validate();
  }

  /// Instance with w_ij = 1 everywhere.
  static GapInstance unit_weight(Matrix profits, Vector capacities) {
    Matrix weights = Matrix::Ones(profits.rows(), profits.cols());
    return GapInstance(std::move(profits), std::move(weights),
                       std::move(capacities));
  }

  Index n_items() const { return profits_.rows(); }
  Index n_knapsacks() const { return profits_.cols(); }
  const Matrix &profits() const { return profits_; }
  const Matrix &weights() const { return weights_; }
  const Vector &capacities() const { return capacities_; }

  bool has_unit_weights() const { return (weights_.array() == 1.0).all(); }

  bool operator==(const GapInstance &other) const {
    return profits_.rows() == other.profits_.rows() &&
           profits_.cols() == other.profits_.cols() &&
           profits_ == other.profits_ && weights_ == other.weights_ &&
           capacities_ == other.capacities_;
  }

private:
  void validate() const {
    if (profits_.rows() < 1 || profits_.cols() < 1)
      throw InvalidArgument("GapInstance needs at least one item and one "
                            "knapsack");
    if (weights_.rows() != profits_.rows() ||
        weights_.cols() != profits_.cols())
      throw DimensionError("weights must have the same shape as profits");
    if (capacities_.size() != profits_.cols())
      throw DimensionError("capacities must have one entry per knapsack");
    if (!profits_.allFinite())
      throw InvalidArgument("profits must be finite");
    if (!weights_.allFinite() || (weights_.array() < 0.0).any())
      throw InvalidArgument("weights must be finite and non-negative");
    if (!capacities_.allFinite() || (capacities_.array() <= 0.0).any())
      throw InvalidArgument("capacities must be finite and positive");
  }

  Matrix profits_;
  Matrix weights_;
  Vector capacities_;
};

enum class AssignmentMode { soft, hard };

/// An I x J association matrix. Soft assignments are row-stochastic; hard
/// ones are 0/1 with exactly one 1 per row.
class Assignment {
public:
  static Assignment soft(Matrix u, double tol = kRowSumTolerance) {
    check_entries(u);
    for (Index i = 0; i < u.rows(); ++i)
      if (std::abs(u.row(i).sum() - 1.0) > tol)
        throw InvalidArgument("soft assignment row " + std::to_string(i) +
                              " does not sum to 1");
    return Assignment(std::move(u), AssignmentMode::soft);
  }

  static Assignment hard(Matrix u) {
    check_entries(u);
    for (Index i = 0; i < u.rows(); ++i) {
      Index ones = 0;
      for (Index j = 0; j < u.cols(); ++j) {
        if (u(i, j) == 1.0)
          ++ones;
        else if (u(i, j) != 0.0)
          throw InvalidArgument("hard assignment entries must be 0 or 1");
      }
      if (ones != 1)
        throw InvalidArgument("hard assignment row " + std::to_string(i) +
                              " must contain exactly one 1");
    }
    return Assignment(std::move(u), AssignmentMode::hard);
  }

  /// Hard assignment from the chosen knapsack of every item.
  static Assignment from_choice(std::span<const Index> choice,
                                Index n_knapsacks) {
    Matrix u = Matrix::Zero(static_cast<Index>(choice.size()), n_knapsacks);
    for (std::size_t i = 0; i < choice.size(); ++i) {
      if (choice[i] < 0 || choice[i] >= n_knapsacks)
        throw InvalidArgument("knapsack index out of range");
      u(static_cast<Index>(i), choice[i]) = 1.0;
    }
    return Assignment(std::move(u), AssignmentMode::hard);
  }

  const Matrix &matrix() const { return u_; }
  AssignmentMode mode() const { return mode_; }
  Index n_items() const { return u_.rows(); }
  Index n_knapsacks() const { return u_.cols(); }

  /// Knapsack chosen by each item (argmax, lowest index on ties).
  std::vector<Index> choice() const {
    std::vector<Index> out(static_cast<std::size_t>(u_.rows()));
    for (Index i = 0; i < u_.rows(); ++i) {
      Index best = 0;
      for (Index j = 1; j < u_.cols(); ++j)
        if (u_(i, j) > u_(i, best))
          best = j;
      out[static_cast<std::size_t>(i)] = best;
    }
    return out;
  }

private:
  Assignment(Matrix u, AssignmentMode mode) : u_(std::move(u)), mode_(mode) {}

  static void check_entries(const Matrix &u) {
    if (u.rows() < 1 || u.cols() < 1)
      throw InvalidArgument("assignment must be non-empty");
    if (!u.allFinite() || (u.array() < 0.0).any() || (u.array() > 1.0).any())
      throw InvalidArgument("assignment entries must lie in [0, 1]");
  }

  Matrix u_;
  AssignmentMode mode_;
};

namespace detail {
inline void check_shape(const GapInstance &inst, const Matrix &u) {
  if (u.rows() != inst.n_items() || u.cols() != inst.n_knapsacks())
    throw DimensionError("assignment is " + std::to_string(u.rows()) + "x" +
                         std::to_string(u.cols()) + " but instance is " +
                         std::to_string(inst.n_items()) + "x" +
                         std::to_string(inst.n_knapsacks()));
}
} // namespace detail

/// Z = sum_ij u_ij p_ij. Accepts any matrix of the right shape.
inline double objective(const GapInstance &inst, const Matrix &u) {
  detail::check_shape(inst, u);
  return (u.array() * inst.profits().array()).sum();
}

inline double objective(const GapInstance &inst, const Assignment &a) {
  return objective(inst, a.matrix());
}

/// load_j = sum_i w_ij u_ij.
inline Vector knapsack_loads(const GapInstance &inst, const Matrix &u) {
  detail::check_shape(inst, u);
  return (inst.weights().array() * u.array()).colwise().sum().transpose();
}

inline Vector knapsack_loads(const GapInstance &inst, const Assignment &a) {
  return knapsack_loads(inst, a.matrix());
}

struct FeasibilityReport {
  bool c1_ok = false;
  std::vector<bool> c2_ok_per_knapsack;
  bool c3_ok = false;

  bool c2_ok() const {
    return std::all_of(c2_ok_per_knapsack.begin(), c2_ok_per_knapsack.end(),
                       [](bool b) { return b; });
  }
  bool feasible() const { return c1_ok && c2_ok() && c3_ok; }
};

/// Checks C1-C3 with slack `eps`. eps = 0 demands exact feasibility.
inline FeasibilityReport check_feasibility(const GapInstance &inst,
                                           const Matrix &u,
                                           double eps = kDefaultFeasibilityEps) {
  if (!(eps >= 0.0))
    throw InvalidArgument("feasibility eps must be non-negative");
  detail::check_shape(inst, u);
  FeasibilityReport report;
  report.c1_ok = ((u.rowwise().sum().array() - 1.0).abs() <= eps).all();
  const Vector loads = knapsack_loads(inst, u);
  report.c2_ok_per_knapsack.resize(static_cast<std::size_t>(loads.size()));
  for (Index j = 0; j < loads.size(); ++j)
    report.c2_ok_per_knapsack[static_cast<std::size_t>(j)] =
        loads(j) <= inst.capacities()(j) + eps;
  report.c3_ok =
      (u.array().abs() <= eps || (u.array() - 1.0).abs() <= eps).all();
  return report;
}

inline FeasibilityReport check_feasibility(const GapInstance &inst,
                                           const Assignment &a,
                                           double eps = kDefaultFeasibilityEps) {
  return check_feasibility(inst, a.matrix(), eps);
}

/// Rounds each row to its argmax; ties go to the lowest knapsack index.
inline Assignment harden(const Matrix &u) {
  if (u.rows() < 1 || u.cols() < 1)
    throw InvalidArgument("assignment must be non-empty");
  Matrix out = Matrix::Zero(u.rows(), u.cols());
  for (Index i = 0; i < u.rows(); ++i) {
    Index best = 0;
    for (Index j = 1; j < u.cols(); ++j)
      if (u(i, j) > u(i, best))
        best = j;
    out(i, best) = 1.0;
  }
  return Assignment::hard(std::move(out));
}

inline Assignment harden(const Assignment &a) { return harden(a.matrix()); }

/// Per-knapsack fraction of examples whose load exceeds capacity + eps,
/// averaged over the knapsacks.
inline double
avg_constraint_violation_probability(std::span<const GapInstance> instances,
                                     std::span<const Matrix> assignments,
                                     double eps = kDefaultFeasibilityEps) {
  if (instances.empty())
    throw InvalidArgument("violation probability needs at least one example");
  if (instances.size() != assignments.size())
    throw DimensionError("instances and assignments differ in length");
  const Index J = instances.front().n_knapsacks();
  Eigen::VectorXd violations = Eigen::VectorXd::Zero(J);
  for (std::size_t k = 0; k < instances.size(); ++k) {
    if (instances[k].n_knapsacks() != J)
      throw DimensionError("all instances must share the knapsack count");
    const Vector loads = knapsack_loads(instances[k], assignments[k]);
    for (Index j = 0; j < J; ++j)
      if (loads(j) > instances[k].capacities()(j) + eps)
        violations(j) += 1.0;
  }
  return (violations / static_cast<double>(instances.size())).mean();
}

inline double
avg_constraint_violation_probability(std::span<const GapInstance> instances,
                                     std::span<const Assignment> assignments,
                                     double eps = kDefaultFeasibilityEps) {
  std::vector<Matrix> mats;
  mats.reserve(assignments.size());
  for (const auto &a : assignments)
    mats.push_back(a.matrix());
  return avg_constraint_violation_probability(instances,
                                              std::span<const Matrix>(mats), eps);
}

// JSON: {"I":..,"J":..,"profits":[row-major],"weights":[..],"capacities":[..]}

namespace detail {
inline std::vector<double> flatten_row_major(const Matrix &m) {
  std::vector<double> out(static_cast<std::size_t>(m.size()));
  Eigen::Map<RowMajorMatrix>(out.data(), m.rows(), m.cols()) = m;
  return out;
}

inline Matrix unflatten_row_major(const std::vector<double> &v, Index rows,
                                  Index cols) {
  if (static_cast<Index>(v.size()) != rows * cols)
    throw FormatError("flat matrix has " + std::to_string(v.size()) +
                      " entries, expected " + std::to_string(rows * cols));
  return Eigen::Map<const RowMajorMatrix>(v.data(), rows, cols);
}
} // namespace detail

inline nlohmann::json to_json_value(const GapInstance &inst) {
  const Vector &c = inst.capacities();
  return nlohmann::json{
      {"I", inst.n_items()},
      {"J", inst.n_knapsacks()},
      {"profits", detail::flatten_row_major(inst.profits())},
      {"weights", detail::flatten_row_major(inst.weights())},
      {"capacities", std::vector<double>(c.data(), c.data() + c.size())}};
}

inline GapInstance gap_instance_from_json(const nlohmann::json &j) {
  try {
    const Index I = j.at("I").get<Index>();
    const Index J = j.at("J").get<Index>();
    if (I < 1 || J < 1)
      throw FormatError("instance dimensions must be positive");
    const auto caps = j.at("capacities").get<std::vector<double>>();
    if (static_cast<Index>(caps.size()) != J)
      throw FormatError("capacities length does not match J");
    return GapInstance(
        detail::unflatten_row_major(j.at("profits").get<std::vector<double>>(),
                                    I, J),
        detail::unflatten_row_major(j.at("weights").get<std::vector<double>>(),
                                    I, J),
        Eigen::Map<const Vector>(caps.data(), J));
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("bad GapInstance JSON: ") + e.what());
  }
}

} // namespace dulgap
