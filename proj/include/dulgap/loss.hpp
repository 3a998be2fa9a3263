/**
 * @file loss.hpp
 * @brief Unsupervised penalty losses for GAP and their gradients w.r.t. u.
 *
 * Per example, with load_j = sum_i w_ij u_ij:
 *
 *   full:       -Z + lambda1 * sum_i ReLU(1 - sum_j u_ij) + lambda2 * sum_j P_j
 *   simplified: -Z + lambda  * sum_j P_j
 *
 * P_j = ReLU(load_j - c_j) under PenaltySign::corrected and
 * P_j = ReLU(c_j - load_j) under PenaltySign::as_printed. Both losses are
 * averaged over the batch.
 */
#pragma once

#include <algorithm>
#include <span>
#include <string>

#include "dulgap/error.hpp"
#include "dulgap/gap.hpp"

namespace dulgap {

enum class PenaltySign { as_printed, corrected };

inline std::string to_string(PenaltySign s) {
  return s == PenaltySign::corrected ? "corrected" : "printed";
}

inline PenaltySign penalty_sign_from_string(const std::string &s) {
  if (s == "corrected")
    return PenaltySign::corrected;
  if (s == "printed" || s == "as_printed")
    return PenaltySign::as_printed;
  throw InvalidArgument("unknown penalty sign '" + s + "'");
}

struct LossConfig {
  double lambda1 = 6.0; // equality penalty (full form only)
  double lambda2 = 6.0; // capacity penalty (full form only)
  double lambda = 6.0;  // capacity penalty (simplified form)
  PenaltySign penalty_sign = PenaltySign::corrected;

  void validate() const {
    for (double v : {lambda1, lambda2, lambda})
      if (!std::isfinite(v) || v < 0.0)
        throw InvalidArgument("penalty weights must be finite and "
                              "non-negative");
  }
};

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

/// sum_j P_j for one example.
inline double capacity_penalty(const GapInstance &inst, const Matrix &u,
                               PenaltySign sign) {
  const Vector loads = knapsack_loads(inst, u);
  double total = 0.0;
  for (Index j = 0; j < loads.size(); ++j) {
    const double excess = loads(j) - inst.capacities()(j);
    total += relu(sign == PenaltySign::corrected ? excess : -excess);
  }
  return total;
}

/// sum_i ReLU(1 - sum_j u_ij) for one example.
inline double equality_penalty(const Matrix &u) {
  double total = 0.0;
  for (Index i = 0; i < u.rows(); ++i)
    total += relu(1.0 - u.row(i).sum());
  return total;
}

namespace detail {
inline void check_batch(std::span<const GapInstance> instances,
                        std::span<const Matrix> u) {
  if (instances.empty())
    throw InvalidArgument("loss needs a non-empty batch");
  if (instances.size() != u.size())
    throw DimensionError("batch instances and assignments differ in length");
}
} // namespace detail

inline double loss_full(std::span<const GapInstance> instances,
                        std::span<const Matrix> u, const LossConfig &cfg) {
  detail::check_batch(instances, u);
  cfg.validate();
  double total = 0.0;
  for (std::size_t k = 0; k < instances.size(); ++k)
    total += -objective(instances[k], u[k]) +
             cfg.lambda1 * equality_penalty(u[k]) +
             cfg.lambda2 * capacity_penalty(instances[k], u[k], cfg.penalty_sign);
  return total / static_cast<double>(instances.size());
}

inline double loss_simplified(std::span<const GapInstance> instances,
                              std::span<const Matrix> u,
                              const LossConfig &cfg) {
  detail::check_batch(instances, u);
  cfg.validate();
  double total = 0.0;
  for (std::size_t k = 0; k < instances.size(); ++k)
    total += -objective(instances[k], u[k]) +
             cfg.lambda * capacity_penalty(instances[k], u[k], cfg.penalty_sign);
  return total / static_cast<double>(instances.size());
}

/// Gradient of one example's simplified loss, scaled by `scale`
/// (1/|batch| for the batch mean). The ReLU subgradient at 0 is 0.
inline Matrix example_loss_grad(const GapInstance &inst, const Matrix &u,
                                double lambda, PenaltySign sign,
                                double scale) {
  const Vector loads = knapsack_loads(inst, u);
  Matrix grad = -inst.profits();
  for (Index j = 0; j < loads.size(); ++j) {
    const double c = inst.capacities()(j);
    if (sign == PenaltySign::corrected && loads(j) > c)
      grad.col(j) += lambda * inst.weights().col(j);
    else if (sign == PenaltySign::as_printed && loads(j) < c)
      grad.col(j) -= lambda * inst.weights().col(j);
  }
  return grad * scale;
}

/// dL_simplified/du, one row per example in row-major (i*J + j) layout.
inline Matrix loss_grad_wrt_u(std::span<const GapInstance> instances,
                              std::span<const Matrix> u,
                              const LossConfig &cfg) {
  detail::check_batch(instances, u);
  cfg.validate();
  const Index I = instances.front().n_items();
  const Index J = instances.front().n_knapsacks();
  const double scale = 1.0 / static_cast<double>(instances.size());
  Matrix out(static_cast<Index>(instances.size()), I * J);
  for (std::size_t k = 0; k < instances.size(); ++k) {
    if (instances[k].n_items() != I || instances[k].n_knapsacks() != J)
      throw DimensionError("batch instances must share dimensions");
    const RowMajorMatrix g = example_loss_grad(instances[k], u[k], cfg.lambda,
                                               cfg.penalty_sign, scale);
    out.row(static_cast<Index>(k)) =
        Eigen::Map<const Eigen::RowVectorXd>(g.data(), I * J);
  }
  return out;
}

} // namespace dulgap
