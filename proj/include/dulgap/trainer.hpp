/**
 * @file trainer.hpp
 * @brief Unsupervised mini-batch training, evaluation against the exact
 * oracle, and hyperparameter sweeps.
 */
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dulgap/checkpoint.hpp"
#include "dulgap/dataset.hpp"
#include "dulgap/error.hpp"
#include "dulgap/gap.hpp"
#include "dulgap/loss.hpp"
#include "dulgap/mlp.hpp"
#include "dulgap/oracle.hpp"

namespace dulgap {

enum class Precision { f64, f32 };

inline Precision precision_from_string(const std::string &s) {
  if (s == "f64" || s == "double")
    return Precision::f64;
  if (s == "f32" || s == "float")
    return Precision::f32;
  throw InvalidArgument("unknown precision '" + s + "'");
}

/// Hidden widths used for the two reference scenarios.
inline std::vector<Index> reference_layer_dims(Index items, Index knapsacks) {
  const Index width = items * knapsacks;
  std::vector<Index> hidden;
  if (items == 4 && knapsacks == 4)
    hidden = {64, 128, 256, 512, 1024, 2048};
  else if (items == 16 && knapsacks == 4)
    hidden = {128, 256, 512, 1024, 2048, 2048, 4096, 4096};
  else
    throw InvalidArgument("no reference architecture for " +
                          std::to_string(items) + "x" +
                          std::to_string(knapsacks) + "; pass layer dims");
  std::vector<Index> dims{width};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(width);
  return dims;
}

struct TrainConfig {
  double lambda = 6.0;
  double learning_rate = 1e-4;
  int epochs = 50;
  int batch_size = 128;
  std::vector<Index> layer_dims; // empty: reference dims for the dataset
  std::uint64_t seed = 0;
  bool normalize_features = true;
  PenaltySign penalty_sign = PenaltySign::corrected;
  Precision precision = Precision::f32;

  /// 4 users, 4 BSs.
  static TrainConfig reference_4x4() {
    TrainConfig c;
    c.layer_dims = reference_layer_dims(4, 4);
    return c;
  }

  /// 16 users, 4 BSs: more epochs and a larger penalty.
  static TrainConfig reference_16x4() {
    TrainConfig c;
    c.lambda = 10.0;
    c.epochs = 100;
    c.layer_dims = reference_layer_dims(16, 4);
    return c;
  }

  void validate() const {
    if (epochs < 1)
      throw InvalidArgument("epochs must be at least 1");
    if (batch_size < 1)
      throw InvalidArgument("batch size must be at least 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
      throw InvalidArgument("learning rate must be finite and non-negative");
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
      throw InvalidArgument("lambda must be finite and non-negative");
  }
};

/// Deterministic shuffle of [0, n) split into batches of `batch_size`; the
/// last batch may be smaller.
inline std::vector<std::vector<std::size_t>>
make_batches(std::size_t n, std::size_t batch_size, std::uint64_t epoch_seed) {
  if (n == 0)
    throw InvalidArgument("cannot batch an empty dataset");
  if (batch_size == 0)
    throw InvalidArgument("batch size must be positive");
  if (batch_size > n)
    throw InvalidArgument("batch size exceeds the dataset size");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(epoch_seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size)
    batches.emplace_back(order.begin() + std::ptrdiff_t(start),
                         order.begin() + std::ptrdiff_t(std::min(n, start + batch_size)));
  return batches;
}

/// Seed of the shuffle for `epoch` of a run seeded with `seed`.
inline std::uint64_t epoch_seed(std::uint64_t seed, int epoch) {
  return make_stream(seed, 0x9e3779b97f4a7c15ULL + std::uint64_t(epoch))();
}

template <class Scalar> struct TrainResult {
  BasicMlp<Scalar> model;
  std::vector<double> loss_history; // mean training loss per epoch
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

namespace detail {

template <class Scalar>
Matrix example_u(const typename BasicMlp<Scalar>::Mat &u_cols, Index b,
                 Split split) {
  // Column b holds one example in row-major item order.
  using RowMajorS = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic,
                                  Eigen::RowMajor>;
  return Eigen::Map<const RowMajorS>(u_cols.col(b).data(), split.items,
                                     split.knapsacks)
      .template cast<double>();
}

inline std::vector<Index> resolve_dims(const Dataset &ds, const TrainConfig &cfg) {
  if (!cfg.layer_dims.empty())
    return cfg.layer_dims;
  return reference_layer_dims(ds.n_items(), ds.n_knapsacks());
}

} // namespace detail

/// Mini-batch Adam on the simplified loss. Feature statistics are taken from
/// the full training set before the first epoch and stored in the model.
template <class Scalar>
TrainResult<Scalar> train(const Dataset &data, const TrainConfig &cfg,
                          const EpochCallback &on_epoch = {}) {
  using Mat = typename BasicMlp<Scalar>::Mat;
  cfg.validate();
  if (data.empty())
    throw InvalidArgument("training set is empty");
  data.validate();
  const Split split{data.n_items(), data.n_knapsacks()};
  if (data.feature_width() != split.width())
    throw DimensionError("feature width must equal I*J");

  TrainResult<Scalar> result;
  result.model = init_model<Scalar>(detail::resolve_dims(data, cfg), split,
                                    cfg.seed);
  const Matrix features = data.feature_matrix();
  if (cfg.normalize_features)
    result.model.feature_norm = compute_feature_norm(features);
  const Mat inputs = features.transpose().cast<Scalar>();

  LossConfig loss_cfg;
  loss_cfg.lambda = cfg.lambda;
  loss_cfg.penalty_sign = cfg.penalty_sign;

  auto state = AdamState<Scalar>::zeros_like(result.model);
  const std::size_t batch = std::min<std::size_t>(std::size_t(cfg.batch_size),
                                                  data.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches =
        make_batches(data.size(), batch, epoch_seed(cfg.seed, epoch));
    double epoch_loss = 0.0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto &idx = batches[bi];
      const Index B = static_cast<Index>(idx.size());
      Mat x(inputs.rows(), B);
      for (Index b = 0; b < B; ++b)
        x.col(b) = inputs.col(Index(idx[std::size_t(b)]));
      const ForwardCache<Scalar> cache = forward_columns(result.model, std::move(x));

      Mat grad(split.width(), B);
      double batch_loss = 0.0;
      const double scale = 1.0 / static_cast<double>(B);
      for (Index b = 0; b < B; ++b) {
        const GapInstance &inst = data.examples[idx[std::size_t(b)]].instance;
        const Matrix u = detail::example_u<Scalar>(cache.output(), b, split);
        batch_loss += -objective(inst, u) +
                      cfg.lambda * capacity_penalty(inst, u, cfg.penalty_sign);
        const RowMajorMatrix g =
            example_loss_grad(inst, u, cfg.lambda, cfg.penalty_sign, scale);
        grad.col(b) = Eigen::Map<const Vector>(g.data(), g.size()).cast<Scalar>();
      }
      batch_loss *= scale;
      if (!std::isfinite(batch_loss))
        throw DivergenceError("non-finite loss at epoch " +
                              std::to_string(epoch + 1) + ", batch " +
                              std::to_string(bi + 1));
      epoch_loss += batch_loss * static_cast<double>(B);
      const Gradients<Scalar> grads =
          backward_columns(result.model, cache, grad);
      try {
        adam_step(result.model, grads, state, cfg.learning_rate);
      } catch (const DivergenceError &) {
        throw DivergenceError("non-finite gradient at epoch " +
                              std::to_string(epoch + 1) + ", batch " +
                              std::to_string(bi + 1));
      }
    }
    const double mean_loss = epoch_loss / static_cast<double>(data.size());
    result.loss_history.push_back(mean_loss);
    if (on_epoch)
      on_epoch(epoch + 1, mean_loss);
  }
  return result;
}

struct AnyTrainResult {
  AnyMlp model;
  std::vector<double> loss_history;
};

inline AnyTrainResult train_any(const Dataset &data, const TrainConfig &cfg,
                                const EpochCallback &on_epoch = {}) {
  if (cfg.precision == Precision::f64) {
    auto r = train<double>(data, cfg, on_epoch);
    return {std::move(r.model), std::move(r.loss_history)};
  }
  auto r = train<float>(data, cfg, on_epoch);
  return {std::move(r.model), std::move(r.loss_history)};
}

struct Metrics {
  std::size_t n_examples = 0;
  double mean_sum_rate = 0.0;
  double mean_oracle_sum_rate = 0.0;
  double pct_of_optimal = 0.0;
  double avg_violation_prob = 0.0;
  double mean_hardened_sum_rate = 0.0;
  double hardened_violation_prob = 0.0;
  double mean_inference_time = 0.0; // seconds per example, amortized
  double mean_oracle_time = 0.0;    // seconds per example
  std::vector<double> loss_history;
};

inline nlohmann::json to_json_value(const Metrics &m) {
  return nlohmann::json{{"n_examples", m.n_examples},
                        {"mean_sum_rate", m.mean_sum_rate},
                        {"mean_oracle_sum_rate", m.mean_oracle_sum_rate},
                        {"pct_of_optimal", m.pct_of_optimal},
                        {"avg_violation_prob", m.avg_violation_prob},
                        {"mean_hardened_sum_rate", m.mean_hardened_sum_rate},
                        {"hardened_violation_prob", m.hardened_violation_prob},
                        {"mean_inference_time", m.mean_inference_time},
                        {"mean_oracle_time", m.mean_oracle_time},
                        {"loss_history", m.loss_history}};
}

struct OracleReference {
  std::vector<double> objectives;
  double mean_time = 0.0;
};

/// Solves every instance exactly, timing each solve on its own.
inline OracleReference solve_reference(std::span<const GapInstance> instances) {
  OracleReference ref;
  ref.objectives.reserve(instances.size());
  double total = 0.0;
  for (const auto &inst : instances) {
    const OracleSolution sol = solve_unit_weight_exact(inst);
    ref.objectives.push_back(sol.objective);
    total += sol.solve_time;
  }
  ref.mean_time = instances.empty() ? 0.0 : total / double(instances.size());
  return ref;
}

/// Aggregates quality metrics of per-example assignments against exact
/// oracle objectives. Timing fields are left to the caller.
inline Metrics summarize(std::span<const GapInstance> instances,
                         std::span<const Matrix> assignments,
                         const OracleReference &oracle,
                         double eps = kDefaultFeasibilityEps) {
  if (instances.empty())
    throw InvalidArgument("cannot summarize an empty test set");
  if (instances.size() != assignments.size() ||
      instances.size() != oracle.objectives.size())
    throw DimensionError("instances, assignments and oracle values differ in "
                         "length");
  Metrics m;
  m.n_examples = instances.size();
  std::vector<Matrix> hardened;
  hardened.reserve(assignments.size());
  for (std::size_t k = 0; k < instances.size(); ++k) {
    m.mean_sum_rate += objective(instances[k], assignments[k]);
    m.mean_oracle_sum_rate += oracle.objectives[k];
    hardened.push_back(harden(assignments[k]).matrix());
    m.mean_hardened_sum_rate += objective(instances[k], hardened.back());
  }
  const double n = static_cast<double>(instances.size());
  m.mean_sum_rate /= n;
  m.mean_oracle_sum_rate /= n;
  m.mean_hardened_sum_rate /= n;
  m.pct_of_optimal = 100.0 * m.mean_sum_rate / m.mean_oracle_sum_rate;
  m.avg_violation_prob =
      avg_constraint_violation_probability(instances, assignments, eps);
  m.hardened_violation_prob = avg_constraint_violation_probability(
      instances, std::span<const Matrix>(hardened), eps);
  m.mean_oracle_time = oracle.mean_time;
  return m;
}

template <class Scalar> struct Inference {
  std::vector<Matrix> assignments; // soft, I x J each
  double seconds_per_example = 0.0;
};

/// Runs the whole test set through the network as one batch; the wall time
/// is divided by the number of examples.
template <class Scalar>
Inference<Scalar> infer(const BasicMlp<Scalar> &model, const Dataset &data) {
  data.validate();
  if (data.empty())
    throw InvalidArgument("test set is empty");
  if (data.n_items() != model.split.items ||
      data.n_knapsacks() != model.split.knapsacks ||
      data.feature_width() != model.input_width())
    throw DimensionError("model and dataset dimensions differ");
  const Matrix features = data.feature_matrix();
  const auto start = std::chrono::steady_clock::now();
  const ForwardCache<Scalar> cache =
      forward_columns(model, features.transpose().cast<Scalar>().eval());
  const double elapsed = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start)
                             .count();
  Inference<Scalar> out;
  out.seconds_per_example = elapsed / static_cast<double>(data.size());
  out.assignments.reserve(data.size());
  for (Index b = 0; b < cache.output().cols(); ++b) {
    Matrix u = detail::example_u<Scalar>(cache.output(), b, model.split);
    for (Index i = 0; i < u.rows(); ++i)
      if (std::abs(u.row(i).sum() - 1.0) > kRowSumTolerance)
        throw Error("invariant_violation",
                    "network output row does not sum to 1 (example " +
                        std::to_string(b) + ")");
    out.assignments.push_back(std::move(u));
  }
  return out;
}

template <class Scalar>
Metrics evaluate(const BasicMlp<Scalar> &model, const Dataset &test,
                 double eps = kDefaultFeasibilityEps,
                 const OracleReference *oracle = nullptr) {
  const Inference<Scalar> inf = infer(model, test);
  const std::vector<GapInstance> instances = test.instances();
  OracleReference local;
  if (!oracle) {
    local = solve_reference(instances);
    oracle = &local;
  }
  Metrics m = summarize(instances, inf.assignments, *oracle, eps);
  m.mean_inference_time = inf.seconds_per_example;
  return m;
}

inline Metrics evaluate_any(const AnyMlp &model, const Dataset &test,
                            double eps = kDefaultFeasibilityEps,
                            const OracleReference *oracle = nullptr) {
  return std::visit([&](const auto &m) { return evaluate(m, test, eps, oracle); },
                    model);
}

struct SweepGrid {
  std::vector<double> lambdas;
  std::vector<double> learning_rates;
  std::vector<int> epochs;
  int repeats = 1;

  std::size_t size() const {
    return lambdas.size() * learning_rates.size() * epochs.size();
  }
};

struct SweepRow {
  double lambda = 0.0;
  double learning_rate = 0.0;
  int epochs = 0;
  Metrics metrics; // averaged over repeats
};

using SweepCallback = std::function<void(const SweepRow &)>;

/// Trains and evaluates one model per grid point (repeat r uses seed
/// base.seed + r). Empty grid axes fall back to the base config's value.
inline std::vector<SweepRow> sweep(const Dataset &train_data,
                                   const Dataset &test_data, SweepGrid grid,
                                   const TrainConfig &base,
                                   const SweepCallback &on_row = {}) {
  if (grid.lambdas.empty())
    grid.lambdas = {base.lambda};
  if (grid.learning_rates.empty())
    grid.learning_rates = {base.learning_rate};
  if (grid.epochs.empty())
    grid.epochs = {base.epochs};
  if (grid.repeats < 1)
    throw InvalidArgument("sweep repeats must be at least 1");

  const std::vector<GapInstance> instances = test_data.instances();
  const OracleReference oracle = solve_reference(instances);

  std::vector<SweepRow> rows;
  for (double lambda : grid.lambdas)
    for (double lr : grid.learning_rates)
      for (int epochs : grid.epochs) {
        SweepRow row{lambda, lr, epochs, {}};
        for (int r = 0; r < grid.repeats; ++r) {
          TrainConfig cfg = base;
          cfg.lambda = lambda;
          cfg.learning_rate = lr;
          cfg.epochs = epochs;
          cfg.seed = base.seed + std::uint64_t(r);
          Metrics m;
          try {
            const AnyTrainResult trained = train_any(train_data, cfg);
            m = evaluate_any(trained.model, test_data, kDefaultFeasibilityEps,
                             &oracle);
            m.loss_history = trained.loss_history;
          } catch (const Error &e) {
            throw Error(e.code(), "sweep point lambda=" + std::to_string(lambda) +
                                      " lr=" + std::to_string(lr) +
                                      " epochs=" + std::to_string(epochs) +
                                      ": " + e.what());
          }
          const double w = 1.0 / grid.repeats;
          Metrics &acc = row.metrics;
          acc.n_examples = m.n_examples;
          acc.mean_sum_rate += w * m.mean_sum_rate;
          acc.mean_oracle_sum_rate += w * m.mean_oracle_sum_rate;
          acc.avg_violation_prob += w * m.avg_violation_prob;
          acc.mean_hardened_sum_rate += w * m.mean_hardened_sum_rate;
          acc.hardened_violation_prob += w * m.hardened_violation_prob;
          acc.mean_inference_time += w * m.mean_inference_time;
          acc.mean_oracle_time += w * m.mean_oracle_time;
          if (r == 0)
            acc.loss_history = m.loss_history;
        }
        row.metrics.pct_of_optimal =
            100.0 * row.metrics.mean_sum_rate / row.metrics.mean_oracle_sum_rate;
        if (on_row)
          on_row(row);
        rows.push_back(std::move(row));
      }
  return rows;
}

inline constexpr const char *kMetricsCsvHeader =
    "lambda,lr,epochs,mean_sum_rate,pct_of_optimal,avg_violation_prob,"
    "dnn_time_ms,oracle_time_ms";

inline void write_metrics_csv_row(std::ostream &out, double lambda, double lr,
                                  int epochs, const Metrics &m) {
  const auto old = out.precision(17);
  out << lambda << ',' << lr << ',' << epochs << ',' << m.mean_sum_rate << ','
      << m.pct_of_optimal << ',' << m.avg_violation_prob << ','
      << m.mean_inference_time * 1e3 << ',' << m.mean_oracle_time * 1e3 << '\n';
  out.precision(old);
}

inline void write_sweep_csv(std::ostream &out, std::span<const SweepRow> rows) {
  out << kMetricsCsvHeader << '\n';
  for (const auto &r : rows)
    write_metrics_csv_row(out, r.lambda, r.learning_rate, r.epochs, r.metrics);
}

} // namespace dulgap
