#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "dulgap/checkpoint.hpp"
#include "dulgap/dataset.hpp"
#include "dulgap/trainer.hpp"

using namespace dulgap;

namespace {

const Dataset &train_set() {
  static const Dataset ds = generate_dataset(NetworkConfig::defaults(4, 4), 256, 1);
  return ds;
}

const Dataset &test_set() {
  static const Dataset ds = generate_dataset(NetworkConfig::defaults(4, 4), 64, 2);
  return ds;
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.layer_dims = {16, 32, 32, 16};
  cfg.epochs = 3;
  cfg.batch_size = 32;
  cfg.learning_rate = 1e-3;
  cfg.precision = Precision::f64;
  return cfg;
}

} // namespace

TEST(Batches, ReferenceCountAndRemainder) {
  const auto b = make_batches(10000, 128, 5);
  ASSERT_EQ(b.size(), 79u);
  for (std::size_t k = 0; k + 1 < b.size(); ++k)
    EXPECT_EQ(b[k].size(), 128u);
  EXPECT_EQ(b.back().size(), 16u);
}

TEST(Batches, DeterministicPartition) {
  EXPECT_EQ(make_batches(1000, 64, 9), make_batches(1000, 64, 9));
  EXPECT_NE(make_batches(1000, 64, 9), make_batches(1000, 64, 10));
  std::multiset<std::size_t> seen;
  for (const auto &batch : make_batches(1000, 64, 9))
    seen.insert(batch.begin(), batch.end());
  ASSERT_EQ(seen.size(), 1000u);
  std::size_t expect = 0;
  for (std::size_t v : seen)
    EXPECT_EQ(v, expect++);
  EXPECT_NE(epoch_seed(0, 1), epoch_seed(0, 2));
  EXPECT_THROW(make_batches(10, 0, 1), InvalidArgument);
  EXPECT_THROW(make_batches(10, 11, 1), InvalidArgument);
}

TEST(TrainConfig, ReferenceSettings) {
  const auto a = TrainConfig::reference_4x4();
  EXPECT_EQ(a.epochs, 50);
  EXPECT_EQ(a.batch_size, 128);
  EXPECT_EQ(a.lambda, 6.0);
  EXPECT_EQ(a.learning_rate, 1e-4);
  EXPECT_EQ(a.layer_dims, (std::vector<Index>{16, 64, 128, 256, 512, 1024, 2048, 16}));
  const auto b = TrainConfig::reference_16x4();
  EXPECT_EQ(b.epochs, 100);
  EXPECT_EQ(b.lambda, 10.0);
  EXPECT_EQ(b.layer_dims,
            (std::vector<Index>{64, 128, 256, 512, 1024, 2048, 2048, 4096, 4096, 64}));
  EXPECT_THROW(reference_layer_dims(5, 4), InvalidArgument);
}

TEST(Train, ZeroLearningRateKeepsLossConstant) {
  TrainConfig cfg = small_config();
  cfg.learning_rate = 0.0;
  cfg.epochs = 4;
  const auto r = train<double>(train_set(), cfg);
  ASSERT_EQ(r.loss_history.size(), 4u);
  // Batch order changes per epoch, so only the summation order differs.
  for (double l : r.loss_history)
    EXPECT_NEAR(l, r.loss_history.front(), 1e-12 * std::abs(r.loss_history.front()));
  const auto init = init_model<double>(cfg.layer_dims, Split{4, 4}, cfg.seed);
  for (std::size_t k = 0; k < init.n_layers(); ++k)
    EXPECT_EQ(r.model.weights[k], init.weights[k]);
}

TEST(Train, ReproducibleBitForBit) {
  for (Precision p : {Precision::f64, Precision::f32}) {
    TrainConfig cfg = small_config();
    cfg.precision = p;
    const auto a = train_any(train_set(), cfg);
    const auto b = train_any(train_set(), cfg);
    EXPECT_EQ(a.loss_history, b.loss_history);
    const auto ja = std::visit([](const auto &m) { return checkpoint_to_json(m); }, a.model);
    const auto jb = std::visit([](const auto &m) { return checkpoint_to_json(m); }, b.model);
    EXPECT_EQ(ja.dump(), jb.dump());
  }
}

TEST(Train, LossDecreases) {
  TrainConfig cfg = small_config();
  cfg.epochs = 15;
  const auto r = train<double>(train_set(), cfg);
  EXPECT_LT(r.loss_history.back(), r.loss_history.front());
}

TEST(Train, EpochCallbackAndNormalization) {
  TrainConfig cfg = small_config();
  std::vector<int> epochs;
  const auto r = train<double>(train_set(), cfg, [&](int e, double) { epochs.push_back(e); });
  EXPECT_EQ(epochs.size(), 3u);
  ASSERT_TRUE(r.model.feature_norm.has_value());
  EXPECT_EQ(*r.model.feature_norm, compute_feature_norm(train_set().feature_matrix()));
  cfg.normalize_features = false;
  EXPECT_FALSE(train<double>(train_set(), cfg).model.feature_norm.has_value());
}

TEST(Train, RejectsMismatchedDims) {
  TrainConfig cfg = small_config();
  cfg.layer_dims = {64, 8, 64};
  EXPECT_THROW(train<double>(train_set(), cfg), DimensionError);
  cfg = small_config();
  cfg.epochs = 0;
  EXPECT_THROW(train<double>(train_set(), cfg), InvalidArgument);
}

TEST(Evaluate, OracleAssignmentsScoreFullMarks) {
  const auto instances = test_set().instances();
  const OracleReference ref = solve_reference(instances);
  std::vector<Matrix> hard;
  for (const auto &inst : instances)
    hard.push_back(solve_unit_weight_exact(inst).assignment.matrix());
  const Metrics m = summarize(instances, hard, ref);
  EXPECT_NEAR(m.pct_of_optimal, 100.0, 1e-12);
  EXPECT_EQ(m.avg_violation_prob, 0.0);
  EXPECT_EQ(m.hardened_violation_prob, 0.0);
  EXPECT_NEAR(m.mean_sum_rate, m.mean_oracle_sum_rate, 1e-12);
}

TEST(Evaluate, MetricsAreConsistent) {
  const auto r = train<double>(train_set(), small_config());
  const Metrics m = evaluate(r.model, test_set());
  EXPECT_EQ(m.n_examples, 64u);
  EXPECT_NEAR(m.pct_of_optimal, 100.0 * m.mean_sum_rate / m.mean_oracle_sum_rate, 1e-9);
  EXPECT_GE(m.avg_violation_prob, 0.0);
  EXPECT_LE(m.avg_violation_prob, 1.0);
  EXPECT_LE(m.mean_sum_rate, m.mean_oracle_sum_rate * 1.5);
  EXPECT_GT(m.mean_inference_time, 0.0);
  const auto j = to_json_value(m);
  EXPECT_TRUE(j.contains("pct_of_optimal"));
  EXPECT_TRUE(j.contains("avg_violation_prob"));
}

TEST(Sweep, RowCountAndSinglePoint) {
  TrainConfig base = small_config();
  base.epochs = 2;
  SweepGrid grid{{1.0, 6.0}, {1e-3}, {1, 2}, 1};
  const auto rows = sweep(train_set(), test_set(), grid, base);
  EXPECT_EQ(rows.size(), grid.size());
  EXPECT_EQ(rows.size(), 4u);

  SweepGrid one{{6.0}, {1e-3}, {2}, 1};
  const auto single = sweep(train_set(), test_set(), one, base);
  ASSERT_EQ(single.size(), 1u);
  TrainConfig cfg = base;
  cfg.lambda = 6.0;
  const auto trained = train<double>(train_set(), cfg);
  const Metrics direct = evaluate(trained.model, test_set());
  EXPECT_EQ(single[0].metrics.mean_sum_rate, direct.mean_sum_rate);
  EXPECT_EQ(single[0].metrics.avg_violation_prob, direct.avg_violation_prob);
  EXPECT_EQ(single[0].metrics.loss_history, trained.loss_history);

  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, kMetricsCsvHeader);
  int n = 0;
  while (std::getline(lines, line))
    ++n;
  EXPECT_EQ(n, 4);
}
