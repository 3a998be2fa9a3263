// Acceptance checks. Usage: acceptance <fast|4x4|16x4|all>
// Prints one PASS/FAIL line per criterion; exits non-zero if any fails.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "dulgap/dulgap.hpp"
#include "support/oracles.hpp"

using namespace dulgap;

namespace {

int failures = 0;

void report(const std::string &id, bool ok, const std::string &detail) {
  std::cout << (ok ? "PASS " : "FAIL ") << id << ": " << detail << std::endl;
  if (!ok)
    ++failures;
}

std::string fmt(const char *f, double a, double b = 0, double c = 0,
                double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

void progress(int epoch, double loss) {
  std::cerr << "  epoch " << epoch << " loss " << loss << std::endl;
}

// ---------------------------------------------------------------- fast --

using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

// Simplified corrected-sign loss of the batch recomputed in long double.
long double reference_loss(const BasicMlp<long double> &model,
                           const LMat &inputs,
                           const std::vector<GapInstance> &batch,
                           long double lambda) {
  const auto cache = forward_columns(model, inputs);
  const LMat &u = cache.output();
  const Index I = model.split.items, J = model.split.knapsacks;
  long double total = 0;
  for (Index b = 0; b < u.cols(); ++b) {
    const auto &inst = batch[std::size_t(b)];
    for (Index j = 0; j < J; ++j) {
      long double load = 0;
      for (Index i = 0; i < I; ++i) {
        total -= u(i * J + j, b) * inst.profits()(i, j);
        load += u(i * J + j, b) * inst.weights()(i, j);
      }
      const long double excess = load - inst.capacities()(j);
      if (excess > 0)
        total += lambda * excess;
    }
  }
  return total / u.cols();
}

void criterion_gradients() {
  std::mt19937_64 rng(100);
  int models = 0, skipped = 0;
  double worst = 0;
  const double lambda = 6.0, h = 1e-5;
  while (models < 20) {
    const std::uint64_t seed = rng();
    auto model = init_model({16, 8, 8, 16}, Split{4, 4}, seed);
    for (auto &b : model.biases)
      b = refcheck::random_matrix(rng, b.size(), 1, -0.2, 0.2).col(0);
    const Index B = 6;
    const Matrix x = refcheck::random_matrix(rng, B, 16, 0, 5);
    std::vector<GapInstance> batch;
    for (Index b = 0; b < B; ++b) {
      Matrix p = Eigen::Map<const RowMajorMatrix>(x.row(b).eval().data(), 4, 4);
      batch.push_back(GapInstance::unit_weight(p, Vector::Constant(4, 1.0)));
    }
    const auto out = forward(model, x);
    std::vector<Matrix> us;
    bool near_kink = false;
    for (Index b = 0; b < B; ++b) {
      us.push_back(out.assignment(b, model.split).matrix());
      near_kink |= ((knapsack_loads(batch[std::size_t(b)], us.back()) -
                     batch[std::size_t(b)].capacities())
                        .cwiseAbs()
                        .array() < 1e-6)
                       .any();
    }
    if (near_kink) {
      ++skipped;
      continue;
    }
    ++models;
    LossConfig cfg;
    cfg.lambda = lambda;
    const auto grads = backward(model, out.cache, loss_grad_wrt_u(batch, us, cfg));

    auto lmodel = model.cast<long double>();
    const LMat inputs = x.transpose().cast<long double>();
    const auto check = [&](double analytic, long double &param) {
      if (std::abs(analytic) < 1e-8)
        return;
      const long double saved = param;
      param = saved + h;
      const long double plus = reference_loss(lmodel, inputs, batch, lambda);
      param = saved - h;
      const long double minus = reference_loss(lmodel, inputs, batch, lambda);
      param = saved;
      const double numeric = double((plus - minus) / (2 * h));
      const double rel = std::abs(analytic - numeric) /
                         std::max(std::abs(analytic), std::abs(numeric));
      worst = std::max(worst, rel);
    };
    for (std::size_t k = 0; k < model.n_layers(); ++k) {
      for (Index r = 0; r < model.weights[k].rows(); ++r)
        for (Index c = 0; c < model.weights[k].cols(); ++c)
          check(grads.weights[k](r, c), lmodel.weights[k](r, c));
      for (Index r = 0; r < model.biases[k].size(); ++r)
        check(grads.biases[k](r), lmodel.biases[k](r));
    }
  }
  report("6 gradient-correctness", worst < 1e-3,
         fmt("%.0f models (%.0f batches skipped near capacity), max rel err %.3g "
             "(< 1e-3)",
             models, skipped, worst));
}

void criterion_c1() {
  std::mt19937_64 rng(200);
  std::size_t passes = 0, bad_rows = 0;
  double worst = 0;
  for (int m = 0; m < 100; ++m) {
    const Index I = 2 + Index(m % 7), J = 2 + Index(m % 3);
    auto model = init_model({I * J, 24, 24, I * J}, Split{I, J}, rng());
    // Some models get large weights so logits spread far apart.
    if (m % 4 == 0)
      for (auto &w : model.weights)
        w *= 20.0;
    const Matrix x = refcheck::random_matrix(rng, 1000, I * J, -50, 50);
    const Matrix u = forward(model, x).u;
    for (Index b = 0; b < u.rows(); ++b) {
      ++passes;
      for (Index i = 0; i < I; ++i) {
        const double err = std::abs(u.row(b).segment(i * J, J).sum() - 1.0);
        worst = std::max(worst, err);
        bad_rows += err > 1e-6;
      }
    }
  }
  report("7 c1-by-construction", bad_rows == 0 && passes >= 100000,
         fmt("%.0f forward passes, %.0f rows off by > 1e-6, max |row sum - 1| %.3g",
             double(passes), double(bad_rows), worst));
}

void criterion_oracles() {
  std::mt19937_64 rng(300);
  std::uniform_int_distribution<Index> items(1, 8), bins(1, 4);
  int mismatches = 0;
  const int n_instances = 1000;
  for (int t = 0; t < n_instances; ++t) {
    const Index I = items(rng), J = bins(rng);
    std::uniform_int_distribution<int> quota(1, int(I));
    Vector caps(J);
    do {
      for (Index j = 0; j < J; ++j)
        caps(j) = quota(rng);
    } while (caps.sum() < double(I));
    const auto inst =
        GapInstance::unit_weight(refcheck::random_matrix(rng, I, J, 0, 10), caps);
    if (solve_unit_weight_exact(inst).objective != solve_brute_force(inst).objective)
      ++mismatches;
  }
  int hungarian_bad = 0, matrices = 0;
  for (Index n = 1; n <= 7; ++n)
    for (int t = 0; t < 30; ++t, ++matrices) {
      const Matrix c = refcheck::random_matrix(rng, n, n, -10, 10);
      if (std::abs(hungarian(c).cost - refcheck::exhaustive_min_permutation(c)) > 1e-9)
        ++hungarian_bad;
    }
  report("8 oracle-equivalence", mismatches == 0 && hungarian_bad == 0,
         fmt("exact vs brute force: %.0f/%.0f unequal; Hungarian vs exhaustive "
             "(n<=7): %.0f/%.0f off by > 1e-9",
             mismatches, n_instances, hungarian_bad, matrices));
}

void criterion_loss_forms() {
  std::mt19937_64 rng(400);
  std::uniform_real_distribution<double> lam(0, 20);
  double worst = 0;
  const int n = 1000;
  for (int t = 0; t < n; ++t) {
    const Index I = 1 + Index(t % 16), J = 1 + Index(t % 4);
    const std::vector<GapInstance> insts{GapInstance::unit_weight(
        refcheck::random_matrix(rng, I, J, 0, 10),
        refcheck::random_matrix(rng, J, 1, 0.5, 4).col(0))};
    const std::vector<Matrix> us{refcheck::random_row_stochastic(rng, I, J)};
    LossConfig cfg;
    cfg.lambda1 = lam(rng);
    cfg.lambda2 = cfg.lambda = lam(rng);
    worst = std::max(worst, std::abs(loss_simplified(insts, us, cfg) -
                                     loss_full(insts, us, cfg)));
  }
  report("9 loss-form-equivalence", worst <= 1e-12,
         fmt("%.0f row-stochastic assignments, max |simplified - full| %.3g",
             n, worst));
}

std::string slurp(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void criterion_reproducibility() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "dulgap_acceptance_repro";
  fs::create_directories(dir);
  const NetworkConfig net = NetworkConfig::defaults(4, 4);
  TrainConfig cfg = TrainConfig::reference_4x4();
  cfg.epochs = 2;
  cfg.seed = 5;
  std::vector<std::string> data_bytes, ckpt_bytes;
  std::vector<std::vector<double>> histories;
  for (int run = 0; run < 2; ++run) {
    const std::string data_path = (dir / ("data" + std::to_string(run) + ".jsonl")).string();
    const std::string ckpt_path = (dir / ("model" + std::to_string(run) + ".json")).string();
    save_dataset(generate_dataset(net, 2000, 11), data_path);
    const Dataset ds = load_dataset(data_path);
    const AnyTrainResult r = train_any(ds, cfg);
    std::visit([&](const auto &m) { save_checkpoint(m, ckpt_path); }, r.model);
    data_bytes.push_back(slurp(data_path));
    ckpt_bytes.push_back(slurp(ckpt_path));
    histories.push_back(r.loss_history);
  }
  fs::remove_all(dir);
  const bool ok = data_bytes[0] == data_bytes[1] && ckpt_bytes[0] == ckpt_bytes[1] &&
                  histories[0] == histories[1] && !data_bytes[0].empty();
  report("10 reproducibility", ok,
         std::string("dataset files ") + (data_bytes[0] == data_bytes[1] ? "identical" : "DIFFER") +
             ", checkpoints " + (ckpt_bytes[0] == ckpt_bytes[1] ? "identical" : "DIFFER") +
             ", loss histories " + (histories[0] == histories[1] ? "identical" : "DIFFER"));
}

// ------------------------------------------------------------ scenarios --

struct Run {
  Metrics metrics;
  double seconds = 0;
};

Run train_and_evaluate(const Dataset &train_data, const Dataset &test_data,
                       const TrainConfig &cfg, const OracleReference &oracle) {
  const auto start = std::chrono::steady_clock::now();
  const AnyTrainResult trained = train_any(train_data, cfg, progress);
  Run r;
  r.metrics = evaluate_any(trained.model, test_data, kDefaultFeasibilityEps, &oracle);
  r.metrics.loss_history = trained.loss_history;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cerr << "  lambda " << cfg.lambda << ": " << to_json_value(r.metrics).dump()
            << " (" << r.seconds << " s)" << std::endl;
  return r;
}

void scenario_4x4() {
  const NetworkConfig net = NetworkConfig::defaults(4, 4);
  const Dataset train_data = generate_dataset(net, 10000, 1);
  const Dataset test_data = generate_dataset(net, 1000, 2);
  const std::vector<GapInstance> instances = test_data.instances();
  const OracleReference oracle = solve_reference(instances);

  std::vector<double> lambdas{1, 6, 10};
  std::vector<Run> runs;
  for (double lambda : lambdas) {
    TrainConfig cfg = TrainConfig::reference_4x4();
    cfg.lambda = lambda;
    runs.push_back(train_and_evaluate(train_data, test_data, cfg, oracle));
  }
  const Metrics &def = runs[1].metrics;
  report("1 near-optimality-4x4", def.pct_of_optimal >= 95.0,
         fmt("DNN %.4f vs oracle %.4f = %.2f%% of optimal (>= 95%%)",
             def.mean_sum_rate, def.mean_oracle_sum_rate, def.pct_of_optimal));
  report("3a violation-4x4", def.avg_violation_prob <= 0.15,
         fmt("avg violation probability %.4f at lambda=6 (<= 0.15)",
             def.avg_violation_prob));

  bool monotone = true;
  std::string detail;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const Metrics &m = runs[k].metrics;
    detail += fmt("lambda=%.0f: viol %.4f rate %.4f; ", lambdas[k],
                  m.avg_violation_prob, m.mean_sum_rate);
    if (k > 0) {
      const Metrics &p = runs[k - 1].metrics;
      monotone &= m.avg_violation_prob <= p.avg_violation_prob * 1.10;
      monotone &= m.mean_sum_rate <= p.mean_sum_rate * 1.10;
    }
  }
  report("4 lambda-trend", monotone, detail + "10% relative band");
}

void scenario_16x4() {
  const NetworkConfig net = NetworkConfig::defaults(16, 4);
  const Dataset train_data = generate_dataset(net, 16000, 1);
  const Dataset test_data = generate_dataset(net, 1000, 2);
  const std::vector<GapInstance> instances = test_data.instances();
  const OracleReference oracle = solve_reference(instances);
  const Run run = train_and_evaluate(train_data, test_data,
                                     TrainConfig::reference_16x4(), oracle);
  const Metrics &m = run.metrics;
  report("2 near-optimality-16x4", m.pct_of_optimal >= 95.0,
         fmt("DNN %.4f vs oracle %.4f = %.2f%% of optimal (>= 95%%)",
             m.mean_sum_rate, m.mean_oracle_sum_rate, m.pct_of_optimal));
  report("3b violation-16x4", m.avg_violation_prob <= 0.15,
         fmt("avg violation probability %.4f at lambda=10 (<= 0.15)",
             m.avg_violation_prob));
  const double speedup = m.mean_oracle_time / m.mean_inference_time;
  report("5 timing-16x4", speedup >= 100.0,
         fmt("DNN %.4g ms/example vs oracle %.4g ms/example, speedup %.3gx (>= 100x)",
             m.mean_inference_time * 1e3, m.mean_oracle_time * 1e3, speedup));
}

} // namespace

int main(int argc, char **argv) {
  const std::string group = argc > 1 ? argv[1] : "fast";
  if (group != "fast" && group != "4x4" && group != "16x4" && group != "all") {
    std::cerr << "usage: acceptance <fast|4x4|16x4|all>\n";
    return 2;
  }
  try {
    if (group == "fast" || group == "all") {
      criterion_gradients();
      criterion_c1();
      criterion_oracles();
      criterion_loss_forms();
      criterion_reproducibility();
    }
    if (group == "4x4" || group == "all")
      scenario_4x4();
    if (group == "16x4" || group == "all")
      scenario_16x4();
  } catch (const std::exception &e) {
    std::cout << "FAIL " << group << ": exception: " << e.what() << std::endl;
    return 1;
  }
  return failures == 0 ? 0 : 1;
}
