// Command-line front end: dataset generation, training, evaluation,
// oracle benchmarking and hyperparameter sweeps.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dulgap/dulgap.hpp"

namespace {

using namespace dulgap;

struct GenDataArgs {
  int users = 4;
  int bs = 4;
  int rf_bs = -1;
  int thz_bs = -1;
  int quota = -1;
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  std::string out;
  NetworkConfig channel;
  double beamwidth_deg = 30.0;
  std::string interference = "per_user_other_bs";
};

void add_gen_data(CLI::App &app, GenDataArgs &a) {
  auto *cmd = app.add_subcommand("gen-data", "Generate a user-association dataset");
  cmd->add_option("--users", a.users, "Number of users (items)")->capture_default_str();
  cmd->add_option("--bs", a.bs, "Number of base stations (knapsacks)")->capture_default_str();
  cmd->add_option("--rf-bs", a.rf_bs, "RF base stations (default: bs/2)");
  cmd->add_option("--thz-bs", a.thz_bs, "THz base stations (default: bs - rf)");
  cmd->add_option("--quota", a.quota, "Users per BS (default: ceil(users/bs) + 1)");
  cmd->add_option("--n", a.n, "Number of examples")->capture_default_str();
  cmd->add_option("--seed", a.seed, "Random seed")->capture_default_str();
  cmd->add_option("--out", a.out, "Output JSON-lines file")->required();
  auto &c = a.channel;
  cmd->add_option("--radius", c.radius, "Disc radius [m]")->capture_default_str();
  cmd->add_option("--f-rf", c.f_rf, "RF carrier [Hz]")->capture_default_str();
  cmd->add_option("--f-thz", c.f_thz, "THz carrier [Hz]")->capture_default_str();
  cmd->add_option("--alpha", c.alpha, "RF path-loss exponent")->capture_default_str();
  cmd->add_option("--k-abs", c.k_abs, "Molecular absorption [1/m]")->capture_default_str();
  cmd->add_option("--p-rf", c.p_rf, "RF transmit power [W]")->capture_default_str();
  cmd->add_option("--p-thz", c.p_thz, "THz transmit power [W]")->capture_default_str();
  cmd->add_option("--g-tx-max-db", c.g_tx_max_db)->capture_default_str();
  cmd->add_option("--g-rx-max-db", c.g_rx_max_db)->capture_default_str();
  cmd->add_option("--g-tx-min-db", c.g_tx_min_db)->capture_default_str();
  cmd->add_option("--g-rx-min-db", c.g_rx_min_db)->capture_default_str();
  cmd->add_option("--beamwidth-deg", a.beamwidth_deg, "THz main-lobe beamwidth, tx and rx [deg]")
      ->capture_default_str();
  cmd->add_option("--rf-gain-db", c.rf_gain_db)->capture_default_str();
  cmd->add_option("--noise-dbm", c.noise_power_dbm)->capture_default_str();
  cmd->add_option("--bandwidth", c.bandwidth, "[Hz]; 1 gives bit/s/Hz")->capture_default_str();
  cmd->add_option("--min-distance", c.min_distance, "[m]")->capture_default_str();
  cmd->add_option("--interference", a.interference)
      ->check(CLI::IsMember({"per_user_other_bs", "as_printed_all_pairs"}))
      ->capture_default_str();
}

int run_gen_data(const GenDataArgs &a) {
  NetworkConfig cfg = a.channel;
  const NetworkConfig d = NetworkConfig::defaults(a.users, a.bs);
  cfg.n_users = a.users;
  cfg.n_bs = a.bs;
  cfg.n_rf_bs = a.rf_bs >= 0 ? a.rf_bs : (a.thz_bs >= 0 ? a.bs - a.thz_bs : d.n_rf_bs);
  cfg.n_thz_bs = a.thz_bs >= 0 ? a.thz_bs : a.bs - cfg.n_rf_bs;
  cfg.bs_quota = a.quota >= 0 ? a.quota : d.bs_quota;
  cfg.beamwidth_tx = cfg.beamwidth_rx = a.beamwidth_deg * std::numbers::pi / 180.0;
  cfg.interference_mode = interference_mode_from_string(a.interference);
  const Dataset ds = generate_dataset(cfg, a.n, a.seed);
  save_dataset(ds, a.out);
  std::cerr << "wrote " << ds.size() << " examples to " << a.out << '\n';
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string out;
  std::string history;
  double lambda = 0.0;
  double lr = 0.0;
  int epochs = 0;
  int batch = 0;
  std::vector<Index> dims;
  std::uint64_t seed = 0;
  std::string penalty_sign = "corrected";
  std::string precision = "f32";
  bool no_normalize = false;
  CLI::App *cmd = nullptr;
};

void add_train_options(CLI::App *cmd, TrainArgs &a) {
  cmd->add_option("--lambda", a.lambda, "Penalty weight (default: 6, or 10 for 16x4)");
  cmd->add_option("--lr", a.lr, "Adam learning rate (default 1e-4)");
  cmd->add_option("--epochs", a.epochs, "Epochs (default: 50, or 100 for 16x4)");
  cmd->add_option("--batch", a.batch, "Mini-batch size (default 128)");
  cmd->add_option("--dims", a.dims, "Layer widths, input to output")->delimiter(',');
  cmd->add_option("--seed", a.seed, "Initialization/shuffle seed")->capture_default_str();
  cmd->add_option("--penalty-sign", a.penalty_sign)
      ->check(CLI::IsMember({"corrected", "printed"}))
      ->capture_default_str();
  cmd->add_option("--precision", a.precision, "Training arithmetic")
      ->check(CLI::IsMember({"f32", "f64"}))
      ->capture_default_str();
  cmd->add_flag("--no-normalize", a.no_normalize, "Disable feature standardization");
}

void add_train(CLI::App &app, TrainArgs &a) {
  a.cmd = app.add_subcommand("train", "Train a network on a dataset");
  a.cmd->add_option("--data", a.data, "Training dataset")->required();
  a.cmd->add_option("--out", a.out, "Checkpoint path")->required();
  a.cmd->add_option("--history", a.history, "Optional JSON file for the loss history");
  add_train_options(a.cmd, a);
}

TrainConfig train_config_for(const Dataset &ds, const TrainArgs &a) {
  TrainConfig cfg = (ds.n_items() == 16 && ds.n_knapsacks() == 4)
                        ? TrainConfig::reference_16x4()
                        : TrainConfig::reference_4x4();
  cfg.layer_dims.clear();
  if (a.cmd->count("--lambda"))
    cfg.lambda = a.lambda;
  if (a.cmd->count("--lr"))
    cfg.learning_rate = a.lr;
  if (a.cmd->count("--epochs"))
    cfg.epochs = a.epochs;
  if (a.cmd->count("--batch"))
    cfg.batch_size = a.batch;
  cfg.layer_dims = a.dims;
  cfg.seed = a.seed;
  cfg.penalty_sign = penalty_sign_from_string(a.penalty_sign);
  cfg.precision = precision_from_string(a.precision);
  cfg.normalize_features = !a.no_normalize;
  return cfg;
}

int run_train(const TrainArgs &a) {
  const Dataset ds = load_dataset(a.data);
  const TrainConfig cfg = train_config_for(ds, a);
  const AnyTrainResult r = train_any(ds, cfg, [&](int epoch, double loss) {
    std::cerr << "epoch " << epoch << "/" << cfg.epochs << " loss " << loss << '\n';
  });
  std::visit([&](const auto &m) { save_checkpoint(m, a.out); }, r.model);
  if (!a.history.empty()) {
    std::ofstream h(a.history);
    h << nlohmann::json{{"loss_history", r.loss_history}}.dump() << '\n';
  }
  return 0;
}

struct EvalArgs {
  std::string model;
  std::string data;
  std::string out;
  double eps = kDefaultFeasibilityEps;
};

int run_eval(const EvalArgs &a) {
  const AnyMlp model = load_checkpoint(a.model);
  const Dataset ds = load_dataset(a.data);
  const Metrics m = evaluate_any(model, ds, a.eps);
  std::ofstream out(a.out);
  if (!out)
    throw InvalidArgument("cannot open '" + a.out + "' for writing");
  out << to_json_value(m).dump(2) << '\n';
  std::cerr << "sum rate " << m.mean_sum_rate << " (" << m.pct_of_optimal
            << "% of optimal), violation " << m.avg_violation_prob << '\n';
  return 0;
}

struct BenchmarkArgs {
  std::string data;
  std::string out;
};

int run_benchmark(const BenchmarkArgs &a) {
  const Dataset ds = load_dataset(a.data);
  std::ofstream out(a.out);
  if (!out)
    throw InvalidArgument("cannot open '" + a.out + "' for writing");
  out.precision(17);
  out << "example,oracle_objective,oracle_time_ms,greedy_objective,"
         "greedy_time_ms,greedy_pct_of_optimal\n";
  double oracle_sum = 0.0, greedy_sum = 0.0;
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const auto &inst = ds.examples[k].instance;
    const OracleSolution exact = solve_unit_weight_exact(inst);
    const OracleSolution greedy = greedy_baseline(inst);
    oracle_sum += exact.objective;
    greedy_sum += greedy.objective;
    out << k << ',' << exact.objective << ',' << exact.solve_time * 1e3 << ','
        << greedy.objective << ',' << greedy.solve_time * 1e3 << ','
        << 100.0 * greedy.objective / exact.objective << '\n';
  }
  std::cerr << "oracle mean " << oracle_sum / double(ds.size()) << ", greedy mean "
            << greedy_sum / double(ds.size()) << '\n';
  return 0;
}

struct SweepArgs {
  std::string test;
  std::string out;
  std::vector<double> lambdas;
  std::vector<double> lrs;
  std::vector<int> epoch_grid;
  int repeats = 1;
  TrainArgs train;
};

void add_sweep(CLI::App &app, SweepArgs &a) {
  auto *cmd = app.add_subcommand("sweep", "Train and evaluate over a hyperparameter grid");
  a.train.cmd = cmd;
  cmd->add_option("--data", a.train.data, "Training dataset")->required();
  cmd->add_option("--test", a.test, "Test dataset")->required();
  cmd->add_option("--out", a.out, "Output CSV")->required();
  cmd->add_option("--lambda", a.lambdas, "Penalty weight grid, e.g. 1,2,4,6")->delimiter(',');
  cmd->add_option("--lr", a.lrs, "Learning-rate grid")->delimiter(',');
  cmd->add_option("--epochs", a.epoch_grid, "Epoch-count grid")->delimiter(',');
  cmd->add_option("--repeats", a.repeats, "Seeds averaged per grid point")->capture_default_str();
  cmd->add_option("--batch", a.train.batch, "Mini-batch size (default 128)");
  cmd->add_option("--dims", a.train.dims, "Layer widths, input to output")->delimiter(',');
  cmd->add_option("--seed", a.train.seed)->capture_default_str();
  cmd->add_option("--penalty-sign", a.train.penalty_sign)
      ->check(CLI::IsMember({"corrected", "printed"}))
      ->capture_default_str();
  cmd->add_option("--precision", a.train.precision)
      ->check(CLI::IsMember({"f32", "f64"}))
      ->capture_default_str();
  cmd->add_flag("--no-normalize", a.train.no_normalize);
}

int run_sweep(const SweepArgs &a) {
  const Dataset train_ds = load_dataset(a.train.data);
  const Dataset test_ds = load_dataset(a.test);
  const TrainConfig base = train_config_for(train_ds, a.train);
  SweepGrid grid{a.lambdas, a.lrs, a.epoch_grid, a.repeats};
  std::ofstream out(a.out);
  if (!out)
    throw InvalidArgument("cannot open '" + a.out + "' for writing");
  out << kMetricsCsvHeader << '\n';
  sweep(train_ds, test_ds, grid, base, [&](const SweepRow &row) {
    write_metrics_csv_row(out, row.lambda, row.learning_rate, row.epochs, row.metrics);
    out.flush();
    std::cerr << "lambda " << row.lambda << " lr " << row.learning_rate << " epochs "
              << row.epochs << ": " << row.metrics.pct_of_optimal << "% of optimal, violation "
              << row.metrics.avg_violation_prob << '\n';
  });
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Unsupervised split-softmax GAP solver for user association"};
  app.require_subcommand(1);

  GenDataArgs gen;
  add_gen_data(app, gen);
  TrainArgs train;
  add_train(app, train);
  EvalArgs eval;
  auto *eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--model", eval.model, "Checkpoint")->required();
  eval_cmd->add_option("--data", eval.data, "Test dataset")->required();
  eval_cmd->add_option("--out", eval.out, "Metrics JSON")->required();
  eval_cmd->add_option("--eps", eval.eps, "Capacity slack for violations")->capture_default_str();
  BenchmarkArgs bench;
  auto *bench_cmd = app.add_subcommand("benchmark", "Exact oracle and greedy baseline per example");
  bench_cmd->add_option("--data", bench.data, "Dataset")->required();
  bench_cmd->add_option("--out", bench.out, "Output CSV")->required();
  SweepArgs sw;
  add_sweep(app, sw);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e);
  }

  try {
    if (app.got_subcommand("gen-data"))
      return run_gen_data(gen);
    if (app.got_subcommand("train"))
      return run_train(train);
    if (app.got_subcommand("eval"))
      return run_eval(eval);
    if (app.got_subcommand("benchmark"))
      return run_benchmark(bench);
    if (app.got_subcommand("sweep"))
      return run_sweep(sw);
  } catch (const dulgap::Error &e) {
    std::fprintf(stderr, "error: %s: %s\n", e.code().c_str(), e.what());
    return 1;
  } catch (const std::exception &e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return 1;
  }
  return 1;
}
