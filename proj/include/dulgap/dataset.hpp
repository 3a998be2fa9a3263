/**
 * @file dataset.hpp
 * @brief Feature/instance datasets and their JSON-lines file format.
 *
 * Line 0: {"version":1, "config":{...}, "seed":..., "n":...}
 * Line k: {"features":[I*J floats], "instance":{GapInstance JSON}}
 */
#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dulgap/error.hpp"
#include "dulgap/gap.hpp"
#include "dulgap/wireless.hpp"

namespace dulgap {

inline constexpr int kDatasetVersion = 1;

struct Example {
  Vector features; // row-major flattened profit (rate) matrix
  GapInstance instance;
};

struct Dataset {
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::vector<Example> examples;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
  Index n_items() const { return examples.front().instance.n_items(); }
  Index n_knapsacks() const { return examples.front().instance.n_knapsacks(); }
  Index feature_width() const { return examples.front().features.size(); }

  void validate() const {
    if (examples.empty())
      return;
    const Index I = n_items(), J = n_knapsacks(), F = feature_width();
    for (const auto &ex : examples)
      if (ex.instance.n_items() != I || ex.instance.n_knapsacks() != J ||
          ex.features.size() != F)
        throw DimensionError("dataset examples do not share dimensions");
  }

  /// Features stacked one example per row.
  Matrix feature_matrix() const {
    Matrix out(static_cast<Index>(examples.size()),
               examples.empty() ? 0 : feature_width());
    for (std::size_t k = 0; k < examples.size(); ++k)
      out.row(static_cast<Index>(k)) = examples[k].features.transpose();
    return out;
  }

  std::vector<GapInstance> instances() const {
    std::vector<GapInstance> out;
    out.reserve(examples.size());
    for (const auto &ex : examples)
      out.push_back(ex.instance);
    return out;
  }
};

/// Row-major flattening, the feature layout expected by the network.
inline Vector flatten_features(const Matrix &rates) {
  Vector out(rates.size());
  Eigen::Map<RowMajorMatrix>(out.data(), rates.rows(), rates.cols()) = rates;
  return out;
}

/// One association instance per independent snapshot. Example k uses its
/// own random stream derived from (seed, k).
inline Dataset generate_dataset(const NetworkConfig &cfg, std::size_t n_examples,
                                std::uint64_t seed) {
  cfg.validate();
  if (n_examples == 0)
    throw InvalidArgument("dataset needs at least one example");
  Dataset ds;
  ds.config = to_json_value(cfg);
  ds.seed = seed;
  ds.examples.reserve(n_examples);
  for (std::size_t k = 0; k < n_examples; ++k) {
    auto rng = make_stream(seed, k);
    const NetworkRealization net = sample_topology(cfg, rng);
    const Matrix rates = rate_matrix(net, cfg);
    ds.examples.push_back({flatten_features(rates),
                           association_instance(rates, cfg)});
  }
  return ds;
}

inline void write_dataset(const Dataset &ds, std::ostream &out) {
  ds.validate();
  nlohmann::json header{{"version", kDatasetVersion},
                        {"config", ds.config},
                        {"seed", ds.seed},
                        {"n", ds.examples.size()}};
  out << header.dump() << '\n';
  for (const auto &ex : ds.examples) {
    nlohmann::json line{
        {"features", std::vector<double>(ex.features.data(),
                                         ex.features.data() + ex.features.size())},
        {"instance", to_json_value(ex.instance)}};
    out << line.dump() << '\n';
  }
}

inline void save_dataset(const Dataset &ds, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw InvalidArgument("cannot open '" + path + "' for writing");
  write_dataset(ds, out);
  if (!out)
    throw InvalidArgument("failed writing '" + path + "'");
}

inline Dataset read_dataset(std::istream &in) {
  Dataset ds;
  std::string line;
  if (!std::getline(in, line))
    throw FormatError("dataset is empty");
  std::size_t expected = 0;
  try {
    const auto header = nlohmann::json::parse(line);
    if (header.at("version").get<int>() != kDatasetVersion)
      throw FormatError("unsupported dataset version");
    ds.config = header.at("config");
    ds.seed = header.at("seed").get<std::uint64_t>();
    expected = header.at("n").get<std::size_t>();
    ds.examples.reserve(expected);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty())
        continue;
      const auto j = nlohmann::json::parse(line);
      const auto f = j.at("features").get<std::vector<double>>();
      ds.examples.push_back(
          {Eigen::Map<const Vector>(f.data(), static_cast<Index>(f.size())),
           gap_instance_from_json(j.at("instance"))});
    }
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("bad dataset JSON: ") + e.what());
  }
  if (ds.examples.size() != expected)
    throw FormatError("dataset header announces " + std::to_string(expected) +
                      " examples but " + std::to_string(ds.examples.size()) +
                      " were read");
  ds.validate();
  return ds;
}

inline Dataset load_dataset(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw InvalidArgument("cannot open '" + path + "'");
  return read_dataset(in);
}

} // namespace dulgap
