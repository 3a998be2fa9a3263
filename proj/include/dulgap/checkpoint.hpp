/**
 * @file checkpoint.hpp
 * @brief Versioned JSON checkpoints for split-softmax networks.
 *
 * {"version":1, "dtype":"f64"|"f32", "layer_dims":[...], "split":[I,J],
 *  "feature_norm":{"mean":[...],"std":[...]} | null,
 *  "weights":[<base64>...], "biases":[<base64>...]}
 *
 * Each blob is the layer's parameters as little-endian IEEE values in
 * row-major order, so save/load is bit-exact.
 */
#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dulgap/error.hpp"
#include "dulgap/mlp.hpp"

namespace dulgap {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs assume a little-endian host");

inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline constexpr std::string_view kBase64Alphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string base64_encode(const unsigned char *data, std::size_t n) {
  std::string out;
  out.reserve((n + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < n; i += 3) {
    const std::uint32_t v = (std::uint32_t(data[i]) << 16) |
                            (std::uint32_t(data[i + 1]) << 8) | data[i + 2];
    out += kBase64Alphabet[(v >> 18) & 63];
    out += kBase64Alphabet[(v >> 12) & 63];
    out += kBase64Alphabet[(v >> 6) & 63];
    out += kBase64Alphabet[v & 63];
  }
  if (i < n) {
    std::uint32_t v = std::uint32_t(data[i]) << 16;
    if (i + 1 < n)
      v |= std::uint32_t(data[i + 1]) << 8;
    out += kBase64Alphabet[(v >> 18) & 63];
    out += kBase64Alphabet[(v >> 12) & 63];
    out += (i + 1 < n) ? kBase64Alphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

inline std::vector<unsigned char> base64_decode(std::string_view s) {
  std::array<int, 256> lookup;
  lookup.fill(-1);
  for (std::size_t k = 0; k < kBase64Alphabet.size(); ++k)
    lookup[static_cast<unsigned char>(kBase64Alphabet[k])] = static_cast<int>(k);
  if (s.size() % 4 != 0)
    throw FormatError("base64 length is not a multiple of 4");
  std::vector<unsigned char> out;
  out.reserve(s.size() / 4 * 3);
  for (std::size_t i = 0; i < s.size(); i += 4) {
    int v[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = s[i + static_cast<std::size_t>(k)];
      if (c == '=' && i + 4 == s.size() && k >= 2) {
        v[k] = 0;
        ++pad;
      } else {
        v[k] = lookup[static_cast<unsigned char>(c)];
        if (v[k] < 0 || pad > 0)
          throw FormatError("invalid base64 character");
      }
    }
    const std::uint32_t w = (std::uint32_t(v[0]) << 18) |
                            (std::uint32_t(v[1]) << 12) |
                            (std::uint32_t(v[2]) << 6) | std::uint32_t(v[3]);
    out.push_back(static_cast<unsigned char>((w >> 16) & 0xFF));
    if (pad < 2)
      out.push_back(static_cast<unsigned char>((w >> 8) & 0xFF));
    if (pad < 1)
      out.push_back(static_cast<unsigned char>(w & 0xFF));
  }
  return out;
}

template <class Scalar> constexpr const char *dtype_name() {
  if constexpr (std::is_same_v<Scalar, double>)
    return "f64";
  else
    return "f32";
}

template <class Scalar, class Derived>
std::string encode_blob(const Eigen::DenseBase<Derived> &m) {
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
      rm = m;
  return base64_encode(reinterpret_cast<const unsigned char *>(rm.data()),
                       static_cast<std::size_t>(rm.size()) * sizeof(Scalar));
}

template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>
decode_blob(std::string_view text, Index rows, Index cols) {
  const auto bytes = base64_decode(text);
  if (bytes.size() != static_cast<std::size_t>(rows * cols) * sizeof(Scalar))
    throw FormatError("parameter blob has the wrong length");
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(
      rows, cols);
  std::memcpy(rm.data(), bytes.data(), bytes.size());
  return rm;
}

} // namespace detail

template <class Scalar>
nlohmann::json checkpoint_to_json(const BasicMlp<Scalar> &model) {
  model.validate();
  nlohmann::json j;
  j["version"] = kCheckpointVersion;
  j["dtype"] = detail::dtype_name<Scalar>();
  j["layer_dims"] = model.layer_dims;
  j["split"] = {model.split.items, model.split.knapsacks};
  if (model.feature_norm) {
    const auto &fn = *model.feature_norm;
    j["feature_norm"] = {
        {"mean", std::vector<double>(fn.mean.data(),
                                     fn.mean.data() + fn.mean.size())},
        {"std",
         std::vector<double>(fn.std.data(), fn.std.data() + fn.std.size())}};
  } else {
    j["feature_norm"] = nullptr;
  }
  j["weights"] = nlohmann::json::array();
  j["biases"] = nlohmann::json::array();
  for (std::size_t k = 0; k < model.n_layers(); ++k) {
    j["weights"].push_back(detail::encode_blob<Scalar>(model.weights[k]));
    j["biases"].push_back(detail::encode_blob<Scalar>(model.biases[k]));
  }
  return j;
}

using AnyMlp = std::variant<MlpModel, MlpModelF>;

inline AnyMlp checkpoint_from_json(const nlohmann::json &j) {
  try {
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw FormatError("unsupported checkpoint version");
    const std::string dtype = j.value("dtype", std::string("f64"));
    auto load = [&](auto tag) -> AnyMlp {
      using S = decltype(tag);
      BasicMlp<S> model;
      model.layer_dims = j.at("layer_dims").get<std::vector<Index>>();
      const auto split = j.at("split").get<std::vector<Index>>();
      if (split.size() != 2)
        throw FormatError("split must be [I, J]");
      model.split = Split{split[0], split[1]};
      if (!j.at("feature_norm").is_null()) {
        const auto mean =
            j["feature_norm"].at("mean").get<std::vector<double>>();
        const auto sd = j["feature_norm"].at("std").get<std::vector<double>>();
        model.feature_norm = FeatureNorm{
            Eigen::Map<const Vector>(mean.data(), Index(mean.size())),
            Eigen::Map<const Vector>(sd.data(), Index(sd.size()))};
      }
      const auto &w = j.at("weights");
      const auto &b = j.at("biases");
      if (model.layer_dims.size() < 2 || w.size() != model.layer_dims.size() - 1 ||
          b.size() != w.size())
        throw FormatError("layer count does not match layer_dims");
      for (std::size_t k = 0; k < w.size(); ++k) {
        model.weights.push_back(detail::decode_blob<S>(
            w[k].get<std::string>(), model.layer_dims[k + 1],
            model.layer_dims[k]));
        model.biases.push_back(detail::decode_blob<S>(
            b[k].get<std::string>(), model.layer_dims[k + 1], 1));
      }
      model.validate();
      return model;
    };
    if (dtype == "f64")
      return load(double{});
    if (dtype == "f32")
      return load(float{});
    throw FormatError("unknown checkpoint dtype '" + dtype + "'");
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("bad checkpoint JSON: ") + e.what());
  }
}

template <class Scalar>
void save_checkpoint(const BasicMlp<Scalar> &model, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw InvalidArgument("cannot open '" + path + "' for writing");
  out << checkpoint_to_json(model).dump() << '\n';
  if (!out)
    throw InvalidArgument("failed writing '" + path + "'");
}

inline AnyMlp load_checkpoint(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw InvalidArgument("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("bad checkpoint JSON: ") + e.what());
  }
  return checkpoint_from_json(j);
}

} // namespace dulgap
