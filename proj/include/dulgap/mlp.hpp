/**
 * @file mlp.hpp
 * @brief Fully-connected ReLU network whose output layer is split into
 * I groups of J logits, each normalized by its own softmax.
 *
 * Batches are stored column-wise internally (one example per column). The
 * public `forward`/`backward` overloads take row-per-example matrices.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dulgap/error.hpp"
#include "dulgap/gap.hpp"

namespace dulgap {

/// Output grouping: `items` softmax groups of `knapsacks` entries each.
struct Split {
  Index items = 0;
  Index knapsacks = 0;

  Index width() const { return items * knapsacks; }
  bool operator==(const Split &) const = default;
};

/// Per-feature standardization statistics, computed on the training set.
struct FeatureNorm {
  Vector mean;
  Vector std;

  bool operator==(const FeatureNorm &o) const {
    return mean.size() == o.mean.size() && mean == o.mean && std == o.std;
  }
};

/// Computes per-feature mean and (population) standard deviation over the
/// rows of `features`. Constant features get std 1.
inline FeatureNorm compute_feature_norm(const Matrix &features) {
  if (features.rows() < 1)
    throw InvalidArgument("feature normalization needs at least one row");
  FeatureNorm norm;
  norm.mean = features.colwise().mean().transpose();
  const Matrix centered = features.rowwise() - norm.mean.transpose();
  norm.std = (centered.array().square().colwise().sum() /
              static_cast<double>(features.rows()))
                 .sqrt()
                 .transpose();
  for (Index k = 0; k < norm.std.size(); ++k)
    if (!(norm.std(k) > 0.0))
      norm.std(k) = 1.0;
  return norm;
}

template <class Scalar> struct BasicMlp {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::vector<Index> layer_dims;
  Split split;
  std::vector<Mat> weights; // weights[k] is layer_dims[k+1] x layer_dims[k]
  std::vector<Vec> biases;
  std::optional<FeatureNorm> feature_norm;

  std::size_t n_layers() const { return weights.size(); }
  Index input_width() const { return layer_dims.front(); }
  Index output_width() const { return layer_dims.back(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t k = 0; k < weights.size(); ++k)
      n += static_cast<std::size_t>(weights[k].size() + biases[k].size());
    return n;
  }

  bool operator==(const BasicMlp &o) const {
    if (layer_dims != o.layer_dims || !(split == o.split) ||
        feature_norm != o.feature_norm)
      return false;
    for (std::size_t k = 0; k < weights.size(); ++k)
      if (weights[k] != o.weights[k] || biases[k] != o.biases[k])
        return false;
    return true;
  }

  void validate() const {
    if (layer_dims.size() < 2)
      throw InvalidArgument("network needs at least an input and an output "
                            "layer");
    for (Index d : layer_dims)
      if (d < 1)
        throw InvalidArgument("layer widths must be positive");
    if (split.items < 1 || split.knapsacks < 1)
      throw InvalidArgument("output split must be positive");
    if (layer_dims.back() != split.width())
      throw DimensionError("output width " + std::to_string(layer_dims.back()) +
                           " does not equal I*J = " +
                           std::to_string(split.width()));
    if (layer_dims.front() != split.width())
      throw DimensionError("input width " + std::to_string(layer_dims.front()) +
                           " does not equal I*J = " +
                           std::to_string(split.width()));
    if (weights.size() != layer_dims.size() - 1 ||
        biases.size() != weights.size())
      throw DimensionError("parameter count does not match layer_dims");
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (weights[k].rows() != layer_dims[k + 1] ||
          weights[k].cols() != layer_dims[k] ||
          biases[k].size() != layer_dims[k + 1])
        throw DimensionError("layer " + std::to_string(k) +
                             " parameters have the wrong shape");
    }
    if (feature_norm && (feature_norm->mean.size() != layer_dims.front() ||
                         feature_norm->std.size() != layer_dims.front()))
      throw DimensionError("feature normalization width mismatch");
  }

  /// Converts parameters to another scalar type.
  template <class Other> BasicMlp<Other> cast() const {
    BasicMlp<Other> out;
    out.layer_dims = layer_dims;
    out.split = split;
    out.feature_norm = feature_norm;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      out.weights.push_back(weights[k].template cast<Other>());
      out.biases.push_back(biases[k].template cast<Other>());
    }
    return out;
  }
};

using MlpModel = BasicMlp<double>;
using MlpModelF = BasicMlp<float>;

/// Hidden layers get He-normal weights (variance 2/fan_in); the softmax
/// layer uses variance 1/fan_in. Biases start at zero.
template <class Scalar = double>
BasicMlp<Scalar> init_model(std::vector<Index> layer_dims, Split split,
                            std::uint64_t seed) {
  BasicMlp<Scalar> model;
  model.layer_dims = std::move(layer_dims);
  model.split = split;
  if (model.layer_dims.size() < 2)
    throw InvalidArgument("network needs at least an input and an output "
                          "layer");
  std::mt19937_64 rng(seed);
  const std::size_t L = model.layer_dims.size() - 1;
  for (std::size_t k = 0; k < L; ++k) {
    const Index fan_in = model.layer_dims[k];
    const Index fan_out = model.layer_dims[k + 1];
    if (fan_in < 1 || fan_out < 1)
      throw InvalidArgument("layer widths must be positive");
    const double gain = (k + 1 == L) ? 1.0 : 2.0;
    std::normal_distribution<double> dist(
        0.0, std::sqrt(gain / static_cast<double>(fan_in)));
    typename BasicMlp<Scalar>::Mat w(fan_out, fan_in);
    for (Index r = 0; r < fan_out; ++r)
      for (Index c = 0; c < fan_in; ++c)
        w(r, c) = static_cast<Scalar>(dist(rng));
    model.weights.push_back(std::move(w));
    model.biases.push_back(BasicMlp<Scalar>::Vec::Zero(fan_out));
  }
  model.validate();
  return model;
}

/// Numerically stable softmax (max subtraction).
template <class Derived> void softmax_inplace(Eigen::MatrixBase<Derived> &v) {
  using S = typename Derived::Scalar;
  const S m = v.maxCoeff();
  v = (v.array() - m).exp().matrix();
  v /= v.sum();
}

inline Vector softmax(const Vector &logits) {
  Vector out = logits;
  softmax_inplace(out);
  return out;
}

/// Pre-activations and activations of one batch, column per example.
/// activations[0] is the normalized input, activations.back() is u.
template <class Scalar> struct ForwardCache {
  using Mat = typename BasicMlp<Scalar>::Mat;
  std::vector<Mat> pre_activations; // z_1 .. z_L
  std::vector<Mat> activations;     // a_0 .. a_L

  Index batch_size() const { return activations.front().cols(); }
  const Mat &output() const { return activations.back(); }
};

/// Forward pass on column-major raw features (I*J x batch).
template <class Scalar>
ForwardCache<Scalar>
forward_columns(const BasicMlp<Scalar> &model,
                typename BasicMlp<Scalar>::Mat inputs) {
  using Mat = typename BasicMlp<Scalar>::Mat;
  if (inputs.rows() != model.input_width())
    throw DimensionError("feature width " + std::to_string(inputs.rows()) +
                         " does not match network input " +
                         std::to_string(model.input_width()));
  if (model.feature_norm) {
    const auto mean = model.feature_norm->mean.template cast<Scalar>();
    const auto inv_std =
        model.feature_norm->std.array().inverse().template cast<Scalar>();
    inputs.colwise() -= mean;
    inputs.array().colwise() *= inv_std;
  }
  ForwardCache<Scalar> cache;
  const std::size_t L = model.n_layers();
  cache.pre_activations.reserve(L);
  cache.activations.reserve(L + 1);
  cache.activations.push_back(std::move(inputs));
  for (std::size_t k = 0; k < L; ++k) {
    Mat z(model.weights[k].rows(), cache.activations.back().cols());
    z.noalias() = model.weights[k] * cache.activations.back();
    z.colwise() += model.biases[k];
    Mat a;
    if (k + 1 < L) {
      a = z.cwiseMax(Scalar(0));
    } else {
      a = z;
      const Index J = model.split.knapsacks;
      for (Index b = 0; b < a.cols(); ++b)
        for (Index g = 0; g < model.split.items; ++g) {
          auto block = a.col(b).segment(g * J, J);
          softmax_inplace(block);
        }
    }
    cache.pre_activations.push_back(std::move(z));
    cache.activations.push_back(std::move(a));
  }
  return cache;
}

template <class Scalar> struct BatchOutput {
  Matrix u; // batch x (I*J), row-major item layout within each row
  ForwardCache<Scalar> cache;

  /// Soft assignment (I x J) of example `b`.
  Assignment assignment(Index b, Split split) const {
    Matrix m = Eigen::Map<const RowMajorMatrix>(u.row(b).eval().data(),
                                                split.items, split.knapsacks);
    return Assignment::soft(std::move(m));
  }
};

/// Forward pass on a batch with one example per row.
template <class Scalar>
BatchOutput<Scalar> forward(const BasicMlp<Scalar> &model,
                            const Matrix &features) {
  if (features.cols() != model.input_width())
    throw DimensionError("feature width " + std::to_string(features.cols()) +
                         " does not match network input " +
                         std::to_string(model.input_width()));
  BatchOutput<Scalar> out;
  out.cache = forward_columns(model, features.transpose().cast<Scalar>().eval());
  out.u = out.cache.output().transpose().template cast<double>();
  return out;
}

template <class Scalar> struct Gradients {
  std::vector<typename BasicMlp<Scalar>::Mat> weights;
  std::vector<typename BasicMlp<Scalar>::Vec> biases;

  bool all_finite() const {
    for (std::size_t k = 0; k < weights.size(); ++k)
      if (!weights[k].allFinite() || !biases[k].allFinite())
        return false;
    return true;
  }
};

/// Backpropagates dL/du (I*J x batch, column per example) through the split
/// softmax and the ReLU layers. ReLU'(0) is taken as 0.
template <class Scalar>
Gradients<Scalar> backward_columns(const BasicMlp<Scalar> &model,
                                   const ForwardCache<Scalar> &cache,
                                   const typename BasicMlp<Scalar>::Mat &dl_du) {
  using Mat = typename BasicMlp<Scalar>::Mat;
  const std::size_t L = model.n_layers();
  if (cache.activations.size() != L + 1 || cache.pre_activations.size() != L)
    throw DimensionError("forward cache does not match the model depth");
  if (dl_du.rows() != model.output_width() ||
      dl_du.cols() != cache.batch_size())
    throw DimensionError("upstream gradient shape does not match the cache");

  // Per group: dL/dz = u .* (g - <u, g>), i.e. (diag(u) - u u^T) g.
  const Mat &u = cache.output();
  Mat delta(dl_du.rows(), dl_du.cols());
  const Index J = model.split.knapsacks;
  for (Index b = 0; b < u.cols(); ++b)
    for (Index g = 0; g < model.split.items; ++g) {
      const auto ug = u.col(b).segment(g * J, J);
      const auto gg = dl_du.col(b).segment(g * J, J);
      const Scalar inner = ug.dot(gg);
      delta.col(b).segment(g * J, J) =
          (ug.array() * (gg.array() - inner)).matrix();
    }

  Gradients<Scalar> grads;
  grads.weights.resize(L);
  grads.biases.resize(L);
  for (std::size_t k = L; k-- > 0;) {
    grads.weights[k].noalias() = delta * cache.activations[k].transpose();
    grads.biases[k] = delta.rowwise().sum();
    if (k > 0) {
      Mat prev(model.weights[k].cols(), delta.cols());
      prev.noalias() = model.weights[k].transpose() * delta;
      prev.array() *=
          (cache.pre_activations[k - 1].array() > Scalar(0)).template cast<Scalar>();
      delta = std::move(prev);
    }
  }
  return grads;
}

/// Row-per-example overload of `backward_columns`.
template <class Scalar>
Gradients<Scalar> backward(const BasicMlp<Scalar> &model,
                           const ForwardCache<Scalar> &cache,
                           const Matrix &dl_du) {
  return backward_columns(model, cache,
                          dl_du.transpose().cast<Scalar>().eval());
}

template <class Scalar> struct AdamState {
  std::vector<typename BasicMlp<Scalar>::Mat> m_weights, v_weights;
  std::vector<typename BasicMlp<Scalar>::Vec> m_biases, v_biases;
  std::int64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState zeros_like(const BasicMlp<Scalar> &model) {
    AdamState s;
    for (std::size_t k = 0; k < model.n_layers(); ++k) {
      s.m_weights.push_back(BasicMlp<Scalar>::Mat::Zero(
          model.weights[k].rows(), model.weights[k].cols()));
      s.v_weights.push_back(s.m_weights.back());
      s.m_biases.push_back(BasicMlp<Scalar>::Vec::Zero(model.biases[k].size()));
      s.v_biases.push_back(s.m_biases.back());
    }
    return s;
  }
};

namespace detail {
template <class P, class G>
void adam_update(P &param, const G &grad, P &m, P &v, double lr, double beta1,
                 double beta2, double eps, double bc1, double bc2) {
  using S = typename P::Scalar;
  m.array() = S(beta1) * m.array() + S(1.0 - beta1) * grad.array();
  v.array() = S(beta2) * v.array() + S(1.0 - beta2) * grad.array().square();
  if (lr != 0.0)
    param.array() -= S(lr) * (m.array() / S(bc1)) /
                     ((v.array() / S(bc2)).sqrt() + S(eps));
}
} // namespace detail

/// One Adam step with bias-corrected moments. Updates `model` and `state`
/// in place. Throws DivergenceError on non-finite gradients.
template <class Scalar>
void adam_step(BasicMlp<Scalar> &model, const Gradients<Scalar> &grads,
               AdamState<Scalar> &state, double lr) {
  if (grads.weights.size() != model.n_layers() ||
      state.m_weights.size() != model.n_layers())
    throw DimensionError("Adam state or gradients do not match the model");
  for (std::size_t k = 0; k < model.n_layers(); ++k)
    if (grads.weights[k].rows() != model.weights[k].rows() ||
        grads.weights[k].cols() != model.weights[k].cols() ||
        grads.biases[k].size() != model.biases[k].size())
      throw DimensionError("gradient shape mismatch at layer " +
                           std::to_string(k));
  if (!grads.all_finite())
    throw DivergenceError("non-finite gradient in Adam step");
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < model.n_layers(); ++k) {
    detail::adam_update(model.weights[k], grads.weights[k], state.m_weights[k],
                        state.v_weights[k], lr, state.beta1, state.beta2,
                        state.eps, bc1, bc2);
    detail::adam_update(model.biases[k], grads.biases[k], state.m_biases[k],
                        state.v_biases[k], lr, state.beta1, state.beta2,
                        state.eps, bc1, bc2);
  }
}

} // namespace dulgap
