#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "tumornet/kernels.hpp"
#include "tumornet/rng.hpp"
#include "tumornet/tensor.hpp"

namespace tumornet {

enum class Mode { Train, Infer };

// ---------------------------------------------------------------- leaky relu

template <class T>
Tensor<T> leaky_relu_forward(const Tensor<T>& x, double slope) {
  Tensor<T> y = x;
  const T a = static_cast<T>(slope);
  for (auto& v : y.data()) v = v >= T{0} ? v : a * v;
  return y;
}

// Subgradient 1 at x == 0.
template <class T>
Tensor<T> leaky_relu_backward(const Tensor<T>& grad_out, const Tensor<T>& x, double slope) {
  require_shape(grad_out, x.shape(), "leaky_relu_backward");
  Tensor<T> g = grad_out;
  const T a = static_cast<T>(slope);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (x[i] < T{0}) g[i] *= a;
  return g;
}

// ---------------------------------------------------------------- batchnorm

template <class T>
struct BatchNormState {
  Tensor<T> running_mean;
  Tensor<T> running_var;
};

template <class T>
struct BatchNormCache {
  Tensor<T> normalized;          // x_hat, same shape as the input
  std::vector<double> mean;      // per channel
  std::vector<double> variance;  // per channel, biased
  std::vector<double> inv_std;   // per channel
};

template <class T>
struct BatchNormTrainResult {
  Tensor<T> output;
  BatchNormCache<T> cache;
};

/// Per-channel statistics over every axis except the last.
template <class T>
BatchNormTrainResult<T> batchnorm_forward_train(const Tensor<T>& x, const Tensor<T>& gamma,
                                                const Tensor<T>& beta, double epsilon) {
  const std::size_t c = x.shape().back();
  require_shape(gamma, Shape{c}, "batchnorm gamma");
  require_shape(beta, Shape{c}, "batchnorm beta");
  const std::size_t m = x.size() / c;
  if (m < 2) {
    throw NumericError("batchnorm in train mode needs at least 2 values per channel, got " +
                       std::to_string(m));
  }

  BatchNormTrainResult<T> r{Tensor<T>(x.shape()),
                            BatchNormCache<T>{Tensor<T>(x.shape()), std::vector<double>(c, 0.0),
                                              std::vector<double>(c, 0.0),
                                              std::vector<double>(c, 0.0)}};
  auto& cache = r.cache;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) cache.mean[ch] += x[i * c + ch];
  for (auto& v : cache.mean) v /= static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double d = x[i * c + ch] - cache.mean[ch];
      cache.variance[ch] += d * d;
    }
  for (std::size_t ch = 0; ch < c; ++ch) {
    cache.variance[ch] /= static_cast<double>(m);
    cache.inv_std[ch] = 1.0 / std::sqrt(cache.variance[ch] + epsilon);
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t k = i * c + ch;
      const T xh = static_cast<T>((x[k] - cache.mean[ch]) * cache.inv_std[ch]);
      cache.normalized[k] = xh;
      r.output[k] = gamma[ch] * xh + beta[ch];
    }
  require_finite(r.output, "batchnorm_forward");
  return r;
}

template <class T>
Tensor<T> batchnorm_forward_infer(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                                  const BatchNormState<T>& state, double epsilon) {
  const std::size_t c = x.shape().back();
  require_shape(gamma, Shape{c}, "batchnorm gamma");
  require_shape(beta, Shape{c}, "batchnorm beta");
  require_shape(state.running_mean, Shape{c}, "batchnorm running mean");
  require_shape(state.running_var, Shape{c}, "batchnorm running variance");
  std::vector<T> scale(c), shift(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double s = gamma[ch] / std::sqrt(static_cast<double>(state.running_var[ch]) + epsilon);
    scale[ch] = static_cast<T>(s);
    shift[ch] = static_cast<T>(beta[ch] - s * state.running_mean[ch]);
  }
  Tensor<T> y(x.shape());
  const std::size_t m = x.size() / c;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) y[i * c + ch] = x[i * c + ch] * scale[ch] + shift[ch];
  require_finite(y, "batchnorm_forward");
  return y;
}

// running <- momentum * running + (1 - momentum) * batch
template <class T>
void batchnorm_update_running(BatchNormState<T>& state, const BatchNormCache<T>& cache,
                              double momentum) {
  for (std::size_t ch = 0; ch < cache.mean.size(); ++ch) {
    state.running_mean[ch] = static_cast<T>(momentum * state.running_mean[ch] +
                                            (1.0 - momentum) * cache.mean[ch]);
    state.running_var[ch] = static_cast<T>(momentum * state.running_var[ch] +
                                           (1.0 - momentum) * cache.variance[ch]);
  }
}

/// Train mode normalizes with batch statistics and folds them into `state`;
/// infer mode reads `state` only.
template <class T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                            BatchNormState<T>& state, Mode mode, double epsilon, double momentum) {
  if (mode == Mode::Infer) return batchnorm_forward_infer(x, gamma, beta, state, epsilon);
  auto r = batchnorm_forward_train(x, gamma, beta, epsilon);
  batchnorm_update_running(state, r.cache, momentum);
  return std::move(r.output);
}

template <class T>
struct BatchNormGradients {
  Tensor<T> input;
  Tensor<T> gamma;
  Tensor<T> beta;
};

template <class T>
BatchNormGradients<T> batchnorm_backward(const Tensor<T>& grad_out, const BatchNormCache<T>& cache,
                                         const Tensor<T>& gamma) {
  require_shape(grad_out, cache.normalized.shape(), "batchnorm_backward");
  const std::size_t c = gamma.size();
  const std::size_t m = grad_out.size() / c;
  std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t k = i * c + ch;
      sum_g[ch] += grad_out[k];
      sum_gx[ch] += static_cast<double>(grad_out[k]) * cache.normalized[k];
    }
  BatchNormGradients<T> g{Tensor<T>(grad_out.shape()), Tensor<T>(Shape{c}), Tensor<T>(Shape{c})};
  for (std::size_t ch = 0; ch < c; ++ch) {
    g.gamma[ch] = static_cast<T>(sum_gx[ch]);
    g.beta[ch] = static_cast<T>(sum_g[ch]);
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t k = i * c + ch;
      const double dxh = static_cast<double>(grad_out[k]) - sum_g[ch] * inv_m -
                         cache.normalized[k] * sum_gx[ch] * inv_m;
      g.input[k] = static_cast<T>(gamma[ch] * cache.inv_std[ch] * dxh);
    }
  require_finite(g.input, "batchnorm_backward");
  return g;
}

// ---------------------------------------------------------------- dropout

template <class T>
struct DropoutResult {
  Tensor<T> output;
  Tensor<T> mask;  // 0 or 1/(1-rate) per element; empty when inactive
};

// Inverted dropout: `rate` is the drop probability.
template <class T>
DropoutResult<T> dropout_apply(const Tensor<T>& x, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0,1)");
  if (mode == Mode::Infer || rate == 0.0) return {x, Tensor<T>()};
  Tensor<T> mask(x.shape());
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  for (auto& v : mask.data()) v = rng.uniform() < rate ? T{0} : keep_scale;
  Tensor<T> y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
  return {std::move(y), std::move(mask)};
}

template <class T>
Tensor<T> dropout_backward(const Tensor<T>& grad_out, const Tensor<T>& mask) {
  if (mask.empty()) return grad_out;
  require_shape(grad_out, mask.shape(), "dropout_backward");
  Tensor<T> g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= mask[i];
  return g;
}

// ---------------------------------------------------------------- dense

template <class T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias) {
  if (x.rank() != 2 || weights.rank() != 2 || x.dim(1) != weights.dim(0)) {
    throw ShapeError("dense input " + to_string(x.shape()) + " incompatible with weights " +
                     to_string(weights.shape()));
  }
  require_shape(bias, Shape{weights.dim(1)}, "dense bias");
  Tensor<T> y = matmul(x, weights);
  const std::size_t n = y.dim(0), u = y.dim(1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < u; ++j) y[i * u + j] += bias[j];
  require_finite(y, "dense_forward");
  return y;
}

template <class T>
struct DenseGradients {
  Tensor<T> input;
  Tensor<T> weights;
  Tensor<T> bias;
};

template <class T>
DenseGradients<T> dense_backward(const Tensor<T>& grad_out, const Tensor<T>& x,
                                 const Tensor<T>& weights) {
  require_shape(grad_out, Shape{x.dim(0), weights.dim(1)}, "dense_backward grad_out");
  DenseGradients<T> g{matmul(grad_out, transpose(weights)), matmul(transpose(x), grad_out),
                      Tensor<T>(Shape{weights.dim(1)})};
  const std::size_t n = grad_out.dim(0), u = grad_out.dim(1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < u; ++j) g.bias[j] += grad_out[i * u + j];
  return g;
}

// ---------------------------------------------------------------- softmax

// Row-wise with max subtraction.
template <class T>
Tensor<T> softmax(const Tensor<T>& logits) {
  if (logits.rank() != 2 || logits.dim(1) < 2) {
    throw ShapeError("softmax expects [N,C] with C >= 2, got " + to_string(logits.shape()));
  }
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  Tensor<T> p(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = logits.raw() + i * c;
    const T mx = *std::max_element(row, row + c);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += std::exp(static_cast<double>(row[j] - mx));
    for (std::size_t j = 0; j < c; ++j)
      p[i * c + j] = static_cast<T>(std::exp(static_cast<double>(row[j] - mx)) / total);
  }
  require_finite(p, "softmax");
  return p;
}

// Vector-Jacobian product of softmax: p * (g - <g, p>) per row.
template <class T>
Tensor<T> softmax_backward(const Tensor<T>& grad_probs, const Tensor<T>& probs) {
  require_shape(grad_probs, probs.shape(), "softmax_backward");
  const std::size_t n = probs.dim(0), c = probs.dim(1);
  Tensor<T> g(probs.shape());
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < c; ++j)
      dot += static_cast<double>(grad_probs[i * c + j]) * probs[i * c + j];
    for (std::size_t j = 0; j < c; ++j)
      g[i * c + j] = static_cast<T>(probs[i * c + j] * (grad_probs[i * c + j] - dot));
  }
  return g;
}

// Lowest index wins ties.
template <class T>
std::vector<std::size_t> argmax_rows(const Tensor<T>& m) {
  const std::size_t n = m.dim(0), c = m.dim(1);
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = m.raw() + i * c;
    out[i] = static_cast<std::size_t>(std::max_element(row, row + c) - row);
  }
  return out;
}

} // namespace tumornet
