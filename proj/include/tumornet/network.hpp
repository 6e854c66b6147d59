#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tumornet/layers.hpp"
#include "tumornet/model_spec.hpp"
#include "tumornet/rng.hpp"

namespace tumornet {

/// Name and shape of one stored tensor. Trainable tensors come first in
/// layer order; batchnorm running statistics are buffers.
struct ParamSpec {
  std::string name;
  Shape shape;
  bool buffer = false;
};

// Where a layer's tensors live inside ParameterSet::params / ::buffers.
struct LayerSlots {
  std::size_t param = 0;
  std::size_t param_count = 0;
  std::size_t buffer = 0;
  std::size_t buffer_count = 0;
};

struct ParameterLayout {
  std::vector<ParamSpec> specs;  // params then buffers, each in layer order
  std::vector<LayerSlots> slots;
  std::size_t param_count = 0;
  std::size_t buffer_count = 0;
};

// Per conv_block: kernel, then gamma/beta with batchnorm or bias without.
// Per dense: weights, bias.
inline ParameterLayout parameter_layout(const ModelSpec& model) {
  const auto shapes = layer_output_shapes(model);
  ParameterLayout lay;
  std::vector<ParamSpec> params, buffers;
  Shape in = model.input_shape;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& l = model.layers[i];
    const std::string p = "layer" + std::to_string(i) + ".";
    LayerSlots s{params.size(), 0, buffers.size(), 0};
    if (l.kind == LayerKind::ConvBlock) {
      params.push_back({p + "kernel", {l.conv.kernel_height, l.conv.kernel_width, in[2], l.filters}});
      if (l.batchnorm) {
        params.push_back({p + "gamma", {l.filters}});
        params.push_back({p + "beta", {l.filters}});
        buffers.push_back({p + "running_mean", {l.filters}, true});
        buffers.push_back({p + "running_var", {l.filters}, true});
      } else {
        params.push_back({p + "bias", {l.filters}});
      }
    } else if (l.kind == LayerKind::Dense) {
      params.push_back({p + "weights", {in[0], l.units}});
      params.push_back({p + "bias", {l.units}});
    }
    s.param_count = params.size() - s.param;
    s.buffer_count = buffers.size() - s.buffer;
    lay.slots.push_back(s);
    in = shapes[i];
  }
  lay.param_count = params.size();
  lay.buffer_count = buffers.size();
  lay.specs = std::move(params);
  lay.specs.insert(lay.specs.end(), buffers.begin(), buffers.end());
  return lay;
}

template <class T>
struct ParameterSet {
  std::vector<Tensor<T>> params;   // trainable, order of parameter_layout
  std::vector<Tensor<T>> buffers;  // batchnorm running mean / variance

  template <class U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& t : params) out.params.push_back(t.template cast<U>());
    for (const auto& t : buffers) out.buffers.push_back(t.template cast<U>());
    return out;
  }

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;
};

// One gradient tensor per trainable parameter, aligned with ParameterSet::params.
template <class T>
using Gradients = std::vector<Tensor<T>>;

inline void check_parameters_match(const ParameterLayout& lay, std::size_t params,
                                   std::size_t buffers) {
  if (params != lay.param_count || buffers != lay.buffer_count) {
    throw ShapeError("parameter set has " + std::to_string(params) + "+" + std::to_string(buffers) +
                     " tensors, model expects " + std::to_string(lay.param_count) + "+" +
                     std::to_string(lay.buffer_count));
  }
}

/// He-style uniform initialization: weights ~ U(-l, l) with l = sqrt(6/fan_in),
/// i.e. variance 2/fan_in. Biases and beta start at zero, gamma and running
/// variance at one, running mean at zero.
template <class T>
ParameterSet<T> init_parameters(const ModelSpec& model, Rng& rng) {
  const auto lay = parameter_layout(model);
  ParameterSet<T> ps;
  for (std::size_t i = 0; i < lay.specs.size(); ++i) {
    const auto& spec = lay.specs[i];
    const bool ones = spec.name.ends_with("gamma") || spec.name.ends_with("running_var");
    Tensor<T> t(spec.shape, ones ? T{1} : T{0});
    if (spec.name.ends_with("kernel") || spec.name.ends_with("weights")) {
      const std::size_t fan_in = shape_size(spec.shape) / spec.shape.back();
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-limit, limit));
    }
    (spec.buffer ? ps.buffers : ps.params).push_back(std::move(t));
  }
  return ps;
}

// ------------------------------------------------------------------ forward

template <class T>
struct LayerCache {
  Tensor<T> input;
  Tensor<T> pre_activation;  // argument of the leaky relu
  BatchNormCache<T> bn;
  PoolIndex pool;
  Tensor<T> mask;
};

template <class T>
struct ForwardCache {
  Mode mode = Mode::Infer;
  Shape batch_shape;
  std::vector<LayerCache<T>> layers;
};

template <class T>
struct ForwardResult {
  Tensor<T> probabilities;
  Tensor<T> logits;
  ForwardCache<T> cache;
};

/// Runs the whole stack. Parameters are read-only here; batchnorm statistics
/// of a train-mode pass are left in the cache for commit_running_stats.
/// Dropout masks are drawn from `rng` in layer order.
template <class T>
ForwardResult<T> forward_pass(const ModelSpec& model, const ParameterSet<T>& ps,
                              const Tensor<T>& batch, Mode mode, Rng& rng) {
  const auto lay = parameter_layout(model);
  check_parameters_match(lay, ps.params.size(), ps.buffers.size());
  if (batch.rank() != 4 || Shape(batch.shape().begin() + 1, batch.shape().end()) != model.input_shape) {
    throw ShapeError("batch shape " + to_string(batch.shape()) + " does not match model input [N," +
                     to_string(model.input_shape).substr(1));
  }
  const std::size_t n = batch.dim(0);

  ForwardResult<T> r;
  r.cache.mode = mode;
  r.cache.batch_shape = batch.shape();
  r.cache.layers.resize(model.layers.size());

  Tensor<T> x = batch;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& l = model.layers[i];
    const auto& s = lay.slots[i];
    auto& c = r.cache.layers[i];
    try {
      switch (l.kind) {
        case LayerKind::ConvBlock: {
          const auto& kernel = ps.params[s.param];
          Tensor<T> z;
          if (l.batchnorm) {
            Tensor<T> zero_bias(Shape{l.filters});
            Tensor<T> conv = conv2d_forward(x, kernel, zero_bias, l.conv);
            const auto& gamma = ps.params[s.param + 1];
            const auto& beta = ps.params[s.param + 2];
            if (mode == Mode::Train) {
              auto bn = batchnorm_forward_train(conv, gamma, beta, l.bn_epsilon);
              z = std::move(bn.output);
              c.bn = std::move(bn.cache);
            } else {
              BatchNormState<T> st{ps.buffers[s.buffer], ps.buffers[s.buffer + 1]};
              z = batchnorm_forward_infer(conv, gamma, beta, st, l.bn_epsilon);
            }
          } else {
            z = conv2d_forward(x, kernel, ps.params[s.param + 1], l.conv);
          }
          Tensor<T> y = leaky_relu_forward(z, l.leaky_slope);
          c.input = std::move(x);
          c.pre_activation = std::move(z);
          x = std::move(y);
          break;
        }
        case LayerKind::MaxPool: {
          auto pr = maxpool2d_forward(x, l.pool, l.pool_stride);
          c.pool = std::move(pr.index);
          x = std::move(pr.output);
          break;
        }
        case LayerKind::Flatten:
          x = std::move(x).reshaped({n, x.size() / n});
          break;
        case LayerKind::Dense: {
          Tensor<T> z = dense_forward(x, ps.params[s.param], ps.params[s.param + 1]);
          c.input = std::move(x);
          if (l.activation == Activation::LeakyRelu) {
            x = leaky_relu_forward(z, l.leaky_slope);
            c.pre_activation = std::move(z);
          } else {
            x = std::move(z);
          }
          break;
        }
        case LayerKind::Dropout: {
          auto d = dropout_apply(x, l.dropout_rate, mode, rng);
          c.mask = std::move(d.mask);
          x = std::move(d.output);
          break;
        }
        case LayerKind::Softmax:
          r.logits = x;
          x = softmax(x);
          break;
      }
    } catch (const ShapeError& e) {
      throw ShapeError("layer " + std::to_string(i) + " (" + kind_name(l.kind) + "): " + e.what());
    }
  }
  r.probabilities = std::move(x);
  return r;
}

/// Folds the batch statistics of a train-mode pass into the running buffers.
template <class T>
void commit_running_stats(const ModelSpec& model, ParameterSet<T>& ps, const ForwardCache<T>& cache) {
  if (cache.mode != Mode::Train) return;
  const auto lay = parameter_layout(model);
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& l = model.layers[i];
    if (l.kind != LayerKind::ConvBlock || !l.batchnorm) continue;
    const auto& s = lay.slots[i];
    BatchNormState<T> st{ps.buffers[s.buffer], ps.buffers[s.buffer + 1]};
    batchnorm_update_running(st, cache.layers[i].bn, l.bn_momentum);
    ps.buffers[s.buffer] = std::move(st.running_mean);
    ps.buffers[s.buffer + 1] = std::move(st.running_var);
  }
}

// ----------------------------------------------------------------- backward

/// Backward pass starting from the gradient with respect to the logits
/// (the softmax input). Needs a train-mode cache.
template <class T>
Gradients<T> backward_from_logits(const ModelSpec& model, const ParameterSet<T>& ps,
                                  const ForwardCache<T>& cache, const Tensor<T>& grad_logits) {
  const auto lay = parameter_layout(model);
  check_parameters_match(lay, ps.params.size(), ps.buffers.size());
  if (cache.mode != Mode::Train || cache.layers.size() != model.layers.size()) {
    throw ShapeError("backward pass needs the train-mode cache of the same model");
  }
  const std::size_t n = cache.batch_shape.at(0);
  require_shape(grad_logits, Shape{n, model.class_count}, "backward grad_logits");

  Gradients<T> grads;
  grads.reserve(ps.params.size());
  for (const auto& p : ps.params) grads.emplace_back(p.shape());

  const auto shapes = layer_output_shapes(model);
  Tensor<T> g = grad_logits;
  // Softmax is the last layer; start just below it.
  for (std::size_t ri = model.layers.size() - 1; ri-- > 0;) {
    const auto& l = model.layers[ri];
    const auto& s = lay.slots[ri];
    const auto& c = cache.layers[ri];
    switch (l.kind) {
      case LayerKind::ConvBlock: {
        Tensor<T> gz = leaky_relu_backward(g, c.pre_activation, l.leaky_slope);
        if (l.batchnorm) {
          auto bg = batchnorm_backward(gz, c.bn, ps.params[s.param + 1]);
          grads[s.param + 1] = std::move(bg.gamma);
          grads[s.param + 2] = std::move(bg.beta);
          gz = std::move(bg.input);
        }
        auto cg = conv2d_backward(gz, c.input, ps.params[s.param], l.conv);
        grads[s.param] = std::move(cg.kernels);
        if (!l.batchnorm) grads[s.param + 1] = std::move(cg.bias);
        g = std::move(cg.input);
        break;
      }
      case LayerKind::MaxPool: {
        Shape in_shape = ri == 0 ? model.input_shape : shapes[ri - 1];
        in_shape.insert(in_shape.begin(), n);
        g = maxpool2d_backward(g, c.pool, in_shape);
        break;
      }
      case LayerKind::Flatten: {
        Shape in_shape = ri == 0 ? model.input_shape : shapes[ri - 1];
        in_shape.insert(in_shape.begin(), n);
        g = std::move(g).reshaped(in_shape);
        break;
      }
      case LayerKind::Dense: {
        if (l.activation == Activation::LeakyRelu)
          g = leaky_relu_backward(g, c.pre_activation, l.leaky_slope);
        auto dg = dense_backward(g, c.input, ps.params[s.param]);
        grads[s.param] = std::move(dg.weights);
        grads[s.param + 1] = std::move(dg.bias);
        g = std::move(dg.input);
        break;
      }
      case LayerKind::Dropout:
        g = dropout_backward(g, c.mask);
        break;
      case LayerKind::Softmax:
        break;
    }
  }
  return grads;
}

/// Backward pass from the gradient with respect to the output probabilities.
template <class T>
Gradients<T> backward_pass(const ModelSpec& model, const ParameterSet<T>& ps,
                           const ForwardResult<T>& fwd, const Tensor<T>& grad_probabilities) {
  return backward_from_logits(model, ps, fwd.cache,
                              softmax_backward(grad_probabilities, fwd.probabilities));
}

} // namespace tumornet
