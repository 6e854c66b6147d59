#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "tumornet/error.hpp"
#include "tumornet/tensor.hpp"

namespace tumornet {

enum class AdamaxVariant {
  // t += 1; m = b1 m + (1-b1) g; u = max(b2 u, |g|); theta -= a (m / (1-b1^t)) / (u + eps)
  Standard,
  // No bias correction and no decay of the norm: u = max_i |g_i| over the
  // tensor at the current step; theta -= a m / (u + eps).
  Literal,
};

struct AdamaxHyper {
  double alpha = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  AdamaxVariant variant = AdamaxVariant::Standard;

  void validate() const {
    if (!(alpha > 0)) throw ConfigError("adamax alpha must be > 0", "optimizer.alpha");
    if (!(beta1 >= 0 && beta1 < 1)) throw ConfigError("adamax beta1 must lie in [0,1)", "optimizer.beta1");
    if (!(beta2 >= 0 && beta2 < 1)) throw ConfigError("adamax beta2 must lie in [0,1)", "optimizer.beta2");
    if (!(epsilon > 0)) throw ConfigError("adamax epsilon must be > 0", "optimizer.epsilon");
  }
};

template <class T>
struct AdamaxState {
  std::vector<Tensor<T>> m;  // first moment
  std::vector<Tensor<T>> u;  // infinity-norm accumulator
  std::uint64_t t = 0;

  static AdamaxState zeros_like(const std::vector<Tensor<T>>& params) {
    AdamaxState s;
    for (const auto& p : params) {
      s.m.emplace_back(p.shape());
      s.u.emplace_back(p.shape());
    }
    return s;
  }
};

/// One in-place optimizer step over aligned parameter / gradient lists.
/// Rejects non-finite gradients before touching anything.
template <class T>
void adamax_step(std::vector<Tensor<T>>& params, const std::vector<Tensor<T>>& grads,
                 AdamaxState<T>& state, const AdamaxHyper& hyper) {
  if (state.m.empty() && state.t == 0 && !params.empty()) state = AdamaxState<T>::zeros_like(params);
  if (params.size() != grads.size() || params.size() != state.m.size() ||
      params.size() != state.u.size()) {
    throw ShapeError("adamax: " + std::to_string(params.size()) + " parameters, " +
                     std::to_string(grads.size()) + " gradients, " + std::to_string(state.m.size()) +
                     " state slots");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].shape() || state.m[i].shape() != params[i].shape() ||
        state.u[i].shape() != params[i].shape()) {
      throw ShapeError("adamax: shape mismatch at parameter " + std::to_string(i) + ": " +
                       to_string(params[i].shape()) + " vs gradient " +
                       to_string(grads[i].shape()));
    }
    for (std::size_t k = 0; k < grads[i].size(); ++k) {
      if (!std::isfinite(grads[i][k])) {
        throw NumericError("adamax: non-finite gradient at parameter " + std::to_string(i) +
                           " element " + std::to_string(k));
      }
    }
  }

  state.t += 1;
  const double b1 = hyper.beta1, b2 = hyper.beta2, a = hyper.alpha, eps = hyper.epsilon;
  const double correction =
      hyper.variant == AdamaxVariant::Standard ? 1.0 - std::pow(b1, static_cast<double>(state.t)) : 1.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    const auto& g = grads[i];
    auto& m = state.m[i];
    auto& u = state.u[i];
    if (hyper.variant == AdamaxVariant::Standard) {
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double gk = g[k];
        const double mk = b1 * m[k] + (1.0 - b1) * gk;
        const double uk = std::max(b2 * u[k], std::abs(gk));
        m[k] = static_cast<T>(mk);
        u[k] = static_cast<T>(uk);
        p[k] = static_cast<T>(p[k] - a * (mk / correction) / (uk + eps));
      }
    } else {
      double norm = 0.0;
      for (std::size_t k = 0; k < g.size(); ++k) norm = std::max(norm, std::abs(static_cast<double>(g[k])));
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double mk = b1 * m[k] + (1.0 - b1) * g[k];
        m[k] = static_cast<T>(mk);
        u[k] = static_cast<T>(norm);
        p[k] = static_cast<T>(p[k] - a * mk / (norm + eps));
      }
    }
  }
}

} // namespace tumornet
