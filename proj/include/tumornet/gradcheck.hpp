#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tumornet/error.hpp"
#include "tumornet/tensor.hpp"

namespace tumornet {

/// Central differences (f(x+h) - f(x-h)) / 2h for every coordinate of every
/// tensor in `params`. The tensors are perturbed in place and restored.
template <class T>
std::vector<Tensor<T>> finite_difference_gradient(
    const std::function<double(const std::vector<Tensor<T>>&)>& loss_fn,
    std::vector<Tensor<T>> params, double step = 1e-5) {
  std::vector<Tensor<T>> grads;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor<T> g(params[t].shape());
    for (std::size_t k = 0; k < params[t].size(); ++k) {
      const T orig = params[t][k];
      params[t][k] = static_cast<T>(orig + step);
      const double up = loss_fn(params);
      params[t][k] = static_cast<T>(orig - step);
      const double down = loss_fn(params);
      params[t][k] = orig;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("finite difference: non-finite loss at tensor " + std::to_string(t) +
                           " element " + std::to_string(k));
      }
      g[k] = static_cast<T>((up - down) / (2.0 * step));
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

// |a - b| / max(|a|, |b|, floor). Central differences with step 1e-5 on an
// O(1) loss carry roughly 1e-11 of rounding error, so gradients much
// smaller than 1e-6 cannot be resolved to 1e-4 relative accuracy; below
// the floor the comparison becomes an absolute one scaled by 1/floor.
inline constexpr double kRelativeErrorFloor = 1e-6;

inline double relative_error(double a, double b, double floor = kRelativeErrorFloor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

struct GradientComparison {
  double max_relative_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_element = 0;
  std::size_t coordinates = 0;
};

template <class T>
GradientComparison compare_gradients(const std::vector<Tensor<T>>& analytic,
                                     const std::vector<Tensor<T>>& numeric,
                                     double floor = kRelativeErrorFloor) {
  if (analytic.size() != numeric.size()) throw ShapeError("gradient lists differ in length");
  GradientComparison c;
  for (std::size_t t = 0; t < analytic.size(); ++t) {
    require_shape(numeric[t], analytic[t].shape(), "compare_gradients");
    for (std::size_t k = 0; k < analytic[t].size(); ++k) {
      const double e = relative_error(analytic[t][k], numeric[t][k], floor);
      ++c.coordinates;
      if (e > c.max_relative_error) {
        c.max_relative_error = e;
        c.worst_tensor = t;
        c.worst_element = k;
      }
    }
  }
  return c;
}

} // namespace tumornet
