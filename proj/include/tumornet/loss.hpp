#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "tumornet/layers.hpp"
#include "tumornet/tensor.hpp"

namespace tumornet {

// Mean over samples by default; Sum gives the literal double-sum form.
enum class LossReduction { Mean, Sum };

inline constexpr double kLogFloor = 1e-12;

namespace detail {

template <class T>
void check_onehot(const Tensor<T>& onehot, const Shape& expected) {
  if (onehot.shape() != expected) {
    throw ShapeError("one-hot labels " + to_string(onehot.shape()) + " do not match " +
                     to_string(expected));
  }
  const std::size_t n = expected[0], c = expected[1];
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t ones = 0;
    for (std::size_t j = 0; j < c; ++j) {
      const T v = onehot[i * c + j];
      if (v == T{1}) ++ones;
      else if (v != T{0}) throw NumericError("malformed one-hot row " + std::to_string(i));
    }
    if (ones != 1) throw NumericError("malformed one-hot row " + std::to_string(i));
  }
}

} // namespace detail

/// -sum_i sum_c y_ic log(p_ic), divided by N under Mean reduction.
/// Probabilities are clamped to [1e-12, 1] before the log.
template <class T>
double categorical_cross_entropy(const Tensor<T>& probabilities, const Tensor<T>& onehot,
                                 LossReduction reduction = LossReduction::Mean) {
  if (probabilities.rank() != 2) {
    throw ShapeError("probabilities must be [N,C], got " + to_string(probabilities.shape()));
  }
  if (onehot.rank() != 2 || onehot.dim(0) != probabilities.dim(0)) {
    throw ShapeError("row-count mismatch: probabilities " + to_string(probabilities.shape()) +
                     ", labels " + to_string(onehot.shape()));
  }
  detail::check_onehot(onehot, probabilities.shape());
  const std::size_t n = probabilities.dim(0), c = probabilities.dim(1);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      if (onehot[i * c + j] == T{0}) continue;
      const double p = std::clamp(static_cast<double>(probabilities[i * c + j]), kLogFloor, 1.0);
      total -= std::log(p);
    }
  return reduction == LossReduction::Mean ? total / static_cast<double>(n) : total;
}

/// Per-row losses, same clamping as categorical_cross_entropy. Summing these
/// in a fixed sample order makes a dataset loss independent of batching.
template <class T>
std::vector<double> cross_entropy_rows(const Tensor<T>& probabilities, const Tensor<T>& onehot) {
  if (probabilities.rank() != 2 || onehot.shape() != probabilities.shape()) {
    throw ShapeError("cross_entropy_rows: shapes " + to_string(probabilities.shape()) + " and " +
                     to_string(onehot.shape()));
  }
  detail::check_onehot(onehot, probabilities.shape());
  const std::size_t n = probabilities.dim(0), c = probabilities.dim(1);
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      if (onehot[i * c + j] == T{0}) continue;
      out[i] -= std::log(std::clamp(static_cast<double>(probabilities[i * c + j]), kLogFloor, 1.0));
    }
  return out;
}

// Gradient of cross-entropy(softmax(logits)) w.r.t. the logits: (p - y)/N.
template <class T>
Tensor<T> softmax_cross_entropy_gradient(const Tensor<T>& logits, const Tensor<T>& onehot,
                                         LossReduction reduction = LossReduction::Mean) {
  Tensor<T> p = softmax(logits);
  detail::check_onehot(onehot, p.shape());
  const double scale = reduction == LossReduction::Mean ? 1.0 / static_cast<double>(p.dim(0)) : 1.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    p[i] = static_cast<T>((static_cast<double>(p[i]) - onehot[i]) * scale);
  return p;
}

} // namespace tumornet
