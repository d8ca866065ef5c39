#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <vector>

#include "advm/tensor.hpp"

namespace advm {

struct LossGrad {
  double loss = 0.0;
  Tensor grad;
};

/// Anything that yields a loss J(x, y) and its exact input gradient. The
/// attack engine and the gradient transforms are generic over this.
template <typename O>
concept GradientOracle = requires(O& o, const Tensor& x, std::size_t y) {
  { o.loss_and_grad(x, y) } -> std::convertible_to<LossGrad>;
  { o.input_shape() } -> std::convertible_to<Shape>;
};

/// An oracle that also exposes class predictions.
template <typename O>
concept Classifier = GradientOracle<O> && requires(const O& o, const Tensor& x) {
  { o.predict(x) } -> std::convertible_to<std::size_t>;
  { o.num_classes() } -> std::convertible_to<std::size_t>;
};

/// Index of the largest entry; ties go to the lowest index.
inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

struct CrossEntropy {
  double loss = 0.0;
  std::vector<double> dlogits;  // softmax - onehot(y)
};

inline CrossEntropy softmax_cross_entropy(std::span<const double> logits, std::size_t label) {
  const double top = *std::max_element(logits.begin(), logits.end());
  // The true-class term is kept apart so confident predictions keep a non-zero
  // gradient instead of rounding p_y - 1 to zero.
  double others = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k)
    if (k != label) others += std::exp(logits[k] - top);
  const double self = std::exp(logits[label] - top);
  const double sum = self + others;
  CrossEntropy ce;
  ce.loss = (top - logits[label]) + (self == 1.0 ? std::log1p(others) : std::log(sum));
  ce.dlogits.resize(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k)
    ce.dlogits[k] = k == label ? -others / sum : std::exp(logits[k] - top) / sum;
  return ce;
}

}  // namespace advm
