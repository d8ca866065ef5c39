#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "advm/oracle.hpp"
#include "advm/rng.hpp"
#include "advm/tensor.hpp"

namespace advm::test {

/// J(x) = <w, x>, independent of the label.
struct LinearOracle {
  Tensor w;

  LossGrad loss_and_grad(const Tensor& x, std::size_t) const { return {dot(w, x), w}; }
  Shape input_shape() const { return w.shape(); }
};

/// J(x, y) = sum_i [sin(a_i x_i + b_i + y) + c_i x_i^2 / 2] + k (sum_i x_i)^2 / 2.
/// Smooth, non-separable through the k term, and cheap enough for
/// straight-line reference recursions.
struct SmoothOracle {
  std::vector<double> a, b, c;
  double k = 0.1;
  Shape shape;

  LossGrad loss_and_grad(const Tensor& x, std::size_t y) const {
    double total = 0.0;
    for (double v : x) total += v;
    LossGrad lg{0.5 * k * total * total, Tensor(x.shape())};
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double arg = a[i] * x[i] + b[i] + static_cast<double>(y);
      lg.loss += std::sin(arg) + 0.5 * c[i] * x[i] * x[i];
      lg.grad[i] = a[i] * std::cos(arg) + c[i] * x[i] + k * total;
    }
    return lg;
  }
  Shape input_shape() const { return shape; }
};

inline SmoothOracle make_smooth_oracle(Rng& rng, Shape shape) {
  SmoothOracle o;
  o.shape = shape;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    o.a.push_back(rng.uniform(1.0, 6.0));
    o.b.push_back(rng.uniform(-3.0, 3.0));
    o.c.push_back(rng.uniform(-1.0, 1.0));
  }
  return o;
}

/// Returns a fixed gradient regardless of x.
struct ConstantGradOracle {
  Tensor g;

  LossGrad loss_and_grad(const Tensor&, std::size_t) const { return {0.0, g}; }
  Shape input_shape() const { return g.shape(); }
};

/// Oracle from a function returning (loss, grad).
struct FnOracle {
  std::function<LossGrad(const Tensor&, std::size_t)> fn;
  Shape shape;

  LossGrad loss_and_grad(const Tensor& x, std::size_t y) const { return fn(x, y); }
  Shape input_shape() const { return shape; }
};

/// J(x) = -sum_i (x_i - b_i)^2, maximized at b.
inline FnOracle concave_oracle(Tensor b) {
  const Shape s = b.shape();
  return {[b](const Tensor& x, std::size_t) {
            LossGrad lg{0.0, Tensor(x.shape())};
            for (std::size_t i = 0; i < x.size(); ++i) {
              lg.loss -= (x[i] - b[i]) * (x[i] - b[i]);
              lg.grad[i] = -2.0 * (x[i] - b[i]);
            }
            return lg;
          },
          s};
}

/// Records every evaluation point of a wrapped oracle.
template <typename O>
struct RecordingOracle {
  O& base;
  std::vector<Tensor> points;

  LossGrad loss_and_grad(const Tensor& x, std::size_t y) {
    points.push_back(x);
    return base.loss_and_grad(x, y);
  }
  Shape input_shape() const { return base.input_shape(); }
};

}  // namespace advm::test
