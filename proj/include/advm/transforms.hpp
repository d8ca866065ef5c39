#pragma once

// Input-transformation gradient estimators: DIM (random resize + pad),
// TIM (kernel-smoothed gradient), SIM (scale copies) and their composition.
// Each one evaluates a base oracle at linearly transformed inputs and pulls
// the gradient back through the exact transpose of that transform.

#include <cmath>
#include <cstddef>
#include <string>

#include "advm/error.hpp"
#include "advm/oracle.hpp"
#include "advm/rng.hpp"
#include "advm/tensor.hpp"

namespace advm {

struct DimConfig {
  double prob = 0.5;
  std::size_t resize_low = 0;  // 0: input side
  std::size_t pad_to = 0;      // 0: ceil(1.104 * resize_low)
};

struct TimConfig {
  std::size_t kernel_size = 7;
  double sigma = 3.0;
};

struct SimConfig {
  std::size_t copies = 5;
};

struct TransformConfig {
  bool use_dim = false;
  bool use_tim = false;
  bool use_sim = false;
  DimConfig dim;
  TimConfig tim;
  SimConfig sim;

  bool any() const { return use_dim || use_tim || use_sim; }
};

/// Fills in the input-relative DIM defaults and checks the geometry.
inline DimConfig resolve_dim(DimConfig cfg, Shape input) {
  if (cfg.resize_low == 0) cfg.resize_low = std::min(input.height, input.width);
  if (cfg.pad_to == 0) cfg.pad_to = static_cast<std::size_t>(std::ceil(1.104 * static_cast<double>(cfg.resize_low)));
  if (cfg.resize_low == 0 || cfg.resize_low > cfg.pad_to)
    throw Error(Errc::invalid_argument, "DIM needs 1 <= resize_low <= pad_to");
  if (!(cfg.prob >= 0.0 && cfg.prob <= 1.0)) throw Error(Errc::invalid_argument, "DIM probability outside [0,1]");
  return cfg;
}

/// One DIM draw as a linear operator on images of shape `input`:
/// resize to side x side, place at (top, left) on a pad x pad zero canvas,
/// resize back to the input shape.
struct DimOperator {
  Shape input;
  std::size_t side = 0;
  std::size_t pad = 0;
  std::size_t top = 0;
  std::size_t left = 0;

  Tensor apply(const Tensor& x) const {
    const Tensor small = resize_bilinear(x, side, side);
    const Tensor canvas = pad_zero(small, top, left, pad, pad);
    return resize_bilinear(canvas, input.height, input.width);
  }

  Tensor adjoint(const Tensor& u) const {
    const Tensor canvas = resize_bilinear_adjoint(u, pad, pad);
    const Tensor small = pad_zero_adjoint(canvas, top, left, side, side);
    return resize_bilinear_adjoint(small, input.height, input.width);
  }
};

struct DimDraw {
  bool apply = false;
  DimOperator op;
};

/// Consumes the stream identically whether or not the transform fires.
inline DimDraw draw_dim(const DimConfig& resolved, Shape input, Rng& rng) {
  DimDraw d;
  d.apply = rng.bernoulli(resolved.prob);
  const std::size_t span = resolved.pad_to - resolved.resize_low;
  const std::size_t side = resolved.resize_low + (span > 0 ? static_cast<std::size_t>(rng.below(span)) : 0);
  const std::size_t slack = resolved.pad_to - side;
  const auto top = static_cast<std::size_t>(rng.below(slack + 1));
  const auto left = static_cast<std::size_t>(rng.below(slack + 1));
  d.op = DimOperator{input, side, resolved.pad_to, top, left};
  return d;
}

template <GradientOracle O>
LossGrad dim_gradient(O& oracle, const Tensor& x, std::size_t y, const DimConfig& cfg, Rng& rng) {
  const auto d = draw_dim(resolve_dim(cfg, x.shape()), x.shape(), rng);
  if (!d.apply) return oracle.loss_and_grad(x, y);
  LossGrad lg = oracle.loss_and_grad(d.op.apply(x), y);
  return {lg.loss, d.op.adjoint(lg.grad)};
}

/// Normalized Gaussian weights exp(-(i^2 + j^2) / (2 sigma^2)) on a centered grid.
inline Kernel2D tim_kernel(std::size_t size, double sigma) {
  if (size % 2 == 0) throw Error(Errc::invalid_argument, "TIM kernel size must be odd");
  if (!(sigma > 0.0)) throw Error(Errc::invalid_argument, "TIM sigma must be positive");
  Kernel2D k{size, std::vector<double>(size * size)};
  const auto r = static_cast<double>(size / 2);
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t j = 0; j < size; ++j) {
      const double di = static_cast<double>(i) - r;
      const double dj = static_cast<double>(j) - r;
      total += k.weights[i * size + j] = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
    }
  for (auto& w : k.weights) w /= total;
  return k;
}

template <GradientOracle O>
LossGrad tim_gradient(O& oracle, const Tensor& x, std::size_t y, const Kernel2D& kernel) {
  LossGrad lg = oracle.loss_and_grad(x, y);
  return {lg.loss, conv2d_same(lg.grad, kernel)};
}

/// Exact gradient of (1/m) sum_i J(x / 2^i, y).
template <GradientOracle O>
LossGrad sim_gradient(O& oracle, const Tensor& x, std::size_t y, std::size_t copies) {
  if (copies == 0) throw Error(Errc::invalid_argument, "SIM needs at least one copy");
  LossGrad out{0.0, Tensor(x.shape())};
  for (std::size_t i = 0; i < copies; ++i) {
    const double s = std::ldexp(1.0, -static_cast<int>(i));
    const LossGrad lg = oracle.loss_and_grad(scaled(x, s), y);
    out.loss += lg.loss;
    accumulate(out.grad, lg.grad, s);
  }
  const double inv = 1.0 / static_cast<double>(copies);
  out.loss *= inv;
  out.grad = scaled(out.grad, inv);
  return out;
}

/// Any subset of {DIM, TIM, SIM}: scale copies outermost, an independent DIM
/// draw per copy, TIM applied once to the averaged gradient.
template <GradientOracle O>
LossGrad compose_dts(O& oracle, const Tensor& x, std::size_t y, const TransformConfig& cfg, const Kernel2D& kernel,
                     Rng& rng) {
  const std::size_t copies = cfg.use_sim ? cfg.sim.copies : 1;
  if (copies == 0) throw Error(Errc::invalid_argument, "SIM needs at least one copy");
  const DimConfig dim = cfg.use_dim ? resolve_dim(cfg.dim, x.shape()) : DimConfig{};
  LossGrad out{0.0, Tensor(x.shape())};
  for (std::size_t i = 0; i < copies; ++i) {
    const double s = std::ldexp(1.0, -static_cast<int>(i));
    const Tensor xi = scaled(x, s);
    LossGrad lg;
    if (cfg.use_dim) {
      const auto d = draw_dim(dim, x.shape(), rng);
      if (d.apply) {
        lg = oracle.loss_and_grad(d.op.apply(xi), y);
        lg.grad = d.op.adjoint(lg.grad);
      } else {
        lg = oracle.loss_and_grad(xi, y);
      }
    } else {
      lg = oracle.loss_and_grad(xi, y);
    }
    out.loss += lg.loss;
    accumulate(out.grad, lg.grad, s);
  }
  const double inv = 1.0 / static_cast<double>(copies);
  out.loss *= inv;
  out.grad = scaled(out.grad, inv);
  if (cfg.use_tim) out.grad = conv2d_same(out.grad, kernel);
  return out;
}

/// Wraps a base oracle with a transform stack. Owns its random stream, so
/// give each attack instance its own wrapper.
template <GradientOracle Base>
class TransformedOracle {
 public:
  TransformedOracle(Base& base, TransformConfig cfg, Rng rng)
      : base_(base), cfg_(cfg), kernel_(cfg.use_tim ? tim_kernel(cfg.tim.kernel_size, cfg.tim.sigma) : Kernel2D{}),
        rng_(rng) {}

  LossGrad loss_and_grad(const Tensor& x, std::size_t y) {
    if (!cfg_.any()) return base_.loss_and_grad(x, y);
    return compose_dts(base_, x, y, cfg_, kernel_, rng_);
  }

  Shape input_shape() const { return base_.input_shape(); }
  const TransformConfig& config() const { return cfg_; }

 private:
  Base& base_;
  TransformConfig cfg_;
  Kernel2D kernel_;
  Rng rng_;
};

}  // namespace advm
