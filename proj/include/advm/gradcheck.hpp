#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>

#include "advm/model.hpp"
#include "advm/oracle.hpp"
#include "advm/rng.hpp"
#include "advm/tensor.hpp"

namespace advm {

struct GradCheckOptions {
  double h = 1e-5;
  std::size_t coordinates = 64;  // sampled; all of them if the input is smaller
  /// Denominator floor of the relative error, so components that are zero up
  /// to roundoff are judged by absolute error instead.
  double floor = 1e-4;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates whose stencil crossed a ReLU kink
};

inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares `analytic` against central differences of `loss` at x.
/// `piece(x)` identifies the smooth piece containing x; stencils that leave
/// the piece of x are skipped because the difference quotient is meaningless
/// across a kink. Pass an empty function for smooth objectives.
inline GradCheckReport grad_check(const std::function<double(const Tensor&)>& loss, const Tensor& x,
                                  const Tensor& analytic, const GradCheckOptions& opt,
                                  const std::function<std::uint64_t(const Tensor&)>& piece = {}) {
  require_same_shape(x, analytic, "grad_check");
  GradCheckReport rep;
  Rng rng = Rng(opt.seed).fork(0x67636B);
  const bool exhaustive = x.size() <= opt.coordinates;
  const std::uint64_t home = piece ? piece(x) : 0;
  const std::size_t budget = exhaustive ? x.size() : 8 * opt.coordinates;
  for (std::size_t attempt = 0; attempt < budget && rep.checked < opt.coordinates; ++attempt) {
    const std::size_t i = exhaustive ? attempt : static_cast<std::size_t>(rng.below(x.size()));
    Tensor xp = x, xm = x;
    xp[i] += opt.h;
    xm[i] -= opt.h;
    if (piece && (piece(xp) != home || piece(xm) != home)) {
      ++rep.skipped;
      continue;
    }
    const double numeric = (loss(xp) - loss(xm)) / (2.0 * opt.h);
    rep.max_relative_error = std::max(rep.max_relative_error, relative_error(analytic[i], numeric, opt.floor));
    ++rep.checked;
  }
  return rep;
}

inline GradCheckReport grad_check(const Model& model, const Tensor& x, std::size_t y, double h,
                                  std::size_t coordinates = 64, std::uint64_t seed = 0) {
  const auto lg = model.loss_and_grad(x, y);
  GradCheckOptions opt;
  opt.h = h;
  opt.coordinates = coordinates;
  opt.seed = seed;
  return grad_check([&](const Tensor& p) { return model.loss_and_grad(p, y).loss; }, x, lg.grad, opt,
                    [&](const Tensor& p) { return model.activation_signature(p); });
}

}  // namespace advm
