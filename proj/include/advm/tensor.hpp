#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "advm/error.hpp"

namespace advm {

struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t size() const { return height * width * channels; }
  bool operator==(const Shape&) const = default;

  std::string str() const {
    return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels);
  }
};

/// Dense height x width x channels array of doubles, row-major with channels
/// innermost. Images live in [0,1]; gradients and momenta are unbounded.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0) : shape_(shape), data_(shape.size(), fill) {}
  Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size())
      throw Error(Errc::shape_mismatch, "data length " + std::to_string(data_.size()) +
                                            " does not match shape " + shape_.str());
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t y, std::size_t x, std::size_t c) {
    return data_[(y * shape_.width + x) * shape_.channels + c];
  }
  const double& at(std::size_t y, std::size_t x, std::size_t c) const {
    return data_[(y * shape_.width + x) * shape_.channels + c];
  }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_{};
  std::vector<double> data_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape())
    throw Error(Errc::shape_mismatch,
                std::string(what) + ": " + a.shape().str() + " vs " + b.shape().str());
}

// ---------------------------------------------------------------------------
// Elementwise helpers

inline double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

inline Tensor sign(const Tensor& t) {
  Tensor out(t.shape());
  std::transform(t.begin(), t.end(), out.begin(), sign_of);
  return out;
}

/// a + s * b
inline Tensor add_scaled(const Tensor& a, double s, const Tensor& b) {
  require_same_shape(a, b, "add_scaled");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + s * b[i];
  return out;
}

inline void accumulate(Tensor& acc, const Tensor& b, double s = 1.0) {
  require_same_shape(acc, b, "accumulate");
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += s * b[i];
}

inline Tensor scaled(const Tensor& a, double s) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
  return out;
}

inline double dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double l1_norm(const Tensor& t) {
  double s = 0.0;
  for (double v : t) s += std::abs(v);
  return s;
}

inline double linf_norm(const Tensor& t) {
  double m = 0.0;
  for (double v : t) m = std::max(m, std::abs(v));
  return m;
}

inline double linf_distance(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "linf_distance");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Below this L1 mass a gradient is treated as identically zero.
inline constexpr double kZeroGradientL1 = 1e-300;

inline Tensor l1_normalize(const Tensor& t) {
  const double n = l1_norm(t);
  if (!(n > kZeroGradientL1)) throw Error(Errc::zero_gradient, "L1 norm is " + std::to_string(n));
  return scaled(t, 1.0 / n);
}

inline bool in_unit_range(const Tensor& t) {
  return std::all_of(t.begin(), t.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

inline Tensor clamp01(const Tensor& t) {
  Tensor out(t.shape());
  std::transform(t.begin(), t.end(), out.begin(), [](double v) { return std::clamp(v, 0.0, 1.0); });
  return out;
}

/// Projection onto B_eps(origin) in L-infinity, intersected with [0,1].
inline Tensor project_linf(const Tensor& x, const Tensor& origin, double eps) {
  require_same_shape(x, origin, "project_linf");
  if (!(eps >= 0.0)) throw Error(Errc::invalid_argument, "eps must be non-negative");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = std::min(std::max(x[i], origin[i] - eps), origin[i] + eps);
    out[i] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear image operators

struct Kernel2D {
  std::size_t size = 1;
  std::vector<double> weights{1.0};

  double at(std::size_t i, std::size_t j) const { return weights[i * size + j]; }

  static Kernel2D identity(std::size_t size) {
    if (size % 2 == 0) throw Error(Errc::invalid_argument, "kernel size must be odd");
    Kernel2D k{size, std::vector<double>(size * size, 0.0)};
    k.weights[(size / 2) * size + size / 2] = 1.0;
    return k;
  }
};

/// Per-channel 2-D correlation with zero padding of (k-1)/2; output keeps the input shape.
inline Tensor conv2d_same(const Tensor& img, const Kernel2D& k) {
  if (k.size % 2 == 0 || k.weights.size() != k.size * k.size)
    throw Error(Errc::invalid_argument, "kernel must be odd-sized and square");
  const auto [h, w, c] = img.shape();
  const auto r = static_cast<std::ptrdiff_t>(k.size / 2);
  Tensor out(img.shape());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t i = 0; i < k.size; ++i) {
        const auto sy = static_cast<std::ptrdiff_t>(y) + static_cast<std::ptrdiff_t>(i) - r;
        if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t j = 0; j < k.size; ++j) {
          const auto sx = static_cast<std::ptrdiff_t>(x) + static_cast<std::ptrdiff_t>(j) - r;
          if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
          const double kw = k.at(i, j);
          for (std::size_t ch = 0; ch < c; ++ch)
            out.at(y, x, ch) += kw * img.at(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx), ch);
        }
      }
    }
  }
  return out;
}

namespace detail {

struct Tap {
  std::size_t lo;
  std::size_t hi;
  double frac;  // weight of hi
};

// Align-corners sampling: output i reads source i * (in - 1) / (out - 1).
inline std::vector<Tap> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  for (std::size_t i = 0; i < out; ++i) {
    if (in == 1 || out == 1) {
      taps[i] = {0, 0, 0.0};
      continue;
    }
    const double src = static_cast<double>(i) * static_cast<double>(in - 1) / static_cast<double>(out - 1);
    auto lo = static_cast<std::size_t>(std::floor(src));
    if (lo >= in - 1) lo = in - 1;
    const std::size_t hi = std::min(lo + 1, in - 1);
    taps[i] = {lo, hi, src - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace detail

inline Tensor resize_bilinear(const Tensor& img, std::size_t new_h, std::size_t new_w) {
  if (new_h == 0 || new_w == 0) throw Error(Errc::invalid_argument, "resize target must be at least 1x1");
  const auto [h, w, c] = img.shape();
  const auto ty = detail::bilinear_taps(h, new_h);
  const auto tx = detail::bilinear_taps(w, new_w);
  Tensor out(Shape{new_h, new_w, c});
  for (std::size_t y = 0; y < new_h; ++y) {
    const auto& a = ty[y];
    for (std::size_t x = 0; x < new_w; ++x) {
      const auto& b = tx[x];
      for (std::size_t ch = 0; ch < c; ++ch) {
        out.at(y, x, ch) = (1 - a.frac) * (1 - b.frac) * img.at(a.lo, b.lo, ch) +
                           (1 - a.frac) * b.frac * img.at(a.lo, b.hi, ch) +
                           a.frac * (1 - b.frac) * img.at(a.hi, b.lo, ch) +
                           a.frac * b.frac * img.at(a.hi, b.hi, ch);
      }
    }
  }
  return out;
}

/// Transpose of resize_bilinear(., grad.height, grad.width) applied to an old_h x old_w image.
inline Tensor resize_bilinear_adjoint(const Tensor& grad, std::size_t old_h, std::size_t old_w) {
  if (old_h == 0 || old_w == 0) throw Error(Errc::invalid_argument, "resize source must be at least 1x1");
  const auto [nh, nw, c] = grad.shape();
  const auto ty = detail::bilinear_taps(old_h, nh);
  const auto tx = detail::bilinear_taps(old_w, nw);
  Tensor out(Shape{old_h, old_w, c});
  for (std::size_t y = 0; y < nh; ++y) {
    const auto& a = ty[y];
    for (std::size_t x = 0; x < nw; ++x) {
      const auto& b = tx[x];
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double g = grad.at(y, x, ch);
        out.at(a.lo, b.lo, ch) += (1 - a.frac) * (1 - b.frac) * g;
        out.at(a.lo, b.hi, ch) += (1 - a.frac) * b.frac * g;
        out.at(a.hi, b.lo, ch) += a.frac * (1 - b.frac) * g;
        out.at(a.hi, b.hi, ch) += a.frac * b.frac * g;
      }
    }
  }
  return out;
}

inline Tensor pad_zero(const Tensor& img, std::size_t top, std::size_t left, std::size_t out_h,
                       std::size_t out_w) {
  const auto [h, w, c] = img.shape();
  if (top + h > out_h || left + w > out_w)
    throw Error(Errc::placement_out_of_bounds, img.shape().str() + " at (" + std::to_string(top) + "," +
                                                   std::to_string(left) + ") exceeds " +
                                                   std::to_string(out_h) + "x" + std::to_string(out_w));
  Tensor out(Shape{out_h, out_w, c});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) out.at(top + y, left + x, ch) = img.at(y, x, ch);
  return out;
}

/// Crop: the transpose of pad_zero.
inline Tensor pad_zero_adjoint(const Tensor& grad, std::size_t top, std::size_t left, std::size_t in_h,
                               std::size_t in_w) {
  const auto [h, w, c] = grad.shape();
  if (top + in_h > h || left + in_w > w)
    throw Error(Errc::placement_out_of_bounds, "crop window exceeds " + grad.shape().str());
  Tensor out(Shape{in_h, in_w, c});
  for (std::size_t y = 0; y < in_h; ++y)
    for (std::size_t x = 0; x < in_w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) out.at(y, x, ch) = grad.at(top + y, left + x, ch);
  return out;
}

}  // namespace advm
