#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "advm/error.hpp"
#include "advm/rng.hpp"
#include "advm/tensor.hpp"
#include "advm/tensor_io.hpp"

namespace advm {

struct LabeledDataset {
  std::vector<Tensor> images;
  std::vector<std::size_t> labels;
  std::size_t class_count = 0;

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
  Shape image_shape() const { return images.empty() ? Shape{} : images.front().shape(); }

  /// Throws unless images/labels agree in length, labels are in range, and
  /// every image shares a shape and lies in [0,1].
  void validate() const {
    if (images.size() != labels.size())
      throw Error(Errc::length_mismatch, std::to_string(images.size()) + " images vs " +
                                             std::to_string(labels.size()) + " labels");
    for (std::size_t i = 0; i < images.size(); ++i) {
      if (labels[i] >= class_count) throw Error(Errc::label_out_of_range, "label " + std::to_string(labels[i]));
      if (images[i].shape() != images.front().shape()) throw Error(Errc::shape_mismatch, "ragged dataset");
      if (!in_unit_range(images[i])) throw Error(Errc::invalid_argument, "pixel outside [0,1]");
    }
  }
};

inline LabeledDataset slice(const LabeledDataset& d, std::size_t begin, std::size_t end) {
  end = std::min(end, d.size());
  begin = std::min(begin, end);
  LabeledDataset out;
  out.class_count = d.class_count;
  out.images.assign(d.images.begin() + static_cast<std::ptrdiff_t>(begin), d.images.begin() + static_cast<std::ptrdiff_t>(end));
  out.labels.assign(d.labels.begin() + static_cast<std::ptrdiff_t>(begin), d.labels.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

struct SyntheticOptions {
  std::size_t classes = 10;
  std::size_t per_class = 100;
  Shape shape{28, 28, 1};
  double noise_sigma = 0.1;
  double contrast = 1.0;  // scales every bump amplitude
  double jitter = 0.0;    // max per-example template shift, in pixels
  double amp_spread = 0.0;  // per-example amplitude factor drawn from [1 - s, 1 + s]
  std::uint64_t seed = 0;
};

/// Per-class templates made of a few Gaussian bumps per channel on a grey
/// field. Each example renders its class template with an optional random
/// shift and amplitude factor, then adds i.i.d. Gaussian pixel noise and
/// clamps to [0,1]. Examples cycle through the classes, so any prefix is
/// roughly balanced.
inline LabeledDataset generate_synthetic(const SyntheticOptions& o) {
  if (o.classes < 2) throw Error(Errc::invalid_argument, "need at least two classes");
  const auto [h, w, c] = o.shape;
  if (o.shape.size() == 0) throw Error(Errc::invalid_argument, "empty image shape");
  Rng tmpl_rng = Rng(o.seed).fork(1);
  Rng noise_rng = Rng(o.seed).fork(2);
  const double side = static_cast<double>(std::min(h, w));

  struct Bump {
    std::size_t channel;
    double cy, cx, width, amp;
  };
  std::vector<std::vector<Bump>> templates(o.classes);
  for (auto& bumps : templates)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (int b = 0; b < 4; ++b) {
        Bump bump{ch, 0, 0, 0, 0};
        bump.cy = tmpl_rng.uniform(0.15, 0.85) * static_cast<double>(h);
        bump.cx = tmpl_rng.uniform(0.15, 0.85) * static_cast<double>(w);
        bump.width = tmpl_rng.uniform(0.10, 0.22) * side;
        bump.amp = (tmpl_rng.bernoulli(0.5) ? 1.0 : -1.0) * tmpl_rng.uniform(0.2, 0.4) * o.contrast;
        bumps.push_back(bump);
      }

  LabeledDataset d;
  d.class_count = o.classes;
  d.images.reserve(o.classes * o.per_class);
  for (std::size_t i = 0; i < o.classes * o.per_class; ++i) {
    const std::size_t k = i % o.classes;
    const double sy = o.jitter > 0.0 ? noise_rng.uniform(-o.jitter, o.jitter) : 0.0;
    const double sx = o.jitter > 0.0 ? noise_rng.uniform(-o.jitter, o.jitter) : 0.0;
    const double scale = o.amp_spread > 0.0 ? noise_rng.uniform(1.0 - o.amp_spread, 1.0 + o.amp_spread) : 1.0;
    Tensor img(o.shape, 0.5);
    for (const auto& bump : templates[k])
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const double dy = static_cast<double>(y) - bump.cy - sy;
          const double dx = static_cast<double>(x) - bump.cx - sx;
          img.at(y, x, bump.channel) += scale * bump.amp * std::exp(-(dy * dy + dx * dx) / (2.0 * bump.width * bump.width));
        }
    for (auto& v : img) {
      v = std::clamp(v, 0.0, 1.0);
      if (o.noise_sigma > 0.0) v = std::clamp(v + o.noise_sigma * noise_rng.normal(), 0.0, 1.0);
    }
    d.images.push_back(std::move(img));
    d.labels.push_back(k);
  }
  return d;
}

inline LabeledDataset generate_synthetic(std::size_t classes, std::size_t per_class, std::size_t h, std::size_t w,
                                         std::size_t c, double noise_sigma, std::uint64_t seed) {
  SyntheticOptions o;
  o.classes = classes;
  o.per_class = per_class;
  o.shape = Shape{h, w, c};
  o.noise_sigma = noise_sigma;
  o.seed = seed;
  return generate_synthetic(o);
}

/// Uniform sample of n examples without replacement, in draw order.
inline LabeledDataset subsample(const LabeledDataset& d, std::size_t n, std::uint64_t seed) {
  if (n > d.size()) throw Error(Errc::too_few, "requested " + std::to_string(n) + " of " + std::to_string(d.size()));
  std::vector<std::size_t> idx(d.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  // Partial Fisher-Yates from the front.
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  LabeledDataset out;
  out.class_count = d.class_count;
  for (std::size_t i = 0; i < n; ++i) {
    out.images.push_back(d.images[idx[i]]);
    out.labels.push_back(d.labels[idx[i]]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// IDX (big-endian) reader

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

namespace detail {

inline std::uint32_t get_be32(const std::string& b, std::size_t pos) {
  if (b.size() < pos + 4) throw Error(Errc::corrupt_file, "truncated IDX header");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(b[pos + i]);
  return v;
}

}  // namespace detail

inline LabeledDataset decode_idx(const std::string& image_bytes, const std::string& label_bytes) {
  if (detail::get_be32(image_bytes, 0) != kIdxImagesMagic) throw Error(Errc::bad_magic, "images file");
  if (detail::get_be32(label_bytes, 0) != kIdxLabelsMagic) throw Error(Errc::bad_magic, "labels file");
  const std::size_t n = detail::get_be32(image_bytes, 4);
  const std::size_t rows = detail::get_be32(image_bytes, 8);
  const std::size_t cols = detail::get_be32(image_bytes, 12);
  const std::size_t n_labels = detail::get_be32(label_bytes, 4);
  if (n != n_labels)
    throw Error(Errc::length_mismatch, std::to_string(n) + " images vs " + std::to_string(n_labels) + " labels");
  if (image_bytes.size() != 16 + n * rows * cols) throw Error(Errc::length_mismatch, "image payload size");
  if (label_bytes.size() != 8 + n) throw Error(Errc::length_mismatch, "label payload size");

  LabeledDataset d;
  std::size_t max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor img(Shape{rows, cols, 1});
    const std::size_t base = 16 + i * rows * cols;
    for (std::size_t p = 0; p < rows * cols; ++p)
      img[p] = static_cast<double>(static_cast<unsigned char>(image_bytes[base + p])) / 255.0;
    d.images.push_back(std::move(img));
    d.labels.push_back(static_cast<unsigned char>(label_bytes[8 + i]));
    max_label = std::max(max_label, d.labels.back());
  }
  d.class_count = n == 0 ? 0 : max_label + 1;
  return d;
}

inline LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  return decode_idx(read_file_bytes(images), read_file_bytes(labels));
}

}  // namespace advm
