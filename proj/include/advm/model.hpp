#pragma once

// Closed-world differentiable classifiers with hand-written backprop.
//
//   logistic:  Dense(classes)
//   mlp:       [Dense(h), ReLU] for h in hidden, Dense(classes)
//   smallcnn:  [Conv(k, ch, same), ReLU, AvgPool2] for ch in conv_channels, Dense(classes)

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "advm/error.hpp"
#include "advm/oracle.hpp"
#include "advm/rng.hpp"
#include "advm/tensor.hpp"

namespace advm {

enum class Arch { logistic, mlp, smallcnn };

inline const char* arch_name(Arch a) {
  switch (a) {
    case Arch::logistic: return "logistic";
    case Arch::mlp: return "mlp";
    case Arch::smallcnn: return "smallcnn";
  }
  return "?";
}

inline Arch parse_arch(const std::string& s) {
  if (s == "logistic") return Arch::logistic;
  if (s == "mlp") return Arch::mlp;
  if (s == "smallcnn") return Arch::smallcnn;
  throw Error(Errc::invalid_argument, "unknown architecture '" + s + "'");
}

struct ModelSpec {
  Arch arch = Arch::smallcnn;
  Shape input{28, 28, 1};
  std::size_t classes = 10;
  std::vector<std::size_t> hidden{64};           // mlp only
  std::vector<std::size_t> conv_channels{8, 16};  // smallcnn only
  std::size_t kernel = 3;                         // smallcnn only
  std::string activation = "relu";
  std::uint64_t seed = 0;

  bool operator==(const ModelSpec&) const = default;
};

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;  // out x in
  std::vector<double> bias;    // out

  bool operator==(const DenseLayer&) const = default;
};

struct ConvLayer {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::vector<double> weight;  // out x kernel x kernel x in
  std::vector<double> bias;    // out

  bool operator==(const ConvLayer&) const = default;
};

struct ReluLayer {
  bool operator==(const ReluLayer&) const = default;
};
struct AvgPoolLayer {  // 2x2, stride 2, floor
  bool operator==(const AvgPoolLayer&) const = default;
};

using Layer = std::variant<DenseLayer, ConvLayer, ReluLayer, AvgPoolLayer>;

/// Parameter gradients, one (weight, bias) pair per layer; empty for
/// parameter-free layers.
struct ParamGrads {
  std::vector<std::vector<double>> weight;
  std::vector<std::vector<double>> bias;
};

class Model {
 public:
  /// Per-layer activations from a forward pass; acts[0] is the input.
  struct Trace {
    std::vector<Tensor> acts;
    std::span<const double> logits() const { return acts.back().data(); }
  };

  Model() = default;

  /// Builds the layer list for `spec` with seeded uniform weights and zero
  /// biases: He scaling (fan-in) before a ReLU, Glorot elsewhere.
  static Model init(const ModelSpec& spec) {
    Model m;
    m.spec_ = spec;
    m.build_layers();
    Rng rng(spec.seed);
    for (std::size_t i = 0; i < m.layers_.size(); ++i) {
      const bool relu_next = i + 1 < m.layers_.size() && std::holds_alternative<ReluLayer>(m.layers_[i + 1]);
      auto bound = [&](double fan_in, double fan_out) {
        return relu_next ? std::sqrt(6.0 / fan_in) : std::sqrt(6.0 / (fan_in + fan_out));
      };
      if (auto* d = std::get_if<DenseLayer>(&m.layers_[i])) {
        const double a = bound(static_cast<double>(d->in), static_cast<double>(d->out));
        for (auto& w : d->weight) w = rng.uniform(-a, a);
      } else if (auto* c = std::get_if<ConvLayer>(&m.layers_[i])) {
        const double kk = static_cast<double>(c->kernel * c->kernel);
        const double a = bound(kk * static_cast<double>(c->in_channels), kk * static_cast<double>(c->out_channels));
        for (auto& w : c->weight) w = rng.uniform(-a, a);
      }
    }
    return m;
  }

  /// Builds the layer list for `spec` and fills it with the given parameters,
  /// in layer order, as (weight, bias) per parametric layer.
  static Model from_params(const ModelSpec& spec, std::vector<std::pair<std::vector<double>, std::vector<double>>> params) {
    Model m;
    m.spec_ = spec;
    m.build_layers();
    std::size_t next = 0;
    for (auto& layer : m.layers_) {
      std::visit(
          [&](auto& l) {
            if constexpr (requires { l.weight; }) {
              if (next >= params.size()) throw Error(Errc::corrupt_file, "missing parameters");
              auto& [w, b] = params[next++];
              if (w.size() != l.weight.size() || b.size() != l.bias.size())
                throw Error(Errc::shape_mismatch, "parameter sizes disagree with model spec");
              l.weight = std::move(w);
              l.bias = std::move(b);
            }
          },
          layer);
    }
    if (next != params.size()) throw Error(Errc::corrupt_file, "extra parameters");
    return m;
  }

  const ModelSpec& spec() const { return spec_; }
  Shape input_shape() const { return spec_.input; }
  std::size_t num_classes() const { return spec_.classes; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& mutable_layers() { return layers_; }

  bool operator==(const Model&) const = default;

  Trace forward_trace(const Tensor& x) const {
    if (x.shape() != spec_.input)
      throw Error(Errc::shape_mismatch, "model expects " + spec_.input.str() + ", got " + x.shape().str());
    Trace tr;
    tr.acts.reserve(layers_.size() + 1);
    tr.acts.push_back(x);
    for (const auto& layer : layers_)
      tr.acts.push_back(std::visit([&](const auto& l) { return forward_layer(l, tr.acts.back()); }, layer));
    return tr;
  }

  std::vector<double> logits(const Tensor& x) const {
    auto tr = forward_trace(x);
    return tr.acts.back().values();
  }

  std::size_t predict(const Tensor& x) const {
    const auto z = logits(x);
    return argmax(z);
  }

  /// Backpropagates dlogits; returns d(loss)/d(input). When `grads` is
  /// non-null, parameter gradients are accumulated into it.
  Tensor backward(const Trace& tr, std::span<const double> dlogits, ParamGrads* grads = nullptr) const {
    Tensor d(tr.acts.back().shape(), std::vector<double>(dlogits.begin(), dlogits.end()));
    if (grads && grads->weight.size() != layers_.size()) *grads = zero_grads();
    for (std::size_t i = layers_.size(); i-- > 0;) {
      std::vector<double>* gw = grads ? &grads->weight[i] : nullptr;
      std::vector<double>* gb = grads ? &grads->bias[i] : nullptr;
      d = std::visit([&](const auto& l) { return backward_layer(l, tr.acts[i], d, gw, gb); }, layers_[i]);
    }
    return d;
  }

  LossGrad loss_and_grad(const Tensor& x, std::size_t y) const {
    if (y >= spec_.classes)
      throw Error(Errc::label_out_of_range, std::to_string(y) + " >= " + std::to_string(spec_.classes));
    const auto tr = forward_trace(x);
    auto ce = softmax_cross_entropy(tr.logits(), y);
    return {ce.loss, backward(tr, ce.dlogits)};
  }

  /// Hash of the ReLU on/off pattern at x; equal signatures mean x lies in
  /// the same linear piece of the network.
  std::uint64_t activation_signature(const Tensor& x) const {
    const auto tr = forward_trace(x);
    std::uint64_t h = 0x51ED27ull;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (!std::holds_alternative<ReluLayer>(layers_[i])) continue;
      for (double v : tr.acts[i]) h = hash_combine(h, v > 0.0 ? 1u : 0u);
    }
    return h;
  }

  ParamGrads zero_grads() const {
    ParamGrads g;
    for (const auto& layer : layers_) {
      std::visit(
          [&](const auto& l) {
            if constexpr (requires { l.weight; }) {
              g.weight.emplace_back(l.weight.size(), 0.0);
              g.bias.emplace_back(l.bias.size(), 0.0);
            } else {
              g.weight.emplace_back();
              g.bias.emplace_back();
            }
          },
          layer);
    }
    return g;
  }

 private:
  void build_layers() {
    layers_.clear();
    Shape s = spec_.input;
    if (s.size() == 0) throw Error(Errc::invalid_argument, "empty input shape");
    if (spec_.classes < 2) throw Error(Errc::invalid_argument, "need at least two classes");
    auto dense = [&](std::size_t out) {
      DenseLayer d{s.size(), out, std::vector<double>(out * s.size(), 0.0), std::vector<double>(out, 0.0)};
      layers_.emplace_back(std::move(d));
      s = Shape{1, 1, out};
    };
    switch (spec_.arch) {
      case Arch::logistic:
        break;
      case Arch::mlp:
        for (auto h : spec_.hidden) {
          dense(h);
          layers_.emplace_back(ReluLayer{});
        }
        break;
      case Arch::smallcnn:
        if (spec_.kernel % 2 == 0) throw Error(Errc::invalid_argument, "conv kernel must be odd");
        for (auto ch : spec_.conv_channels) {
          ConvLayer c{s.channels, ch, spec_.kernel,
                      std::vector<double>(ch * spec_.kernel * spec_.kernel * s.channels, 0.0),
                      std::vector<double>(ch, 0.0)};
          layers_.emplace_back(std::move(c));
          layers_.emplace_back(ReluLayer{});
          layers_.emplace_back(AvgPoolLayer{});
          s = Shape{s.height, s.width, ch};
          s = Shape{s.height / 2, s.width / 2, s.channels};
          if (s.height == 0 || s.width == 0) throw Error(Errc::invalid_argument, "too many pooling stages");
        }
        break;
    }
    dense(spec_.classes);
  }

  static Tensor forward_layer(const DenseLayer& l, const Tensor& in) {
    Tensor out(Shape{1, 1, l.out});
    const auto x = in.data();
    for (std::size_t o = 0; o < l.out; ++o) {
      const double* w = &l.weight[o * l.in];
      double acc = l.bias[o];
      for (std::size_t i = 0; i < l.in; ++i) acc += w[i] * x[i];
      out[o] = acc;
    }
    return out;
  }

  static Tensor backward_layer(const DenseLayer& l, const Tensor& in, const Tensor& dout,
                               std::vector<double>* gw, std::vector<double>* gb) {
    Tensor din(in.shape());
    for (std::size_t o = 0; o < l.out; ++o) {
      const double g = dout[o];
      if (g == 0.0) continue;
      const double* w = &l.weight[o * l.in];
      for (std::size_t i = 0; i < l.in; ++i) din[i] += w[i] * g;
      if (gw) {
        double* dw = &(*gw)[o * l.in];
        for (std::size_t i = 0; i < l.in; ++i) dw[i] += g * in[i];
        (*gb)[o] += g;
      }
    }
    return din;
  }

  static Tensor forward_layer(const ConvLayer& l, const Tensor& in) {
    const auto [h, w, c] = in.shape();
    const auto k = l.kernel;
    const auto r = static_cast<std::ptrdiff_t>(k / 2);
    Tensor out(Shape{h, w, l.out_channels});
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        double* o = &out.at(y, x, 0);
        for (std::size_t oc = 0; oc < l.out_channels; ++oc) o[oc] = l.bias[oc];
        for (std::size_t ky = 0; ky < k; ++ky) {
          const auto sy = static_cast<std::ptrdiff_t>(y + ky) - r;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const auto sx = static_cast<std::ptrdiff_t>(x + kx) - r;
            if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
            const double* src = &in.at(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx), 0);
            for (std::size_t oc = 0; oc < l.out_channels; ++oc) {
              const double* wt = &l.weight[((oc * k + ky) * k + kx) * c];
              double acc = 0.0;
              for (std::size_t ic = 0; ic < c; ++ic) acc += wt[ic] * src[ic];
              o[oc] += acc;
            }
          }
        }
      }
    }
    return out;
  }

  static Tensor backward_layer(const ConvLayer& l, const Tensor& in, const Tensor& dout,
                               std::vector<double>* gw, std::vector<double>* gb) {
    const auto [h, w, c] = in.shape();
    const auto k = l.kernel;
    const auto r = static_cast<std::ptrdiff_t>(k / 2);
    Tensor din(in.shape());
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double* g = &dout.at(y, x, 0);
        if (gb)
          for (std::size_t oc = 0; oc < l.out_channels; ++oc) (*gb)[oc] += g[oc];
        for (std::size_t ky = 0; ky < k; ++ky) {
          const auto sy = static_cast<std::ptrdiff_t>(y + ky) - r;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const auto sx = static_cast<std::ptrdiff_t>(x + kx) - r;
            if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
            const auto uy = static_cast<std::size_t>(sy);
            const auto ux = static_cast<std::size_t>(sx);
            double* dsrc = &din.at(uy, ux, 0);
            const double* src = &in.at(uy, ux, 0);
            for (std::size_t oc = 0; oc < l.out_channels; ++oc) {
              const double go = g[oc];
              if (go == 0.0) continue;
              const std::size_t base = ((oc * k + ky) * k + kx) * c;
              const double* wt = &l.weight[base];
              for (std::size_t ic = 0; ic < c; ++ic) dsrc[ic] += wt[ic] * go;
              if (gw) {
                double* dw = &(*gw)[base];
                for (std::size_t ic = 0; ic < c; ++ic) dw[ic] += go * src[ic];
              }
            }
          }
        }
      }
    }
    return din;
  }

  static Tensor forward_layer(const ReluLayer&, const Tensor& in) {
    Tensor out(in.shape());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
    return out;
  }

  static Tensor backward_layer(const ReluLayer&, const Tensor& in, const Tensor& dout, std::vector<double>*,
                               std::vector<double>*) {
    Tensor din(in.shape());
    for (std::size_t i = 0; i < in.size(); ++i) din[i] = in[i] > 0.0 ? dout[i] : 0.0;
    return din;
  }

  static Tensor forward_layer(const AvgPoolLayer&, const Tensor& in) {
    const auto [h, w, c] = in.shape();
    Tensor out(Shape{h / 2, w / 2, c});
    for (std::size_t y = 0; y < h / 2; ++y)
      for (std::size_t x = 0; x < w / 2; ++x)
        for (std::size_t ch = 0; ch < c; ++ch)
          out.at(y, x, ch) = 0.25 * (in.at(2 * y, 2 * x, ch) + in.at(2 * y, 2 * x + 1, ch) +
                                     in.at(2 * y + 1, 2 * x, ch) + in.at(2 * y + 1, 2 * x + 1, ch));
    return out;
  }

  static Tensor backward_layer(const AvgPoolLayer&, const Tensor& in, const Tensor& dout, std::vector<double>*,
                               std::vector<double>*) {
    const auto [h, w, c] = in.shape();
    Tensor din(in.shape());
    for (std::size_t y = 0; y < h / 2; ++y)
      for (std::size_t x = 0; x < w / 2; ++x)
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double g = 0.25 * dout.at(y, x, ch);
          din.at(2 * y, 2 * x, ch) = g;
          din.at(2 * y, 2 * x + 1, ch) = g;
          din.at(2 * y + 1, 2 * x, ch) = g;
          din.at(2 * y + 1, 2 * x + 1, ch) = g;
        }
    return din;
  }

  ModelSpec spec_;
  std::vector<Layer> layers_;
};

}  // namespace advm
