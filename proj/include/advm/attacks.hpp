#pragma once

// Sign-gradient L-infinity attacks, generic over a GradientOracle.
//
// With step a = eps / T, origin x, and nz(v) = v / |v|_1 (zero when v = 0):
//
//   I-FGSM   x_{t+1} = P(x_t + a sign(grad J(x_t)))
//   MI-FGSM  g_t = mu g_{t-1} + nz(grad J(x_t))
//   NI-FGSM  g_t = mu g_{t-1} + nz(grad J(x_t + a mu g_{t-1}))
//   PI-FGSM  gt_t = grad J(x_t + a gt_{t-1});  g_t = mu g_{t-1} + nz(gt_t)
//   EMI      gb_t = mean_i grad J(x_t + c_i gb_{t-1});  g_t = mu g_{t-1} + nz(gb_t)
//   ENI      as EMI, sampling along g_{t-1}
//   ERI      as EMI, sampling x_t + a u_i with u_i ~ U[-1,1]^d
//
// and, for all momentum variants, x_{t+1} = P(x_t + a sign(g_t)), where P
// projects onto the eps-ball around x intersected with [0,1]. All state
// starts at zero. Lookahead and sample points are not projected.

#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "advm/error.hpp"
#include "advm/hash.hpp"
#include "advm/oracle.hpp"
#include "advm/rng.hpp"
#include "advm/sampling.hpp"
#include "advm/tensor.hpp"
#include "advm/transforms.hpp"

namespace advm {

enum class Variant { fgsm, ifgsm, mifgsm, nifgsm, pifgsm, emifgsm, enifgsm, erifgsm };

inline constexpr Variant kAllVariants[] = {Variant::fgsm,   Variant::ifgsm,   Variant::mifgsm,  Variant::nifgsm,
                                           Variant::pifgsm, Variant::emifgsm, Variant::enifgsm, Variant::erifgsm};

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::fgsm: return "fgsm";
    case Variant::ifgsm: return "i-fgsm";
    case Variant::mifgsm: return "mi-fgsm";
    case Variant::nifgsm: return "ni-fgsm";
    case Variant::pifgsm: return "pi-fgsm";
    case Variant::emifgsm: return "emi-fgsm";
    case Variant::enifgsm: return "eni-fgsm";
    case Variant::erifgsm: return "eri-fgsm";
  }
  return "?";
}

/// Accepts "emi-fgsm", "emifgsm", "EMI-FGSM", ...
inline Variant parse_variant(std::string s) {
  std::string key;
  for (char c : s)
    if (c != '-' && c != '_') key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  for (Variant v : kAllVariants) {
    std::string name;
    for (const char* p = variant_name(v); *p; ++p)
      if (*p != '-') name.push_back(*p);
    if (name == key) return v;
  }
  throw Error(Errc::invalid_argument, "unknown attack '" + s + "'");
}

struct AttackConfig {
  Variant variant = Variant::emifgsm;
  double eps = 16.0 / 255.0;
  std::size_t iters = 10;
  double mu = 1.0;
  SamplingSpec sampling;
  TransformConfig transforms;
  /// Sample along a * d / mean|d| instead of the raw direction d (EMI/ENI only).
  bool normalize_sample_dir = false;
  std::uint64_t seed = 0;
  bool record_trace = false;

  double step() const { return eps / static_cast<double>(iters); }
};

/// g: accumulated momentum; g_bar: previous average gradient; g_tilde:
/// previous raw gradient.
struct MomentumState {
  Tensor g;
  Tensor g_bar;
  Tensor g_tilde;

  explicit MomentumState(Shape s = {}) : g(s), g_bar(s), g_tilde(s) {}
};

struct StepRecord {
  Tensor x;                          // x_t, where the step starts
  std::vector<double> coefficients;  // EMI/ENI c_i
  std::vector<Tensor> offsets;       // ERI u_i
  double loss = 0.0;                 // mean loss over the evaluation points
  MomentumState state;               // after the update
  Tensor x_next;
};

struct AttackResult {
  Tensor adversarial;
  bool white_box_success = false;
  std::vector<double> loss_trace;
  std::string config_hash;
  std::vector<StepRecord> trace;  // only when AttackConfig::record_trace
};

inline std::string canonical_config(const AttackConfig& c) {
  std::string s;
  auto kv = [&](const std::string& k, const std::string& v) { s += k + "=" + v + "\n"; };
  kv("attack", variant_name(c.variant));
  kv("eps", exact_decimal(c.eps));
  kv("iters", std::to_string(c.iters));
  kv("mu", exact_decimal(c.mu));
  kv("sampling", sampling_name(c.sampling.method));
  kv("samples", std::to_string(c.sampling.count));
  kv("eta", exact_decimal(c.sampling.eta));
  kv("normalize_sample_dir", c.normalize_sample_dir ? "1" : "0");
  std::string tf;
  if (c.transforms.use_dim) tf += "dim,";
  if (c.transforms.use_tim) tf += "tim,";
  if (c.transforms.use_sim) tf += "sim,";
  kv("transforms", tf);
  if (c.transforms.use_dim) {
    kv("dim.prob", exact_decimal(c.transforms.dim.prob));
    kv("dim.resize_low", std::to_string(c.transforms.dim.resize_low));
    kv("dim.pad_to", std::to_string(c.transforms.dim.pad_to));
  }
  if (c.transforms.use_tim) {
    kv("tim.kernel_size", std::to_string(c.transforms.tim.kernel_size));
    kv("tim.sigma", exact_decimal(c.transforms.tim.sigma));
  }
  if (c.transforms.use_sim) kv("sim.copies", std::to_string(c.transforms.sim.copies));
  kv("seed", std::to_string(c.seed));
  return s;
}

inline std::string config_hash(const AttackConfig& c) { return hex64(fnv1a64(canonical_config(c))); }

/// Stream for example `index` under a global seed; serial and parallel runs
/// hand every example the same stream.
inline Rng example_rng(std::uint64_t seed, std::uint64_t index) { return Rng(hash_combine(seed, index)); }

namespace detail {

inline constexpr std::uint64_t kSamplerStream = 1;
inline constexpr std::uint64_t kTransformStream = 2;

inline Tensor normalized_or_zero(const Tensor& v) {
  const double n = l1_norm(v);
  if (!(n > kZeroGradientL1)) return Tensor(v.shape());
  return scaled(v, 1.0 / n);
}

inline void momentum_update(Tensor& g, double mu, const Tensor& grad) {
  const Tensor n = normalized_or_zero(grad);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = mu * g[i] + n[i];
}

inline Tensor sample_direction(const Tensor& d, const AttackConfig& cfg) {
  if (!cfg.normalize_sample_dir) return d;
  const double mean_abs = l1_norm(d) / static_cast<double>(d.size());
  if (!(mean_abs > kZeroGradientL1)) return Tensor(d.shape());
  return scaled(d, cfg.step() / mean_abs);
}

inline void validate(const AttackConfig& c) {
  if (!(c.eps >= 0.0)) throw Error(Errc::invalid_argument, "eps must be >= 0");
  if (c.iters == 0) throw Error(Errc::invalid_argument, "iters must be >= 1");
  if (c.sampling.count == 0) throw Error(Errc::invalid_argument, "samples must be >= 1");
  if (!(c.sampling.eta >= 0.0)) throw Error(Errc::invalid_argument, "eta must be >= 0");
}

}  // namespace detail

/// Runs the configured attack from clean input x with true label y. `rng` is
/// the example's stream; samplers and transforms draw from forks of it.
template <GradientOracle O>
AttackResult run_attack(O& base, const Tensor& x, std::size_t y, const AttackConfig& cfg, Rng rng) {
  detail::validate(cfg);
  TransformedOracle<O> oracle(base, cfg.transforms, rng.fork(detail::kTransformStream));
  Rng sampler = rng.fork(detail::kSamplerStream);
  AttackResult res;
  res.config_hash = config_hash(cfg);

  if (cfg.variant == Variant::fgsm) {
    const LossGrad lg = oracle.loss_and_grad(x, y);
    res.loss_trace.push_back(lg.loss);
    res.adversarial = clamp01(add_scaled(x, cfg.eps, sign(lg.grad)));
    if (cfg.record_trace) {
      StepRecord rec;
      rec.x = x;
      rec.loss = lg.loss;
      rec.state = MomentumState(x.shape());
      rec.x_next = res.adversarial;
      res.trace.push_back(std::move(rec));
    }
  } else {
    const double alpha = cfg.step();
    Tensor xt = x;
    MomentumState st(x.shape());
    for (std::size_t t = 0; t < cfg.iters; ++t) {
      StepRecord rec;
      if (cfg.record_trace) rec.x = xt;
      double loss = 0.0;
      const Tensor* direction = &st.g;
      Tensor raw;
      switch (cfg.variant) {
        case Variant::ifgsm: {
          LossGrad lg = oracle.loss_and_grad(xt, y);
          loss = lg.loss;
          raw = std::move(lg.grad);
          direction = &raw;
          break;
        }
        case Variant::mifgsm: {
          const LossGrad lg = oracle.loss_and_grad(xt, y);
          loss = lg.loss;
          detail::momentum_update(st.g, cfg.mu, lg.grad);
          break;
        }
        case Variant::nifgsm: {
          const LossGrad lg = oracle.loss_and_grad(add_scaled(xt, alpha * cfg.mu, st.g), y);
          loss = lg.loss;
          detail::momentum_update(st.g, cfg.mu, lg.grad);
          break;
        }
        case Variant::pifgsm: {
          LossGrad lg = oracle.loss_and_grad(add_scaled(xt, alpha, st.g_tilde), y);
          loss = lg.loss;
          st.g_tilde = std::move(lg.grad);
          detail::momentum_update(st.g, cfg.mu, st.g_tilde);
          break;
        }
        case Variant::emifgsm:
        case Variant::enifgsm:
        case Variant::erifgsm: {
          const std::size_t n = cfg.sampling.count;
          std::vector<double> coeffs;
          Tensor dir;
          if (cfg.variant != Variant::erifgsm) {
            coeffs = sample_coefficients(cfg.sampling, sampler);
            dir = detail::sample_direction(cfg.variant == Variant::emifgsm ? st.g_bar : st.g, cfg);
          }
          Tensor sum(x.shape());
          for (std::size_t i = 0; i < n; ++i) {
            Tensor point;
            if (cfg.variant == Variant::erifgsm) {
              Tensor u = sample_uniform_cube(sampler, x.shape());
              point = add_scaled(xt, alpha, u);
              if (cfg.record_trace) rec.offsets.push_back(std::move(u));
            } else {
              point = add_scaled(xt, coeffs[i], dir);
            }
            const LossGrad lg = oracle.loss_and_grad(point, y);
            loss += lg.loss;
            accumulate(sum, lg.grad);
          }
          loss /= static_cast<double>(n);
          st.g_bar = scaled(sum, 1.0 / static_cast<double>(n));
          detail::momentum_update(st.g, cfg.mu, st.g_bar);
          if (cfg.record_trace) rec.coefficients = std::move(coeffs);
          break;
        }
        case Variant::fgsm:
          break;
      }
      xt = project_linf(add_scaled(xt, alpha, sign(*direction)), x, cfg.eps);
      res.loss_trace.push_back(loss);
      if (cfg.record_trace) {
        rec.loss = loss;
        rec.state = st;
        rec.x_next = xt;
        res.trace.push_back(std::move(rec));
      }
    }
    res.adversarial = std::move(xt);
  }

  if constexpr (Classifier<O>) res.white_box_success = base.predict(res.adversarial) != y;
  return res;
}

template <GradientOracle O>
AttackResult run_attack(O& oracle, const Tensor& x, std::size_t y, const AttackConfig& cfg) {
  return run_attack(oracle, x, y, cfg, Rng(cfg.seed));
}

namespace detail {

template <GradientOracle O>
AttackResult run_as(Variant v, O& oracle, const Tensor& x, std::size_t y, AttackConfig cfg) {
  cfg.variant = v;
  return run_attack(oracle, x, y, cfg);
}

}  // namespace detail

template <GradientOracle O>
AttackResult fgsm(O& oracle, const Tensor& x, std::size_t y, double eps) {
  AttackConfig cfg;
  cfg.variant = Variant::fgsm;
  cfg.eps = eps;
  cfg.iters = 1;
  return run_attack(oracle, x, y, cfg);
}

template <GradientOracle O>
AttackResult ifgsm(O& o, const Tensor& x, std::size_t y, const AttackConfig& c) { return detail::run_as(Variant::ifgsm, o, x, y, c); }
template <GradientOracle O>
AttackResult mifgsm(O& o, const Tensor& x, std::size_t y, const AttackConfig& c) { return detail::run_as(Variant::mifgsm, o, x, y, c); }
template <GradientOracle O>
AttackResult nifgsm(O& o, const Tensor& x, std::size_t y, const AttackConfig& c) { return detail::run_as(Variant::nifgsm, o, x, y, c); }
template <GradientOracle O>
AttackResult pifgsm(O& o, const Tensor& x, std::size_t y, const AttackConfig& c) { return detail::run_as(Variant::pifgsm, o, x, y, c); }
template <GradientOracle O>
AttackResult emifgsm(O& o, const Tensor& x, std::size_t y, const AttackConfig& c) { return detail::run_as(Variant::emifgsm, o, x, y, c); }
template <GradientOracle O>
AttackResult enifgsm(O& o, const Tensor& x, std::size_t y, const AttackConfig& c) { return detail::run_as(Variant::enifgsm, o, x, y, c); }
template <GradientOracle O>
AttackResult erifgsm(O& o, const Tensor& x, std::size_t y, const AttackConfig& c) { return detail::run_as(Variant::erifgsm, o, x, y, c); }

}  // namespace advm
