#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "advm/error.hpp"
#include "advm/rng.hpp"
#include "advm/tensor.hpp"

namespace advm {

enum class SamplingMethod { linear, uniform, gaussian };

inline const char* sampling_name(SamplingMethod m) {
  switch (m) {
    case SamplingMethod::linear: return "linear";
    case SamplingMethod::uniform: return "uniform";
    case SamplingMethod::gaussian: return "gaussian";
  }
  return "?";
}

inline SamplingMethod parse_sampling(const std::string& s) {
  if (s == "linear") return SamplingMethod::linear;
  if (s == "uniform") return SamplingMethod::uniform;
  if (s == "gaussian") return SamplingMethod::gaussian;
  throw Error(Errc::invalid_argument, "unknown sampling method '" + s + "'");
}

struct SamplingSpec {
  SamplingMethod method = SamplingMethod::linear;
  std::size_t count = 11;
  double eta = 7.0;
};

/// Coefficients c_1..c_N in [-eta, eta].
///   linear:   evenly spaced with both endpoints; {0} when N = 1
///   uniform:  i.i.d. U(-eta, eta)
///   gaussian: i.i.d. N(0, (eta/3)^2), redrawn until inside [-eta, eta]
/// Linear sampling draws nothing from the stream.
inline std::vector<double> sample_coefficients(const SamplingSpec& spec, Rng& rng) {
  if (spec.count == 0) throw Error(Errc::invalid_argument, "sampling count must be >= 1");
  if (!(spec.eta >= 0.0)) throw Error(Errc::invalid_argument, "eta must be >= 0");
  std::vector<double> c(spec.count, 0.0);
  switch (spec.method) {
    case SamplingMethod::linear:
      if (spec.count > 1) {
        const double span = static_cast<double>(spec.count - 1);
        for (std::size_t i = 0; i < spec.count; ++i) {
          // Integer numerator keeps the midpoint at exactly 0 and endpoints at exactly +-eta.
          const double k = static_cast<double>(2 * static_cast<long long>(i) - static_cast<long long>(spec.count - 1));
          c[i] = spec.eta * (k / span);
        }
      }
      break;
    case SamplingMethod::uniform:
      for (auto& v : c) v = rng.uniform(-spec.eta, spec.eta);
      break;
    case SamplingMethod::gaussian: {
      const double sigma = spec.eta / 3.0;
      if (sigma == 0.0) break;
      for (auto& v : c) {
        do v = sigma * rng.normal();
        while (std::abs(v) > spec.eta);
      }
      break;
    }
  }
  return c;
}

/// Tensor of i.i.d. U(-1, 1) entries.
inline Tensor sample_uniform_cube(Rng& rng, Shape shape) {
  Tensor t(shape);
  for (auto& v : t) v = rng.uniform(-1.0, 1.0);
  return t;
}

}  // namespace advm
