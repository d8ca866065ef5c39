#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "advm/error.hpp"
#include "advm/model.hpp"
#include "advm/oracle.hpp"

namespace advm {

/// Logit fusion: z = sum_k w_k z_k(x), loss = softmax cross-entropy of z.
/// Holds non-owning pointers; the models must outlive the ensemble.
class Ensemble {
 public:
  Ensemble(std::vector<const Model*> models, std::vector<double> weights)
      : models_(std::move(models)), weights_(std::move(weights)) {
    if (models_.empty()) throw Error(Errc::invalid_argument, "empty ensemble");
    if (models_.size() != weights_.size()) throw Error(Errc::length_mismatch, "one weight per model");
    double total = 0.0;
    for (double w : weights_) total += w;
    if (std::abs(total - 1.0) > 1e-12) throw Error(Errc::invalid_argument, "ensemble weights must sum to 1");
    for (const auto* m : models_) {
      if (m->input_shape() != models_.front()->input_shape())
        throw Error(Errc::shape_mismatch, "ensemble members disagree on input shape");
      if (m->num_classes() != models_.front()->num_classes())
        throw Error(Errc::class_count_mismatch, "ensemble members disagree on class count");
    }
  }

  static Ensemble equal_weights(std::vector<const Model*> models) {
    std::vector<double> w(models.size(), 1.0 / static_cast<double>(models.size()));
    return Ensemble(std::move(models), std::move(w));
  }

  Shape input_shape() const { return models_.front()->input_shape(); }
  std::size_t num_classes() const { return models_.front()->num_classes(); }
  std::size_t size() const { return models_.size(); }

  std::vector<double> logits(const Tensor& x) const {
    std::vector<double> z(num_classes(), 0.0);
    for (std::size_t k = 0; k < models_.size(); ++k) {
      const auto zk = models_[k]->logits(x);
      for (std::size_t c = 0; c < z.size(); ++c) z[c] += weights_[k] * zk[c];
    }
    return z;
  }

  std::size_t predict(const Tensor& x) const { return argmax(logits(x)); }

  LossGrad loss_and_grad(const Tensor& x, std::size_t y) const {
    if (y >= num_classes()) throw Error(Errc::label_out_of_range, std::to_string(y));
    std::vector<Model::Trace> traces;
    traces.reserve(models_.size());
    std::vector<double> z(num_classes(), 0.0);
    for (std::size_t k = 0; k < models_.size(); ++k) {
      traces.push_back(models_[k]->forward_trace(x));
      const auto zk = traces.back().logits();
      for (std::size_t c = 0; c < z.size(); ++c) z[c] += weights_[k] * zk[c];
    }
    const auto ce = softmax_cross_entropy(z, y);
    LossGrad out{ce.loss, Tensor(x.shape())};
    std::vector<double> dk(z.size());
    for (std::size_t k = 0; k < models_.size(); ++k) {
      for (std::size_t c = 0; c < z.size(); ++c) dk[c] = weights_[k] * ce.dlogits[c];
      accumulate(out.grad, models_[k]->backward(traces[k], dk));
    }
    return out;
  }

  /// Combined ReLU pattern of all members, for kink-aware gradient checks.
  std::uint64_t activation_signature(const Tensor& x) const {
    std::uint64_t h = 0;
    for (const auto* m : models_) h = hash_combine(h, m->activation_signature(x));
    return h;
  }

 private:
  std::vector<const Model*> models_;
  std::vector<double> weights_;
};

inline Ensemble ensemble_oracle(std::vector<const Model*> models, std::vector<double> weights) {
  return Ensemble(std::move(models), std::move(weights));
}

}  // namespace advm
