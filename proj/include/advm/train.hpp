#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "advm/data.hpp"
#include "advm/error.hpp"
#include "advm/model.hpp"
#include "advm/rng.hpp"

namespace advm {

struct TrainOptions {
  std::size_t epochs = 5;
  double lr = 0.05;
  std::size_t batch = 32;
  double momentum = 0.9;
  std::uint64_t seed = 0;  // shuffling; initialization uses ModelSpec::seed
};

struct TrainResult {
  Model model;
  double train_accuracy = 0.0;
};

inline double accuracy(const Model& m, const LabeledDataset& d) {
  if (d.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < d.size(); ++i) hits += m.predict(d.images[i]) == d.labels[i];
  return static_cast<double>(hits) / static_cast<double>(d.size());
}

/// Minibatch SGD (heavy-ball momentum) on mean softmax cross-entropy.
/// Single-threaded; the result is a pure function of (spec, data, options).
inline TrainResult train_sgd(const ModelSpec& spec, const LabeledDataset& data, const TrainOptions& opt) {
  if (data.empty()) throw Error(Errc::empty_dataset, "cannot train on an empty dataset");
  data.validate();
  if (data.image_shape() != spec.input)
    throw Error(Errc::shape_mismatch, "dataset " + data.image_shape().str() + " vs model " + spec.input.str());
  if (data.class_count > spec.classes) throw Error(Errc::label_out_of_range, "dataset has more classes than model");
  if (opt.batch == 0) throw Error(Errc::invalid_argument, "batch must be positive");

  Model model = Model::init(spec);
  Rng rng = Rng(opt.seed).fork(0x7261696E);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  ParamGrads velocity = model.zero_grads();

  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += opt.batch) {
      const std::size_t end = std::min(order.size(), start + opt.batch);
      ParamGrads grads = model.zero_grads();
      for (std::size_t b = start; b < end; ++b) {
        const auto& x = data.images[order[b]];
        const auto tr = model.forward_trace(x);
        const auto ce = softmax_cross_entropy(tr.logits(), data.labels[order[b]]);
        model.backward(tr, ce.dlogits, &grads);
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      auto& layers = model.mutable_layers();
      for (std::size_t li = 0; li < layers.size(); ++li) {
        std::visit(
            [&](auto& l) {
              if constexpr (requires { l.weight; }) {
                auto step = [&](std::vector<double>& p, std::vector<double>& g, std::vector<double>& v) {
                  for (std::size_t i = 0; i < p.size(); ++i) {
                    v[i] = opt.momentum * v[i] + scale * g[i];
                    p[i] -= opt.lr * v[i];
                  }
                };
                step(l.weight, grads.weight[li], velocity.weight[li]);
                step(l.bias, grads.bias[li], velocity.bias[li]);
              }
            },
            layers[li]);
      }
    }
  }
  return {model, accuracy(model, data)};
}

}  // namespace advm
