// Copyright 2026 The linmix Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "linmix/data.hpp"
#include "linmix/model.hpp"

namespace linmix {

enum class Optimizer { sgd, adam };

inline Optimizer parse_optimizer(const std::string& name) {
  if (name == "sgd") return Optimizer::sgd;
  if (name == "adam") return Optimizer::adam;
  throw ConfigError("unknown optimizer '" + name + "' (expected sgd or adam)");
}

struct TrainOptions {
  Optimizer opt = Optimizer::adam;
  double lr = 1e-3;
  std::size_t epochs = 10;
  std::size_t batch = 16;
  // Stop after the first epoch whose end-of-epoch accuracy on the training
  // data reaches this value.
  std::optional<double> stop_at_accuracy;
  // Worker threads for per-example gradients. Results do not depend on it.
  std::size_t threads = 1;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;  // mean loss over the epoch's examples, pre-update
  double acc = 0.0;   // fraction classified correctly during the epoch

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainResult {
  Model<> model;
  std::vector<EpochRecord> history;
};

struct Metrics {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

/// Index of the largest entry; ties resolve to the lowest index.
inline std::size_t argmax(const Tensor& t) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < t.size(); ++i)
    if (t[i] > t[best]) best = i;
  return best;
}

/// Pointers to every parameter array of a model, in visit order.
inline std::vector<Tensor*> parameter_slots(Model<>& m) {
  std::vector<Tensor*> slots;
  Model<>::visit(m, "", [&](const std::string&, Tensor& t) { slots.push_back(&t); });
  return slots;
}

struct ExampleGradient {
  double loss = 0.0;
  std::size_t predicted = 0;
  std::vector<Tensor> grads;  // parameter order
};

/// Loss, prediction and parameter gradients for one labelled image.
inline ExampleGradient example_gradient(const Model<>& m, const Tensor& image,
                                        std::size_t label) {
  Tape tape;
  const Model<Var> bound =
      m.transform<Var>([&](const Tensor& t) { return tape.leaf(t); });
  Var logits = forward_logits(bound, image);
  Var loss = cross_entropy(logits, label);
  tape.backward(loss);
  ExampleGradient out;
  out.loss = loss.value().item();
  out.predicted = argmax(logits.value());
  Model<Var>::visit(bound, "", [&](const std::string&, const Var& v) {
    out.grads.push_back(tape.grad(v));
  });
  return out;
}

inline Metrics evaluate(const Model<>& m, const Dataset& data) {
  data.validate();
  Metrics out;
  if (data.size() == 0) return out;
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Tensor logits = forward_logits(m, data.images[i]);
    loss += cross_entropy(logits, data.labels[i]).item();
    if (argmax(logits) == data.labels[i]) ++correct;
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  out.mean_loss = loss / static_cast<double>(data.size());
  return out;
}

namespace detail {

class OptimizerState {
 public:
  OptimizerState(Optimizer kind, double lr, const std::vector<Tensor*>& slots)
      : kind_(kind), lr_(lr) {
    if (kind_ == Optimizer::adam) {
      for (const Tensor* t : slots) {
        m_.emplace_back(t->dims());
        v_.emplace_back(t->dims());
      }
    }
  }

  void step(const std::vector<Tensor*>& slots, const std::vector<Tensor>& grads) {
    ++t_;
    if (kind_ == Optimizer::sgd) {
      for (std::size_t s = 0; s < slots.size(); ++s) {
        auto p = slots[s]->data();
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr_ * grads[s][i];
      }
      return;
    }
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t s = 0; s < slots.size(); ++s) {
      auto p = slots[s]->data();
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double g = grads[s][i];
        m_[s][i] = kBeta1 * m_[s][i] + (1.0 - kBeta1) * g;
        v_[s][i] = kBeta2 * v_[s][i] + (1.0 - kBeta2) * g * g;
        const double mhat = m_[s][i] / c1;
        const double vhat = v_[s][i] / c2;
        p[i] -= lr_ * mhat / (std::sqrt(vhat) + kEps);
      }
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  Optimizer kind_;
  double lr_;
  std::uint64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace detail

/**
 * Trains `model` in place with mini-batches drawn from a seeded shuffle.
 * The batch gradient is the mean of per-example gradients, summed in
 * example order, so results are bitwise reproducible for any thread count.
 */
inline std::vector<EpochRecord> fit(Model<>& model, const Dataset& data,
                                    const TrainOptions& opts,
                                    std::uint64_t shuffle_seed) {
  data.validate();
  if (data.size() == 0) throw ContractError("train: dataset is empty");
  if (!(opts.lr >= 0.0) || !std::isfinite(opts.lr)) {
    throw ConfigError("lr must be finite and non-negative");
  }
  if (opts.batch == 0) throw ConfigError("batch must be positive");
  if (data.classes > model.cfg.classes) {
    throw ConfigError("classes: dataset has " + std::to_string(data.classes) +
                      " classes, model has " + std::to_string(model.cfg.classes));
  }

  const std::vector<Tensor*> slots = parameter_slots(model);
  detail::OptimizerState optimizer(opts.opt, opts.lr, slots);
  Rng rng(shuffle_seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(data.size());
  std::vector<EpochRecord> history;
  const std::size_t workers = std::max<std::size_t>(1, opts.threads);

  for (std::size_t epoch = 1; epoch <= opts.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.below(i)]);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t step = 0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch, ++step) {
      const std::size_t end = std::min(order.size(), start + opts.batch);
      std::vector<ExampleGradient> per(end - start);
      auto work = [&](std::size_t w) {
        for (std::size_t j = w; j < per.size(); j += workers) {
          const std::size_t idx = order[start + j];
          per[j] = example_gradient(model, data.images[idx], data.labels[idx]);
        }
      };
      if (workers == 1) {
        work(0);
      } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
      }

      std::vector<Tensor> grads = std::move(per.front().grads);
      double batch_loss = per.front().loss;
      for (std::size_t j = 1; j < per.size(); ++j) {
        batch_loss += per[j].loss;
        for (std::size_t s = 0; s < grads.size(); ++s) {
          auto dst = grads[s].data();
          auto src = per[j].grads[s].data();
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
      }
      if (!std::isfinite(batch_loss)) {
        throw DivergenceError("training diverged at epoch " +
                              std::to_string(epoch) + ", step " +
                              std::to_string(step) + ": non-finite loss");
      }
      const double inv = 1.0 / static_cast<double>(per.size());
      for (auto& g : grads)
        for (auto& v : g.data()) v *= inv;
      for (std::size_t j = 0; j < per.size(); ++j)
        if (per[j].predicted == data.labels[order[start + j]]) ++correct;
      loss_sum += batch_loss;
      optimizer.step(slots, grads);
    }

    const double n = static_cast<double>(data.size());
    history.push_back({epoch, loss_sum / n, static_cast<double>(correct) / n});
    if (opts.stop_at_accuracy && history.back().acc >= *opts.stop_at_accuracy &&
        evaluate(model, data).accuracy >= *opts.stop_at_accuracy) {
      break;
    }
  }
  return history;
}

inline TrainResult train(const ModelConfig& cfg, const Dataset& data,
                         const TrainOptions& opts) {
  TrainResult out{build_model(cfg), {}};
  out.history = fit(out.model, data, opts, cfg.seed);
  return out;
}

// ---------------------------------------------------------------------------
// Patch-local baseline: one softmax-regression classifier per patch position,
// each seeing only its own patch, combined by majority vote.

struct PatchLocalBaseline {
  std::size_t patch = 4;
  std::size_t classes = 2;
  std::vector<LinearParams<>> classifiers;  // one per patch position

  std::size_t predict(const Tensor& image) const {
    const Tensor patches = extract_patches(image, patch);
    std::vector<std::size_t> votes(classes, 0);
    for (std::size_t p = 0; p < classifiers.size(); ++p) {
      const Tensor row = slice_row(patches, p);
      ++votes[argmax(linear(row, classifiers[p]))];
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < classes; ++k)
      if (votes[k] > votes[best]) best = k;
    return best;
  }

  double accuracy(const Dataset& data) const {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (predict(data.images[i]) == data.labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(data.size());
  }

  static Tensor slice_row(const Tensor& m, std::size_t r) {
    Tensor row({1, m.cols()});
    for (std::size_t j = 0; j < m.cols(); ++j) row(0, j) = m(r, j);
    return row;
  }
};

/// Full-batch Adam on each position's cross-entropy until `iterations`.
inline PatchLocalBaseline train_patch_baseline(const Dataset& data,
                                               std::size_t patch,
                                               std::size_t iterations = 2000,
                                               double lr = 0.05) {
  data.validate();
  if (data.size() == 0) throw ContractError("baseline: dataset is empty");
  PatchLocalBaseline out;
  out.patch = patch;
  out.classes = data.classes;
  std::vector<Tensor> all_patches;
  all_patches.reserve(data.size());
  for (const Tensor& img : data.images)
    all_patches.push_back(extract_patches(img, patch));
  const std::size_t positions = all_patches.front().rows();
  const std::size_t dim = all_patches.front().cols();
  const std::size_t k = data.classes;
  const double n = static_cast<double>(data.size());

  for (std::size_t pos = 0; pos < positions; ++pos) {
    Tensor x({data.size(), dim});
    for (std::size_t i = 0; i < data.size(); ++i)
      for (std::size_t j = 0; j < dim; ++j) x(i, j) = all_patches[i](pos, j);
    LinearParams<> clf = zero_linear(k, dim);
    std::vector<Tensor*> slots = {&clf.weight, &clf.bias};
    detail::OptimizerState adam(Optimizer::adam, lr, slots);
    for (std::size_t it = 0; it < iterations; ++it) {
      const Tensor probs = softmax_rows(linear(x, clf));
      Tensor dz = probs;
      for (std::size_t i = 0; i < data.size(); ++i) dz(i, data.labels[i]) -= 1.0;
      std::vector<Tensor> grads = {scale(matmul(transpose(dz), x), 1.0 / n),
                                   scale(reduce(dz, Axis::cols, Stat::sum), 1.0 / n)};
      adam.step(slots, grads);
    }
    out.classifiers.push_back(std::move(clf));
  }
  return out;
}

}  // namespace linmix
