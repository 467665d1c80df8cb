/* Copyright 2026 The ARBB Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "arbb/train.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <unordered_map>

namespace arbb {

std::string_view optimizer_name(OptimizerId id) { return id == OptimizerId::Adam ? "adam" : "sgd"; }

OptimizerId parse_optimizer(std::string_view name) {
  if (name == "adam") return OptimizerId::Adam;
  if (name == "sgd") return OptimizerId::SGD;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

std::string_view schedule_name(ScheduleId id) { return id == ScheduleId::MultiStep ? "multistep" : "cosine"; }

ScheduleId parse_schedule(std::string_view name) {
  if (name == "multistep") return ScheduleId::MultiStep;
  if (name == "cosine") return ScheduleId::Cosine;
  throw ConfigError("unknown learning-rate schedule '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be at least 1");
  // lr = 0 is accepted: it freezes the parameters, which is a useful check.
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be a finite non-negative number");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (schedule == ScheduleId::Cosine && warmup_epochs >= epochs && warmup_epochs > 0) {
    throw ConfigError("warm-up must be shorter than training");
  }
}

double TrainConfig::lr_at(std::size_t epoch) const {
  if (schedule == ScheduleId::MultiStep) {
    double r = lr;
    for (auto m : milestones) {
      if (epoch >= m) r *= lr_decay;
    }
    return r;
  }
  if (epoch < warmup_epochs) return lr * static_cast<double>(epoch + 1) / static_cast<double>(warmup_epochs);
  const double span = static_cast<double>(epochs - warmup_epochs);
  const double t = static_cast<double>(epoch - warmup_epochs) / span;
  return 0.5 * lr * (1.0 + std::cos(std::numbers::pi * t));
}

TrainConfig TrainConfig::cifar_recipe() {
  TrainConfig tc;
  tc.epochs = 80;
  tc.optimizer = OptimizerId::Adam;
  tc.schedule = ScheduleId::MultiStep;
  tc.milestones = {50, 75};
  tc.lr = 1e-3;
  tc.augment = true;
  return tc;
}

TrainConfig TrainConfig::imagenet_recipe() {
  TrainConfig tc;
  tc.epochs = 120;
  tc.optimizer = OptimizerId::SGD;
  tc.schedule = ScheduleId::Cosine;
  tc.lr = 0.1;
  tc.warmup_epochs = 10;
  tc.weight_decay = 2e-5;
  tc.milestones.clear();
  tc.augment = true;
  return tc;
}

std::string TrainHistory::csv() const {
  std::string out = "epoch,lr,train_loss,train_accuracy,eval_accuracy\n";
  char buf[256];
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g\n", e.epoch, e.lr, e.train_loss, e.train_accuracy,
                  e.eval_accuracy);
    out += buf;
  }
  return out;
}

BatchLoss clean_loss(Graph<float>& g, const Model& model, const Tensor& images, std::span<const int> labels, Rng&) {
  auto x = g.constant(images);
  auto logits = model.forward(g, x);
  return {ops::softmax_cross_entropy(g, logits, labels), logits};
}

Tensor augment_batch(const Tensor& images, std::size_t pad, Rng& rng) {
  if (images.rank() != 4) throw ShapeError("augment_batch expects [N,C,H,W]");
  const std::size_t N = images.dim(0), C = images.dim(1), H = images.dim(2), W = images.dim(3);
  Tensor out(images.shape());
  const auto p = static_cast<std::int64_t>(pad);
  for (std::size_t n = 0; n < N; ++n) {
    const std::int64_t dy = rng.integer(-p, p), dx = rng.integer(-p, p);
    const bool flip = rng.uniform() < 0.5;
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
          const std::int64_t sy = static_cast<std::int64_t>(y) + dy;
          const std::int64_t sx0 = static_cast<std::int64_t>(flip ? W - 1 - x : x) + dx;
          float v = 0.0f;
          if (sy >= 0 && sx0 >= 0 && sy < static_cast<std::int64_t>(H) && sx0 < static_cast<std::int64_t>(W)) {
            v = images[((n * C + c) * H + static_cast<std::size_t>(sy)) * W + static_cast<std::size_t>(sx0)];
          }
          out[((n * C + c) * H + y) * W + x] = v;
        }
      }
    }
  }
  return out;
}

double accuracy(const Model& model, const Dataset& ds, std::size_t batch) {
  if (ds.size() == 0) throw ConfigError("accuracy of an empty dataset");
  std::size_t correct = 0;
  for (std::size_t b = 0; b < ds.size(); b += batch) {
    const std::size_t n = std::min(batch, ds.size() - b);
    const auto pred = model.predict(slice_rows(ds.images, b, n));
    for (std::size_t i = 0; i < n; ++i) correct += pred[i] == ds.labels[b + i] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

namespace {

struct SlotState {
  std::vector<double> m, v;
};

}  // namespace

TrainHistory train(Model& model, const Dataset& train_set, const TrainConfig& tc, const Dataset* eval_set,
                   const LossHook& loss) {
  tc.validate();
  train_set.validate();
  if (train_set.size() == 0) throw ConfigError("empty training set");
  if (train_set.image_shape() != model.input_shape()) {
    throw ConfigError("training images " + to_string(train_set.image_shape()) + " do not match model input " +
                      to_string(model.input_shape()));
  }
  for (int y : train_set.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= model.num_classes()) {
      throw LabelError("training label " + std::to_string(y) + " outside the model's class range");
    }
  }

  std::unordered_map<const Parameter*, SlotState> state;
  std::size_t step = 0;
  TrainHistory hist;
  const std::size_t N = train_set.size();
  constexpr double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;

  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    const double lr = tc.lr_at(epoch);
    Rng rng(derive_seed(tc.seed, "train.epoch", epoch));
    const auto perm = rng.permutation(N);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < N; b += tc.batch_size) {
      const std::size_t n = std::min(tc.batch_size, N - b);
      std::vector<std::size_t> idx(perm.begin() + static_cast<std::ptrdiff_t>(b),
                                   perm.begin() + static_cast<std::ptrdiff_t>(b + n));
      Tensor xb = gather_rows(train_set.images, idx);
      std::vector<int> yb(n);
      for (std::size_t i = 0; i < n; ++i) yb[i] = train_set.labels[idx[i]];
      if (tc.augment) xb = augment_batch(xb, tc.crop_pad, rng);

      Graph<float> g(GraphMode::Train);
      BatchLoss out;
      try {
        out = loss(g, model, xb, yb, rng);
      } catch (const NumericError& e) {
        throw TrainingError(epoch, e.what());
      }
      const float value = g.value(out.loss)[0];
      if (!std::isfinite(value)) throw TrainingError(epoch, "non-finite training loss");
      loss_sum += static_cast<double>(value) * static_cast<double>(n);
      const Tensor& z = g.value(out.logits);
      const std::size_t K = z.dim(1);
      for (std::size_t i = 0; i < n; ++i) {
        const float* row = z.ptr() + i * K;
        correct += static_cast<int>(std::max_element(row, row + K) - row) == yb[i] ? 1 : 0;
      }

      auto grads = grad_params(g, out.loss);
      ++step;
      for (auto& [pc, grad] : grads) {
        auto& p = const_cast<Parameter&>(*pc);
        auto& s = state[pc];
        if (s.m.empty()) {
          s.m.assign(p.value.size(), 0.0);
          if (tc.optimizer == OptimizerId::Adam) s.v.assign(p.value.size(), 0.0);
        }
        const double wd = p.decay ? tc.weight_decay : 0.0;
        for (std::size_t i = 0; i < p.value.size(); ++i) {
          const double gi = static_cast<double>(grad[i]) + wd * p.value[i];
          if (!std::isfinite(gi)) throw TrainingError(epoch, "non-finite gradient for " + p.name);
          double update;
          if (tc.optimizer == OptimizerId::Adam) {
            s.m[i] = b1 * s.m[i] + (1.0 - b1) * gi;
            s.v[i] = b2 * s.v[i] + (1.0 - b2) * gi * gi;
            const double mh = s.m[i] / (1.0 - std::pow(b1, static_cast<double>(step)));
            const double vh = s.v[i] / (1.0 - std::pow(b2, static_cast<double>(step)));
            update = lr * mh / (std::sqrt(vh) + adam_eps);
          } else {
            s.m[i] = tc.momentum * s.m[i] + gi;
            update = lr * s.m[i];
          }
          p.value[i] = static_cast<float>(p.value[i] - update);
        }
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(N);
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(N);
    if (eval_set) rec.eval_accuracy = accuracy(model, *eval_set);
    hist.epochs.push_back(rec);
  }
  return hist;
}

}  // namespace arbb
