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

#ifndef ARBB_TRAIN_HPP
#define ARBB_TRAIN_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "arbb/dataset.hpp"
#include "arbb/model.hpp"
#include "arbb/rng.hpp"

namespace arbb {

enum class OptimizerId { Adam, SGD };
enum class ScheduleId { MultiStep, Cosine };

std::string_view optimizer_name(OptimizerId id);
OptimizerId parse_optimizer(std::string_view name);
std::string_view schedule_name(ScheduleId id);
ScheduleId parse_schedule(std::string_view name);

struct TrainConfig {
  std::size_t epochs = 80;
  OptimizerId optimizer = OptimizerId::Adam;
  ScheduleId schedule = ScheduleId::MultiStep;
  double lr = 1e-3;
  double weight_decay = 0.0;
  std::size_t batch_size = 128;
  std::vector<std::size_t> milestones = {50, 75};
  double lr_decay = 0.1;
  std::size_t warmup_epochs = 0;
  double momentum = 0.9;  // SGD
  bool augment = false;   // random crop (zero pad) + horizontal flip
  std::size_t crop_pad = 4;
  std::uint64_t seed = 0;

  void validate() const;
  // Learning rate used throughout epoch e (0-based).
  double lr_at(std::size_t epoch) const;

  // 80 epochs, Adam, multistep at 50/75, lr 1e-3.
  static TrainConfig cifar_recipe();
  // 120 epochs, SGD, cosine with 10 warm-up epochs, lr 0.1, weight decay 2e-5.
  static TrainConfig imagenet_recipe();
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double eval_accuracy = -1.0;  // -1 when no evaluation set was given
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::string csv() const;
};

// Scalar loss of one batch plus the logits used for train accuracy.
struct BatchLoss {
  Graph<float>::Var loss;
  Graph<float>::Var logits;
};

// Builds the training loss of one batch on a training-mode graph. The
// default is mean cross-entropy on the clean batch; the adversarial
// training defenses plug in here.
using LossHook = std::function<BatchLoss(Graph<float>& g, const Model& model, const Tensor& images,
                                         std::span<const int> labels, Rng& rng)>;

BatchLoss clean_loss(Graph<float>& g, const Model& model, const Tensor& images, std::span<const int> labels, Rng& rng);

// Mini-batch training. Deterministic for a fixed seed. Throws TrainingError
// carrying the epoch index when the loss turns non-finite.
TrainHistory train(Model& model, const Dataset& train_set, const TrainConfig& tc, const Dataset* eval_set = nullptr,
                   const LossHook& loss = clean_loss);

// Random crop with zero padding plus horizontal flip, one draw per image.
Tensor augment_batch(const Tensor& images, std::size_t pad, Rng& rng);

double accuracy(const Model& model, const Dataset& ds, std::size_t batch = 256);

}  // namespace arbb

#endif  // ARBB_TRAIN_HPP
