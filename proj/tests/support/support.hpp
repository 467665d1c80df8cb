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

#ifndef ARBB_TESTS_SUPPORT_HPP
#define ARBB_TESTS_SUPPORT_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "arbb/attacks.hpp"
#include "arbb/checkpoint.hpp"
#include "arbb/dataset.hpp"
#include "arbb/defenses.hpp"
#include "arbb/model.hpp"
#include "arbb/rng.hpp"
#include "arbb/train.hpp"

namespace arbb::test {

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

inline Tensor64 random_tensor64(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor64 t(shape);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline Tensor random_signs(const Shape& shape, Rng& rng) {
  Tensor t(shape);
  for (auto& v : t.data()) v = static_cast<float>(rng.sign());
  return t;
}

// 10-class synthetic blobs, 16x16x3: 60 train + 10 test images per class.
struct DeskData {
  Dataset train;
  Dataset test;
};

inline DeskData desk_data(std::uint64_t seed = 1, std::size_t train_per_class = 60, std::size_t test_per_class = 10,
                          std::size_t classes = 10) {
  SynthSpec s;
  s.num_classes = classes;
  s.per_class = train_per_class + test_per_class;
  s.seed = seed;
  const Dataset all = synth_dataset(s);
  std::vector<std::size_t> tr, te;
  for (std::size_t i = 0; i < all.size(); ++i) (i < train_per_class * classes ? tr : te).push_back(i);
  return {subset(all, tr), subset(all, te)};
}

inline ModelConfig desk_config(SchemeId scheme, Architecture arch = Architecture::SmallCNN, std::size_t classes = 10) {
  ModelConfig mc;
  mc.architecture = arch;
  mc.scheme = scheme;
  mc.resolution = 16;
  mc.num_classes = classes;
  return mc;
}

inline TrainConfig desk_train(std::size_t epochs = 10) {
  TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = 32;
  tc.milestones = {};
  tc.seed = 3;
  return tc;
}

// Trains once and caches the checkpoint under dir, so several test
// processes can share one desk model.
inline Model cached_desk_model(const std::filesystem::path& dir, const std::string& key, const Dataset& train_set,
                               const ModelConfig& mc, const TrainConfig& tc, const LossHook& loss = clean_loss) {
  const auto path = dir / (key + ".ckpt");
  if (std::filesystem::exists(path)) {
    try {
      return load_checkpoint(path);
    } catch (const Error&) {
      // stale or partial file: retrain below
    }
  }
  Model m(mc, 7);
  train(m, train_set, tc, nullptr, loss);
  std::filesystem::create_directories(dir);
  const auto tmp = dir / (key + ".ckpt.tmp" + std::to_string(reinterpret_cast<std::uintptr_t>(&m)));
  save_checkpoint(m, tmp);
  std::filesystem::rename(tmp, path);
  return m;
}

// The standard desk model for a scheme: smallcnn, desk_data(1), 10 epochs.
// Shared across test binaries through the on-disk cache.
inline Model desk_model(SchemeId scheme, const DeskData& d) {
  return cached_desk_model(ARBB_TEST_CACHE, "desk_" + std::string(scheme_name(scheme)), d.train, desk_config(scheme),
                           desk_train(10));
}

// Classifier decorator counting every image row the model sees.
class CountingClassifier final : public Classifier {
 public:
  explicit CountingClassifier(const Classifier& inner) : inner_(inner) {}
  Shape input_shape() const override { return inner_.input_shape(); }
  std::size_t num_classes() const override { return inner_.num_classes(); }
  Tensor logits(const Tensor& x) const override {
    rows_ += x.dim(0);
    return inner_.logits(x);
  }
  Tensor input_gradient(const Tensor& x, const LogitSeed& seed, Tensor* logits_out = nullptr) const override {
    rows_ += x.dim(0);
    gradients_ += x.dim(0);
    return inner_.input_gradient(x, seed, logits_out);
  }
  std::size_t rows() const { return rows_; }
  std::size_t gradients() const { return gradients_; }

 private:
  const Classifier& inner_;
  mutable std::size_t rows_ = 0;
  mutable std::size_t gradients_ = 0;
};

// Hand-written derivative tables, independent of the scheme table.
inline double ste(double x) { return std::abs(x) <= 1.0 ? 1.0 : 0.0; }
inline double poly(double x) {
  if (x >= -1.0 && x < 0.0) return 2.0 + 2.0 * x;
  if (x >= 0.0 && x < 1.0) return 2.0 - 2.0 * x;
  return 0.0;
}
inline double expected_derivative(SchemeId s, Role r, double x, double tau) {
  if (r == Role::Activation) return (s == SchemeId::BiReal || s == SchemeId::ReActNet) ? poly(x) : ste(x);
  if (s == SchemeId::ReCU) return std::abs(x) <= tau ? 1.0 : 0.0;
  return ste(x);
}

inline double linf_dist(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

inline double l2_dist(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

inline bool in_box(const Tensor& t, double tol = 1e-6) {
  for (float v : t.data()) {
    if (!(v >= -tol && v <= 1.0 + tol)) return false;
  }
  return true;
}

}  // namespace arbb::test

#endif  // ARBB_TESTS_SUPPORT_HPP
