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

#ifndef ARBB_DEFENSES_HPP
#define ARBB_DEFENSES_HPP

#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "arbb/attacks.hpp"
#include "arbb/model.hpp"
#include "arbb/rng.hpp"
#include "arbb/train.hpp"

namespace arbb {

enum class DefenseId { PGDAT, TRADES, JPEG, BitRed, RandPad };

std::string_view defense_name(DefenseId id);
DefenseId parse_defense(std::string_view name);
// JPEG, Bit-Red and R&P wrap a trained model; the other two change training.
inline bool is_transform(DefenseId id) { return id == DefenseId::JPEG || id == DefenseId::BitRed || id == DefenseId::RandPad; }

struct DefenseSpec {
  DefenseId id = DefenseId::JPEG;
  double epsilon = 0.03;             // inner attack budget (linf)
  std::size_t steps = 10;            // inner attack iterations
  std::optional<double> step_size;   // PGD-AT: 2.5*eps/steps, TRADES: eps/4
  double beta = 6.0;                 // TRADES trade-off
  int quality = 75;                  // JPEG
  int bits = 4;                      // Bit-Red
  std::size_t resize_extra = 8;      // R&P: resize to [s, s+extra], pad to s+extra
  bool seeded = true;                // R&P: draws keyed on (seed, input bytes)
  std::uint64_t seed = 0;

  void validate() const;
  double inner_alpha() const;
};

// 8-bit JPEG round trip without entropy coding. x is [N,C,H,W] in [0,1];
// C = 3 goes through JFIF YCbCr, other channel counts are coded as luma
// planes. Chroma is not subsampled.
Tensor jpeg_round_trip(const Tensor& x, int quality);
// IJG quality scaling of a base quantization table entry.
int jpeg_quant_value(int base, int quality);

Tensor bit_depth_reduce(const Tensor& x, int bits);

struct ResizePadDraw {
  std::size_t size = 0;  // resized side
  std::size_t top = 0;
  std::size_t left = 0;
};

ResizePadDraw draw_resize_pad(std::size_t input, std::size_t lo, std::size_t hi, std::size_t canonical, Rng& rng);
// Nearest resize of one image [1,C,s,s] to draw.size, zero-padded to canonical.
Tensor apply_resize_pad(const Tensor& image, const ResizePadDraw& draw, std::size_t canonical);
// Adjoint of apply_resize_pad: maps a gradient at the output back to the input.
Tensor resize_pad_adjoint(const Tensor& grad, const ResizePadDraw& draw, std::size_t input);
// Random resize to r in [lo, hi] and random zero-pad to hi, per image.
Tensor random_resize_pad(const Tensor& x, std::size_t lo, std::size_t hi, Rng& rng);

// Every query passes through the transform first. White-box gradients use
// the identity backward through JPEG and Bit-Red and the exact adjoint of
// the resize/pad selection for R&P.
class DefendedClassifier final : public Classifier {
 public:
  DefendedClassifier(const Model& model, const DefenseSpec& spec);
  Shape input_shape() const override { return model_.input_shape(); }
  std::size_t num_classes() const override { return model_.num_classes(); }
  Tensor logits(const Tensor& x) const override;
  Tensor input_gradient(const Tensor& x, const LogitSeed& seed, Tensor* logits_out = nullptr) const override;

  // Transformed batch as the model sees it.
  Tensor transform(const Tensor& x) const;

 private:
  std::vector<ResizePadDraw> draws(const Tensor& x) const;

  const Model& model_;
  DefenseSpec spec_;
  mutable std::atomic<std::uint64_t> queries_{0};
};

// Linf PGD over a whole batch, cross-entropy ascent.
Tensor pgd_batch(const Classifier& clf, const Tensor& x, std::span<const int> labels, double eps, double alpha,
                 std::size_t steps, bool random_start, Rng& rng);

// Cross-entropy on the PGD-perturbed batch; the inner attack queries the
// eval-mode model.
BatchLoss pgd_at_loss(Graph<float>& g, const Model& model, const Tensor& images, std::span<const int> labels,
                      const DefenseSpec& spec, Rng& rng);
// CE(f(x), y) + beta * KL(f(x) || f(x')), x' from PGD on the KL term.
BatchLoss trades_loss(Graph<float>& g, const Model& model, const Tensor& images, std::span<const int> labels,
                      const DefenseSpec& spec, Rng& rng);
LossHook defense_loss(const DefenseSpec& spec);

}  // namespace arbb

#endif  // ARBB_DEFENSES_HPP
