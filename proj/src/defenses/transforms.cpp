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

#include <cmath>
#include <cstring>

#include "arbb/defenses.hpp"

namespace arbb {

std::string_view defense_name(DefenseId id) {
  switch (id) {
    case DefenseId::PGDAT:
      return "pgd-at";
    case DefenseId::TRADES:
      return "trades";
    case DefenseId::JPEG:
      return "jpeg";
    case DefenseId::BitRed:
      return "bit-red";
    case DefenseId::RandPad:
      return "r&p";
  }
  return "?";
}

DefenseId parse_defense(std::string_view name) {
  for (auto id : {DefenseId::PGDAT, DefenseId::TRADES, DefenseId::JPEG, DefenseId::BitRed, DefenseId::RandPad}) {
    if (defense_name(id) == name) return id;
  }
  if (name == "rp" || name == "randpad") return DefenseId::RandPad;
  throw ConfigError("unknown defense '" + std::string(name) + "'");
}

void DefenseSpec::validate() const {
  if (quality < 1 || quality > 100) throw ConfigError("JPEG quality must be in [1, 100]");
  if (bits < 1 || bits > 8) throw ConfigError("bit depth must be in [1, 8]");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("TRADES beta must be positive");
  if (!std::isfinite(epsilon) || epsilon < 0.0) throw ConfigError("inner epsilon must be finite and non-negative");
  if (step_size && !(*step_size >= 0.0)) throw ConfigError("inner step size must be non-negative");
}

double DefenseSpec::inner_alpha() const {
  if (step_size) return *step_size;
  if (id == DefenseId::TRADES) return epsilon / 4.0;
  return 2.5 * epsilon / static_cast<double>(std::max<std::size_t>(steps, 1));
}

Tensor bit_depth_reduce(const Tensor& x, int bits) {
  if (bits < 1 || bits > 8) throw ConfigError("bit depth must be in [1, 8], got " + std::to_string(bits));
  const double levels = std::ldexp(1.0, bits) - 1.0;
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = std::clamp(static_cast<double>(x[i]), 0.0, 1.0);
    out[i] = static_cast<float>(std::round(v * levels) / levels);
  }
  return out;
}

ResizePadDraw draw_resize_pad(std::size_t input, std::size_t lo, std::size_t hi, std::size_t canonical, Rng& rng) {
  if (lo < input || lo > hi || hi > canonical) {
    throw ConfigError("resize range [" + std::to_string(lo) + ", " + std::to_string(hi) + "] must lie within [" +
                      std::to_string(input) + ", " + std::to_string(canonical) + "]");
  }
  ResizePadDraw d;
  d.size = static_cast<std::size_t>(rng.integer(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
  const auto room = static_cast<std::int64_t>(canonical - d.size);
  d.top = static_cast<std::size_t>(rng.integer(0, room));
  d.left = static_cast<std::size_t>(rng.integer(0, room));
  return d;
}

Tensor apply_resize_pad(const Tensor& image, const ResizePadDraw& d, std::size_t canonical) {
  const std::size_t C = image.dim(1), H = image.dim(2), W = image.dim(3);
  Tensor out({1, C, canonical, canonical});
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < d.size; ++y) {
      const std::size_t sy = y * H / d.size;
      for (std::size_t x = 0; x < d.size; ++x) {
        const std::size_t sx = x * W / d.size;
        out[(c * canonical + d.top + y) * canonical + d.left + x] = image[(c * H + sy) * W + sx];
      }
    }
  }
  return out;
}

Tensor resize_pad_adjoint(const Tensor& grad, const ResizePadDraw& d, std::size_t input) {
  const std::size_t C = grad.dim(1), S = grad.dim(2);
  std::vector<double> acc(C * input * input, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < d.size; ++y) {
      const std::size_t sy = y * input / d.size;
      for (std::size_t x = 0; x < d.size; ++x) {
        const std::size_t sx = x * input / d.size;
        acc[(c * input + sy) * input + sx] += grad[(c * S + d.top + y) * S + d.left + x];
      }
    }
  }
  Tensor out({1, C, input, input});
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i]);
  return out;
}

Tensor random_resize_pad(const Tensor& x, std::size_t lo, std::size_t hi, Rng& rng) {
  if (x.rank() != 4 || x.dim(2) != x.dim(3)) throw ShapeError("random_resize_pad expects square [N,C,H,W] images");
  std::vector<Tensor> parts;
  for (std::size_t n = 0; n < x.dim(0); ++n) {
    const auto d = draw_resize_pad(x.dim(2), lo, hi, hi, rng);
    parts.push_back(apply_resize_pad(slice_rows(x, n, 1), d, hi));
  }
  return concat_rows<float>(parts);
}

DefendedClassifier::DefendedClassifier(const Model& model, const DefenseSpec& spec) : model_(model), spec_(spec) {
  spec_.validate();
  if (!is_transform(spec.id)) {
    throw ConfigError(std::string(defense_name(spec.id)) + " is a training defense, not an input transform");
  }
}

std::vector<ResizePadDraw> DefendedClassifier::draws(const Tensor& x) const {
  const std::size_t s = x.dim(2), hi = s + spec_.resize_extra;
  const std::size_t row = x.size() / x.dim(0);
  std::vector<ResizePadDraw> out;
  for (std::size_t n = 0; n < x.dim(0); ++n) {
    std::uint64_t key;
    if (spec_.seeded) {
      std::string_view bytes(reinterpret_cast<const char*>(x.ptr() + n * row), row * sizeof(float));
      key = fnv1a(bytes);
    } else {
      key = queries_.fetch_add(1);
    }
    Rng rng(derive_seed(spec_.seed, spec_.seeded ? "rp.input" : "rp.query", key));
    out.push_back(draw_resize_pad(s, s, hi, hi, rng));
  }
  return out;
}

Tensor DefendedClassifier::transform(const Tensor& x) const {
  switch (spec_.id) {
    case DefenseId::JPEG:
      return jpeg_round_trip(x, spec_.quality);
    case DefenseId::BitRed:
      return bit_depth_reduce(x, spec_.bits);
    case DefenseId::RandPad: {
      if (x.dim(2) != x.dim(3)) throw ShapeError("R&P expects square images");
      const auto ds = draws(x);
      std::vector<Tensor> parts;
      for (std::size_t n = 0; n < x.dim(0); ++n) {
        Tensor img = slice_rows(x, n, 1);
        for (auto& v : img.data()) v = std::clamp(v, 0.0f, 1.0f);
        parts.push_back(apply_resize_pad(img, ds[n], x.dim(2) + spec_.resize_extra));
      }
      return concat_rows<float>(parts);
    }
    default:
      break;
  }
  throw ConfigError("not an input transform");
}

Tensor DefendedClassifier::logits(const Tensor& x) const {
  const InputCheck check = spec_.id == DefenseId::RandPad ? InputCheck::AnySpatial : InputCheck::Exact;
  return model_.logits(transform(x), check);
}

Tensor DefendedClassifier::input_gradient(const Tensor& x, const LogitSeed& seed, Tensor* logits_out) const {
  if (spec_.id != DefenseId::RandPad) {
    // Straight-through: gradient at the transformed point, passed back unchanged.
    return ModelClassifier(model_).input_gradient(transform(x), seed, logits_out);
  }
  const auto ds = draws(x);
  const std::size_t s = x.dim(2), S = s + spec_.resize_extra;
  std::vector<Tensor> parts;
  for (std::size_t n = 0; n < x.dim(0); ++n) {
    Tensor img = slice_rows(x, n, 1);
    for (auto& v : img.data()) v = std::clamp(v, 0.0f, 1.0f);
    parts.push_back(apply_resize_pad(img, ds[n], S));
  }
  const Tensor t = concat_rows<float>(parts);
  const Tensor gt = ModelClassifier(model_, InputCheck::AnySpatial).input_gradient(t, seed, logits_out);
  std::vector<Tensor> grads;
  for (std::size_t n = 0; n < x.dim(0); ++n) grads.push_back(resize_pad_adjoint(slice_rows(gt, n, 1), ds[n], s));
  return concat_rows<float>(grads);
}

}  // namespace arbb
