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

#include "arbb/binarize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace arbb {

namespace {

using enum Surrogate;

// The scheme table. Activation function after each residual add is part of
// the row so that the model builder never branches on SchemeId directly.
constexpr std::array<SchemeRules, 8> kTable = {{
    {SchemeId::FP32, "FP32", None, None, ScaleRule::None, false, false, ActivationKind::PReLU},
    {SchemeId::BNN, "BNN", SteClip, SteClip, ScaleRule::One, false, false, ActivationKind::HardTanh},
    {SchemeId::XNOR, "XNOR", SteClip, SteClip, ScaleRule::ChannelMeanAbs, false, false, ActivationKind::HardTanh},
    {SchemeId::DoReFa, "DoReFa", SteClip, SteClip, ScaleRule::LayerMeanAbs, false, false, ActivationKind::HardTanh},
    {SchemeId::BiReal, "BiReal", Polynomial, SteClip, ScaleRule::One, false, false, ActivationKind::PReLU},
    {SchemeId::XNORpp, "XNORpp", SteClip, SteClip, ScaleRule::Learnable, false, false, ActivationKind::HardTanh},
    {SchemeId::ReActNet, "ReActNet", Polynomial, SteClip, ScaleRule::One, true, false, ActivationKind::RPReLU},
    {SchemeId::ReCU, "ReCU", SteClip, ClampPass, ScaleRule::ClampedChannelMeanAbs, false, true, ActivationKind::PReLU},
}};

std::size_t channel_axis(const Tensor& t) { return t.rank() >= 2 ? 1 : 0; }

}  // namespace

const SchemeRules& scheme_rules(SchemeId id) {
  for (const auto& row : kTable) {
    if (row.id == id) return row;
  }
  throw ConfigError("unknown binarization scheme id " + std::to_string(static_cast<int>(id)));
}

std::string_view scheme_name(SchemeId id) { return scheme_rules(id).name; }

SchemeId parse_scheme(std::string_view name) {
  for (const auto& row : kTable) {
    if (row.name == name) return row.id;
  }
  // Accept the common spellings too.
  if (name == "XNOR++" || name == "xnorpp" || name == "XNOR-Net++") return SchemeId::XNORpp;
  if (name == "Bi-Real" || name == "bireal") return SchemeId::BiReal;
  if (name == "fp32") return SchemeId::FP32;
  if (name == "bnn") return SchemeId::BNN;
  if (name == "xnor" || name == "XNOR-Net") return SchemeId::XNOR;
  if (name == "dorefa") return SchemeId::DoReFa;
  if (name == "reactnet") return SchemeId::ReActNet;
  if (name == "recu") return SchemeId::ReCU;
  throw ConfigError("unknown binarization scheme '" + std::string(name) + "'");
}

Tensor sign_forward(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = sign_pm1(x[i]);
  return out;
}

double recu_tau(const Tensor& w, const SchemeState& state) {
  if (state.fixed_tau) {
    if (!(*state.fixed_tau > 0.0)) throw ConfigError("ReCU tau must be positive");
    return *state.fixed_tau;
  }
  if (w.empty()) throw ShapeError("ReCU tau of an empty weight");
  if (!(state.tau_quantile > 0.0 && state.tau_quantile <= 1.0)) {
    throw ConfigError("ReCU tau quantile must lie in (0, 1]");
  }
  std::vector<double> mags(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) mags[i] = std::abs(static_cast<double>(w[i]));
  std::sort(mags.begin(), mags.end());
  // Linear interpolation between order statistics.
  const double pos = state.tau_quantile * static_cast<double>(mags.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, mags.size() - 1);
  const double tau = mags[lo] + (pos - static_cast<double>(lo)) * (mags[hi] - mags[lo]);
  return tau > 0.0 ? tau : std::numeric_limits<double>::min();
}

Tensor weight_scale(SchemeId scheme, const Tensor& w, const SchemeState& state) {
  if (w.empty() || w.rank() == 0) throw ShapeError("weight_scale of an empty weight");
  const auto& rules = scheme_rules(scheme);
  const std::size_t out = w.dim(0);
  const std::size_t per = w.size() / out;
  switch (rules.scale) {
    case ScaleRule::None:
    case ScaleRule::One:
      return Tensor({1}, 1.0f);
    case ScaleRule::LayerMeanAbs: {
      double s = 0.0;
      for (auto v : w.data()) s += std::abs(static_cast<double>(v));
      return Tensor({1}, static_cast<float>(s / static_cast<double>(w.size())));
    }
    case ScaleRule::ChannelMeanAbs:
    case ScaleRule::ClampedChannelMeanAbs: {
      const double tau = rules.scale == ScaleRule::ClampedChannelMeanAbs ? recu_tau(w, state)
                                                                         : std::numeric_limits<double>::infinity();
      Tensor alpha({out});
      for (std::size_t o = 0; o < out; ++o) {
        double s = 0.0;
        for (std::size_t i = 0; i < per; ++i) {
          s += std::min(std::abs(static_cast<double>(w[o * per + i])), tau);
        }
        alpha[o] = static_cast<float>(s / static_cast<double>(per));
      }
      return alpha;
    }
    case ScaleRule::Learnable:
      if (state.gamma.size() != out) {
        throw ConfigError("XNOR++ gamma has " + std::to_string(state.gamma.size()) + " entries for " +
                          std::to_string(out) + " output channels");
      }
      return state.gamma.reshaped({out});
  }
  throw ConfigError("unhandled scale rule");
}

BinarizedLayer binarize_layer_forward(SchemeId scheme, const SchemeState& state, const Tensor& w, const Tensor& a) {
  const auto& rules = scheme_rules(scheme);
  if (!is_binary(scheme)) throw ConfigError("binarize_layer_forward called with FP32 scheme");
  BinarizedLayer out;

  if (rules.weight_clamp) {
    const double tau = recu_tau(w, state);
    Tensor clamped(w.shape());
    for (std::size_t i = 0; i < w.size(); ++i) {
      clamped[i] = static_cast<float>(std::clamp(static_cast<double>(w[i]), -tau, tau));
    }
    out.weights = sign_forward(clamped);
  } else {
    out.weights = sign_forward(w);
  }

  if (rules.activation_shift && !state.beta.empty()) {
    const std::size_t axis = channel_axis(a);
    const std::size_t channels = a.dim(axis);
    if (state.beta.size() != channels) {
      throw ConfigError("RSign beta has " + std::to_string(state.beta.size()) + " entries for " +
                        std::to_string(channels) + " channels");
    }
    std::size_t inner = 1;
    for (std::size_t d = axis + 1; d < a.rank(); ++d) inner *= a.dim(d);
    Tensor shifted(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::size_t c = (i / inner) % channels;
      shifted[i] = a[i] - state.beta[c];
    }
    out.activations = sign_forward(shifted);
  } else {
    out.activations = sign_forward(a);
  }

  out.scale = weight_scale(scheme, w, state);
  return out;
}

double surrogate_value(Surrogate rule, double x, double tau) {
  switch (rule) {
    case Surrogate::None:
      return x;
    case Surrogate::SteClip:
      return std::clamp(x, -1.0, 1.0);
    case Surrogate::Polynomial:
      if (x < -1.0) return -1.0;
      if (x < 0.0) return 2.0 * x + x * x;
      if (x < 1.0) return 2.0 * x - x * x;
      return 1.0;
    case Surrogate::ClampPass:
      return std::clamp(x, -tau, tau);
  }
  throw ConfigError("unknown surrogate rule");
}

double surrogate_derivative(Surrogate rule, double x, double tau) {
  switch (rule) {
    case Surrogate::None:
      return 1.0;
    case Surrogate::SteClip:
      return std::abs(x) <= 1.0 ? 1.0 : 0.0;
    case Surrogate::Polynomial:
      if (x >= -1.0 && x < 0.0) return 2.0 + 2.0 * x;
      if (x >= 0.0 && x < 1.0) return 2.0 - 2.0 * x;
      return 0.0;
    case Surrogate::ClampPass:
      return std::abs(x) <= tau ? 1.0 : 0.0;
  }
  throw ConfigError("unknown surrogate rule");
}

Tensor surrogate_backward(SchemeId scheme, Role role, const Tensor& x, const Tensor& upstream, double tau) {
  const auto& rules = scheme_rules(scheme);
  const Surrogate rule = role == Role::Activation ? rules.activation_surrogate : rules.weight_surrogate;
  if (rule == Surrogate::None) {
    throw ConfigError(std::string("scheme ") + std::string(rules.name) + " has no sign node to differentiate");
  }
  if (x.shape() != upstream.shape()) throw ShapeError("surrogate_backward shape mismatch");
  Tensor grad(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    grad[i] = static_cast<float>(surrogate_derivative(rule, x[i], tau) * static_cast<double>(upstream[i]));
  }
  return grad;
}

}  // namespace arbb
