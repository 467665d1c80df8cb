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

#ifndef ARBB_BINARIZE_HPP
#define ARBB_BINARIZE_HPP

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "arbb/tensor.hpp"

namespace arbb {

enum class SchemeId { FP32, BNN, XNOR, DoReFa, BiReal, XNORpp, ReActNet, ReCU };

inline constexpr std::array<SchemeId, 8> kAllSchemes = {
    SchemeId::FP32,   SchemeId::BNN,    SchemeId::XNOR,     SchemeId::DoReFa,
    SchemeId::BiReal, SchemeId::XNORpp, SchemeId::ReActNet, SchemeId::ReCU};

inline constexpr std::array<SchemeId, 7> kBinarySchemes = {
    SchemeId::BNN,    SchemeId::XNOR,     SchemeId::DoReFa, SchemeId::BiReal,
    SchemeId::XNORpp, SchemeId::ReActNet, SchemeId::ReCU};

// Backward rule for a sign node, written as the derivative of a smooth
// stand-in for sign(). The same stand-in is used as the forward when a
// graph runs in surrogate-smoothed mode.
enum class Surrogate {
  None,
  SteClip,     // d = 1{|x| <= 1}, stand-in clamp(x, -1, 1)
  Polynomial,  // d = 2+2x on [-1,0), 2-2x on [0,1), 0 elsewhere
  ClampPass,   // d = 1{|x| <= tau}, stand-in clamp(x, -tau, tau)
};

enum class ScaleRule {
  None,                   // no scale applied
  One,                    // alpha = 1
  ChannelMeanAbs,         // alpha_c = mean |w_c|
  LayerMeanAbs,           // alpha = mean |w|
  Learnable,              // Gamma, one per output channel
  ClampedChannelMeanAbs,  // alpha_c = mean |clamp(w_c, -tau, tau)|
};

enum class ActivationKind { HardTanh, PReLU, RPReLU };

enum class Role { Activation, Weight };

// One row of the scheme table. All per-scheme behaviour is read from here.
struct SchemeRules {
  SchemeId id;
  std::string_view name;
  Surrogate activation_surrogate;
  Surrogate weight_surrogate;
  ScaleRule scale;
  bool activation_shift;  // RSign: sign(a - beta)
  bool weight_clamp;      // clamp w to [-tau, tau] before sign
  ActivationKind activation;
};

const SchemeRules& scheme_rules(SchemeId id);
std::string_view scheme_name(SchemeId id);
SchemeId parse_scheme(std::string_view name);
inline bool is_binary(SchemeId id) { return id != SchemeId::FP32; }

// Per-layer scheme parameters. Tensors that a scheme does not use stay empty.
struct SchemeState {
  Tensor gamma;  // XNOR++ learnable scale, [out_channels]
  Tensor beta;   // ReActNet RSign shift, [in_channels]
  double tau_quantile = 0.99;
  std::optional<double> fixed_tau;  // ReCU clamp bound; quantile of |w| when unset
};

// sign with sign(0) = +1.
template <class T>
inline T sign_pm1(T x) {
  return x >= T{0} ? T{1} : T{-1};
}

Tensor sign_forward(const Tensor& x);

// Shape [O] for per-channel rules and [1] for a layer scalar.
Tensor weight_scale(SchemeId scheme, const Tensor& w, const SchemeState& state = {});

// ReCU clamp bound: fixed_tau if set, else the tau_quantile quantile of |w|.
double recu_tau(const Tensor& w, const SchemeState& state);

struct BinarizedLayer {
  Tensor weights;      // +-1
  Tensor activations;  // +-1
  Tensor scale;        // as weight_scale
};

BinarizedLayer binarize_layer_forward(SchemeId scheme, const SchemeState& state, const Tensor& w, const Tensor& a);

double surrogate_value(Surrogate rule, double x, double tau = 1.0);
double surrogate_derivative(Surrogate rule, double x, double tau = 1.0);

// Surrogate gradient of sign() at the saved pre-binarization values x.
Tensor surrogate_backward(SchemeId scheme, Role role, const Tensor& x, const Tensor& upstream, double tau = 1.0);

}  // namespace arbb

#endif  // ARBB_BINARIZE_HPP
