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

#include "arbb/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <type_traits>

#include "arbb/bitkernel.hpp"
#include "arbb/rng.hpp"

namespace arbb {

namespace {

constexpr std::array<float, 3> kCifarMean = {0.4914f, 0.4822f, 0.4465f};
constexpr std::array<float, 3> kCifarStd = {0.2470f, 0.2435f, 0.2616f};

int parse_int(std::string_view s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("invalid integer '" + std::string(s) + "'");
  return v;
}

}  // namespace

std::string_view architecture_name(Architecture a) {
  switch (a) {
    case Architecture::SmallCNN:
      return "smallcnn";
    case Architecture::SmallResNet:
      return "smallresnet";
    case Architecture::ResNet18:
      return "resnet18";
  }
  throw ConfigError("unknown architecture");
}

Architecture parse_architecture(std::string_view name) {
  if (name == "smallcnn") return Architecture::SmallCNN;
  if (name == "smallresnet") return Architecture::SmallResNet;
  if (name == "resnet18") return Architecture::ResNet18;
  throw ConfigError("unknown architecture '" + std::string(name) + "'");
}

std::size_t Width::apply(std::size_t channels) const {
  const auto n = static_cast<std::size_t>(num), d = static_cast<std::size_t>(den);
  return std::max<std::size_t>(1, (channels * n + d - 1) / d);
}

std::string Width::str() const {
  return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den);
}

Width Width::parse(std::string_view text) {
  Width w;
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    w.num = parse_int(text.substr(0, slash));
    w.den = parse_int(text.substr(slash + 1));
  } else {
    w.num = parse_int(text);
  }
  if (w.num <= 0 || w.den <= 0) throw ConfigError("width multiplier must be positive, got '" + std::string(text) + "'");
  return w;
}

void ModelConfig::validate() const {
  if (width.num <= 0 || width.den <= 0) throw ConfigError("width multiplier must be positive");
  if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
  if (in_channels == 0 || resolution == 0 || base_width == 0) throw ConfigError("model dimensions must be positive");
  if (!norm_mean.empty() && norm_mean.size() != in_channels) throw ConfigError("norm_mean size must equal in_channels");
  if (!norm_std.empty() && norm_std.size() != in_channels) throw ConfigError("norm_std size must equal in_channels");
  for (float s : norm_std) {
    if (!(s > 0.0f)) throw ConfigError("norm_std entries must be positive");
  }
  if (!(recu_tau_quantile > 0.0 && recu_tau_quantile <= 1.0)) throw ConfigError("recu_tau_quantile must lie in (0,1]");
  if (recu_fixed_tau && !(*recu_fixed_tau > 0.0)) throw ConfigError("recu tau must be positive");
  if (!class_names.empty() && class_names.size() != num_classes) {
    throw ConfigError("class_names must list num_classes entries");
  }
}

Model::Model(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  params_.reserve(512);
  mean_ = cfg_.norm_mean;
  std_ = cfg_.norm_std;
  if (mean_.empty()) {
    mean_ = cfg_.in_channels == 3 ? std::vector<float>(kCifarMean.begin(), kCifarMean.end())
                                  : std::vector<float>(cfg_.in_channels, 0.5f);
  }
  if (std_.empty()) {
    std_ = cfg_.in_channels == 3 ? std::vector<float>(kCifarStd.begin(), kCifarStd.end())
                                 : std::vector<float>(cfg_.in_channels, 0.25f);
  }

  const bool bin = is_binary(cfg_.scheme);
  const std::size_t stem = cfg_.architecture == Architecture::ResNet18 ? 64 : cfg_.base_width;
  std::size_t c = cfg_.width.apply(stem);
  add_unit("stem", cfg_.in_channels, c, 1, false, false, init_seed);

  if (cfg_.architecture == Architecture::SmallCNN) {
    const std::size_t c1 = cfg_.width.apply(2 * stem), c2 = cfg_.width.apply(4 * stem);
    add_unit("layer1", c, c1, 2, bin, false, init_seed);
    add_unit("layer2", c1, c2, 2, bin, false, init_seed);
    c = c2;
  } else {
    const std::vector<std::size_t> mult = cfg_.architecture == Architecture::ResNet18
                                              ? std::vector<std::size_t>{1, 2, 4, 8}
                                              : std::vector<std::size_t>{1, 2, 4};
    for (std::size_t s = 0; s < mult.size(); ++s) {
      const std::size_t out = cfg_.width.apply(stem * mult[s]);
      for (std::size_t b = 0; b < 2; ++b) {
        for (std::size_t u = 0; u < 2; ++u) {
          const std::size_t stride = (s > 0 && b == 0 && u == 0) ? 2 : 1;
          const std::string prefix =
              "stage" + std::to_string(s + 1) + ".block" + std::to_string(b) + ".unit" + std::to_string(u);
          add_unit(prefix, c, out, stride, bin, true, init_seed);
          c = out;
        }
      }
    }
  }

  Rng rng(derive_seed(init_seed, "head.weight"));
  Tensor hw({cfg_.num_classes, c});
  const double bound = 1.0 / std::sqrt(static_cast<double>(c));
  for (auto& v : hw.data()) v = static_cast<float>(rng.uniform(-bound, bound));
  head_w_ = add_param("head.weight", std::move(hw), true);
  head_b_ = add_param("head.bias", Tensor({cfg_.num_classes}), false);

  stage_resolutions(cfg_.resolution);
}

std::size_t Model::add_param(std::string name, Tensor value, bool decay, bool trainable) {
  if (params_.size() == params_.capacity()) throw ArchitectureError("parameter table capacity exceeded");
  params_.push_back(Parameter{std::move(name), std::move(value), trainable, decay});
  return params_.size() - 1;
}

Model::Norm Model::add_norm(const std::string& prefix, std::size_t channels) {
  Norm n{};
  n.gamma = add_param(prefix + ".gamma", Tensor({channels}, 1.0f), false);
  n.beta = add_param(prefix + ".beta", Tensor({channels}), false);
  buffers_.push_back(ops::BatchNormBuffers{Tensor({channels}), Tensor({channels}, 1.0f)});
  buffer_names_.push_back(prefix);
  n.buffer = buffers_.size() - 1;
  return n;
}

Model::Act Model::add_act(const std::string& prefix, std::size_t channels) {
  Act a;
  a.kind = scheme_rules(cfg_.scheme).activation;
  if (a.kind == ActivationKind::PReLU || a.kind == ActivationKind::RPReLU) {
    a.slope = static_cast<long>(add_param(prefix + ".slope", Tensor({channels}, 0.25f), false));
  }
  if (a.kind == ActivationKind::RPReLU) {
    a.shift_in = static_cast<long>(add_param(prefix + ".shift_in", Tensor({channels}), false));
    a.shift_out = static_cast<long>(add_param(prefix + ".shift_out", Tensor({channels}), false));
  }
  return a;
}

void Model::add_unit(const std::string& prefix, std::size_t in, std::size_t out, std::size_t stride, bool binary,
                     bool residual, std::uint64_t seed) {
  Unit u;
  u.binary = binary;
  u.stride = stride;
  u.pad = 1;
  const std::string wname = prefix + ".conv.weight";
  Rng rng(derive_seed(seed, wname));
  Tensor w({out, in, 3, 3});
  const double sd = std::sqrt(2.0 / static_cast<double>(in * 9));
  for (auto& v : w.data()) v = static_cast<float>(rng.normal(0.0, sd));
  const auto& rules = scheme_rules(cfg_.scheme);
  if (binary && rules.scale == ScaleRule::Learnable) {
    Tensor gamma = weight_scale(SchemeId::XNOR, w);
    u.gamma = static_cast<long>(add_param(prefix + ".scale.gamma", std::move(gamma), false));
  }
  u.weight = add_param(wname, std::move(w), true);
  if (binary && rules.activation_shift) {
    u.beta = static_cast<long>(add_param(prefix + ".rsign.beta", Tensor({in}), false));
  }
  u.norm = add_norm(prefix + ".bn", out);
  if (residual) {
    u.shortcut.present = true;
    if (stride != 1 || in != out) {
      u.shortcut.downsample = true;
      const std::string sname = prefix + ".shortcut.conv.weight";
      Rng srng(derive_seed(seed, sname));
      Tensor sw({out, in, 1, 1});
      const double ssd = std::sqrt(2.0 / static_cast<double>(in));
      for (auto& v : sw.data()) v = static_cast<float>(srng.normal(0.0, ssd));
      u.shortcut.conv = static_cast<long>(add_param(sname, std::move(sw), true));
      u.shortcut.norm = add_norm(prefix + ".shortcut.bn", out);
    }
  }
  u.act = add_act(prefix + ".act", out);
  if (stride == 2) stride2_units_.push_back(units_.size());
  units_.push_back(u);
}

std::vector<std::size_t> Model::stage_resolutions(std::size_t resolution) const {
  std::vector<std::size_t> out{resolution};
  std::size_t r = resolution;
  for (const auto& u : units_) {
    if (u.stride == 1) continue;
    if (u.shortcut.downsample && r % 2 != 0) {
      throw ConfigError("stride-2 residual unit meets odd spatial size " + std::to_string(r));
    }
    r = conv_out_size(r, 3, u.stride, u.pad);
    out.push_back(r);
  }
  return out;
}

Parameter& Model::parameter(std::string_view name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw ConfigError("no parameter named '" + std::string(name) + "'");
}

const Parameter& Model::parameter(std::string_view name) const {
  return const_cast<Model*>(this)->parameter(name);
}

std::vector<Model::NamedBuffers> Model::buffers() {
  std::vector<NamedBuffers> out;
  for (std::size_t i = 0; i < buffers_.size(); ++i) out.push_back({buffer_names_[i], &buffers_[i]});
  return out;
}

std::vector<std::pair<std::string, const ops::BatchNormBuffers*>> Model::buffers() const {
  std::vector<std::pair<std::string, const ops::BatchNormBuffers*>> out;
  for (std::size_t i = 0; i < buffers_.size(); ++i) out.emplace_back(buffer_names_[i], &buffers_[i]);
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.trainable ? p.value.size() : 0;
  return n;
}

std::size_t Model::binary_conv_count() const {
  return static_cast<std::size_t>(std::count_if(units_.begin(), units_.end(), [](const Unit& u) { return u.binary; }));
}

template <class T>
typename Graph<T>::Var Model::norm_forward(Graph<T>& g, const Norm& n, typename Graph<T>::Var x) const {
  return ops::batch_norm(g, x, g.parameter(params_[n.gamma]), g.parameter(params_[n.beta]), buffers_[n.buffer]);
}

template <class T>
typename Graph<T>::Var Model::act_forward(Graph<T>& g, const Act& a, typename Graph<T>::Var x) const {
  switch (a.kind) {
    case ActivationKind::HardTanh:
      return ops::hardtanh(g, x);
    case ActivationKind::PReLU:
      return ops::prelu(g, x, g.parameter(params_[static_cast<std::size_t>(a.slope)]));
    case ActivationKind::RPReLU: {
      auto h = ops::channel_bias(g, x, g.parameter(params_[static_cast<std::size_t>(a.shift_in)]), -1.0);
      h = ops::prelu(g, h, g.parameter(params_[static_cast<std::size_t>(a.slope)]));
      return ops::channel_bias(g, h, g.parameter(params_[static_cast<std::size_t>(a.shift_out)]), 1.0);
    }
  }
  throw ConfigError("unknown activation");
}

template <class T>
typename Graph<T>::Var Model::unit_forward(Graph<T>& g, const Unit& u, typename Graph<T>::Var x, bool packed) const {
  using Var = typename Graph<T>::Var;
  const ops::Conv2dGeometry geo{u.stride, u.pad};
  const Parameter& wp = params_[u.weight];
  Var y;
  if (!u.binary) {
    y = ops::conv2d(g, x, g.parameter(wp), std::nullopt, geo);
  } else {
    const auto& rules = scheme_rules(cfg_.scheme);
    Var a = x;
    if (u.beta >= 0) a = ops::channel_bias(g, a, g.parameter(params_[static_cast<std::size_t>(u.beta)]), -1.0);
    double tau = 1.0;
    if (rules.weight_surrogate == Surrogate::ClampPass || rules.scale == ScaleRule::ClampedChannelMeanAbs) {
      SchemeState st;
      st.tau_quantile = cfg_.recu_tau_quantile;
      st.fixed_tau = cfg_.recu_fixed_tau;
      tau = recu_tau(wp.value, st);
    }
    Var ab = ops::sign_binarize(g, a, rules.activation_surrogate);
    Var wv = g.parameter(wp);
    std::optional<Var> scale;
    switch (rules.scale) {
      case ScaleRule::ChannelMeanAbs:
      case ScaleRule::LayerMeanAbs:
      case ScaleRule::ClampedChannelMeanAbs:
        scale = ops::weight_scale_of(g, wv, rules.scale, tau);
        break;
      case ScaleRule::Learnable:
        scale = g.parameter(params_[static_cast<std::size_t>(u.gamma)]);
        break;
      case ScaleRule::None:
      case ScaleRule::One:
        break;
    }
    bool done = false;
    if constexpr (std::is_same_v<T, float>) {
      if (packed && !g.grad_enabled() && !g.smooth_surrogate()) {
        const Tensor wb = sign_forward(wp.value);
        const float one = 1.0f;
        std::span<const float> s = scale ? g.value(*scale).data() : std::span<const float>(&one, 1);
        y = g.constant(packed_conv2d(g.value(ab), pack_rows(wb), wb.dim(2), wb.dim(3), u.stride, u.pad, s));
        done = true;
      }
    }
    if (!done) {
      Var wb = ops::sign_binarize(g, wv, rules.weight_surrogate, tau);
      y = ops::conv2d(g, ab, wb, std::nullopt, geo);
      if (scale) y = ops::channel_scale(g, y, *scale);
    }
  }
  y = norm_forward(g, u.norm, y);
  if (u.shortcut.present) {
    Var s = x;
    if (u.shortcut.downsample) {
      // Odd maps only reach here through AnySpatial inputs (R&P padding);
      // they are subsampled so the shortcut matches the ceil(H/2) main path.
      const auto& sv = g.value(s);
      const bool odd = sv.dim(2) % 2 != 0 || sv.dim(3) % 2 != 0;
      if (u.stride == 2 && !odd) s = ops::avg_pool2d(g, s, 2, 2);
      const std::size_t stride = u.stride == 2 && odd ? 2 : 1;
      s = ops::conv2d(g, s, g.parameter(params_[static_cast<std::size_t>(u.shortcut.conv)]), std::nullopt, {stride, 0});
      s = norm_forward(g, u.shortcut.norm, s);
    }
    y = ops::add(g, y, s);
  }
  return act_forward(g, u.act, y);
}

template <class T>
ForwardFeatures<T> Model::run(Graph<T>& g, typename Graph<T>::Var x, InputCheck check, bool packed) const {
  const auto& xs = g.value(x).shape();
  const bool ok = xs.size() == 4 && xs[1] == cfg_.in_channels &&
                  (check == InputCheck::AnySpatial || (xs[2] == cfg_.resolution && xs[3] == cfg_.resolution));
  if (!ok) {
    throw ShapeError("model expects input [N," + std::to_string(cfg_.in_channels) + "," +
                     std::to_string(cfg_.resolution) + "," + std::to_string(cfg_.resolution) + "], got " +
                     to_string(xs));
  }
  auto h = ops::normalize_input(g, x, mean_, std_);
  for (const auto& u : units_) h = unit_forward(g, u, h, packed);
  ForwardFeatures<T> out;
  out.features = h;
  auto pooled = ops::global_avg_pool(g, h);
  out.logits = ops::linear(g, pooled, g.parameter(params_[head_w_]), g.parameter(params_[head_b_]));
  return out;
}

template <class T>
ForwardFeatures<T> Model::forward_features(Graph<T>& g, typename Graph<T>::Var x, InputCheck check) const {
  return run(g, x, check, false);
}

Tensor Model::logits(const Tensor& x, InputCheck check) const {
  Graph<float> g(GraphMode::Eval);
  g.set_grad_enabled(false);
  auto xv = g.constant(x);
  return g.value(run(g, xv, check, packed_).logits);
}

std::vector<int> Model::predict(const Tensor& x) const {
  const Tensor z = logits(x);
  const std::size_t N = z.dim(0), K = z.dim(1);
  std::vector<int> out(N);
  for (std::size_t n = 0; n < N; ++n) {
    const float* row = z.ptr() + n * K;
    out[n] = static_cast<int>(std::max_element(row, row + K) - row);
  }
  return out;
}

template ForwardFeatures<float> Model::forward_features<float>(Graph<float>&, Graph<float>::Var, InputCheck) const;
template ForwardFeatures<double> Model::forward_features<double>(Graph<double>&, Graph<double>::Var,
                                                                InputCheck) const;

Model build_model(const ModelConfig& cfg, std::uint64_t init_seed) { return Model(cfg, init_seed); }

void copy_parameters(const Model& from, Model& to) {
  for (auto& p : to.parameters()) {
    const Parameter& src = from.parameter(p.name);
    if (src.value.shape() != p.value.shape()) throw ShapeError("parameter shape mismatch for " + p.name);
    p.value = src.value;
  }
  auto dst = to.buffers();
  auto src = from.buffers();
  if (dst.size() != src.size()) throw ShapeError("buffer count mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) *dst[i].buffers = *src[i].second;
}

}  // namespace arbb
