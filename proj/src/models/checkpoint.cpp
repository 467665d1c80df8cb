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

#include "arbb/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"

namespace arbb {

namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[off + static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

const char* surrogate_key(Surrogate s) {
  switch (s) {
    case Surrogate::None:
      return "none";
    case Surrogate::SteClip:
      return "ste_clip";
    case Surrogate::Polynomial:
      return "polynomial";
    case Surrogate::ClampPass:
      return "clamp_pass";
  }
  return "?";
}

const char* scale_key(ScaleRule s) {
  switch (s) {
    case ScaleRule::None:
      return "none";
    case ScaleRule::One:
      return "one";
    case ScaleRule::ChannelMeanAbs:
      return "channel_mean_abs";
    case ScaleRule::LayerMeanAbs:
      return "layer_mean_abs";
    case ScaleRule::Learnable:
      return "learnable";
    case ScaleRule::ClampedChannelMeanAbs:
      return "clamped_channel_mean_abs";
  }
  return "?";
}

const char* activation_key(ActivationKind a) {
  switch (a) {
    case ActivationKind::HardTanh:
      return "hardtanh";
    case ActivationKind::PReLU:
      return "prelu";
    case ActivationKind::RPReLU:
      return "rprelu";
  }
  return "?";
}

struct Entry {
  std::string name;
  const Tensor* tensor;
};

std::vector<Entry> tensor_entries(const Model& m) {
  std::vector<Entry> out;
  for (const auto& p : m.parameters()) out.push_back({p.name, &p.value});
  for (const auto& [name, buf] : m.buffers()) {
    out.push_back({name + ".running_mean", &buf->running_mean});
    out.push_back({name + ".running_var", &buf->running_var});
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Model& model) {
  const auto& cfg = model.config();
  const auto& rules = scheme_rules(cfg.scheme);
  json meta;
  meta["architecture"] = std::string(architecture_name(cfg.architecture));
  meta["scheme"] = std::string(scheme_name(cfg.scheme));
  meta["width"] = cfg.width.str();
  meta["num_classes"] = cfg.num_classes;
  meta["in_channels"] = cfg.in_channels;
  meta["resolution"] = cfg.resolution;
  meta["base_width"] = cfg.base_width;
  meta["norm_mean"] = cfg.norm_mean;
  meta["norm_std"] = cfg.norm_std;
  meta["recu_tau_quantile"] = cfg.recu_tau_quantile;
  meta["recu_fixed_tau"] = cfg.recu_fixed_tau ? json(*cfg.recu_fixed_tau) : json(nullptr);
  meta["class_names"] = cfg.class_names;
  meta["scheme_rules"] = {{"activation_surrogate", surrogate_key(rules.activation_surrogate)},
                          {"weight_surrogate", surrogate_key(rules.weight_surrogate)},
                          {"scale", scale_key(rules.scale)},
                          {"activation_shift", rules.activation_shift},
                          {"weight_clamp", rules.weight_clamp},
                          {"activation", activation_key(rules.activation)}};
  json tensors = json::array();
  const auto entries = tensor_entries(model);
  for (const auto& e : entries) tensors.push_back({{"name", e.name}, {"shape", e.tensor->shape()}});
  meta["tensors"] = tensors;

  const std::string text = meta.dump();
  std::vector<std::uint8_t> out{'A', 'R', 'B', 'B'};
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& e : entries) {
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(e.tensor->ptr());
    out.insert(out.end(), bytes, bytes + e.tensor->size() * sizeof(float));
  }
  return out;
}

Model deserialize_checkpoint(std::span<const std::uint8_t> b) {
  if (b.size() < 4) throw FormatError(b.size(), "truncated checkpoint: missing magic");
  if (std::memcmp(b.data(), "ARBB", 4) != 0) throw FormatError(0, "bad magic, expected \"ARBB\"");
  if (b.size() < 8) throw FormatError(b.size(), "truncated checkpoint: missing version");
  const std::uint32_t version = get_u32(b, 4);
  if (version != kCheckpointVersion) {
    throw FormatError(4, "unsupported checkpoint version " + std::to_string(version) + " (this build reads version " +
                             std::to_string(kCheckpointVersion) + ")");
  }
  if (b.size() < 12) throw FormatError(b.size(), "truncated checkpoint: missing metadata length");
  const std::size_t len = get_u32(b, 8);
  if (b.size() < 12 + len) throw FormatError(b.size(), "truncated checkpoint: metadata declares " +
                                                            std::to_string(len) + " bytes");
  json meta;
  try {
    meta = json::parse(b.begin() + 12, b.begin() + 12 + static_cast<std::ptrdiff_t>(len));
  } catch (const json::exception& e) {
    throw FormatError(12, std::string("metadata is not valid JSON: ") + e.what());
  }

  ModelConfig cfg;
  try {
    cfg.architecture = parse_architecture(meta.at("architecture").get<std::string>());
    cfg.scheme = parse_scheme(meta.at("scheme").get<std::string>());
    cfg.width = Width::parse(meta.at("width").get<std::string>());
    cfg.num_classes = meta.at("num_classes").get<std::size_t>();
    cfg.in_channels = meta.at("in_channels").get<std::size_t>();
    cfg.resolution = meta.at("resolution").get<std::size_t>();
    cfg.base_width = meta.at("base_width").get<std::size_t>();
    cfg.norm_mean = meta.at("norm_mean").get<std::vector<float>>();
    cfg.norm_std = meta.at("norm_std").get<std::vector<float>>();
    cfg.recu_tau_quantile = meta.at("recu_tau_quantile").get<double>();
    if (!meta.at("recu_fixed_tau").is_null()) cfg.recu_fixed_tau = meta.at("recu_fixed_tau").get<double>();
    cfg.class_names = meta.at("class_names").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw FormatError(12, std::string("incomplete metadata: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(12, std::string("invalid metadata: ") + e.what());
  }

  Model model(cfg);
  std::vector<std::pair<std::string, Tensor*>> slots;
  for (auto& p : model.parameters()) slots.emplace_back(p.name, &p.value);
  for (auto& nb : model.buffers()) {
    slots.emplace_back(nb.name + ".running_mean", &nb.buffers->running_mean);
    slots.emplace_back(nb.name + ".running_var", &nb.buffers->running_var);
  }
  const auto& listed = meta.at("tensors");
  if (!listed.is_array() || listed.size() != slots.size()) {
    throw FormatError(12, "metadata lists " + std::to_string(listed.size()) + " tensors, architecture has " +
                              std::to_string(slots.size()));
  }
  std::size_t off = 12 + len;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto name = listed[i].at("name").get<std::string>();
    const auto shape = listed[i].at("shape").get<Shape>();
    if (name != slots[i].first || shape != slots[i].second->shape()) {
      throw FormatError(12, "tensor " + std::to_string(i) + " is '" + name + "' " + to_string(shape) + ", expected '" +
                                slots[i].first + "' " + to_string(slots[i].second->shape()));
    }
    const std::size_t bytes = slots[i].second->size() * sizeof(float);
    if (b.size() < off + bytes) throw FormatError(b.size(), "truncated checkpoint payload in tensor '" + name + "'");
    std::memcpy(slots[i].second->ptr(), b.data() + off, bytes);
    off += bytes;
  }
  if (off != b.size()) throw FormatError(off, std::to_string(b.size() - off) + " trailing bytes after payload");
  return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(model);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write checkpoint " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw ConfigError("failed writing checkpoint " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace arbb
