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

#include "arbb/experiment.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "arbb/rng.hpp"
#include "json.hpp"

namespace arbb {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so that
// leftovers can be reported as unknown.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <class T>
  bool get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return false;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(key_path(key) + " has the wrong type");
    }
    return true;
  }

  template <class T>
  bool get(const char* key, std::optional<T>& out) {
    T v{};
    if (!get(key, v)) return false;
    out = v;
    return true;
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown key " + key_path(k.c_str()));
    }
  }

  std::string key_path(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
auto with_key(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

ModelBlock parse_model(const json& j, const std::string& path) {
  Reader r(j, path);
  ModelBlock m;
  r.get("name", m.name);
  if (m.name.empty()) throw ConfigError(r.key_path("name") + " must not be empty");
  std::string s;
  if (r.get("architecture", s)) m.config.architecture = with_key(r.key_path("architecture"), [&] { return parse_architecture(s); });
  if (r.get("scheme", s)) m.config.scheme = with_key(r.key_path("scheme"), [&] { return parse_scheme(s); });
  if (const json* w = r.sub("width")) {
    if (w->is_string()) {
      m.config.width = with_key(r.key_path("width"), [&] { return Width::parse(w->get<std::string>()); });
    } else if (w->is_number_integer() && w->get<int>() > 0) {
      m.config.width = Width{w->get<int>(), 1};
    } else {
      throw ConfigError(r.key_path("width") + " must be a positive integer or a fraction string");
    }
  }
  r.get("num_classes", m.num_classes);
  r.get("in_channels", m.in_channels);
  r.get("resolution", m.resolution);
  r.get("base_width", m.config.base_width);
  r.get("norm_mean", m.config.norm_mean);
  r.get("norm_std", m.config.norm_std);
  r.get("recu_tau_quantile", m.config.recu_tau_quantile);
  r.get("recu_fixed_tau", m.config.recu_fixed_tau);
  std::string ck;
  if (r.get("checkpoint", ck)) m.checkpoint = ck;
  r.finish();
  return m;
}

TrainConfig parse_train(const json& j) {
  Reader r(j, "train");
  TrainConfig t;
  std::string s;
  r.get("epochs", t.epochs);
  if (r.get("optimizer", s)) t.optimizer = with_key("train.optimizer", [&] { return parse_optimizer(s); });
  if (r.get("schedule", s)) t.schedule = with_key("train.schedule", [&] { return parse_schedule(s); });
  r.get("lr", t.lr);
  r.get("weight_decay", t.weight_decay);
  r.get("batch_size", t.batch_size);
  r.get("milestones", t.milestones);
  r.get("lr_decay", t.lr_decay);
  r.get("warmup_epochs", t.warmup_epochs);
  r.get("momentum", t.momentum);
  r.get("augment", t.augment);
  r.get("crop_pad", t.crop_pad);
  r.finish();
  with_key("train", [&] { t.validate(); });
  return t;
}

AttackSpec parse_attack(const json& j, const std::string& path) {
  Reader r(j, path);
  std::string method;
  if (!r.get("method", method)) throw ConfigError(r.key_path("method") + " is required");
  const AttackId id = with_key(r.key_path("method"), [&] { return arbb::parse_attack(method); });
  NormKind norm = NormKind::Linf;
  std::string ns;
  if (r.get("norm", ns)) norm = with_key(r.key_path("norm"), [&] { return parse_norm(ns); });
  AttackSpec a = AttackSpec::defaults(id, norm);
  r.get("epsilon", a.epsilon);
  r.get("iterations", a.iterations);
  r.get("budget", a.budget);
  r.get("step_size", a.step_size);
  r.get("random_start", a.random_start);
  r.get("overshoot", a.overshoot);
  r.get("cw_search_steps", a.cw_search_steps);
  r.get("cw_initial_c", a.cw_initial_c);
  r.get("cw_lr", a.cw_lr);
  r.get("cw_kappa", a.cw_kappa);
  r.get("spsa_samples", a.spsa_samples);
  r.get("spsa_delta", a.spsa_delta);
  r.get("nattack_population", a.nattack_population);
  r.get("nattack_sigma", a.nattack_sigma);
  r.get("nattack_lr", a.nattack_lr);
  r.get("square_p_init", a.square_p_init);
  r.get("init_trials", a.init_trials);
  r.get("boundary_spherical_step", a.boundary_spherical_step);
  r.get("boundary_source_step", a.boundary_source_step);
  r.get("evo_reduced_side", a.evo_reduced_side);
  r.get("evo_ccov", a.evo_ccov);
  r.get("evo_cc", a.evo_cc);
  r.get("evo_mu", a.evo_mu);
  r.get("evo_sigma", a.evo_sigma);
  r.get("sini_scales", a.sini_scales);
  r.get("sini_momentum", a.sini_momentum);
  r.finish();
  with_key(path, [&] { a.validate(); });
  return a;
}

DefenseSpec parse_defense_block(const json& j) {
  Reader r(j, "defense");
  DefenseSpec d;
  std::string s;
  if (!r.get("method", s)) throw ConfigError("defense.method is required");
  d.id = with_key("defense.method", [&] { return parse_defense(s); });
  r.get("epsilon", d.epsilon);
  r.get("steps", d.steps);
  r.get("step_size", d.step_size);
  r.get("beta", d.beta);
  r.get("quality", d.quality);
  r.get("bits", d.bits);
  r.get("resize_extra", d.resize_extra);
  r.get("seeded", d.seeded);
  r.finish();
  with_key("defense", [&] { d.validate(); });
  return d;
}

DatasetBlock parse_dataset(const json& j) {
  Reader r(j, "dataset");
  DatasetBlock d;
  std::string s;
  r.get("source", d.source);
  if (d.source != "synthetic" && d.source != "cifar10" && d.source != "blob") {
    throw ConfigError("dataset.source must be synthetic, cifar10 or blob, got '" + d.source + "'");
  }
  if (r.get("path", s)) d.path = s;
  if (r.get("train_path", s)) d.train_path = s;
  r.get("train_limit", d.train_limit);
  r.get("subsample", d.subsample);
  r.get("train_per_class", d.train_per_class);
  r.get("test_per_class", d.test_per_class);
  if (const json* sj = r.sub("synthetic")) {
    Reader sr(*sj, "dataset.synthetic");
    sr.get("num_classes", d.synth.num_classes);
    sr.get("channels", d.synth.channels);
    sr.get("height", d.synth.height);
    sr.get("width", d.synth.width);
    sr.get("amplitude", d.synth.amplitude);
    sr.get("noise", d.synth.noise);
    sr.get("blob_sigma", d.synth.blob_sigma);
    sr.get("blobs", d.synth.blobs);
    sr.finish();
  }
  r.finish();
  if (d.source != "synthetic" && d.path.empty()) throw ConfigError("dataset.path is required for source " + d.source);
  if (d.source == "synthetic" && d.test_per_class == 0) throw ConfigError("dataset.test_per_class must be positive");
  d.synth.per_class = d.train_per_class + d.test_per_class;
  return d;
}

}  // namespace

ModelConfig ModelBlock::resolved(const Dataset& ds) const {
  ModelConfig c = config;
  c.num_classes = num_classes.value_or(ds.num_classes());
  c.in_channels = in_channels.value_or(ds.images.dim(1));
  c.resolution = resolution.value_or(ds.images.dim(2));
  if (c.class_names.empty() && ds.num_classes() == c.num_classes) c.class_names = ds.class_names;
  c.validate();
  return c;
}

void ExperimentConfig::apply_seed(std::uint64_t s) {
  seed = s;
  dataset.synth.seed = derive_seed(s, "dataset");
  train.seed = derive_seed(s, "train");
  for (std::size_t k = 0; k < attacks.size(); ++k) attacks[k].seed = derive_seed(s, "attack", k);
  if (defense) defense->seed = derive_seed(s, "defense");
  json j = json::parse(raw_json);
  j["seed"] = s;
  raw_json = j.dump();
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  Reader r(j, "");
  ExperimentConfig cfg;
  std::uint64_t seed = 0;
  r.get("seed", seed);
  if (const json* d = r.sub("dataset")) cfg.dataset = parse_dataset(*d);
  else cfg.dataset = parse_dataset(json::object());
  if (const json* m = r.sub("model")) cfg.model = parse_model(*m, "model");
  if (const json* ms = r.sub("models")) {
    if (!ms->is_array()) throw ConfigError("models must be an array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < ms->size(); ++i) {
      cfg.models.push_back(parse_model((*ms)[i], "models[" + std::to_string(i) + "]"));
      if (!names.insert(cfg.models.back().name).second) {
        throw ConfigError("duplicate model name '" + cfg.models.back().name + "'");
      }
    }
  }
  if (r.has("model") && r.has("models")) throw ConfigError("give either model or models, not both");
  if (const json* t = r.sub("train")) cfg.train = parse_train(*t);
  if (const json* as = r.sub("attacks")) {
    if (!as->is_array()) throw ConfigError("attacks must be an array");
    for (std::size_t i = 0; i < as->size(); ++i) {
      cfg.attacks.push_back(parse_attack((*as)[i], "attacks[" + std::to_string(i) + "]"));
    }
  }
  if (const json* d = r.sub("defense")) cfg.defense = parse_defense_block(*d);
  if (const json* c = r.sub("curve")) {
    Reader cr(*c, "curve");
    cr.get("grid", cfg.grid);
    cr.finish();
    if (cfg.grid.empty() || cfg.grid.front() != 0.0) throw ConfigError("curve.grid must start at 0");
    for (std::size_t i = 1; i < cfg.grid.size(); ++i) {
      if (!(cfg.grid[i] > cfg.grid[i - 1])) throw ConfigError("curve.grid must be strictly ascending");
    }
  }
  if (const json* c = r.sub("cam")) {
    Reader cr(*c, "cam");
    cr.get("images", cfg.cam_images);
    cr.get("threshold", cfg.cam_threshold);
    cr.finish();
    if (!(cfg.cam_threshold >= 0.0 && cfg.cam_threshold < 1.0)) throw ConfigError("cam.threshold must be in [0,1)");
  }
  if (const json* b = r.sub("bench")) {
    Reader br(*b, "bench");
    br.get("sizes", cfg.bench_sizes);
    br.get("rows", cfg.bench_rows);
    br.get("cols", cfg.bench_cols);
    br.get("repeats", cfg.bench_repeats);
    br.finish();
    if (cfg.bench_sizes.empty() || cfg.bench_rows == 0 || cfg.bench_cols == 0 || cfg.bench_repeats == 0) {
      throw ConfigError("bench sizes, rows, cols and repeats must be positive");
    }
  }
  std::string out;
  if (r.get("output", out)) cfg.output = out;
  r.finish();
  cfg.raw_json = j.dump();
  cfg.apply_seed(seed);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

Splits load_splits(const ExperimentConfig& cfg, bool need_train) {
  const DatasetBlock& d = cfg.dataset;
  if (!d.path.empty() && !std::filesystem::exists(d.path)) throw ConfigError("dataset.path " + d.path.string() + " does not exist");
  if (need_train && !d.train_path.empty() && !std::filesystem::exists(d.train_path)) {
    throw ConfigError("dataset.train_path " + d.train_path.string() + " does not exist");
  }
  Splits s;
  if (d.source == "synthetic") {
    const Dataset all = synth_dataset(d.synth);
    const std::size_t n_train = d.train_per_class * d.synth.num_classes;
    std::vector<std::size_t> tr(n_train), te(all.size() - n_train);
    for (std::size_t i = 0; i < tr.size(); ++i) tr[i] = i;
    for (std::size_t i = 0; i < te.size(); ++i) te[i] = n_train + i;
    s.train = subset(all, tr);
    s.train.split = "train";
    s.eval = subset(all, te);
    s.eval.split = "test";
  } else if (d.source == "cifar10") {
    if (need_train) s.train = load_cifar10(d.path, "train", d.train_limit);
    s.eval = load_cifar10(d.path, "test");
  } else {
    if (need_train) {
      if (d.train_path.empty()) throw ConfigError("dataset.train_path is required to train on blob data");
      s.train = load_tensor_blob(d.train_path);
    }
    s.eval = load_tensor_blob(d.path);
  }
  if (need_train && d.train_limit > 0 && d.train_limit < s.train.size()) {
    std::vector<std::size_t> idx(d.train_limit);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    s.train = subset(s.train, idx);
  }
  if (need_train && s.train.size() == 0) throw ConfigError("training split is empty");
  if (d.subsample > 0 && d.subsample < s.eval.size()) s.eval = subsample(s.eval, d.subsample, derive_seed(cfg.seed, "subsample"));
  if (s.eval.size() == 0) throw ConfigError("evaluation split is empty");
  return s;
}

std::filesystem::path checkpoint_path(const ExperimentConfig& cfg, const ModelBlock& m) {
  return m.checkpoint.empty() ? cfg.output / (m.name + ".ckpt") : m.checkpoint;
}

}  // namespace arbb
