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

#include "arbb/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "arbb/rng.hpp"
#include "json.hpp"

namespace arbb {

void Dataset::validate() const {
  if (images.rank() != 4) throw ShapeError("dataset images must be [N,C,H,W], got " + to_string(images.shape()));
  if (images.dim(0) != labels.size()) {
    throw ShapeError("dataset has " + std::to_string(images.dim(0)) + " images and " + std::to_string(labels.size()) +
                     " labels");
  }
  if (class_names.empty()) throw LabelError("dataset has no class names");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= class_names.size()) {
      throw LabelError("label " + std::to_string(labels[i]) + " of image " + std::to_string(i) + " outside [0, " +
                       std::to_string(class_names.size()) + ")");
    }
  }
  for (float v : images.data()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw DomainError("dataset pixel outside [0,1]");
  }
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices) {
  Dataset out;
  out.images = gather_rows(ds.images, indices);
  out.labels.reserve(indices.size());
  for (auto i : indices) out.labels.push_back(ds.labels.at(i));
  out.class_names = ds.class_names;
  out.split = ds.split;
  return out;
}

Dataset subsample(const Dataset& ds, std::size_t n, std::uint64_t seed) {
  if (n > ds.size()) {
    throw ConfigError("cannot sample " + std::to_string(n) + " images from a set of " + std::to_string(ds.size()));
  }
  Rng rng(derive_seed(seed, "subsample"));
  auto perm = rng.permutation(ds.size());
  perm.resize(n);
  return subset(ds, perm);
}

const std::vector<std::string>& cifar10_class_names() {
  static const std::vector<std::string> names = {"airplane", "automobile", "bird",  "cat",  "deer",
                                                 "dog",      "frog",       "horse", "ship", "truck"};
  return names;
}

namespace {

constexpr std::size_t kCifarRecord = 1 + 3 * 32 * 32;

std::vector<std::uint8_t> read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void append_cifar(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& p, std::size_t max_records,
                  std::vector<float>& pixels, std::vector<int>& labels) {
  if (bytes.size() % kCifarRecord != 0) {
    throw FormatError(bytes.size(), p.string() + ": length " + std::to_string(bytes.size()) +
                                        " bytes is not a multiple of the " + std::to_string(kCifarRecord) +
                                        "-byte record (expected " +
                                        std::to_string(bytes.size() / kCifarRecord * kCifarRecord) + " or " +
                                        std::to_string((bytes.size() / kCifarRecord + 1) * kCifarRecord) + ")");
  }
  const std::size_t n = bytes.size() / kCifarRecord;
  for (std::size_t r = 0; r < n; ++r) {
    if (max_records && labels.size() >= max_records) return;
    const std::size_t off = r * kCifarRecord;
    if (bytes[off] > 9) throw FormatError(off, p.string() + ": label byte " + std::to_string(bytes[off]) + " > 9");
    labels.push_back(bytes[off]);
    for (std::size_t i = 1; i < kCifarRecord; ++i) pixels.push_back(static_cast<float>(bytes[off + i]) / 255.0f);
  }
}

Dataset cifar_from(const std::vector<std::filesystem::path>& files, std::size_t max_records, std::string split) {
  std::vector<float> pixels;
  std::vector<int> labels;
  for (const auto& f : files) append_cifar(read_file(f), f, max_records, pixels, labels);
  if (labels.empty()) throw FormatError(0, "no CIFAR-10 records read");
  Dataset ds;
  ds.images = Tensor({labels.size(), 3, 32, 32}, std::move(pixels));
  ds.labels = std::move(labels);
  ds.class_names = cifar10_class_names();
  ds.split = std::move(split);
  return ds;
}

}  // namespace

Dataset load_cifar10_file(const std::filesystem::path& file, std::size_t max_records) {
  return cifar_from({file}, max_records, file.stem().string());
}

Dataset load_cifar10(const std::filesystem::path& dir, const std::string& split, std::size_t max_records) {
  std::vector<std::filesystem::path> files;
  if (split == "test") {
    files.push_back(dir / "test_batch.bin");
  } else if (split == "train") {
    for (int i = 1; i <= 5; ++i) files.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
  } else {
    throw ConfigError("CIFAR-10 split must be 'train' or 'test', got '" + split + "'");
  }
  for (const auto& f : files) {
    if (!std::filesystem::exists(f)) throw ConfigError("missing CIFAR-10 file " + f.string());
  }
  return cifar_from(files, max_records, split);
}

Dataset synth_dataset(const SynthSpec& s) {
  if (s.num_classes < 2 || s.per_class == 0 || s.channels == 0 || s.height == 0 || s.width == 0 || s.blobs == 0) {
    throw ConfigError("synthetic dataset needs >= 2 classes and non-empty images");
  }
  if (!(s.amplitude > 0.0) || s.noise < 0.0 || s.amplitude + s.noise > 0.5) {
    throw ConfigError("synthetic amplitude + noise must lie in (0, 0.5]");
  }
  const std::size_t C = s.channels, H = s.height, W = s.width, D = C * H * W;
  Rng rng(derive_seed(s.seed, "synth.prototypes"));
  std::vector<std::vector<double>> protos;
  auto draw = [&] {
    std::vector<double> field(D, 0.0);
    for (std::size_t b = 0; b < s.blobs; ++b) {
      const double cy = rng.uniform(0.0, static_cast<double>(H)), cx = rng.uniform(0.0, static_cast<double>(W));
      const double sig = s.blob_sigma * static_cast<double>(std::max(H, W));
      std::vector<double> wc(C);
      for (auto& w : wc) w = rng.sign() * rng.uniform(0.5, 1.0);
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t y = 0; y < H; ++y) {
          for (std::size_t x = 0; x < W; ++x) {
            const double dy = static_cast<double>(y) + 0.5 - cy, dx = static_cast<double>(x) + 0.5 - cx;
            field[(c * H + y) * W + x] += wc[c] * std::exp(-(dy * dy + dx * dx) / (2.0 * sig * sig));
          }
        }
      }
    }
    for (auto& v : field) v = 0.5 + s.amplitude * std::clamp(v, -1.0, 1.0);
    return field;
  };
  // Bounded noise n with |n_i| <= noise keeps x nearest to its own
  // prototype whenever 2 * noise * |d|_1 < |d|_2^2 for every prototype gap d.
  auto separated = [&](const std::vector<double>& p) {
    for (const auto& q : protos) {
      double l1 = 0.0, l2 = 0.0;
      for (std::size_t i = 0; i < D; ++i) {
        const double d = p[i] - q[i];
        l1 += std::abs(d);
        l2 += d * d;
      }
      if (!(2.0 * s.noise * l1 < l2)) return false;
    }
    return true;
  };
  for (std::size_t k = 0; k < s.num_classes; ++k) {
    bool ok = false;
    for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
      auto p = draw();
      if (separated(p)) {
        protos.push_back(std::move(p));
        ok = true;
      }
    }
    if (!ok) throw ConfigError("could not draw separable prototypes; raise amplitude or lower noise");
  }
  const std::size_t N = s.num_classes * s.per_class;
  Dataset ds;
  ds.images = Tensor({N, C, H, W});
  ds.labels.resize(N);
  Rng noise(derive_seed(s.seed, "synth.noise"));
  for (std::size_t n = 0; n < N; ++n) {
    const std::size_t k = n % s.num_classes;
    ds.labels[n] = static_cast<int>(k);
    for (std::size_t i = 0; i < D; ++i) {
      const double v = protos[k][i] + (s.noise > 0.0 ? noise.uniform(-s.noise, s.noise) : 0.0);
      ds.images[n * D + i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  for (std::size_t k = 0; k < s.num_classes; ++k) ds.class_names.push_back("class" + std::to_string(k));
  ds.split = "synthetic";
  return ds;
}

const std::map<std::string, std::vector<std::string>>& imagenet10_classmap() {
  static const std::map<std::string, std::vector<std::string>> m = {
      {"fish", {"n01443537", "n01484850", "n01491361", "n01494475", "n01496331"}},
      {"bird", {"n01530575", "n01531178", "n01532829", "n01534433", "n01537544"}},
      {"gecko", {"n01629819", "n01630670", "n01631663", "n01632458", "n01632777"}},
      {"turtle", {"n01664065", "n01665541", "n01667114", "n01667778", "n01669191"}},
      {"snake", {"n01728572", "n01728920", "n01729322", "n01729977", "n01734418"}},
      {"spider", {"n01773157", "n01773549", "n01773797", "n01774384", "n01774750"}},
      {"dog", {"n02085620", "n02087046", "n02085936", "n02086079", "n02086240"}},
      {"cat", {"n02123045", "n02123159", "n02123394", "n02123597", "n02124075"}},
      {"butterfly", {"n02276258", "n02277742", "n02279972", "n02280649", "n02281406"}},
      {"sheep", {"n02412080", "n02415577", "n02417914", "n02422106", "n02422699"}},
  };
  return m;
}

std::optional<std::string> imagenet10_coarse_label(const std::string& wnid) {
  for (const auto& [label, ids] : imagenet10_classmap()) {
    if (std::find(ids.begin(), ids.end(), wnid) != ids.end()) return label;
  }
  return std::nullopt;
}

std::vector<AblationSetting> imagenet10_ablation_settings() {
  return {
      {"images-6000", 6000, 224, 1, 1}, {"images-3000", 3000, 224, 1, 1}, {"images-1200", 1200, 224, 1, 1},
      {"res-224", 6000, 224, 1, 1},     {"res-128", 6000, 128, 1, 1},     {"res-32", 6000, 32, 1, 1},
      {"width-1", 6000, 224, 1, 1},     {"width-1/4", 6000, 224, 1, 4},   {"width-1/8", 6000, 224, 1, 8},
  };
}

void save_tensor_blob(const Dataset& ds, const std::filesystem::path& manifest) {
  ds.validate();
  std::filesystem::path blob = manifest;
  blob.replace_extension(".bin");
  nlohmann::json j;
  j["blob"] = blob.filename().string();
  j["shape"] = ds.images.shape();
  j["labels"] = ds.labels;
  j["class_names"] = ds.class_names;
  j["split"] = ds.split;
  {
    std::ofstream f(blob, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot write " + blob.string());
    f.write(reinterpret_cast<const char*>(ds.images.ptr()), static_cast<std::streamsize>(ds.images.size() * 4));
  }
  std::ofstream m(manifest, std::ios::trunc);
  if (!m) throw ConfigError("cannot write " + manifest.string());
  m << j.dump(2) << "\n";
}

Dataset load_tensor_blob(const std::filesystem::path& manifest) {
  const auto text = read_file(manifest);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(0, manifest.string() + ": " + e.what());
  }
  Dataset ds;
  Shape shape;
  try {
    shape = j.at("shape").get<Shape>();
    ds.labels = j.at("labels").get<std::vector<int>>();
    ds.class_names = j.at("class_names").get<std::vector<std::string>>();
    ds.split = j.value("split", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(0, manifest.string() + ": " + e.what());
  }
  if (shape.size() != 4) throw FormatError(0, "blob shape must have four dimensions");
  const auto blob = manifest.parent_path() / j.at("blob").get<std::string>();
  const auto bytes = read_file(blob);
  const std::size_t expected = numel(shape) * 4;
  if (bytes.size() != expected) {
    throw FormatError(std::min(bytes.size(), expected), blob.string() + ": expected " + std::to_string(expected) +
                                                            " bytes, found " + std::to_string(bytes.size()));
  }
  std::vector<float> values(numel(shape));
  std::memcpy(values.data(), bytes.data(), expected);
  ds.images = Tensor(shape, std::move(values));
  ds.validate();
  return ds;
}

}  // namespace arbb
