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

#ifndef ARBB_DATASET_HPP
#define ARBB_DATASET_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arbb/tensor.hpp"

namespace arbb {

struct Dataset {
  Tensor images;  // [N,C,H,W] in [0,1]
  std::vector<int> labels;
  std::vector<std::string> class_names;
  std::string split;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t num_classes() const noexcept { return class_names.size(); }
  Shape image_shape() const { return {images.dim(1), images.dim(2), images.dim(3)}; }
  Tensor image(std::size_t i) const { return slice_rows(images, i, 1); }

  // Throws LabelError / DomainError / ShapeError on a broken invariant.
  void validate() const;
};

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices);

// Seeded uniform sample without replacement, in sampled order.
Dataset subsample(const Dataset& ds, std::size_t n, std::uint64_t seed);

// CIFAR-10 binary batches: records of 1 label byte + 3072 pixel bytes
// (R, G, B planes, row-major 32x32). split is "train" (data_batch_1..5)
// or "test" (test_batch). max_records = 0 reads everything.
Dataset load_cifar10(const std::filesystem::path& dir, const std::string& split = "test", std::size_t max_records = 0);
Dataset load_cifar10_file(const std::filesystem::path& file, std::size_t max_records = 0);
const std::vector<std::string>& cifar10_class_names();

struct SynthSpec {
  std::size_t num_classes = 10;
  std::size_t per_class = 100;
  std::size_t channels = 3;
  std::size_t height = 16;
  std::size_t width = 16;
  double amplitude = 0.3;   // blob peak offset from the 0.5 base
  double noise = 0.05;      // bounded uniform pixel noise
  double blob_sigma = 0.2;  // blob radius as a fraction of the image side
  std::size_t blobs = 2;    // blobs per class prototype
  std::uint64_t seed = 0;
};

// Class prototypes of Gaussian blobs on a 0.5 base plus bounded noise.
// Amplitude + noise <= 0.5 keeps every value in [0,1] without clipping;
// prototypes are redrawn until nearest-prototype classification (a linear
// rule) is provably correct for every admissible noise draw.
Dataset synth_dataset(const SynthSpec& spec);

// Coarse ImageNet-10 label -> its five ImageNet wnids.
const std::map<std::string, std::vector<std::string>>& imagenet10_classmap();
std::optional<std::string> imagenet10_coarse_label(const std::string& wnid);

// Images-per-class, resolution and width settings of the ImageNet-10
// ablation.
struct AblationSetting {
  std::string name;
  std::size_t images_per_class;
  std::size_t resolution;
  int width_num;
  int width_den;
};
std::vector<AblationSetting> imagenet10_ablation_settings();

// Tensor blob + JSON manifest. The manifest lists the blob file, the
// image shape, labels and class names; the blob holds little-endian
// 32-bit floats.
void save_tensor_blob(const Dataset& ds, const std::filesystem::path& manifest);
Dataset load_tensor_blob(const std::filesystem::path& manifest);

}  // namespace arbb

#endif  // ARBB_DATASET_HPP
