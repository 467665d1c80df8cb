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

#ifndef ARBB_CHECKPOINT_HPP
#define ARBB_CHECKPOINT_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "arbb/model.hpp"

namespace arbb {

// Layout: "ARBB" | u32 LE version | u32 LE metadata length | UTF-8 JSON
// metadata | tensors as LE float32, in the order listed by the metadata.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const Model& model);
// Throws FormatError (with the byte offset) on bad magic, unsupported
// version, truncation, trailing bytes or metadata that does not describe the
// rebuilt architecture. Nothing is returned on failure.
Model deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace arbb

#endif  // ARBB_CHECKPOINT_HPP
