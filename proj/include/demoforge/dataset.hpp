// Copyright 2026 The demoforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DEMOFORGE_DATASET_HPP_
#define DEMOFORGE_DATASET_HPP_

// On-disk training dataset: manifest.json, demonstration.json,
// peract/sample_NNNNNN.dfvx and imagebc/frame_NNNNNN.png. Layout in
// docs/dataset_format.md.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "demoforge/archive.hpp"
#include "demoforge/demo.hpp"
#include "demoforge/export.hpp"
#include "demoforge/serialize.hpp"

namespace demoforge {

inline constexpr int kDatasetVersion = 1;

// 8-bit RGB PNG, no ancillary chunks, fixed compression: same pixels give
// the same bytes.
std::vector<std::uint8_t> encode_png(std::span<const std::uint8_t> rgb, int width, int height);

struct PngImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;
};
// Throws Schema for anything that is not an 8-bit RGB PNG.
PngImage decode_png(std::span<const std::uint8_t> bytes);

struct DatasetOptions {
  double rot_bin_deg = 5.0;
  int imagebc_stride = 1;
};

// Writes into `root`, which must be absent, empty, or an earlier dataset
// (whose payload directories are replaced). Returns the manifest.
Json write_dataset(const std::filesystem::path& root, const Demonstration& demo,
                   std::span<const PerActSample> peract, std::span<const ImageBcSample> imagebc,
                   const DatasetOptions& opts = {});

// Schema, checksum and payload checks, plus the sample-count arithmetic
// against the stored demonstration. Never throws for content problems.
ValidationReport validate_dataset(const std::filesystem::path& root);

// Replay output: schema, checksums and PNG decode of every frame.
ValidationReport validate_replay(const std::filesystem::path& root);

// Dispatches on the manifest format: session archive, dataset or replay.
ValidationReport validate_path(const std::filesystem::path& root);

// Replay renders: PNG frames plus a small manifest, same layout rules.
Json write_frames(const std::filesystem::path& root, std::span<const ImageBcSample> frames);

}  // namespace demoforge

#endif  // DEMOFORGE_DATASET_HPP_
