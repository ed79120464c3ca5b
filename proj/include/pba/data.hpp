// Copyright 2026 The pba Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PBA_DATA_HPP_
#define PBA_DATA_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pba/image.hpp"
#include "pba/rng.hpp"

namespace pba {

enum class DatasetKind {
  kNaturalImage,  // horizontal flip allowed in the baseline pipeline
  kDigit,         // flip disabled
};

std::string_view dataset_kind_name(DatasetKind kind);

struct Example {
  Image image;
  int label;
};

struct DatasetSplits {
  std::vector<Example> train;
  std::vector<Example> val;
  std::vector<Example> test;
  int class_count = 0;
  DatasetKind dataset_kind = DatasetKind::kNaturalImage;
  // Per-channel statistics of the train split on the [0, 1] scale, used for
  // input normalization.
  std::array<double, 3> norm_mean{};
  std::array<double, 3> norm_std{};
};

const std::vector<Example>& split_of(const DatasetSplits& data, int split);

/// Recomputes norm_mean / norm_std from the train split.
void compute_normalization(DatasetSplits& data);

/// Synthetic shape-classification generator. Train images are clean; val and
/// test images additionally pass through the nuisance transforms, so
/// augmentation matching the nuisance distribution measurably improves
/// generalization.
struct SyntheticSpec {
  int image_size = 32;
  int class_count = 4;
  int train_count = 512;
  int val_count = 256;
  int test_count = 512;
  double rotation_range_deg = 0.0;   // nuisance rotation, uniform in +-range
  double translation_range_px = 0.0; // nuisance shift, uniform in +-range per axis
  double brightness_jitter = 0.0;    // nuisance scale, uniform in [1-j, 1+j]
  uint64_t seed = 0;
  DatasetKind dataset_kind = DatasetKind::kNaturalImage;

  void validate() const;  // throws ConfigError
};

/// Largest class_count generate_synthetic supports.
int synthetic_template_count();

DatasetSplits generate_synthetic(const SyntheticSpec& spec);

/// Draws one nuisance transform (rotation, translation, brightness) from the
/// spec's ranges and applies it. Also usable as an oracle augmentation.
Image apply_nuisance(const Image& img, const SyntheticSpec& spec, Rng& rng);

/// Uniform class-stratified subsample of the train split to n examples; val
/// and test are unchanged. Class proportions are preserved within one
/// example. Throws ConfigError if n < class_count or n > train size.
DatasetSplits reduce_split(const DatasetSplits& splits, int n, uint64_t seed);

// Raw dataset container: little-endian u32 header (magic, count, height,
// width, channels) followed by count records of one label byte plus
// height*width*channels pixel bytes.
inline constexpr uint32_t kRawMagic = 0x31414250u;  // "PBA1"

std::vector<Example> read_raw_file(const std::filesystem::path& path,
                                   int class_count);
void write_raw_file(const std::filesystem::path& path,
                    const std::vector<Example>& examples);

/// Loads splits per a manifest JSON file:
///   {"train": path, "val": path, "test": path,
///    "meta": {"class_count": int, "dataset_kind": "digit-like"|"natural-image-like"}}
/// Relative paths resolve against the manifest's directory.
DatasetSplits load_dataset(const std::filesystem::path& manifest_path);

}  // namespace pba

#endif  // PBA_DATA_HPP_
