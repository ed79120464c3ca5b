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

#include "pba/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pba/augment.hpp"
#include "pba/errors.hpp"

namespace pba {

namespace {

constexpr int kTemplateCount = 10;
constexpr uint8_t kBackground = 128;

struct RenderSpec {
  int size;
  int cx, cy;       // jittered center
  int thickness;
  uint8_t intensity;
};

// Shape templates drawn as bright strokes on a mid-gray background. The set
// stays class-separable under rotations of up to ~40 degrees: bar templates
// are 90 degrees apart and the round/blocky templates are near
// rotation-invariant.
bool template_hit(int tmpl, const RenderSpec& r, int x, int y) {
  const int dx = x - r.cx;
  const int dy = y - r.cy;
  const int half = r.thickness / 2;
  const int margin = std::max(1, r.size / 10);
  const bool in_core = x >= margin && x < r.size - margin && y >= margin &&
                       y < r.size - margin;
  const double rad = std::sqrt(static_cast<double>(dx) * dx +
                               static_cast<double>(dy) * dy);
  switch (tmpl) {
    case 0:  // horizontal bar
      return in_core && std::abs(dy) <= half;
    case 1:  // vertical bar
      return in_core && std::abs(dx) <= half;
    case 2:  // filled disc
      return rad <= r.size * 0.28;
    case 3:  // square outline
    {
      const int a = static_cast<int>(r.size * 0.32);
      const int m = std::max(std::abs(dx), std::abs(dy));
      return m <= a && m >= a - r.thickness;
    }
    case 4:  // plus
      return in_core && (std::abs(dy) <= half || std::abs(dx) <= half);
    case 5:  // diagonal cross
      return in_core &&
             (std::abs(dx - dy) <= half || std::abs(dx + dy) <= half);
    case 6:  // ring
    {
      const double outer = r.size * 0.33;
      return rad <= outer && rad >= outer - r.thickness;
    }
    case 7:  // diagonal stripe
      return in_core && std::abs(dx + dy) <= half + 1;
    case 8:  // two horizontal bars
      return in_core && (std::abs(dy + r.size / 4) <= half ||
                         std::abs(dy - r.size / 4) <= half);
    case 9:  // opposite quadrant blocks
      return in_core && ((dx < -1 && dy < -1) || (dx > 1 && dy > 1));
    default:
      return false;
  }
}

Image render_example(int tmpl, int size, Rng& rng) {
  RenderSpec r;
  r.size = size;
  // Strokes are mostly bright with a dark minority, symmetric about the
  // mid-gray background, so value inversion stays within the data
  // distribution.
  const int contrast = 62 + static_cast<int>(rng.uniform_int(66));
  const bool bright = rng.next_double() < 0.9;
  r.intensity = static_cast<uint8_t>(bright ? kBackground + contrast
                                            : kBackground - contrast);
  const int jitter = std::max(1, size / 10);
  r.cx = size / 2 + static_cast<int>(rng.uniform_int(2 * jitter + 1)) - jitter;
  r.cy = size / 2 + static_cast<int>(rng.uniform_int(2 * jitter + 1)) - jitter;
  r.thickness = std::max(2, size / 8) + static_cast<int>(rng.uniform_int(3)) - 1;

  Image img(size, size, 1, kBackground);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const int noise = static_cast<int>(rng.uniform_int(25)) - 12;
      const int base = template_hit(tmpl, r, x, y) ? r.intensity : kBackground;
      img.at(x, y, 0) = static_cast<uint8_t>(std::clamp(base + noise, 0, 255));
    }
  }
  return img;
}

std::vector<Example> generate_split(const SyntheticSpec& spec, int count,
                                    Rng rng, bool nuisance) {
  std::vector<Example> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const int label = i % spec.class_count;
    Image img = render_example(label, spec.image_size, rng);
    if (nuisance) img = apply_nuisance(img, spec, rng);
    out.push_back({std::move(img), label});
  }
  return out;
}

uint32_t read_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

void write_u32(std::ostream& os, uint32_t v) {
  const uint8_t bytes[4] = {
      static_cast<uint8_t>(v & 0xFF), static_cast<uint8_t>((v >> 8) & 0xFF),
      static_cast<uint8_t>((v >> 16) & 0xFF),
      static_cast<uint8_t>((v >> 24) & 0xFF)};
  os.write(reinterpret_cast<const char*>(bytes), 4);
}

}  // namespace

std::string_view dataset_kind_name(DatasetKind kind) {
  return kind == DatasetKind::kDigit ? "digit-like" : "natural-image-like";
}

const std::vector<Example>& split_of(const DatasetSplits& data, int split) {
  switch (split) {
    case 0:
      return data.train;
    case 1:
      return data.val;
    default:
      return data.test;
  }
}

void compute_normalization(DatasetSplits& data) {
  data.norm_mean = {0.0, 0.0, 0.0};
  data.norm_std = {1.0, 1.0, 1.0};
  if (data.train.empty()) return;
  const int channels = data.train.front().image.channels();
  std::array<double, 3> sum{}, sq{};
  size_t count = 0;
  for (const Example& ex : data.train) {
    for (int y = 0; y < ex.image.height(); ++y) {
      for (int x = 0; x < ex.image.width(); ++x) {
        for (int c = 0; c < channels; ++c) {
          const double v = ex.image.at(x, y, c) / 255.0;
          sum[c] += v;
          sq[c] += v * v;
        }
      }
    }
    count += ex.image.pixel_count();
  }
  for (int c = 0; c < channels; ++c) {
    const double mean = sum[c] / count;
    const double var = std::max(0.0, sq[c] / count - mean * mean);
    data.norm_mean[c] = mean;
    data.norm_std[c] = std::max(1e-6, std::sqrt(var));
  }
}

void SyntheticSpec::validate() const {
  if (image_size < 8) throw ConfigError("synthetic.image_size: must be >= 8");
  if (class_count < 2) throw ConfigError("synthetic.class_count: must be >= 2");
  if (class_count > kTemplateCount) {
    throw ConfigError("synthetic.class_count: exceeds available templates (" +
                      std::to_string(kTemplateCount) + ")");
  }
  if (train_count < 1 || val_count < 1 || test_count < 1) {
    throw ConfigError("synthetic.*_count: splits must be nonempty");
  }
  if (rotation_range_deg < 0 || translation_range_px < 0 ||
      brightness_jitter < 0) {
    throw ConfigError("synthetic nuisance ranges must be >= 0");
  }
}

int synthetic_template_count() { return kTemplateCount; }

Image apply_nuisance(const Image& img, const SyntheticSpec& spec, Rng& rng) {
  const double deg = (2.0 * rng.next_double() - 1.0) * spec.rotation_range_deg;
  const int tx = static_cast<int>(
      std::lround((2.0 * rng.next_double() - 1.0) * spec.translation_range_px));
  const int ty = static_cast<int>(
      std::lround((2.0 * rng.next_double() - 1.0) * spec.translation_range_px));
  const double factor = 1.0 + (2.0 * rng.next_double() - 1.0) * spec.brightness_jitter;
  Image out = rotate_image(img, deg);
  out = translate_image(out, tx, ty);
  return adjust_brightness(out, factor);
}

DatasetSplits generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng base(spec.seed);
  DatasetSplits data;
  data.class_count = spec.class_count;
  data.dataset_kind = spec.dataset_kind;
  data.train = generate_split(spec, spec.train_count, base.split(1), false);
  data.val = generate_split(spec, spec.val_count, base.split(2), true);
  data.test = generate_split(spec, spec.test_count, base.split(3), true);
  compute_normalization(data);
  return data;
}

DatasetSplits reduce_split(const DatasetSplits& splits, int n, uint64_t seed) {
  const int total = static_cast<int>(splits.train.size());
  if (n > total) {
    throw ConfigError("reduce: requested " + std::to_string(n) +
                      " examples from a train split of " + std::to_string(total));
  }
  if (n < splits.class_count) {
    throw ConfigError("reduce: cannot stratify " + std::to_string(n) +
                      " examples over " + std::to_string(splits.class_count) +
                      " classes");
  }

  std::vector<std::vector<int>> by_class(splits.class_count);
  for (int i = 0; i < total; ++i) {
    by_class[splits.train[i].label].push_back(i);
  }

  // Largest-remainder apportionment of the per-class quotas.
  std::vector<int> quota(splits.class_count);
  std::vector<std::pair<double, int>> remainders;
  int assigned = 0;
  for (int c = 0; c < splits.class_count; ++c) {
    const double exact =
        static_cast<double>(n) * by_class[c].size() / total;
    quota[c] = static_cast<int>(std::floor(exact));
    quota[c] = std::min<int>(quota[c], static_cast<int>(by_class[c].size()));
    assigned += quota[c];
    remainders.push_back({exact - quota[c], c});
  }
  std::sort(remainders.begin(), remainders.end(),
            [](const auto& a, const auto& b) {
              if (a.first != b.first) return a.first > b.first;
              return a.second < b.second;
            });
  for (size_t i = 0; assigned < n && i < remainders.size(); ++i) {
    const int c = remainders[i].second;
    if (quota[c] < static_cast<int>(by_class[c].size())) {
      ++quota[c];
      ++assigned;
    }
  }

  Rng base(seed);
  std::vector<int> selected;
  for (int c = 0; c < splits.class_count; ++c) {
    auto& pool = by_class[c];
    Rng rng = base.split(c);
    for (int i = static_cast<int>(pool.size()) - 1; i >= 1; --i) {
      int j = static_cast<int>(rng.uniform_int(static_cast<uint32_t>(i + 1)));
      std::swap(pool[i], pool[j]);
    }
    selected.insert(selected.end(), pool.begin(), pool.begin() + quota[c]);
  }
  std::sort(selected.begin(), selected.end());

  DatasetSplits out;
  out.class_count = splits.class_count;
  out.dataset_kind = splits.dataset_kind;
  out.val = splits.val;
  out.test = splits.test;
  out.train.reserve(selected.size());
  for (int idx : selected) out.train.push_back(splits.train[idx]);
  compute_normalization(out);
  return out;
}

std::vector<Example> read_raw_file(const std::filesystem::path& path,
                                   int class_count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open dataset file: " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());

  if (bytes.size() < 20) {
    throw ConfigError(path.string() + ": truncated header: expected 20 bytes, got " +
                      std::to_string(bytes.size()));
  }
  const uint32_t magic = read_u32(&bytes[0]);
  if (magic != kRawMagic) {
    std::ostringstream oss;
    oss << path.string() << ": bad magic 0x" << std::hex << magic
        << " at offset 0 (expected 0x" << kRawMagic << ")";
    throw ConfigError(oss.str());
  }
  const uint64_t count = read_u32(&bytes[4]);
  const uint64_t height = read_u32(&bytes[8]);
  const uint64_t width = read_u32(&bytes[12]);
  const uint64_t channels = read_u32(&bytes[16]);

  if (count == 0) {
    if (bytes.size() != 20) {
      throw ConfigError(path.string() + ": expected 20 bytes, got " +
                        std::to_string(bytes.size()));
    }
    return {};
  }
  if (width == 0 || height == 0) {
    throw ConfigError(path.string() + ": zero-sized images in header at offset 8");
  }
  if (channels != 1 && channels != 3) {
    throw ConfigError(path.string() + ": channels must be 1 or 3, got " +
                      std::to_string(channels) + " at offset 16");
  }
  const uint64_t record = 1 + height * width * channels;
  const uint64_t expected = 20 + count * record;
  if (bytes.size() != expected) {
    throw ConfigError(path.string() + ": expected " + std::to_string(expected) +
                      " bytes, got " + std::to_string(bytes.size()));
  }

  std::vector<Example> out;
  out.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    const uint64_t offset = 20 + i * record;
    const int label = bytes[offset];
    if (label >= class_count) {
      throw ConfigError(path.string() + ": label " + std::to_string(label) +
                        " out of range [0, " + std::to_string(class_count) +
                        ") at offset " + std::to_string(offset));
    }
    std::vector<uint8_t> pixels(bytes.begin() + offset + 1,
                                bytes.begin() + offset + record);
    out.push_back({Image(static_cast<int>(width), static_cast<int>(height),
                         static_cast<int>(channels), std::move(pixels)),
                   label});
  }
  return out;
}

void write_raw_file(const std::filesystem::path& path,
                    const std::vector<Example>& examples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path.string());
  const uint32_t count = static_cast<uint32_t>(examples.size());
  const uint32_t height = count ? examples[0].image.height() : 0;
  const uint32_t width = count ? examples[0].image.width() : 0;
  const uint32_t channels = count ? examples[0].image.channels() : 0;
  write_u32(out, kRawMagic);
  write_u32(out, count);
  write_u32(out, height);
  write_u32(out, width);
  write_u32(out, channels);
  for (const Example& ex : examples) {
    if (ex.image.width() != static_cast<int>(width) ||
        ex.image.height() != static_cast<int>(height) ||
        ex.image.channels() != static_cast<int>(channels)) {
      throw std::invalid_argument("all examples in a raw file must share dimensions");
    }
    if (ex.label < 0 || ex.label > 255) {
      throw std::invalid_argument("label must fit in one byte");
    }
    const uint8_t label = static_cast<uint8_t>(ex.label);
    out.write(reinterpret_cast<const char*>(&label), 1);
    out.write(reinterpret_cast<const char*>(ex.image.data().data()),
              static_cast<std::streamsize>(ex.image.data().size()));
  }
  if (!out) throw std::runtime_error("short write: " + path.string());
}

DatasetSplits load_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw ConfigError("cannot open manifest: " + manifest_path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError("manifest: invalid JSON: " + std::string(e.what()));
  }
  for (const auto& [key, _] : j.items()) {
    if (key != "train" && key != "val" && key != "test" && key != "meta") {
      throw ConfigError("manifest: unknown key \"" + key + "\"");
    }
  }
  for (const char* key : {"train", "val", "test", "meta"}) {
    if (!j.contains(key)) {
      throw ConfigError("manifest: missing key \"" + std::string(key) + "\"");
    }
  }
  const auto& meta = j.at("meta");
  if (!meta.contains("class_count")) {
    throw ConfigError("manifest: missing meta.class_count");
  }
  DatasetSplits data;
  data.class_count = meta.at("class_count").get<int>();
  if (data.class_count < 2) {
    throw ConfigError("manifest: meta.class_count must be >= 2");
  }
  data.dataset_kind = DatasetKind::kNaturalImage;
  if (meta.contains("dataset_kind")) {
    const std::string kind = meta.at("dataset_kind").get<std::string>();
    if (kind == "digit-like") {
      data.dataset_kind = DatasetKind::kDigit;
    } else if (kind == "natural-image-like") {
      data.dataset_kind = DatasetKind::kNaturalImage;
    } else {
      throw ConfigError("manifest: unknown dataset_kind \"" + kind + "\"");
    }
  }

  const auto base = manifest_path.parent_path();
  auto resolve = [&base](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
  };
  data.train = read_raw_file(resolve(j.at("train").get<std::string>()),
                             data.class_count);
  data.val = read_raw_file(resolve(j.at("val").get<std::string>()),
                           data.class_count);
  data.test = read_raw_file(resolve(j.at("test").get<std::string>()),
                            data.class_count);
  compute_normalization(data);
  return data;
}

}  // namespace pba
