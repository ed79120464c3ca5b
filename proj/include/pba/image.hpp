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

#ifndef PBA_IMAGE_HPP_
#define PBA_IMAGE_HPP_

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pba {

/// 8-bit raster with interleaved channels, row-major. Channels must be 1
/// (grayscale) or 3. Value semantics; augmentation ops return new images.
class Image {
 public:
  Image(int width, int height, int channels, uint8_t fill = 0)
      : width_(width), height_(height), channels_(channels) {
    validate_dims();
    data_.assign(static_cast<size_t>(width_) * height_ * channels_, fill);
  }

  Image(int width, int height, int channels, std::vector<uint8_t> data)
      : width_(width), height_(height), channels_(channels),
        data_(std::move(data)) {
    validate_dims();
    if (data_.size() != static_cast<size_t>(width_) * height_ * channels_) {
      throw std::invalid_argument(
          "image data size " + std::to_string(data_.size()) +
          " does not match " + std::to_string(width_) + "x" +
          std::to_string(height_) + "x" + std::to_string(channels_));
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  size_t pixel_count() const { return static_cast<size_t>(width_) * height_; }

  uint8_t at(int x, int y, int c) const { return data_[index(x, y, c)]; }
  uint8_t& at(int x, int y, int c) { return data_[index(x, y, c)]; }

  const std::vector<uint8_t>& data() const { return data_; }
  std::vector<uint8_t>& data() { return data_; }

  bool operator==(const Image&) const = default;

 private:
  size_t index(int x, int y, int c) const {
    return (static_cast<size_t>(y) * width_ + x) * channels_ + c;
  }

  void validate_dims() const {
    if (width_ < 1 || height_ < 1) {
      throw std::invalid_argument("zero-sized image: " + std::to_string(width_) +
                                  "x" + std::to_string(height_));
    }
    if (channels_ != 1 && channels_ != 3) {
      throw std::invalid_argument("channels must be 1 or 3, got " +
                                  std::to_string(channels_));
    }
  }

  int width_;
  int height_;
  int channels_;
  std::vector<uint8_t> data_;
};

}  // namespace pba

#endif  // PBA_IMAGE_HPP_
