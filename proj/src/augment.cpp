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

#include "pba/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace pba {

namespace {

constexpr std::array<std::string_view, kNumOps> kOpNames = {
    "shear_x",   "shear_y",  "translate_x", "translate_y", "rotate",
    "auto_contrast", "invert", "equalize",  "solarize",    "posterize",
    "contrast",  "color",    "brightness",  "sharpness",   "cutout",
};

uint8_t clamp_u8(double v) {
  return static_cast<uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
}

void check_mag(int mag) {
  if (mag < 0 || mag >= kNumMagLevels) {
    throw std::invalid_argument("magnitude level out of range: " +
                                std::to_string(mag));
  }
}

// Inverse affine sampling with nearest-neighbor lookup; out-of-bounds
// sources take kFillValue in every channel.
template <typename SourceFn>
Image affine_sample(const Image& img, SourceFn&& source) {
  Image out(img.width(), img.height(), img.channels());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      auto [sxd, syd] = source(x, y);
      long sx = std::lround(sxd);
      long sy = std::lround(syd);
      if (sx >= 0 && sx < img.width() && sy >= 0 && sy < img.height()) {
        for (int c = 0; c < img.channels(); ++c) {
          out.at(x, y, c) = img.at(static_cast<int>(sx), static_cast<int>(sy), c);
        }
      } else {
        for (int c = 0; c < img.channels(); ++c) {
          out.at(x, y, c) = kFillValue;
        }
      }
    }
  }
  return out;
}

// Per-channel LUT application.
Image apply_lut(const Image& img, const std::array<std::array<uint8_t, 256>, 3>& luts) {
  Image out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        out.at(x, y, c) = luts[c][img.at(x, y, c)];
      }
    }
  }
  return out;
}

// Luminance on the 0..255 scale (ITU 601 weights); equals the channel value
// for grayscale images.
double luma(const Image& img, int x, int y) {
  if (img.channels() == 1) return img.at(x, y, 0);
  return (299.0 * img.at(x, y, 0) + 587.0 * img.at(x, y, 1) +
          114.0 * img.at(x, y, 2)) /
         1000.0;
}

Image smooth_3x3(const Image& img) {
  // 3x3 kernel [[1,1,1],[1,5,1],[1,1,1]]/13 over the interior; the one-pixel
  // border is copied from the source.
  Image out = img;
  if (img.width() < 3 || img.height() < 3) return out;
  for (int y = 1; y + 1 < img.height(); ++y) {
    for (int x = 1; x + 1 < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        int sum = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            int w = (dx == 0 && dy == 0) ? 5 : 1;
            sum += w * img.at(x + dx, y + dy, c);
          }
        }
        out.at(x, y, c) = clamp_u8(sum / 13.0);
      }
    }
  }
  return out;
}

// out = degenerate + factor * (img - degenerate), clamped.
Image blend_from(const Image& degenerate, const Image& img, double factor) {
  Image out = img;
  for (size_t i = 0; i < img.data().size(); ++i) {
    double d = degenerate.data()[i];
    out.data()[i] = clamp_u8(d + factor * (img.data()[i] - d));
  }
  return out;
}

}  // namespace

std::string_view op_name(OpKind op) {
  return kOpNames[static_cast<int>(op)];
}

std::optional<OpKind> op_from_name(std::string_view name) {
  for (int i = 0; i < kNumOps; ++i) {
    if (kOpNames[i] == name) return kAllOps[i];
  }
  return std::nullopt;
}

int translate_pixels(int dim, int mag) {
  return static_cast<int>(std::lround(dim * (10.0 / 32.0) * mag / 9.0));
}

MagnitudeParam magnitude_to_param(OpKind op, int mag) {
  check_mag(mag);
  using Kind = MagnitudeParam::Kind;
  switch (op) {
    case OpKind::kShearX:
    case OpKind::kShearY:
      return {Kind::kShearFactor, 0.3 * mag / 9.0};
    case OpKind::kTranslateX:
    case OpKind::kTranslateY:
      return {Kind::kTranslateFraction, (10.0 / 32.0) * mag / 9.0};
    case OpKind::kRotate:
      return {Kind::kRotateDegrees, 30.0 * mag / 9.0};
    case OpKind::kSolarize:
      return {Kind::kSolarizeThreshold, 256.0 * (1.0 - mag / 9.0)};
    case OpKind::kPosterize:
      return {Kind::kPosterizeBits, 8.0 - std::lround(4.0 * mag / 9.0)};
    case OpKind::kContrast:
    case OpKind::kColor:
    case OpKind::kBrightness:
    case OpKind::kSharpness:
      return {Kind::kEnhanceFactor, 0.1 + 1.8 * mag / 9.0};
    case OpKind::kCutout:
      return {Kind::kCutoutEdgePx, 2.0 * mag};
    case OpKind::kAutoContrast:
    case OpKind::kInvert:
    case OpKind::kEqualize:
      return {Kind::kIgnored, 0.0};
  }
  throw std::invalid_argument("unknown op");
}

Image flip_horizontal_image(const Image& img) {
  Image out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        out.at(x, y, c) = img.at(img.width() - 1 - x, y, c);
      }
    }
  }
  return out;
}

Image shear_x_image(const Image& img, double factor) {
  return affine_sample(img, [&](int x, int y) {
    return std::pair<double, double>(x + factor * y, y);
  });
}

Image shear_y_image(const Image& img, double factor) {
  return affine_sample(img, [&](int x, int y) {
    return std::pair<double, double>(x, y + factor * x);
  });
}

Image translate_image(const Image& img, int dx, int dy) {
  return affine_sample(img, [&](int x, int y) {
    return std::pair<double, double>(x - dx, y - dy);
  });
}

Image rotate_image(const Image& img, double degrees) {
  const double rad = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(rad);
  const double sn = std::sin(rad);
  const double cx = (img.width() - 1) / 2.0;
  const double cy = (img.height() - 1) / 2.0;
  return affine_sample(img, [&](int x, int y) {
    double dx = x - cx;
    double dy = y - cy;
    return std::pair<double, double>(cx + cs * dx + sn * dy,
                                     cy - sn * dx + cs * dy);
  });
}

Image invert_image(const Image& img) {
  Image out = img;
  for (auto& v : out.data()) v = static_cast<uint8_t>(255 - v);
  return out;
}

Image solarize_image(const Image& img, double threshold) {
  Image out = img;
  for (auto& v : out.data()) {
    if (v >= threshold) v = static_cast<uint8_t>(255 - v);
  }
  return out;
}

Image posterize_image(const Image& img, int bits) {
  if (bits < 1 || bits > 8) {
    throw std::invalid_argument("posterize bits must be in [1, 8]");
  }
  const uint8_t mask = static_cast<uint8_t>(0xFFu << (8 - bits));
  Image out = img;
  for (auto& v : out.data()) v = static_cast<uint8_t>(v & mask);
  return out;
}

Image equalize_image(const Image& img) {
  std::array<std::array<uint8_t, 256>, 3> luts;
  for (int c = 0; c < img.channels(); ++c) {
    std::array<int64_t, 256> histo{};
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        ++histo[img.at(x, y, c)];
      }
    }
    int64_t total = static_cast<int64_t>(img.pixel_count());
    int occupied = 0;
    int64_t last = 0;
    for (int i = 0; i < 256; ++i) {
      if (histo[i] > 0) {
        ++occupied;
        last = histo[i];
      }
    }
    auto& lut = luts[c];
    int64_t step = occupied <= 1 ? 0 : (total - last) / 255;
    if (step == 0) {
      for (int i = 0; i < 256; ++i) lut[i] = static_cast<uint8_t>(i);
    } else {
      int64_t n = step / 2;
      for (int i = 0; i < 256; ++i) {
        lut[i] = static_cast<uint8_t>(std::min<int64_t>(255, n / step));
        n += histo[i];
      }
    }
  }
  return apply_lut(img, luts);
}

Image autocontrast_image(const Image& img) {
  std::array<std::array<uint8_t, 256>, 3> luts;
  for (int c = 0; c < img.channels(); ++c) {
    int lo = 255, hi = 0;
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        int v = img.at(x, y, c);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    auto& lut = luts[c];
    if (hi <= lo) {
      for (int i = 0; i < 256; ++i) lut[i] = static_cast<uint8_t>(i);
    } else {
      const double scale = 255.0 / (hi - lo);
      for (int i = 0; i < 256; ++i) {
        lut[i] = clamp_u8((i - lo) * scale);
      }
    }
  }
  return apply_lut(img, luts);
}

Image adjust_brightness(const Image& img, double factor) {
  Image out = img;
  for (auto& v : out.data()) v = clamp_u8(factor * v);
  return out;
}

Image adjust_contrast(const Image& img, double factor) {
  double mean = 0.0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      mean += luma(img, x, y);
    }
  }
  mean /= static_cast<double>(img.pixel_count());
  Image out = img;
  for (auto& v : out.data()) {
    v = clamp_u8(mean + factor * (v - mean));
  }
  return out;
}

Image adjust_color(const Image& img, double factor) {
  if (img.channels() == 1) return img;  // saturation of grayscale is a no-op
  Image out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double gray = luma(img, x, y);
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) = clamp_u8(gray + factor * (img.at(x, y, c) - gray));
      }
    }
  }
  return out;
}

Image adjust_sharpness(const Image& img, double factor) {
  return blend_from(smooth_3x3(img), img, factor);
}

Image cutout_patch(const Image& img, int size_px, Rng& rng) {
  if (size_px < 0 || size_px > std::min(img.width(), img.height())) {
    throw std::invalid_argument("cutout size " + std::to_string(size_px) +
                                " out of range for " +
                                std::to_string(img.width()) + "x" +
                                std::to_string(img.height()));
  }
  const int cx = static_cast<int>(rng.uniform_int(img.width()));
  const int cy = static_cast<int>(rng.uniform_int(img.height()));
  Image out = img;
  if (size_px == 0) return out;
  const int x0 = std::max(0, cx - size_px / 2);
  const int y0 = std::max(0, cy - size_px / 2);
  const int x1 = std::min(img.width(), cx - size_px / 2 + size_px);
  const int y1 = std::min(img.height(), cy - size_px / 2 + size_px);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        out.at(x, y, c) = kFillValue;
      }
    }
  }
  return out;
}

Image apply_op(const Image& img, OpKind op, int mag, Rng& rng) {
  check_mag(mag);
  const MagnitudeParam param = magnitude_to_param(op, mag);
  switch (op) {
    case OpKind::kShearX:
    case OpKind::kShearY:
    case OpKind::kTranslateX:
    case OpKind::kTranslateY:
    case OpKind::kRotate: {
      const double sign = rng.next_double() < 0.5 ? -1.0 : 1.0;
      switch (op) {
        case OpKind::kShearX:
          return shear_x_image(img, sign * param.value);
        case OpKind::kShearY:
          return shear_y_image(img, sign * param.value);
        case OpKind::kTranslateX:
          return translate_image(
              img, static_cast<int>(sign) * translate_pixels(img.width(), mag), 0);
        case OpKind::kTranslateY:
          return translate_image(
              img, 0, static_cast<int>(sign) * translate_pixels(img.height(), mag));
        default:
          return rotate_image(img, sign * param.value);
      }
    }
    case OpKind::kAutoContrast:
      return autocontrast_image(img);
    case OpKind::kInvert:
      return invert_image(img);
    case OpKind::kEqualize:
      return equalize_image(img);
    case OpKind::kSolarize:
      return solarize_image(img, param.value);
    case OpKind::kPosterize:
      return posterize_image(img, static_cast<int>(param.value));
    case OpKind::kContrast:
      return adjust_contrast(img, param.value);
    case OpKind::kColor:
      return adjust_color(img, param.value);
    case OpKind::kBrightness:
      return adjust_brightness(img, param.value);
    case OpKind::kSharpness:
      return adjust_sharpness(img, param.value);
    case OpKind::kCutout: {
      const int edge =
          std::min(static_cast<int>(param.value), std::min(img.width(), img.height()));
      return cutout_patch(img, edge, rng);
    }
  }
  throw std::invalid_argument("unknown op");
}

}  // namespace pba
