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

#ifndef PBA_AUGMENT_HPP_
#define PBA_AUGMENT_HPP_

#include <array>
#include <optional>
#include <string_view>

#include "pba/image.hpp"
#include "pba/rng.hpp"

namespace pba {

/// The 15 augmentation operations searched over. Each has a stable lowercase
/// name used in schedule files.
enum class OpKind {
  kShearX,
  kShearY,
  kTranslateX,
  kTranslateY,
  kRotate,
  kAutoContrast,
  kInvert,
  kEqualize,
  kSolarize,
  kPosterize,
  kContrast,
  kColor,
  kBrightness,
  kSharpness,
  kCutout,
};

inline constexpr int kNumOps = 15;

inline constexpr std::array<OpKind, kNumOps> kAllOps = {
    OpKind::kShearX,     OpKind::kShearY,   OpKind::kTranslateX,
    OpKind::kTranslateY, OpKind::kRotate,   OpKind::kAutoContrast,
    OpKind::kInvert,     OpKind::kEqualize, OpKind::kSolarize,
    OpKind::kPosterize,  OpKind::kContrast, OpKind::kColor,
    OpKind::kBrightness, OpKind::kSharpness, OpKind::kCutout,
};

std::string_view op_name(OpKind op);
std::optional<OpKind> op_from_name(std::string_view name);

/// Magnitude levels run 0..9. Probability levels (see policy.hpp) run 0..10.
inline constexpr int kNumMagLevels = 10;

/// Fill value for pixels vacated by geometric ops and for cutout patches.
inline constexpr uint8_t kFillValue = 128;

/// What a magnitude level means for a given op.
struct MagnitudeParam {
  enum class Kind {
    kIgnored,            // auto_contrast, invert, equalize
    kShearFactor,        // 0.3 * m/9
    kTranslateFraction,  // (10/32) * m/9 of the image dimension
    kRotateDegrees,      // 30 * m/9
    kSolarizeThreshold,  // 256 * (1 - m/9); pixels >= threshold are inverted
    kPosterizeBits,      // 8 - round(4 * m/9) bits kept
    kEnhanceFactor,      // 0.1 + 1.8 * m/9
    kCutoutEdgePx,       // 2 * m
  };
  Kind kind;
  double value;  // 0 when kind == kIgnored
};

/// Maps a discrete magnitude level to the op's continuous parameter.
MagnitudeParam magnitude_to_param(OpKind op, int mag);

/// Applies one op at the given magnitude level. Returns a new image of the
/// same dimensions; all output values stay in [0, 255].
///
/// Randomness, in draw order: shear/translate/rotate draw one sign (negate
/// the displacement with probability 0.5); cutout draws its patch center
/// (two draws, uniform over the image). All other ops draw nothing. The sign
/// and center draws happen even at identity magnitudes so that RNG
/// consumption per op is fixed.
///
/// The cutout patch edge is clamped to min(width, height).
Image apply_op(const Image& img, OpKind op, int mag, Rng& rng);

/// Writes a size_px x size_px square of kFillValue centered at a uniformly
/// random pixel, clipped at the borders. size_px must be in
/// [0, min(width, height)]; size 0 is the identity (the center is still
/// drawn, keeping RNG accounting uniform).
Image cutout_patch(const Image& img, int size_px, Rng& rng);

// Deterministic building blocks, also used for dataset nuisance transforms.
// Geometric ops use nearest-neighbor sampling and fill vacated pixels with
// kFillValue.
Image flip_horizontal_image(const Image& img);
Image shear_x_image(const Image& img, double factor);
Image shear_y_image(const Image& img, double factor);
Image translate_image(const Image& img, int dx, int dy);
Image rotate_image(const Image& img, double degrees);
Image invert_image(const Image& img);
Image solarize_image(const Image& img, double threshold);
Image posterize_image(const Image& img, int bits);
Image equalize_image(const Image& img);
Image autocontrast_image(const Image& img);
Image adjust_contrast(const Image& img, double factor);
Image adjust_color(const Image& img, double factor);
Image adjust_brightness(const Image& img, double factor);
Image adjust_sharpness(const Image& img, double factor);

/// Pixel displacement used by translate_x/translate_y at level mag:
/// round(dim * (10/32) * mag/9).
int translate_pixels(int dim, int mag);

}  // namespace pba

#endif  // PBA_AUGMENT_HPP_
