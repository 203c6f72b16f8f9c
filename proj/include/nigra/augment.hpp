// Copyright 2026 The Nigra Authors. All Rights Reserved.
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

#ifndef NIGRA_AUGMENT_HPP_
#define NIGRA_AUGMENT_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nigra/core.hpp"

namespace nigra::augment {

struct AugmentationConfig {
  double rotation_p = 0.5;
  double rotation_max_degrees = 30.0;
  double vertical_flip_p = 0.5;
  double horizontal_flip_p = 0.5;
  double rot90_p = 0.5;
  double transpose_p = 0.5;
  double elastic_p = 0.3;
  double elastic_alpha = 40.0;  // displacement scale, pixels per unit smoothed noise
  double elastic_sigma = 6.0;   // Gaussian smoothing, pixels
  double noise_p = 0.3;
  double noise_variance_lo = 10.0;  // 8-bit units squared
  double noise_variance_hi = 50.0;
  std::uint64_t seed = 0;

  void validate() const;

  // Every probability set to zero.
  static AugmentationConfig Disabled();
};

// Transform names, in application order.
inline constexpr std::array<const char*, 7> kTransformNames{
    "rotation", "vertical_flip", "horizontal_flip", "random_rot90", "transpose", "elastic", "gaussian_noise"};

// Concrete parameters of one stochastic draw.
struct AugmentDraw {
  std::optional<double> rotation_degrees;
  bool vertical_flip = false;
  bool horizontal_flip = false;
  int rot90_turns = 0;  // counter-clockwise quarter turns, 0..3
  bool transpose = false;
  std::optional<std::uint64_t> elastic_seed;
  std::optional<double> noise_variance;
  std::uint64_t noise_seed = 0;
};

AugmentDraw sample_draw(const AugmentationConfig& config, std::uint64_t draw_seed);

// A draw that applies exactly one named transform with freshly sampled parameters.
AugmentDraw forced_draw(const AugmentationConfig& config, const std::string& transform, std::uint64_t draw_seed);

std::pair<RasterImage, LabelMask> apply_draw(const RasterImage& image, const LabelMask& mask, const AugmentDraw& draw,
                                             const AugmentationConfig& config);

// Geometric transforms share parameters between image and mask; noise touches
// the image only. Deterministic for (config, draw_seed).
std::pair<RasterImage, LabelMask> apply(const RasterImage& image, const LabelMask& mask,
                                        const AugmentationConfig& config, std::uint64_t draw_seed);

// Building blocks, exposed for tests.
RasterImage flip_horizontal(const RasterImage& image);
LabelMask flip_horizontal(const LabelMask& mask);
RasterImage flip_vertical(const RasterImage& image);
LabelMask flip_vertical(const LabelMask& mask);
RasterImage transpose(const RasterImage& image);
LabelMask transpose(const LabelMask& mask);
RasterImage rot90(const RasterImage& image, int turns);
LabelMask rot90(const LabelMask& mask, int turns);

// Rotation about the image centre: image reflects at borders, mask fills background.
RasterImage rotate(const RasterImage& image, double degrees);
LabelMask rotate(const LabelMask& mask, double degrees);

// Per-pixel displacement (dx, dy), row-major.
struct DisplacementField {
  int width = 0;
  int height = 0;
  std::vector<double> dx;
  std::vector<double> dy;
};
DisplacementField elastic_field(int width, int height, double alpha, double sigma, std::uint64_t seed);
RasterImage warp(const RasterImage& image, const DisplacementField& field);
LabelMask warp(const LabelMask& mask, const DisplacementField& field);

RasterImage add_gaussian_noise(const RasterImage& image, double variance, std::uint64_t seed);

struct PreviewResult {
  std::vector<std::filesystem::path> variant_files;
  std::filesystem::path montage_file;
};

// Writes n variants (masks under masks/) and montage.png. With per_transform,
// variant i forces kTransformNames[i % 7] alone.
PreviewResult preview(const RasterImage& image, const LabelMask& mask, const AugmentationConfig& config, int n,
                      const std::filesystem::path& out_dir, bool per_transform);

// Row-major grid with ceil(sqrt(n)) columns, white filler.
RasterImage montage(const std::vector<RasterImage>& tiles);

}  // namespace nigra::augment

#endif  // NIGRA_AUGMENT_HPP_
