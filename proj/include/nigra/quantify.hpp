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

#ifndef NIGRA_QUANTIFY_HPP_
#define NIGRA_QUANTIFY_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nigra/core.hpp"

namespace nigra::quantify {

// Thresholds for calling a pixel TH (brown, DAB-like) positive.
struct StainConfig {
  double blue_norm_threshold = 110.0;  // positive when 255*B/(R+G+B) is below this
  int tissue_intensity_max = 230;      // grayscale at or above this is glass
  std::array<double, 3> gray_weights{0.299, 0.587, 0.114};

  void validate() const;
};

struct RegionODResult {
  std::string region;
  std::uint64_t region_area = 0;
  std::uint64_t positive_pixel_count = 0;
  double summed_od = 0.0;
  double normalized_od = 0.0;
  // Zero-area region: normalized_od is undefined and reported as 0.
  bool empty = true;
};

// 255*B/(R+G+B); black maps to 255 so it never reads as stain.
double blue_normalize(std::uint8_t r, std::uint8_t g, std::uint8_t b);

// Weighted sum rounded to the nearest 8-bit level.
std::uint8_t grayscale(std::uint8_t r, std::uint8_t g, std::uint8_t b,
                       const std::array<double, 3>& weights = {0.299, 0.587, 0.114});

// -log10(I/255) with I below 1 clamped to 1. Throws outside [0, 255].
double optical_density(double intensity);

// Largest per-pixel optical density, log10(255).
double max_optical_density();

bool is_th_positive(std::uint8_t r, std::uint8_t g, std::uint8_t b, const StainConfig& config);

// Row-major, 1 for positive pixels.
std::vector<std::uint8_t> th_positive_mask(const RasterImage& image, const StainConfig& config);

// Sums OD over pixels that are in the region and TH positive, then divides by
// the full region area. mask_scale > 1 upsamples a low-resolution mask by that
// integer factor (nearest) to match a high-resolution image.
RegionODResult region_od(const RasterImage& image, const LabelMask& mask, ClassId region_class,
                         const std::string& region_name, const StainConfig& config, int mask_scale = 1);

// One result per foreground class of the catalog; absent regions are flagged empty.
std::vector<RegionODResult> quantify_sample(const RasterImage& image, const LabelMask& mask,
                                            const ClassCatalog& catalog, const StainConfig& config,
                                            int mask_scale = 1);

// As quantify_sample, but split at the vertical midline into "<name>_left" and
// "<name>_right" rows, for hemi-brain comparisons.
std::vector<RegionODResult> quantify_hemispheres(const RasterImage& image, const LabelMask& mask,
                                                 const ClassCatalog& catalog, const StainConfig& config,
                                                 int mask_scale = 1);

// Positive pixels inside foreground regions painted purple; SNr outlined red,
// SNCD green (further classes blue).
RasterImage render_overlay(const RasterImage& image, const LabelMask& mask, const StainConfig& config,
                           int mask_scale = 1);

struct OdRow {
  std::string sample_id;
  std::string mask_source;  // "gt" or "model"
  RegionODResult result;
};

std::string od_csv_header();
std::string to_csv(const std::vector<OdRow>& rows);
std::vector<OdRow> parse_od_csv(const std::string& path);

}  // namespace nigra::quantify

#endif  // NIGRA_QUANTIFY_HPP_
