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

#ifndef NIGRA_SYNTHDATA_HPP_
#define NIGRA_SYNTHDATA_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "nigra/core.hpp"
#include "nigra/preprocess.hpp"
#include "nigra/quantify.hpp"

namespace nigra::synthdata {

// Geometry parameters cannot produce a valid layout.
class GenerationError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

using Rgb = std::array<std::uint8_t, 3>;

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

// Lengths are fractions of the image side.
struct RegionGeometry {
  double center_x = 0.5;
  double center_y = 0.58;
  double center_jitter = 0.05;
  Range snr_radius_x{0.15, 0.20};
  Range snr_radius_y{0.07, 0.10};
  Range sncd_radius_x{0.12, 0.16};
  Range sncd_radius_y{0.045, 0.06};
  double max_tilt_radians = 0.3;
  double gap = 0.012;              // SNCD sits this far dorsal of SNr
  double boundary_noise = 0.12;    // relative radial amplitude of the harmonics
  int min_harmonics = 3;
  int max_harmonics = 6;
};

struct PhantomSpec {
  int image_size = 128;
  int n_samples = 10;
  std::uint64_t seed = 0;
  Rgb nissl_background{130, 150, 240};
  Rgb snr_counterstain{105, 110, 215};
  Rgb sncd_counterstain{80, 80, 190};
  Rgb th_stain{120, 80, 40};
  double texture_amplitude = 0.06;  // luminance jitter of counterstain
  double stain_jitter = 0.10;       // multiplicative jitter of TH pixels
  double th_density = 0.5;          // stained fraction of a region at scale 1
  Range th_scale_snr{1.0, 1.0};     // per-phantom TH intensity scale, sampled uniformly
  Range th_scale_sncd{1.0, 1.0};
  RegionGeometry geometry;
  // Two mirrored SN complexes; the right one is painted at hemisphere_loss_factor
  // times the sampled scale.
  bool hemisphere_loss = false;
  double hemisphere_loss_factor = 0.3;
  preprocess::SplitRatios split{};

  void validate() const;
};

struct PhantomSample {
  RasterImage image;
  LabelMask mask;
  // Analytic normalized OD over painted pixels, one per foreground class.
  std::vector<quantify::RegionODResult> truth;
  // "<name>_left"/"<name>_right" rows when hemisphere_loss is set.
  std::vector<quantify::RegionODResult> truth_hemispheres;
  double snr_scale = 0.0;
  double sncd_scale = 0.0;
};

// Deterministic in (spec.seed, index).
PhantomSample generate_phantom(const PhantomSpec& spec, int index);

struct GeneratedDataset {
  std::vector<AnnotatedSample> manifest;
  std::filesystem::path manifest_path;
};

// Writes images/, masks/, manifest.json and ground_truth_od.csv under out_dir.
GeneratedDataset generate_dataset(const PhantomSpec& spec, const std::filesystem::path& out_dir);

}  // namespace nigra::synthdata

#endif  // NIGRA_SYNTHDATA_HPP_
