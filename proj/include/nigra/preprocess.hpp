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

#ifndef NIGRA_PREPROCESS_HPP_
#define NIGRA_PREPROCESS_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "nigra/core.hpp"

namespace nigra::preprocess {

enum class ResizeMode {
  kStretch,    // plain resize to target x target
  kLetterbox,  // preserve aspect, pad image white and mask background
};

// Bilinear with half-pixel centers. Same-size input is returned unchanged.
RasterImage resize_image(const RasterImage& image, int width, int height);

// Nearest neighbour, src = floor(dst * in / out). Never introduces new ids.
LabelMask resize_mask(const LabelMask& mask, int width, int height);

std::pair<RasterImage, LabelMask> resize_pair(const RasterImage& image, const LabelMask& mask, int target,
                                              ResizeMode mode = ResizeMode::kStretch);

struct ChannelStats {
  std::array<double, 3> mean{};
  std::array<double, 3> stddev{1.0, 1.0, 1.0};
};

// Planar float tensor (C, H, W).
struct ImageTensor {
  int width = 0;
  int height = 0;
  std::vector<float> chw;
};

// Samples / 255, then (v - mean) / std per channel when stats are given.
ImageTensor normalize_image(const RasterImage& image, const std::optional<ChannelStats>& stats = std::nullopt);

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

// Seeded Fisher-Yates permutation; val and test sizes are floor(n * ratio),
// the remainder goes to train. Output keeps the input order, with split set.
std::vector<AnnotatedSample> split_dataset(std::vector<AnnotatedSample> samples, SplitRatios ratios,
                                           std::uint64_t seed);

}  // namespace nigra::preprocess

#endif  // NIGRA_PREPROCESS_HPP_
