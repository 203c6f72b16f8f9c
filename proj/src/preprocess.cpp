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

#include "nigra/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nigra/random.hpp"

namespace nigra::preprocess {

RasterImage resize_image(const RasterImage& image, int width, int height) {
  if (width <= 0 || height <= 0) throw ValidationError("resize target must be positive");
  if (image.width() == width && image.height() == height) return image;
  if (image.empty()) throw ValidationError("cannot resize an empty image");
  RasterImage out(width, height);
  out.resolution_microns_per_pixel = image.resolution_microns_per_pixel;
  if (image.resolution_microns_per_pixel) {
    *out.resolution_microns_per_pixel *= static_cast<double>(image.width()) / width;
  }
  const double sx = static_cast<double>(image.width()) / width;
  const double sy = static_cast<double>(image.height()) / height;
  for (int y = 0; y < height; ++y) {
    double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height() - 1.0);
    int y0 = static_cast<int>(fy);
    int y1 = std::min(y0 + 1, image.height() - 1);
    double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width() - 1.0);
      int x0 = static_cast<int>(fx);
      int x1 = std::min(x0 + 1, image.width() - 1);
      double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        double top = image.at(x0, y0, c) * (1 - wx) + image.at(x1, y0, c) * wx;
        double bottom = image.at(x0, y1, c) * (1 - wx) + image.at(x1, y1, c) * wx;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(top * (1 - wy) + bottom * wy));
      }
    }
  }
  return out;
}

LabelMask resize_mask(const LabelMask& mask, int width, int height) {
  if (width <= 0 || height <= 0) throw ValidationError("resize target must be positive");
  if (mask.width() == width && mask.height() == height) return mask;
  if (mask.pixel_count() == 0) throw ValidationError("cannot resize an empty mask");
  LabelMask out(width, height);
  for (int y = 0; y < height; ++y) {
    int sy = std::min(static_cast<int>(static_cast<std::int64_t>(y) * mask.height() / height), mask.height() - 1);
    for (int x = 0; x < width; ++x) {
      int sx = std::min(static_cast<int>(static_cast<std::int64_t>(x) * mask.width() / width), mask.width() - 1);
      out.at(x, y) = mask.at(sx, sy);
    }
  }
  return out;
}

std::pair<RasterImage, LabelMask> resize_pair(const RasterImage& image, const LabelMask& mask, int target,
                                              ResizeMode mode) {
  if (image.width() != mask.width() || image.height() != mask.height()) {
    throw ValidationError("image is " + std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                          " but mask is " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()));
  }
  if (target <= 0) throw ValidationError("resize target must be positive");
  if (mode == ResizeMode::kStretch || image.width() == image.height()) {
    return {resize_image(image, target, target), resize_mask(mask, target, target)};
  }
  const double scale = static_cast<double>(target) / std::max(image.width(), image.height());
  const int w = std::max(1, static_cast<int>(std::lround(image.width() * scale)));
  const int h = std::max(1, static_cast<int>(std::lround(image.height() * scale)));
  RasterImage small = resize_image(image, w, h);
  LabelMask small_mask = resize_mask(mask, w, h);
  RasterImage out(target, target, 255);
  out.resolution_microns_per_pixel = small.resolution_microns_per_pixel;
  LabelMask out_mask(target, target, 0);
  const int ox = (target - w) / 2;
  const int oy = (target - h) / 2;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) out.at(ox + x, oy + y, c) = small.at(x, y, c);
      out_mask.at(ox + x, oy + y) = small_mask.at(x, y);
    }
  }
  return {std::move(out), std::move(out_mask)};
}

ImageTensor normalize_image(const RasterImage& image, const std::optional<ChannelStats>& stats) {
  ImageTensor t;
  t.width = image.width();
  t.height = image.height();
  const std::size_t plane = static_cast<std::size_t>(t.width) * t.height;
  t.chw.resize(plane * 3);
  auto src = image.data();
  for (int c = 0; c < 3; ++c) {
    const double mean = stats ? stats->mean[c] : 0.0;
    const double inv_std = stats ? 1.0 / stats->stddev[c] : 1.0;
    for (std::size_t p = 0; p < plane; ++p) {
      t.chw[c * plane + p] = static_cast<float>((src[p * 3 + c] / 255.0 - mean) * inv_std);
    }
  }
  return t;
}

std::vector<AnnotatedSample> split_dataset(std::vector<AnnotatedSample> samples, SplitRatios ratios,
                                           std::uint64_t seed) {
  if (samples.empty()) throw ValidationError("cannot split an empty sample list");
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw ValidationError("split ratios must be non-negative and sum to 1");
  }
  const std::size_t n = samples.size();
  // The epsilon keeps 0.1 * 10 style products from flooring to one less.
  const auto n_val = static_cast<std::size_t>(std::floor(n * ratios.val + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(n * ratios.test + 1e-9));
  const std::size_t n_train = n - n_val - n_test;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, 0x5b117);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[uniform_index(rng, i)]);
  }
  for (std::size_t rank = 0; rank < n; ++rank) {
    Split s = rank < n_train ? Split::kTrain : (rank < n_train + n_val ? Split::kVal : Split::kTest);
    samples[order[rank]].split = s;
  }
  return samples;
}

}  // namespace nigra::preprocess
