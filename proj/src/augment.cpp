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

#include "nigra/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nigra/io.hpp"
#include "nigra/random.hpp"

namespace nigra::augment {

namespace {

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(std::string("augment.") + name + " must lie in [0, 1]");
}

// Reflect-101 index, as in OpenCV's default border.
int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

template <typename F>
RasterImage remap_exact(const RasterImage& src, int w, int h, F source_of) {
  RasterImage out(w, h);
  out.resolution_microns_per_pixel = src.resolution_microns_per_pixel;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto [sx, sy] = source_of(x, y);
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = src.at(sx, sy, c);
    }
  }
  return out;
}

template <typename F>
LabelMask remap_exact(const LabelMask& src, int w, int h, F source_of) {
  LabelMask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto [sx, sy] = source_of(x, y);
      out.at(x, y) = src.at(sx, sy);
    }
  }
  return out;
}

// Bilinear with reflect-101 borders.
template <typename F>
RasterImage remap_bilinear(const RasterImage& src, F source_of) {
  const int w = src.width();
  const int h = src.height();
  RasterImage out(w, h);
  out.resolution_microns_per_pixel = src.resolution_microns_per_pixel;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto [fx, fy] = source_of(x, y);
      const double fx0 = std::floor(fx);
      const double fy0 = std::floor(fy);
      const double wx = fx - fx0;
      const double wy = fy - fy0;
      const int x0 = reflect(static_cast<int>(fx0), w);
      const int x1 = reflect(static_cast<int>(fx0) + 1, w);
      const int y0 = reflect(static_cast<int>(fy0), h);
      const int y1 = reflect(static_cast<int>(fy0) + 1, h);
      for (int c = 0; c < 3; ++c) {
        const double top = src.at(x0, y0, c) * (1 - wx) + src.at(x1, y0, c) * wx;
        const double bottom = src.at(x0, y1, c) * (1 - wx) + src.at(x1, y1, c) * wx;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(std::clamp(top * (1 - wy) + bottom * wy, 0.0, 255.0)));
      }
    }
  }
  return out;
}

// Nearest neighbour; reflect-101 borders, or fill_outside when set.
template <typename F>
LabelMask remap_nearest(const LabelMask& src, F source_of, std::optional<ClassId> fill_outside) {
  const int w = src.width();
  const int h = src.height();
  LabelMask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto [fx, fy] = source_of(x, y);
      const int sx = static_cast<int>(std::floor(fx + 0.5));
      const int sy = static_cast<int>(std::floor(fy + 0.5));
      if (fill_outside && (sx < 0 || sy < 0 || sx >= w || sy >= h)) {
        out.at(x, y) = *fill_outside;
      } else {
        out.at(x, y) = src.at(reflect(sx, w), reflect(sy, h));
      }
    }
  }
  return out;
}

struct Rotation {
  double cx, cy, c, s;
  std::pair<double, double> operator()(int x, int y) const {
    // Inverse map: rotate destination back by -angle.
    const double dx = x - cx;
    const double dy = y - cy;
    return {c * dx - s * dy + cx, s * dx + c * dy + cy};
  }
};

Rotation make_rotation(int w, int h, double degrees) {
  const double a = degrees * std::numbers::pi / 180.0;
  return {(w - 1) / 2.0, (h - 1) / 2.0, std::cos(a), std::sin(a)};
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

void blur_separable(std::vector<double>& field, int w, int h, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  std::vector<double> tmp(field.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * field[static_cast<std::size_t>(y) * w + reflect(x + i, w)];
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp[static_cast<std::size_t>(reflect(y + i, h)) * w + x];
      field[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
}

}  // namespace

void AugmentationConfig::validate() const {
  check_probability(rotation_p, "rotation_p");
  check_probability(vertical_flip_p, "vertical_flip_p");
  check_probability(horizontal_flip_p, "horizontal_flip_p");
  check_probability(rot90_p, "rot90_p");
  check_probability(transpose_p, "transpose_p");
  check_probability(elastic_p, "elastic_p");
  check_probability(noise_p, "noise_p");
  if (!(rotation_max_degrees >= 0.0)) throw ValidationError("augment.rotation_max_degrees must be >= 0");
  if (!(elastic_alpha > 0.0)) throw ValidationError("augment.elastic_alpha must be > 0");
  if (!(elastic_sigma > 0.0)) throw ValidationError("augment.elastic_sigma must be > 0");
  if (!(noise_variance_lo >= 0.0 && noise_variance_hi >= noise_variance_lo)) {
    throw ValidationError("augment noise variance range must be non-negative and ordered");
  }
}

AugmentationConfig AugmentationConfig::Disabled() {
  AugmentationConfig c;
  c.rotation_p = c.vertical_flip_p = c.horizontal_flip_p = c.rot90_p = c.transpose_p = 0.0;
  c.elastic_p = c.noise_p = 0.0;
  return c;
}

AugmentDraw sample_draw(const AugmentationConfig& config, std::uint64_t draw_seed) {
  config.validate();
  Rng rng = make_rng(config.seed, draw_seed);
  AugmentDraw d;
  // Parameters are drawn even when a transform is skipped so the stream layout is fixed.
  const double u_rot = uniform01(rng), angle = uniform(rng, -config.rotation_max_degrees, config.rotation_max_degrees);
  const double u_v = uniform01(rng);
  const double u_h = uniform01(rng);
  const double u_r90 = uniform01(rng);
  const int turns = 1 + static_cast<int>(uniform_index(rng, 3));
  const double u_t = uniform01(rng);
  const double u_e = uniform01(rng);
  const std::uint64_t elastic_seed = rng();
  const double u_n = uniform01(rng);
  const double variance = uniform(rng, config.noise_variance_lo, config.noise_variance_hi);
  d.noise_seed = rng();
  if (u_rot < config.rotation_p) d.rotation_degrees = angle;
  d.vertical_flip = u_v < config.vertical_flip_p;
  d.horizontal_flip = u_h < config.horizontal_flip_p;
  if (u_r90 < config.rot90_p) d.rot90_turns = turns;
  d.transpose = u_t < config.transpose_p;
  if (u_e < config.elastic_p) d.elastic_seed = elastic_seed;
  if (u_n < config.noise_p) d.noise_variance = variance;
  return d;
}

AugmentDraw forced_draw(const AugmentationConfig& config, const std::string& transform, std::uint64_t draw_seed) {
  AugmentationConfig c = AugmentationConfig::Disabled();
  c.rotation_max_degrees = config.rotation_max_degrees;
  c.elastic_alpha = config.elastic_alpha;
  c.elastic_sigma = config.elastic_sigma;
  c.noise_variance_lo = config.noise_variance_lo;
  c.noise_variance_hi = config.noise_variance_hi;
  c.seed = config.seed;
  if (transform == "rotation") {
    c.rotation_p = 1.0;
  } else if (transform == "vertical_flip") {
    c.vertical_flip_p = 1.0;
  } else if (transform == "horizontal_flip") {
    c.horizontal_flip_p = 1.0;
  } else if (transform == "random_rot90") {
    c.rot90_p = 1.0;
  } else if (transform == "transpose") {
    c.transpose_p = 1.0;
  } else if (transform == "elastic") {
    c.elastic_p = 1.0;
  } else if (transform == "gaussian_noise") {
    c.noise_p = 1.0;
  } else {
    throw ValidationError("unknown augmentation transform '" + transform + "'");
  }
  return sample_draw(c, draw_seed);
}

std::pair<RasterImage, LabelMask> apply_draw(const RasterImage& image, const LabelMask& mask, const AugmentDraw& draw,
                                             const AugmentationConfig& config) {
  if (image.width() != mask.width() || image.height() != mask.height()) {
    throw ValidationError("augment: image and mask dimensions differ");
  }
  RasterImage img = image;
  LabelMask msk = mask;
  if (draw.rotation_degrees) {
    img = rotate(img, *draw.rotation_degrees);
    msk = rotate(msk, *draw.rotation_degrees);
  }
  if (draw.vertical_flip) {
    img = flip_vertical(img);
    msk = flip_vertical(msk);
  }
  if (draw.horizontal_flip) {
    img = flip_horizontal(img);
    msk = flip_horizontal(msk);
  }
  if (draw.rot90_turns != 0) {
    img = rot90(img, draw.rot90_turns);
    msk = rot90(msk, draw.rot90_turns);
  }
  if (draw.transpose) {
    img = transpose(img);
    msk = transpose(msk);
  }
  if (draw.elastic_seed) {
    auto field = elastic_field(img.width(), img.height(), config.elastic_alpha, config.elastic_sigma, *draw.elastic_seed);
    img = warp(img, field);
    msk = warp(msk, field);
  }
  if (draw.noise_variance) img = add_gaussian_noise(img, *draw.noise_variance, draw.noise_seed);
  return {std::move(img), std::move(msk)};
}

std::pair<RasterImage, LabelMask> apply(const RasterImage& image, const LabelMask& mask,
                                        const AugmentationConfig& config, std::uint64_t draw_seed) {
  return apply_draw(image, mask, sample_draw(config, draw_seed), config);
}

RasterImage flip_horizontal(const RasterImage& image) {
  const int w = image.width();
  return remap_exact(image, w, image.height(), [w](int x, int y) { return std::pair{w - 1 - x, y}; });
}
LabelMask flip_horizontal(const LabelMask& mask) {
  const int w = mask.width();
  return remap_exact(mask, w, mask.height(), [w](int x, int y) { return std::pair{w - 1 - x, y}; });
}
RasterImage flip_vertical(const RasterImage& image) {
  const int h = image.height();
  return remap_exact(image, image.width(), h, [h](int x, int y) { return std::pair{x, h - 1 - y}; });
}
LabelMask flip_vertical(const LabelMask& mask) {
  const int h = mask.height();
  return remap_exact(mask, mask.width(), h, [h](int x, int y) { return std::pair{x, h - 1 - y}; });
}
RasterImage transpose(const RasterImage& image) {
  return remap_exact(image, image.height(), image.width(), [](int x, int y) { return std::pair{y, x}; });
}
LabelMask transpose(const LabelMask& mask) {
  return remap_exact(mask, mask.height(), mask.width(), [](int x, int y) { return std::pair{y, x}; });
}

namespace {

template <typename Raster>
Raster rot90_impl(const Raster& src, int turns) {
  turns = ((turns % 4) + 4) % 4;
  const int w = src.width();
  const int h = src.height();
  switch (turns) {
    case 1: return remap_exact(src, h, w, [w](int x, int y) { return std::pair{w - 1 - y, x}; });
    case 2: return remap_exact(src, w, h, [w, h](int x, int y) { return std::pair{w - 1 - x, h - 1 - y}; });
    case 3: return remap_exact(src, h, w, [h](int x, int y) { return std::pair{y, h - 1 - x}; });
    default: return src;
  }
}

}  // namespace

RasterImage rot90(const RasterImage& image, int turns) { return rot90_impl(image, turns); }
LabelMask rot90(const LabelMask& mask, int turns) { return rot90_impl(mask, turns); }

RasterImage rotate(const RasterImage& image, double degrees) {
  return remap_bilinear(image, make_rotation(image.width(), image.height(), degrees));
}

LabelMask rotate(const LabelMask& mask, double degrees) {
  return remap_nearest(mask, make_rotation(mask.width(), mask.height(), degrees), ClassId{0});
}

DisplacementField elastic_field(int width, int height, double alpha, double sigma, std::uint64_t seed) {
  DisplacementField f;
  f.width = width;
  f.height = height;
  const std::size_t n = static_cast<std::size_t>(width) * height;
  f.dx.resize(n);
  f.dy.resize(n);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) f.dx[i] = standard_normal(rng);
  for (std::size_t i = 0; i < n; ++i) f.dy[i] = standard_normal(rng);
  blur_separable(f.dx, width, height, sigma);
  blur_separable(f.dy, width, height, sigma);
  for (std::size_t i = 0; i < n; ++i) {
    f.dx[i] *= alpha;
    f.dy[i] *= alpha;
  }
  return f;
}

RasterImage warp(const RasterImage& image, const DisplacementField& field) {
  if (field.width != image.width() || field.height != image.height()) {
    throw ValidationError("displacement field does not match image size");
  }
  return remap_bilinear(image, [&](int x, int y) {
    const std::size_t i = static_cast<std::size_t>(y) * field.width + x;
    return std::pair{x + field.dx[i], y + field.dy[i]};
  });
}

LabelMask warp(const LabelMask& mask, const DisplacementField& field) {
  if (field.width != mask.width() || field.height != mask.height()) {
    throw ValidationError("displacement field does not match mask size");
  }
  return remap_nearest(
      mask,
      [&](int x, int y) {
        const std::size_t i = static_cast<std::size_t>(y) * field.width + x;
        return std::pair{x + field.dx[i], y + field.dy[i]};
      },
      std::nullopt);
}

RasterImage add_gaussian_noise(const RasterImage& image, double variance, std::uint64_t seed) {
  RasterImage out = image;
  Rng rng(seed);
  const double sd = std::sqrt(variance);
  for (auto& v : out.data()) {
    v = static_cast<std::uint8_t>(std::lround(std::clamp(v + sd * standard_normal(rng), 0.0, 255.0)));
  }
  return out;
}

RasterImage montage(const std::vector<RasterImage>& tiles) {
  if (tiles.empty()) throw ValidationError("montage needs at least one tile");
  if (tiles.size() == 1) return tiles.front();
  int tw = 0, th = 0;
  for (const auto& t : tiles) {
    tw = std::max(tw, t.width());
    th = std::max(th, t.height());
  }
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(tiles.size()))));
  const int rows = static_cast<int>((tiles.size() + cols - 1) / cols);
  RasterImage out(cols * tw, rows * th, 255);
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const int ox = static_cast<int>(i % cols) * tw;
    const int oy = static_cast<int>(i / cols) * th;
    for (int y = 0; y < tiles[i].height(); ++y) {
      for (int x = 0; x < tiles[i].width(); ++x) {
        for (int c = 0; c < 3; ++c) out.at(ox + x, oy + y, c) = tiles[i].at(x, y, c);
      }
    }
  }
  return out;
}

PreviewResult preview(const RasterImage& image, const LabelMask& mask, const AugmentationConfig& config, int n,
                      const std::filesystem::path& out_dir, bool per_transform) {
  if (n < 1) throw ValidationError("preview needs n >= 1");
  config.validate();
  PreviewResult result;
  std::vector<RasterImage> tiles;
  for (int i = 0; i < n; ++i) {
    const std::string name = per_transform ? kTransformNames[i % kTransformNames.size()] : "random";
    const auto draw_seed = static_cast<std::uint64_t>(i);
    AugmentDraw draw = per_transform ? forced_draw(config, name, draw_seed) : sample_draw(config, draw_seed);
    auto [img, msk] = apply_draw(image, mask, draw, config);
    char stem[64];
    std::snprintf(stem, sizeof(stem), "variant_%02d_%s.png", i, name.c_str());
    const auto path = out_dir / stem;
    io::write_image(img, path);
    io::write_mask(msk, out_dir / "masks" / stem);
    result.variant_files.push_back(path);
    tiles.push_back(std::move(img));
  }
  result.montage_file = out_dir / "montage.png";
  io::write_image(montage(tiles), result.montage_file);
  return result;
}

}  // namespace nigra::augment
