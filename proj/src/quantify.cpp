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

#include "nigra/quantify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nigra/io.hpp"

namespace nigra::quantify {

void StainConfig::validate() const {
  if (!(blue_norm_threshold > 0.0 && blue_norm_threshold < 255.0)) {
    throw ValidationError("stain.blue_norm_threshold must lie in (0, 255)");
  }
  if (tissue_intensity_max <= 0 || tissue_intensity_max > 255) {
    throw ValidationError("stain.tissue_intensity_max must lie in (0, 255]");
  }
  for (double w : gray_weights) {
    if (w < 0.0) throw ValidationError("stain.gray_weights must be non-negative");
  }
}

double blue_normalize(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const int sum = int(r) + int(g) + int(b);
  if (sum == 0) return 255.0;
  return 255.0 * b / sum;
}

std::uint8_t grayscale(std::uint8_t r, std::uint8_t g, std::uint8_t b, const std::array<double, 3>& weights) {
  const double v = weights[0] * r + weights[1] * g + weights[2] * b;
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

double optical_density(double intensity) {
  if (!(intensity >= 0.0 && intensity <= 255.0)) {
    std::ostringstream msg;
    msg << "intensity " << intensity << " outside [0, 255]";
    throw ValidationError(msg.str());
  }
  return -std::log10(std::max(intensity, 1.0) / 255.0);
}

double max_optical_density() { return std::log10(255.0); }

bool is_th_positive(std::uint8_t r, std::uint8_t g, std::uint8_t b, const StainConfig& config) {
  return blue_normalize(r, g, b) < config.blue_norm_threshold &&
         grayscale(r, g, b, config.gray_weights) < config.tissue_intensity_max;
}

std::vector<std::uint8_t> th_positive_mask(const RasterImage& image, const StainConfig& config) {
  config.validate();
  std::vector<std::uint8_t> out(static_cast<std::size_t>(image.width()) * image.height());
  auto px = image.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = is_th_positive(px[3 * i], px[3 * i + 1], px[3 * i + 2], config) ? 1 : 0;
  }
  return out;
}

namespace {

void check_geometry(const RasterImage& image, const LabelMask& mask, int mask_scale) {
  if (mask_scale < 1) throw ValidationError("mask_scale must be >= 1");
  if (image.width() != mask.width() * mask_scale || image.height() != mask.height() * mask_scale) {
    std::ostringstream msg;
    msg << "image " << image.width() << "x" << image.height() << " does not match mask " << mask.width() << "x"
        << mask.height() << " at scale " << mask_scale;
    throw ValidationError(msg.str());
  }
}

// Accumulates over image pixels whose (upscaled) mask label is region_class and
// whose x lies in [x_begin, x_end).
RegionODResult accumulate(const RasterImage& image, const LabelMask& mask, ClassId region_class,
                          const std::string& name, const StainConfig& config, int mask_scale, int x_begin,
                          int x_end) {
  RegionODResult r;
  r.region = name;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = x_begin; x < x_end; ++x) {
      if (mask.at(x / mask_scale, y / mask_scale) != region_class) continue;
      ++r.region_area;
      const auto red = image.at(x, y, 0);
      const auto green = image.at(x, y, 1);
      const auto blue = image.at(x, y, 2);
      if (!is_th_positive(red, green, blue, config)) continue;
      ++r.positive_pixel_count;
      r.summed_od += optical_density(grayscale(red, green, blue, config.gray_weights));
    }
  }
  r.empty = r.region_area == 0;
  r.normalized_od = r.empty ? 0.0 : r.summed_od / static_cast<double>(r.region_area);
  return r;
}

}  // namespace

RegionODResult region_od(const RasterImage& image, const LabelMask& mask, ClassId region_class,
                         const std::string& region_name, const StainConfig& config, int mask_scale) {
  config.validate();
  check_geometry(image, mask, mask_scale);
  return accumulate(image, mask, region_class, region_name, config, mask_scale, 0, image.width());
}

std::vector<RegionODResult> quantify_sample(const RasterImage& image, const LabelMask& mask,
                                            const ClassCatalog& catalog, const StainConfig& config,
                                            int mask_scale) {
  config.validate();
  check_geometry(image, mask, mask_scale);
  mask.validate(catalog);
  std::vector<RegionODResult> out;
  for (ClassId id : catalog.foreground()) {
    out.push_back(accumulate(image, mask, id, catalog.name(id), config, mask_scale, 0, image.width()));
  }
  return out;
}

std::vector<RegionODResult> quantify_hemispheres(const RasterImage& image, const LabelMask& mask,
                                                 const ClassCatalog& catalog, const StainConfig& config,
                                                 int mask_scale) {
  config.validate();
  check_geometry(image, mask, mask_scale);
  mask.validate(catalog);
  const int mid = image.width() / 2;
  std::vector<RegionODResult> out;
  for (ClassId id : catalog.foreground()) {
    const auto& name = catalog.name(id);
    out.push_back(accumulate(image, mask, id, name + "_left", config, mask_scale, 0, mid));
    out.push_back(accumulate(image, mask, id, name + "_right", config, mask_scale, mid, image.width()));
  }
  return out;
}

RasterImage render_overlay(const RasterImage& image, const LabelMask& mask, const StainConfig& config,
                           int mask_scale) {
  config.validate();
  check_geometry(image, mask, mask_scale);
  RasterImage out = image;
  auto label = [&](int x, int y) { return mask.at(x / mask_scale, y / mask_scale); };
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (label(x, y) != 0 && is_th_positive(image.at(x, y, 0), image.at(x, y, 1), image.at(x, y, 2), config)) {
        out.set(x, y, 128, 0, 160);
      }
    }
  }
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const ClassId c = label(x, y);
      if (c == 0) continue;
      bool edge = x == 0 || y == 0 || x == image.width() - 1 || y == image.height() - 1 ||
                  label(x - 1, y) != c || label(x + 1, y) != c || label(x, y - 1) != c || label(x, y + 1) != c;
      if (!edge) continue;
      if (c == 1) {
        out.set(x, y, 230, 20, 20);
      } else if (c == 2) {
        out.set(x, y, 20, 200, 20);
      } else {
        out.set(x, y, 20, 20, 230);
      }
    }
  }
  return out;
}

std::string od_csv_header() {
  return "sample_id,region,mask_source,region_area,positive_pixels,summed_od,normalized_od";
}

std::string to_csv(const std::vector<OdRow>& rows) {
  std::ostringstream out;
  out << od_csv_header() << "\n";
  for (const auto& row : rows) {
    const auto& r = row.result;
    out << row.sample_id << ',' << r.region << ',' << row.mask_source << ',' << r.region_area << ','
        << r.positive_pixel_count << ',' << io::format_double(r.summed_od) << ','
        << (r.empty ? std::string("nan") : io::format_double(r.normalized_od)) << "\n";
  }
  return out.str();
}

std::vector<OdRow> parse_od_csv(const std::string& path) {
  auto table = io::read_csv(path);
  const auto c_id = table.column("sample_id");
  const auto c_region = table.column("region");
  const auto c_source = table.column("mask_source");
  const auto c_area = table.column("region_area");
  const auto c_pos = table.column("positive_pixels");
  const auto c_sum = table.column("summed_od");
  const auto c_norm = table.column("normalized_od");
  std::vector<OdRow> rows;
  for (const auto& cells : table.rows) {
    OdRow row;
    row.sample_id = cells[c_id];
    row.mask_source = cells[c_source];
    row.result.region = cells[c_region];
    try {
      row.result.region_area = std::stoull(cells[c_area]);
      row.result.positive_pixel_count = std::stoull(cells[c_pos]);
      row.result.summed_od = std::stod(cells[c_sum]);
    } catch (const std::exception&) {
      throw ValidationError("malformed numeric cell in " + path + " for sample " + row.sample_id);
    }
    row.result.empty = row.result.region_area == 0;
    row.result.normalized_od = row.result.empty ? 0.0 : std::stod(cells[c_norm]);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace nigra::quantify
