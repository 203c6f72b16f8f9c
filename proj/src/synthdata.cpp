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

#include "nigra/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nigra/io.hpp"
#include "nigra/random.hpp"

namespace nigra::synthdata {

namespace {

constexpr int kMaxPlacementAttempts = 100;
constexpr double kHemisphereShrink = 0.6;
constexpr double kHemisphereCenterX = 0.28;
constexpr double kMinAreaFraction = 0.005;
constexpr double kMaxAreaFraction = 0.15;

// Stream tags for the per-(seed, index) generators.
constexpr std::uint64_t kGeometryStream = 1;
constexpr std::uint64_t kPixelStream = 2;
constexpr std::uint64_t kScaleStream = 3;

struct Harmonic {
  int order;
  double amplitude;
  double phase;
};

// Ellipse with a low-frequency radial perturbation, in pixel units.
struct Blob {
  double cx = 0, cy = 0, rx = 1, ry = 1, tilt = 0;
  std::vector<Harmonic> harmonics;

  bool contains(double x, double y) const {
    const double dx = x - cx;
    const double dy = y - cy;
    const double c = std::cos(tilt);
    const double s = std::sin(tilt);
    const double a = (c * dx + s * dy) / rx;
    const double b = (-s * dx + c * dy) / ry;
    const double rho = std::hypot(a, b);
    const double theta = std::atan2(b, a);
    double radius = 1.0;
    for (const auto& h : harmonics) radius += h.amplitude * std::cos(h.order * theta + h.phase);
    return rho <= radius;
  }

  double max_extent() const {
    double amp = 0.0;
    for (const auto& h : harmonics) amp += std::abs(h.amplitude);
    return std::max(rx, ry) * (1.0 + amp);
  }

  Blob mirrored(double width) const {
    Blob m = *this;
    m.cx = width - cx;
    m.tilt = -tilt;
    // Mirroring x maps theta to pi - theta.
    for (auto& h : m.harmonics) h.phase = h.order * M_PI - h.phase;
    return m;
  }
};

std::vector<Harmonic> draw_harmonics(Rng& rng, const RegionGeometry& g) {
  const int span = g.max_harmonics - g.min_harmonics + 1;
  const int count = g.min_harmonics + static_cast<int>(uniform_index(rng, span));
  std::vector<Harmonic> out;
  for (int k = 0; k < count; ++k) {
    Harmonic h;
    h.order = 2 + k;
    h.amplitude = g.boundary_noise * uniform(rng, 0.3, 1.0) / count;
    h.phase = uniform(rng, 0.0, 2.0 * M_PI);
    out.push_back(h);
  }
  return out;
}

struct Complex {
  Blob snr;
  Blob sncd;
};

Complex draw_complex(Rng& rng, const RegionGeometry& g, double size, double center_x, double shrink) {
  Complex c;
  c.snr.cx = (center_x + uniform(rng, -g.center_jitter, g.center_jitter)) * size;
  c.snr.cy = (g.center_y + uniform(rng, -g.center_jitter, g.center_jitter)) * size;
  c.snr.rx = uniform(rng, g.snr_radius_x.lo, g.snr_radius_x.hi) * size * shrink;
  c.snr.ry = uniform(rng, g.snr_radius_y.lo, g.snr_radius_y.hi) * size * shrink;
  c.snr.tilt = uniform(rng, -g.max_tilt_radians, g.max_tilt_radians);
  c.snr.harmonics = draw_harmonics(rng, g);

  c.sncd.rx = uniform(rng, g.sncd_radius_x.lo, g.sncd_radius_x.hi) * size * shrink;
  c.sncd.ry = uniform(rng, g.sncd_radius_y.lo, g.sncd_radius_y.hi) * size * shrink;
  c.sncd.tilt = c.snr.tilt;
  c.sncd.harmonics = draw_harmonics(rng, g);
  // Dorsal offset along the complex's own vertical axis.
  const double lateral = uniform(rng, -0.3, 0.3) * c.snr.rx;
  const double dorsal = c.snr.ry * (1.0 + g.boundary_noise) + c.sncd.ry * (1.0 + g.boundary_noise) + g.gap * size;
  const double ct = std::cos(c.snr.tilt);
  const double st = std::sin(c.snr.tilt);
  c.sncd.cx = c.snr.cx + ct * lateral + st * dorsal;
  c.sncd.cy = c.snr.cy + st * lateral - ct * dorsal;
  return c;
}

bool fits(const Blob& b, double size) {
  const double e = b.max_extent();
  return b.cx - e >= 1.0 && b.cy - e >= 1.0 && b.cx + e <= size - 1.0 && b.cy + e <= size - 1.0;
}

// Returns false on overlap.
bool rasterize(const std::vector<Complex>& complexes, int size, LabelMask& mask) {
  mask = LabelMask(size, size, 0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double px = x + 0.5;
      const double py = y + 0.5;
      for (const auto& c : complexes) {
        const bool in_snr = c.snr.contains(px, py);
        const bool in_sncd = c.sncd.contains(px, py);
        if (in_snr && in_sncd) return false;
        if (in_snr) mask.at(x, y) = 1;
        if (in_sncd) mask.at(x, y) = 2;
      }
    }
  }
  return true;
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))); }

// Independent of the quantify module: 8-bit luma, then -log10(I/255) with I >= 1.
double painted_pixel_od(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const long luma = std::lround(std::clamp(0.299 * r + 0.587 * g + 0.114 * b, 0.0, 255.0));
  return std::log10(255.0) - std::log10(static_cast<double>(std::max(luma, 1L)));
}

void check_range(const Range& r, const char* name, double lo, double hi) {
  if (!(r.lo >= lo && r.hi <= hi && r.lo <= r.hi)) {
    std::ostringstream msg;
    msg << "phantom " << name << " range [" << r.lo << ", " << r.hi << "] must be ordered within [" << lo << ", "
        << hi << "]";
    throw ValidationError(msg.str());
  }
}

}  // namespace

void PhantomSpec::validate() const {
  if (image_size < 16) throw ValidationError("phantom image_size must be at least 16");
  if (n_samples < 0) throw ValidationError("phantom n_samples must be non-negative");
  check_range(th_scale_snr, "th_scale_snr", 0.0, 1.0);
  check_range(th_scale_sncd, "th_scale_sncd", 0.0, 1.0);
  check_range(geometry.snr_radius_x, "snr_radius_x", 0.0, 0.5);
  check_range(geometry.snr_radius_y, "snr_radius_y", 0.0, 0.5);
  check_range(geometry.sncd_radius_x, "sncd_radius_x", 0.0, 0.5);
  check_range(geometry.sncd_radius_y, "sncd_radius_y", 0.0, 0.5);
  if (!(th_density >= 0.0 && th_density <= 1.0)) throw ValidationError("phantom th_density must lie in [0, 1]");
  if (!(stain_jitter >= 0.0 && stain_jitter < 1.0)) throw ValidationError("phantom stain_jitter must lie in [0, 1)");
  if (!(texture_amplitude >= 0.0 && texture_amplitude < 1.0)) {
    throw ValidationError("phantom texture_amplitude must lie in [0, 1)");
  }
  if (!(hemisphere_loss_factor >= 0.0 && hemisphere_loss_factor <= 1.0)) {
    throw ValidationError("phantom hemisphere_loss_factor must lie in [0, 1]");
  }
  if (!(geometry.boundary_noise >= 0.0 && geometry.boundary_noise < 0.9)) {
    throw ValidationError("phantom boundary_noise must lie in [0, 0.9)");
  }
  if (geometry.min_harmonics < 1 || geometry.max_harmonics < geometry.min_harmonics) {
    throw ValidationError("phantom harmonic counts must satisfy 1 <= min <= max");
  }
}

PhantomSample generate_phantom(const PhantomSpec& spec, int index) {
  spec.validate();
  if (index < 0) throw ValidationError("phantom index must be non-negative");
  const int size = spec.image_size;
  const auto stream = static_cast<std::uint64_t>(index) << 8;

  PhantomSample out;
  Rng scale_rng = make_rng(spec.seed, stream | kScaleStream);
  out.snr_scale = uniform(scale_rng, spec.th_scale_snr.lo, spec.th_scale_snr.hi);
  out.sncd_scale = uniform(scale_rng, spec.th_scale_sncd.lo, spec.th_scale_sncd.hi);

  Rng geo_rng = make_rng(spec.seed, stream | kGeometryStream);
  const double total = static_cast<double>(size) * size;
  bool placed = false;
  for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
    std::vector<Complex> complexes;
    if (spec.hemisphere_loss) {
      Complex left = draw_complex(geo_rng, spec.geometry, size, kHemisphereCenterX, kHemisphereShrink);
      complexes.push_back(left);
      complexes.push_back({left.snr.mirrored(size), left.sncd.mirrored(size)});
    } else {
      complexes.push_back(draw_complex(geo_rng, spec.geometry, size, spec.geometry.center_x, 1.0));
    }
    bool inside = std::all_of(complexes.begin(), complexes.end(),
                              [&](const Complex& c) { return fits(c.snr, size) && fits(c.sncd, size); });
    if (!inside || !rasterize(complexes, size, out.mask)) continue;
    std::array<std::size_t, 3> counts{};
    for (auto v : out.mask.data()) ++counts[v];
    const double f1 = counts[1] / total;
    const double f2 = counts[2] / total;
    placed = f1 >= kMinAreaFraction && f1 <= kMaxAreaFraction && f2 >= kMinAreaFraction && f2 <= kMaxAreaFraction;
  }
  if (!placed) {
    throw GenerationError("phantom " + std::to_string(index) + ": no non-overlapping SNr/SNCD layout within area " +
                          "bounds after " + std::to_string(kMaxPlacementAttempts) + " attempts");
  }

  out.image = RasterImage(size, size);
  Rng px_rng = make_rng(spec.seed, stream | kPixelStream);
  const std::array<Rgb, 3> counterstain{spec.nissl_background, spec.snr_counterstain, spec.sncd_counterstain};
  // [class][hemisphere]: area, positives, summed OD
  struct Tally {
    std::uint64_t area = 0;
    std::uint64_t positive = 0;
    double od = 0.0;
  };
  std::array<std::array<Tally, 2>, 3> tally{};
  std::array<Tally, 3> whole{};
  const int mid = size / 2;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      // Always three draws per pixel so the stream is independent of the labels.
      const double u_texture = uniform01(px_rng);
      const double u_select = uniform01(px_rng);
      const double u_jitter = uniform01(px_rng);
      const ClassId label = out.mask.at(x, y);
      const int side = x < mid ? 0 : 1;
      double scale = label == 1 ? out.snr_scale : (label == 2 ? out.sncd_scale : 0.0);
      if (spec.hemisphere_loss && side == 1) scale *= spec.hemisphere_loss_factor;
      const bool stained = label != 0 && u_select < spec.th_density * scale;
      std::uint8_t r, g, b;
      if (stained) {
        const double j = 1.0 + spec.stain_jitter * (2.0 * u_jitter - 1.0);
        r = to_byte(spec.th_stain[0] * j);
        g = to_byte(spec.th_stain[1] * j);
        b = to_byte(spec.th_stain[2] * j);
      } else {
        const double f = 1.0 + spec.texture_amplitude * (2.0 * u_texture - 1.0);
        const Rgb& base = counterstain[label];
        r = to_byte(base[0] * f);
        g = to_byte(base[1] * f);
        b = to_byte(base[2] * f);
      }
      out.image.set(x, y, r, g, b);
      if (label == 0) continue;
      ++whole[label].area;
      ++tally[label][side].area;
      if (stained) {
        const double od = painted_pixel_od(r, g, b);
        ++whole[label].positive;
        whole[label].od += od;
        ++tally[label][side].positive;
        tally[label][side].od += od;
      }
    }
  }

  auto make = [](const std::string& name, const Tally& t) {
    quantify::RegionODResult r;
    r.region = name;
    r.region_area = t.area;
    r.positive_pixel_count = t.positive;
    r.summed_od = t.od;
    r.empty = t.area == 0;
    r.normalized_od = r.empty ? 0.0 : t.od / static_cast<double>(t.area);
    return r;
  };
  const std::array<const char*, 3> names{"background", "SNr", "SNCD"};
  for (int c = 1; c <= 2; ++c) out.truth.push_back(make(names[c], whole[c]));
  if (spec.hemisphere_loss) {
    for (int c = 1; c <= 2; ++c) {
      out.truth_hemispheres.push_back(make(std::string(names[c]) + "_left", tally[c][0]));
      out.truth_hemispheres.push_back(make(std::string(names[c]) + "_right", tally[c][1]));
    }
  }
  return out;
}

GeneratedDataset generate_dataset(const PhantomSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  GeneratedDataset ds;
  ds.manifest_path = out_dir / "manifest.json";
  std::vector<quantify::OdRow> truth_rows;
  for (int i = 0; i < spec.n_samples; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "phantom_%04d", i);
    PhantomSample sample = generate_phantom(spec, i);
    AnnotatedSample s;
    s.sample_id = id;
    s.image_path = (out_dir / "images" / (std::string(id) + ".png")).string();
    s.mask_path = (out_dir / "masks" / (std::string(id) + ".png")).string();
    io::write_image(sample.image, s.image_path);
    io::write_mask(sample.mask, s.mask_path);
    for (const auto& r : sample.truth) truth_rows.push_back({id, "analytic", r});
    for (const auto& r : sample.truth_hemispheres) truth_rows.push_back({id, "analytic", r});
    ds.manifest.push_back(std::move(s));
  }
  if (!ds.manifest.empty()) {
    ds.manifest = preprocess::split_dataset(std::move(ds.manifest), spec.split, spec.seed);
  }
  io::write_manifest(ds.manifest, ds.manifest_path);
  io::write_text(out_dir / "ground_truth_od.csv", quantify::to_csv(truth_rows));
  return ds;
}

}  // namespace nigra::synthdata
