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

#include <doctest.h>

#include <cmath>

#include "nigra/io.hpp"
#include "nigra/quantify.hpp"
#include "nigra/synthdata.hpp"
#include "test_util.hpp"

using namespace nigra;
using namespace nigra::quantify;

TEST_CASE("blue normalization examples") {
  CHECK(blue_normalize(100, 100, 100) == doctest::Approx(85.0));
  CHECK(blue_normalize(120, 80, 40) == doctest::Approx(42.5));
  CHECK(blue_normalize(60, 70, 150) == doctest::Approx(136.607).epsilon(1e-5));
  CHECK(blue_normalize(0, 0, 0) == 255.0);
}

TEST_CASE("TH positivity rules") {
  const StainConfig cfg;
  // Glass passes the blue rule but fails the tissue gate.
  CHECK(blue_normalize(255, 255, 255) < cfg.blue_norm_threshold);
  CHECK_FALSE(is_th_positive(255, 255, 255, cfg));
  CHECK(grayscale(120, 80, 40) == 87);
  CHECK(is_th_positive(120, 80, 40, cfg));
  CHECK_FALSE(is_th_positive(60, 70, 150, cfg));
  // Default phantom counterstains must all read negative.
  const synthdata::PhantomSpec spec;
  for (const auto& c : {spec.nissl_background, spec.snr_counterstain, spec.sncd_counterstain}) {
    CHECK_FALSE(is_th_positive(c[0], c[1], c[2], cfg));
  }
  StainConfig bad;
  bad.blue_norm_threshold = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("optical density") {
  CHECK(optical_density(255) == 0.0);
  CHECK(std::abs(optical_density(0) - 2.40654) < 1e-5);
  CHECK(optical_density(0) == optical_density(1));
  CHECK(std::abs(optical_density(127.5) - 0.30103) < 1e-5);
  for (int i = 1; i < 256; ++i) CHECK(optical_density(i) <= optical_density(i - 1));
  for (int i = 2; i < 256; ++i) CHECK(optical_density(i) < optical_density(i - 1));
  CHECK(max_optical_density() == doctest::Approx(std::log10(255.0)));
  CHECK_THROWS_AS(optical_density(-1), ValidationError);
  CHECK_THROWS_AS(optical_density(256), ValidationError);
}

TEST_CASE("region OD: hand arithmetic") {
  const StainConfig cfg;
  const ClassCatalog cat = ClassCatalog::Default();
  // Four SNr pixels; two brown, two blue.
  RasterImage im(4, 1);
  im.set(0, 0, 120, 80, 40);
  im.set(1, 0, 60, 40, 20);
  im.set(2, 0, 60, 70, 150);
  im.set(3, 0, 60, 70, 150);
  LabelMask mask(4, 1, 1);
  const double od0 = -std::log10(std::lround(0.299 * 120 + 0.587 * 80 + 0.114 * 40) / 255.0);
  const double od1 = -std::log10(std::lround(0.299 * 60 + 0.587 * 40 + 0.114 * 20) / 255.0);
  const auto r = region_od(im, mask, 1, "SNr", cfg);
  CHECK(r.region_area == 4);
  CHECK(r.positive_pixel_count == 2);
  CHECK(r.summed_od == doctest::Approx(od0 + od1).epsilon(1e-12));
  CHECK(r.normalized_od == doctest::Approx((od0 + od1) / 4).epsilon(1e-12));

  const auto all = quantify_sample(im, mask, cat, cfg);
  REQUIRE(all.size() == 2);
  CHECK(all[1].region == "SNCD");
  CHECK(all[1].empty);
  CHECK(all[1].region_area == 0);

  LabelMask none(4, 1, 1);
  RasterImage blue(4, 1);
  for (int x = 0; x < 4; ++x) blue.set(x, 0, 60, 70, 150);
  CHECK(region_od(blue, none, 1, "SNr", cfg).normalized_od == 0.0);
  CHECK_THROWS_AS(region_od(im, LabelMask(3, 1), 1, "SNr", cfg), ValidationError);
}

TEST_CASE("region OD properties") {
  const StainConfig cfg;
  Rng rng = make_rng(21, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto im = testing::random_image(12, 10, rng);
    const auto mask = testing::random_mask(12, 10, 3, rng);
    const auto r = region_od(im, mask, 1, "SNr", cfg);
    CHECK(r.normalized_od >= 0.0);
    CHECK(r.normalized_od <= max_optical_density());
    CHECK(r.positive_pixel_count <= r.region_area);

    // Tiling the image side by side doubles area and sum, keeping the ratio.
    RasterImage im2(24, 10);
    LabelMask m2(24, 10);
    for (int y = 0; y < 10; ++y) {
      for (int x = 0; x < 24; ++x) {
        im2.set(x, y, im.at(x % 12, y, 0), im.at(x % 12, y, 1), im.at(x % 12, y, 2));
        m2.at(x, y) = mask.at(x % 12, y);
      }
    }
    const auto r2 = region_od(im2, m2, 1, "SNr", cfg);
    CHECK(r2.region_area == 2 * r.region_area);
    CHECK(r2.normalized_od == doctest::Approx(r.normalized_od).epsilon(1e-12));

    // Darkening a positive pixel never lowers the sum.
    auto dark = im;
    const auto pos = th_positive_mask(im, cfg);
    for (int i = 0; i < 120; ++i) {
      if (pos[i] && mask.data()[i] == 1) {
        for (int c = 0; c < 3; ++c) dark.data()[i * 3 + c] = static_cast<std::uint8_t>(dark.data()[i * 3 + c] / 2);
        if (is_th_positive(dark.data()[i * 3], dark.data()[i * 3 + 1], dark.data()[i * 3 + 2], cfg)) {
          CHECK(region_od(dark, mask, 1, "SNr", cfg).summed_od >= r.summed_od - 1e-12);
        }
        break;
      }
    }
  }
}

TEST_CASE("mask upscaling for high resolution quantification") {
  const StainConfig cfg;
  RasterImage im(4, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) im.set(x, y, 120, 80, 40);
  }
  LabelMask low(2, 2);
  low.at(0, 0) = 1;
  const auto r = region_od(im, low, 1, "SNr", cfg, 2);
  CHECK(r.region_area == 4);
  CHECK(r.positive_pixel_count == 4);
}

TEST_CASE("phantom OD matches the generator's analytic truth") {
  synthdata::PhantomSpec spec;
  spec.th_scale_snr = {0.2, 1.0};
  spec.th_scale_sncd = {0.2, 1.0};
  const ClassCatalog cat = ClassCatalog::Default();
  for (int i = 0; i < 10; ++i) {
    const auto s = synthdata::generate_phantom(spec, i);
    const auto got = quantify_sample(s.image, s.mask, cat, StainConfig{});
    REQUIRE(got.size() == s.truth.size());
    for (std::size_t k = 0; k < got.size(); ++k) {
      CHECK(got[k].region == s.truth[k].region);
      CHECK(got[k].region_area == s.truth[k].region_area);
      CHECK(got[k].positive_pixel_count == s.truth[k].positive_pixel_count);
      CHECK(std::abs(got[k].normalized_od - s.truth[k].normalized_od) < 1e-9);
    }
  }
}

TEST_CASE("hemisphere loss preset lowers the right side") {
  synthdata::PhantomSpec spec;
  spec.hemisphere_loss = true;
  const ClassCatalog cat = ClassCatalog::Default();
  for (int i = 0; i < 5; ++i) {
    const auto s = synthdata::generate_phantom(spec, i);
    const auto rows = quantify_hemispheres(s.image, s.mask, cat, StainConfig{});
    auto find = [&](const std::string& name) {
      for (const auto& r : rows) {
        if (r.region == name) return r.normalized_od;
      }
      FAIL("missing row " << name);
      return 0.0;
    };
    CHECK(find("SNr_right") < find("SNr_left"));
    CHECK(find("SNCD_right") < find("SNCD_left"));
    for (const auto& t : s.truth_hemispheres) CHECK(std::abs(find(t.region) - t.normalized_od) < 1e-9);
  }
}

TEST_CASE("identical masks give identical results and CSV round-trips") {
  const auto s = synthdata::generate_phantom(synthdata::PhantomSpec{}, 3);
  const ClassCatalog cat = ClassCatalog::Default();
  const auto a = quantify_sample(s.image, s.mask, cat, StainConfig{});
  const auto b = quantify_sample(s.image, LabelMask(s.mask), cat, StainConfig{});
  std::vector<OdRow> rows;
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].summed_od == b[k].summed_od);
    rows.push_back({"p3", "gt", a[k]});
  }
  RegionODResult empty;
  empty.region = "SNCD";
  rows.push_back({"p4", "model", empty});
  const auto dir = testing::scratch_dir("odcsv");
  io::write_text(dir / "od.csv", to_csv(rows));
  const auto back = parse_od_csv((dir / "od.csv").string());
  REQUIRE(back.size() == rows.size());
  CHECK(back[0].result.summed_od == rows[0].result.summed_od);
  CHECK(back[0].result.normalized_od == rows[0].result.normalized_od);
  CHECK(back.back().result.empty);
  CHECK(to_csv(back) == to_csv(rows));
}

TEST_CASE("overlay paints positives purple") {
  RasterImage im(3, 3, 200);
  im.set(1, 1, 120, 80, 40);
  LabelMask mask(3, 3, 1);
  const auto out = render_overlay(im, mask, StainConfig{});
  CHECK(out.at(1, 1, 0) == 128);
  CHECK(out.at(1, 1, 1) == 0);
  CHECK(out.at(1, 1, 2) == 160);
}

TEST_CASE("TH-positive mask is per-pixel") {
  Rng rng = make_rng(22, 0);
  const auto im = testing::random_image(9, 7, rng);
  const auto pos = th_positive_mask(im, StainConfig{});
  // Reversing pixel order reverses the mask.
  RasterImage rev(9, 7);
  for (int i = 0; i < 63; ++i) {
    for (int c = 0; c < 3; ++c) rev.data()[(62 - i) * 3 + c] = im.data()[i * 3 + c];
  }
  const auto pos_rev = th_positive_mask(rev, StainConfig{});
  for (int i = 0; i < 63; ++i) CHECK(pos[i] == pos_rev[62 - i]);
}
