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
#include "nigra/report.hpp"
#include "oracles.hpp"

using namespace nigra;
using namespace nigra::report;

namespace {

PairedSeries series(std::vector<double> x, std::vector<double> y) {
  PairedSeries s;
  for (std::size_t i = 0; i < x.size(); ++i) s.labels.push_back("s" + std::to_string(i));
  s.x = std::move(x);
  s.y = std::move(y);
  return s;
}

quantify::OdRow od_row(const std::string& id, const std::string& source, const std::string& region, double od) {
  quantify::RegionODResult r;
  r.region = region;
  r.region_area = 100;
  r.empty = false;
  r.normalized_od = od;
  r.summed_od = od * 100;
  return {id, source, r};
}

}  // namespace

TEST_CASE("t distribution p-value against numerical integration") {
  for (double df : {3.0, 10.0, 18.0}) {
    for (double t = -10.0; t <= 10.0; t += 0.25) {
      CAPTURE(df);
      CAPTURE(t);
      CHECK(std::abs(student_t_two_sided_p(t, df) - testing::t_two_sided_oracle(t, df)) < 1e-8);
    }
  }
  CHECK(student_t_two_sided_p(INFINITY, 5) == 0.0);
  CHECK(student_t_two_sided_p(0.0, 5) == 1.0);
  double prev = 1.0;
  for (double t = 0.0; t < 20.0; t += 0.5) {
    const double p = student_t_two_sided_p(t, 7);
    CHECK(p <= prev);
    prev = p;
  }
}

TEST_CASE("worked five-point example") {
  const auto r = correlate(series({1, 2, 3, 4, 5}, {2, 1, 4, 3, 5}));
  CHECK(std::abs(r.pearson_r - 0.8) < 1e-12);
  CHECK(r.t_statistic == doctest::Approx(0.8 * std::sqrt(3 / 0.36)).epsilon(1e-12));
  CHECK(std::abs(r.p_value - 0.1040) < 1e-3);
  CHECK(std::abs(r.p_value - testing::t_two_sided_oracle(r.t_statistic, 3)) < 1e-8);
  CHECK(r.slope == doctest::Approx(0.8));
  CHECK(r.intercept == doctest::Approx(0.6));
}

TEST_CASE("perfect lines") {
  std::vector<double> x, y, z;
  for (int i = 0; i < 20; ++i) {
    x.push_back(i);
    y.push_back(2 * i + 1);
  }
  const auto r = correlate(series(x, y));
  CHECK(r.pearson_r == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.r_squared == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.p_value < 1e-12);
  for (int i = 0; i < 10; ++i) z.push_back(-x[i]);
  const auto neg = correlate(series({x.begin(), x.begin() + 10}, z));
  CHECK(neg.pearson_r == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(neg.r_squared == doctest::Approx(1.0).epsilon(1e-12));
  // Infinite t serializes as null.
  CHECK(to_json(r)["t_statistic"].is_null() == !std::isfinite(r.t_statistic));
}

TEST_CASE("correlation symmetry and affine invariance") {
  Rng rng = make_rng(6, 0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> x(12), y(12), ax(12);
    for (int i = 0; i < 12; ++i) {
      x[i] = standard_normal(rng);
      y[i] = 0.5 * x[i] + standard_normal(rng);
      ax[i] = 3.0 * x[i] - 7.0;
    }
    const auto a = correlate(series(x, y));
    CHECK(correlate(series(y, x)).pearson_r == doctest::Approx(a.pearson_r).epsilon(1e-12));
    CHECK(correlate(series(ax, y)).pearson_r == doctest::Approx(a.pearson_r).epsilon(1e-12));
    CHECK(a.r_squared == doctest::Approx(a.pearson_r * a.pearson_r).epsilon(1e-12));
    CHECK(a.p_value >= 0.0);
    CHECK(a.p_value <= 1.0);
  }
}

TEST_CASE("degenerate input") {
  try {
    correlate(series({1, 1, 1, 1}, {1, 2, 3, 4}));
    FAIL("expected a degenerate-input error");
  } catch (const DegenerateInputError& e) {
    CHECK(std::string(e.what()).find("x") != std::string::npos);
  }
  CHECK_THROWS_AS(correlate(series({1, 2, 3, 4}, {5, 5, 5, 5})), DegenerateInputError);
  CHECK_THROWS_AS(correlate(series({1, 2}, {1, 2})), ValidationError);
  CHECK_THROWS_AS(correlate(series({1, 2, NAN}, {1, 2, 3})), ValidationError);
}

TEST_CASE("OD rows pair by sample and region") {
  std::vector<quantify::OdRow> rows;
  for (int i = 0; i < 5; ++i) {
    rows.push_back(od_row("p" + std::to_string(i), "gt", "SNr", 0.1 * i));
    rows.push_back(od_row("p" + std::to_string(i), "model", "SNr", 0.1 * i + 0.01));
  }
  rows.push_back(od_row("p9", "gt", "SNr", 0.3));  // no model partner
  const auto pairs = pair_od_rows(rows, "gt", "model");
  REQUIRE(pairs.count("SNr"));
  CHECK(pairs.at("SNr").x.size() == 5);
  CHECK(pairs.at("pooled").x.size() == 5);
  CHECK(pairs.at("SNr").y[2] == doctest::Approx(0.21));
}

TEST_CASE("report bundle with one and two runs") {
  Rng rng = make_rng(7, 0);
  const auto cat = ClassCatalog::Default();
  auto run = [&](bool elastic) {
    const auto a = testing::random_mask(16, 16, 3, rng);
    const auto b = testing::random_mask(16, 16, 3, rng);
    return MetricRun{elastic ? "with_et" : "without_et", elastic, metrics::evaluate(a, b, cat)};
  };
  ReportInputs one;
  one.metric_runs.push_back(run(false));
  const auto d1 = testing::scratch_dir("report1");
  const auto b1 = build_report(one, d1);
  const auto table = io::read_text(d1 / "metrics_table.csv");
  CHECK(table.rfind("metric,without_et,with_et,published_reference\n", 0) == 0);
  CHECK(table.find("absent") != std::string::npos);
  CHECK(table.find("0.79") != std::string::npos);
  CHECK_FALSE(b1.missing.empty());

  ReportInputs two = one;
  two.metric_runs.push_back(run(true));
  for (int i = 0; i < 6; ++i) {
    two.od_rows.push_back(od_row("p" + std::to_string(i), "gt", "SNr", 0.05 * i));
    two.od_rows.push_back(od_row("p" + std::to_string(i), "model", "SNr", 0.05 * i + 0.002 * (i % 2)));
  }
  const auto d2 = testing::scratch_dir("report2");
  build_report(two, d2);
  CHECK(io::read_text(d2 / "metrics_table.csv").find("absent") == std::string::npos);
  CHECK(std::filesystem::exists(d2 / "correlation_SNr.csv"));
  CHECK(std::filesystem::exists(d2 / "correlation_pooled.csv"));
  const auto j = nlohmann::json::parse(io::read_text(d2 / "report.json"));
  CHECK(j["reference"]["correlation_r_squared"]["SNr"].get<double>() == 0.8678);

  const auto d3 = testing::scratch_dir("report3");
  build_report(two, d3);
  CHECK(io::read_text(d3 / "report.json") == io::read_text(d2 / "report.json"));

  const auto back = metric_report_from_json(metrics::to_json(two.metric_runs[0].report));
  CHECK(metrics::to_json(back) == metrics::to_json(two.metric_runs[0].report));
}
