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

#include "nigra/report.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "nigra/io.hpp"

namespace nigra::report {

using nlohmann::json;

void PairedSeries::validate() const {
  if (x.size() != y.size() || (!labels.empty() && labels.size() != x.size())) {
    throw ValidationError("paired series lengths differ");
  }
  if (x.size() < 3) throw ValidationError("correlation needs at least 3 pairs, got " + std::to_string(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      throw ValidationError("non-finite value in paired series at index " + std::to_string(i) +
                            (labels.empty() ? "" : " (" + labels[i] + ")"));
    }
  }
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw ValidationError("degrees of freedom must be positive");
  if (std::isnan(t)) throw ValidationError("t statistic is NaN");
  if (std::isinf(t)) return 0.0;
  return boost::math::ibeta(df / 2.0, 0.5, df / (df + t * t));
}

CorrelationResult correlate(const PairedSeries& s) {
  s.validate();
  const std::size_t n = s.x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += s.x[i];
    my += s.y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = s.x[i] - mx, dy = s.y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0) throw DegenerateInputError("x (manual) series is constant; correlation undefined");
  if (syy == 0.0) throw DegenerateInputError("y (model) series is constant; correlation undefined");
  CorrelationResult r;
  r.n = n;
  r.pearson_r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  r.r_squared = r.pearson_r * r.pearson_r;
  const double df = static_cast<double>(n - 2);
  const double rest = 1.0 - r.r_squared;
  r.t_statistic = rest <= 0.0 ? std::copysign(std::numeric_limits<double>::infinity(), r.pearson_r)
                              : r.pearson_r * std::sqrt(df / rest);
  r.p_value = student_t_two_sided_p(r.t_statistic, df);
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  return r;
}

json to_json(const CorrelationResult& r) {
  // JSON has no infinity; a perfect fit reports t as null.
  return {{"n", r.n},
          {"pearson_r", r.pearson_r},
          {"r_squared", r.r_squared},
          {"t_statistic", std::isfinite(r.t_statistic) ? json(r.t_statistic) : json(nullptr)},
          {"p_value", r.p_value},
          {"slope", r.slope},
          {"intercept", r.intercept}};
}

std::map<std::string, PairedSeries> pair_od_rows(const std::vector<quantify::OdRow>& rows,
                                                 const std::string& x_source, const std::string& y_source) {
  std::map<std::pair<std::string, std::string>, double> xs;
  for (const auto& r : rows) {
    if (r.mask_source == x_source && !r.result.empty) xs[{r.result.region, r.sample_id}] = r.result.normalized_od;
  }
  std::map<std::string, PairedSeries> out;
  for (const auto& r : rows) {
    if (r.mask_source != y_source || r.result.empty) continue;
    auto it = xs.find({r.result.region, r.sample_id});
    if (it == xs.end()) continue;
    for (const auto& key : {r.result.region, std::string("pooled")}) {
      auto& s = out[key];
      s.labels.push_back(r.sample_id + "/" + r.result.region);
      s.x.push_back(it->second);
      s.y.push_back(r.result.normalized_od);
    }
  }
  return out;
}

json reference_json() {
  using R = ReferenceConstants;
  return {{"note", "published values from an internal mouse dataset; not reproducible with this artifact"},
          {"table_mean", {{"iou", R::kIou}, {"dice", R::kDice}, {"recall", R::kRecall}, {"precision", R::kPrecision}}},
          {"correlation_r_squared", {{"SNr", R::kR2Snr}, {"SNCD", R::kR2Sncd}}},
          {"backbone_selection_iou", {{"efficientnet-b5", R::kBackboneIou}}}};
}

namespace {

std::string opt_csv(const std::optional<double>& v) { return v ? io::format_double(*v) : "nan"; }

std::optional<double> mean_value(const metrics::MetricReport& r, const std::string& metric) {
  if (metric == "iou") return r.mean.iou;
  if (metric == "dice") return r.mean.dice;
  if (metric == "recall") return r.mean.recall;
  return r.mean.precision;
}

}  // namespace

ReportBundle build_report(const ReportInputs& in, const std::filesystem::path& out_dir) {
  ReportBundle bundle;
  std::filesystem::create_directories(out_dir);

  const MetricRun* without_et = nullptr;
  const MetricRun* with_et = nullptr;
  for (const auto& run : in.metric_runs) {
    const MetricRun*& slot = run.elastic ? with_et : without_et;
    if (slot) {
      bundle.missing.push_back("duplicate " + std::string(run.elastic ? "with_et" : "without_et") + " run '" +
                               run.label + "' ignored");
    } else {
      slot = &run;
    }
  }
  if (!without_et) bundle.missing.push_back("metrics run without elastic transformation");
  if (!with_et) bundle.missing.push_back("metrics run with elastic transformation");

  // Metrics table: one column per ET setting plus the published reference.
  {
    using R = ReferenceConstants;
    const std::vector<std::pair<std::string, double>> rows{
        {"iou", R::kIou}, {"dice", R::kDice}, {"recall", R::kRecall}, {"precision", R::kPrecision}};
    std::ostringstream csv;
    csv << "metric,without_et,with_et,published_reference\n";
    for (const auto& [metric, ref] : rows) {
      csv << metric << ',' << (without_et ? opt_csv(mean_value(without_et->report, metric)) : "absent") << ','
          << (with_et ? opt_csv(mean_value(with_et->report, metric)) : "absent") << ',' << io::format_double(ref)
          << '\n';
    }
    io::write_text(out_dir / "metrics_table.csv", csv.str());
    bundle.files.push_back(out_dir / "metrics_table.csv");
  }

  json runs = json::object();
  if (without_et) runs["without_et"] = {{"label", without_et->label}, {"metrics", metrics::to_json(without_et->report)}};
  if (with_et) runs["with_et"] = {{"label", with_et->label}, {"metrics", metrics::to_json(with_et->report)}};

  json correlations = json::object();
  if (in.od_rows.empty()) {
    bundle.missing.push_back("optical density rows");
  } else {
    const auto series = pair_od_rows(in.od_rows, in.x_source, in.y_source);
    if (series.empty()) {
      bundle.missing.push_back("no (" + in.x_source + ", " + in.y_source + ") optical density pairs");
    }
    for (const auto& [region, s] : series) {
      json entry;
      std::optional<CorrelationResult> fit;
      try {
        fit = correlate(s);
        entry = to_json(*fit);
      } catch (const ValidationError& e) {
        entry = {{"n", s.x.size()}, {"error", e.what()}};
        bundle.missing.push_back("correlation for " + region + ": " + e.what());
      }
      std::ostringstream csv;
      csv << "label,x,y,fit\n";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        csv << s.labels[i] << ',' << io::format_double(s.x[i]) << ',' << io::format_double(s.y[i]) << ','
            << (fit ? io::format_double(fit->slope * s.x[i] + fit->intercept) : "nan") << '\n';
      }
      const auto file = out_dir / ("correlation_" + region + ".csv");
      io::write_text(file, csv.str());
      bundle.files.push_back(file);
      entry["scope"] = region == "pooled" ? "pooled over regions" : "per region";
      correlations[region] = entry;
    }
  }

  bundle.summary = {{"metrics", runs},
                    {"correlation", correlations},
                    {"x_source", in.x_source},
                    {"y_source", in.y_source},
                    {"reference", reference_json()},
                    {"missing_inputs", bundle.missing}};
  io::write_text(out_dir / "report.json", bundle.summary.dump(2) + "\n");
  bundle.files.push_back(out_dir / "report.json");
  return bundle;
}

metrics::MetricReport metric_report_from_json(const json& j) {
  auto opt = [](const json& v) -> std::optional<double> {
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
  };
  metrics::MetricReport r;
  try {
    r.images = j.at("images").get<int>();
    for (const auto& c : j.at("per_class")) {
      r.class_names.push_back(c.at("class").get<std::string>());
      r.per_class.push_back({opt(c.at("iou")), opt(c.at("dice")), opt(c.at("precision")), opt(c.at("recall"))});
      r.counts.per_class.push_back({c.at("tp").get<std::uint64_t>(), c.at("fp").get<std::uint64_t>(),
                                    c.at("fn").get<std::uint64_t>(), c.at("tn").get<std::uint64_t>()});
    }
    for (const auto& name : j.at("mean_over")) {
      const auto s = name.get<std::string>();
      for (std::size_t i = 0; i < r.class_names.size(); ++i) {
        if (r.class_names[i] == s) r.mean_over.push_back(static_cast<ClassId>(i));
      }
    }
    const auto& m = j.at("mean");
    r.mean = {opt(m.at("iou")), opt(m.at("dice")), opt(m.at("precision")), opt(m.at("recall"))};
    const auto& u = j.at("undefined");
    r.undefined = {u.at("iou").get<int>(), u.at("dice").get<int>(), u.at("precision").get<int>(),
                   u.at("recall").get<int>()};
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed metrics JSON: ") + e.what());
  }
  return r;
}

}  // namespace nigra::report
