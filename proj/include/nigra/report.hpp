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

#ifndef NIGRA_REPORT_HPP_
#define NIGRA_REPORT_HPP_

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nigra/lossmetrics.hpp"
#include "nigra/quantify.hpp"

namespace nigra::report {

// Raised when a series has zero variance.
class DegenerateInputError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct PairedSeries {
  std::vector<std::string> labels;
  std::vector<double> x;  // manual
  std::vector<double> y;  // model

  // Equal lengths, n >= 3, all finite.
  void validate() const;
};

struct CorrelationResult {
  std::size_t n = 0;
  double pearson_r = 0.0;
  double r_squared = 0.0;
  double t_statistic = 0.0;
  double p_value = 1.0;  // two-sided
  double slope = 0.0;
  double intercept = 0.0;
};

// Two-sided p-value of Student's t with df degrees of freedom,
// I_{df/(df+t^2)}(df/2, 1/2).
double student_t_two_sided_p(double t, double df);

CorrelationResult correlate(const PairedSeries& series);

nlohmann::json to_json(const CorrelationResult& result);

// Pairs rows by (sample_id, region); x from x_source rows, y from y_source
// rows. Empty regions are skipped. Returns one series per region plus "pooled".
std::map<std::string, PairedSeries> pair_od_rows(const std::vector<quantify::OdRow>& rows,
                                                 const std::string& x_source, const std::string& y_source);

// Published values, reported only as labeled references.
struct ReferenceConstants {
  static constexpr double kIou = 0.79;
  static constexpr double kDice = 0.87;
  static constexpr double kRecall = 0.88;
  static constexpr double kPrecision = 0.86;
  static constexpr double kR2Snr = 0.8678;
  static constexpr double kR2Sncd = 0.7928;
  static constexpr double kBackboneIou = 0.73;
};
nlohmann::json reference_json();

struct MetricRun {
  std::string label;
  bool elastic = false;  // trained with elastic deformation
  metrics::MetricReport report;
};

struct ReportInputs {
  std::vector<MetricRun> metric_runs;
  std::vector<quantify::OdRow> od_rows;
  std::string x_source = "gt";
  std::string y_source = "model";
};

struct ReportBundle {
  nlohmann::json summary;
  std::vector<std::string> missing;  // inputs that were absent or unusable
  std::vector<std::filesystem::path> files;
};

// Writes report.json, metrics_table.csv and correlation_<region>.csv. Missing
// inputs are listed in the summary; whatever can be produced still is.
ReportBundle build_report(const ReportInputs& inputs, const std::filesystem::path& out_dir);

// Reads a metrics JSON written by to_json(MetricReport).
metrics::MetricReport metric_report_from_json(const nlohmann::json& j);

}  // namespace nigra::report

#endif  // NIGRA_REPORT_HPP_
