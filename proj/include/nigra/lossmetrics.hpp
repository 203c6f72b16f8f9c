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

#ifndef NIGRA_LOSSMETRICS_HPP_
#define NIGRA_LOSSMETRICS_HPP_

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nigra/core.hpp"

namespace nigra::metrics {

inline constexpr double kDefaultSmooth = 1e-6;

enum class LossKind { kDice, kJaccard, kCrossEntropy };

std::string to_string(LossKind kind);
// Accepts dice, jaccard, categorical_cross_entropy.
LossKind parse_loss(const std::string& text);

struct LossResult {
  double value = 0.0;
  // d value / d y_hat, one pixel-major vector per sample. Empty unless requested.
  std::vector<std::vector<double>> grad;
};

// Dice and Jaccard sum over every pixel of every sample, per foreground class
// (ids 1..C-1), then average over those classes. Cross-entropy averages
// -log y_hat[true class] over all pixels.
LossResult compute_loss(LossKind kind, const std::vector<ProbabilityMap>& y, const std::vector<ProbabilityMap>& y_hat,
                        bool with_grad, double smooth = kDefaultSmooth);

double dice_loss(const ProbabilityMap& y, const ProbabilityMap& y_hat, double smooth = kDefaultSmooth);
double jaccard_loss(const ProbabilityMap& y, const ProbabilityMap& y_hat, double smooth = kDefaultSmooth);
double cross_entropy(const ProbabilityMap& y, const ProbabilityMap& y_hat);

ConfusionCounts confusion(const LabelMask& pred, const LabelMask& truth, const ClassCatalog& catalog);

// Undefined (nullopt) when the denominator is zero.
std::optional<double> precision(const ConfusionCounts& c, ClassId cls);
std::optional<double> recall(const ConfusionCounts& c, ClassId cls);
std::optional<double> dice_coefficient(const ConfusionCounts& c, ClassId cls);
std::optional<double> iou(const ConfusionCounts& c, ClassId cls);

struct MetricValues {
  std::optional<double> iou;
  std::optional<double> dice;
  std::optional<double> precision;
  std::optional<double> recall;
};

// Number of values that were undefined and left out of a mean.
struct UndefinedCounts {
  int iou = 0;
  int dice = 0;
  int precision = 0;
  int recall = 0;
  int total() const { return iou + dice + precision + recall; }
};

struct MetricReport {
  std::vector<std::string> class_names;
  std::vector<MetricValues> per_class;  // indexed by class id
  ConfusionCounts counts;
  std::vector<ClassId> mean_over;
  MetricValues mean;
  UndefinedCounts undefined;
  int images = 1;
};

// mean_over defaults to the foreground classes.
MetricReport evaluate(const LabelMask& pred, const LabelMask& truth, const ClassCatalog& catalog,
                      std::optional<std::vector<ClassId>> mean_over = std::nullopt);

// Dataset level: each mean is the mean over images of the per-image means, and
// each per-class value is the mean over images where it is defined. Counts are
// summed.
MetricReport aggregate(const std::vector<MetricReport>& reports);

nlohmann::json to_json(const MetricReport& report);
// One row per class plus a "mean" row; undefined values are written as "nan".
std::string to_csv(const MetricReport& report);

}  // namespace nigra::metrics

#endif  // NIGRA_LOSSMETRICS_HPP_
