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

#include "nigra/lossmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nigra/io.hpp"

namespace nigra::metrics {

using nlohmann::json;

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kDice: return "dice";
    case LossKind::kJaccard: return "jaccard";
    case LossKind::kCrossEntropy: return "categorical_cross_entropy";
  }
  return "dice";
}

LossKind parse_loss(const std::string& text) {
  if (text == "dice") return LossKind::kDice;
  if (text == "jaccard") return LossKind::kJaccard;
  if (text == "categorical_cross_entropy") return LossKind::kCrossEntropy;
  throw ValidationError("unknown loss '" + text + "'; expected dice, jaccard or categorical_cross_entropy");
}

namespace {

void check_shapes(const std::vector<ProbabilityMap>& y, const std::vector<ProbabilityMap>& y_hat) {
  if (y.empty() || y.size() != y_hat.size()) throw ValidationError("loss: batch sizes differ or are empty");
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i].width() != y_hat[i].width() || y[i].height() != y_hat[i].height() ||
        y[i].classes() != y_hat[i].classes() || y[i].classes() != y[0].classes()) {
      throw ValidationError("loss: shape mismatch at batch item " + std::to_string(i));
    }
  }
  if (y[0].classes() < 2) throw ValidationError("loss: need at least two classes");
}

LossResult overlap_loss(bool jaccard, const std::vector<ProbabilityMap>& y, const std::vector<ProbabilityMap>& y_hat,
                        bool with_grad, double s) {
  const int C = y[0].classes();
  const int K = C - 1;
  std::vector<double> inter(C, 0.0), sum_y(C, 0.0), sum_p(C, 0.0);
  for (std::size_t n = 0; n < y.size(); ++n) {
    const auto a = y[n].data();
    const auto b = y_hat[n].data();
    for (std::size_t i = 0; i < a.size(); ++i) {
      const int c = static_cast<int>(i % C);
      inter[c] += a[i] * b[i];
      sum_y[c] += a[i];
      sum_p[c] += b[i];
    }
  }
  LossResult out;
  double score = 0.0;
  std::vector<double> coef_y(C, 0.0), coef_1(C, 0.0);
  for (int c = 1; c < C; ++c) {
    if (jaccard) {
      const double num = inter[c] + s;
      const double den = sum_y[c] + sum_p[c] - inter[c] + s;
      score += num / den;
      // d(num/den)/dp = (y*den - num*(1 - y)) / den^2
      coef_y[c] = (den + num) / (den * den);
      coef_1[c] = -num / (den * den);
    } else {
      const double num = 2.0 * inter[c] + s;
      const double den = sum_y[c] + sum_p[c] + s;
      score += num / den;
      // d(num/den)/dp = (2y*den - num) / den^2
      coef_y[c] = 2.0 / den;
      coef_1[c] = -num / (den * den);
    }
  }
  out.value = 1.0 - score / K;
  if (with_grad) {
    for (std::size_t n = 0; n < y.size(); ++n) {
      const auto a = y[n].data();
      std::vector<double> g(a.size(), 0.0);
      for (std::size_t i = 0; i < a.size(); ++i) {
        const int c = static_cast<int>(i % C);
        if (c == 0) continue;
        g[i] = -(coef_y[c] * a[i] + coef_1[c]) / K;
      }
      out.grad.push_back(std::move(g));
    }
  }
  return out;
}

LossResult ce_loss(const std::vector<ProbabilityMap>& y, const std::vector<ProbabilityMap>& y_hat, bool with_grad) {
  constexpr double kFloor = 1e-12;
  const int C = y[0].classes();
  std::size_t pixels = 0;
  for (const auto& m : y) pixels += m.pixel_count();
  LossResult out;
  double total = 0.0;
  for (std::size_t n = 0; n < y.size(); ++n) {
    std::vector<double> g;
    if (with_grad) g.assign(y[n].data().size(), 0.0);
    for (std::size_t p = 0; p < y[n].pixel_count(); ++p) {
      const auto t = y[n].pixel(p);
      const auto q = y_hat[n].pixel(p);
      for (int c = 0; c < C; ++c) {
        if (t[c] == 0.0) continue;
        const double v = std::max(q[c], kFloor);
        total -= t[c] * std::log(v);
        if (with_grad) g[p * C + c] = -t[c] / (v * static_cast<double>(pixels));
      }
    }
    if (with_grad) out.grad.push_back(std::move(g));
  }
  out.value = total / static_cast<double>(pixels);
  return out;
}

std::optional<double> ratio(double num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return num / static_cast<double>(den);
}

const ClassCounts& counts_for(const ConfusionCounts& c, ClassId cls) {
  if (cls >= c.per_class.size()) throw ValidationError("class id " + std::to_string(cls) + " not in confusion counts");
  return c.per_class[cls];
}

// Mean of the defined values; bumps `undefined` for each missing one.
std::optional<double> mean_defined(const std::vector<std::optional<double>>& values, int& undefined) {
  double sum = 0.0;
  int n = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++n;
    } else {
      ++undefined;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
std::string opt_csv(const std::optional<double>& v) { return v ? io::format_double(*v) : "nan"; }

}  // namespace

LossResult compute_loss(LossKind kind, const std::vector<ProbabilityMap>& y, const std::vector<ProbabilityMap>& y_hat,
                        bool with_grad, double smooth) {
  check_shapes(y, y_hat);
  switch (kind) {
    case LossKind::kDice: return overlap_loss(false, y, y_hat, with_grad, smooth);
    case LossKind::kJaccard: return overlap_loss(true, y, y_hat, with_grad, smooth);
    case LossKind::kCrossEntropy: return ce_loss(y, y_hat, with_grad);
  }
  return {};
}

double dice_loss(const ProbabilityMap& y, const ProbabilityMap& y_hat, double smooth) {
  return compute_loss(LossKind::kDice, {y}, {y_hat}, false, smooth).value;
}

double jaccard_loss(const ProbabilityMap& y, const ProbabilityMap& y_hat, double smooth) {
  return compute_loss(LossKind::kJaccard, {y}, {y_hat}, false, smooth).value;
}

double cross_entropy(const ProbabilityMap& y, const ProbabilityMap& y_hat) {
  return compute_loss(LossKind::kCrossEntropy, {y}, {y_hat}, false).value;
}

ConfusionCounts confusion(const LabelMask& pred, const LabelMask& truth, const ClassCatalog& catalog) {
  if (pred.width() != truth.width() || pred.height() != truth.height()) {
    throw ValidationError("confusion: prediction is " + std::to_string(pred.width()) + "x" +
                          std::to_string(pred.height()) + ", truth is " + std::to_string(truth.width()) + "x" +
                          std::to_string(truth.height()));
  }
  pred.validate(catalog);
  truth.validate(catalog);
  const std::size_t C = catalog.size();
  // Joint histogram, then one-vs-rest tallies from it.
  std::vector<std::uint64_t> joint(C * C, 0);
  const auto p = pred.data();
  const auto t = truth.data();
  for (std::size_t i = 0; i < p.size(); ++i) ++joint[static_cast<std::size_t>(t[i]) * C + p[i]];
  std::vector<std::uint64_t> row(C, 0), col(C, 0);
  for (std::size_t a = 0; a < C; ++a) {
    for (std::size_t b = 0; b < C; ++b) {
      row[a] += joint[a * C + b];
      col[b] += joint[a * C + b];
    }
  }
  ConfusionCounts out;
  out.per_class.resize(C);
  const std::uint64_t total = p.size();
  for (std::size_t c = 0; c < C; ++c) {
    ClassCounts& k = out.per_class[c];
    k.tp = joint[c * C + c];
    k.fp = col[c] - k.tp;
    k.fn = row[c] - k.tp;
    k.tn = total - k.tp - k.fp - k.fn;
  }
  return out;
}

std::optional<double> precision(const ConfusionCounts& c, ClassId cls) {
  const auto& k = counts_for(c, cls);
  return ratio(static_cast<double>(k.tp), k.tp + k.fp);
}

std::optional<double> recall(const ConfusionCounts& c, ClassId cls) {
  const auto& k = counts_for(c, cls);
  return ratio(static_cast<double>(k.tp), k.tp + k.fn);
}

std::optional<double> dice_coefficient(const ConfusionCounts& c, ClassId cls) {
  const auto& k = counts_for(c, cls);
  return ratio(2.0 * static_cast<double>(k.tp), 2 * k.tp + k.fp + k.fn);
}

std::optional<double> iou(const ConfusionCounts& c, ClassId cls) {
  const auto& k = counts_for(c, cls);
  return ratio(static_cast<double>(k.tp), k.tp + k.fp + k.fn);
}

MetricReport evaluate(const LabelMask& pred, const LabelMask& truth, const ClassCatalog& catalog,
                      std::optional<std::vector<ClassId>> mean_over) {
  MetricReport r;
  r.counts = confusion(pred, truth, catalog);
  for (const auto& e : catalog.entries()) {
    r.class_names.push_back(e.name);
    r.per_class.push_back({iou(r.counts, e.id), dice_coefficient(r.counts, e.id), precision(r.counts, e.id),
                           recall(r.counts, e.id)});
  }
  r.mean_over = mean_over ? *mean_over : catalog.foreground();
  if (r.mean_over.empty()) throw ValidationError("evaluate: mean_over is empty");
  std::vector<std::optional<double>> a, b, c, d;
  for (ClassId id : r.mean_over) {
    if (!catalog.contains(id)) throw ValidationError("evaluate: mean_over names unknown class " + std::to_string(id));
    a.push_back(r.per_class[id].iou);
    b.push_back(r.per_class[id].dice);
    c.push_back(r.per_class[id].precision);
    d.push_back(r.per_class[id].recall);
  }
  r.mean = {mean_defined(a, r.undefined.iou), mean_defined(b, r.undefined.dice), mean_defined(c, r.undefined.precision),
            mean_defined(d, r.undefined.recall)};
  return r;
}

MetricReport aggregate(const std::vector<MetricReport>& reports) {
  if (reports.empty()) throw ValidationError("aggregate: no reports");
  MetricReport out;
  out.class_names = reports.front().class_names;
  out.mean_over = reports.front().mean_over;
  out.images = 0;
  out.counts.per_class.resize(out.class_names.size());
  const std::size_t C = out.class_names.size();
  std::vector<std::array<std::vector<std::optional<double>>, 4>> per(C);
  std::array<std::vector<std::optional<double>>, 4> means;
  for (const auto& r : reports) {
    if (r.class_names != out.class_names || r.mean_over != out.mean_over) {
      throw ValidationError("aggregate: reports use different class lists");
    }
    out.counts += r.counts;
    out.images += r.images;
    for (std::size_t c = 0; c < C; ++c) {
      per[c][0].push_back(r.per_class[c].iou);
      per[c][1].push_back(r.per_class[c].dice);
      per[c][2].push_back(r.per_class[c].precision);
      per[c][3].push_back(r.per_class[c].recall);
    }
    means[0].push_back(r.mean.iou);
    means[1].push_back(r.mean.dice);
    means[2].push_back(r.mean.precision);
    means[3].push_back(r.mean.recall);
  }
  int ignored = 0;
  for (std::size_t c = 0; c < C; ++c) {
    out.per_class.push_back({mean_defined(per[c][0], ignored), mean_defined(per[c][1], ignored),
                             mean_defined(per[c][2], ignored), mean_defined(per[c][3], ignored)});
  }
  // Here `undefined` counts images whose per-image mean was undefined.
  out.mean = {mean_defined(means[0], out.undefined.iou), mean_defined(means[1], out.undefined.dice),
              mean_defined(means[2], out.undefined.precision), mean_defined(means[3], out.undefined.recall)};
  return out;
}

json to_json(const MetricReport& r) {
  json classes = json::array();
  for (std::size_t c = 0; c < r.class_names.size(); ++c) {
    const auto& k = r.counts.per_class[c];
    const auto& v = r.per_class[c];
    classes.push_back({{"class", r.class_names[c]},
                       {"iou", opt_json(v.iou)},
                       {"dice", opt_json(v.dice)},
                       {"precision", opt_json(v.precision)},
                       {"recall", opt_json(v.recall)},
                       {"tp", k.tp},
                       {"fp", k.fp},
                       {"fn", k.fn},
                       {"tn", k.tn}});
  }
  json over = json::array();
  for (ClassId id : r.mean_over) over.push_back(r.class_names.at(id));
  return {{"images", r.images},
          {"per_class", classes},
          {"mean_over", over},
          {"mean",
           {{"iou", opt_json(r.mean.iou)},
            {"dice", opt_json(r.mean.dice)},
            {"precision", opt_json(r.mean.precision)},
            {"recall", opt_json(r.mean.recall)}}},
          {"undefined",
           {{"iou", r.undefined.iou},
            {"dice", r.undefined.dice},
            {"precision", r.undefined.precision},
            {"recall", r.undefined.recall}}}};
}

std::string to_csv(const MetricReport& r) {
  std::ostringstream out;
  out << "class,iou,dice,precision,recall,tp,fp,fn,tn\n";
  for (std::size_t c = 0; c < r.class_names.size(); ++c) {
    const auto& k = r.counts.per_class[c];
    const auto& v = r.per_class[c];
    out << r.class_names[c] << ',' << opt_csv(v.iou) << ',' << opt_csv(v.dice) << ',' << opt_csv(v.precision) << ','
        << opt_csv(v.recall) << ',' << k.tp << ',' << k.fp << ',' << k.fn << ',' << k.tn << '\n';
  }
  out << "mean," << opt_csv(r.mean.iou) << ',' << opt_csv(r.mean.dice) << ',' << opt_csv(r.mean.precision) << ','
      << opt_csv(r.mean.recall) << ",,,,\n";
  return out.str();
}

}  // namespace nigra::metrics
