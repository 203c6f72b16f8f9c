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

#ifndef NIGRA_TRAINER_HPP_
#define NIGRA_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nigra/augment.hpp"
#include "nigra/lossmetrics.hpp"
#include "nigra/model.hpp"
#include "nigra/preprocess.hpp"

namespace nigra::train {

enum class OptimizerKind { kAdam, kSgd };
std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& text);

struct TrainConfig {
  metrics::LossKind loss = metrics::LossKind::kDice;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double sgd_momentum = 0.9;
  int epochs = 50;
  int batch_size = 4;
  int plateau_patience = 5;
  double plateau_factor = 0.1;
  double min_lr = 1e-6;
  int early_stop_patience = 10;
  // Absolute decrease in validation loss that counts as an improvement.
  double improvement_threshold = 1e-6;
  preprocess::ResizeMode resize_mode = preprocess::ResizeMode::kStretch;
  std::uint64_t seed = 0;

  void validate() const;
};

// ReduceLROnPlateau on a loss. step() returns the lr for the next epoch.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor, int patience, double min_lr, double threshold);
  double step(double loss);
  double lr() const { return lr_; }

 private:
  double lr_;
  double factor_;
  int patience_;
  double min_lr_;
  double threshold_;
  std::optional<double> best_;
  int bad_epochs_ = 0;
};

class EarlyStopper {
 public:
  EarlyStopper(int patience, double threshold);
  // Records an epoch's loss. True when training should stop.
  bool update(double loss);
  // True if the most recent update improved on the best.
  bool improved() const { return improved_; }
  std::optional<double> best() const { return best_; }
  int best_epoch() const { return best_epoch_; }

 private:
  int patience_;
  double threshold_;
  std::optional<double> best_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  bool improved_ = false;
};

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  // Updates every trainable parameter from its accumulated gradient.
  virtual void step(nn::ParamStore& params, double lr) = 0;
};

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& config);

// Images and masks resized to the model input size.
struct Dataset {
  std::vector<std::string> ids;
  std::vector<RasterImage> images;
  std::vector<LabelMask> masks;
  std::size_t size() const { return ids.size(); }
};

// Throws ValidationError naming the split when it has no samples.
Dataset load_split(const std::vector<AnnotatedSample>& samples, Split split, int input_size,
                   preprocess::ResizeMode mode, const ClassCatalog& catalog);

// One optimization step on a batch. Returns the batch loss before the update.
// Throws std::runtime_error with the lr and sample ids if the loss is not finite.
double train_step(model::SegModel& model, Optimizer& optimizer, metrics::LossKind loss,
                  const std::vector<RasterImage>& images, const std::vector<LabelMask>& masks,
                  const ClassCatalog& catalog, double lr, const std::vector<std::string>& ids = {});

struct EvalResult {
  double loss = 0.0;  // mean of per-image losses
  metrics::MetricReport report;
  std::vector<metrics::MetricReport> per_image;
};

EvalResult evaluate_model(model::SegModel& model, const Dataset& data, metrics::LossKind loss,
                          const ClassCatalog& catalog, int batch_size);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::optional<double> val_miou;
  double lr = 0.0;  // after the scheduler step that closed this epoch
};

struct TrainState {
  int epoch = 0;
  std::vector<EpochRecord> history;
  double lr = 0.0;
  std::filesystem::path best_checkpoint;
  double best_val_loss = 0.0;
  int best_epoch = 0;
  std::string stop_reason;
};

// Writes history.csv and best/ (checkpoint) under out_dir.
TrainState train(model::SegModel& model, const std::vector<AnnotatedSample>& manifest, const TrainConfig& config,
                 const augment::AugmentationConfig& augmentation, const ClassCatalog& catalog,
                 const std::filesystem::path& out_dir, std::ostream* log = nullptr);

std::string history_csv(const std::vector<EpochRecord>& history);

inline constexpr double kReferenceBackboneIou = 0.73;

struct SweepCell {
  std::string backbone;
  int image_size = 0;
  std::optional<double> best_val_miou;
  std::optional<double> best_val_loss;
  int epochs_run = 0;
  std::string error;  // empty on success
};

struct SweepReport {
  std::vector<SweepCell> ranked;  // by best_val_miou descending, failures last
};

// One training run per (backbone, image size). Failed cells are recorded and
// the sweep continues.
SweepReport run_backbone_sweep(const std::vector<AnnotatedSample>& manifest, const std::vector<std::string>& backbones,
                               const std::vector<int>& image_sizes, const model::SegModelConfig& model_template,
                               const TrainConfig& config, const augment::AugmentationConfig& augmentation,
                               const ClassCatalog& catalog, const std::filesystem::path& out_dir,
                               std::ostream* log = nullptr);

// sweep.json, sweep_ranked.csv, sweep_bars.csv.
void write_sweep(const SweepReport& report, const std::filesystem::path& out_dir);

}  // namespace nigra::train

#endif  // NIGRA_TRAINER_HPP_
