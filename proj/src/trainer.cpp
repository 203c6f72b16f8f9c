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

#include "nigra/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "nigra/io.hpp"
#include "nigra/random.hpp"

namespace nigra::train {

using nlohmann::json;

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::kAdam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(const std::string& text) {
  if (text == "adam") return OptimizerKind::kAdam;
  if (text == "sgd") return OptimizerKind::kSgd;
  throw ValidationError("unknown optimizer '" + text + "'; expected adam or sgd");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !(min_lr > 0.0)) throw ValidationError("train.learning_rate and train.min_lr must be > 0");
  if (learning_rate < min_lr) throw ValidationError("train.learning_rate must be >= train.min_lr");
  if (epochs < 1) throw ValidationError("train.epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("train.batch_size must be >= 1");
  if (plateau_patience < 1 || early_stop_patience < 1) throw ValidationError("train patience values must be >= 1");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) throw ValidationError("train.plateau_factor must be in (0,1)");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ValidationError("train.adam_betas must be in [0,1)");
  }
  if (!(adam_eps > 0.0)) throw ValidationError("train.adam_eps must be > 0");
  if (!(sgd_momentum >= 0.0 && sgd_momentum < 1.0)) throw ValidationError("train.sgd_momentum must be in [0,1)");
  if (!(improvement_threshold >= 0.0)) throw ValidationError("train.improvement_threshold must be >= 0");
}

PlateauScheduler::PlateauScheduler(double lr, double factor, int patience, double min_lr, double threshold)
    : lr_(lr), factor_(factor), patience_(patience), min_lr_(min_lr), threshold_(threshold) {}

double PlateauScheduler::step(double loss) {
  if (!best_ || loss < *best_ - threshold_) {
    best_ = loss;
    bad_epochs_ = 0;
  } else if (++bad_epochs_ >= patience_) {
    lr_ = std::max(lr_ * factor_, min_lr_);
    bad_epochs_ = 0;
  }
  return lr_;
}

EarlyStopper::EarlyStopper(int patience, double threshold) : patience_(patience), threshold_(threshold) {}

bool EarlyStopper::update(double loss) {
  ++epoch_;
  improved_ = !best_ || loss < *best_ - threshold_;
  if (improved_) {
    best_ = loss;
    best_epoch_ = epoch_;
  }
  return epoch_ - best_epoch_ >= patience_;
}

namespace {

class Adam : public Optimizer {
 public:
  Adam(double b1, double b2, double eps) : b1_(b1), b2_(b2), eps_(eps) {}

  void step(nn::ParamStore& params, double lr) override {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, t_);
    const double c2 = 1.0 - std::pow(b2_, t_);
    auto& entries = params.entries();
    if (m_.size() != entries.size()) {
      m_.assign(entries.size(), {});
      v_.assign(entries.size(), {});
    }
    for (std::size_t k = 0; k < entries.size(); ++k) {
      auto& e = entries[k];
      if (!e.trainable || e.var->grad.data.empty()) continue;
      auto& w = e.var->value.data;
      const auto& g = e.var->grad.data;
      if (m_[k].empty()) {
        m_[k].assign(w.size(), 0.0);
        v_[k].assign(w.size(), 0.0);
      }
      for (std::size_t i = 0; i < w.size(); ++i) {
        m_[k][i] = b1_ * m_[k][i] + (1.0 - b1_) * g[i];
        v_[k][i] = b2_ * v_[k][i] + (1.0 - b2_) * g[i] * g[i];
        const double mh = m_[k][i] / c1;
        const double vh = v_[k][i] / c2;
        w[i] = static_cast<float>(w[i] - lr * mh / (std::sqrt(vh) + eps_));
      }
    }
  }

 private:
  double b1_, b2_, eps_;
  int t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

class Sgd : public Optimizer {
 public:
  explicit Sgd(double momentum) : momentum_(momentum) {}

  void step(nn::ParamStore& params, double lr) override {
    auto& entries = params.entries();
    if (vel_.size() != entries.size()) vel_.assign(entries.size(), {});
    for (std::size_t k = 0; k < entries.size(); ++k) {
      auto& e = entries[k];
      if (!e.trainable || e.var->grad.data.empty()) continue;
      auto& w = e.var->value.data;
      const auto& g = e.var->grad.data;
      if (vel_[k].empty()) vel_[k].assign(w.size(), 0.0);
      for (std::size_t i = 0; i < w.size(); ++i) {
        vel_[k][i] = momentum_ * vel_[k][i] + g[i];
        w[i] = static_cast<float>(w[i] - lr * vel_[k][i]);
      }
    }
  }

 private:
  double momentum_;
  std::vector<std::vector<double>> vel_;
};

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) out += (out.empty() ? "" : ",") + id;
  return out.empty() ? "(unnamed)" : out;
}

std::vector<ProbabilityMap> one_hots(const std::vector<LabelMask>& masks, const ClassCatalog& catalog) {
  std::vector<ProbabilityMap> out;
  out.reserve(masks.size());
  for (const auto& m : masks) out.push_back(one_hot(m, catalog));
  return out;
}

std::string fmt(double v) { return io::format_double(v); }

}  // namespace

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& config) {
  if (config.optimizer == OptimizerKind::kAdam) {
    return std::make_unique<Adam>(config.adam_beta1, config.adam_beta2, config.adam_eps);
  }
  return std::make_unique<Sgd>(config.sgd_momentum);
}

Dataset load_split(const std::vector<AnnotatedSample>& samples, Split split, int input_size,
                   preprocess::ResizeMode mode, const ClassCatalog& catalog) {
  Dataset out;
  for (const auto& s : io::select_split(samples, split)) {
    RasterImage image = io::read_image(s.image_path);
    LabelMask mask = io::read_mask(s.mask_path);
    if (image.width() != mask.width() || image.height() != mask.height()) {
      throw ValidationError("sample " + s.sample_id + ": image and mask sizes differ");
    }
    try {
      mask.validate(catalog);
    } catch (const ValidationError& e) {
      throw ValidationError("sample " + s.sample_id + ": " + e.what());
    }
    auto [img, msk] = preprocess::resize_pair(image, mask, input_size, mode);
    out.ids.push_back(s.sample_id);
    out.images.push_back(std::move(img));
    out.masks.push_back(std::move(msk));
  }
  if (out.size() == 0) throw ValidationError("the '" + to_string(split) + "' split of the manifest is empty");
  return out;
}

double train_step(model::SegModel& model, Optimizer& optimizer, metrics::LossKind loss,
                  const std::vector<RasterImage>& images, const std::vector<LabelMask>& masks,
                  const ClassCatalog& catalog, double lr, const std::vector<std::string>& ids) {
  std::vector<preprocess::ImageTensor> inputs;
  for (const auto& im : images) inputs.push_back(preprocess::normalize_image(im, model.input_stats()));
  model.params().zero_grad();
  nn::Var logits = model.forward(nn::make_var(model::batch_tensor(inputs)), true);
  std::vector<ProbabilityMap> probs;
  try {
    for (const auto& m : model::split_logits(logits->value)) probs.push_back(model::softmax_head(m));
  } catch (const ValidationError& e) {
    throw std::runtime_error(std::string("non-finite logits (lr ") + fmt(lr) + ", batch " + join_ids(ids) +
                             "): " + e.what());
  }
  const auto result = metrics::compute_loss(loss, one_hots(masks, catalog), probs, true);
  if (!std::isfinite(result.value)) {
    throw std::runtime_error("non-finite loss (lr " + fmt(lr) + ", batch " + join_ids(ids) + ")");
  }
  std::vector<std::vector<double>> dz;
  for (std::size_t n = 0; n < probs.size(); ++n) dz.push_back(model::softmax_backward(probs[n], result.grad[n]));
  const auto& v = logits->value;
  nn::backward(logits, model::pack_logit_grads(dz, v.c(), v.h(), v.w()));
  optimizer.step(model.params(), lr);
  return result.value;
}

EvalResult evaluate_model(model::SegModel& model, const Dataset& data, metrics::LossKind loss,
                          const ClassCatalog& catalog, int batch_size) {
  EvalResult out;
  double total = 0.0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<RasterImage> batch(data.images.begin() + start, data.images.begin() + end);
    auto preds = model::predict_batch(model, batch);
    for (std::size_t i = start; i < end; ++i) {
      const auto& p = preds[i - start];
      total += metrics::compute_loss(loss, {one_hot(data.masks[i], catalog)}, {p.probabilities}, false).value;
      out.per_image.push_back(metrics::evaluate(p.mask, data.masks[i], catalog));
    }
  }
  out.loss = total / static_cast<double>(data.size());
  out.report = metrics::aggregate(out.per_image);
  return out;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss,val_miou,lr\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << fmt(r.train_loss) << ',' << fmt(r.val_loss) << ','
        << (r.val_miou ? fmt(*r.val_miou) : "nan") << ',' << fmt(r.lr) << '\n';
  }
  return out.str();
}

TrainState train(model::SegModel& model, const std::vector<AnnotatedSample>& manifest, const TrainConfig& config,
                 const augment::AugmentationConfig& augmentation, const ClassCatalog& catalog,
                 const std::filesystem::path& out_dir, std::ostream* log) {
  config.validate();
  augmentation.validate();
  if (static_cast<int>(catalog.size()) != model.config().n_classes) {
    throw ValidationError("class catalog has " + std::to_string(catalog.size()) + " classes but the model has " +
                          std::to_string(model.config().n_classes));
  }
  const int size = model.config().input_size;
  const Dataset train_set = load_split(manifest, Split::kTrain, size, config.resize_mode, catalog);
  const Dataset val_set = load_split(manifest, Split::kVal, size, config.resize_mode, catalog);

  auto optimizer = make_optimizer(config);
  PlateauScheduler scheduler(config.learning_rate, config.plateau_factor, config.plateau_patience, config.min_lr,
                             config.improvement_threshold);
  EarlyStopper stopper(config.early_stop_patience, config.improvement_threshold);
  TrainState state;
  state.lr = config.learning_rate;
  state.best_checkpoint = out_dir / "best";
  state.stop_reason = "epochs_exhausted";
  const std::uint64_t aug_base = mix_seed(augmentation.seed, config.seed);

  std::vector<std::size_t> order(train_set.size());
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng = make_rng(config.seed, 0x5f1e0000ULL + static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<RasterImage> images;
      std::vector<LabelMask> masks;
      std::vector<std::string> ids;
      for (std::size_t j = start; j < end; ++j) {
        const std::size_t k = order[j];
        const std::uint64_t draw = mix_seed(aug_base, (static_cast<std::uint64_t>(epoch) << 32) | k);
        auto [im, mk] = augment::apply(train_set.images[k], train_set.masks[k], augmentation, draw);
        images.push_back(std::move(im));
        masks.push_back(std::move(mk));
        ids.push_back(train_set.ids[k]);
      }
      loss_sum += train_step(model, *optimizer, config.loss, images, masks, catalog, state.lr, ids);
      ++batches;
    }

    const EvalResult val = evaluate_model(model, val_set, config.loss, catalog, config.batch_size);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / batches;
    rec.val_loss = val.loss;
    rec.val_miou = val.report.mean.iou;

    const bool stop = stopper.update(val.loss);
    if (stopper.improved()) {
      state.best_val_loss = val.loss;
      state.best_epoch = epoch;
      json meta{{"epoch", epoch}, {"val_loss", val.loss}, {"loss", metrics::to_string(config.loss)},
                {"seed", config.seed}};
      model::save_checkpoint(model, catalog, meta, state.best_checkpoint);
    }
    state.lr = scheduler.step(val.loss);
    rec.lr = state.lr;
    state.history.push_back(rec);
    state.epoch = epoch;
    io::write_text(out_dir / "history.csv", history_csv(state.history));

    if (log) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      *log << "epoch " << epoch << " train_loss " << fmt(rec.train_loss) << " val_loss " << fmt(rec.val_loss)
           << " val_miou " << (rec.val_miou ? fmt(*rec.val_miou) : "nan") << " lr " << fmt(rec.lr) << " ("
           << static_cast<int>(secs) << "s)" << std::endl;
    }
    if (stop && epoch < config.epochs) {
      state.stop_reason = "early_stopping";
      break;
    }
  }
  return state;
}

SweepReport run_backbone_sweep(const std::vector<AnnotatedSample>& manifest, const std::vector<std::string>& backbones,
                               const std::vector<int>& image_sizes, const model::SegModelConfig& model_template,
                               const TrainConfig& config, const augment::AugmentationConfig& augmentation,
                               const ClassCatalog& catalog, const std::filesystem::path& out_dir, std::ostream* log) {
  if (backbones.empty() || image_sizes.empty()) throw ValidationError("sweep needs at least one backbone and size");
  config.validate();
  SweepReport report;
  for (const auto& backbone : backbones) {
    for (int size : image_sizes) {
      SweepCell cell;
      cell.backbone = backbone;
      cell.image_size = size;
      try {
        model::SegModelConfig mc = model_template;
        mc.backbone.name = backbone;
        mc.input_size = size;
        auto m = model::build(mc);
        if (log) *log << "sweep cell " << backbone << " @ " << size << std::endl;
        const auto state = train(*m, manifest, config, augmentation, catalog,
                                 out_dir / (backbone + "_" + std::to_string(size)), log);
        cell.epochs_run = state.epoch;
        cell.best_val_loss = state.best_val_loss;
        for (const auto& r : state.history) {
          if (r.val_miou && (!cell.best_val_miou || *r.val_miou > *cell.best_val_miou)) cell.best_val_miou = r.val_miou;
        }
      } catch (const std::exception& e) {
        cell.error = e.what();
        if (log) *log << "sweep cell " << backbone << " @ " << size << " failed: " << e.what() << std::endl;
      }
      report.ranked.push_back(std::move(cell));
    }
  }
  std::stable_sort(report.ranked.begin(), report.ranked.end(), [](const SweepCell& a, const SweepCell& b) {
    const double x = a.best_val_miou ? *a.best_val_miou : -1.0;
    const double y = b.best_val_miou ? *b.best_val_miou : -1.0;
    return x > y;
  });
  return report;
}

void write_sweep(const SweepReport& report, const std::filesystem::path& out_dir) {
  auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("nan"); };
  std::ostringstream ranked, bars;
  ranked << "rank,backbone,image_size,best_val_miou,best_val_loss,epochs_run,status\n";
  bars << "label,best_val_miou\n";
  json cells = json::array();
  int rank = 0;
  for (const auto& c : report.ranked) {
    ++rank;
    ranked << rank << ',' << c.backbone << ',' << c.image_size << ',' << opt(c.best_val_miou) << ','
           << opt(c.best_val_loss) << ',' << c.epochs_run << ',' << (c.error.empty() ? "ok" : "failed") << '\n';
    bars << c.backbone << '@' << c.image_size << ',' << opt(c.best_val_miou) << '\n';
    cells.push_back({{"rank", rank},
                     {"backbone", c.backbone},
                     {"image_size", c.image_size},
                     {"best_val_miou", c.best_val_miou ? json(*c.best_val_miou) : json(nullptr)},
                     {"best_val_loss", c.best_val_loss ? json(*c.best_val_loss) : json(nullptr)},
                     {"epochs_run", c.epochs_run},
                     {"error", c.error}});
  }
  ranked << "# reference (not reproducible here; internal dataset): efficientnet-b5 best IoU "
         << fmt(kReferenceBackboneIou) << '\n';
  json doc{{"cells", cells},
           {"reference",
            {{"backbone", "efficientnet-b5"},
             {"iou", kReferenceBackboneIou},
             {"note", "published value on an internal dataset; not reproducible with this artifact"}}}};
  io::write_text(out_dir / "sweep.json", doc.dump(2) + "\n");
  io::write_text(out_dir / "sweep_ranked.csv", ranked.str());
  io::write_text(out_dir / "sweep_bars.csv", bars.str());
}

}  // namespace nigra::train
