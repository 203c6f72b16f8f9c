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
#include "nigra/synthdata.hpp"
#include "nigra/trainer.hpp"
#include "test_util.hpp"

using namespace nigra;
using namespace nigra::train;

namespace {

model::SegModelConfig tiny(int size = 64) {
  model::SegModelConfig c;
  c.backbone.name = "tiny-test";
  c.input_size = size;
  c.decoder_channel_widths = {32, 16, 16, 8, 8};
  c.seed = 5;
  return c;
}

std::vector<AnnotatedSample> phantoms(const std::string& name, int n, int size = 64) {
  synthdata::PhantomSpec spec;
  spec.image_size = size;
  spec.n_samples = n;
  return synthdata::generate_dataset(spec, testing::scratch_dir(name)).manifest;
}

}  // namespace

TEST_CASE("plateau trace on a flat loss") {
  PlateauScheduler s(1e-3, 0.1, 2, 1e-6, 1e-6);
  // Hand simulation: a reduction every second stale epoch, clipped at min_lr.
  const std::vector<double> expected{1e-3,
                                     1e-3,
                                     1e-3 * 0.1,
                                     1e-3 * 0.1,
                                     1e-3 * 0.1 * 0.1,
                                     1e-3 * 0.1 * 0.1,
                                     1e-6,
                                     1e-6,
                                     1e-6,
                                     1e-6};
  for (std::size_t e = 0; e < expected.size(); ++e) {
    CAPTURE(e + 1);
    const double lr = s.step(1.0);
    if (e < 6) {
      CHECK(lr == expected[e]);
    } else {
      CHECK(lr == doctest::Approx(expected[e]).epsilon(1e-12));
      CHECK(lr >= 1e-6);
    }
  }
}

TEST_CASE("strictly improving losses never reduce the lr") {
  PlateauScheduler s(1e-3, 0.1, 1, 1e-6, 1e-6);
  EarlyStopper stop(1, 1e-6);
  for (int e = 0; e < 30; ++e) {
    const double loss = 1.0 - 0.01 * e;
    CHECK(s.step(loss) == 1e-3);
    CHECK_FALSE(stop.update(loss));
    CHECK(stop.improved());
  }
}

TEST_CASE("plateau rule and early stopping over random traces") {
  Rng rng = make_rng(8, 0);
  for (int trace = 0; trace < 20; ++trace) {
    const int patience = 1 + static_cast<int>(uniform_index(rng, 5));
    PlateauScheduler s(1e-3, 0.1, 1 + static_cast<int>(uniform_index(rng, 4)), 1e-6, 1e-6);
    EarlyStopper stop(patience, 1e-6);
    double lr = 1e-3, best = INFINITY, level = 1.0;
    int best_epoch = 0, stopped_at = 0;
    for (int e = 1; e <= 60; ++e) {
      level *= uniform(rng, 0.97, 1.04);
      const double loss = level;
      if (loss < best - 1e-6) {
        best = loss;
        best_epoch = e;
      }
      const double next = s.step(loss);
      CHECK((next == lr || next == std::max(lr * 0.1, 1e-6)));
      lr = next;
      if (stop.update(loss)) {
        stopped_at = e;
        break;
      }
    }
    CHECK(stop.best_epoch() == best_epoch);
    if (stopped_at) {
      CHECK(stopped_at - best_epoch == patience);
    } else {
      CHECK(60 - best_epoch < patience);
    }
  }
}

TEST_CASE("config parsing and validation") {
  CHECK(parse_optimizer("sgd") == OptimizerKind::kSgd);
  CHECK(to_string(OptimizerKind::kAdam) == "adam");
  CHECK_THROWS_AS(parse_optimizer("rmsprop"), ValidationError);
  TrainConfig c;
  c.validate();
  c.learning_rate = 1e-7;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = TrainConfig{};
  c.plateau_patience = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = TrainConfig{};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("one Adam step updates every parameter with a gradient") {
  const auto cat = ClassCatalog::Default();
  const auto data = load_split(phantoms("adam", 4), Split::kTrain, 64, preprocess::ResizeMode::kStretch, cat);
  model::SegModel m(tiny());
  std::vector<std::vector<float>> before;
  for (const auto& e : m.params().entries()) before.push_back(e.var->value.data);
  TrainConfig tc;
  auto opt = make_optimizer(tc);
  train_step(m, *opt, metrics::LossKind::kDice, data.images, data.masks, cat, 1e-3);
  std::size_t checked = 0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    const auto& e = m.params().entries()[i];
    if (!e.trainable || e.var->grad.data.empty()) continue;
    for (std::size_t k = 0; k < before[i].size(); ++k) {
      if (e.var->grad.data[k] != 0.0f) {
        CHECK(e.var->value.data[k] != before[i][k]);
        ++checked;
      }
    }
  }
  CHECK(checked > 1000);
}

TEST_CASE("errors: empty split and non-finite loss") {
  const auto cat = ClassCatalog::Default();
  auto manifest = phantoms("errs", 3);
  for (auto& s : manifest) s.split = Split::kTrain;
  try {
    load_split(manifest, Split::kVal, 64, preprocess::ResizeMode::kStretch, cat);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("val") != std::string::npos);
  }
  model::SegModel m(tiny());
  TrainConfig tc;
  tc.epochs = 1;
  CHECK_THROWS_AS(train::train(m, manifest, tc, augment::AugmentationConfig::Disabled(), cat, testing::scratch_dir("e1")),
                  ValidationError);

  const auto data = load_split(manifest, Split::kTrain, 64, preprocess::ResizeMode::kStretch, cat);
  for (auto& e : m.params().entries()) {
    if (e.name.rfind("head.", 0) == 0) e.var->value.data[0] = std::nanf("");
  }
  auto opt = make_optimizer(tc);
  try {
    train_step(m, *opt, metrics::LossKind::kDice, data.images, data.masks, cat, 0.25, data.ids);
    FAIL("expected a runtime error");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("0.25") != std::string::npos);
    CHECK(msg.find(data.ids[0]) != std::string::npos);
  }
}

TEST_CASE("single batch overfit") {
  const auto cat = ClassCatalog::Default();
  const auto data = load_split(phantoms("overfit", 10), Split::kTrain, 64, preprocess::ResizeMode::kStretch, cat);
  const std::vector<RasterImage> images(data.images.begin(), data.images.begin() + 2);
  const std::vector<LabelMask> masks(data.masks.begin(), data.masks.begin() + 2);
  model::SegModel m(tiny());
  TrainConfig tc;
  auto opt = make_optimizer(tc);
  double loss = 1.0;
  int steps = 0;
  while (steps < 200 && loss >= 0.1) {
    loss = train_step(m, *opt, metrics::LossKind::kDice, images, masks, cat, 1e-3);
    ++steps;
  }
  MESSAGE("dice loss " << loss << " after " << steps << " steps");
  CHECK(loss < 0.1);
}

TEST_CASE("train writes history and a best checkpoint, deterministically") {
  const auto cat = ClassCatalog::Default();
  const auto manifest = phantoms("train", 10);
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 2;
  tc.seed = 4;
  auto run = [&](const std::string& name) {
    model::SegModel m(tiny());
    const auto dir = testing::scratch_dir(name);
    auto st = train::train(m, manifest, tc, augment::AugmentationConfig{}, cat, dir);
    return std::make_pair(st, io::read_text(dir / "history.csv"));
  };
  const auto [a, ha] = run("train_a");
  const auto [b, hb] = run("train_b");
  CHECK(ha == hb);
  CHECK(ha.rfind("epoch,train_loss,val_loss,val_miou,lr\n", 0) == 0);
  CHECK(a.history.size() == 3);
  CHECK(a.stop_reason == "epochs_exhausted");
  CHECK(std::filesystem::exists(a.best_checkpoint / "params.bin"));
  for (std::size_t i = 1; i < a.history.size(); ++i) CHECK(a.history[i].lr <= a.history[i - 1].lr);
  // The best checkpoint reproduces its recorded validation loss.
  auto loaded = model::load_checkpoint(a.best_checkpoint);
  const auto val = load_split(manifest, Split::kVal, 64, preprocess::ResizeMode::kStretch, cat);
  const auto ev = evaluate_model(*loaded.model, val, metrics::LossKind::kDice, cat, 2);
  CHECK(std::abs(ev.loss - a.best_val_loss) < 1e-6);
}

TEST_CASE("backbone sweep structure, failures and determinism") {
  const auto cat = ClassCatalog::Default();
  const auto manifest = phantoms("sweep", 10, 128);
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 4;
  auto run = [&](const std::string& name, const std::vector<int>& sizes) {
    return run_backbone_sweep(manifest, {"tiny-test"}, sizes, tiny(), tc, augment::AugmentationConfig::Disabled(), cat,
                              testing::scratch_dir(name));
  };
  const auto r = run("sweep_a", {64, 128});
  REQUIRE(r.ranked.size() == 2);
  for (const auto& c : r.ranked) {
    CHECK(c.error.empty());
    REQUIRE(c.best_val_miou.has_value());
    CHECK(*c.best_val_miou >= 0.0);
    CHECK(*c.best_val_miou <= 1.0);
  }
  CHECK(*r.ranked[0].best_val_miou >= *r.ranked[1].best_val_miou);
  const auto again = run("sweep_b", {64, 128});
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(again.ranked[i].image_size == r.ranked[i].image_size);
    CHECK(again.ranked[i].best_val_miou == r.ranked[i].best_val_miou);
  }
  const auto bad = run("sweep_c", {48, 64});
  REQUIRE(bad.ranked.size() == 2);
  CHECK(bad.ranked[0].error.empty());
  CHECK(bad.ranked[1].image_size == 48);
  CHECK_FALSE(bad.ranked[1].error.empty());

  const auto dir = testing::scratch_dir("sweep_out");
  write_sweep(r, dir);
  const auto csv = io::read_text(dir / "sweep_ranked.csv");
  CHECK(csv.find("0.73") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "sweep.json"));
  CHECK(std::filesystem::exists(dir / "sweep_bars.csv"));
}
