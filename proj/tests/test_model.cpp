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

#include <algorithm>
#include <cmath>

#include "nigra/model.hpp"
#include "nigra/synthdata.hpp"
#include "nigra/trainer.hpp"
#include "test_util.hpp"

using namespace nigra;
using namespace nigra::model;

namespace {

SegModelConfig tiny(int size = 64) {
  SegModelConfig c;
  c.backbone.name = "tiny-test";
  c.input_size = size;
  c.decoder_channel_widths = {32, 16, 16, 8, 8};
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("softmax is stable and shift invariant") {
  Rng rng = make_rng(1, 0);
  for (int trial = 0; trial < 50; ++trial) {
    LogitMap l{8, 8, 3, std::vector<double>(8 * 8 * 3)};
    for (auto& v : l.data) v = uniform(rng, -1000.0, 1000.0);
    const auto p = softmax_head(l);
    for (int i = 0; i < 64; ++i) {
      double s = 0.0;
      for (int c = 0; c < 3; ++c) s += p.data()[i * 3 + c];
      CHECK(std::abs(s - 1.0) < 1e-6);
    }
    auto shifted = l;
    for (int i = 0; i < 64; ++i) {
      const double k = uniform(rng, -500.0, 500.0);
      for (int c = 0; c < 3; ++c) shifted.data[i * 3 + c] += k;
    }
    const auto q = softmax_head(shifted);
    double worst = 0.0;
    for (std::size_t i = 0; i < p.data().size(); ++i) worst = std::max(worst, std::abs(p.data()[i] - q.data()[i]));
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("non-finite logits name the pixel") {
  LogitMap l{4, 2, 3, std::vector<double>(24, 0.0)};
  l.data[(1 * 4 + 2) * 3 + 1] = std::nan("");
  try {
    softmax_head(l);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("x=2") != std::string::npos);
  }
}

TEST_CASE("softmax backward matches finite differences") {
  Rng rng = make_rng(2, 0);
  LogitMap l{2, 2, 3, std::vector<double>(12)};
  for (auto& v : l.data) v = standard_normal(rng);
  std::vector<double> g(12);
  for (auto& v : g) v = standard_normal(rng);
  const auto dz = softmax_backward(softmax_head(l), g);
  auto f = [&](const LogitMap& x) {
    const auto p = softmax_head(x);
    double s = 0.0;
    for (std::size_t i = 0; i < 12; ++i) s += g[i] * p.data()[i];
    return s;
  };
  for (std::size_t i = 0; i < 12; ++i) {
    auto a = l, b = l;
    a.data[i] += 1e-6;
    b.data[i] -= 1e-6;
    CHECK(dz[i] == doctest::Approx((f(a) - f(b)) / 2e-6).epsilon(1e-6));
  }
}

TEST_CASE("split and pack are inverse layouts") {
  Rng rng = make_rng(3, 0);
  nn::Tensor t({2, 3, 4, 5});
  for (auto& v : t.data) v = static_cast<float>(standard_normal(rng));
  const auto maps = split_logits(t);
  REQUIRE(maps.size() == 2);
  CHECK(maps[1].data[(2 * 5 + 3) * 3 + 1] == t.data[((1 * 3 + 1) * 4 + 2) * 5 + 3]);
  std::vector<std::vector<double>> g{maps[0].data, maps[1].data};
  const auto back = pack_logit_grads(g, 3, 4, 5);
  CHECK(back.data == t.data);
}

TEST_CASE("config validation and JSON round trip") {
  auto c = tiny();
  c.validate();
  CHECK(model_config_from_json(to_json(c)).input_size == 64);
  CHECK(to_json(model_config_from_json(to_json(c))) == to_json(c));
  c.input_size = 100;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = tiny();
  c.backbone.name = "inception";
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("forward shapes, prediction and determinism") {
  SegModel a(tiny()), b(tiny());
  CHECK(a.params().fingerprint() == b.params().fingerprint());
  const auto s = synthdata::generate_phantom(synthdata::PhantomSpec{}, 0);
  const auto pred = predict_full_size(a, s.image);
  CHECK(pred.width() == 128);
  CHECK(pred.height() == 128);
  CHECK_THROWS_AS(predict(a, s.image), ValidationError);
  const auto p = predict_batch(a, {preprocess::resize_image(s.image, 64, 64)});
  REQUIRE(p.size() == 1);
  p[0].probabilities.validate();
  CHECK(argmax_decode(p[0].probabilities) == p[0].mask);
}

TEST_CASE("checkpoint round trip reproduces validation loss") {
  const auto dir = testing::scratch_dir("ckpt");
  synthdata::PhantomSpec spec;
  spec.image_size = 64;
  spec.n_samples = 6;
  const auto ds = synthdata::generate_dataset(spec, dir / "data");
  const auto cat = ClassCatalog::Default();
  auto data = train::load_split(ds.manifest, Split::kTrain, 64, preprocess::ResizeMode::kStretch, cat);

  SegModel m(tiny());
  train::TrainConfig tc;
  auto opt = train::make_optimizer(tc);
  train::train_step(m, *opt, metrics::LossKind::kDice, data.images, data.masks, cat, 1e-3);
  const auto before = train::evaluate_model(m, data, metrics::LossKind::kDice, cat, 2);
  save_checkpoint(m, cat, {{"note", "x"}}, dir / "ckpt");
  auto loaded = load_checkpoint(dir / "ckpt");
  CHECK(loaded.metadata["note"] == "x");
  CHECK(loaded.model->params().fingerprint() == m.params().fingerprint());
  const auto after = train::evaluate_model(*loaded.model, data, metrics::LossKind::kDice, cat, 2);
  CHECK(std::abs(after.loss - before.loss) < 1e-6);
  CHECK_THROWS_AS(load_checkpoint(dir / "nowhere"), IoError);
}

TEST_CASE("pretrained encoder weights load into a fresh model") {
  const auto dir = testing::scratch_dir("pretrained");
  SegModel src(tiny());
  nn::save_params(src.params(), dir / "enc.bin");
  auto cfg = tiny();
  cfg.seed = 99;
  cfg.backbone.pretrained_weights = (dir / "enc.bin").string();
  auto m = build(cfg);
  CHECK(m->params().fingerprint() == src.params().fingerprint());
  CHECK(m->input_stats().has_value());
}

TEST_CASE("softmax worked values") {
  auto p = softmax_head({1, 1, 3, {0, 0, 0}});
  for (int c = 0; c < 3; ++c) CHECK(p.at(0, 0, c) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  p = softmax_head({1, 1, 3, {1000, 0, 0}});
  CHECK(std::abs(p.at(0, 0, 0) - 1.0) < 1e-12);
  CHECK(p.at(0, 0, 1) < 1e-12);
  p = softmax_head({1, 1, 2, {std::log(2.0), 0}});
  CHECK(p.at(0, 0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("argmax is invariant to monotone per-pixel logit rescaling") {
  Rng rng = make_rng(5, 0);
  LogitMap l{6, 6, 3, std::vector<double>(108)};
  for (auto& v : l.data) v = 5 * standard_normal(rng);
  auto scaled = l;
  for (int i = 0; i < 36; ++i) {
    const double a = uniform(rng, 0.1, 10.0), b = uniform(rng, -50.0, 50.0);
    for (int c = 0; c < 3; ++c) scaled.data[i * 3 + c] = a * l.data[i * 3 + c] + b;
  }
  CHECK(argmax_decode(softmax_head(l)) == argmax_decode(softmax_head(scaled)));
}

TEST_CASE("duplicated batch entries give identical outputs") {
  SegModel m(tiny());
  Rng rng = make_rng(6, 0);
  const auto a = testing::random_image(64, 64, rng);
  const auto b = testing::random_image(64, 64, rng);
  const auto out = predict_batch(m, {a, b, a});
  auto same = [](const ProbabilityMap& x, const ProbabilityMap& y) {
    return std::equal(x.data().begin(), x.data().end(), y.data().begin(), y.data().end());
  };
  CHECK(same(out[0].probabilities, out[2].probabilities));
  CHECK(same(predict(m, a).probabilities, out[0].probabilities));
}

TEST_CASE("output size equals input size at the supported image sizes") {
  for (int size : {512, 768, 1024}) {
    auto c = tiny(size);
    c.decoder_channel_widths = {8, 8, 8, 4, 4};
    SegModel m(c);
    nn::NoGradGuard guard;
    const auto y = m.forward(nn::make_var(nn::Tensor({1, 3, size, size}, 0.1f)), false);
    CHECK(y->value.shape == std::vector<int>{1, 3, size, size});
  }
}

TEST_CASE("tiny-test encoder size") {
  SegModel m(tiny());
  MESSAGE("tiny-test encoder parameters: " << m.encoder_parameter_count());
  CHECK(m.encoder_parameter_count() > 40'000);
  CHECK(m.encoder_parameter_count() < 60'000);
}
