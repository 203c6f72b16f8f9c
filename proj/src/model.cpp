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

#include "nigra/model.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "nigra/io.hpp"

namespace nigra::model {

using nlohmann::json;

namespace {

constexpr preprocess::ChannelStats kImageNetStats{{0.485, 0.456, 0.406}, {0.229, 0.224, 0.225}};

json widths_json(const nn::StageWidths& w) { return json(std::vector<int>(w.begin(), w.end())); }

nn::StageWidths widths_from(const json& j, const char* key) {
  if (!j.is_array() || j.size() != 5) throw ValidationError(std::string(key) + " must be a list of 5 integers");
  nn::StageWidths w{};
  for (int i = 0; i < 5; ++i) w[i] = j[i].get<int>();
  return w;
}

}  // namespace

void SegModelConfig::validate() const {
  if (!nn::is_backbone(backbone.name)) {
    std::ostringstream msg;
    msg << "unknown backbone '" << backbone.name << "'; expected one of:";
    for (const auto& n : nn::backbone_names()) msg << ' ' << n;
    throw ValidationError(msg.str());
  }
  if (n_classes < 2) throw ValidationError("model.n_classes must be at least 2");
  if (input_size < 32 || input_size % 32 != 0) {
    throw ValidationError("model.input_size " + std::to_string(input_size) +
                          " must be a positive multiple of 32 (five stride-2 stages)");
  }
  for (int w : decoder_channel_widths) {
    if (w < 1) throw ValidationError("model.decoder_channel_widths must be positive");
  }
  for (int w : backbone.stage_channel_widths) {
    if (w < 1) throw ValidationError("model.stage_channel_widths must be positive");
  }
}

nn::StageWidths SegModelConfig::encoder_channels() const {
  return nn::backbone_channels(backbone.name, backbone.stage_channel_widths);
}

json to_json(const SegModelConfig& c) {
  json j{{"backbone", c.backbone.name},
         {"stage_channel_widths", widths_json(c.backbone.stage_channel_widths)},
         {"n_classes", c.n_classes},
         {"input_size", c.input_size},
         {"decoder_channel_widths", widths_json(c.decoder_channel_widths)},
         {"seed", c.seed}};
  j["pretrained_weights"] = c.backbone.pretrained_weights ? json(*c.backbone.pretrained_weights) : json(nullptr);
  return j;
}

SegModelConfig model_config_from_json(const json& j) {
  SegModelConfig c;
  try {
    c.backbone.name = j.at("backbone").get<std::string>();
    c.backbone.stage_channel_widths = widths_from(j.at("stage_channel_widths"), "stage_channel_widths");
    c.n_classes = j.at("n_classes").get<int>();
    c.input_size = j.at("input_size").get<int>();
    c.decoder_channel_widths = widths_from(j.at("decoder_channel_widths"), "decoder_channel_widths");
    c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("pretrained_weights") && j["pretrained_weights"].is_string()) {
      const auto path = j["pretrained_weights"].get<std::string>();
      if (!path.empty()) c.backbone.pretrained_weights = path;
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid model config: ") + e.what());
  }
  c.validate();
  return c;
}

ProbabilityMap softmax_head(const LogitMap& logits) {
  const int C = logits.classes;
  ProbabilityMap out(logits.width, logits.height, C);
  const std::size_t pixels = static_cast<std::size_t>(logits.width) * logits.height;
  if (logits.data.size() != pixels * C) throw ValidationError("logit map size does not match its shape");
  for (std::size_t p = 0; p < pixels; ++p) {
    const double* z = logits.data.data() + p * C;
    double m = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < C; ++c) {
      if (!std::isfinite(z[c])) {
        throw ValidationError("non-finite logit at pixel index " + std::to_string(p) + " (x=" +
                              std::to_string(p % logits.width) + ", y=" + std::to_string(p / logits.width) + ")");
      }
      m = std::max(m, z[c]);
    }
    auto prob = out.pixel(p);
    double sum = 0.0;
    for (int c = 0; c < C; ++c) {
      prob[c] = std::exp(z[c] - m);
      sum += prob[c];
    }
    for (int c = 0; c < C; ++c) prob[c] /= sum;
  }
  return out;
}

std::vector<double> softmax_backward(const ProbabilityMap& probs, std::span<const double> grad_probs) {
  const int C = probs.classes();
  if (grad_probs.size() != probs.data().size()) throw ValidationError("softmax_backward size mismatch");
  std::vector<double> dz(grad_probs.size());
  for (std::size_t p = 0; p < probs.pixel_count(); ++p) {
    auto prob = probs.pixel(p);
    double dot = 0.0;
    for (int c = 0; c < C; ++c) dot += prob[c] * grad_probs[p * C + c];
    for (int c = 0; c < C; ++c) dz[p * C + c] = prob[c] * (grad_probs[p * C + c] - dot);
  }
  return dz;
}

SegModel::SegModel(SegModelConfig config) : config_(std::move(config)) {
  config_.validate();
  Rng rng = make_rng(config_.seed, 0x30de1);
  encoder_ = nn::make_encoder(config_.backbone.name, config_.backbone.stage_channel_widths, store_, "encoder", rng);
  const auto enc = encoder_->channels();
  const auto& dec = config_.decoder_channel_widths;
  int in = enc[4];
  for (int k = 0; k < 5; ++k) {
    // Block k upsamples to stride 2^(4-k) and joins encoder stage 3-k, if any.
    const int skip = k < 4 ? enc[3 - k] : 0;
    const std::string name = "decoder.block" + std::to_string(k + 1);
    decoder_.push_back({nn::ConvBnAct(store_, name + ".conv1", in + skip, dec[k], 3, rng),
                        nn::ConvBnAct(store_, name + ".conv2", dec[k], dec[k], 3, rng)});
    in = dec[k];
  }
  head_ = nn::Conv2d(store_, "head", in, config_.n_classes, 3, rng, 1, -1, 1, true);
}

nn::Var SegModel::forward(const nn::Var& x, bool training) {
  const auto& shape = x->value.shape;
  if (shape.size() != 4 || shape[1] != 3 || shape[2] % 32 != 0 || shape[3] % 32 != 0) {
    throw ValidationError("model input must be [N, 3, H, W] with H, W multiples of 32; got " +
                          x->value.shape_string());
  }
  nn::FeaturePyramid features = encoder_->forward(x, training);
  nn::Var h = features[4];
  for (int k = 0; k < 5; ++k) {
    h = nn::upsample_nearest2x(h);
    if (k < 4) h = nn::concat_channels({h, features[3 - k]});
    h = decoder_[k].second(decoder_[k].first(h, training), training);
  }
  return head_(h);
}

std::unique_ptr<SegModel> build(const SegModelConfig& config) {
  auto model = std::make_unique<SegModel>(config);
  if (config.backbone.pretrained_weights) {
    nn::load_params(model->params(), *config.backbone.pretrained_weights, false);
    model->set_input_stats(kImageNetStats);
  }
  return model;
}

nn::Tensor batch_tensor(const std::vector<preprocess::ImageTensor>& images) {
  if (images.empty()) throw ValidationError("empty batch");
  const int h = images.front().height;
  const int w = images.front().width;
  nn::Tensor t({static_cast<int>(images.size()), 3, h, w});
  const std::size_t sample = static_cast<std::size_t>(3) * h * w;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].height != h || images[i].width != w) throw ValidationError("batch images differ in size");
    std::copy(images[i].chw.begin(), images[i].chw.end(), t.data.begin() + static_cast<std::ptrdiff_t>(i * sample));
  }
  return t;
}

std::vector<LogitMap> split_logits(const nn::Tensor& logits) {
  const int N = logits.n(), C = logits.c(), H = logits.h(), W = logits.w();
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  std::vector<LogitMap> out(N);
  for (int n = 0; n < N; ++n) {
    LogitMap& m = out[n];
    m.width = W;
    m.height = H;
    m.classes = C;
    m.data.resize(plane * C);
    const float* src = logits.data.data() + static_cast<std::size_t>(n) * C * plane;
    for (int c = 0; c < C; ++c) {
      for (std::size_t p = 0; p < plane; ++p) m.data[p * C + c] = src[c * plane + p];
    }
  }
  return out;
}

nn::Tensor pack_logit_grads(const std::vector<std::vector<double>>& grads, int classes, int height, int width) {
  const int N = static_cast<int>(grads.size());
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  nn::Tensor t({N, classes, height, width});
  for (int n = 0; n < N; ++n) {
    float* dst = t.data.data() + static_cast<std::size_t>(n) * classes * plane;
    for (int c = 0; c < classes; ++c) {
      for (std::size_t p = 0; p < plane; ++p) dst[c * plane + p] = static_cast<float>(grads[n][p * classes + c]);
    }
  }
  return t;
}

std::vector<Prediction> predict_batch(SegModel& model, const std::vector<RasterImage>& images) {
  const int size = model.config().input_size;
  std::vector<preprocess::ImageTensor> inputs;
  for (const auto& image : images) {
    if (image.width() != size || image.height() != size) {
      throw ValidationError("image is " + std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                            " but the model expects " + std::to_string(size) + "x" + std::to_string(size) +
                            "; resize it first (preprocess::resize_pair)");
    }
    inputs.push_back(preprocess::normalize_image(image, model.input_stats()));
  }
  nn::NoGradGuard no_grad;
  nn::Var logits = model.forward(nn::make_var(batch_tensor(inputs)), false);
  std::vector<Prediction> out;
  for (auto& map : split_logits(logits->value)) {
    Prediction p;
    p.probabilities = softmax_head(map);
    p.mask = argmax_decode(p.probabilities);
    out.push_back(std::move(p));
  }
  return out;
}

Prediction predict(SegModel& model, const RasterImage& image) { return std::move(predict_batch(model, {image}).front()); }

LabelMask predict_full_size(SegModel& model, const RasterImage& image) {
  const int size = model.config().input_size;
  RasterImage resized = preprocess::resize_image(image, size, size);
  LabelMask mask = predict(model, resized).mask;
  return preprocess::resize_mask(mask, image.width(), image.height());
}

void save_checkpoint(const SegModel& model, const ClassCatalog& catalog, const json& metadata,
                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json classes = json::array();
  for (const auto& e : catalog.entries()) classes.push_back({{"id", e.id}, {"name", e.name}});
  json doc{{"schema", kCheckpointSchema}, {"model", to_json(model.config())}, {"catalog", classes},
           {"metadata", metadata}};
  if (auto stats = model.input_stats()) {
    doc["input_stats"] = {{"mean", stats->mean}, {"std", stats->stddev}};
  }
  nn::save_params(model.params(), dir / "params.bin");
  io::write_text(dir / "config.json", doc.dump(2) + "\n");
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  json doc;
  try {
    doc = json::parse(io::read_text(dir / "config.json"));
  } catch (const json::parse_error& e) {
    throw ValidationError("checkpoint " + dir.string() + ": bad config.json: " + e.what());
  }
  if (doc.value("schema", std::string()) != kCheckpointSchema) {
    throw ValidationError("checkpoint " + dir.string() + " has unsupported schema '" +
                          doc.value("schema", std::string()) + "'");
  }
  LoadedCheckpoint out;
  std::vector<ClassEntry> entries;
  for (const auto& e : doc.at("catalog")) entries.push_back({e.at("id").get<ClassId>(), e.at("name").get<std::string>()});
  out.catalog = ClassCatalog(std::move(entries));
  SegModelConfig config = model_config_from_json(doc.at("model"));
  // Weights come from params.bin, not the original pretrained file.
  config.backbone.pretrained_weights.reset();
  out.model = std::make_unique<SegModel>(config);
  if (doc.contains("input_stats")) {
    preprocess::ChannelStats stats;
    stats.mean = doc["input_stats"]["mean"].get<std::array<double, 3>>();
    stats.stddev = doc["input_stats"]["std"].get<std::array<double, 3>>();
    out.model->set_input_stats(stats);
  }
  nn::load_params(out.model->params(), dir / "params.bin", true);
  out.metadata = doc.value("metadata", json::object());
  return out;
}

}  // namespace nigra::model
