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

#include "nigra/config.hpp"

#include <sstream>

#include "nigra/io.hpp"

namespace nigra::config {

using nlohmann::json;

namespace {

json rgb(const synthdata::Rgb& c) { return json::array({c[0], c[1], c[2]}); }
json range(const synthdata::Range& r) { return json::array({r.lo, r.hi}); }
json widths(const nn::StageWidths& w) { return json(std::vector<int>(w.begin(), w.end())); }

std::string kind(const json& v) {
  if (v.is_number()) return "number";
  if (v.is_boolean()) return "boolean";
  if (v.is_string()) return "string";
  if (v.is_array()) return "list";
  if (v.is_object()) return "object";
  return "null";
}

void merge_into(json& base, const json& user, const std::string& prefix, std::vector<std::string>& unknown,
                std::vector<std::string>& mistyped) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) {
      unknown.push_back(key);
      continue;
    }
    json& slot = base[it.key()];
    if (slot.is_object() && it.value().is_object()) {
      merge_into(slot, it.value(), key, unknown, mistyped);
    } else if (slot.is_null() || it.value().is_null() || kind(slot) == kind(it.value())) {
      slot = it.value();
    } else {
      mistyped.push_back(key + " (expected " + kind(slot) + ", got " + kind(it.value()) + ")");
    }
  }
}

// Typed read of tree[section][key], naming the key on failure.
template <typename T>
T get(const json& tree, const std::string& section, const std::string& key) {
  try {
    return tree.at(section).at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config key " + section + "." + key + " is missing or has the wrong type");
  }
}

synthdata::Rgb get_rgb(const json& tree, const std::string& section, const std::string& key) {
  const auto v = get<std::vector<int>>(tree, section, key);
  if (v.size() != 3) throw ValidationError("config key " + section + "." + key + " must have 3 entries");
  synthdata::Rgb out{};
  for (int i = 0; i < 3; ++i) {
    if (v[i] < 0 || v[i] > 255) throw ValidationError("config key " + section + "." + key + " must be 0..255");
    out[i] = static_cast<std::uint8_t>(v[i]);
  }
  return out;
}

synthdata::Range get_range(const json& tree, const std::string& section, const std::string& key) {
  const auto v = get<std::vector<double>>(tree, section, key);
  if (v.size() != 2) throw ValidationError("config key " + section + "." + key + " must be [lo, hi]");
  return {v[0], v[1]};
}

nn::StageWidths get_widths(const json& tree, const std::string& section, const std::string& key) {
  const auto v = get<std::vector<int>>(tree, section, key);
  if (v.size() != 5) throw ValidationError("config key " + section + "." + key + " must have 5 entries");
  return {v[0], v[1], v[2], v[3], v[4]};
}

void flatten(const json& node, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
  if (node.is_object()) {
    for (auto it = node.begin(); it != node.end(); ++it) {
      flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    }
  } else {
    out.emplace_back(prefix, node.dump());
  }
}

}  // namespace

json defaults() {
  const synthdata::PhantomSpec p;
  const model::SegModelConfig m;
  const train::TrainConfig t;
  const augment::AugmentationConfig a;
  const quantify::StainConfig s;
  json classes = json::array();
  const ClassCatalog default_catalog = ClassCatalog::Default();
  for (const auto& e : default_catalog.entries()) classes.push_back(e.name);
  return {
      {"seed", 0},
      {"run_dir", "run"},
      {"data", {{"manifest", ""}, {"split", "test"}, {"classes", classes}}},
      {"generate",
       {{"n", p.n_samples},
        {"size", p.image_size},
        {"nissl_background", rgb(p.nissl_background)},
        {"snr_counterstain", rgb(p.snr_counterstain)},
        {"sncd_counterstain", rgb(p.sncd_counterstain)},
        {"th_stain", rgb(p.th_stain)},
        {"texture_amplitude", p.texture_amplitude},
        {"stain_jitter", p.stain_jitter},
        {"th_density", p.th_density},
        {"th_scale_snr", range(p.th_scale_snr)},
        {"th_scale_sncd", range(p.th_scale_sncd)},
        {"hemisphere_loss", p.hemisphere_loss},
        {"hemisphere_loss_factor", p.hemisphere_loss_factor},
        {"split", json::array({p.split.train, p.split.val, p.split.test})}}},
      {"model",
       {{"backbone", m.backbone.name},
        {"stage_channel_widths", widths(m.backbone.stage_channel_widths)},
        {"pretrained_weights", nullptr},
        {"n_classes", m.n_classes},
        {"input_size", m.input_size},
        {"decoder_channel_widths", widths(m.decoder_channel_widths)}}},
      {"train",
       {{"loss", metrics::to_string(t.loss)},
        {"optimizer", train::to_string(t.optimizer)},
        {"learning_rate", t.learning_rate},
        {"adam_betas", json::array({t.adam_beta1, t.adam_beta2})},
        {"sgd_momentum", t.sgd_momentum},
        {"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"plateau_patience", t.plateau_patience},
        {"plateau_factor", t.plateau_factor},
        {"min_lr", t.min_lr},
        {"early_stop_patience", t.early_stop_patience},
        {"improvement_threshold", t.improvement_threshold},
        {"resize_mode", "stretch"}}},
      {"augment",
       {{"rotation_p", a.rotation_p},
        {"rotation_max_degrees", a.rotation_max_degrees},
        {"vertical_flip_p", a.vertical_flip_p},
        {"horizontal_flip_p", a.horizontal_flip_p},
        {"rot90_p", a.rot90_p},
        {"transpose_p", a.transpose_p},
        {"elastic_p", a.elastic_p},
        {"elastic_alpha", a.elastic_alpha},
        {"elastic_sigma", a.elastic_sigma},
        {"noise_p", a.noise_p},
        {"noise_variance", json::array({a.noise_variance_lo, a.noise_variance_hi})}}},
      {"sweep",
       {{"backbones", json::array({"vgg19", "resnet50", "resnet34", "densenet121", "efficientnet-b5", "mobilenet"})},
        {"image_sizes", json::array({256, 512, 1024})}}},
      {"eval", {{"checkpoint", ""}}},
      {"predict", {{"checkpoint", ""}, {"image", ""}, {"overlay", false}}},
      {"quantify",
       {{"checkpoint", ""},
        {"blue_norm_threshold", s.blue_norm_threshold},
        {"tissue_intensity_max", s.tissue_intensity_max},
        {"hemispheres", false},
        {"overlay", false}}},
      {"correlate", {{"od_csv", json::array()}, {"x_source", "gt"}, {"y_source", "model"}}},
      {"preview", {{"image", ""}, {"mask", ""}, {"n", 8}, {"per_transform", false}}},
      {"report",
       {{"metrics_without_et", ""},
        {"metrics_with_et", ""},
        {"od_csv", json::array()},
        {"x_source", "gt"},
        {"y_source", "model"}}},
  };
}

json merge(const json& base, const json& user) {
  if (!user.is_object()) throw ValidationError("config must be a JSON object");
  json out = base;
  std::vector<std::string> unknown, mistyped;
  merge_into(out, user, "", unknown, mistyped);
  if (!unknown.empty() || !mistyped.empty()) {
    std::ostringstream msg;
    if (!unknown.empty()) {
      msg << "unknown config keys:";
      for (const auto& k : unknown) msg << ' ' << k;
    }
    if (!mistyped.empty()) {
      if (!unknown.empty()) msg << "; ";
      msg << "wrong value types:";
      for (const auto& k : mistyped) msg << ' ' << k;
    }
    throw ValidationError(msg.str());
  }
  return out;
}

json load_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("config file not found: " + path.string());
  try {
    return json::parse(io::read_text(path));
  } catch (const json::parse_error& e) {
    throw ValidationError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

void set_path(json& tree, const std::string& dotted, const json& value) {
  json patch = value;
  std::string rest = dotted;
  std::vector<std::string> parts;
  for (std::size_t pos; (pos = rest.find('.')) != std::string::npos; rest = rest.substr(pos + 1)) {
    parts.push_back(rest.substr(0, pos));
  }
  parts.push_back(rest);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
  tree = merge(tree, patch);
}

void apply_override(json& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  set_path(tree, key, value);
}

std::vector<std::pair<std::string, std::string>> describe(const json& tree, const std::vector<std::string>& sections) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : sections) {
    if (!tree.contains(s)) continue;
    flatten(tree.at(s), s, out);
  }
  return out;
}

synthdata::PhantomSpec phantom_spec(const json& tree) {
  synthdata::PhantomSpec p;
  p.n_samples = get<int>(tree, "generate", "n");
  p.image_size = get<int>(tree, "generate", "size");
  p.seed = tree.at("seed").get<std::uint64_t>();
  p.nissl_background = get_rgb(tree, "generate", "nissl_background");
  p.snr_counterstain = get_rgb(tree, "generate", "snr_counterstain");
  p.sncd_counterstain = get_rgb(tree, "generate", "sncd_counterstain");
  p.th_stain = get_rgb(tree, "generate", "th_stain");
  p.texture_amplitude = get<double>(tree, "generate", "texture_amplitude");
  p.stain_jitter = get<double>(tree, "generate", "stain_jitter");
  p.th_density = get<double>(tree, "generate", "th_density");
  p.th_scale_snr = get_range(tree, "generate", "th_scale_snr");
  p.th_scale_sncd = get_range(tree, "generate", "th_scale_sncd");
  p.hemisphere_loss = get<bool>(tree, "generate", "hemisphere_loss");
  p.hemisphere_loss_factor = get<double>(tree, "generate", "hemisphere_loss_factor");
  const auto split = get<std::vector<double>>(tree, "generate", "split");
  if (split.size() != 3) throw ValidationError("config key generate.split must be [train, val, test]");
  p.split = {split[0], split[1], split[2]};
  p.validate();
  return p;
}

model::SegModelConfig model_config(const json& tree) {
  model::SegModelConfig m;
  m.backbone.name = get<std::string>(tree, "model", "backbone");
  m.backbone.stage_channel_widths = get_widths(tree, "model", "stage_channel_widths");
  const auto& pw = tree.at("model").at("pretrained_weights");
  if (pw.is_string() && !pw.get<std::string>().empty()) {
    m.backbone.pretrained_weights = pw.get<std::string>();
    if (!std::filesystem::exists(*m.backbone.pretrained_weights)) {
      throw ValidationError("model.pretrained_weights not found: " + *m.backbone.pretrained_weights);
    }
  }
  m.n_classes = get<int>(tree, "model", "n_classes");
  m.input_size = get<int>(tree, "model", "input_size");
  m.decoder_channel_widths = get_widths(tree, "model", "decoder_channel_widths");
  m.seed = tree.at("seed").get<std::uint64_t>();
  m.validate();
  return m;
}

train::TrainConfig train_config(const json& tree) {
  train::TrainConfig t;
  t.loss = metrics::parse_loss(get<std::string>(tree, "train", "loss"));
  t.optimizer = train::parse_optimizer(get<std::string>(tree, "train", "optimizer"));
  t.learning_rate = get<double>(tree, "train", "learning_rate");
  const auto betas = get<std::vector<double>>(tree, "train", "adam_betas");
  if (betas.size() != 2) throw ValidationError("config key train.adam_betas must be [beta1, beta2]");
  t.adam_beta1 = betas[0];
  t.adam_beta2 = betas[1];
  t.sgd_momentum = get<double>(tree, "train", "sgd_momentum");
  t.epochs = get<int>(tree, "train", "epochs");
  t.batch_size = get<int>(tree, "train", "batch_size");
  t.plateau_patience = get<int>(tree, "train", "plateau_patience");
  t.plateau_factor = get<double>(tree, "train", "plateau_factor");
  t.min_lr = get<double>(tree, "train", "min_lr");
  t.early_stop_patience = get<int>(tree, "train", "early_stop_patience");
  t.improvement_threshold = get<double>(tree, "train", "improvement_threshold");
  const auto mode = get<std::string>(tree, "train", "resize_mode");
  if (mode == "stretch") {
    t.resize_mode = preprocess::ResizeMode::kStretch;
  } else if (mode == "letterbox") {
    t.resize_mode = preprocess::ResizeMode::kLetterbox;
  } else {
    throw ValidationError("train.resize_mode must be stretch or letterbox, got '" + mode + "'");
  }
  t.seed = tree.at("seed").get<std::uint64_t>();
  t.validate();
  return t;
}

augment::AugmentationConfig augment_config(const json& tree) {
  augment::AugmentationConfig a;
  a.rotation_p = get<double>(tree, "augment", "rotation_p");
  a.rotation_max_degrees = get<double>(tree, "augment", "rotation_max_degrees");
  a.vertical_flip_p = get<double>(tree, "augment", "vertical_flip_p");
  a.horizontal_flip_p = get<double>(tree, "augment", "horizontal_flip_p");
  a.rot90_p = get<double>(tree, "augment", "rot90_p");
  a.transpose_p = get<double>(tree, "augment", "transpose_p");
  a.elastic_p = get<double>(tree, "augment", "elastic_p");
  a.elastic_alpha = get<double>(tree, "augment", "elastic_alpha");
  a.elastic_sigma = get<double>(tree, "augment", "elastic_sigma");
  a.noise_p = get<double>(tree, "augment", "noise_p");
  const auto nv = get<std::vector<double>>(tree, "augment", "noise_variance");
  if (nv.size() != 2) throw ValidationError("config key augment.noise_variance must be [lo, hi]");
  a.noise_variance_lo = nv[0];
  a.noise_variance_hi = nv[1];
  a.seed = tree.at("seed").get<std::uint64_t>();
  a.validate();
  return a;
}

quantify::StainConfig stain_config(const json& tree) {
  quantify::StainConfig s;
  s.blue_norm_threshold = get<double>(tree, "quantify", "blue_norm_threshold");
  s.tissue_intensity_max = get<int>(tree, "quantify", "tissue_intensity_max");
  s.validate();
  return s;
}

ClassCatalog catalog(const json& tree) {
  const auto names = get<std::vector<std::string>>(tree, "data", "classes");
  std::vector<ClassEntry> entries;
  for (std::size_t i = 0; i < names.size(); ++i) entries.push_back({static_cast<ClassId>(i), names[i]});
  return ClassCatalog(std::move(entries));
}

}  // namespace nigra::config
