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

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nigra/config.hpp"
#include "nigra/io.hpp"
#include "nigra/lossmetrics.hpp"
#include "nigra/model.hpp"
#include "nigra/quantify.hpp"
#include "nigra/report.hpp"
#include "nigra/synthdata.hpp"
#include "nigra/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nigra;

namespace {

enum class FlagKind { kScalar, kList };

struct Flag {
  std::string name;  // e.g. "--n"
  std::string key;   // dotted config path
  std::string help;
  FlagKind kind = FlagKind::kScalar;
};

struct Command {
  std::string name;
  std::string description;
  std::vector<std::string> sections;  // config sections the command reads
  std::vector<Flag> flags;
  std::function<void(const json&)> run;
};

fs::path run_dir(const json& cfg) { return cfg.at("run_dir").get<std::string>(); }

std::string require_path(const json& cfg, const std::string& section, const std::string& key, bool directory = false) {
  const auto value = cfg.at(section).at(key).get<std::string>();
  if (value.empty()) throw ValidationError(section + "." + key + " is required");
  if (!fs::exists(value) || (directory && !fs::is_directory(value))) {
    throw ValidationError(section + "." + key + " not found: " + value);
  }
  return value;
}

std::vector<AnnotatedSample> manifest_split(const json& cfg, Split split) {
  const auto samples = io::read_manifest(require_path(cfg, "data", "manifest"));
  auto out = io::select_split(samples, split);
  if (out.empty()) throw ValidationError("the '" + to_string(split) + "' split of the manifest is empty");
  return out;
}

std::vector<quantify::OdRow> read_od_files(const json& list, const std::string& key) {
  std::vector<quantify::OdRow> rows;
  for (const auto& item : list) {
    const auto path = item.get<std::string>();
    if (!fs::exists(path)) throw ValidationError(key + " file not found: " + path);
    auto part = quantify::parse_od_csv(path);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

void write_run_json(const std::string& command, const json& cfg) {
  json doc{{"command", command}, {"config", cfg}, {"seed", cfg.at("seed")}};
  io::write_text(run_dir(cfg) / "run.json", doc.dump(2) + "\n");
}

void cmd_generate(const json& cfg) {
  const auto spec = config::phantom_spec(cfg);
  write_run_json("generate", cfg);
  const auto ds = synthdata::generate_dataset(spec, run_dir(cfg));
  std::clog << "wrote " << ds.manifest.size() << " phantoms and " << ds.manifest_path.string() << std::endl;
}

void cmd_train(const json& cfg) {
  const auto mc = config::model_config(cfg);
  const auto tc = config::train_config(cfg);
  const auto ac = config::augment_config(cfg);
  const auto cat = config::catalog(cfg);
  const auto samples = io::read_manifest(require_path(cfg, "data", "manifest"));
  for (Split s : {Split::kTrain, Split::kVal}) {
    if (io::select_split(samples, s).empty()) {
      throw ValidationError("the '" + to_string(s) + "' split of the manifest is empty");
    }
  }
  write_run_json("train", cfg);
  auto m = model::build(mc);
  std::clog << "model " << mc.backbone.name << ", " << m->parameter_count() << " parameters" << std::endl;
  const auto state = train::train(*m, samples, tc, ac, cat, run_dir(cfg), &std::clog);
  json doc{{"epochs_run", state.epoch},
           {"best_epoch", state.best_epoch},
           {"best_val_loss", state.best_val_loss},
           {"final_lr", state.lr},
           {"stop_reason", state.stop_reason},
           {"best_checkpoint", "best"}};
  io::write_text(run_dir(cfg) / "train_state.json", doc.dump(2) + "\n");
}

void cmd_sweep(const json& cfg) {
  const auto mc = config::model_config(cfg);
  const auto tc = config::train_config(cfg);
  const auto ac = config::augment_config(cfg);
  const auto cat = config::catalog(cfg);
  const auto samples = io::read_manifest(require_path(cfg, "data", "manifest"));
  const auto backbones = cfg.at("sweep").at("backbones").get<std::vector<std::string>>();
  const auto sizes = cfg.at("sweep").at("image_sizes").get<std::vector<int>>();
  for (const auto& b : backbones) {
    if (!nn::is_backbone(b)) throw ValidationError("sweep.backbones: unknown backbone '" + b + "'");
  }
  for (int s : sizes) {
    if (s < 32 || s % 32 != 0) throw ValidationError("sweep.image_sizes: " + std::to_string(s) + " is not a multiple of 32");
  }
  write_run_json("sweep", cfg);
  const auto report = train::run_backbone_sweep(samples, backbones, sizes, mc, tc, ac, cat, run_dir(cfg), &std::clog);
  train::write_sweep(report, run_dir(cfg));
}

void cmd_eval(const json& cfg) {
  const auto ckpt_dir = require_path(cfg, "eval", "checkpoint", true);
  const Split split = parse_split(cfg.at("data").at("split").get<std::string>());
  const auto samples = manifest_split(cfg, split);
  const auto tc = config::train_config(cfg);
  write_run_json("eval", cfg);
  auto ckpt = model::load_checkpoint(ckpt_dir);
  const auto data = train::load_split(samples, split, ckpt.model->config().input_size, tc.resize_mode, ckpt.catalog);
  const auto result = train::evaluate_model(*ckpt.model, data, tc.loss, ckpt.catalog, tc.batch_size);
  json doc = metrics::to_json(result.report);
  doc["loss"] = result.loss;
  doc["loss_kind"] = metrics::to_string(tc.loss);
  doc["split"] = to_string(split);
  io::write_text(run_dir(cfg) / "metrics.json", doc.dump(2) + "\n");
  io::write_text(run_dir(cfg) / "metrics.csv", metrics::to_csv(result.report));
  std::ostringstream per;
  per << "sample_id,iou,dice,precision,recall\n";
  auto opt = [](const std::optional<double>& v) { return v ? io::format_double(*v) : std::string("nan"); };
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& m = result.per_image[i].mean;
    per << data.ids[i] << ',' << opt(m.iou) << ',' << opt(m.dice) << ',' << opt(m.precision) << ',' << opt(m.recall)
        << '\n';
  }
  io::write_text(run_dir(cfg) / "per_image.csv", per.str());
  std::clog << "mean iou " << opt(result.report.mean.iou) << ", mean dice " << opt(result.report.mean.dice)
            << std::endl;
}

void cmd_predict(const json& cfg) {
  const auto ckpt_dir = require_path(cfg, "predict", "checkpoint", true);
  std::vector<std::pair<std::string, std::string>> inputs;  // (id, image path)
  const auto single = cfg.at("predict").at("image").get<std::string>();
  if (!single.empty()) {
    if (!fs::exists(single)) throw ValidationError("predict.image not found: " + single);
    inputs.emplace_back(fs::path(single).stem().string(), single);
  } else {
    const Split split = parse_split(cfg.at("data").at("split").get<std::string>());
    for (const auto& s : manifest_split(cfg, split)) inputs.emplace_back(s.sample_id, s.image_path);
  }
  const bool overlay = cfg.at("predict").at("overlay").get<bool>();
  const auto stain = config::stain_config(cfg);
  write_run_json("predict", cfg);
  auto ckpt = model::load_checkpoint(ckpt_dir);
  for (const auto& [id, path] : inputs) {
    const auto image = io::read_image(path);
    const auto mask = model::predict_full_size(*ckpt.model, image);
    io::write_mask(mask, run_dir(cfg) / "masks" / (id + ".png"));
    if (overlay) io::write_image(quantify::render_overlay(image, mask, stain), run_dir(cfg) / "overlays" / (id + ".png"));
  }
  std::clog << "predicted " << inputs.size() << " masks" << std::endl;
}

void cmd_quantify(const json& cfg) {
  const Split split = parse_split(cfg.at("data").at("split").get<std::string>());
  const auto samples = manifest_split(cfg, split);
  const auto stain = config::stain_config(cfg);
  const auto cat = config::catalog(cfg);
  const auto& q = cfg.at("quantify");
  const auto ckpt_path = q.at("checkpoint").get<std::string>();
  if (!ckpt_path.empty() && !fs::is_directory(ckpt_path)) throw ValidationError("quantify.checkpoint not found: " + ckpt_path);
  const bool hemispheres = q.at("hemispheres").get<bool>();
  const bool overlay = q.at("overlay").get<bool>();
  write_run_json("quantify", cfg);
  std::optional<model::LoadedCheckpoint> ckpt;
  if (!ckpt_path.empty()) ckpt = model::load_checkpoint(ckpt_path);

  std::vector<quantify::OdRow> rows;
  auto measure = [&](const RasterImage& image, const LabelMask& mask, const ClassCatalog& c) {
    return hemispheres ? quantify::quantify_hemispheres(image, mask, c, stain)
                       : quantify::quantify_sample(image, mask, c, stain);
  };
  for (const auto& s : samples) {
    const auto image = io::read_image(s.image_path);
    const auto truth = io::read_mask(s.mask_path);
    for (auto& r : measure(image, truth, cat)) rows.push_back({s.sample_id, "gt", r});
    if (ckpt) {
      const auto pred = model::predict_full_size(*ckpt->model, image);
      for (auto& r : measure(image, pred, ckpt->catalog)) rows.push_back({s.sample_id, "model", r});
      if (overlay) {
        io::write_image(quantify::render_overlay(image, pred, stain), run_dir(cfg) / "overlays" / (s.sample_id + "_model.png"));
      }
    }
    if (overlay) {
      io::write_image(quantify::render_overlay(image, truth, stain), run_dir(cfg) / "overlays" / (s.sample_id + "_gt.png"));
    }
  }
  io::write_text(run_dir(cfg) / "od.csv", quantify::to_csv(rows));
  std::clog << "quantified " << samples.size() << " samples" << std::endl;
}

void cmd_correlate(const json& cfg) {
  const auto& c = cfg.at("correlate");
  if (c.at("od_csv").empty()) throw ValidationError("correlate.od_csv needs at least one file");
  const auto rows = read_od_files(c.at("od_csv"), "correlate.od_csv");
  const auto xs = c.at("x_source").get<std::string>();
  const auto ys = c.at("y_source").get<std::string>();
  const auto series = report::pair_od_rows(rows, xs, ys);
  if (series.empty()) throw ValidationError("no paired (" + xs + ", " + ys + ") rows in correlate.od_csv");
  write_run_json("correlate", cfg);
  json out = json::object();
  int ok = 0;
  for (const auto& [region, s] : series) {
    try {
      const auto r = report::correlate(s);
      out[region] = report::to_json(r);
      ++ok;
      std::clog << region << ": n " << r.n << " r^2 " << io::format_double(r.r_squared) << " p "
                << io::format_double(r.p_value) << std::endl;
    } catch (const ValidationError& e) {
      out[region] = {{"n", s.x.size()}, {"error", e.what()}};
    }
  }
  io::write_text(run_dir(cfg) / "correlation.json", out.dump(2) + "\n");
  if (ok == 0) throw ValidationError("no region had a valid correlation; see correlation.json");
}

void cmd_preview(const json& cfg) {
  const auto image = io::read_image(require_path(cfg, "preview", "image"));
  const auto mask = io::read_mask(require_path(cfg, "preview", "mask"));
  const auto ac = config::augment_config(cfg);
  const int n = cfg.at("preview").at("n").get<int>();
  if (n < 1) throw ValidationError("preview.n must be >= 1");
  write_run_json("preview-aug", cfg);
  const auto res = augment::preview(image, mask, ac, n, run_dir(cfg), cfg.at("preview").at("per_transform").get<bool>());
  std::clog << "wrote " << res.variant_files.size() << " variants and " << res.montage_file.string() << std::endl;
}

void cmd_report(const json& cfg) {
  const auto& r = cfg.at("report");
  report::ReportInputs in;
  for (const auto& [key, elastic] : {std::pair{"metrics_without_et", false}, std::pair{"metrics_with_et", true}}) {
    const auto path = r.at(key).get<std::string>();
    if (path.empty()) continue;
    if (!fs::exists(path)) throw ValidationError(std::string("report.") + key + " not found: " + path);
    in.metric_runs.push_back({path, elastic, report::metric_report_from_json(json::parse(io::read_text(path)))});
  }
  in.od_rows = read_od_files(r.at("od_csv"), "report.od_csv");
  in.x_source = r.at("x_source").get<std::string>();
  in.y_source = r.at("y_source").get<std::string>();
  write_run_json("report", cfg);
  const auto bundle = report::build_report(in, run_dir(cfg));
  for (const auto& m : bundle.missing) std::clog << "missing: " << m << std::endl;
}

std::vector<Command> commands() {
  const Flag manifest{"--manifest", "data.manifest", "manifest.json path"};
  const Flag split{"--split", "data.split", "split to use (train, val, test, blind)"};
  return {
      {"generate", "Generate a synthetic phantom dataset", {"generate"},
       {{"--n", "generate.n", "number of phantoms"},
        {"--size", "generate.size", "image side in pixels"},
        {"--hemisphere-loss", "generate.hemisphere_loss", "mirrored complexes with right-side TH loss (true/false)"}},
       cmd_generate},
      {"train", "Train a segmentation model", {"data", "model", "train", "augment"},
       {manifest,
        {"--backbone", "model.backbone", "encoder backbone"},
        {"--input-size", "model.input_size", "model input side (multiple of 32)"},
        {"--epochs", "train.epochs", "maximum epochs"},
        {"--batch-size", "train.batch_size", "mini-batch size"},
        {"--lr", "train.learning_rate", "initial learning rate"},
        {"--loss", "train.loss", "dice, jaccard or categorical_cross_entropy"}},
       cmd_train},
      {"sweep", "Train one model per (backbone, image size) and rank them",
       {"data", "model", "train", "augment", "sweep"},
       {manifest,
        {"--backbones", "sweep.backbones", "comma separated backbones", FlagKind::kList},
        {"--sizes", "sweep.image_sizes", "comma separated image sizes", FlagKind::kList},
        {"--epochs", "train.epochs", "maximum epochs per cell"}},
       cmd_sweep},
      {"eval", "Evaluate a checkpoint on a manifest split", {"data", "eval", "train"},
       {{"--checkpoint", "eval.checkpoint", "checkpoint directory"}, manifest, split},
       cmd_eval},
      {"predict", "Write predicted masks", {"data", "predict", "quantify"},
       {{"--checkpoint", "predict.checkpoint", "checkpoint directory"},
        {"--image", "predict.image", "single image (otherwise the manifest split)"},
        manifest,
        split},
       cmd_predict},
      {"quantify", "Region optical density from ground-truth and model masks", {"data", "quantify"},
       {manifest, split, {"--checkpoint", "quantify.checkpoint", "checkpoint for model masks (optional)"}},
       cmd_quantify},
      {"correlate", "Correlate manual and model normalized optical density", {"correlate"},
       {{"--od", "correlate.od_csv", "comma separated od.csv files", FlagKind::kList}},
       cmd_correlate},
      {"preview-aug", "Write augmented variants and a montage", {"preview", "augment"},
       {{"--image", "preview.image", "image path"},
        {"--mask", "preview.mask", "mask path"},
        {"--n", "preview.n", "number of variants"}},
       cmd_preview},
      {"report", "Build the metrics table, correlation data and summary", {"report"},
       {{"--metrics-without-et", "report.metrics_without_et", "metrics.json from eval (no elastic)"},
        {"--metrics-with-et", "report.metrics_with_et", "metrics.json from eval (elastic)"},
        {"--od", "report.od_csv", "comma separated od.csv files", FlagKind::kList}},
       cmd_report},
  };
}

json flag_value(const std::string& text, FlagKind kind) {
  if (kind == FlagKind::kList) {
    json arr = json::array();
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
      if (item.empty()) continue;
      json v = json::parse(item, nullptr, false);
      arr.push_back(v.is_discarded() ? json(item) : v);
    }
    return arr;
  }
  json v = json::parse(text, nullptr, false);
  return v.is_discarded() ? json(text) : v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Substantia nigra segmentation and TH quantification toolkit"};
  app.require_subcommand(1);
  app.fallthrough(false);
  const json base = config::defaults();

  struct Parsed {
    std::string config_file;
    std::vector<std::string> sets;
    std::map<std::string, std::string> flags;  // key -> raw text
  };
  auto all = commands();
  std::vector<Parsed> parsed(all.size());
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& c = all[i];
    auto* sub = app.add_subcommand(c.name, c.description);
    subs.push_back(sub);
    auto& p = parsed[i];
    sub->add_option("--config", p.config_file, "JSON config file");
    sub->add_option("--set", p.sets, "override a config key: dotted.key=value (repeatable)");
    for (const auto& common : {Flag{"--seed", "seed", "random seed"}, Flag{"--out", "run_dir", "run directory"}}) {
      sub->add_option_function<std::string>(
          common.name, [&p, key = common.key](const std::string& v) { p.flags[key] = v; }, common.help);
    }
    for (const auto& f : c.flags) {
      sub->add_option_function<std::string>(
          f.name, [&p, key = f.key](const std::string& v) { p.flags[key] = v; }, f.help + " [" + f.key + "]");
    }
    if (std::find(c.sections.begin(), c.sections.end(), "augment") != c.sections.end()) {
      sub->add_flag_callback(
          "--no-elastic", [&p] { p.flags["augment.elastic_p"] = "0"; },
          "disable the elastic transform, for the ET ablation [augment.elastic_p = 0]");
    }
    std::ostringstream footer;
    footer << "\nConfig keys read (defaults):\n  seed = 0\n  run_dir = \"run\"\n";
    for (const auto& [key, value] : config::describe(base, c.sections)) footer << "  " << key << " = " << value << "\n";
    sub->footer(footer.str());
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  for (std::size_t i = 0; i < all.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    const auto& c = all[i];
    const auto& p = parsed[i];
    try {
      json cfg = base;
      if (!p.config_file.empty()) cfg = config::merge(cfg, config::load_file(p.config_file));
      for (const auto& s : p.sets) config::apply_override(cfg, s);
      for (const auto& [key, text] : p.flags) {
        FlagKind kind = FlagKind::kScalar;
        for (const auto& f : c.flags) {
          if (f.key == key) kind = f.kind;
        }
        config::set_path(cfg, key, flag_value(text, kind));
      }
      c.run(cfg);
      return 0;
    } catch (const ValidationError& e) {
      std::cerr << "error: " << e.what() << std::endl;
      return 1;
    } catch (const std::exception& e) {
      std::cerr << "failure: " << e.what() << std::endl;
      return 2;
    }
  }
  return 1;
}
