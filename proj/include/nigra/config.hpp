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

#ifndef NIGRA_CONFIG_HPP_
#define NIGRA_CONFIG_HPP_

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nigra/augment.hpp"
#include "nigra/model.hpp"
#include "nigra/quantify.hpp"
#include "nigra/synthdata.hpp"
#include "nigra/trainer.hpp"

namespace nigra::config {

// Full config tree with every key at its default value. Sections: top-level
// seed/run_dir, data, generate, model, train, augment, sweep, eval, predict,
// quantify, correlate, preview, report.
nlohmann::json defaults();

// Overlays `user` on `base`. Keys absent from `base` are collected and
// reported together in one ValidationError. A null default accepts any value.
nlohmann::json merge(const nlohmann::json& base, const nlohmann::json& user);

nlohmann::json load_file(const std::filesystem::path& path);

// Applies "dotted.key=value". The value is parsed as JSON when possible,
// otherwise taken as a string. Unknown keys are rejected.
void apply_override(nlohmann::json& tree, const std::string& assignment);
void set_path(nlohmann::json& tree, const std::string& dotted, const nlohmann::json& value);

// "section.key = default" lines for the given sections, for --help.
std::vector<std::pair<std::string, std::string>> describe(const nlohmann::json& tree,
                                                          const std::vector<std::string>& sections);

// Typed views of the tree. Each validates what it builds.
synthdata::PhantomSpec phantom_spec(const nlohmann::json& tree);
model::SegModelConfig model_config(const nlohmann::json& tree);
train::TrainConfig train_config(const nlohmann::json& tree);
augment::AugmentationConfig augment_config(const nlohmann::json& tree);
quantify::StainConfig stain_config(const nlohmann::json& tree);
ClassCatalog catalog(const nlohmann::json& tree);

}  // namespace nigra::config

#endif  // NIGRA_CONFIG_HPP_
