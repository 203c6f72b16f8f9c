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

#ifndef NIGRA_MODEL_HPP_
#define NIGRA_MODEL_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nigra/core.hpp"
#include "nigra/nn/encoders.hpp"
#include "nigra/preprocess.hpp"

namespace nigra::model {

struct BackboneSpec {
  std::string name = "efficientnet-b5";
  // Read by tiny-test only; the other backbones have fixed widths.
  nn::StageWidths stage_channel_widths{8, 16, 24, 32, 32};
  std::optional<std::string> pretrained_weights;
};

struct SegModelConfig {
  BackboneSpec backbone;
  int n_classes = 3;
  int input_size = 1024;
  nn::StageWidths decoder_channel_widths{256, 128, 64, 32, 16};
  std::uint64_t seed = 0;

  // Throws ValidationError (unknown backbone, input_size not a multiple of 32, ...).
  void validate() const;
  // Resolved encoder widths.
  nn::StageWidths encoder_channels() const;
};

nlohmann::json to_json(const SegModelConfig& config);
SegModelConfig model_config_from_json(const nlohmann::json& j);

// Per-pixel raw scores, pixel-major like ProbabilityMap.
struct LogitMap {
  int width = 0;
  int height = 0;
  int classes = 0;
  std::vector<double> data;
};

// Max-subtracted softmax per pixel. Throws ValidationError naming the first
// pixel with a non-finite logit.
ProbabilityMap softmax_head(const LogitMap& logits);

// Gradient through the softmax: dz_i = p_i (g_i - sum_j p_j g_j).
std::vector<double> softmax_backward(const ProbabilityMap& probs, std::span<const double> grad_probs);

// UNet: backbone encoder, five upsample+concat+2x(conv-bn-relu) decoder blocks,
// 3x3 convolution head producing C logits.
class SegModel {
 public:
  explicit SegModel(SegModelConfig config);

  const SegModelConfig& config() const { return config_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }

  // x [N, 3, H, W] normalized; returns logits [N, C, H, W].
  nn::Var forward(const nn::Var& x, bool training);

  std::size_t parameter_count() const { return store_.parameter_count(); }
  std::size_t encoder_parameter_count() const { return store_.parameter_count("encoder."); }

  // Channel statistics the encoder expects; set when pretrained weights are loaded.
  std::optional<preprocess::ChannelStats> input_stats() const { return input_stats_; }
  void set_input_stats(std::optional<preprocess::ChannelStats> stats) { input_stats_ = stats; }

 private:
  struct DecoderBlock {
    nn::ConvBnAct first;
    nn::ConvBnAct second;
  };

  SegModelConfig config_;
  nn::ParamStore store_;
  std::unique_ptr<nn::Encoder> encoder_;
  std::vector<DecoderBlock> decoder_;
  nn::Conv2d head_;
  std::optional<preprocess::ChannelStats> input_stats_;
};

// Builds a model; loads backbone.pretrained_weights (encoder entries) if set.
std::unique_ptr<SegModel> build(const SegModelConfig& config);

// Stacks normalized images into an NCHW tensor.
nn::Tensor batch_tensor(const std::vector<preprocess::ImageTensor>& images);

// Splits logits [N, C, H, W] into per-sample pixel-major maps.
std::vector<LogitMap> split_logits(const nn::Tensor& logits);

// Packs per-sample pixel-major logit gradients back into [N, C, H, W].
nn::Tensor pack_logit_grads(const std::vector<std::vector<double>>& grads, int classes, int height, int width);

struct Prediction {
  ProbabilityMap probabilities;
  LabelMask mask;
};

// Inference mode. The image must already be input_size x input_size.
Prediction predict(SegModel& model, const RasterImage& image);
std::vector<Prediction> predict_batch(SegModel& model, const std::vector<RasterImage>& images);

// Resizes to input_size, predicts, and resizes the mask back (nearest).
LabelMask predict_full_size(SegModel& model, const RasterImage& image);

inline constexpr const char* kCheckpointSchema = "nigra-checkpoint/1";

// Directory with config.json (schema, model config, catalog, metadata) and params.bin.
void save_checkpoint(const SegModel& model, const ClassCatalog& catalog, const nlohmann::json& metadata,
                     const std::filesystem::path& dir);

struct LoadedCheckpoint {
  std::unique_ptr<SegModel> model;
  ClassCatalog catalog = ClassCatalog::Default();
  nlohmann::json metadata;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace nigra::model

#endif  // NIGRA_MODEL_HPP_
