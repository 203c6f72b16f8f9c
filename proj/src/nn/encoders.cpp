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

#include "nigra/nn/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nigra/core.hpp"

namespace nigra::nn {

namespace {

std::string join(const std::string& a, const std::string& b) { return a + "." + b; }

// Two conv-bn-relu blocks per stage, the first with stride 2.
class TinyEncoder final : public Encoder {
 public:
  TinyEncoder(const StageWidths& widths, ParamStore& store, const std::string& prefix, Rng& rng) : widths_(widths) {
    int in = 3;
    for (int s = 0; s < 5; ++s) {
      const std::string name = join(prefix, "stage" + std::to_string(s + 1));
      down_[s] = ConvBnAct(store, name + ".down", in, widths[s], 3, rng, 2);
      refine_[s] = ConvBnAct(store, name + ".refine", widths[s], widths[s], 3, rng, 1);
      in = widths[s];
    }
  }

  FeaturePyramid forward(const Var& x, bool training) override {
    FeaturePyramid out;
    Var h = x;
    for (int s = 0; s < 5; ++s) {
      h = refine_[s](down_[s](h, training), training);
      out[s] = h;
    }
    return out;
  }

  StageWidths channels() const override { return widths_; }

 private:
  StageWidths widths_;
  std::array<ConvBnAct, 5> down_;
  std::array<ConvBnAct, 5> refine_;
};

// VGG-19: conv(3x3)+ReLU stacks, each stage closed by 2x2 max pooling.
class VggEncoder final : public Encoder {
 public:
  VggEncoder(ParamStore& store, const std::string& prefix, Rng& rng) {
    const std::array<std::pair<int, int>, 5> cfg{{{64, 2}, {128, 2}, {256, 4}, {512, 4}, {512, 4}}};
    int in = 3;
    for (int s = 0; s < 5; ++s) {
      for (int i = 0; i < cfg[s].second; ++i) {
        convs_[s].emplace_back(store, join(prefix, "stage" + std::to_string(s + 1) + ".conv" + std::to_string(i)), in,
                               cfg[s].first, 3, rng, 1, -1, 1, true);
        in = cfg[s].first;
      }
    }
  }

  FeaturePyramid forward(const Var& x, bool) override {
    FeaturePyramid out;
    Var h = x;
    for (int s = 0; s < 5; ++s) {
      for (const auto& conv : convs_[s]) h = relu(conv(h));
      h = max_pool2d(h, 2, 2, 0);
      out[s] = h;
    }
    return out;
  }

  StageWidths channels() const override { return {64, 128, 256, 512, 512}; }

 private:
  std::array<std::vector<Conv2d>, 5> convs_;
};

class ResidualBlock {
 public:
  // Basic (two 3x3) when bottleneck == false, else 1x1-3x3-1x1 with 4x expansion.
  ResidualBlock(ParamStore& store, const std::string& name, int in, int planes, int stride, bool bottleneck, Rng& rng) {
    const int out = bottleneck ? planes * 4 : planes;
    if (bottleneck) {
      layers_.emplace_back(store, name + ".conv1", in, planes, 1, rng, 1);
      layers_.emplace_back(store, name + ".conv2", planes, planes, 3, rng, stride);
      layers_.emplace_back(store, name + ".conv3", planes, out, 1, rng, 1, Activation::kNone);
    } else {
      layers_.emplace_back(store, name + ".conv1", in, planes, 3, rng, stride);
      layers_.emplace_back(store, name + ".conv2", planes, out, 3, rng, 1, Activation::kNone);
    }
    if (stride != 1 || in != out) {
      shortcut_ = ConvBnAct(store, name + ".downsample", in, out, 1, rng, stride, Activation::kNone);
      has_shortcut_ = true;
    }
  }

  Var operator()(const Var& x, bool training) {
    Var h = x;
    for (auto& layer : layers_) h = layer(h, training);
    return relu(add(h, has_shortcut_ ? shortcut_(x, training) : x));
  }

 private:
  std::vector<ConvBnAct> layers_;
  ConvBnAct shortcut_;
  bool has_shortcut_ = false;
};

class ResNetEncoder final : public Encoder {
 public:
  ResNetEncoder(bool bottleneck, ParamStore& store, const std::string& prefix, Rng& rng) : bottleneck_(bottleneck) {
    stem_ = ConvBnAct(store, join(prefix, "stem"), 3, 64, 7, rng, 2);
    const std::array<int, 4> blocks{3, 4, 6, 3};
    const std::array<int, 4> planes{64, 128, 256, 512};
    int in = 64;
    for (int l = 0; l < 4; ++l) {
      for (int b = 0; b < blocks[l]; ++b) {
        const int stride = (b == 0 && l > 0) ? 2 : 1;
        layers_[l].emplace_back(store, join(prefix, "layer" + std::to_string(l + 1) + "." + std::to_string(b)), in,
                                planes[l], stride, bottleneck, rng);
        in = bottleneck ? planes[l] * 4 : planes[l];
      }
    }
  }

  FeaturePyramid forward(const Var& x, bool training) override {
    FeaturePyramid out;
    out[0] = stem_(x, training);
    Var h = max_pool2d(out[0], 3, 2, 1);
    for (int l = 0; l < 4; ++l) {
      for (auto& block : layers_[l]) h = block(h, training);
      out[l + 1] = h;
    }
    return out;
  }

  StageWidths channels() const override {
    return bottleneck_ ? StageWidths{64, 256, 512, 1024, 2048} : StageWidths{64, 64, 128, 256, 512};
  }

 private:
  bool bottleneck_;
  ConvBnAct stem_;
  std::array<std::vector<ResidualBlock>, 4> layers_;
};

// Pre-activation unit: BN -> ReLU -> conv.
class BnReluConv {
 public:
  BnReluConv(ParamStore& store, const std::string& name, int in, int out, int kernel, Rng& rng)
      : bn_(store, name + ".bn", in), conv_(store, name + ".conv", in, out, kernel, rng) {}

  Var operator()(const Var& x, bool training) { return conv_(relu(bn_(x, training))); }

 private:
  BatchNorm2d bn_;
  Conv2d conv_;
};

// DenseNet-121: growth 32, bottleneck width 4 * growth, blocks {6, 12, 24, 16}.
class DenseNetEncoder final : public Encoder {
 public:
  DenseNetEncoder(ParamStore& store, const std::string& prefix, Rng& rng) {
    constexpr int kGrowth = 32;
    constexpr int kBottleneck = 4 * kGrowth;
    stem_ = ConvBnAct(store, join(prefix, "stem"), 3, 64, 7, rng, 2);
    const std::array<int, 4> blocks{6, 12, 24, 16};
    int c = 64;
    for (int b = 0; b < 4; ++b) {
      const std::string block = join(prefix, "block" + std::to_string(b + 1));
      if (b > 0) {
        transitions_.emplace_back(store, join(prefix, "transition" + std::to_string(b)), c, c / 2, 1, rng);
        c /= 2;
      }
      for (int l = 0; l < blocks[b]; ++l) {
        const std::string layer = block + ".layer" + std::to_string(l + 1);
        layers_[b].push_back({BnReluConv(store, layer + ".1", c, kBottleneck, 1, rng),
                              BnReluConv(store, layer + ".2", kBottleneck, kGrowth, 3, rng)});
        c += kGrowth;
      }
    }
    final_bn_ = BatchNorm2d(store, join(prefix, "norm5"), c);
  }

  FeaturePyramid forward(const Var& x, bool training) override {
    FeaturePyramid out;
    out[0] = stem_(x, training);
    Var h = max_pool2d(out[0], 3, 2, 1);
    for (int b = 0; b < 4; ++b) {
      if (b > 0) h = avg_pool2d(transitions_[b - 1](h, training), 2, 2);
      for (auto& [bottleneck, conv] : layers_[b]) {
        Var grown = conv(bottleneck(h, training), training);
        h = concat_channels({h, grown});
      }
      out[b + 1] = b == 3 ? relu(final_bn_(h, training)) : h;
    }
    return out;
  }

  StageWidths channels() const override { return {64, 256, 512, 1024, 1024}; }

 private:
  ConvBnAct stem_;
  std::vector<BnReluConv> transitions_;
  std::array<std::vector<std::pair<BnReluConv, BnReluConv>>, 4> layers_;
  BatchNorm2d final_bn_;
};

// Inverted residual with optional squeeze-excitation, shared by MobileNetV2
// (ReLU6, no SE) and EfficientNet (SiLU, SE 0.25).
class InvertedResidual {
 public:
  InvertedResidual(ParamStore& store, const std::string& name, int in, int out, int kernel, int stride, int expand,
                   int se_channels, Activation act, float bn_eps, Rng& rng)
      : use_residual_(stride == 1 && in == out) {
    const int hidden = in * expand;
    if (expand != 1) {
      expand_ = ConvBnAct(store, name + ".expand", in, hidden, 1, rng, 1, act, 1, bn_eps);
      has_expand_ = true;
    }
    depthwise_ = ConvBnAct(store, name + ".depthwise", hidden, hidden, kernel, rng, stride, act, hidden, bn_eps);
    if (se_channels > 0) {
      se_reduce_ = Conv2d(store, name + ".se.reduce", hidden, se_channels, 1, rng, 1, 0, 1, true);
      se_expand_ = Conv2d(store, name + ".se.expand", se_channels, hidden, 1, rng, 1, 0, 1, true);
      has_se_ = true;
    }
    project_ = ConvBnAct(store, name + ".project", hidden, out, 1, rng, 1, Activation::kNone, 1, bn_eps);
    act_ = act;
  }

  Var operator()(const Var& x, bool training) {
    Var h = has_expand_ ? expand_(x, training) : x;
    h = depthwise_(h, training);
    if (has_se_) {
      Var s = sigmoid(se_expand_(activate(se_reduce_(global_avg_pool(h)), act_)));
      h = scale_channels(h, s);
    }
    h = project_(h, training);
    return use_residual_ ? add(h, x) : h;
  }

 private:
  bool use_residual_;
  bool has_expand_ = false;
  bool has_se_ = false;
  Activation act_ = Activation::kRelu6;
  ConvBnAct expand_;
  ConvBnAct depthwise_;
  Conv2d se_reduce_;
  Conv2d se_expand_;
  ConvBnAct project_;
};

struct BlockGroup {
  int kernel, stride, expand, out, repeats;
  int feature_stage;  // 0-based pyramid slot this group closes, or -1
};

// Stem, grouped inverted-residual blocks and a 1x1 head; groups tagged with a
// pyramid slot emit a feature after their last block.
class InvertedResidualEncoder final : public Encoder {
 public:
  InvertedResidualEncoder(ParamStore& store, const std::string& prefix, Rng& rng, int stem, const std::vector<BlockGroup>& groups,
                          int head, double se_ratio, Activation act, float bn_eps, StageWidths widths)
      : widths_(widths) {
    stem_ = ConvBnAct(store, join(prefix, "stem"), 3, stem, 3, rng, 2, act, 1, bn_eps);
    int in = stem;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const auto& spec = groups[g];
      Group group;
      group.feature_stage = spec.feature_stage;
      for (int r = 0; r < spec.repeats; ++r) {
        const int se = se_ratio > 0 ? std::max(1, static_cast<int>(in * se_ratio)) : 0;
        group.blocks.emplace_back(store, join(prefix, "group" + std::to_string(g + 1) + "." + std::to_string(r)), in,
                                  spec.out, spec.kernel, r == 0 ? spec.stride : 1, spec.expand, se, act, bn_eps, rng);
        in = spec.out;
      }
      groups_.push_back(std::move(group));
    }
    head_ = ConvBnAct(store, join(prefix, "head"), in, head, 1, rng, 1, act, 1, bn_eps);
  }

  FeaturePyramid forward(const Var& x, bool training) override {
    FeaturePyramid out;
    Var h = stem_(x, training);
    for (auto& group : groups_) {
      for (auto& block : group.blocks) h = block(h, training);
      if (group.feature_stage >= 0 && group.feature_stage < 4) out[group.feature_stage] = h;
    }
    out[4] = head_(h, training);
    return out;
  }

  StageWidths channels() const override { return widths_; }

 private:
  struct Group {
    std::vector<InvertedResidual> blocks;
    int feature_stage = -1;
  };
  StageWidths widths_;
  ConvBnAct stem_;
  std::vector<Group> groups_;
  ConvBnAct head_;
};

// EfficientNet compound scaling of the B0 block table.
int round_filters(int filters, double width) {
  constexpr int kDivisor = 8;
  const double scaled = filters * width;
  int rounded = std::max(kDivisor, static_cast<int>(scaled + kDivisor / 2.0) / kDivisor * kDivisor);
  if (rounded < 0.9 * scaled) rounded += kDivisor;
  return rounded;
}

int round_repeats(int repeats, double depth) { return static_cast<int>(std::ceil(depth * repeats)); }

std::unique_ptr<Encoder> make_efficientnet_b5(ParamStore& store, const std::string& prefix, Rng& rng) {
  constexpr double kWidth = 1.6;
  constexpr double kDepth = 2.2;
  // kernel, stride, expand, out (B0), repeats (B0), pyramid slot
  const std::vector<BlockGroup> base{{3, 1, 1, 16, 1, 0},  {3, 2, 6, 24, 2, 1},  {5, 2, 6, 40, 2, 2},
                                     {3, 2, 6, 80, 3, -1}, {5, 1, 6, 112, 3, 3}, {5, 2, 6, 192, 4, -1},
                                     {3, 1, 6, 320, 1, -1}};
  std::vector<BlockGroup> groups;
  for (auto g : base) {
    g.out = round_filters(g.out, kWidth);
    g.repeats = round_repeats(g.repeats, kDepth);
    groups.push_back(g);
  }
  const int head = round_filters(1280, kWidth);
  StageWidths widths{groups[0].out, groups[1].out, groups[2].out, groups[4].out, head};
  return std::make_unique<InvertedResidualEncoder>(store, prefix, rng, round_filters(32, kWidth), groups, head, 0.25,
                                                   Activation::kSilu, 1e-3f, widths);
}

std::unique_ptr<Encoder> make_mobilenet_v2(ParamStore& store, const std::string& prefix, Rng& rng) {
  const std::vector<BlockGroup> groups{{3, 1, 1, 16, 1, 0},  {3, 2, 6, 24, 2, 1},  {3, 2, 6, 32, 3, 2},
                                       {3, 2, 6, 64, 4, -1}, {3, 1, 6, 96, 3, 3},  {3, 2, 6, 160, 3, -1},
                                       {3, 1, 6, 320, 1, -1}};
  return std::make_unique<InvertedResidualEncoder>(store, prefix, rng, 32, groups, 1280, 0.0, Activation::kRelu6,
                                                   1e-5f, StageWidths{16, 24, 32, 96, 1280});
}

const std::vector<std::string>& names() {
  static const std::vector<std::string> kNames{"vgg19",           "resnet50",  "resnet34", "densenet121",
                                               "efficientnet-b5", "mobilenet", "tiny-test"};
  return kNames;
}

}  // namespace

std::vector<std::string> backbone_names() { return names(); }

bool is_backbone(const std::string& name) {
  return std::find(names().begin(), names().end(), name) != names().end();
}

StageWidths backbone_channels(const std::string& name, const StageWidths& tiny_widths) {
  if (name == "tiny-test") return tiny_widths;
  if (name == "vgg19") return {64, 128, 256, 512, 512};
  if (name == "resnet34") return {64, 64, 128, 256, 512};
  if (name == "resnet50") return {64, 256, 512, 1024, 2048};
  if (name == "densenet121") return {64, 256, 512, 1024, 1024};
  if (name == "mobilenet") return {16, 24, 32, 96, 1280};
  if (name == "efficientnet-b5") return {24, 40, 64, 176, 2048};
  throw ValidationError("unknown backbone '" + name + "'");
}

std::unique_ptr<Encoder> make_encoder(const std::string& name, const StageWidths& tiny_widths, ParamStore& store,
                                      const std::string& prefix, Rng& rng) {
  if (name == "tiny-test") {
    for (int w : tiny_widths) {
      if (w < 1) throw ValidationError("tiny-test stage widths must be positive");
    }
    return std::make_unique<TinyEncoder>(tiny_widths, store, prefix, rng);
  }
  if (name == "vgg19") return std::make_unique<VggEncoder>(store, prefix, rng);
  if (name == "resnet34") return std::make_unique<ResNetEncoder>(false, store, prefix, rng);
  if (name == "resnet50") return std::make_unique<ResNetEncoder>(true, store, prefix, rng);
  if (name == "densenet121") return std::make_unique<DenseNetEncoder>(store, prefix, rng);
  if (name == "mobilenet") return make_mobilenet_v2(store, prefix, rng);
  if (name == "efficientnet-b5") return make_efficientnet_b5(store, prefix, rng);
  throw ValidationError("unknown backbone '" + name + "'");
}

}  // namespace nigra::nn
