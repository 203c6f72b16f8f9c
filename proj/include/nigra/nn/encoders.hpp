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

#ifndef NIGRA_NN_ENCODERS_HPP_
#define NIGRA_NN_ENCODERS_HPP_

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "nigra/nn/layers.hpp"

namespace nigra::nn {

// Five feature maps at strides 2, 4, 8, 16 and 32 of the input.
using FeaturePyramid = std::array<Var, 5>;
using StageWidths = std::array<int, 5>;

class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual FeaturePyramid forward(const Var& x, bool training) = 0;
  virtual StageWidths channels() const = 0;
};

// Registered names: vgg19, resnet50, resnet34, densenet121, efficientnet-b5,
// mobilenet, tiny-test. Only tiny-test reads tiny_widths.
std::vector<std::string> backbone_names();
bool is_backbone(const std::string& name);

// Stage widths a backbone produces.
StageWidths backbone_channels(const std::string& name, const StageWidths& tiny_widths);

// Parameters are registered under "<prefix>." in the store.
std::unique_ptr<Encoder> make_encoder(const std::string& name, const StageWidths& tiny_widths, ParamStore& store,
                                      const std::string& prefix, Rng& rng);

}  // namespace nigra::nn

#endif  // NIGRA_NN_ENCODERS_HPP_
