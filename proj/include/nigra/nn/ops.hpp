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

#ifndef NIGRA_NN_OPS_HPP_
#define NIGRA_NN_OPS_HPP_

#include <vector>

#include "nigra/nn/tensor.hpp"

namespace nigra::nn {

struct Conv2dOptions {
  int stride = 1;
  int padding = 0;
  int groups = 1;
};

// x [N, Cin, H, W], weight [Cout, Cin/groups, K, K], bias [Cout] or null.
Var conv2d(const Var& x, const Var& weight, const Var& bias, Conv2dOptions options);

struct BatchNormState {
  Var gamma;
  Var beta;
  Var running_mean;  // non-trainable
  Var running_var;   // non-trainable
  float momentum = 0.1f;
  float eps = 1e-5f;
};

// Batch statistics (and running-stat update) when training, running stats otherwise.
Var batch_norm(const Var& x, BatchNormState& state, bool training);

Var relu(const Var& x);
Var relu6(const Var& x);
Var sigmoid(const Var& x);
Var silu(const Var& x);

Var add(const Var& a, const Var& b);

// x [N, C, H, W] times s [N, C, 1, 1], broadcast over H, W.
Var scale_channels(const Var& x, const Var& s);

Var global_avg_pool(const Var& x);
Var max_pool2d(const Var& x, int kernel, int stride, int padding);
Var avg_pool2d(const Var& x, int kernel, int stride);
Var upsample_nearest2x(const Var& x);
Var concat_channels(const std::vector<Var>& xs);

}  // namespace nigra::nn

#endif  // NIGRA_NN_OPS_HPP_
