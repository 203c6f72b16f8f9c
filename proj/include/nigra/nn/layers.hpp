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

#ifndef NIGRA_NN_LAYERS_HPP_
#define NIGRA_NN_LAYERS_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nigra/nn/ops.hpp"
#include "nigra/random.hpp"

namespace nigra::nn {

struct ParamEntry {
  std::string name;
  Var var;
  bool trainable = true;
};

// Owns every parameter and buffer of a network under hierarchical names.
class ParamStore {
 public:
  Var add(const std::string& name, Tensor init, bool trainable = true);

  const std::vector<ParamEntry>& entries() const { return entries_; }
  std::vector<ParamEntry>& entries() { return entries_; }
  const ParamEntry* find(const std::string& name) const;

  // Trainable scalars, optionally restricted to names starting with prefix.
  std::size_t parameter_count(const std::string& prefix = "") const;

  void zero_grad();

  // FNV-1a over names, shapes and raw values.
  std::uint64_t fingerprint() const;

 private:
  std::vector<ParamEntry> entries_;
};

// Binary blob: "NGRP", version, count, then (name, dims, float32 data) records.
void save_params(const ParamStore& store, const std::filesystem::path& path);

// Every record must name an existing entry of identical shape. Entries absent
// from the file keep their values. With require_all, a missing entry is an error.
void load_params(ParamStore& store, const std::filesystem::path& path, bool require_all);

enum class Activation { kNone, kRelu, kRelu6, kSilu };

Var activate(const Var& x, Activation act);

class Conv2d {
 public:
  Conv2d() = default;
  // He-normal weights (fan in); zero bias.
  Conv2d(ParamStore& store, const std::string& name, int in_channels, int out_channels, int kernel, Rng& rng,
         int stride = 1, int padding = -1, int groups = 1, bool bias = false);

  Var operator()(const Var& x) const { return conv2d(x, weight_, bias_, options_); }
  int out_channels() const { return weight_->value.dim(0); }

 private:
  Var weight_;
  Var bias_;
  Conv2dOptions options_;
};

class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(ParamStore& store, const std::string& name, int channels, float eps = 1e-5f);

  Var operator()(const Var& x, bool training) { return batch_norm(x, state_, training); }

 private:
  BatchNormState state_;
};

// conv -> batch norm -> activation, the basic unit of every backbone here.
class ConvBnAct {
 public:
  ConvBnAct() = default;
  ConvBnAct(ParamStore& store, const std::string& name, int in_channels, int out_channels, int kernel, Rng& rng,
            int stride = 1, Activation act = Activation::kRelu, int groups = 1, float bn_eps = 1e-5f);

  Var operator()(const Var& x, bool training) { return activate(bn_(conv_(x), training), act_); }
  int out_channels() const { return conv_.out_channels(); }

 private:
  Conv2d conv_;
  BatchNorm2d bn_;
  Activation act_ = Activation::kRelu;
};

}  // namespace nigra::nn

#endif  // NIGRA_NN_LAYERS_HPP_
