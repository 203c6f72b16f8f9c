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

#ifndef NIGRA_NN_TENSOR_HPP_
#define NIGRA_NN_TENSOR_HPP_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace nigra::nn {

// Dense row-major float tensor. Activations are NCHW.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> dims, float fill = 0.0f);

  std::size_t numel() const { return data.size(); }
  int dim(std::size_t i) const { return shape[i]; }
  std::size_t rank() const { return shape.size(); }

  // NCHW accessors; valid for rank-4 tensors.
  int n() const { return shape[0]; }
  int c() const { return shape[1]; }
  int h() const { return shape[2]; }
  int w() const { return shape[3]; }

  std::string shape_string() const;
};

std::size_t shape_numel(const std::vector<int>& shape);

// Node of the dynamic autograd graph. Gradients are allocated on first use.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad();
};

using Var = std::shared_ptr<Node>;

Var make_var(Tensor value, bool requires_grad = false);

// Graph recording is on by default; NoGradGuard disables it in a scope.
bool grad_enabled();
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Reverse-mode sweep from root seeded with seed_grad (same shape as root).
void backward(const Var& root, const Tensor& seed_grad);

}  // namespace nigra::nn

#endif  // NIGRA_NN_TENSOR_HPP_
