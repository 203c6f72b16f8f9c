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

#include "nigra/nn/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace nigra::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

Tensor::Tensor(std::vector<int> dims, float fill) : shape(std::move(dims)) {
  data.assign(shape_numel(shape), fill);
}

std::string Tensor::shape_string() const {
  std::ostringstream s;
  s << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) s << (i ? ", " : "") << shape[i];
  s << ']';
  return s.str();
}

Tensor& Node::ensure_grad() {
  if (grad.data.size() != value.data.size()) grad = Tensor(value.shape, 0.0f);
  return grad;
}

Var make_var(Tensor value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return node;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void backward(const Var& root, const Tensor& seed_grad) {
  if (seed_grad.shape != root->value.shape) {
    throw std::invalid_argument("backward seed shape " + seed_grad.shape_string() + " != root shape " +
                                root->value.shape_string());
  }
  // Iterative post-order DFS for a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.push_back({parent, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  Tensor& g = root->ensure_grad();
  for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += seed_grad.data[i];
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && node->grad.data.size() == node->value.data.size()) node->backward_fn(*node);
  }
  // Release intermediate gradients; leaves (parameters) keep theirs.
  for (Node* node : order) {
    if (node->backward_fn) node->grad = Tensor();
  }
}

}  // namespace nigra::nn
