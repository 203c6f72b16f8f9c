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

#include "nigra/nn/layers.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "nigra/core.hpp"

namespace nigra::nn {

namespace {
constexpr char kMagic[4] = {'N', 'G', 'R', 'P'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated parameter file " + path.string());
  return v;
}
}  // namespace

Var ParamStore::add(const std::string& name, Tensor init, bool trainable) {
  if (find(name)) throw std::invalid_argument("duplicate parameter name " + name);
  Var v = make_var(std::move(init), trainable);
  entries_.push_back({name, v, trainable});
  return v;
}

const ParamEntry* ParamStore::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

std::size_t ParamStore::parameter_count(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (e.trainable && e.name.compare(0, prefix.size(), prefix) == 0) n += e.var->value.numel();
  }
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) {
    if (!e.var->grad.data.empty()) std::fill(e.var->grad.data.begin(), e.var->grad.data.end(), 0.0f);
  }
}

std::uint64_t ParamStore::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& e : entries_) {
    mix(e.name.data(), e.name.size());
    mix(e.var->value.shape.data(), e.var->value.shape.size() * sizeof(int));
    mix(e.var->value.data.data(), e.var->value.data.size() * sizeof(float));
  }
  return h;
}

void save_params(const ParamStore& store, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(store.entries().size()));
  for (const auto& e : store.entries()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    const auto& t = e.var->value;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) put<std::int32_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void load_params(ParamStore& store, const std::filesystem::path& path, bool require_all) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open parameter file " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw IoError(path.string() + " is not a parameter file");
  const auto version = get<std::uint32_t>(in, path);
  if (version != kVersion) throw IoError("unsupported parameter file version " + std::to_string(version));
  const auto count = get<std::uint32_t>(in, path);
  std::map<std::string, Tensor> records;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(in, path);
    std::string name(len, '\0');
    in.read(name.data(), len);
    const auto rank = get<std::uint32_t>(in, path);
    std::vector<int> shape(rank);
    for (auto& d : shape) d = get<std::int32_t>(in, path);
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
    if (!in) throw IoError("truncated parameter file " + path.string());
    records.emplace(std::move(name), std::move(t));
  }
  std::vector<std::string> problems;
  for (const auto& [name, t] : records) {
    const ParamEntry* e = store.find(name);
    if (!e) {
      problems.push_back(name + ": not a layer of this model");
    } else if (e->var->value.shape != t.shape) {
      problems.push_back(name + ": file shape " + t.shape_string() + ", model shape " + e->var->value.shape_string());
    }
  }
  if (require_all) {
    for (const auto& e : store.entries()) {
      if (!records.count(e.name)) problems.push_back(e.name + ": missing from file");
    }
  }
  if (!problems.empty()) {
    std::ostringstream msg;
    msg << "cannot load weights from " << path.string() << ":";
    for (const auto& p : problems) msg << "\n  " << p;
    throw ValidationError(msg.str());
  }
  for (auto& [name, t] : records) {
    const ParamEntry* e = store.find(name);
    e->var->value.data = std::move(t.data);
  }
}

Var activate(const Var& x, Activation act) {
  switch (act) {
    case Activation::kRelu: return relu(x);
    case Activation::kRelu6: return relu6(x);
    case Activation::kSilu: return silu(x);
    case Activation::kNone: break;
  }
  return x;
}

Conv2d::Conv2d(ParamStore& store, const std::string& name, int in_channels, int out_channels, int kernel, Rng& rng,
               int stride, int padding, int groups, bool bias) {
  options_.stride = stride;
  options_.padding = padding < 0 ? kernel / 2 : padding;
  options_.groups = groups;
  Tensor w({out_channels, in_channels / groups, kernel, kernel});
  const double fan_in = static_cast<double>(in_channels / groups) * kernel * kernel;
  const double sd = std::sqrt(2.0 / fan_in);
  for (auto& v : w.data) v = static_cast<float>(sd * standard_normal(rng));
  weight_ = store.add(name + ".weight", std::move(w));
  if (bias) bias_ = store.add(name + ".bias", Tensor({out_channels}, 0.0f));
}

BatchNorm2d::BatchNorm2d(ParamStore& store, const std::string& name, int channels, float eps) {
  state_.gamma = store.add(name + ".gamma", Tensor({channels}, 1.0f));
  state_.beta = store.add(name + ".beta", Tensor({channels}, 0.0f));
  state_.running_mean = store.add(name + ".running_mean", Tensor({channels}, 0.0f), false);
  state_.running_var = store.add(name + ".running_var", Tensor({channels}, 1.0f), false);
  state_.eps = eps;
}

ConvBnAct::ConvBnAct(ParamStore& store, const std::string& name, int in_channels, int out_channels, int kernel,
                     Rng& rng, int stride, Activation act, int groups, float bn_eps)
    : conv_(store, name + ".conv", in_channels, out_channels, kernel, rng, stride, -1, groups, false),
      bn_(store, name + ".bn", out_channels, bn_eps),
      act_(act) {}

}  // namespace nigra::nn
