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

#include "nigra/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Core>

namespace nigra::nn {

namespace {

using MatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using ConstMapRM = Eigen::Map<const MatRM>;

Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn) {
  bool needs = false;
  if (grad_enabled()) {
    for (const auto& p : parents) needs = needs || (p && p->requires_grad);
  }
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (needs) {
    node->requires_grad = true;
    for (auto& p : parents) {
      if (p) node->parents.push_back(std::move(p));
    }
    node->backward_fn = std::move(backward_fn);
  }
  return node;
}

void require_rank4(const Tensor& t, const char* op) {
  if (t.rank() != 4) throw std::invalid_argument(std::string(op) + " expects an NCHW tensor, got " + t.shape_string());
}

struct ConvGeometry {
  int n, cin, h, w, cout, cin_g, cout_g, k, groups, stride, pad, ho, wo;
  int rows() const { return cin_g * k * k; }
  int cols() const { return ho * wo; }
  bool pointwise() const { return k == 1 && stride == 1 && pad == 0; }
  bool depthwise() const { return cin_g == 1 && cout_g == 1 && groups > 1; }
};

// Patch matrix of one sample/group: rows (ci, ky, kx), columns (oy, ox).
void im2col(const float* x, const ConvGeometry& g, float* cols) {
  const int plane = g.h * g.w;
  for (int ci = 0; ci < g.cin_g; ++ci) {
    const float* src = x + static_cast<std::size_t>(ci) * plane;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        float* dst = cols + static_cast<std::size_t>((ci * g.k + ky) * g.k + kx) * g.cols();
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          float* row = dst + static_cast<std::size_t>(oy) * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill(row, row + g.wo, 0.0f);
            continue;
          }
          const float* src_row = src + static_cast<std::size_t>(iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            row[ox] = (ix >= 0 && ix < g.w) ? src_row[ix] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im_add(const float* cols, const ConvGeometry& g, float* dx) {
  const int plane = g.h * g.w;
  for (int ci = 0; ci < g.cin_g; ++ci) {
    float* dst = dx + static_cast<std::size_t>(ci) * plane;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const float* src = cols + static_cast<std::size_t>((ci * g.k + ky) * g.k + kx) * g.cols();
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          const float* row = src + static_cast<std::size_t>(oy) * g.wo;
          float* dst_row = dst + static_cast<std::size_t>(iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) dst_row[ix] += row[ox];
          }
        }
      }
    }
  }
}

void depthwise_forward(const float* x, const float* w, const ConvGeometry& g, float* y) {
  for (int oy = 0; oy < g.ho; ++oy) {
    for (int ox = 0; ox < g.wo; ++ox) {
      float acc = 0.0f;
      for (int ky = 0; ky < g.k; ++ky) {
        const int iy = oy * g.stride - g.pad + ky;
        if (iy < 0 || iy >= g.h) continue;
        for (int kx = 0; kx < g.k; ++kx) {
          const int ix = ox * g.stride - g.pad + kx;
          if (ix < 0 || ix >= g.w) continue;
          acc += w[ky * g.k + kx] * x[iy * g.w + ix];
        }
      }
      y[oy * g.wo + ox] = acc;
    }
  }
}

void depthwise_backward(const float* x, const float* w, const float* dy, const ConvGeometry& g, float* dx,
                        float* dw) {
  for (int oy = 0; oy < g.ho; ++oy) {
    for (int ox = 0; ox < g.wo; ++ox) {
      const float d = dy[oy * g.wo + ox];
      if (d == 0.0f) continue;
      for (int ky = 0; ky < g.k; ++ky) {
        const int iy = oy * g.stride - g.pad + ky;
        if (iy < 0 || iy >= g.h) continue;
        for (int kx = 0; kx < g.k; ++kx) {
          const int ix = ox * g.stride - g.pad + kx;
          if (ix < 0 || ix >= g.w) continue;
          if (dx) dx[iy * g.w + ix] += w[ky * g.k + kx] * d;
          if (dw) dw[ky * g.k + kx] += x[iy * g.w + ix] * d;
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, Conv2dOptions options) {
  const Tensor& X = x->value;
  const Tensor& W = weight->value;
  require_rank4(X, "conv2d");
  if (W.rank() != 4 || W.dim(2) != W.dim(3)) {
    throw std::invalid_argument("conv2d weight must be [Cout, Cin/groups, K, K], got " + W.shape_string());
  }
  ConvGeometry g{};
  g.n = X.n();
  g.cin = X.c();
  g.h = X.h();
  g.w = X.w();
  g.cout = W.dim(0);
  g.cin_g = W.dim(1);
  g.k = W.dim(2);
  g.groups = options.groups;
  g.stride = options.stride;
  g.pad = options.padding;
  if (g.groups < 1 || g.cin != g.cin_g * g.groups || g.cout % g.groups != 0) {
    throw std::invalid_argument("conv2d channel mismatch: input " + X.shape_string() + ", weight " + W.shape_string() +
                                ", groups " + std::to_string(g.groups));
  }
  if (bias && (bias->value.numel() != static_cast<std::size_t>(g.cout))) {
    throw std::invalid_argument("conv2d bias length mismatch");
  }
  g.cout_g = g.cout / g.groups;
  g.ho = (g.h + 2 * g.pad - g.k) / g.stride + 1;
  g.wo = (g.w + 2 * g.pad - g.k) / g.stride + 1;
  if (g.ho <= 0 || g.wo <= 0) throw std::invalid_argument("conv2d input " + X.shape_string() + " too small");

  Tensor Y({g.n, g.cout, g.ho, g.wo});
  const std::size_t in_sample = static_cast<std::size_t>(g.cin) * g.h * g.w;
  const std::size_t out_sample = static_cast<std::size_t>(g.cout) * g.ho * g.wo;
  const std::size_t in_group = static_cast<std::size_t>(g.cin_g) * g.h * g.w;
  const std::size_t out_group = static_cast<std::size_t>(g.cout_g) * g.cols();
  const std::size_t w_group = static_cast<std::size_t>(g.cout_g) * g.rows();

  if (g.depthwise()) {
    for (int n = 0; n < g.n; ++n) {
      for (int c = 0; c < g.cout; ++c) {
        depthwise_forward(X.data.data() + n * in_sample + c * in_group, W.data.data() + c * w_group, g,
                          Y.data.data() + n * out_sample + c * out_group);
      }
    }
  } else {
    std::vector<float> cols(g.pointwise() ? 0 : static_cast<std::size_t>(g.rows()) * g.cols());
    for (int n = 0; n < g.n; ++n) {
      for (int grp = 0; grp < g.groups; ++grp) {
        const float* xin = X.data.data() + n * in_sample + grp * in_group;
        const float* patches = xin;
        if (!g.pointwise()) {
          im2col(xin, g, cols.data());
          patches = cols.data();
        }
        ConstMapRM wm(W.data.data() + grp * w_group, g.cout_g, g.rows());
        ConstMapRM cm(patches, g.rows(), g.cols());
        MapRM ym(Y.data.data() + n * out_sample + grp * out_group, g.cout_g, g.cols());
        ym.noalias() = wm * cm;
      }
    }
  }
  if (bias) {
    const float* b = bias->value.data.data();
    const std::size_t plane = static_cast<std::size_t>(g.ho) * g.wo;
    for (int n = 0; n < g.n; ++n) {
      for (int c = 0; c < g.cout; ++c) {
        float* y = Y.data.data() + n * out_sample + c * plane;
        for (std::size_t i = 0; i < plane; ++i) y[i] += b[c];
      }
    }
  }

  return make_result(std::move(Y), {x, weight, bias}, [x, weight, bias, g, in_sample, out_sample, in_group, out_group,
                                                        w_group](Node& self) {
    const Tensor& X = x->value;
    const Tensor& W = weight->value;
    const Tensor& dY = self.grad;
    float* dx = x->requires_grad ? x->ensure_grad().data.data() : nullptr;
    float* dw = weight->requires_grad ? weight->ensure_grad().data.data() : nullptr;
    if (bias && bias->requires_grad) {
      float* db = bias->ensure_grad().data.data();
      const std::size_t plane = static_cast<std::size_t>(g.ho) * g.wo;
      for (int n = 0; n < g.n; ++n) {
        for (int c = 0; c < g.cout; ++c) {
          const float* d = dY.data.data() + n * out_sample + c * plane;
          double acc = 0.0;
          for (std::size_t i = 0; i < plane; ++i) acc += d[i];
          db[c] += static_cast<float>(acc);
        }
      }
    }
    if (!dx && !dw) return;
    if (g.depthwise()) {
      for (int n = 0; n < g.n; ++n) {
        for (int c = 0; c < g.cout; ++c) {
          depthwise_backward(X.data.data() + n * in_sample + c * in_group, W.data.data() + c * w_group,
                             dY.data.data() + n * out_sample + c * out_group, g,
                             dx ? dx + n * in_sample + c * in_group : nullptr, dw ? dw + c * w_group : nullptr);
        }
      }
      return;
    }
    std::vector<float> cols(g.pointwise() ? 0 : static_cast<std::size_t>(g.rows()) * g.cols());
    std::vector<float> dcols(g.pointwise() || !dx ? 0 : cols.size());
    for (int n = 0; n < g.n; ++n) {
      for (int grp = 0; grp < g.groups; ++grp) {
        const float* xin = X.data.data() + n * in_sample + grp * in_group;
        ConstMapRM wm(W.data.data() + grp * w_group, g.cout_g, g.rows());
        ConstMapRM dym(dY.data.data() + n * out_sample + grp * out_group, g.cout_g, g.cols());
        if (dw) {
          const float* patches = xin;
          if (!g.pointwise()) {
            im2col(xin, g, cols.data());
            patches = cols.data();
          }
          ConstMapRM cm(patches, g.rows(), g.cols());
          MapRM dwm(dw + grp * w_group, g.cout_g, g.rows());
          dwm.noalias() += dym * cm.transpose();
        }
        if (dx) {
          float* dxin = dx + n * in_sample + grp * in_group;
          if (g.pointwise()) {
            MapRM dxm(dxin, g.rows(), g.cols());
            dxm.noalias() += wm.transpose() * dym;
          } else {
            MapRM dcm(dcols.data(), g.rows(), g.cols());
            dcm.noalias() = wm.transpose() * dym;
            col2im_add(dcols.data(), g, dxin);
          }
        }
      }
    }
  });
}

Var batch_norm(const Var& x, BatchNormState& state, bool training) {
  const Tensor& X = x->value;
  require_rank4(X, "batch_norm");
  const int N = X.n(), C = X.c();
  const std::size_t plane = static_cast<std::size_t>(X.h()) * X.w();
  const std::size_t count = plane * N;
  if (state.gamma->value.numel() != static_cast<std::size_t>(C)) {
    throw std::invalid_argument("batch_norm channel mismatch for input " + X.shape_string());
  }
  std::vector<float> mean(C), invstd(C);
  float* rm = state.running_mean->value.data.data();
  float* rv = state.running_var->value.data.data();
  if (training) {
    for (int c = 0; c < C; ++c) {
      double s = 0.0, ss = 0.0;
      for (int n = 0; n < N; ++n) {
        const float* p = X.data.data() + (static_cast<std::size_t>(n) * C + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
      }
      const double m = s / count;
      for (int n = 0; n < N; ++n) {
        const float* p = X.data.data() + (static_cast<std::size_t>(n) * C + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) ss += (p[i] - m) * (p[i] - m);
      }
      const double var = ss / count;
      mean[c] = static_cast<float>(m);
      invstd[c] = static_cast<float>(1.0 / std::sqrt(var + state.eps));
      const double unbiased = count > 1 ? ss / (count - 1) : var;
      rm[c] = static_cast<float>((1.0 - state.momentum) * rm[c] + state.momentum * m);
      rv[c] = static_cast<float>((1.0 - state.momentum) * rv[c] + state.momentum * unbiased);
    }
  } else {
    for (int c = 0; c < C; ++c) {
      mean[c] = rm[c];
      invstd[c] = 1.0f / std::sqrt(rv[c] + state.eps);
    }
  }
  Tensor Y(X.shape);
  const float* gamma = state.gamma->value.data.data();
  const float* beta = state.beta->value.data.data();
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const std::size_t off = (static_cast<std::size_t>(n) * C + c) * plane;
      const float a = gamma[c] * invstd[c];
      const float b = beta[c] - mean[c] * a;
      for (std::size_t i = 0; i < plane; ++i) Y.data[off + i] = X.data[off + i] * a + b;
    }
  }
  Var gv = state.gamma, bv = state.beta;
  return make_result(std::move(Y), {x, gv, bv},
                     [x, gv, bv, mean, invstd, training, N, C, plane, count](Node& self) {
                       const Tensor& X = x->value;
                       const Tensor& dY = self.grad;
                       const float* gamma = gv->value.data.data();
                       std::vector<double> sum_dy(C, 0.0), sum_dy_xhat(C, 0.0);
                       for (int n = 0; n < N; ++n) {
                         for (int c = 0; c < C; ++c) {
                           const std::size_t off = (static_cast<std::size_t>(n) * C + c) * plane;
                           for (std::size_t i = 0; i < plane; ++i) {
                             const double xhat = (X.data[off + i] - mean[c]) * invstd[c];
                             sum_dy[c] += dY.data[off + i];
                             sum_dy_xhat[c] += dY.data[off + i] * xhat;
                           }
                         }
                       }
                       if (gv->requires_grad) {
                         auto& dg = gv->ensure_grad().data;
                         for (int c = 0; c < C; ++c) dg[c] += static_cast<float>(sum_dy_xhat[c]);
                       }
                       if (bv->requires_grad) {
                         auto& db = bv->ensure_grad().data;
                         for (int c = 0; c < C; ++c) db[c] += static_cast<float>(sum_dy[c]);
                       }
                       if (!x->requires_grad) return;
                       auto& dx = x->ensure_grad().data;
                       for (int n = 0; n < N; ++n) {
                         for (int c = 0; c < C; ++c) {
                           const std::size_t off = (static_cast<std::size_t>(n) * C + c) * plane;
                           const double scale = gamma[c] * invstd[c];
                           if (training) {
                             const double mdy = sum_dy[c] / count;
                             const double mdyx = sum_dy_xhat[c] / count;
                             for (std::size_t i = 0; i < plane; ++i) {
                               const double xhat = (X.data[off + i] - mean[c]) * invstd[c];
                               dx[off + i] += static_cast<float>(scale * (dY.data[off + i] - mdy - xhat * mdyx));
                             }
                           } else {
                             for (std::size_t i = 0; i < plane; ++i) {
                               dx[off + i] += static_cast<float>(scale * dY.data[off + i]);
                             }
                           }
                         }
                       }
                     });
}

namespace {

template <typename Fwd, typename Deriv>
Var elementwise(const Var& x, Fwd fwd, Deriv deriv) {
  const Tensor& X = x->value;
  Tensor Y(X.shape);
  for (std::size_t i = 0; i < X.numel(); ++i) Y.data[i] = fwd(X.data[i]);
  return make_result(std::move(Y), {x}, [x, deriv](Node& self) {
    auto& dx = x->ensure_grad().data;
    const auto& xv = x->value.data;
    const auto& yv = self.value.data;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad.data[i] * deriv(xv[i], yv[i]);
  });
}

}  // namespace

Var relu(const Var& x) {
  return elementwise(
      x, [](float v) { return v > 0.0f ? v : 0.0f; }, [](float v, float) { return v > 0.0f ? 1.0f : 0.0f; });
}

Var relu6(const Var& x) {
  return elementwise(
      x, [](float v) { return std::clamp(v, 0.0f, 6.0f); },
      [](float v, float) { return (v > 0.0f && v < 6.0f) ? 1.0f : 0.0f; });
}

Var sigmoid(const Var& x) {
  return elementwise(
      x, [](float v) { return 1.0f / (1.0f + std::exp(-v)); }, [](float, float y) { return y * (1.0f - y); });
}

Var silu(const Var& x) {
  return elementwise(
      x, [](float v) { return v / (1.0f + std::exp(-v)); },
      [](float v, float) {
        const float s = 1.0f / (1.0f + std::exp(-v));
        return s * (1.0f + v * (1.0f - s));
      });
}

Var add(const Var& a, const Var& b) {
  if (a->value.shape != b->value.shape) {
    throw std::invalid_argument("add shape mismatch " + a->value.shape_string() + " vs " + b->value.shape_string());
  }
  Tensor Y(a->value.shape);
  for (std::size_t i = 0; i < Y.numel(); ++i) Y.data[i] = a->value.data[i] + b->value.data[i];
  return make_result(std::move(Y), {a, b}, [a, b](Node& self) {
    for (const Var& v : {a, b}) {
      if (!v->requires_grad) continue;
      auto& d = v->ensure_grad().data;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad.data[i];
    }
  });
}

Var scale_channels(const Var& x, const Var& s) {
  const Tensor& X = x->value;
  require_rank4(X, "scale_channels");
  const Tensor& S = s->value;
  if (S.rank() != 4 || S.n() != X.n() || S.c() != X.c() || S.h() != 1 || S.w() != 1) {
    throw std::invalid_argument("scale_channels expects [N, C, 1, 1] scales, got " + S.shape_string());
  }
  const std::size_t plane = static_cast<std::size_t>(X.h()) * X.w();
  const std::size_t nc = static_cast<std::size_t>(X.n()) * X.c();
  Tensor Y(X.shape);
  for (std::size_t k = 0; k < nc; ++k) {
    for (std::size_t i = 0; i < plane; ++i) Y.data[k * plane + i] = X.data[k * plane + i] * S.data[k];
  }
  return make_result(std::move(Y), {x, s}, [x, s, plane, nc](Node& self) {
    const auto& dy = self.grad.data;
    if (x->requires_grad) {
      auto& dx = x->ensure_grad().data;
      for (std::size_t k = 0; k < nc; ++k) {
        for (std::size_t i = 0; i < plane; ++i) dx[k * plane + i] += dy[k * plane + i] * s->value.data[k];
      }
    }
    if (s->requires_grad) {
      auto& ds = s->ensure_grad().data;
      for (std::size_t k = 0; k < nc; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += dy[k * plane + i] * x->value.data[k * plane + i];
        ds[k] += static_cast<float>(acc);
      }
    }
  });
}

Var global_avg_pool(const Var& x) {
  const Tensor& X = x->value;
  require_rank4(X, "global_avg_pool");
  const std::size_t plane = static_cast<std::size_t>(X.h()) * X.w();
  const std::size_t nc = static_cast<std::size_t>(X.n()) * X.c();
  Tensor Y({X.n(), X.c(), 1, 1});
  for (std::size_t k = 0; k < nc; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += X.data[k * plane + i];
    Y.data[k] = static_cast<float>(acc / plane);
  }
  return make_result(std::move(Y), {x}, [x, plane, nc](Node& self) {
    auto& dx = x->ensure_grad().data;
    for (std::size_t k = 0; k < nc; ++k) {
      const float d = self.grad.data[k] / static_cast<float>(plane);
      for (std::size_t i = 0; i < plane; ++i) dx[k * plane + i] += d;
    }
  });
}

Var max_pool2d(const Var& x, int kernel, int stride, int padding) {
  const Tensor& X = x->value;
  require_rank4(X, "max_pool2d");
  const int H = X.h(), W = X.w();
  const int ho = (H + 2 * padding - kernel) / stride + 1;
  const int wo = (W + 2 * padding - kernel) / stride + 1;
  const std::size_t nc = static_cast<std::size_t>(X.n()) * X.c();
  Tensor Y({X.n(), X.c(), ho, wo});
  auto argmax = std::make_shared<std::vector<std::int32_t>>(Y.numel());
  for (std::size_t k = 0; k < nc; ++k) {
    const float* src = X.data.data() + k * H * W;
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        float best = -std::numeric_limits<float>::infinity();
        std::int32_t best_i = -1;
        for (int ky = 0; ky < kernel; ++ky) {
          const int iy = oy * stride - padding + ky;
          if (iy < 0 || iy >= H) continue;
          for (int kx = 0; kx < kernel; ++kx) {
            const int ix = ox * stride - padding + kx;
            if (ix < 0 || ix >= W) continue;
            if (best_i < 0 || src[iy * W + ix] > best) {
              best = src[iy * W + ix];
              best_i = iy * W + ix;
            }
          }
        }
        const std::size_t o = k * ho * wo + oy * wo + ox;
        Y.data[o] = best;
        (*argmax)[o] = best_i;
      }
    }
  }
  const std::size_t in_plane = static_cast<std::size_t>(H) * W;
  const std::size_t out_plane = static_cast<std::size_t>(ho) * wo;
  return make_result(std::move(Y), {x}, [x, argmax, nc, in_plane, out_plane](Node& self) {
    auto& dx = x->ensure_grad().data;
    for (std::size_t k = 0; k < nc; ++k) {
      for (std::size_t o = 0; o < out_plane; ++o) {
        dx[k * in_plane + (*argmax)[k * out_plane + o]] += self.grad.data[k * out_plane + o];
      }
    }
  });
}

Var avg_pool2d(const Var& x, int kernel, int stride) {
  const Tensor& X = x->value;
  require_rank4(X, "avg_pool2d");
  const int H = X.h(), W = X.w();
  const int ho = (H - kernel) / stride + 1;
  const int wo = (W - kernel) / stride + 1;
  const std::size_t nc = static_cast<std::size_t>(X.n()) * X.c();
  const float inv = 1.0f / static_cast<float>(kernel * kernel);
  Tensor Y({X.n(), X.c(), ho, wo});
  for (std::size_t k = 0; k < nc; ++k) {
    const float* src = X.data.data() + k * H * W;
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        float acc = 0.0f;
        for (int ky = 0; ky < kernel; ++ky) {
          for (int kx = 0; kx < kernel; ++kx) acc += src[(oy * stride + ky) * W + ox * stride + kx];
        }
        Y.data[k * ho * wo + oy * wo + ox] = acc * inv;
      }
    }
  }
  return make_result(std::move(Y), {x}, [x, kernel, stride, H, W, ho, wo, nc, inv](Node& self) {
    auto& dx = x->ensure_grad().data;
    for (std::size_t k = 0; k < nc; ++k) {
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          const float d = self.grad.data[k * ho * wo + oy * wo + ox] * inv;
          for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx) dx[k * H * W + (oy * stride + ky) * W + ox * stride + kx] += d;
          }
        }
      }
    }
  });
}

Var upsample_nearest2x(const Var& x) {
  const Tensor& X = x->value;
  require_rank4(X, "upsample_nearest2x");
  const int H = X.h(), W = X.w();
  const std::size_t nc = static_cast<std::size_t>(X.n()) * X.c();
  Tensor Y({X.n(), X.c(), 2 * H, 2 * W});
  for (std::size_t k = 0; k < nc; ++k) {
    const float* src = X.data.data() + k * H * W;
    float* dst = Y.data.data() + k * 4 * H * W;
    for (int y = 0; y < 2 * H; ++y) {
      for (int xx = 0; xx < 2 * W; ++xx) dst[y * 2 * W + xx] = src[(y / 2) * W + xx / 2];
    }
  }
  return make_result(std::move(Y), {x}, [x, H, W, nc](Node& self) {
    auto& dx = x->ensure_grad().data;
    for (std::size_t k = 0; k < nc; ++k) {
      const float* d = self.grad.data.data() + k * 4 * H * W;
      float* dst = dx.data() + k * H * W;
      for (int y = 0; y < 2 * H; ++y) {
        for (int xx = 0; xx < 2 * W; ++xx) dst[(y / 2) * W + xx / 2] += d[y * 2 * W + xx];
      }
    }
  });
}

Var concat_channels(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_channels needs at least one input");
  const Tensor& first = xs.front()->value;
  require_rank4(first, "concat_channels");
  int total_c = 0;
  for (const auto& v : xs) {
    const Tensor& t = v->value;
    if (t.rank() != 4 || t.n() != first.n() || t.h() != first.h() || t.w() != first.w()) {
      throw std::invalid_argument("concat_channels shape mismatch " + t.shape_string() + " vs " +
                                  first.shape_string());
    }
    total_c += t.c();
  }
  const std::size_t plane = static_cast<std::size_t>(first.h()) * first.w();
  Tensor Y({first.n(), total_c, first.h(), first.w()});
  for (int n = 0; n < first.n(); ++n) {
    std::size_t offset = static_cast<std::size_t>(n) * total_c * plane;
    for (const auto& v : xs) {
      const std::size_t len = static_cast<std::size_t>(v->value.c()) * plane;
      std::copy_n(v->value.data.data() + n * len, len, Y.data.data() + offset);
      offset += len;
    }
  }
  const int N = first.n();
  return make_result(std::move(Y), xs, [xs, plane, total_c, N](Node& self) {
    for (int n = 0; n < N; ++n) {
      std::size_t offset = static_cast<std::size_t>(n) * total_c * plane;
      for (const auto& v : xs) {
        const std::size_t len = static_cast<std::size_t>(v->value.c()) * plane;
        if (v->requires_grad) {
          auto& d = v->ensure_grad().data;
          for (std::size_t i = 0; i < len; ++i) d[n * len + i] += self.grad.data[offset + i];
        }
        offset += len;
      }
    }
  });
}

}  // namespace nigra::nn
