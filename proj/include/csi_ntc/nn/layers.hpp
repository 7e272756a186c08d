// Copyright 2026 The CSI-NTC Authors. All Rights Reserved.
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

#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "csi_ntc/nn/params.hpp"

// Token-wise layers with explicit reverse-mode passes. Activations are
// row-major (tokens x features) vectors of doubles. Every backward call
// accumulates into the parameter gradients and overwrites the input gradient.
namespace csi_ntc::nn {

inline double dot(const double* a, const double* b, size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline void axpy(double alpha, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

struct Linear {
  size_t weight = 0;  // [out, in]
  size_t bias = 0;    // [out]
  size_t in = 0;
  size_t out = 0;

  // rng == nullptr lays out the tensors without initializing them.
  static Linear create(ParamSet& p, const std::string& name, size_t in, size_t out, Rng* rng) {
    Linear l;
    l.in = in;
    l.out = out;
    l.weight = p.add(name + ".weight", {static_cast<uint32_t>(out), static_cast<uint32_t>(in)});
    l.bias = p.add(name + ".bias", {static_cast<uint32_t>(out)});
    if (rng != nullptr) {
      init_uniform_fan_in(p[l.weight], in, *rng);
      init_uniform_fan_in(p[l.bias], in, *rng);
    }
    return l;
  }

  void forward(const ParamSet& p, std::span<const double> x, size_t tokens,
               std::vector<double>& y) const {
    const double* w = p[weight].data();
    const double* b = p[bias].data();
    y.assign(tokens * out, 0.0);
    // Output-row outer loop keeps one weight row hot across all tokens.
    for (size_t o = 0; o < out; ++o) {
      const double* wo = w + o * in;
      for (size_t t = 0; t < tokens; ++t) y[t * out + o] = b[o] + dot(wo, x.data() + t * in, in);
    }
  }

  void backward(const ParamSet& p, std::span<const double> x, std::span<const double> dy,
                size_t tokens, ParamSet& g, std::vector<double>* dx) const {
    const double* w = p[weight].data();
    double* gw = g[weight].data();
    double* gb = g[bias].data();
    if (dx != nullptr) dx->assign(tokens * in, 0.0);
    for (size_t o = 0; o < out; ++o) {
      const double* wo = w + o * in;
      double* gwo = gw + o * in;
      for (size_t t = 0; t < tokens; ++t) {
        const double d = dy[t * out + o];
        if (d == 0.0) continue;
        gb[o] += d;
        axpy(d, x.data() + t * in, gwo, in);
        if (dx != nullptr) axpy(d, wo, dx->data() + t * in, in);
      }
    }
  }
};

struct LayerNorm {
  size_t gamma = 0;
  size_t beta = 0;
  size_t dim = 0;
  static constexpr double kEps = 1e-5;

  struct Cache {
    std::vector<double> xhat;
    std::vector<double> rstd;
  };

  static LayerNorm create(ParamSet& p, const std::string& name, size_t dim) {
    LayerNorm l;
    l.dim = dim;
    l.gamma = p.add(name + ".gamma", {static_cast<uint32_t>(dim)}, 1.0);
    l.beta = p.add(name + ".beta", {static_cast<uint32_t>(dim)}, 0.0);
    return l;
  }

  void forward(const ParamSet& p, std::span<const double> x, size_t tokens,
               std::vector<double>& y, Cache& c) const {
    const double* ga = p[gamma].data();
    const double* be = p[beta].data();
    y.resize(tokens * dim);
    c.xhat.resize(tokens * dim);
    c.rstd.resize(tokens);
    const double inv_n = 1.0 / static_cast<double>(dim);
    for (size_t t = 0; t < tokens; ++t) {
      const double* xt = x.data() + t * dim;
      double mean = 0.0;
      for (size_t i = 0; i < dim; ++i) mean += xt[i];
      mean *= inv_n;
      double var = 0.0;
      for (size_t i = 0; i < dim; ++i) var += (xt[i] - mean) * (xt[i] - mean);
      var *= inv_n;
      const double rstd = 1.0 / std::sqrt(var + kEps);
      c.rstd[t] = rstd;
      for (size_t i = 0; i < dim; ++i) {
        const double xh = (xt[i] - mean) * rstd;
        c.xhat[t * dim + i] = xh;
        y[t * dim + i] = ga[i] * xh + be[i];
      }
    }
  }

  void backward(const ParamSet& p, const Cache& c, std::span<const double> dy, size_t tokens,
                ParamSet& g, std::vector<double>& dx) const {
    const double* ga = p[gamma].data();
    double* gg = g[gamma].data();
    double* gb = g[beta].data();
    dx.assign(tokens * dim, 0.0);
    const double inv_n = 1.0 / static_cast<double>(dim);
    std::vector<double> dxhat(dim);
    for (size_t t = 0; t < tokens; ++t) {
      const double* xh = c.xhat.data() + t * dim;
      const double* dyt = dy.data() + t * dim;
      double mean_d = 0.0;
      double mean_dx = 0.0;
      for (size_t i = 0; i < dim; ++i) {
        gg[i] += dyt[i] * xh[i];
        gb[i] += dyt[i];
        dxhat[i] = dyt[i] * ga[i];
        mean_d += dxhat[i];
        mean_dx += dxhat[i] * xh[i];
      }
      mean_d *= inv_n;
      mean_dx *= inv_n;
      for (size_t i = 0; i < dim; ++i)
        dx[t * dim + i] = c.rstd[t] * (dxhat[i] - mean_d - xh[i] * mean_dx);
    }
  }
};

// tanh approximation of GELU.
struct Gelu {
  static constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  static constexpr double kA = 0.044715;

  static void forward(std::span<const double> x, std::vector<double>& y) {
    y.resize(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
      const double v = x[i];
      y[i] = 0.5 * v * (1.0 + std::tanh(kC * (v + kA * v * v * v)));
    }
  }

  static void backward(std::span<const double> x, std::span<const double> dy,
                       std::vector<double>& dx) {
    dx.resize(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
      const double v = x[i];
      const double u = kC * (v + kA * v * v * v);
      const double th = std::tanh(u);
      const double du = kC * (1.0 + 3.0 * kA * v * v);
      dx[i] = dy[i] * (0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * du);
    }
  }
};

struct Tanh {
  static void forward(std::span<const double> x, std::vector<double>& y) {
    y.resize(x.size());
    for (size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  }
  // Takes the forward output.
  static void backward(std::span<const double> y, std::span<const double> dy,
                       std::vector<double>& dx) {
    dx.resize(y.size());
    for (size_t i = 0; i < y.size(); ++i) dx[i] = dy[i] * (1.0 - y[i] * y[i]);
  }
};

// Multi-head self-attention inside non-overlapping windows of a token grid.
// With shift > 0 the grid is cyclically rolled by -shift before windowing
// and tokens that wrapped around are masked from attending across the seam.
struct WindowAttention {
  Linear qkv;
  Linear proj;
  size_t dim = 0;
  size_t heads = 1;
  size_t grid_h = 0;
  size_t grid_w = 0;
  size_t window = 1;
  size_t shift = 0;
  std::vector<std::vector<size_t>> groups;  // token indices per window
  std::vector<std::vector<int>> regions;    // mask label per window member

  struct Cache {
    std::vector<double> qkv_out;
    std::vector<double> attn;  // per window, per head: n x n softmax weights
    std::vector<double> ctx;
  };

  static WindowAttention create(ParamSet& p, const std::string& name, size_t dim, size_t heads,
                                size_t grid_h, size_t grid_w, size_t window, size_t shift,
                                Rng* rng) {
    WindowAttention a;
    a.dim = dim;
    a.heads = heads;
    a.grid_h = grid_h;
    a.grid_w = grid_w;
    a.window = window;
    a.shift = shift;
    a.qkv = Linear::create(p, name + ".qkv", dim, 3 * dim, rng);
    a.proj = Linear::create(p, name + ".proj", dim, dim, rng);
    a.build_windows();
    return a;
  }

  void build_windows() {
    groups.clear();
    regions.clear();
    auto label = [&](size_t pos, size_t extent) {
      if (shift == 0) return 0;
      if (pos < extent - window) return 0;
      if (pos < extent - shift) return 1;
      return 2;
    };
    for (size_t wr = 0; wr < grid_h / window; ++wr) {
      for (size_t wc = 0; wc < grid_w / window; ++wc) {
        std::vector<size_t> idx;
        std::vector<int> reg;
        for (size_t r = 0; r < window; ++r) {
          for (size_t c = 0; c < window; ++c) {
            const size_t sr = wr * window + r;
            const size_t sc = wc * window + c;
            const size_t orow = (sr + shift) % grid_h;
            const size_t ocol = (sc + shift) % grid_w;
            idx.push_back(orow * grid_w + ocol);
            reg.push_back(label(sr, grid_h) * 3 + label(sc, grid_w));
          }
        }
        groups.push_back(std::move(idx));
        regions.push_back(std::move(reg));
      }
    }
  }

  size_t tokens() const { return grid_h * grid_w; }

  void forward(const ParamSet& p, std::span<const double> x, std::vector<double>& y,
               Cache& c) const {
    const size_t t_count = tokens();
    const size_t dh = dim / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    qkv.forward(p, x, t_count, c.qkv_out);
    c.ctx.assign(t_count * dim, 0.0);
    const size_t n = window * window;
    c.attn.assign(groups.size() * heads * n * n, 0.0);
    const size_t stride = 3 * dim;
    std::vector<double> row(n);
    for (size_t wi = 0; wi < groups.size(); ++wi) {
      const auto& idx = groups[wi];
      const auto& reg = regions[wi];
      for (size_t h = 0; h < heads; ++h) {
        double* a = c.attn.data() + (wi * heads + h) * n * n;
        for (size_t i = 0; i < n; ++i) {
          const double* q = c.qkv_out.data() + idx[i] * stride + h * dh;
          double mx = -std::numeric_limits<double>::infinity();
          for (size_t j = 0; j < n; ++j) {
            if (reg[i] != reg[j]) {
              row[j] = -std::numeric_limits<double>::infinity();
              continue;
            }
            const double* k = c.qkv_out.data() + idx[j] * stride + dim + h * dh;
            row[j] = scale * dot(q, k, dh);
            mx = std::max(mx, row[j]);
          }
          double sum = 0.0;
          for (size_t j = 0; j < n; ++j) {
            row[j] = reg[i] == reg[j] ? std::exp(row[j] - mx) : 0.0;
            sum += row[j];
          }
          double* out = c.ctx.data() + idx[i] * dim + h * dh;
          for (size_t j = 0; j < n; ++j) {
            a[i * n + j] = row[j] / sum;
            if (a[i * n + j] == 0.0) continue;
            const double* v = c.qkv_out.data() + idx[j] * stride + 2 * dim + h * dh;
            axpy(a[i * n + j], v, out, dh);
          }
        }
      }
    }
    proj.forward(p, c.ctx, t_count, y);
  }

  void backward(const ParamSet& p, std::span<const double> x, const Cache& c,
                std::span<const double> dy, ParamSet& g, std::vector<double>& dx) const {
    const size_t t_count = tokens();
    const size_t dh = dim / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<double> dctx;
    proj.backward(p, c.ctx, dy, t_count, g, &dctx);
    const size_t stride = 3 * dim;
    std::vector<double> dqkv(t_count * stride, 0.0);
    const size_t n = window * window;
    std::vector<double> da(n);
    for (size_t wi = 0; wi < groups.size(); ++wi) {
      const auto& idx = groups[wi];
      for (size_t h = 0; h < heads; ++h) {
        const double* a = c.attn.data() + (wi * heads + h) * n * n;
        for (size_t i = 0; i < n; ++i) {
          const double* dout = dctx.data() + idx[i] * dim + h * dh;
          double inner = 0.0;
          for (size_t j = 0; j < n; ++j) {
            const double aij = a[i * n + j];
            if (aij == 0.0) {
              da[j] = 0.0;
              continue;
            }
            const double* v = c.qkv_out.data() + idx[j] * stride + 2 * dim + h * dh;
            da[j] = dot(dout, v, dh);
            inner += aij * da[j];
            axpy(aij, dout, dqkv.data() + idx[j] * stride + 2 * dim + h * dh, dh);
          }
          const double* q = c.qkv_out.data() + idx[i] * stride + h * dh;
          double* dq = dqkv.data() + idx[i] * stride + h * dh;
          for (size_t j = 0; j < n; ++j) {
            const double aij = a[i * n + j];
            if (aij == 0.0) continue;
            const double ds = aij * (da[j] - inner) * scale;
            const double* k = c.qkv_out.data() + idx[j] * stride + dim + h * dh;
            axpy(ds, k, dq, dh);
            axpy(ds, q, dqkv.data() + idx[j] * stride + dim + h * dh, dh);
          }
        }
      }
    }
    qkv.backward(p, x, dqkv, t_count, g, &dx);
  }
};

// Pre-norm transformer block: x + attn(ln1(x)), then + mlp(ln2(.)).
struct SwinBlock {
  LayerNorm ln1;
  WindowAttention attn;
  LayerNorm ln2;
  Linear fc1;
  Linear fc2;

  struct Cache {
    LayerNorm::Cache ln1;
    std::vector<double> a;
    WindowAttention::Cache attn;
    std::vector<double> x1;
    LayerNorm::Cache ln2;
    std::vector<double> c;
    std::vector<double> h;
    std::vector<double> gelu;
  };

  static SwinBlock create(ParamSet& p, const std::string& name, size_t dim, size_t heads,
                          size_t mlp_ratio, size_t grid_h, size_t grid_w, size_t window,
                          size_t shift, Rng* rng) {
    SwinBlock b;
    b.ln1 = LayerNorm::create(p, name + ".ln1", dim);
    b.attn = WindowAttention::create(p, name + ".attn", dim, heads, grid_h, grid_w, window,
                                     shift, rng);
    b.ln2 = LayerNorm::create(p, name + ".ln2", dim);
    b.fc1 = Linear::create(p, name + ".fc1", dim, mlp_ratio * dim, rng);
    b.fc2 = Linear::create(p, name + ".fc2", mlp_ratio * dim, dim, rng);
    return b;
  }

  void forward(const ParamSet& p, std::span<const double> x, std::vector<double>& y,
               Cache& c) const {
    const size_t t = attn.tokens();
    std::vector<double> b;
    ln1.forward(p, x, t, c.a, c.ln1);
    attn.forward(p, c.a, b, c.attn);
    c.x1.resize(x.size());
    for (size_t i = 0; i < x.size(); ++i) c.x1[i] = x[i] + b[i];
    ln2.forward(p, c.x1, t, c.c, c.ln2);
    fc1.forward(p, c.c, t, c.h);
    Gelu::forward(c.h, c.gelu);
    std::vector<double> m;
    fc2.forward(p, c.gelu, t, m);
    y.resize(x.size());
    for (size_t i = 0; i < x.size(); ++i) y[i] = c.x1[i] + m[i];
  }

  void backward(const ParamSet& p, const Cache& c, std::span<const double> dy, ParamSet& g,
                std::vector<double>& dx) const {
    const size_t t = attn.tokens();
    std::vector<double> dg, dh, dc, dtmp;
    fc2.backward(p, c.gelu, dy, t, g, &dg);
    Gelu::backward(c.h, dg, dh);
    fc1.backward(p, c.c, dh, t, g, &dc);
    ln2.backward(p, c.ln2, dc, t, g, dtmp);
    std::vector<double> dx1(dy.begin(), dy.end());
    for (size_t i = 0; i < dx1.size(); ++i) dx1[i] += dtmp[i];
    std::vector<double> da;
    attn.backward(p, c.a, c.attn, dx1, g, da);
    ln1.backward(p, c.ln1, da, t, g, dtmp);
    dx = std::move(dx1);
    for (size_t i = 0; i < dx.size(); ++i) dx[i] += dtmp[i];
  }
};

}  // namespace csi_ntc::nn
