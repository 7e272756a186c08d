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

#include <algorithm>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "csi_ntc/channel.hpp"
#include "csi_ntc/entropy_model.hpp"
#include "csi_ntc/errors.hpp"
#include "csi_ntc/nn/layers.hpp"
#include "csi_ntc/nn/params.hpp"
#include "csi_ntc/tensor.hpp"

namespace csi_ntc {

enum class Architecture : uint8_t { identity = 0, linear = 1, mlp = 2, swin_toy = 3 };

inline std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::identity: return "identity";
    case Architecture::linear: return "linear";
    case Architecture::mlp: return "mlp";
    case Architecture::swin_toy: return "swin_toy";
  }
  return "unknown";
}

inline Architecture parse_architecture(const std::string& s) {
  if (s == "identity") return Architecture::identity;
  if (s == "linear") return Architecture::linear;
  if (s == "mlp") return Architecture::mlp;
  if (s == "swin_toy" || s == "swin") return Architecture::swin_toy;
  throw ConfigError("unknown architecture \"" + s + "\"");
}

// Windowed-attention transform hyperparameters. The encoder runs the stages
// in order, the decoder runs them reversed; inside a stage blocks alternate
// between plain and half-window-shifted windows.
struct SwinConfig {
  size_t patch = 4;
  size_t heads = 2;
  std::vector<size_t> depths = {2, 2};
  size_t embed_dim = 8;
  size_t window = 4;
  size_t mlp_ratio = 2;
  size_t latent_channels = 0;  // 0: same as embed_dim

  size_t channels() const { return latent_channels == 0 ? embed_dim : latent_channels; }
  bool operator==(const SwinConfig&) const = default;
};

class Network;

struct TransformParams {
  Architecture arch = Architecture::identity;
  size_t n_delay = 0;
  size_t n_tx = 0;
  Shape3 latent;
  size_t hidden = 0;  // mlp only
  SwinConfig swin;
  Normalization scale;
  nn::ParamSet weights;

  Shape3 input_shape() const { return {2, n_delay, n_tx}; }
  const Network& network() const;

  mutable std::shared_ptr<const Network> net_;
};

// Layer layout of a transform; holds indices into TransformParams::weights.
class Network {
 public:
  struct EncoderTrace {
    std::vector<double> x;
    std::vector<double> hidden;  // mlp activation, or swin patch matrix
    std::vector<std::vector<double>> block_in;
    std::vector<nn::SwinBlock::Cache> blocks;
    std::vector<double> tokens;
  };
  using DecoderTrace = EncoderTrace;

  // Lays out the tensors of `spec` into `params`, initializing them when
  // rng is given.
  static Network build(const TransformParams& spec, nn::ParamSet& params, Rng* rng) {
    Network n;
    n.arch_ = spec.arch;
    n.input_ = spec.input_shape();
    const size_t d_in = n.input_.size();
    switch (spec.arch) {
      case Architecture::identity:
        n.latent_ = n.input_;
        break;
      case Architecture::linear:
        n.latent_ = spec.latent;
        n.enc1_ = nn::Linear::create(params, "enc.fc", d_in, n.latent_.size(), rng);
        n.dec1_ = nn::Linear::create(params, "dec.fc", n.latent_.size(), d_in, rng);
        break;
      case Architecture::mlp:
        if (spec.hidden == 0) throw ConfigError("mlp needs a hidden width");
        n.latent_ = spec.latent;
        n.enc1_ = nn::Linear::create(params, "enc.fc1", d_in, spec.hidden, rng);
        n.enc2_ = nn::Linear::create(params, "enc.fc2", spec.hidden, n.latent_.size(), rng);
        n.dec1_ = nn::Linear::create(params, "dec.fc1", n.latent_.size(), spec.hidden, rng);
        n.dec2_ = nn::Linear::create(params, "dec.fc2", spec.hidden, d_in, rng);
        break;
      case Architecture::swin_toy:
        n.build_swin(spec, params, rng);
        break;
    }
    if (n.latent_.size() == 0) throw ConfigError("latent shape must be nonempty");
    return n;
  }

  Architecture arch() const { return arch_; }
  const Shape3& input_shape() const { return input_; }
  const Shape3& latent_shape() const { return latent_; }
  size_t grid_h() const { return grid_h_; }
  size_t grid_w() const { return grid_w_; }

  // Dense architectures accept `batch` samples stacked row-wise; swin_toy
  // takes one sample at a time.
  bool batchable() const { return arch_ != Architecture::swin_toy; }

  std::vector<double> encode(const nn::ParamSet& p, std::span<const double> x,
                             EncoderTrace* trace = nullptr, size_t batch = 1) const {
    check_batch(batch);
    EncoderTrace local;
    EncoderTrace& t = trace ? *trace : local;
    t.x.assign(x.begin(), x.end());
    std::vector<double> y;
    switch (arch_) {
      case Architecture::identity:
        y = t.x;
        break;
      case Architecture::linear:
        enc1_.forward(p, t.x, batch, y);
        break;
      case Architecture::mlp: {
        std::vector<double> pre;
        enc1_.forward(p, t.x, batch, pre);
        nn::Tanh::forward(pre, t.hidden);
        enc2_.forward(p, t.hidden, batch, y);
        break;
      }
      case Architecture::swin_toy: {
        t.hidden = patchify(t.x);
        std::vector<double> tok;
        embed_.forward(p, t.hidden, tokens(), tok);
        run_blocks(p, enc_blocks_, tok, t);
        t.tokens = tok;
        std::vector<double> out;
        head_.forward(p, tok, tokens(), out);
        y = tokens_to_latent(out, latent_.c);
        break;
      }
    }
    return y;
  }

  // Accumulates parameter gradients; writes the input gradient when dx != nullptr.
  void encode_backward(const nn::ParamSet& p, const EncoderTrace& t, std::span<const double> dy,
                       nn::ParamSet& g, std::vector<double>* dx, size_t batch = 1) const {
    check_batch(batch);
    switch (arch_) {
      case Architecture::identity:
        if (dx) dx->assign(dy.begin(), dy.end());
        break;
      case Architecture::linear:
        enc1_.backward(p, t.x, dy, batch, g, dx);
        break;
      case Architecture::mlp: {
        std::vector<double> dh, dpre;
        enc2_.backward(p, t.hidden, dy, batch, g, &dh);
        nn::Tanh::backward(t.hidden, dh, dpre);
        enc1_.backward(p, t.x, dpre, batch, g, dx);
        break;
      }
      case Architecture::swin_toy: {
        const std::vector<double> dout = latent_to_tokens(dy, latent_.c);
        std::vector<double> dtok;
        head_.backward(p, t.tokens, dout, tokens(), g, &dtok);
        backprop_blocks(p, enc_blocks_, t, dtok, g);
        std::vector<double> dpatch;
        embed_.backward(p, t.hidden, dtok, tokens(), g, dx ? &dpatch : nullptr);
        if (dx) *dx = unpatchify(dpatch);
        break;
      }
    }
  }

  std::vector<double> decode(const nn::ParamSet& p, std::span<const double> y,
                             DecoderTrace* trace = nullptr, size_t batch = 1) const {
    check_batch(batch);
    DecoderTrace local;
    DecoderTrace& t = trace ? *trace : local;
    t.x.assign(y.begin(), y.end());
    std::vector<double> out;
    switch (arch_) {
      case Architecture::identity:
        out = t.x;
        break;
      case Architecture::linear:
        dec1_.forward(p, t.x, batch, out);
        break;
      case Architecture::mlp: {
        std::vector<double> pre;
        dec1_.forward(p, t.x, batch, pre);
        nn::Tanh::forward(pre, t.hidden);
        dec2_.forward(p, t.hidden, batch, out);
        break;
      }
      case Architecture::swin_toy: {
        t.hidden = latent_to_tokens(t.x, latent_.c);
        std::vector<double> tok;
        unembed_in_.forward(p, t.hidden, tokens(), tok);
        run_blocks(p, dec_blocks_, tok, t);
        t.tokens = tok;
        std::vector<double> patches;
        unembed_out_.forward(p, tok, tokens(), patches);
        out = unpatchify(patches);
        break;
      }
    }
    return out;
  }

  void decode_backward(const nn::ParamSet& p, const DecoderTrace& t, std::span<const double> dout,
                       nn::ParamSet& g, std::vector<double>* dy, size_t batch = 1) const {
    check_batch(batch);
    switch (arch_) {
      case Architecture::identity:
        if (dy) dy->assign(dout.begin(), dout.end());
        break;
      case Architecture::linear:
        dec1_.backward(p, t.x, dout, batch, g, dy);
        break;
      case Architecture::mlp: {
        std::vector<double> dh, dpre;
        dec2_.backward(p, t.hidden, dout, batch, g, &dh);
        nn::Tanh::backward(t.hidden, dh, dpre);
        dec1_.backward(p, t.x, dpre, batch, g, dy);
        break;
      }
      case Architecture::swin_toy: {
        const std::vector<double> dpatch = patchify(dout);
        std::vector<double> dtok;
        unembed_out_.backward(p, t.tokens, dpatch, tokens(), g, &dtok);
        backprop_blocks(p, dec_blocks_, t, dtok, g);
        std::vector<double> din;
        unembed_in_.backward(p, t.hidden, dtok, tokens(), g, &din);
        if (dy) *dy = tokens_to_latent(din, latent_.c);
        break;
      }
    }
  }

 private:
  void check_batch(size_t batch) const {
    if (batch == 0 || (batch > 1 && !batchable()))
      throw ConfigError("batch of " + std::to_string(batch) + " not supported by " + to_string(arch_));
  }

  void build_swin(const TransformParams& spec, nn::ParamSet& params, Rng* rng) {
    const SwinConfig& s = spec.swin;
    if (s.patch == 0 || s.window == 0 || s.heads == 0 || s.embed_dim == 0 || s.mlp_ratio == 0)
      throw ConfigError("swin sizes must be positive");
    if (spec.n_delay % s.patch != 0 || spec.n_tx % s.patch != 0)
      throw ConfigError("input dims must be divisible by the patch size");
    patch_ = s.patch;
    grid_h_ = spec.n_delay / s.patch;
    grid_w_ = spec.n_tx / s.patch;
    if (grid_h_ % s.window != 0 || grid_w_ % s.window != 0)
      throw ConfigError("patch grid " + std::to_string(grid_h_) + "x" + std::to_string(grid_w_) +
                        " must be divisible by the window " + std::to_string(s.window));
    if (s.embed_dim % s.heads != 0) throw ConfigError("embed_dim must be divisible by heads");
    const size_t d = s.embed_dim;
    const size_t c = s.channels();
    const size_t patch_len = 2 * s.patch * s.patch;
    latent_ = {c, grid_h_, grid_w_};
    const bool can_shift = std::min(grid_h_, grid_w_) > s.window;

    embed_ = nn::Linear::create(params, "enc.embed", patch_len, d, rng);
    size_t b = 0;
    for (size_t stage = 0; stage < s.depths.size(); ++stage) {
      for (size_t j = 0; j < s.depths[stage]; ++j, ++b) {
        const size_t shift = (j % 2 == 1 && can_shift) ? s.window / 2 : 0;
        enc_blocks_.push_back(nn::SwinBlock::create(params, "enc.block" + std::to_string(b), d,
                                                    s.heads, s.mlp_ratio, grid_h_, grid_w_,
                                                    s.window, shift, rng));
      }
    }
    head_ = nn::Linear::create(params, "enc.head", d, c, rng);

    unembed_in_ = nn::Linear::create(params, "dec.embed", c, d, rng);
    b = 0;
    for (size_t stage = s.depths.size(); stage-- > 0;) {
      for (size_t j = 0; j < s.depths[stage]; ++j, ++b) {
        const size_t shift = (j % 2 == 1 && can_shift) ? s.window / 2 : 0;
        dec_blocks_.push_back(nn::SwinBlock::create(params, "dec.block" + std::to_string(b), d,
                                                    s.heads, s.mlp_ratio, grid_h_, grid_w_,
                                                    s.window, shift, rng));
      }
    }
    unembed_out_ = nn::Linear::create(params, "dec.head", d, patch_len, rng);
  }

  size_t tokens() const { return grid_h_ * grid_w_; }

  void run_blocks(const nn::ParamSet& p, const std::vector<nn::SwinBlock>& blocks,
                  std::vector<double>& tok, EncoderTrace& t) const {
    t.block_in.resize(blocks.size());
    t.blocks.resize(blocks.size());
    for (size_t i = 0; i < blocks.size(); ++i) {
      t.block_in[i] = tok;
      blocks[i].forward(p, t.block_in[i], tok, t.blocks[i]);
    }
  }

  void backprop_blocks(const nn::ParamSet& p, const std::vector<nn::SwinBlock>& blocks,
                       const EncoderTrace& t, std::vector<double>& dtok, nn::ParamSet& g) const {
    std::vector<double> dprev;
    for (size_t i = blocks.size(); i-- > 0;) {
      blocks[i].backward(p, t.blocks[i], dtok, g, dprev);
      dtok.swap(dprev);
    }
  }

  // 2 x H x W planes -> (grid tokens) x (2 * P * P) patch rows.
  std::vector<double> patchify(std::span<const double> x) const {
    const size_t pl = 2 * patch_ * patch_;
    const size_t w = input_.w;
    std::vector<double> out(tokens() * pl);
    for (size_t gr = 0; gr < grid_h_; ++gr)
      for (size_t gc = 0; gc < grid_w_; ++gc)
        for (size_t ch = 0; ch < 2; ++ch)
          for (size_t pr = 0; pr < patch_; ++pr)
            for (size_t pc = 0; pc < patch_; ++pc)
              out[(gr * grid_w_ + gc) * pl + (ch * patch_ + pr) * patch_ + pc] =
                  x[(ch * input_.h + gr * patch_ + pr) * w + gc * patch_ + pc];
    return out;
  }

  std::vector<double> unpatchify(std::span<const double> rows) const {
    const size_t pl = 2 * patch_ * patch_;
    const size_t w = input_.w;
    std::vector<double> out(input_.size());
    for (size_t gr = 0; gr < grid_h_; ++gr)
      for (size_t gc = 0; gc < grid_w_; ++gc)
        for (size_t ch = 0; ch < 2; ++ch)
          for (size_t pr = 0; pr < patch_; ++pr)
            for (size_t pc = 0; pc < patch_; ++pc)
              out[(ch * input_.h + gr * patch_ + pr) * w + gc * patch_ + pc] =
                  rows[(gr * grid_w_ + gc) * pl + (ch * patch_ + pr) * patch_ + pc];
    return out;
  }

  // tokens x C  <->  C x grid_h x grid_w
  std::vector<double> tokens_to_latent(std::span<const double> tok, size_t c) const {
    std::vector<double> out(tok.size());
    const size_t n = tokens();
    for (size_t t = 0; t < n; ++t)
      for (size_t k = 0; k < c; ++k) out[k * n + t] = tok[t * c + k];
    return out;
  }

  std::vector<double> latent_to_tokens(std::span<const double> lat, size_t c) const {
    std::vector<double> out(lat.size());
    const size_t n = tokens();
    for (size_t t = 0; t < n; ++t)
      for (size_t k = 0; k < c; ++k) out[t * c + k] = lat[k * n + t];
    return out;
  }

  Architecture arch_ = Architecture::identity;
  Shape3 input_;
  Shape3 latent_;
  nn::Linear enc1_, enc2_, dec1_, dec2_;
  size_t patch_ = 1, grid_h_ = 0, grid_w_ = 0;
  nn::Linear embed_, head_, unembed_in_, unembed_out_;
  std::vector<nn::SwinBlock> enc_blocks_, dec_blocks_;
};

inline const Network& TransformParams::network() const {
  if (!net_) {
    nn::ParamSet layout;
    auto net = std::make_shared<Network>(Network::build(*this, layout, nullptr));
    const auto& want = layout.tensors();
    const auto& have = weights.tensors();
    bool ok = want.size() == have.size();
    for (size_t i = 0; ok && i < want.size(); ++i)
      ok = want[i].name == have[i].name && want[i].dims == have[i].dims &&
           want[i].data.size() == have[i].data.size();
    if (!ok) throw FormatError("weights do not match the " + to_string(arch) + " layout");
    net_ = std::move(net);
  }
  return *net_;
}

struct TransformSpec {
  Architecture arch = Architecture::swin_toy;
  size_t n_delay = 32;
  size_t n_tx = 32;
  Shape3 latent{64, 1, 1};  // linear / mlp
  size_t hidden = 128;      // mlp
  SwinConfig swin;
  bool identity_init = false;  // linear: start from W = I (truncated)
};

inline TransformParams make_transform(const TransformSpec& spec, uint64_t seed,
                                      Normalization scale = {}) {
  TransformParams p;
  p.arch = spec.arch;
  p.n_delay = spec.n_delay;
  p.n_tx = spec.n_tx;
  p.latent = spec.latent;
  p.hidden = spec.hidden;
  p.swin = spec.swin;
  p.scale = scale;
  if (spec.n_delay == 0 || spec.n_tx == 0) throw ConfigError("input shape must be nonempty");
  Rng rng(seed);
  auto net = std::make_shared<Network>(Network::build(p, p.weights, &rng));
  p.latent = net->latent_shape();
  if (spec.identity_init && spec.arch == Architecture::linear) {
    for (const char* name : {"enc.fc.bias", "dec.fc.bias"}) {
      auto& b = p.weights.tensors()[p.weights.find(name)].data;
      std::fill(b.begin(), b.end(), 0.0);
    }
    for (const char* name : {"enc.fc.weight", "dec.fc.weight"}) {
      auto& t = p.weights.tensors()[p.weights.find(name)];
      std::fill(t.data.begin(), t.data.end(), 0.0);
      const size_t rows = t.dims[0], cols = t.dims[1];
      for (size_t i = 0; i < std::min(rows, cols); ++i) t.data[i * cols + i] = 1.0;
    }
  }
  p.net_ = std::move(net);
  return p;
}

inline void check_input(const ChannelTensor& h, const TransformParams& params) {
  if (h.planes.shape != params.input_shape()) {
    throw DimensionError("transform expects input " + params.input_shape().str() + ", got " +
                         h.planes.shape.str());
  }
}

// Analysis transform f_enc.
inline LatentTensor analyze(const ChannelTensor& h, const TransformParams& params) {
  check_input(h, params);
  const Network& net = params.network();
  return LatentTensor(net.latent_shape(), net.encode(params.weights, h.planes.data));
}

// Synthesis transform f_dec; the output carries the model's normalization.
inline ChannelTensor synthesize(const LatentTensor& y, const TransformParams& params) {
  const Network& net = params.network();
  if (y.shape != net.latent_shape()) {
    throw DimensionError("transform expects latent " + net.latent_shape().str() + ", got " +
                         y.shape.str());
  }
  return ChannelTensor{Tensor3<double>(net.input_shape(), net.decode(params.weights, y.data)),
                       params.scale};
}

// Trainable scalars in the transform alone.
inline size_t count_parameters(const TransformParams& params) {
  return params.weights.scalar_count();
}

// Trainable scalars in transform plus entropy model.
inline size_t count_parameters(const TransformParams& params, const EntropyModelParams& em) {
  return params.weights.scalar_count() + em.loc.size() + em.log_scale.size();
}

}  // namespace csi_ntc
