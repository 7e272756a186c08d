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
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csi_ntc/channel.hpp"
#include "csi_ntc/entropy_model.hpp"
#include "csi_ntc/errors.hpp"
#include "csi_ntc/quantizer.hpp"
#include "csi_ntc/rng.hpp"
#include "csi_ntc/transform.hpp"

namespace csi_ntc {

enum class Optimizer { sgd_momentum, adam };

struct TrainConfig {
  double lambda = 1e-3;
  double learning_rate = 1e-3;
  size_t epochs = 10;
  size_t batch_size = 16;
  uint64_t seed = 1;
  double momentum = 0.9;
  double grad_clip = 0.0;  // global-norm clip, 0 disables
  Optimizer optimizer = Optimizer::sgd_momentum;
  double beta2 = 0.999;  // adam second-moment decay; momentum is beta1
  double entropy_lr_scale = 1.0;  // entropy-model step relative to learning_rate

  void validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be > 0");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (epochs == 0 || batch_size == 0) throw ConfigError("epochs and batch size must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
    if (!(grad_clip >= 0.0)) throw ConfigError("grad_clip must be >= 0");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in [0, 1)");
    if (!(entropy_lr_scale > 0.0)) throw ConfigError("entropy_lr_scale must be > 0");
  }
};

// How the latent is perturbed between analysis and synthesis.
enum class Relaxation {
  uniform_noise,  // y + U(-step0/2, step0/2): training proxy
  none,           // y unchanged
  quantize,       // dequantize(quantize(y, level)): evaluation
};

struct LossOptions {
  Relaxation relax = Relaxation::uniform_noise;
  int level = 0;                                    // quantize only
  std::vector<double>* noise_out = nullptr;         // receives y~ - y
  std::vector<LatentTensor>* input_grads = nullptr; // d loss / d input per sample
};

struct LossBreakdown {
  double loss = 0.0;
  double distortion = 0.0;  // mean squared Frobenius error per sample
  double rate_nats = 0.0;   // mean code length per sample
};

struct Gradients {
  nn::ParamSet transform;
  EntropyModelGrad entropy;

  static Gradients zeros_like(const TransformParams& t, const EntropyModelParams& e) {
    return {t.weights.zeros_like(), EntropyModelGrad(e.channels())};
  }

  void set_zero() {
    transform.set_zero();
    std::fill(entropy.loc.begin(), entropy.loc.end(), 0.0);
    std::fill(entropy.log_scale.begin(), entropy.log_scale.end(), 0.0);
  }
};

// Batch loss  mean(|x - x_hat|_F^2) + lambda * mean(rate_nats(y~))  and,
// when grads != nullptr, its exact gradient with respect to the transform
// and entropy-model parameters (accumulated into *grads).
inline LossBreakdown loss_and_gradients(std::span<const ChannelTensor> batch,
                                        const TransformParams& transform,
                                        const EntropyModelParams& entropy, double lambda,
                                        Rng& rng, Gradients* grads,
                                        const LossOptions& opt = {}) {
  if (batch.empty()) throw ConfigError("empty batch");
  if (grads != nullptr && opt.relax == Relaxation::quantize)
    throw ConfigError("quantized evaluation has no gradient");
  const Network& net = transform.network();
  if (entropy.channels() != net.latent_shape().c)
    throw DimensionError("entropy model channel count does not match latent");
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double step0 = entropy.ladder.step(0);
  const double rate_step = opt.relax == Relaxation::quantize ? entropy.ladder.step(opt.level)
                                                             : step0;

  LossBreakdown out;
  if (opt.input_grads) opt.input_grads->clear();
  const bool want_grad = grads != nullptr || opt.input_grads != nullptr;
  const Shape3 latent = net.latent_shape();
  const size_t d_in = net.input_shape().size();
  const size_t d_lat = latent.size();
  const size_t chunk = net.batchable() ? batch.size() : 1;
  Network::EncoderTrace et;
  Network::DecoderTrace dt;
  nn::ParamSet scratch;
  if (want_grad && grads == nullptr) scratch = transform.weights.zeros_like();
  nn::ParamSet& g = grads ? grads->transform : scratch;

  for (size_t first = 0; first < batch.size(); first += chunk) {
    const size_t nb = std::min(chunk, batch.size() - first);
    std::vector<double> x(nb * d_in);
    for (size_t b = 0; b < nb; ++b) {
      const ChannelTensor& h = batch[first + b];
      check_input(h, transform);
      std::copy(h.planes.data.begin(), h.planes.data.end(), x.begin() + b * d_in);
    }
    const std::vector<double> y = net.encode(transform.weights, x, want_grad ? &et : nullptr, nb);
    std::vector<double> y_tilde = y;
    switch (opt.relax) {
      case Relaxation::uniform_noise:
        for (auto& v : y_tilde) {
          const double u = (rng.uniform() - 0.5) * step0;
          v += u;
          if (opt.noise_out) opt.noise_out->push_back(u);
        }
        break;
      case Relaxation::none:
        break;
      case Relaxation::quantize:
        for (size_t b = 0; b < nb; ++b) {
          const LatentTensor yb(latent, std::vector<double>(y.begin() + b * d_lat,
                                                            y.begin() + (b + 1) * d_lat));
          const LatentTensor q = dequantize(quantize(yb, entropy.ladder, opt.level));
          std::copy(q.data.begin(), q.data.end(), y_tilde.begin() + b * d_lat);
        }
        break;
    }
    const std::vector<double> x_hat =
        net.decode(transform.weights, y_tilde, want_grad ? &dt : nullptr, nb);

    std::vector<double> dxhat(x_hat.size());
    for (size_t i = 0; i < x_hat.size(); ++i) {
      const double e = x_hat[i] - x[i];
      out.distortion += e * e * inv_b;
      dxhat[i] = 2.0 * e * inv_b;
    }
    std::vector<double> dy(want_grad ? y.size() : 0);
    for (size_t b = 0; b < nb; ++b) {
      const LatentTensor vb(latent, std::vector<double>(y_tilde.begin() + b * d_lat,
                                                        y_tilde.begin() + (b + 1) * d_lat));
      LatentTensor dv(latent);
      out.rate_nats += inv_b * rate_nats(entropy, vb, rate_step, want_grad ? &dv : nullptr,
                                         grads ? &grads->entropy : nullptr, lambda * inv_b);
      if (want_grad) std::copy(dv.data.begin(), dv.data.end(), dy.begin() + b * d_lat);
    }
    if (!want_grad) continue;

    std::vector<double> dy_dec;
    net.decode_backward(transform.weights, dt, dxhat, g, &dy_dec, nb);
    for (size_t i = 0; i < dy.size(); ++i) dy[i] += dy_dec[i];
    std::vector<double> dx;
    net.encode_backward(transform.weights, et, dy, g, opt.input_grads ? &dx : nullptr, nb);
    if (opt.input_grads) {
      // The distortion also depends on x directly.
      for (size_t i = 0; i < dx.size(); ++i) dx[i] -= dxhat[i];
      for (size_t b = 0; b < nb; ++b)
        opt.input_grads->emplace_back(
            net.input_shape(), std::vector<double>(dx.begin() + b * d_in, dx.begin() + (b + 1) * d_in));
    }
  }
  out.loss = out.distortion + lambda * out.rate_nats;
  if (!std::isfinite(out.loss)) {
    throw DivergenceError("non-finite loss (distortion " + std::to_string(out.distortion) +
                          ", rate " + std::to_string(out.rate_nats) + ")");
  }
  return out;
}

struct EpochStats {
  double loss = 0.0;
  double distortion = 0.0;
  double rate_nats = 0.0;
  bool operator==(const EpochStats&) const = default;
};

struct TrainResult {
  TransformParams transform;
  EntropyModelParams entropy;
  std::vector<EpochStats> history;
};

// Raised when training produces a non-finite loss; carries the parameters
// from the end of the last finite epoch.
class TrainingDiverged : public DivergenceError {
 public:
  TrainingDiverged(const std::string& what, TrainResult checkpoint)
      : DivergenceError(what), checkpoint_(std::move(checkpoint)) {}
  const TrainResult& checkpoint() const { return checkpoint_; }

 private:
  TrainResult checkpoint_;
};

// First-order update of all transform and entropy-model parameters: SGD
// with momentum, or Adam (bias-corrected) when configured.
class ParamUpdater {
 public:
  ParamUpdater(const TransformParams& t, const EntropyModelParams& e, const TrainConfig& cfg)
      : cfg_(cfg), m_(Gradients::zeros_like(t, e)), v_(Gradients::zeros_like(t, e)) {}

  void step(TransformParams& t, EntropyModelParams& e, const Gradients& g) {
    double scale = 1.0;
    if (cfg_.grad_clip > 0.0) {
      double sq = 0.0;
      for (const auto& tensor : g.transform.tensors())
        for (double v : tensor.data) sq += v * v;
      for (double v : g.entropy.loc) sq += v * v;
      for (double v : g.entropy.log_scale) sq += v * v;
      const double norm = std::sqrt(sq);
      if (norm > cfg_.grad_clip) scale = cfg_.grad_clip / norm;
    }
    ++steps_;
    const double b1 = cfg_.momentum, b2 = cfg_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    auto update = [&](std::vector<double>& w, std::vector<double>& m, std::vector<double>& v,
                      const std::vector<double>& grad, double lr) {
      if (cfg_.optimizer == Optimizer::sgd_momentum) {
        for (size_t i = 0; i < w.size(); ++i) {
          m[i] = b1 * m[i] + scale * grad[i];
          w[i] -= lr * m[i];
        }
        return;
      }
      const double step = lr / c1, inv_c2 = 1.0 / c2;
      for (size_t i = 0; i < w.size(); ++i) {
        const double gi = scale * grad[i];
        m[i] = b1 * m[i] + (1.0 - b1) * gi;
        v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
        w[i] -= step * m[i] / (std::sqrt(v[i] * inv_c2) + 1e-8);
      }
    };
    auto& wt = t.weights.tensors();
    for (size_t i = 0; i < wt.size(); ++i)
      update(wt[i].data, m_.transform.tensors()[i].data, v_.transform.tensors()[i].data,
             g.transform.tensors()[i].data, cfg_.learning_rate);
    const double elr = cfg_.learning_rate * cfg_.entropy_lr_scale;
    update(e.loc, m_.entropy.loc, v_.entropy.loc, g.entropy.loc, elr);
    update(e.log_scale, m_.entropy.log_scale, v_.entropy.log_scale, g.entropy.log_scale, elr);
  }

 private:
  TrainConfig cfg_;
  Gradients m_, v_;
  uint64_t steps_ = 0;
};

inline TrainResult train(std::span<const ChannelTensor> dataset, const TrainConfig& cfg,
                         TransformParams transform, EntropyModelParams entropy) {
  cfg.validate();
  entropy.validate();
  if (dataset.empty()) throw ConfigError("training set is empty");
  Rng order_rng(cfg.seed);
  Rng noise_rng = Rng::stream(cfg.seed, 1);
  ParamUpdater opt(transform, entropy, cfg);

  TrainResult result{transform, entropy, {}};
  std::vector<size_t> order(dataset.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<ChannelTensor> batch;
  Gradients g = Gradients::zeros_like(transform, entropy);
  for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    EpochStats stats;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (size_t i = start; i < end; ++i) batch.push_back(dataset[order[i]]);
      g.set_zero();
      LossBreakdown l;
      try {
        l = loss_and_gradients(batch, transform, entropy, cfg.lambda, noise_rng, &g);
      } catch (const DivergenceError& e) {
        throw TrainingDiverged("epoch " + std::to_string(epoch) + ": " + e.what(), result);
      }
      const double w = static_cast<double>(end - start) / static_cast<double>(order.size());
      stats.loss += w * l.loss;
      stats.distortion += w * l.distortion;
      stats.rate_nats += w * l.rate_nats;
      opt.step(transform, entropy, g);
    }
    bool entropy_finite = true;
    for (size_t c = 0; c < entropy.channels(); ++c)
      entropy_finite = entropy_finite && std::isfinite(entropy.loc[c]) &&
                       std::isfinite(entropy.log_scale[c]) && entropy.scale(c) > 0.0;
    if (!std::isfinite(stats.loss) || !transform.weights.all_finite() || !entropy_finite) {
      throw TrainingDiverged("epoch " + std::to_string(epoch) + " diverged", result);
    }
    result.transform = transform;
    result.entropy = entropy;
    result.history.push_back(stats);
  }
  return result;
}

}  // namespace csi_ntc
