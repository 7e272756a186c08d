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

// Invariant checks shared by the acceptance binary and `ntc selftest`. Each
// returns a verdict and a one-line summary of what was measured.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <utility>
#include <vector>

#include "csi_ntc/channel.hpp"
#include "csi_ntc/coder.hpp"
#include "csi_ntc/entropy_model.hpp"
#include "csi_ntc/quantizer.hpp"
#include "csi_ntc/training.hpp"
#include "csi_ntc/transform.hpp"

namespace csi_ntc::selftest {

struct Result {
  bool pass = false;
  std::string detail;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

}  // namespace detail

using detail::Clock;
using detail::fmt;
using detail::seconds_since;

inline Result nesting_law() {
  const auto t0 = Clock::now();
  const QuantLadder ladder{1.0 / 64, 6};
  Rng rng(101);
  LatentTensor y(Shape3{1, 1, 100000});
  for (auto& v : y.data) v = std::ldexp(rng.normal(), static_cast<int>(rng.below(12)) - 6);
  size_t violations = 0, pairs = 0;
  for (int k = 0; k < ladder.n_levels; ++k) {
    const SymbolTensor fine = quantize(y, ladder, k);
    for (int j = 1; k + j < ladder.n_levels; ++j, ++pairs) {
      const SymbolTensor a = coarsen(fine, j);
      const SymbolTensor b = quantize(y, ladder, k + j);
      for (size_t i = 0; i < a.symbols.data.size(); ++i)
        violations += a.symbols.data[i] != b.symbols.data[i];
    }
  }
  const double secs = seconds_since(t0);
  return {violations == 0 && secs < 5.0,
          fmt("%zu violations over 1e5 values x %zu (k,j) pairs, %.2f s (limit 5 s)", violations,
              pairs, secs)};
}

inline Result entropy_chain() {
  const QuantLadder ladder{0.02, 6};
  Rng rng(202);
  size_t violations = 0, merge_mismatch = 0;
  for (int dist = 0; dist < 20; ++dist) {
    LatentTensor y(Shape3{4, 40, 40});
    const double scale = 0.03 + 0.04 * static_cast<double>(dist % 5);
    for (size_t i = 0; i < y.data.size(); ++i) {
      switch (dist % 4) {
        case 0: y.data[i] = scale * rng.normal(); break;
        case 1: {
          const double u = rng.uniform() - 0.5;
          y.data[i] = -scale * std::copysign(std::log(1.0 - 2.0 * std::abs(u)), u);
          break;
        }
        case 2: y.data[i] = (rng.uniform() < 0.3 ? 0.5 : -0.2) + 0.5 * scale * rng.normal(); break;
        default: y.data[i] = (rng.uniform() < 0.5 ? 3 * scale : -scale) + scale * rng.normal();
      }
    }
    double prev = INFINITY;
    Histogram prev_hist;
    for (int k = 0; k < ladder.n_levels; ++k) {
      const SymbolTensor s = quantize(y, ladder, k);
      const double h = empirical_entropy(s, false);
      violations += h > prev;
      const Histogram hist = histogram(s);
      if (k > 0) merge_mismatch += hist != merge_pairs(prev_hist);
      prev = h;
      prev_hist = hist;
    }
  }
  return {violations == 0 && merge_mismatch == 0,
          fmt("%zu increases, %zu histogram aggregation mismatches over 20 distributions x 6 "
              "levels",
              violations, merge_mismatch)};
}

inline EntropyModelParams random_model(Rng& rng, size_t channels, const QuantLadder& ladder) {
  EntropyModelParams e = EntropyModelParams::initial(channels, ladder);
  for (size_t c = 0; c < channels; ++c) {
    e.loc[c] = rng.uniform(-0.5, 0.5);
    e.log_scale[c] = std::log(ladder.base_step * rng.uniform(0.2, 40.0));
  }
  return e;
}

// Symbols drawn from the fixed-point tables themselves.
inline SymbolTensor draw_symbols(Rng& rng, const PmfTableSet& tables, Shape3 shape,
                          const QuantLadder& ladder) {
  SymbolTensor s{Tensor3<int32_t>(shape), tables.level, ladder};
  const size_t plane = shape.h * shape.w;
  for (size_t i = 0; i < s.symbols.data.size(); ++i) {
    const PmfTable& t = tables.channels[i / plane];
    const uint32_t r = static_cast<uint32_t>(rng.below(kPmfTotal));
    const auto it = std::upper_bound(t.cum.begin(), t.cum.end(), r);
    s.symbols.data[i] = t.n_min + static_cast<int32_t>(it - t.cum.begin()) - 1;
  }
  return s;
}

inline Result lossless_coding() {
  const auto t0 = Clock::now();
  Rng rng(303);
  const QuantLadder ladder{1.0 / 32, 6};
  size_t tensors = 0, mismatches = 0, undetected = 0, mutations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Shape3 shape{1 + rng.below(6), 1 + rng.below(8), 1 + rng.below(8)};
    const EntropyModelParams e = random_model(rng, shape.c, ladder);
    for (int k = 0; k < ladder.n_levels; ++k, ++tensors) {
      const PmfTableSet tables = build_pmf_tables(e, k);
      const SymbolTensor s = draw_symbols(rng, tables, shape, ladder);
      const std::vector<uint8_t> bytes = encode_symbols(s, tables).serialize();
      mismatches += decode_symbols(Payload::parse(bytes, shape.size()), tables, shape, ladder) != s;
      std::vector<uint8_t> bad = bytes;
      bad[rng.below(bad.size())] ^= static_cast<uint8_t>(1 + rng.below(255));
      ++mutations;
      try {
        const SymbolTensor d =
            decode_symbols(Payload::parse(bad, shape.size()), tables, shape, ladder);
        ++undetected;
        (void)d;
      } catch (const Error&) {
      }
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && undetected == 0 && secs < 30.0,
          fmt("%zu/%zu roundtrip mismatches, %zu/%zu mutations undetected, %.1f s (limit 30 s)",
              mismatches, tensors, undetected, mutations, secs)};
}

struct RateCheck {
  double lower = 0.0, coded = 0.0, upper = 0.0, ideal = 0.0;
  bool ok() const {
    return coded >= lower && coded <= upper && coded >= ideal - 1e-6 &&
           coded <= ideal * 1.001 + 32.0;
  }
};

// 1e5 logistic latents with scale s/step_k drawn from [lo, hi], coded at
// level k.
inline RateCheck rate_check(Rng& rng, const QuantLadder& ladder, int k, double lo, double hi) {
  const Shape3 shape{10, 100, 100};
  EntropyModelParams e = EntropyModelParams::initial(shape.c, ladder);
  for (size_t c = 0; c < shape.c; ++c) {
    e.loc[c] = rng.uniform(-0.5, 0.5) * ladder.step(k);
    e.log_scale[c] = std::log(ladder.step(k) * rng.uniform(lo, hi));
  }
  const PmfTableSet tables = build_pmf_tables(e, k);
  LatentTensor y(shape);
  const size_t plane = shape.h * shape.w;
  for (size_t i = 0; i < y.data.size(); ++i) {
    const size_t c = i / plane;
    const double u = rng.uniform(1e-12, 1.0 - 1e-12);
    y.data[i] = e.loc[c] + e.scale(c) * std::log(u / (1.0 - u));
  }
  SymbolTensor s = quantize(y, ladder, k);
  fold_to_tables(s, tables);
  RateCheck r;
  r.coded = static_cast<double>(encode_symbols(s, tables).coded_bits());
  r.lower = static_cast<double>(s.size()) * empirical_entropy(s, true);
  r.upper = model_cross_entropy(e, s) * 1.001 + 32.0;
  // Ideal length recomputed straight from the integer frequencies.
  for (size_t i = 0; i < s.symbols.data.size(); ++i) {
    const PmfTable& t = tables.channels[i / plane];
    r.ideal -= std::log2(t.freq[static_cast<size_t>(s.symbols.data[i] - t.n_min)] /
                         static_cast<double>(kPmfTotal));
  }
  return r;
}

inline Result rate_bounds() {
  Rng rng(404);
  const QuantLadder ladder{1.0 / 32, 6};
  bool ok = true;
  std::string detail;
  for (int k = 0; k < ladder.n_levels; ++k) {
    const RateCheck r = rate_check(rng, ladder, k, 0.25, 4.0);
    ok = ok && r.ok();
    if (!r.ok() || k == 0)
      detail = fmt("level %d: entropy %.0f <= coded %.0f <= bound %.0f (table ideal %.0f)", k,
                   r.lower, r.coded, r.upper, r.ideal);
  }
  // Wide models lose more to 16-bit table rounding than the bound allows;
  // reported, not gated.
  const RateCheck wide = rate_check(rng, ladder, 0, 16.0, 40.0);
  return {ok, detail + fmt(", 6 levels x 1e5 symbols, s/step in [0.25, 4]; s/step in [16, 40]: "
                           "coded/model %.4f",
                           wide.coded / (wide.upper - 32.0) * 1.001)};
}

// ---------------------------------------------------------------------------

inline Result gradient_correctness() {
  const auto t0 = Clock::now();
  ChannelConfig cc;
  cc.n_tx = 8;
  cc.n_subcarriers = 64;
  cc.n_delay = 8;
  cc.n_paths = 4;
  cc.seed = 5;
  const auto data = generate_dataset(cc, 3);
  const double lambda = 0.05;
  std::string detail;
  bool ok = true;
  for (Architecture arch : {Architecture::identity, Architecture::linear, Architecture::mlp,
                            Architecture::swin_toy}) {
    TransformSpec spec;
    spec.arch = arch;
    spec.n_delay = 8;
    spec.n_tx = 8;
    spec.latent = {6, 1, 1};
    spec.hidden = 10;
    spec.swin.patch = 2;
    spec.swin.window = 2;
    spec.swin.embed_dim = 4;
    spec.swin.heads = 2;
    TransformParams t = make_transform(spec, 11, data.front().scale);
    Rng jitter(12);
    for (auto& nt : t.weights.tensors())
      if (nt.name.ends_with(".beta") || nt.name.ends_with(".gamma"))
        for (auto& v : nt.data) v += 0.2 * jitter.normal();
    const QuantLadder ladder{0.05, 6};
    EntropyModelParams e = random_model(jitter, t.network().latent_shape().c, ladder);

    Gradients g = Gradients::zeros_like(t, e);
    std::vector<LatentTensor> dx;
    {
      Rng rng(13);
      LossOptions opt;
      opt.input_grads = &dx;
      loss_and_gradients(data, t, e, lambda, rng, &g, opt);
    }
    std::vector<ChannelTensor> probe = data;
    auto loss = [&] {
      Rng rng(13);
      return loss_and_gradients(probe, t, e, lambda, rng, nullptr).loss;
    };
    const double eps = 1e-5;
    double worst = 0.0;
    size_t checked = 0;
    auto at = [&](double& slot, double v) {
      slot = v;
      return loss();
    };
    auto check = [&](double& slot, double analytic) {
      const double saved = slot;
      // Fourth-order central difference.
      const double numeric = (8.0 * (at(slot, saved + eps) - at(slot, saved - eps)) -
                              (at(slot, saved + 2 * eps) - at(slot, saved - 2 * eps))) /
                             (12.0 * eps);
      slot = saved;
      // Relative error, with an absolute floor of 1e-7 for near-zero partials.
      const double err = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), 1e-3});
      if (err > worst && std::getenv("CSI_NTC_GRAD_DEBUG"))
        std::printf("  %s probe %zu analytic %.9g numeric %.9g\n", to_string(arch).c_str(),
                    checked, analytic, numeric);
      worst = std::max(worst, err);
      ++checked;
    };
    for (size_t k = 0; k < t.weights.tensors().size(); ++k)
      for (size_t i = 0; i < t.weights[k].size(); ++i) check(t.weights[k][i], g.transform[k][i]);
    for (size_t c = 0; c < e.channels(); ++c) {
      check(e.loc[c], g.entropy.loc[c]);
      check(e.log_scale[c], g.entropy.log_scale[c]);
    }
    for (size_t b = 0; b < probe.size(); ++b)
      for (size_t i = 0; i < probe[b].planes.data.size(); ++i)
        check(probe[b].planes.data[i], dx[b].data[i]);
    ok = ok && worst <= 1e-4;
    detail += fmt("%s %.1e/%zu ", to_string(arch).c_str(), worst, checked);
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 60.0;
  return {ok, "max rel err/probes: " + detail + fmt("(limit 1e-4, %.1f s of 60 s)", secs)};
}

inline Result parameter_ratio() {
  TransformSpec small;
  small.arch = Architecture::swin_toy;
  TransformSpec large = small;
  large.swin.embed_dim = 4 * small.swin.embed_dim;
  const size_t a = count_parameters(make_transform(small, 1));
  const size_t b = count_parameters(make_transform(large, 1));
  const double ratio = static_cast<double>(b) / static_cast<double>(a);
  return {ratio >= 10.0 && ratio <= 16.0,
          fmt("d=%zu: %zu, d=%zu: %zu, ratio %.2f (range [10, 16])", small.swin.embed_dim, a,
              large.swin.embed_dim, b, ratio)};
}


using Check = std::pair<const char*, Result (*)()>;

inline std::vector<Check> invariant_checks() {
  return {{"nesting_law", nesting_law},         {"entropy_chain", entropy_chain},
          {"lossless_coding", lossless_coding}, {"rate_bounds", rate_bounds},
          {"gradient_correctness", gradient_correctness}, {"parameter_ratio", parameter_ratio}};
}

}  // namespace csi_ntc::selftest
