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
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "csi_ntc/errors.hpp"
#include "csi_ntc/tensor.hpp"

namespace csi_ntc {

// Family of uniform quantizers with steps base_step * 2^k, k = 0..n_levels-1.
// Bins at level k+1 are exact unions of bin pairs at level k.
struct QuantLadder {
  double base_step = 1.0 / 16.0;
  int n_levels = 6;

  void validate() const {
    if (!(base_step > 0.0) || !std::isfinite(base_step))
      throw LadderError("base step must be positive and finite");
    if (base_step < 0x1.0p-12) throw LadderError("base step below 2^-12");
    if (n_levels < 1 || n_levels > 32) throw LadderError("n_levels must be in [1, 32]");
  }

  void check_level(int k) const {
    if (k < 0 || k >= n_levels) {
      throw LadderError("level " + std::to_string(k) + " outside ladder [0, " +
                        std::to_string(n_levels) + ")");
    }
  }

  double step(int k) const {
    check_level(k);
    return std::ldexp(base_step, k);
  }

  bool operator==(const QuantLadder&) const = default;
};

struct SymbolTensor {
  Tensor3<int32_t> symbols;
  int level = 0;
  QuantLadder ladder;

  const Shape3& shape() const { return symbols.shape; }
  size_t size() const { return symbols.size(); }
  bool operator==(const SymbolTensor&) const = default;
};

// Lattice index of a scalar: floor(y / step), bins [n*step, (n+1)*step).
inline int32_t lattice_index(double y, double step) {
  if (!std::isfinite(y)) throw NumericError("cannot quantize a non-finite latent");
  const double n = std::floor(y / step);
  if (n < static_cast<double>(std::numeric_limits<int32_t>::min()) ||
      n > static_cast<double>(std::numeric_limits<int32_t>::max())) {
    throw NumericError("latent " + std::to_string(y) + " overflows the 32-bit symbol range");
  }
  return static_cast<int32_t>(n);
}

inline double reconstruction_point(int32_t n, double step) {
  return (static_cast<double>(n) + 0.5) * step;
}

inline SymbolTensor quantize(const LatentTensor& y, const QuantLadder& ladder, int level) {
  ladder.validate();
  const double step = ladder.step(level);
  SymbolTensor s{Tensor3<int32_t>(y.shape), level, ladder};
  for (size_t i = 0; i < y.data.size(); ++i) s.symbols.data[i] = lattice_index(y.data[i], step);
  return s;
}

inline LatentTensor dequantize(const SymbolTensor& s) {
  const double step = s.ladder.step(s.level);
  LatentTensor y(s.symbols.shape);
  for (size_t i = 0; i < y.data.size(); ++i)
    y.data[i] = reconstruction_point(s.symbols.data[i], step);
  return y;
}

// Move `levels` rungs up the ladder: n' = floor(n / 2^levels). Arithmetic
// right shift on signed integers is floor division in C++20.
inline SymbolTensor coarsen(const SymbolTensor& s, int levels) {
  if (levels < 1) throw LadderError("coarsen needs a positive level count");
  s.ladder.check_level(s.level + levels);
  SymbolTensor out{s.symbols, s.level + levels, s.ladder};
  for (auto& n : out.symbols.data) n >>= levels;
  return out;
}

using Histogram = std::map<int32_t, uint64_t>;

inline Histogram histogram(const SymbolTensor& s) {
  Histogram h;
  for (int32_t n : s.symbols.data) ++h[n];
  return h;
}

inline std::vector<Histogram> channel_histograms(const SymbolTensor& s) {
  std::vector<Histogram> out(s.shape().c);
  const size_t plane = s.shape().h * s.shape().w;
  for (size_t i = 0; i < s.symbols.data.size(); ++i) ++out[i / plane][s.symbols.data[i]];
  return out;
}

// Shannon entropy in bits per symbol. Counts are summed in sorted order so
// histograms that are permutations of each other give identical results.
inline double entropy_bits(const Histogram& h) {
  std::vector<uint64_t> counts;
  counts.reserve(h.size());
  uint64_t total = 0;
  for (const auto& [sym, c] : h) {
    if (c == 0) continue;
    counts.push_back(c);
    total += c;
  }
  if (total == 0) return 0.0;
  std::sort(counts.begin(), counts.end());
  double acc = 0.0;
  for (uint64_t c : counts) {
    const double cd = static_cast<double>(c);
    acc += cd * std::log2(cd);
  }
  const double n = static_cast<double>(total);
  return std::max(0.0, std::log2(n) - acc / n);
}

// Empirical entropy of the symbols in bits per symbol. With per_channel the
// histogram is pooled per latent channel and the channel entropies are
// averaged with their symbol counts as weights.
inline double empirical_entropy(const SymbolTensor& s, bool per_channel) {
  if (s.size() == 0) throw DimensionError("empirical entropy of an empty tensor");
  if (!per_channel) return entropy_bits(histogram(s));
  const auto hists = channel_histograms(s);
  const double plane = static_cast<double>(s.shape().h * s.shape().w);
  double acc = 0.0;
  for (const auto& h : hists) acc += plane * entropy_bits(h);
  return acc / static_cast<double>(s.size());
}

// Histogram at the next ladder level obtained by summing bin pairs (2n, 2n+1).
inline Histogram merge_pairs(const Histogram& h) {
  Histogram out;
  for (const auto& [n, c] : h) out[n >> 1] += c;
  return out;
}

}  // namespace csi_ntc
