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
#include <numeric>
#include <string>
#include <vector>

#include "csi_ntc/errors.hpp"
#include "csi_ntc/quantizer.hpp"
#include "csi_ntc/tensor.hpp"

namespace csi_ntc {

// Factorized prior: every entry of latent channel c is modelled as an
// independent logistic variable with location loc[c] and scale
// exp(log_scale[c]). Parameters are shared over spatial positions.
struct EntropyModelParams {
  std::vector<double> loc;
  std::vector<double> log_scale;
  QuantLadder ladder;
  uint32_t version = 1;

  static EntropyModelParams initial(size_t channels, const QuantLadder& ladder) {
    return {std::vector<double>(channels, 0.0), std::vector<double>(channels, 0.0), ladder, 1};
  }

  size_t channels() const { return loc.size(); }
  double scale(size_t c) const { return std::exp(log_scale[c]); }

  void validate() const {
    if (loc.size() != log_scale.size()) throw ConfigError("entropy model size mismatch");
    for (size_t c = 0; c < loc.size(); ++c) {
      if (!std::isfinite(loc[c]) || !std::isfinite(log_scale[c]) || !(scale(c) > 0.0))
        throw NumericError("entropy model channel " + std::to_string(c) + " not finite");
    }
    ladder.validate();
  }
  bool operator==(const EntropyModelParams&) const = default;
};

// Gradient of a scalar objective with respect to the entropy model.
struct EntropyModelGrad {
  std::vector<double> loc;
  std::vector<double> log_scale;

  explicit EntropyModelGrad(size_t channels = 0)
      : loc(channels, 0.0), log_scale(channels, 0.0) {}
};

namespace logistic {

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(sigmoid(z)) without overflow.
inline double log_sigmoid(double z) {
  if (z >= 0.0) return -std::log1p(std::exp(-z));
  return z - std::log1p(std::exp(z));
}

// log of the density sigmoid'(z) = sigmoid(z) * sigmoid(-z).
inline double log_density(double z) { return log_sigmoid(z) + log_sigmoid(-z); }

// log(sigmoid(hi) - sigmoid(lo)) for lo < hi, accurate in both tails.
inline double log_interval_mass(double lo, double hi) {
  if (lo > 0.0) {
    // Upper tail: mass = sigmoid(-lo) - sigmoid(-hi).
    const double a = log_sigmoid(-lo);
    const double b = log_sigmoid(-hi);
    return a + std::log1p(-std::exp(b - a));
  }
  if (hi <= 0.0) {
    const double a = log_sigmoid(hi);
    const double b = log_sigmoid(lo);
    return a + std::log1p(-std::exp(b - a));
  }
  return std::log(sigmoid(hi) - sigmoid(lo));
}

// Standardized quantile: z with sigmoid(z) = p.
inline double logit(double p) { return std::log(p) - std::log1p(-p); }

}  // namespace logistic

inline void check_channel(const EntropyModelParams& params, size_t c) {
  if (c >= params.channels()) {
    throw DimensionError("channel " + std::to_string(c) + " outside entropy model with " +
                         std::to_string(params.channels()) + " channels");
  }
}

// Natural log of the model mass of bin [n*step, (n+1)*step) on channel c.
inline double log_bin_probability(const EntropyModelParams& params, size_t c, int32_t n,
                                  int level) {
  check_channel(params, c);
  const double step = params.ladder.step(level);
  const double s = params.scale(c);
  const double lo = (static_cast<double>(n) * step - params.loc[c]) / s;
  const double hi = ((static_cast<double>(n) + 1.0) * step - params.loc[c]) / s;
  return logistic::log_interval_mass(lo, hi);
}

inline double bin_probability(const EntropyModelParams& params, size_t c, int32_t n, int level) {
  return std::exp(log_bin_probability(params, c, n, level));
}

// Code length in nats of the interval [v - step/2, v + step/2) for each entry
// of `v`, summed. With v on a reconstruction point this is exactly
// -log bin_probability of that bin. Gradients are accumulated into dv and
// dparams when non-null (dv must be shaped like v).
inline double rate_nats(const EntropyModelParams& params, const LatentTensor& v, double step,
                        LatentTensor* dv = nullptr, EntropyModelGrad* dparams = nullptr,
                        double grad_scale = 1.0) {
  if (v.shape.c != params.channels()) {
    throw DimensionError("latent has " + std::to_string(v.shape.c) +
                         " channels, entropy model has " + std::to_string(params.channels()));
  }
  const size_t plane = v.shape.h * v.shape.w;
  const double half = 0.5 * step;
  double total = 0.0;
  for (size_t c = 0; c < v.shape.c; ++c) {
    const double mu = params.loc[c];
    const double s = params.scale(c);
    for (size_t i = c * plane; i < (c + 1) * plane; ++i) {
      const double x = v.data[i];
      if (!std::isfinite(x)) throw NumericError("non-finite latent in rate computation");
      const double lo = (x - half - mu) / s;
      const double hi = (x + half - mu) / s;
      const double log_p = logistic::log_interval_mass(lo, hi);
      total -= log_p;
      if (dv == nullptr && dparams == nullptr) continue;
      // d(log p)/d(lo) = -A, d(log p)/d(hi) = B.
      const double a = std::exp(logistic::log_density(lo) - log_p);
      const double b = std::exp(logistic::log_density(hi) - log_p);
      const double dlogp_dx = (b - a) / s;
      if (dv != nullptr) dv->data[i] -= grad_scale * dlogp_dx;
      if (dparams != nullptr) {
        dparams->loc[c] += grad_scale * dlogp_dx;
        dparams->log_scale[c] -= grad_scale * (a * lo - b * hi);
      }
    }
  }
  return total;
}

inline double rate_nats(const EntropyModelParams& params, const LatentTensor& v, int level) {
  return rate_nats(params, v, params.ladder.step(level));
}

// Ideal code length of the symbols under the analytic model, in bits.
inline double model_cross_entropy(const EntropyModelParams& params, const SymbolTensor& s) {
  if (s.shape().c != params.channels())
    throw DimensionError("symbol channels do not match entropy model");
  const size_t plane = s.shape().h * s.shape().w;
  double nats = 0.0;
  for (size_t i = 0; i < s.symbols.data.size(); ++i)
    nats -= log_bin_probability(params, i / plane, s.symbols.data[i], s.level);
  return nats / std::log(2.0);
}

// ---------------------------------------------------------------------------
// Fixed-point tables for the entropy coder.

inline constexpr int kPmfPrecisionBits = 16;
inline constexpr uint32_t kPmfTotal = 1u << kPmfPrecisionBits;
inline constexpr double kDefaultTailMass = 1e-9;

struct PmfTable {
  int32_t n_min = 0;
  int32_t n_max = 0;
  std::vector<uint32_t> freq;  // freq[n - n_min]
  std::vector<uint32_t> cum;   // cum[i] = sum of freq[0..i), cum.back() == kPmfTotal

  size_t size() const { return freq.size(); }
  bool contains(int32_t n) const { return n >= n_min && n <= n_max; }
  uint32_t frequency(int32_t n) const { return freq[static_cast<size_t>(n - n_min)]; }
  bool operator==(const PmfTable&) const = default;
};

struct PmfTableSet {
  int level = 0;
  std::vector<PmfTable> channels;
  bool operator==(const PmfTableSet&) const = default;
};

// Scale probabilities (summing to 1) to integers summing to kPmfTotal, each
// at least 1, by largest-remainder rounding.
inline std::vector<uint32_t> quantize_pmf(const std::vector<double>& p) {
  const size_t n = p.size();
  if (n == 0 || n > kPmfTotal) {
    throw PrecisionError("cannot give " + std::to_string(n) + " bins a nonzero frequency at " +
                         std::to_string(kPmfPrecisionBits) + "-bit precision");
  }
  const double total = static_cast<double>(kPmfTotal);
  std::vector<uint32_t> freq(n);
  std::vector<double> remainder(n);
  int64_t assigned = 0;
  for (size_t i = 0; i < n; ++i) {
    const double target = p[i] * total;
    const double fl = std::floor(target);
    freq[i] = static_cast<uint32_t>(std::max(1.0, fl));
    remainder[i] = target - static_cast<double>(freq[i]);
    assigned += freq[i];
  }
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  int64_t diff = static_cast<int64_t>(kPmfTotal) - assigned;
  if (diff > 0) {
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return remainder[a] > remainder[b]; });
    for (size_t i = 0; diff > 0; i = (i + 1) % n, --diff) ++freq[order[i]];
  } else if (diff < 0) {
    // Over-assigned because of the 1-per-bin floor: take from the bins that
    // are most above their target and can spare a count.
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return remainder[a] < remainder[b]; });
    while (diff < 0) {
      bool progressed = false;
      for (size_t i = 0; i < n && diff < 0; ++i) {
        if (freq[order[i]] > 1) {
          --freq[order[i]];
          ++diff;
          progressed = true;
        }
      }
      if (!progressed) throw PrecisionError("pmf cannot be normalized");
    }
  }
  return freq;
}

inline PmfTable make_table(int32_t n_min, std::vector<uint32_t> freq) {
  PmfTable t;
  t.n_min = n_min;
  t.n_max = n_min + static_cast<int32_t>(freq.size()) - 1;
  t.freq = std::move(freq);
  t.cum.assign(t.freq.size() + 1, 0);
  for (size_t i = 0; i < t.freq.size(); ++i) t.cum[i + 1] = t.cum[i] + t.freq[i];
  return t;
}

// Support [n_min, n_max] of channel c at a level such that the model mass
// outside it is below tail_mass (half on each side).
inline std::pair<int32_t, int32_t> table_support(const EntropyModelParams& params, size_t c,
                                                 int level, double tail_mass) {
  const double step = params.ladder.step(level);
  const double z = logistic::logit(0.5 * tail_mass);  // negative
  const double q_lo = params.loc[c] + params.scale(c) * z;
  const double q_hi = params.loc[c] - params.scale(c) * z;
  const double hi = std::floor(q_hi / step);
  const double lo = std::ceil(q_lo / step) - 1.0;
  if (hi - lo + 1.0 > static_cast<double>(kPmfTotal) || lo < INT32_MIN || hi > INT32_MAX) {
    throw PrecisionError("channel " + std::to_string(c) + " at level " + std::to_string(level) +
                         " needs " + std::to_string(hi - lo + 1.0) +
                         " bins; raise tail_mass or lower the resolution");
  }
  return {static_cast<int32_t>(lo), static_cast<int32_t>(hi)};
}

// Discretized model masses over the table support with the tails folded
// into the edge bins; sums to 1.
inline std::vector<double> folded_bin_masses(const EntropyModelParams& params, size_t c,
                                             int level, int32_t n_min, int32_t n_max) {
  const double step = params.ladder.step(level);
  const double mu = params.loc[c];
  const double s = params.scale(c);
  const size_t count = static_cast<size_t>(n_max - n_min) + 1;
  std::vector<double> p(count);
  if (count == 1) {
    p[0] = 1.0;
    return p;
  }
  for (size_t i = 0; i < count; ++i) {
    const double n = static_cast<double>(n_min) + static_cast<double>(i);
    if (i == 0) {
      p[i] = logistic::sigmoid(((n + 1.0) * step - mu) / s);
    } else if (i + 1 == count) {
      p[i] = logistic::sigmoid(-((n * step) - mu) / s);
    } else {
      p[i] = std::exp(logistic::log_interval_mass((n * step - mu) / s, ((n + 1.0) * step - mu) / s));
    }
  }
  return p;
}

inline PmfTableSet build_pmf_tables(const EntropyModelParams& params, int level,
                                    double tail_mass = kDefaultTailMass) {
  if (!(tail_mass > 0.0) || tail_mass > 1e-6)
    throw ConfigError("tail_mass must lie in (0, 1e-6]");
  params.validate();
  params.ladder.check_level(level);
  PmfTableSet set;
  set.level = level;
  set.channels.reserve(params.channels());
  for (size_t c = 0; c < params.channels(); ++c) {
    const auto [n_min, n_max] = table_support(params, c, level, tail_mass);
    set.channels.push_back(make_table(n_min, quantize_pmf(folded_bin_masses(params, c, level, n_min, n_max))));
  }
  return set;
}

// Clamp symbols outside their channel's table support onto the edge bins.
// Returns the number of folded entries.
inline size_t fold_to_tables(SymbolTensor& s, const PmfTableSet& tables) {
  if (s.shape().c != tables.channels.size())
    throw DimensionError("symbol channels do not match table set");
  const size_t plane = s.shape().h * s.shape().w;
  size_t folded = 0;
  for (size_t i = 0; i < s.symbols.data.size(); ++i) {
    const PmfTable& t = tables.channels[i / plane];
    int32_t& n = s.symbols.data[i];
    if (n < t.n_min) {
      n = t.n_min;
      ++folded;
    } else if (n > t.n_max) {
      n = t.n_max;
      ++folded;
    }
  }
  return folded;
}

// Ideal code length of the symbols under the integer tables, in bits.
inline double table_cross_entropy(const PmfTableSet& tables, const SymbolTensor& s) {
  const size_t plane = s.shape().h * s.shape().w;
  double bits = 0.0;
  for (size_t i = 0; i < s.symbols.data.size(); ++i) {
    const PmfTable& t = tables.channels[i / plane];
    const int32_t n = s.symbols.data[i];
    if (!t.contains(n)) throw CoderDomainError("symbol outside table support");
    bits += kPmfPrecisionBits - std::log2(static_cast<double>(t.frequency(n)));
  }
  return bits;
}

}  // namespace csi_ntc
