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

#include "csi_ntc/channel.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <vector>

namespace csi_ntc {
namespace {

// Direct O(N^2) unitary DFT along rows; shares no code with the FFT path.
ComplexMatrix naive_dft(const ComplexMatrix& m, int sign) {
  ComplexMatrix out(m.rows, m.cols);
  const double n = static_cast<double>(m.rows);
  for (size_t k = 0; k < m.rows; ++k) {
    for (size_t t = 0; t < m.rows; ++t) {
      const double ang = sign * 2.0 * M_PI * static_cast<double>(k * t % m.rows) / n;
      const Complex w(std::cos(ang), std::sin(ang));
      for (size_t a = 0; a < m.cols; ++a) out(k, a) += m(t, a) * w;
    }
  }
  for (auto& v : out.data) v /= std::sqrt(n);
  return out;
}

ChannelConfig small_config(uint64_t seed = 7) {
  ChannelConfig c;
  c.n_tx = 4;
  c.n_subcarriers = 64;
  c.n_delay = 16;
  c.n_paths = 5;
  c.decay = 0.2;
  c.seed = seed;
  return c;
}

TEST(Channel, SingleTapHasFlatMagnitude) {
  ChannelConfig cfg = small_config();
  cfg.n_paths = 1;
  cfg.decay = 0.0;
  const ComplexMatrix h = generate_channel(cfg);
  for (size_t a = 0; a < cfg.n_tx; ++a) {
    const double ref = std::abs(h(0, a));
    EXPECT_GT(ref, 0.0);
    for (size_t f = 1; f < cfg.n_subcarriers; ++f) EXPECT_NEAR(std::abs(h(f, a)), ref, 1e-12 * ref);
  }
}

TEST(Channel, GenerationIsDeterministic) {
  const ChannelConfig cfg = small_config(99);
  EXPECT_EQ(generate_channel(cfg), generate_channel(cfg));
  ChannelConfig other = cfg;
  other.seed = 100;
  EXPECT_FALSE(generate_channel(cfg) == generate_channel(other));
}

TEST(Channel, MeanEnergyMatchesNormalization) {
  ChannelConfig cfg;  // (32, 1024, 32), 16 paths
  cfg.n_paths = 16;
  double acc = 0.0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) acc += frobenius_sq(generate_channel(sample_config(cfg, i)));
  const double mean = acc / n;
  EXPECT_NEAR(mean, 32768.0, 0.05 * 32768.0);
}

TEST(Channel, InvalidConfigRejected) {
  ChannelConfig c = small_config();
  c.n_subcarriers = 48;
  EXPECT_THROW(generate_channel(c), ConfigError);
  c = small_config();
  c.n_delay = 128;
  EXPECT_THROW(generate_channel(c), ConfigError);
  c = small_config();
  c.n_paths = 17;
  EXPECT_THROW(generate_channel(c), ConfigError);
  c = small_config();
  c.n_paths = 0;
  EXPECT_THROW(generate_channel(c), ConfigError);
  c = small_config();
  c.decay = -1.0;
  EXPECT_THROW(generate_channel(c), ConfigError);
}

TEST(Channel, FftMatchesNaiveDft) {
  const ChannelConfig cfg = small_config(3);
  const ComplexMatrix h = generate_channel(cfg);
  const ComplexMatrix a = to_delay_domain(h);
  const ComplexMatrix b = naive_dft(h, +1);
  for (size_t i = 0; i < a.data.size(); ++i) EXPECT_NEAR(std::abs(a.data[i] - b.data[i]), 0.0, 1e-10);
}

TEST(Channel, RoundTripWhenSupportIsRetained) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const ChannelConfig cfg = small_config(seed);
    const ComplexMatrix h = generate_channel(cfg);
    const ComplexMatrix back = postprocess(preprocess(h, cfg), cfg);
    EXPECT_LE(nmse(h, back), 1e-20);
  }
}

TEST(Channel, EnergyBeyondRetainedTapsIsDiscarded) {
  const ChannelConfig cfg = small_config();
  ComplexMatrix d(cfg.n_subcarriers, cfg.n_tx);
  for (size_t a = 0; a < cfg.n_tx; ++a) d(cfg.n_delay, a) = Complex(1.0, -0.5);
  const ComplexMatrix h = naive_dft(d, -1);
  const Tensor3<double> raw = delay_planes(h, cfg);
  for (double v : raw.data) EXPECT_LE(std::abs(v), 1e-12);
}

TEST(Channel, TruncationNmseEqualsDiscardedEnergyFraction) {
  const ChannelConfig cfg = small_config();
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    ComplexMatrix d(cfg.n_subcarriers, cfg.n_tx);
    for (auto& v : d.data) {
      const double w = rng.uniform() < 0.5 ? 1.0 : 0.0;
      v = w * Complex(rng.normal(), rng.normal());
    }
    d(0, 0) = Complex(1.0, 0.0);
    const ComplexMatrix h = naive_dft(d, -1);
    // Oracle: energy accounting on the naive inverse transform.
    const ComplexMatrix delay = naive_dft(h, +1);
    double total = 0.0, tail = 0.0;
    for (size_t t = 0; t < delay.rows; ++t)
      for (size_t a = 0; a < delay.cols; ++a) {
        total += std::norm(delay(t, a));
        if (t >= cfg.n_delay) tail += std::norm(delay(t, a));
      }
    const double f = tail / total;
    const double got = nmse(h, postprocess(preprocess(h, cfg), cfg));
    EXPECT_NEAR(got, f, 1e-9);
  }
}

TEST(Channel, PostprocessOfZeroIsZero) {
  const ChannelConfig cfg = small_config();
  ChannelTensor t{Tensor3<double>(Shape3{2, cfg.n_delay, cfg.n_tx}), Normalization{0.0, 2.0}};
  const ComplexMatrix h = postprocess(t, cfg);
  EXPECT_EQ(frobenius_sq(h), 0.0);
  // An all-offset tensor is the image of the zero channel.
  ChannelTensor off{Tensor3<double>(Shape3{2, cfg.n_delay, cfg.n_tx}, 0.25), Normalization{0.25, 2.0}};
  EXPECT_EQ(frobenius_sq(postprocess(off, cfg)), 0.0);
}

TEST(Channel, ParsevalHolds) {
  const ChannelConfig cfg = small_config(11);
  const ChannelTensor t = preprocess(generate_channel(cfg), cfg);
  const Tensor3<double> raw = t.denormalized();
  double delay_energy = 0.0;
  for (double v : raw.data) delay_energy += v * v;
  const double freq_energy = frobenius_sq(postprocess(t, cfg));
  EXPECT_NEAR(freq_energy, delay_energy, 1e-10 * delay_energy);
}

TEST(Channel, NormalizedEntriesLieInUnitRange) {
  ChannelConfig cfg = small_config();
  std::vector<ComplexMatrix> hs;
  for (int i = 0; i < 30; ++i) hs.push_back(generate_channel(sample_config(cfg, i)));
  const auto dataset = preprocess_dataset(hs, cfg);
  double peak = 0.0;
  for (const auto& t : dataset) {
    EXPECT_EQ(t.scale, dataset.front().scale);
    for (double v : t.planes.data) peak = std::max(peak, std::abs(v));
  }
  EXPECT_LE(peak, 1.0);
  EXPECT_NEAR(peak, 1.0, 1e-15);
  for (const auto& h : hs)
    for (double v : preprocess(h, cfg).planes.data) EXPECT_LE(std::abs(v), 1.0);
}

TEST(Channel, NormalizationInvertsExactly) {
  const ChannelConfig cfg = small_config(4);
  const ComplexMatrix h = generate_channel(cfg);
  const Tensor3<double> raw = delay_planes(h, cfg);
  const ChannelTensor t = preprocess(h, cfg, Normalization{0.1, 0.37});
  const Tensor3<double> back = t.denormalized();
  for (size_t i = 0; i < raw.data.size(); ++i)
    EXPECT_NEAR(back.data[i], raw.data[i], 1e-12 * (1.0 + std::abs(raw.data[i])));
}

TEST(Channel, PreprocessRejectsShapeMismatch) {
  const ChannelConfig cfg = small_config();
  ComplexMatrix wrong(cfg.n_subcarriers, cfg.n_tx + 1);
  EXPECT_THROW(preprocess(wrong, cfg), DimensionError);
  ChannelTensor t{Tensor3<double>(Shape3{2, cfg.n_delay + 1, cfg.n_tx}), {}};
  EXPECT_THROW(postprocess(t, cfg), DimensionError);
}

TEST(Channel, NmseExamples) {
  const ChannelConfig cfg = small_config(8);
  const ChannelTensor h = preprocess(generate_channel(cfg), cfg);
  EXPECT_EQ(nmse(h, h), 0.0);
  ChannelTensor zero = h;
  std::fill(zero.planes.data.begin(), zero.planes.data.end(), 0.0);
  EXPECT_DOUBLE_EQ(nmse(h, zero), 1.0);
  ChannelTensor half = h;
  for (auto& v : half.planes.data) v *= 0.5;
  EXPECT_NEAR(nmse(h, half), 0.25, 1e-15);
  EXPECT_THROW(nmse(zero, h), DomainError);
  ChannelTensor other{Tensor3<double>(Shape3{2, 3, 3}), {}};
  EXPECT_THROW(nmse(h, other), DimensionError);
}

}  // namespace
}  // namespace csi_ntc
