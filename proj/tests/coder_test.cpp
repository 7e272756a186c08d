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

#include "csi_ntc/coder.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "csi_ntc/entropy_model.hpp"
#include "csi_ntc/rng.hpp"

namespace csi_ntc {
namespace {

PmfTableSet one_table(int32_t n_min, std::vector<uint32_t> freq, size_t channels = 1) {
  PmfTableSet set;
  for (size_t c = 0; c < channels; ++c) set.channels.push_back(make_table(n_min, freq));
  return set;
}

SymbolTensor symbols(Shape3 shape, std::vector<int32_t> v, int level = 0) {
  return SymbolTensor{Tensor3<int32_t>(shape, std::move(v)), level, {1.0, 6}};
}

// Draw a symbol from an integer table.
int32_t draw(const PmfTable& t, Rng& rng) {
  const uint64_t slot = rng.below(kPmfTotal);
  size_t k = 0;
  while (t.cum[k + 1] <= slot) ++k;
  return t.n_min + static_cast<int32_t>(k);
}

Payload roundtrip(const SymbolTensor& s, const PmfTableSet& t) {
  const Payload p = encode_symbols(s, t);
  const Payload parsed = Payload::parse(p.serialize(), p.symbol_count);
  EXPECT_EQ(decode_symbols(parsed, t, s.shape(), s.ladder), s);
  return p;
}

TEST(Coder, EmptyTensor) {
  const PmfTableSet t = one_table(0, {kPmfTotal / 2, kPmfTotal / 2});
  const SymbolTensor s = symbols(Shape3{1, 0, 0}, {});
  const Payload p = roundtrip(s, t);
  EXPECT_LE(p.serialize().size(), 8u);
}

TEST(Coder, GoldenBytes) {
  // Hand-run of the encoder: x = 2^23 -> 2^24 -> 2^26 + 49152 -> 268664832 -> 8199 * 2^16.
  const PmfTableSet t = one_table(0, {32768, 16384, 16384});
  const SymbolTensor s = symbols(Shape3{1, 1, 4}, {0, 1, 2, 0});
  const std::vector<uint8_t> expected{0x20, 0x07, 0x00, 0x00, 0x84, 0x39, 0x66, 0xa7};
  EXPECT_EQ(encode_symbols(s, t).serialize(), expected);
  roundtrip(s, t);
}

TEST(Coder, UniformFourSymbolsCostTwoBits) {
  const PmfTableSet t = one_table(-2, {16384, 16384, 16384, 16384});
  Rng rng(1);
  std::vector<int32_t> v(1024);
  for (auto& x : v) x = static_cast<int32_t>(rng.below(4)) - 2;
  const SymbolTensor s = symbols(Shape3{1, 32, 32}, v);
  // Every symbol costs exactly 16 - log2(16384) = 2 bits under the table.
  EXPECT_DOUBLE_EQ(table_cross_entropy(t, s), 2048.0);
  const Payload p = roundtrip(s, t);
  const size_t bits = 8 * p.serialize().size();
  EXPECT_GE(bits, 2048u);
  EXPECT_LE(bits, 2048u + 64u);
}

TEST(Coder, SkewedBinarySource) {
  const std::vector<double> prob{0.9, 0.1};
  const PmfTableSet t = one_table(0, quantize_pmf(prob));
  Rng rng(2);
  std::vector<int32_t> v(100000);
  for (auto& x : v) x = rng.uniform() < 0.1 ? 1 : 0;
  const SymbolTensor s = symbols(Shape3{1, 1, v.size()}, v);
  const Payload p = roundtrip(s, t);
  const double entropy = -(0.9 * std::log2(0.9) + 0.1 * std::log2(0.1));
  EXPECT_NEAR(entropy, 0.4690, 5e-5);
  EXPECT_LE(8.0 * p.serialize().size() / v.size(), 0.49);
}

TEST(Coder, SingleSymbolAlphabet) {
  const SymbolTensor s = symbols(Shape3{2, 3, 4}, std::vector<int32_t>(24, 5));
  const Payload p = roundtrip(s, one_table(5, {kPmfTotal}, 2));
  EXPECT_EQ(p.bytes.size(), 4u);
}

TEST(Coder, RandomRoundtripsAcrossLevels) {
  Rng rng(3);
  const QuantLadder ladder{1.0 / 16, 6};
  for (int trial = 0; trial < 1000; ++trial) {
    const size_t c = 1 + rng.below(4), h = 1 + rng.below(8), w = 1 + rng.below(8);
    EntropyModelParams m = EntropyModelParams::initial(c, ladder);
    for (size_t i = 0; i < c; ++i) {
      m.loc[i] = rng.uniform(-1.0, 1.0);
      m.log_scale[i] = rng.uniform(-4.0, 0.5);
    }
    const int level = static_cast<int>(rng.below(6));
    const PmfTableSet t = build_pmf_tables(m, level);
    SymbolTensor s{Tensor3<int32_t>(Shape3{c, h, w}), level, ladder};
    const size_t plane = h * w;
    for (size_t i = 0; i < s.symbols.data.size(); ++i) {
      const PmfTable& tab = t.channels[i / plane];
      // Mostly typical symbols, with occasional edge bins.
      const uint64_t pick = rng.below(20);
      s.symbols.data[i] = pick == 0 ? tab.n_min : pick == 1 ? tab.n_max : draw(tab, rng);
    }
    const Payload p = encode_symbols(s, t);
    ASSERT_EQ(decode_symbols(Payload::parse(p.serialize(), p.symbol_count), t, s.shape(), ladder), s)
        << "trial " << trial;
    EXPECT_LE(static_cast<double>(p.coded_bits()),
              table_cross_entropy(t, s) + 32.0 + 0.001 * p.coded_bits());
  }
}

TEST(Coder, RateBoundsOnLargeSample) {
  const QuantLadder ladder{1.0 / 16, 6};
  const EntropyModelParams m{{0.1, -0.2}, {std::log(0.3), std::log(0.05)}, ladder, 1};
  Rng rng(4);
  for (int level = 0; level < 6; ++level) {
    const PmfTableSet t = build_pmf_tables(m, level);
    SymbolTensor s{Tensor3<int32_t>(Shape3{2, 250, 200}), level, ladder};
    for (size_t i = 0; i < s.symbols.data.size(); ++i)
      s.symbols.data[i] = draw(t.channels[i / 50000], rng);
    const Payload p = roundtrip(s, t);
    const double bits = static_cast<double>(p.coded_bits());
    EXPECT_LE(bits, table_cross_entropy(t, s) + 32.0 + 0.001 * bits);
    EXPECT_GE(bits, empirical_entropy(s, true) * static_cast<double>(s.size()));
  }
}

TEST(Coder, EveryByteFlipIsDetected) {
  const QuantLadder ladder{1.0 / 16, 6};
  const EntropyModelParams m{{0.0}, {std::log(0.5)}, ladder, 1};
  const PmfTableSet t = build_pmf_tables(m, 1);
  Rng rng(5);
  SymbolTensor s{Tensor3<int32_t>(Shape3{1, 16, 16}), 1, ladder};
  for (auto& v : s.symbols.data) v = draw(t.channels[0], rng);
  const std::vector<uint8_t> good = encode_symbols(s, t).serialize();
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<uint8_t> bad = good;
    bad[rng.below(bad.size())] ^= static_cast<uint8_t>(1 + rng.below(255));
    EXPECT_THROW(
        decode_symbols(Payload::parse(bad, s.size()), t, s.shape(), ladder), CorruptionError);
  }
}

TEST(Coder, TruncatedPayloads) {
  const PmfTableSet t = one_table(0, {16384, 16384, 16384, 16384});
  std::vector<int32_t> v(400);
  for (size_t i = 0; i < v.size(); ++i) v[i] = static_cast<int32_t>(i % 4);
  const SymbolTensor s = symbols(Shape3{1, 20, 20}, v);
  const Payload p = encode_symbols(s, t);
  const std::vector<uint8_t> wire = p.serialize();
  EXPECT_THROW(Payload::parse(std::span(wire).first(7), s.size()), TruncationError);
  // Drop renormalization bytes but keep a valid checksum.
  Payload cut = p;
  cut.bytes.resize(p.bytes.size() / 2);
  cut.checksum = crc32_of(cut.bytes);
  EXPECT_THROW(decode_symbols(cut, t, s.shape(), s.ladder), TruncationError);
  // Shape that disagrees with the payload count.
  EXPECT_THROW(decode_symbols(p, t, Shape3{1, 10, 20}, s.ladder), FormatError);
}

TEST(Coder, OutOfRangeSymbolsAreRejected) {
  const PmfTableSet t = one_table(-1, {30000, 5536, 30000});
  EXPECT_THROW(encode_symbols(symbols(Shape3{1, 1, 3}, {0, 2, 0}), t), CoderDomainError);
  EXPECT_THROW(encode_symbols(symbols(Shape3{1, 1, 3}, {-2, 0, 0}), t), CoderDomainError);
  EXPECT_THROW(encode_symbols(symbols(Shape3{2, 1, 1}, {0, 0}), t), CoderDomainError);
  EXPECT_THROW(encode_symbols(symbols(Shape3{1, 1, 1}, {0}, 2), t), CoderDomainError);
}

TEST(Coder, Deterministic) {
  const PmfTableSet t = one_table(0, quantize_pmf({0.5, 0.25, 0.125, 0.125}));
  Rng rng(6);
  std::vector<int32_t> v(5000);
  for (auto& x : v) x = draw(t.channels[0], rng);
  const SymbolTensor s = symbols(Shape3{1, 50, 100}, v);
  EXPECT_EQ(encode_symbols(s, t).serialize(), encode_symbols(s, t).serialize());
}

}  // namespace
}  // namespace csi_ntc
