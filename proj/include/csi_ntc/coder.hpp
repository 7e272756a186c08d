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

#include <zlib.h>

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csi_ntc/binary_io.hpp"
#include "csi_ntc/entropy_model.hpp"
#include "csi_ntc/errors.hpp"
#include "csi_ntc/quantizer.hpp"

namespace csi_ntc {

// Byte-wise rANS: 32-bit state kept in [kRansLow, 2^31), 16-bit
// probabilities, 8-bit renormalization. Symbols are pushed in reverse raster
// order so the decoder emits them forward (channel-major, row, column).
//
// Serialized payload layout:
//   final encoder state, 4 bytes big-endian
//   renormalization bytes in the order the decoder consumes them
//   CRC-32 (zlib polynomial) of everything above, 4 bytes big-endian
inline constexpr uint32_t kRansLow = 1u << 23;

inline uint32_t crc32_of(std::span<const uint8_t> bytes) {
  return static_cast<uint32_t>(
      ::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

struct Payload {
  std::vector<uint8_t> bytes;  // state + renormalization bytes
  uint64_t symbol_count = 0;
  uint32_t checksum = 0;

  // Coded size excluding the checksum.
  size_t coded_bits() const { return 8 * bytes.size(); }

  std::vector<uint8_t> serialize() const {
    ByteWriter w;
    w.bytes(bytes);
    w.u32_be(checksum);
    return w.take();
  }

  // Split a serialized payload and verify its checksum.
  static Payload parse(std::span<const uint8_t> data, uint64_t symbol_count) {
    if (data.size() < 8) {
      throw TruncationError("payload of " + std::to_string(data.size()) +
                            " bytes is shorter than state plus checksum");
    }
    Payload p;
    p.bytes.assign(data.begin(), data.end() - 4);
    ByteReader tail(data.subspan(data.size() - 4));
    p.checksum = tail.u32_be();
    p.symbol_count = symbol_count;
    if (crc32_of(p.bytes) != p.checksum) throw CorruptionError("payload checksum mismatch");
    return p;
  }
};

namespace detail {

inline void check_tables(const Shape3& shape, const PmfTableSet& tables) {
  if (shape.c != tables.channels.size()) {
    throw CoderDomainError("tensor has " + std::to_string(shape.c) + " channels, table set has " +
                           std::to_string(tables.channels.size()));
  }
}

}  // namespace detail

inline Payload encode_symbols(const SymbolTensor& s, const PmfTableSet& tables) {
  detail::check_tables(s.shape(), tables);
  if (s.level != tables.level) throw CoderDomainError("symbol level does not match tables");
  const size_t plane = s.shape().h * s.shape().w;
  const auto& data = s.symbols.data;

  std::vector<uint8_t> emitted;
  emitted.reserve(data.size() / 2 + 16);
  uint32_t x = kRansLow;
  for (size_t i = data.size(); i-- > 0;) {
    const PmfTable& t = tables.channels[i / plane];
    const int32_t n = data[i];
    if (!t.contains(n)) {
      throw CoderDomainError("symbol " + std::to_string(n) + " at index " + std::to_string(i) +
                             " outside table support [" + std::to_string(t.n_min) + ", " +
                             std::to_string(t.n_max) + "]");
    }
    const size_t k = static_cast<size_t>(n - t.n_min);
    const uint32_t freq = t.freq[k];
    const uint32_t start = t.cum[k];
    const uint64_t x_max = static_cast<uint64_t>((kRansLow >> kPmfPrecisionBits) << 8) * freq;
    while (x >= x_max) {
      emitted.push_back(static_cast<uint8_t>(x & 0xff));
      x >>= 8;
    }
    x = ((x / freq) << kPmfPrecisionBits) + (x % freq) + start;
  }

  Payload p;
  p.symbol_count = data.size();
  ByteWriter w;
  w.u32_be(x);
  w.bytes(std::vector<uint8_t>(emitted.rbegin(), emitted.rend()));
  p.bytes = w.take();
  p.checksum = crc32_of(p.bytes);
  return p;
}

inline SymbolTensor decode_symbols(const Payload& p, const PmfTableSet& tables, Shape3 shape,
                                   const QuantLadder& ladder) {
  detail::check_tables(shape, tables);
  if (crc32_of(p.bytes) != p.checksum) throw CorruptionError("payload checksum mismatch");
  if (p.symbol_count != shape.size())
    throw FormatError("payload symbol count does not match shape " + shape.str());
  ladder.check_level(tables.level);

  ByteReader in(p.bytes);
  uint32_t x = in.u32_be();
  if (x < kRansLow || x >= (1u << 31)) throw CorruptionError("rANS state out of range");

  SymbolTensor s{Tensor3<int32_t>(shape), tables.level, ladder};
  const size_t plane = shape.h * shape.w;
  constexpr uint32_t mask = kPmfTotal - 1;
  for (size_t i = 0; i < s.symbols.data.size(); ++i) {
    const PmfTable& t = tables.channels[i / plane];
    const uint32_t slot = x & mask;
    const auto it = std::upper_bound(t.cum.begin() + 1, t.cum.end(), slot);
    const size_t k = static_cast<size_t>(it - (t.cum.begin() + 1));
    s.symbols.data[i] = t.n_min + static_cast<int32_t>(k);
    x = t.freq[k] * (x >> kPmfPrecisionBits) + slot - t.cum[k];
    while (x < kRansLow) {
      if (in.remaining() == 0) throw TruncationError("rANS payload exhausted before all symbols");
      x = (x << 8) | in.u8();
    }
  }
  if (x != kRansLow || in.remaining() != 0)
    throw CorruptionError("rANS stream did not terminate in the initial state");
  return s;
}

}  // namespace csi_ntc
