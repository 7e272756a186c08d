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
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "csi_ntc/binary_io.hpp"
#include "csi_ntc/channel.hpp"
#include "csi_ntc/coder.hpp"
#include "csi_ntc/entropy_model.hpp"
#include "csi_ntc/errors.hpp"
#include "csi_ntc/quantizer.hpp"
#include "csi_ntc/transform.hpp"
#include "csi_ntc/weights_io.hpp"

namespace csi_ntc {

// ---------------------------------------------------------------------------
// Bitstream ("CSIB"), little-endian header of 32 bytes:
//   magic "CSIB" | version u8 | level u8 | latent C,H,W u16 x3 |
//   offset f64 | gain f64 | payload length u32
// followed by the serialized coder payload (rANS bytes + CRC-32).

inline constexpr uint8_t kBitstreamVersion = 1;
inline constexpr size_t kBitstreamHeaderBytes = 32;

struct BitstreamHeader {
  uint8_t version = kBitstreamVersion;
  uint8_t level = 0;
  Shape3 latent;
  Normalization scale;
  uint32_t payload_length = 0;
  bool operator==(const BitstreamHeader&) const = default;
};

struct Bitstream {
  BitstreamHeader header;
  std::vector<uint8_t> payload;  // serialized coder payload

  std::vector<uint8_t> serialize() const {
    ByteWriter w;
    w.tag("CSIB");
    w.u8(header.version);
    w.u8(header.level);
    w.u16(detail::checked_u16(header.latent.c, "latent C"));
    w.u16(detail::checked_u16(header.latent.h, "latent H"));
    w.u16(detail::checked_u16(header.latent.w, "latent W"));
    w.f64(header.scale.offset);
    w.f64(header.scale.gain);
    w.u32(static_cast<uint32_t>(payload.size()));
    w.bytes(payload);
    return w.take();
  }

  static Bitstream parse(std::span<const uint8_t> bytes) {
    ByteReader r(bytes);
    r.expect_tag("CSIB");
    Bitstream s;
    s.header.version = r.u8();
    if (s.header.version != kBitstreamVersion)
      throw FormatError("unsupported CSIB version " + std::to_string(s.header.version));
    s.header.level = r.u8();
    s.header.latent.c = r.u16();
    s.header.latent.h = r.u16();
    s.header.latent.w = r.u16();
    s.header.scale.offset = r.f64();
    s.header.scale.gain = r.f64();
    s.header.payload_length = r.u32();
    const auto body = r.bytes(s.header.payload_length);
    s.payload.assign(body.begin(), body.end());
    if (r.remaining() != 0) throw FormatError("trailing bytes after bitstream payload");
    return s;
  }

  // l(s): serialized length in bits.
  size_t length_bits() const { return 8 * (kBitstreamHeaderBytes + payload.size()); }
};

// Bits added to the ideal code length by framing: header, rANS state flush
// and checksum.
inline constexpr double kFramingBits = 8.0 * (kBitstreamHeaderBytes + 4 + 4);

// Immutable codec snapshot: model plus fixed-point tables for every level.
class Codec {
 public:
  explicit Codec(CodecModel model, double tail_mass = kDefaultTailMass)
      : model_(std::move(model)) {
    model_.entropy.validate();
    if (model_.entropy.channels() != model_.transform.network().latent_shape().c)
      throw ConfigError("entropy model does not match the transform's latent channels");
    for (int k = 0; k < model_.entropy.ladder.n_levels; ++k)
      tables_.push_back(build_pmf_tables(model_.entropy, k, tail_mass));
  }

  const CodecModel& model() const { return model_; }
  const QuantLadder& ladder() const { return model_.entropy.ladder; }
  const PmfTableSet& tables(int level) const {
    ladder().check_level(level);
    return tables_[static_cast<size_t>(level)];
  }
  Shape3 latent_shape() const { return model_.transform.network().latent_shape(); }

  // analyze -> quantize -> fold onto table support. Returns fold count.
  SymbolTensor symbols_for(const ChannelTensor& h, int level, size_t* folded = nullptr) const {
    SymbolTensor s = quantize(analyze(h, model_.transform), ladder(), level);
    const size_t f = fold_to_tables(s, tables(level));
    if (folded) *folded = f;
    return s;
  }

  // The reconstruction the decoder will produce, computed in-process.
  ChannelTensor reconstruct(const ChannelTensor& h, int level) const {
    return synthesize(dequantize(symbols_for(h, level)), model_.transform);
  }

 private:
  CodecModel model_;
  std::vector<PmfTableSet> tables_;
};

struct EncodeDiagnostics {
  size_t folded = 0;
  double ideal_bits = 0.0;  // table cross-entropy of the coded symbols
};

inline Bitstream encode_csi(const ChannelTensor& h, const Codec& codec, int level,
                            EncodeDiagnostics* diag = nullptr) {
  size_t folded = 0;
  const SymbolTensor s = codec.symbols_for(h, level, &folded);
  const Payload p = encode_symbols(s, codec.tables(level));
  if (diag) {
    diag->folded = folded;
    diag->ideal_bits = table_cross_entropy(codec.tables(level), s);
  }
  Bitstream out;
  out.header.level = static_cast<uint8_t>(level);
  out.header.latent = s.shape();
  out.header.scale = codec.model().transform.scale;
  out.payload = p.serialize();
  out.header.payload_length = static_cast<uint32_t>(out.payload.size());
  return out;
}

inline ChannelTensor decode_csi(const Bitstream& s, const Codec& codec) {
  if (s.header.version != kBitstreamVersion) throw FormatError("bitstream version mismatch");
  if (s.header.level >= codec.ladder().n_levels) {
    throw FormatError("bitstream level " + std::to_string(s.header.level) +
                      " beyond ladder of " + std::to_string(codec.ladder().n_levels));
  }
  if (s.header.latent != codec.latent_shape())
    throw FormatError("bitstream latent " + s.header.latent.str() + " does not match model " +
                      codec.latent_shape().str());
  if (!(s.header.scale == codec.model().transform.scale))
    throw FormatError("bitstream normalization does not match model");
  const Payload p = Payload::parse(s.payload, s.header.latent.size());
  const SymbolTensor sym =
      decode_symbols(p, codec.tables(s.header.level), s.header.latent, codec.ladder());
  ChannelTensor out = synthesize(dequantize(sym), codec.model().transform);
  out.scale = s.header.scale;
  return out;
}

inline ChannelTensor decode_csi(std::span<const uint8_t> bytes, const Codec& codec) {
  return decode_csi(Bitstream::parse(bytes), codec);
}

// ---------------------------------------------------------------------------
// Capacity-adaptive level selection.

struct RateBudget {
  double capacity_bits = 0.0;  // C_f, bits per feedback instance
};

// Finest level whose expected bitstream length fits the budget.
inline int select_level(std::span<const double> expected_bits, RateBudget budget) {
  if (expected_bits.empty()) throw ConfigError("no levels to select from");
  if (!(budget.capacity_bits > 0.0)) throw ConfigError("capacity must be positive");
  for (size_t k = 1; k < expected_bits.size(); ++k) {
    if (expected_bits[k] > expected_bits[k - 1])
      throw ConfigError("expected bits must be nonincreasing in the level");
  }
  for (size_t k = 0; k < expected_bits.size(); ++k)
    if (expected_bits[k] <= budget.capacity_bits) return static_cast<int>(k);
  throw CapacityError("coarsest level needs " + std::to_string(expected_bits.back()) +
                      " bits, capacity is " + std::to_string(budget.capacity_bits));
}

// Expected l(s) per level from the ideal code length on a calibration set,
// plus framing overhead.
inline std::vector<double> estimate_bits_per_level(const Codec& codec,
                                                   std::span<const ChannelTensor> calibration) {
  if (calibration.empty()) throw ConfigError("calibration set is empty");
  std::vector<double> out;
  for (int k = 0; k < codec.ladder().n_levels; ++k) {
    double acc = 0.0;
    for (const auto& h : calibration)
      acc += table_cross_entropy(codec.tables(k), codec.symbols_for(h, k));
    out.push_back(acc / static_cast<double>(calibration.size()) + kFramingBits);
  }
  // Table rounding can break monotonicity by a hair; the ladder guarantees it
  // for the true distribution.
  for (size_t k = 1; k < out.size(); ++k) out[k] = std::min(out[k], out[k - 1]);
  return out;
}

inline double bits_per_entry(std::span<const Bitstream> streams, size_t n_delay, size_t n_tx) {
  if (streams.empty()) throw ConfigError("no bitstreams");
  double acc = 0.0;
  for (const auto& s : streams) acc += static_cast<double>(s.length_bits());
  return acc / (static_cast<double>(streams.size()) * static_cast<double>(n_delay * n_tx));
}

// ---------------------------------------------------------------------------
// Rate-distortion sweep.

struct RdPoint {
  double bits_per_entry = 0.0;
  double nmse = 0.0;
  double nmse_db = 0.0;
  int level = 0;
  double lambda = 0.0;
  std::string model_id;
  size_t folded = 0;
};

struct NamedModel {
  std::string id;
  const Codec* codec = nullptr;
};

struct RdSweepOptions {
  // When set, NMSE is measured on the full-band frequency channel against
  // these originals (including truncation loss).
  const std::vector<ComplexMatrix>* full_band_originals = nullptr;
  ChannelConfig channel;
};

// N_c * N_t of a (nonempty) sample set.
inline size_t h_entries(std::span<const ChannelTensor> set) {
  return set.front().n_delay() * set.front().n_tx();
}

inline double to_db(double v) { return 10.0 * std::log10(v); }

inline std::vector<RdPoint> rd_sweep(std::span<const ChannelTensor> test_set,
                                     std::span<const NamedModel> models,
                                     std::span<const double> lambdas,
                                     const RdSweepOptions& opt = {}) {
  if (test_set.empty()) throw ConfigError("rd sweep needs test samples");
  std::vector<RdPoint> points;
  for (double lambda : lambdas) {
    std::vector<const NamedModel*> match;
    for (const auto& m : models)
      if (m.codec && m.codec->model().lambda == lambda) match.push_back(&m);
    if (match.empty()) throw ConfigError("no model trained for lambda " + std::to_string(lambda));
    for (const NamedModel* m : match) {
      const Codec& codec = *m->codec;
      for (int k = 0; k < codec.ladder().n_levels; ++k) {
        RdPoint pt;
        pt.level = k;
        pt.lambda = lambda;
        pt.model_id = m->id;
        double bits = 0.0;
        double err = 0.0;
        for (size_t i = 0; i < test_set.size(); ++i) {
          const auto& h = test_set[i];
          EncodeDiagnostics diag;
          const Bitstream s = encode_csi(h, codec, k, &diag);
          pt.folded += diag.folded;
          bits += static_cast<double>(s.length_bits());
          const ChannelTensor h_hat = decode_csi(s, codec);
          if (opt.full_band_originals) {
            err += nmse((*opt.full_band_originals)[i], postprocess(h_hat, opt.channel));
          } else {
            err += nmse(h, h_hat);
          }
        }
        const double n = static_cast<double>(test_set.size());
        pt.bits_per_entry = bits / (n * static_cast<double>(h_entries(test_set)));
        pt.nmse = err / n;
        pt.nmse_db = to_db(pt.nmse);
        points.push_back(pt);
      }
    }
  }
  std::stable_sort(points.begin(), points.end(), [](const RdPoint& a, const RdPoint& b) {
    return a.bits_per_entry < b.bits_per_entry;
  });
  return points;
}

inline constexpr const char* kRdCsvHeader = "model_id,lambda,level,bits_per_entry,nmse,nmse_db";

inline std::string rd_csv(std::span<const RdPoint> points) {
  std::ostringstream os;
  os << kRdCsvHeader << "\n";
  char buf[256];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%s,%.6g,%d,%.9g,%.9g,%.6f\n", p.model_id.c_str(), p.lambda,
                  p.level, p.bits_per_entry, p.nmse, p.nmse_db);
    os << buf;
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Plain-text exchange files read by the external oracle tools.
//
// Symbol file:                      PMF file:
//   # csi-ntc symbols v1              # csi-ntc pmf v1
//   level <k> shape <C> <H> <W>       level <k> precision 16 channels <C>
//   channel 0                         channel 0 n_min <a> n_max <b>
//   <symbol>   (one per line,         <probability>  (freq / 2^16, one per
//   ...         raster order)          ...            line, n_min..n_max)
//   channel 1                         channel 1 ...

inline std::string symbols_text(const SymbolTensor& s) {
  std::ostringstream os;
  os << "# csi-ntc symbols v1\n";
  os << "level " << s.level << " shape " << s.shape().c << ' ' << s.shape().h << ' '
     << s.shape().w << "\n";
  const size_t plane = s.shape().h * s.shape().w;
  for (size_t c = 0; c < s.shape().c; ++c) {
    os << "channel " << c << "\n";
    for (size_t i = 0; i < plane; ++i) os << s.symbols.data[c * plane + i] << "\n";
  }
  return os.str();
}

inline std::string pmf_text(const PmfTableSet& tables) {
  std::ostringstream os;
  os << "# csi-ntc pmf v1\n";
  os << "level " << tables.level << " precision " << kPmfPrecisionBits << " channels "
     << tables.channels.size() << "\n";
  char buf[64];
  for (size_t c = 0; c < tables.channels.size(); ++c) {
    const PmfTable& t = tables.channels[c];
    os << "channel " << c << " n_min " << t.n_min << " n_max " << t.n_max << "\n";
    for (uint32_t f : t.freq) {
      std::snprintf(buf, sizeof buf, "%.17g\n", static_cast<double>(f) / kPmfTotal);
      os << buf;
    }
  }
  return os.str();
}

}  // namespace csi_ntc
