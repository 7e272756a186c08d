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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csi_ntc/binary_io.hpp"
#include "csi_ntc/entropy_model.hpp"
#include "csi_ntc/errors.hpp"
#include "csi_ntc/transform.hpp"

namespace csi_ntc {

// A trained codec: transforms, entropy model (which owns the ladder) and
// the rate-distortion weight it was trained with.
struct CodecModel {
  TransformParams transform;
  EntropyModelParams entropy;
  double lambda = 0.0;
};

// Weight file ("CSIW"), little-endian:
//   magic "CSIW" | version u8 | architecture u8 |
//   n_delay u16 | n_tx u16 | latent C,H,W u16 x3 | mlp hidden u16 |
//   patch u8 | heads u8 | window u8 | mlp_ratio u8 | embed_dim u16 |
//   latent_channels u16 | n_stages u8 | depth u8 x n_stages |
//   offset f64 | gain f64 | lambda f64 | base step f64 | n_levels u8 |
//   tensor count u16 | tensors
// Each tensor: name length u16 | name | rank u8 | dims u32 x rank | float32 data.
// The entropy model is stored as tensor "entropy" of dims [C, 2] holding
// (loc, log_scale) pairs by channel.
inline constexpr uint8_t kWeightFileVersion = 1;

namespace detail {

inline uint16_t checked_u16(size_t v, const char* what) {
  if (v > UINT16_MAX) throw ConfigError(std::string(what) + " does not fit in 16 bits");
  return static_cast<uint16_t>(v);
}

inline uint8_t checked_u8(size_t v, const char* what) {
  if (v > UINT8_MAX) throw ConfigError(std::string(what) + " does not fit in 8 bits");
  return static_cast<uint8_t>(v);
}

inline void write_tensor(ByteWriter& w, const nn::NamedTensor& t) {
  w.u16(checked_u16(t.name.size(), "tensor name"));
  w.tag(t.name);
  w.u8(checked_u8(t.dims.size(), "tensor rank"));
  for (uint32_t d : t.dims) w.u32(d);
  for (double v : t.data) w.f32(static_cast<float>(v));
}

inline nn::NamedTensor read_tensor(ByteReader& r) {
  nn::NamedTensor t;
  const size_t len = r.u16();
  const auto name = r.bytes(len);
  t.name.assign(name.begin(), name.end());
  const size_t rank = r.u8();
  size_t count = 1;
  for (size_t i = 0; i < rank; ++i) {
    t.dims.push_back(r.u32());
    count *= t.dims.back();
  }
  if (count * 4 > r.remaining()) throw TruncationError("tensor " + t.name + " is truncated");
  t.data.resize(count);
  for (auto& v : t.data) v = static_cast<double>(r.f32());
  return t;
}

}  // namespace detail

inline std::vector<uint8_t> serialize_weights(const CodecModel& m) {
  const TransformParams& t = m.transform;
  const SwinConfig& s = t.swin;
  ByteWriter w;
  w.tag("CSIW");
  w.u8(kWeightFileVersion);
  w.u8(static_cast<uint8_t>(t.arch));
  w.u16(detail::checked_u16(t.n_delay, "n_delay"));
  w.u16(detail::checked_u16(t.n_tx, "n_tx"));
  w.u16(detail::checked_u16(t.latent.c, "latent C"));
  w.u16(detail::checked_u16(t.latent.h, "latent H"));
  w.u16(detail::checked_u16(t.latent.w, "latent W"));
  w.u16(detail::checked_u16(t.hidden, "hidden"));
  w.u8(detail::checked_u8(s.patch, "patch"));
  w.u8(detail::checked_u8(s.heads, "heads"));
  w.u8(detail::checked_u8(s.window, "window"));
  w.u8(detail::checked_u8(s.mlp_ratio, "mlp_ratio"));
  w.u16(detail::checked_u16(s.embed_dim, "embed_dim"));
  w.u16(detail::checked_u16(s.latent_channels, "latent_channels"));
  w.u8(detail::checked_u8(s.depths.size(), "stage count"));
  for (size_t d : s.depths) w.u8(detail::checked_u8(d, "depth"));
  w.f64(t.scale.offset);
  w.f64(t.scale.gain);
  w.f64(m.lambda);
  w.f64(m.entropy.ladder.base_step);
  w.u8(detail::checked_u8(static_cast<size_t>(m.entropy.ladder.n_levels), "n_levels"));

  const auto& tensors = t.weights.tensors();
  w.u16(detail::checked_u16(tensors.size() + 1, "tensor count"));
  for (const auto& tensor : tensors) detail::write_tensor(w, tensor);
  nn::NamedTensor em{"entropy", {static_cast<uint32_t>(m.entropy.channels()), 2}, {}};
  for (size_t c = 0; c < m.entropy.channels(); ++c) {
    em.data.push_back(m.entropy.loc[c]);
    em.data.push_back(m.entropy.log_scale[c]);
  }
  detail::write_tensor(w, em);
  return w.take();
}

inline CodecModel parse_weights(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_tag("CSIW");
  const uint8_t version = r.u8();
  if (version != kWeightFileVersion)
    throw FormatError("unsupported CSIW version " + std::to_string(version));
  const uint8_t arch = r.u8();
  if (arch > static_cast<uint8_t>(Architecture::swin_toy))
    throw FormatError("unknown architecture tag " + std::to_string(arch));
  CodecModel m;
  TransformParams& t = m.transform;
  t.arch = static_cast<Architecture>(arch);
  t.n_delay = r.u16();
  t.n_tx = r.u16();
  t.latent.c = r.u16();
  t.latent.h = r.u16();
  t.latent.w = r.u16();
  t.hidden = r.u16();
  t.swin.patch = r.u8();
  t.swin.heads = r.u8();
  t.swin.window = r.u8();
  t.swin.mlp_ratio = r.u8();
  t.swin.embed_dim = r.u16();
  t.swin.latent_channels = r.u16();
  t.swin.depths.resize(r.u8());
  for (auto& d : t.swin.depths) d = r.u8();
  t.scale.offset = r.f64();
  t.scale.gain = r.f64();
  m.lambda = r.f64();
  m.entropy.ladder.base_step = r.f64();
  m.entropy.ladder.n_levels = r.u8();
  m.entropy.ladder.validate();

  const size_t count = r.u16();
  if (count == 0) throw FormatError("weight file has no entropy model");
  for (size_t i = 0; i + 1 < count; ++i) {
    auto tensor = detail::read_tensor(r);
    auto& ts = t.weights.tensors();
    ts.push_back(std::move(tensor));
  }
  const auto em = detail::read_tensor(r);
  if (em.name != "entropy" || em.dims.size() != 2 || em.dims[1] != 2)
    throw FormatError("last tensor must be the [C, 2] entropy model");
  for (size_t c = 0; c < em.dims[0]; ++c) {
    m.entropy.loc.push_back(em.data[2 * c]);
    m.entropy.log_scale.push_back(em.data[2 * c + 1]);
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after weight tensors");
  t.network();  // validates layout against the header fields
  if (t.network().latent_shape() != t.latent)
    throw FormatError("latent shape in header disagrees with architecture");
  if (m.entropy.channels() != t.latent.c)
    throw FormatError("entropy model channel count does not match latent");
  m.entropy.validate();
  return m;
}

inline void save_weights(const std::string& path, const CodecModel& m) {
  write_file(path, serialize_weights(m));
}

inline CodecModel load_weights(const std::string& path) { return parse_weights(read_file(path)); }

// Model as it exists after a save/load cycle (weights rounded to float32).
inline CodecModel round_trip_weights(const CodecModel& m) {
  return parse_weights(serialize_weights(m));
}

}  // namespace csi_ntc
