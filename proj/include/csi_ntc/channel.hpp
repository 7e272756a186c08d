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

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csi_ntc/binary_io.hpp"
#include "csi_ntc/errors.hpp"
#include "csi_ntc/rng.hpp"
#include "csi_ntc/tensor.hpp"

namespace csi_ntc {

using Complex = std::complex<double>;

struct ChannelConfig {
  size_t n_tx = 32;
  size_t n_subcarriers = 1024;
  size_t n_delay = 32;
  uint64_t seed = 0;
  size_t n_paths = 16;
  double decay = 0.1;

  void validate() const {
    auto fail = [](const std::string& what) { throw ConfigError("channel config: " + what); };
    if (n_tx == 0) fail("n_tx must be positive");
    if (n_subcarriers == 0 || (n_subcarriers & (n_subcarriers - 1)) != 0)
      fail("n_subcarriers must be a positive power of two");
    if (n_delay == 0 || n_delay > n_subcarriers) fail("need 0 < n_delay <= n_subcarriers");
    if (n_paths == 0 || n_paths > n_delay) fail("need 1 <= n_paths <= n_delay");
    if (!(decay >= 0.0) || !std::isfinite(decay)) fail("decay must be finite and >= 0");
    if (n_delay > UINT16_MAX || n_tx > UINT16_MAX) fail("dimensions must fit in 16 bits");
  }
};

// Row-major complex matrix; for channels rows are subcarriers (or delays) and
// columns are transmit antennas.
struct ComplexMatrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<Complex> data;

  ComplexMatrix() = default;
  ComplexMatrix(size_t r, size_t c) : rows(r), cols(c), data(r * c) {}

  Complex& operator()(size_t r, size_t c) { return data[r * cols + c]; }
  const Complex& operator()(size_t r, size_t c) const { return data[r * cols + c]; }
  bool operator==(const ComplexMatrix&) const = default;
};

inline double frobenius_sq(const ComplexMatrix& m) {
  double s = 0.0;
  for (const auto& v : m.data) s += std::norm(v);
  return s;
}

// Affine map from raw delay-domain values into the coded range:
// normalized = raw * gain + offset.
struct Normalization {
  double offset = 0.0;
  double gain = 1.0;

  double apply(double raw) const { return raw * gain + offset; }
  double invert(double normalized) const { return (normalized - offset) / gain; }
  bool operator==(const Normalization&) const = default;
};

// Preprocessed channel: planes 2 x n_delay x n_tx (real, imaginary).
struct ChannelTensor {
  Tensor3<double> planes;
  Normalization scale;

  size_t n_delay() const { return planes.shape.h; }
  size_t n_tx() const { return planes.shape.w; }

  Tensor3<double> denormalized() const {
    Tensor3<double> raw = planes;
    for (auto& v : raw.data) v = scale.invert(v);
    return raw;
  }
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Unitary DFT along the row axis of every column, in place.
// sign = FFTW_FORWARD gives frequency from delay.
inline void column_dft(ComplexMatrix& m, int sign) {
  if (m.rows == 0 || m.cols == 0) return;
  static_assert(sizeof(Complex) == sizeof(fftw_complex));
  auto* buf = reinterpret_cast<fftw_complex*>(m.data.data());
  const int n = static_cast<int>(m.rows);
  const int stride = static_cast<int>(m.cols);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_many_dft(1, &n, stride, buf, nullptr, stride, 1, buf, nullptr, stride,
                              1, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  const double norm = 1.0 / std::sqrt(static_cast<double>(m.rows));
  for (auto& v : m.data) v *= norm;
}

inline void check_shape(const ComplexMatrix& h, const ChannelConfig& cfg) {
  if (h.rows != cfg.n_subcarriers || h.cols != cfg.n_tx || h.data.size() != h.rows * h.cols) {
    throw DimensionError("channel is " + std::to_string(h.rows) + "x" + std::to_string(h.cols) +
                         ", config expects " + std::to_string(cfg.n_subcarriers) + "x" +
                         std::to_string(cfg.n_tx));
  }
}

}  // namespace detail

// Frequency -> delay domain (unitary inverse DFT over subcarriers).
inline ComplexMatrix to_delay_domain(ComplexMatrix h) {
  detail::column_dft(h, FFTW_BACKWARD);
  return h;
}

// Delay -> frequency domain (unitary DFT over the row axis).
inline ComplexMatrix to_frequency_domain(ComplexMatrix d) {
  detail::column_dft(d, FFTW_FORWARD);
  return d;
}

// Sparse exponential-profile multipath channel in the frequency domain.
// Each sample draws n_paths distinct delays in [0, n_delay) shared by all
// antennas; every (delay, antenna) tap is circular complex Gaussian with
// variance proportional to exp(-decay * delay), scaled so that
// E[|H|_F^2] = n_subcarriers * n_tx.
inline ComplexMatrix generate_channel(const ChannelConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);

  std::vector<size_t> delays(cfg.n_delay);
  std::iota(delays.begin(), delays.end(), size_t{0});
  for (size_t i = 0; i < cfg.n_paths; ++i) {
    const size_t j = i + static_cast<size_t>(rng.below(cfg.n_delay - i));
    std::swap(delays[i], delays[j]);
  }
  delays.resize(cfg.n_paths);
  std::sort(delays.begin(), delays.end());

  std::vector<double> weight(cfg.n_paths);
  for (size_t l = 0; l < cfg.n_paths; ++l)
    weight[l] = std::exp(-cfg.decay * static_cast<double>(delays[l]));
  const double total = std::accumulate(weight.begin(), weight.end(), 0.0);

  ComplexMatrix d(cfg.n_subcarriers, cfg.n_tx);
  for (size_t l = 0; l < cfg.n_paths; ++l) {
    const double variance = static_cast<double>(cfg.n_subcarriers) * weight[l] / total;
    const double sigma = std::sqrt(variance / 2.0);
    for (size_t a = 0; a < cfg.n_tx; ++a) {
      const double re = rng.normal();
      const double im = rng.normal();
      d(delays[l], a) = Complex(sigma * re, sigma * im);
    }
  }
  return to_frequency_domain(std::move(d));
}

// Per-sample channel configs for a dataset: sample i gets an independent
// stream derived from (cfg.seed, i).
inline ChannelConfig sample_config(const ChannelConfig& cfg, uint64_t index) {
  ChannelConfig c = cfg;
  c.seed = Rng::splitmix64(cfg.seed ^ Rng::splitmix64(index + 1));
  return c;
}

// Truncated delay-domain channel as 2 x n_delay x n_tx raw planes.
inline Tensor3<double> delay_planes(const ComplexMatrix& h_freq, const ChannelConfig& cfg) {
  detail::check_shape(h_freq, cfg);
  const ComplexMatrix d = to_delay_domain(h_freq);
  Tensor3<double> planes(Shape3{2, cfg.n_delay, cfg.n_tx});
  for (size_t t = 0; t < cfg.n_delay; ++t) {
    for (size_t a = 0; a < cfg.n_tx; ++a) {
      planes(0, t, a) = d(t, a).real();
      planes(1, t, a) = d(t, a).imag();
    }
  }
  return planes;
}

// Zero-centred gain mapping the largest magnitude in `raw` to 1.
inline Normalization fit_normalization(std::span<const Tensor3<double>> raw) {
  double peak = 0.0;
  for (const auto& t : raw)
    for (double v : t.data) peak = std::max(peak, std::abs(v));
  return Normalization{0.0, peak > 0.0 ? 1.0 / peak : 1.0};
}

inline ChannelTensor normalize(Tensor3<double> raw, const Normalization& scale) {
  for (auto& v : raw.data) v = scale.apply(v);
  return ChannelTensor{std::move(raw), scale};
}

// Inverse DFT over subcarriers, keep the first n_delay taps, split into
// real/imag planes and normalize. Without an explicit scale a per-call
// zero-centred peak normalization is used.
inline ChannelTensor preprocess(const ComplexMatrix& h_freq, const ChannelConfig& cfg,
                                std::optional<Normalization> scale = std::nullopt) {
  Tensor3<double> raw = delay_planes(h_freq, cfg);
  const Normalization s = scale ? *scale : fit_normalization(std::span(&raw, 1));
  return normalize(std::move(raw), s);
}

// Preprocess a whole dataset under one shared normalization fitted to it.
inline std::vector<ChannelTensor> preprocess_dataset(std::span<const ComplexMatrix> channels,
                                                     const ChannelConfig& cfg) {
  std::vector<Tensor3<double>> raw;
  raw.reserve(channels.size());
  for (const auto& h : channels) raw.push_back(delay_planes(h, cfg));
  const Normalization scale = fit_normalization(raw);
  std::vector<ChannelTensor> out;
  out.reserve(raw.size());
  for (auto& r : raw) out.push_back(normalize(std::move(r), scale));
  return out;
}

// Samples first..first+count-1 of the stream seeded by cfg.seed, normalized
// with one dataset-wide (offset, gain) unless `scale` is given.
inline std::vector<ChannelTensor> generate_dataset(const ChannelConfig& cfg, size_t count,
                                                   uint64_t first = 0,
                                                   std::optional<Normalization> scale = std::nullopt) {
  std::vector<ComplexMatrix> channels;
  channels.reserve(count);
  for (size_t i = 0; i < count; ++i) channels.push_back(generate_channel(sample_config(cfg, first + i)));
  if (!scale) return preprocess_dataset(channels, cfg);
  std::vector<ChannelTensor> out;
  out.reserve(count);
  for (const auto& h : channels) out.push_back(preprocess(h, cfg, scale));
  return out;
}

inline ComplexMatrix postprocess(const ChannelTensor& t, const ChannelConfig& cfg) {
  const Shape3 expect{2, cfg.n_delay, cfg.n_tx};
  if (t.planes.shape != expect || t.planes.data.size() != expect.size()) {
    throw DimensionError("channel tensor is " + t.planes.shape.str() + ", expected " +
                         expect.str());
  }
  ComplexMatrix d(cfg.n_subcarriers, cfg.n_tx);
  for (size_t r = 0; r < cfg.n_delay; ++r) {
    for (size_t a = 0; a < cfg.n_tx; ++a) {
      d(r, a) = Complex(t.scale.invert(t.planes(0, r, a)), t.scale.invert(t.planes(1, r, a)));
    }
  }
  return to_frequency_domain(std::move(d));
}

// |h - h_hat|_F^2 / |h|_F^2 on de-normalized planes.
inline double nmse(const ChannelTensor& h, const ChannelTensor& h_hat) {
  if (h.planes.shape != h_hat.planes.shape) {
    throw DimensionError("nmse shape mismatch: " + h.planes.shape.str() + " vs " +
                         h_hat.planes.shape.str());
  }
  double err = 0.0;
  double ref = 0.0;
  for (size_t i = 0; i < h.planes.data.size(); ++i) {
    const double a = h.scale.invert(h.planes.data[i]);
    const double b = h_hat.scale.invert(h_hat.planes.data[i]);
    err += (a - b) * (a - b);
    ref += a * a;
  }
  if (!(ref > 0.0)) throw DomainError("nmse reference has zero norm");
  return err / ref;
}

// Full-band NMSE between frequency-domain channels.
inline double nmse(const ComplexMatrix& h, const ComplexMatrix& h_hat) {
  if (h.rows != h_hat.rows || h.cols != h_hat.cols)
    throw DimensionError("nmse shape mismatch between frequency channels");
  double err = 0.0;
  for (size_t i = 0; i < h.data.size(); ++i) err += std::norm(h.data[i] - h_hat.data[i]);
  const double ref = frobenius_sq(h);
  if (!(ref > 0.0)) throw DomainError("nmse reference has zero norm");
  return err / ref;
}

// ---------------------------------------------------------------------------
// Canonical tensor file ("CSIT"), little-endian:
//   magic "CSIT" | version u8 | n_delay u16 | n_tx u16 | count u32 |
//   offset f64 | gain f64 | count x 2 x n_delay x n_tx float32 (C order)

inline constexpr uint8_t kTensorFileVersion = 1;

inline std::vector<uint8_t> serialize_tensor_file(std::span<const ChannelTensor> samples,
                                                  size_t n_delay, size_t n_tx) {
  if (n_delay > UINT16_MAX || n_tx > UINT16_MAX)
    throw ConfigError("tensor file dimensions must fit in 16 bits");
  const Shape3 shape{2, n_delay, n_tx};
  const Normalization scale = samples.empty() ? Normalization{} : samples.front().scale;
  ByteWriter w;
  w.tag("CSIT");
  w.u8(kTensorFileVersion);
  w.u16(static_cast<uint16_t>(n_delay));
  w.u16(static_cast<uint16_t>(n_tx));
  w.u32(static_cast<uint32_t>(samples.size()));
  w.f64(scale.offset);
  w.f64(scale.gain);
  for (const auto& s : samples) {
    if (s.planes.shape != shape) throw DimensionError("sample shape " + s.planes.shape.str());
    if (!(s.scale == scale))
      throw ConfigError("all samples in a tensor file must share one normalization");
    for (double v : s.planes.data) w.f32(static_cast<float>(v));
  }
  return w.take();
}

inline std::vector<ChannelTensor> parse_tensor_file(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_tag("CSIT");
  const uint8_t version = r.u8();
  if (version != kTensorFileVersion)
    throw FormatError("unsupported CSIT version " + std::to_string(version));
  const size_t n_delay = r.u16();
  const size_t n_tx = r.u16();
  const size_t count = r.u32();
  Normalization scale;
  scale.offset = r.f64();
  scale.gain = r.f64();
  if (!(scale.gain != 0.0) || !std::isfinite(scale.gain) || !std::isfinite(scale.offset))
    throw FormatError("CSIT normalization is not usable");
  const Shape3 shape{2, n_delay, n_tx};
  if (r.remaining() != count * shape.size() * 4)
    throw FormatError("CSIT payload size " + std::to_string(r.remaining()) +
                      " does not match header");
  std::vector<ChannelTensor> out;
  out.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    ChannelTensor t{Tensor3<double>(shape), scale};
    for (auto& v : t.planes.data) v = static_cast<double>(r.f32());
    out.push_back(std::move(t));
  }
  return out;
}

inline void write_tensor_file(const std::string& path, std::span<const ChannelTensor> samples,
                              size_t n_delay, size_t n_tx) {
  write_file(path, serialize_tensor_file(samples, n_delay, n_tx));
}

inline std::vector<ChannelTensor> read_tensor_file(const std::string& path) {
  return parse_tensor_file(read_file(path));
}

}  // namespace csi_ntc
