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

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "csi_ntc/errors.hpp"
#include "csi_ntc/rng.hpp"

namespace csi_ntc::nn {

struct NamedTensor {
  std::string name;
  std::vector<uint32_t> dims;
  std::vector<double> data;

  bool operator==(const NamedTensor&) const = default;
};

// Ordered collection of trainable tensors. Layers refer to their tensors by
// index, so a ParamSet and a gradient set built with zeros_like() line up.
class ParamSet {
 public:
  size_t add(std::string name, std::vector<uint32_t> dims, double fill = 0.0) {
    const size_t n = std::accumulate(dims.begin(), dims.end(), size_t{1},
                                     [](size_t a, uint32_t b) { return a * b; });
    tensors_.push_back({std::move(name), std::move(dims), std::vector<double>(n, fill)});
    return tensors_.size() - 1;
  }

  std::vector<double>& operator[](size_t i) { return tensors_[i].data; }
  const std::vector<double>& operator[](size_t i) const { return tensors_[i].data; }

  std::vector<NamedTensor>& tensors() { return tensors_; }
  const std::vector<NamedTensor>& tensors() const { return tensors_; }

  size_t find(const std::string& name) const {
    for (size_t i = 0; i < tensors_.size(); ++i)
      if (tensors_[i].name == name) return i;
    throw FormatError("no tensor named " + name);
  }

  size_t scalar_count() const {
    size_t n = 0;
    for (const auto& t : tensors_) n += t.data.size();
    return n;
  }

  ParamSet zeros_like() const {
    ParamSet g = *this;
    for (auto& t : g.tensors_) std::fill(t.data.begin(), t.data.end(), 0.0);
    return g;
  }

  void set_zero() {
    for (auto& t : tensors_) std::fill(t.data.begin(), t.data.end(), 0.0);
  }

  bool all_finite() const {
    for (const auto& t : tensors_)
      for (double v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const ParamSet&) const = default;

 private:
  std::vector<NamedTensor> tensors_;
};

inline void init_uniform_fan_in(std::vector<double>& w, size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : w) v = rng.uniform(-bound, bound);
}

}  // namespace csi_ntc::nn
