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

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "csi_ntc/errors.hpp"

namespace csi_ntc {

struct Shape3 {
  size_t c = 0;
  size_t h = 0;
  size_t w = 0;

  size_t size() const { return c * h * w; }
  bool operator==(const Shape3&) const = default;
  std::string str() const {
    return std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
  }
};

// Dense C-order rank-3 tensor.
template <typename T>
struct Tensor3 {
  Shape3 shape;
  std::vector<T> data;

  Tensor3() = default;
  explicit Tensor3(Shape3 s, T fill = T{}) : shape(s), data(s.size(), fill) {}
  Tensor3(Shape3 s, std::vector<T> values) : shape(s), data(std::move(values)) {
    if (data.size() != shape.size()) {
      throw DimensionError("tensor data size " + std::to_string(data.size()) +
                           " does not match shape " + shape.str());
    }
  }

  size_t size() const { return data.size(); }
  size_t index(size_t c, size_t h, size_t w) const {
    return (c * shape.h + h) * shape.w + w;
  }
  T& operator()(size_t c, size_t h, size_t w) { return data[index(c, h, w)]; }
  const T& operator()(size_t c, size_t h, size_t w) const {
    return data[index(c, h, w)];
  }
  bool operator==(const Tensor3&) const = default;
};

using LatentTensor = Tensor3<double>;

}  // namespace csi_ntc
