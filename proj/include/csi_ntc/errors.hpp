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

#include <stdexcept>
#include <string>

namespace csi_ntc {

// Error taxonomy. The CLI maps each family to an exit code: configuration
// errors exit 2, data/format errors exit 3, capacity errors exit 4.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Shape disagreement between an input and what an operation expects.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Mathematically undefined request (e.g. NMSE against a zero reference).
class DomainError : public Error {
 public:
  using Error::Error;
};

class LadderError : public Error {
 public:
  using Error::Error;
};

// A PMF table cannot give every in-range bin a nonzero frequency.
class PrecisionError : public Error {
 public:
  using Error::Error;
};

// Symbol outside the table support handed to the entropy coder.
class CoderDomainError : public Error {
 public:
  using Error::Error;
};

class CorruptionError : public Error {
 public:
  using Error::Error;
};

class TruncationError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace csi_ntc
