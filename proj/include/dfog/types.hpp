/*
Copyright (c) 2026 The dfog Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace dfog {

static_assert(std::endian::native == std::endian::little,
              "on-disk and wire formats assume a little-endian host");

using VertexId = std::uint64_t;
using EdgeId = std::uint64_t;

/// Half-open range of vertex IDs.
struct VertexRange {
  VertexId lo = 0;
  VertexId hi = 0;

  constexpr VertexId size() const { return hi - lo; }
  constexpr bool empty() const { return hi == lo; }
  constexpr bool contains(VertexId v) const { return v >= lo && v < hi; }
  friend constexpr bool operator==(const VertexRange&, const VertexRange&) = default;
};

// Error hierarchy. Every engine failure derives from Error so the CLI can map
// each kind to its own exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The graph directory has no manifest (not preprocessed).
class ManifestMissing : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// The cluster size does not match the preprocessed partition count.
class ClusterMismatch : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A request for engine-owned memory would push usage past the budget.
class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

/// A peer went away or timed out mid-call.
class PeerLost : public Error {
 public:
  using Error::Error;
};

/// A traffic or structural invariant was violated at runtime.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

/// Journal and lineage disagree; the run cannot be resumed.
class RecoveryError : public Error {
 public:
  using Error::Error;
};

/// Zero-byte edge payload.
struct Empty {};

}  // namespace dfog
