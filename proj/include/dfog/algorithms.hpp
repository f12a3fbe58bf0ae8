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

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dfog/engine.hpp"

namespace dfog {

inline constexpr std::uint32_t kUnreached = std::numeric_limits<std::uint32_t>::max();

enum class Algorithm : std::uint8_t { pagerank, bfs, wcc, sssp };

const char* to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

enum class OutputType : std::uint8_t { f64, u32, u64, f32 };

const char* to_string(OutputType t);
std::size_t element_bytes(OutputType t);

struct AlgorithmParams {
  Algorithm algorithm = Algorithm::pagerank;
  std::uint32_t iterations = 5;
  double damping = 0.85;
  VertexId source = 0;
};

struct AlgorithmSpec {
  Algorithm algorithm;
  const char* name;
  std::uint32_t edge_payload_bytes;  // 0, or 4 for a float weight
  bool needs_reversed;
  const char* output_array;
  OutputType output_type;
};

const AlgorithmSpec& algorithm_spec(Algorithm a);

/// Checks parameters against the graph; throws PreconditionError or
/// ConfigError before any Process call is made.
void validate_params(const AlgorithmParams& params, const Manifest& manifest);

/// PageRank with uniform start, uniform teleport and dangling mass spread
/// uniformly. Contributions are summed in 2^-62 fixed point, so ranks do
/// not depend on partitioning or message order.
VertexArray<double> pagerank(Engine& engine, std::uint32_t iterations, double damping);

/// Hop distance from `source`; kUnreached elsewhere.
VertexArray<std::uint32_t> bfs(Engine& engine, VertexId source);

/// Minimum vertex ID of each weakly connected component.
VertexArray<VertexId> wcc(Engine& engine);

/// Shortest distances over non-negative float weights; +inf when unreachable.
VertexArray<float> sssp(Engine& engine, VertexId source);

/// Validates, runs the driver and returns the output array name.
std::string run_algorithm(Engine& engine, const AlgorithmParams& params);

namespace fixed {

inline constexpr double kScale = 4611686018427387904.0;  // 2^62

std::int64_t from_double(double x);
double to_double(std::int64_t x);

}  // namespace fixed

}  // namespace dfog
