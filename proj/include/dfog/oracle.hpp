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
#include <optional>
#include <string>
#include <vector>

#include "dfog/algorithms.hpp"
#include "dfog/encoding.hpp"

namespace dfog::oracle {

/// Edge-count ceiling for the in-memory reference implementations.
inline constexpr std::uint64_t kMaxEdges = 10'000'000;

/// Throws ConfigError when the graph is too large for the oracles.
void check_guard(std::uint64_t num_edges);

std::vector<std::uint32_t> bfs(VertexId n, const EdgeList& edges, VertexId source);
std::vector<VertexId> wcc(VertexId n, const EdgeList& edges);
std::vector<float> sssp(VertexId n, const EdgeList& edges, VertexId source);
/// Same fixed-point contribution sums as the engine driver.
std::vector<double> pagerank(VertexId n, const EdgeList& edges, std::uint32_t iterations,
                             double damping);
/// Plain double-precision power iteration.
std::vector<double> pagerank_double(VertexId n, const EdgeList& edges, std::uint32_t iterations,
                                    double damping);

struct Mismatch {
  VertexId vertex = 0;
  std::string expected;
  std::string actual;
};

struct Report {
  bool pass = true;
  std::uint64_t checked = 0;
  std::uint64_t failed = 0;
  std::vector<Mismatch> mismatches;  // first few only
  std::string note;
};

/// Compares `actual` against the oracle for `params`. PR uses a relative
/// tolerance of `pr_tolerance` per vertex; the others must match exactly.
Report verify(VertexId n, const EdgeList& edges, const AlgorithmParams& params,
              const std::vector<std::byte>& actual, double pr_tolerance = 1e-9);

}  // namespace dfog::oracle
