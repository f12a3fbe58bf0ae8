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
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dfog/algorithms.hpp"
#include "dfog/engine.hpp"
#include "dfog/preprocess.hpp"
#include "dfog/transport.hpp"

namespace dfog {

/// Sorts an unsorted edge file into `out`/edges.sorted.bin and preprocesses
/// it. `options.input` and `options.out` are filled in here.
Manifest build_graph(const std::filesystem::path& edge_file, const std::filesystem::path& out,
                     PreprocessOptions options);

/// Writes `edges` to a scratch file and calls build_graph.
Manifest build_graph(const EdgeList& edges, const std::filesystem::path& out,
                     PreprocessOptions options);

/// Name of node `rank`'s slice of an exported output array.
std::filesystem::path output_part(const std::filesystem::path& output_dir,
                                  const std::string& array, std::uint32_t rank);

struct NodeResult {
  std::string array;
  std::vector<CallTraffic> traffic;
  std::uint64_t peak_memory = 0;
  std::uint64_t calls = 0;
  std::optional<std::uint64_t> resumed_through;
};

/// Runs one node of an algorithm end to end and exports its output slice.
NodeResult run_node(const ClusterConfig& cluster, EngineConfig config,
                    const std::filesystem::path& graph_dir, const AlgorithmParams& params,
                    const std::filesystem::path& output_dir);

/// Runs P nodes as threads of this process over loopback sockets. Node
/// `rank` stores under storage_root/node<rank>. Rethrows the first failure.
std::vector<NodeResult> run_local_threads(std::uint32_t nodes, const EngineConfig& config,
                                          const std::filesystem::path& storage_root,
                                          const std::filesystem::path& graph_dir,
                                          const AlgorithmParams& params,
                                          const std::filesystem::path& output_dir);

/// Concatenates the node slices of `array` in rank order.
std::vector<std::byte> collect_output(const std::filesystem::path& output_dir,
                                      const std::string& array, std::uint32_t nodes);

}  // namespace dfog
