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
#include <optional>
#include <vector>

#include "dfog/edge_file.hpp"
#include "dfog/layout.hpp"
#include "dfog/manifest.hpp"
#include "dfog/partition.hpp"

namespace dfog {

struct PreprocessOptions {
  std::filesystem::path input;  // binary edges sorted by (src, dst)
  std::filesystem::path out;
  VertexId num_vertices = 0;
  std::uint32_t payload_bytes = 0;
  std::uint32_t partitions = 1;
  std::optional<std::uint64_t> alpha;  // default 2P - 1
  std::optional<VertexId> batch_size;  // otherwise chosen from the sizing rule
  OocMode mode = OocMode::fully;
  std::uint64_t memory_budget_bytes = 256ull << 20;
  std::uint32_t threads = 1;
  std::uint64_t vertex_record_bytes = 16;
  double csr_inflate_ratio = 32.0;
  double gamma = 1024.0;
  double filter_skip_ratio = 2.0;
  bool reversed = false;
};

/// Runs the full pipeline and writes manifest.json (plus reversed/ when
/// requested). Returns the forward manifest.
Manifest preprocess(const PreprocessOptions& options);

struct DegreePass {
  std::uint64_t num_edges = 0;
  std::filesystem::path out_degree;  // u64 per vertex
  std::filesystem::path in_degree;   // u64 per vertex
};

/// Validates ordering and ID range of the input while counting degrees with
/// at most `memory_budget_bytes` of counters (several passes when needed).
DegreePass count_degrees(const std::filesystem::path& input, VertexId num_vertices,
                         std::uint32_t payload_bytes, std::uint64_t memory_budget_bytes,
                         const std::filesystem::path& work_dir);

/// Balanced partition from on-disk degree files.
PartitionLayout partition_from_degrees(const DegreePass& degrees, VertexId num_vertices,
                                       std::uint32_t partitions, std::uint64_t alpha,
                                       const std::filesystem::path& work_dir);

/// Groups edges by (source partition, destination batch) and writes a DCSR
/// file for every non-empty chunk, plus a CSR file where should_build_csr
/// holds. Pending edges are spilled once they exceed the memory budget.
std::vector<ChunkRecord> build_chunks(const std::filesystem::path& sorted_edges,
                                      const GraphMeta& meta, const PartitionLayout& layout,
                                      const BatchLayout& batching,
                                      const std::filesystem::path& out_dir,
                                      std::uint64_t memory_budget_bytes);

/// One streaming pass producing L_ij for every ordered pair i != j.
std::vector<FilterRecord> build_filter_lists(const std::filesystem::path& sorted_edges,
                                             std::uint32_t payload_bytes,
                                             const PartitionLayout& layout,
                                             const std::filesystem::path& out_dir);

/// Derives dispatching graphs and pull lists from already-built chunks.
std::vector<DispatchRecord> build_dispatch_structures(const std::vector<ChunkRecord>& chunks,
                                                      const GraphMeta& meta,
                                                      const PartitionLayout& layout,
                                                      const BatchLayout& batching,
                                                      const std::filesystem::path& out_dir);

/// Sorted source IDs of partition `from` with an edge into partition `to`.
std::vector<VertexId> load_filter_list(const std::filesystem::path& graph_dir,
                                       const Manifest& manifest, std::uint32_t from,
                                       std::uint32_t to);

/// All edges of the graph, decoded from its chunks (order: node, partition, batch).
EdgeList decode_all_chunks(const std::filesystem::path& graph_dir, const Manifest& manifest);

}  // namespace dfog
