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
#include <string>
#include <vector>

#include "dfog/io.hpp"
#include "dfog/layout.hpp"

namespace dfog {

/// One (source partition, destination batch) edge chunk. File names are
/// relative to the graph directory and empty when the file is elided.
struct ChunkRecord {
  std::uint32_t source_partition = 0;
  std::uint32_t node = 0;
  std::uint64_t batch = 0;
  std::uint64_t edge_count = 0;
  std::uint64_t dcsr_len = 0;  // sources with at least one edge in the chunk
  bool has_csr = false;
  std::string dcsr_file;
  std::string csr_file;
};

/// Dispatching graph (source vertex -> local batch) for messages that node
/// `node` receives from partition `source_partition`, plus its pull lists.
struct DispatchRecord {
  std::uint32_t source_partition = 0;
  std::uint32_t node = 0;
  std::uint64_t edge_count = 0;
  std::uint64_t dcsr_len = 0;
  bool has_csr = false;
  std::string dcsr_file;
  std::string csr_file;
  std::string pull_file;
};

/// Filter list L_ij: vertices of partition `from` with an edge into `to`.
struct FilterRecord {
  std::uint32_t from = 0;
  std::uint32_t to = 0;
  std::uint64_t length = 0;
  std::string file;
};

/// Everything a node needs to find its share of a preprocessed graph.
///
/// Serialized as JSON (manifest.json). Chunk records are ordered by
/// (node, source partition, batch); dispatch records by (node, source
/// partition); filter records by (from, to) with from != to.
struct Manifest {
  static constexpr std::uint32_t kFormatVersion = 1;

  GraphMeta meta;
  PartitionLayout layout;
  BatchLayout batching;
  bool is_reversed = false;
  std::string reversed_graph;  // sibling directory of the reversed graph, if built
  std::vector<std::uint64_t> incoming_edges;  // |E_i^i| per partition
  std::vector<std::uint64_t> outgoing_edges;  // |E_i^o| per partition
  std::vector<ChunkRecord> chunks;
  std::vector<DispatchRecord> dispatch;
  std::vector<FilterRecord> filters;

  std::uint64_t num_batches(std::uint32_t node) const {
    return batching.num_batches(layout.range(node));
  }
  const ChunkRecord& chunk(std::uint32_t source_partition, std::uint32_t node,
                           std::uint64_t batch) const;
  const DispatchRecord& dispatch_for(std::uint32_t source_partition, std::uint32_t node) const;
  const FilterRecord& filter(std::uint32_t from, std::uint32_t to) const;

  static std::string node_dir(std::uint32_t node) { return "node" + std::to_string(node); }
  static std::string out_degree_file(std::uint32_t node) {
    return node_dir(node) + "/out_degree.bin";
  }
  static std::string in_degree_file(std::uint32_t node) {
    return node_dir(node) + "/in_degree.bin";
  }

  void validate() const;
  void save(const std::filesystem::path& dir) const;
  static Manifest load(const std::filesystem::path& dir);
  static bool exists(const std::filesystem::path& dir);

  friend bool operator==(const Manifest&, const Manifest&);
};

// Sorted vertex-ID list files (filter lists):
//   "DFOL" | version u32 | count u64 | ids u64[count]
// Pull-list files (one list per destination batch):
//   "DFOP" | version u32 | batches u64 | offsets u64[batches + 1] | ids u64[]

inline constexpr std::size_t kIdListHeaderBytes = 16;
inline constexpr std::size_t kPullHeaderBytes = 16;

void write_id_list(const std::filesystem::path& path, std::span<const VertexId> ids);
std::vector<VertexId> read_id_list(const std::filesystem::path& path);

/// Opened pull-list file.
class PullListFile {
 public:
  explicit PullListFile(const std::filesystem::path& path);
  std::uint64_t num_batches() const { return offsets_.size() - 1; }
  std::uint64_t list_size(std::uint64_t batch) const {
    return offsets_.at(batch + 1) - offsets_.at(batch);
  }
  /// Byte range of the batch's IDs inside the file.
  std::uint64_t list_begin(std::uint64_t batch) const {
    return ids_base_ + offsets_.at(batch) * 8;
  }
  std::vector<VertexId> read_list(std::uint64_t batch) const;
  const File& file() const { return file_; }

 private:
  File file_;
  std::vector<std::uint64_t> offsets_;
  std::uint64_t ids_base_ = 0;
};

}  // namespace dfog
