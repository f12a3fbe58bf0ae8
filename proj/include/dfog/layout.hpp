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
#include <span>
#include <vector>

#include "dfog/types.hpp"

namespace dfog {

/// Graph-wide parameters fixed at preprocessing time.
struct GraphMeta {
  std::uint64_t num_vertices = 1;
  std::uint64_t num_edges = 0;
  std::uint32_t edge_payload_bytes = 0;
  std::uint32_t num_partitions = 1;
  // Balance coefficient; weight of one vertex relative to one edge endpoint.
  std::uint64_t alpha = 1;
  double csr_inflate_ratio = 32.0;
  double gamma = 1024.0;
  double filter_skip_ratio = 2.0;

  static std::uint64_t default_alpha(std::uint32_t partitions) { return 2ull * partitions - 1; }
  void validate() const;
};

/// Contiguous split of [0, |V|) into P owner ranges.
class PartitionLayout {
 public:
  PartitionLayout() = default;
  explicit PartitionLayout(std::vector<VertexId> boundaries);

  std::uint32_t num_partitions() const { return static_cast<std::uint32_t>(bounds_.size() - 1); }
  VertexId num_vertices() const { return bounds_.back(); }
  VertexRange range(std::uint32_t p) const { return {bounds_.at(p), bounds_.at(p + 1)}; }
  std::uint32_t owner(VertexId v) const;
  const std::vector<VertexId>& boundaries() const { return bounds_; }

  friend bool operator==(const PartitionLayout&, const PartitionLayout&) = default;

 private:
  std::vector<VertexId> bounds_{0, 1};
};

/// Fixed-size batches inside one partition; the last batch may be short.
class BatchLayout {
 public:
  BatchLayout() = default;
  explicit BatchLayout(VertexId batch_size);

  VertexId batch_size() const { return batch_size_; }
  std::uint64_t num_batches(VertexRange partition) const {
    return (partition.size() + batch_size_ - 1) / batch_size_;
  }
  VertexRange batch(VertexRange partition, std::uint64_t b) const;
  std::vector<VertexRange> batches_of(VertexRange partition) const;
  std::uint64_t batch_of(VertexRange partition, VertexId v) const {
    return (v - partition.lo) / batch_size_;
  }

  friend bool operator==(const BatchLayout&, const BatchLayout&) = default;

 private:
  VertexId batch_size_ = 64;
};

struct Location {
  std::uint32_t partition = 0;
  std::uint64_t batch = 0;
  std::uint64_t offset = 0;
  friend bool operator==(const Location&, const Location&) = default;
};

/// Maps a global vertex ID to its owner partition, batch and offset.
Location locate(VertexId v, const PartitionLayout& layout, const BatchLayout& batching);
/// Inverse of locate().
VertexId vertex_at(const Location& loc, const PartitionLayout& layout, const BatchLayout& batching);

struct Edge {
  VertexId src = 0;
  VertexId dst = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Per-vertex in/out degrees of a graph held in memory.
class DegreeTable {
 public:
  DegreeTable() = default;
  explicit DegreeTable(VertexId num_vertices) : in_(num_vertices, 0), out_(num_vertices, 0) {}
  static DegreeTable from_edges(VertexId num_vertices, std::span<const Edge> edges);

  void add_edge(VertexId src, VertexId dst) {
    ++out_.at(src);
    ++in_.at(dst);
  }
  VertexId num_vertices() const { return in_.size(); }
  std::uint64_t in_degree(VertexId v) const { return in_.at(v); }
  std::uint64_t out_degree(VertexId v) const { return out_.at(v); }
  /// |E_p^i|: edges whose destination lies in the range.
  std::uint64_t incoming(VertexRange r) const;
  /// |E_p^o|: edges whose source lies in the range.
  std::uint64_t outgoing(VertexRange r) const;

 private:
  std::vector<std::uint64_t> in_;
  std::vector<std::uint64_t> out_;
};

/// Balance weight of one vertex: alpha + in-degree + out-degree.
inline std::uint64_t vertex_weight(VertexId v, std::uint64_t alpha, const DegreeTable& degrees) {
  return alpha + degrees.in_degree(v) + degrees.out_degree(v);
}

}  // namespace dfog
