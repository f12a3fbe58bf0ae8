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

#include "dfog/layout.hpp"

#include <algorithm>
#include <string>

namespace dfog {

void GraphMeta::validate() const {
  if (num_vertices < 1) throw ConfigError("graph must have at least one vertex");
  if (num_partitions < 1) throw ConfigError("number of partitions must be at least 1");
  if (csr_inflate_ratio < 1.0) throw ConfigError("csr inflate ratio must be >= 1");
  if (gamma < 1.0) throw ConfigError("gamma must be >= 1");
  if (!(filter_skip_ratio > 0.0)) throw ConfigError("filter skip ratio must be > 0");
}

PartitionLayout::PartitionLayout(std::vector<VertexId> boundaries) : bounds_(std::move(boundaries)) {
  if (bounds_.size() < 2) throw ConfigError("partition layout needs at least two boundaries");
  if (bounds_.front() != 0) throw ConfigError("partition layout must start at vertex 0");
  if (!std::is_sorted(bounds_.begin(), bounds_.end())) {
    throw ConfigError("partition boundaries must be non-decreasing");
  }
  if (bounds_.back() >= static_cast<VertexId>(num_partitions())) {
    for (std::size_t p = 0; p + 1 < bounds_.size(); ++p) {
      if (bounds_[p] == bounds_[p + 1]) {
        throw ConfigError("partition " + std::to_string(p) + " is empty");
      }
    }
  }
}

std::uint32_t PartitionLayout::owner(VertexId v) const {
  if (v >= num_vertices()) {
    throw RangeError("vertex " + std::to_string(v) + " out of range [0, " +
                     std::to_string(num_vertices()) + ")");
  }
  auto it = std::upper_bound(bounds_.begin(), bounds_.end(), v);
  return static_cast<std::uint32_t>(it - bounds_.begin() - 1);
}

BatchLayout::BatchLayout(VertexId batch_size) : batch_size_(batch_size) {
  if (batch_size_ < 1) throw ConfigError("batch size must be >= 1");
}

VertexRange BatchLayout::batch(VertexRange partition, std::uint64_t b) const {
  VertexId lo = partition.lo + b * batch_size_;
  if (lo >= partition.hi) throw RangeError("batch index out of range");
  return {lo, std::min(partition.hi, lo + batch_size_)};
}

std::vector<VertexRange> BatchLayout::batches_of(VertexRange partition) const {
  std::vector<VertexRange> out;
  out.reserve(num_batches(partition));
  for (VertexId lo = partition.lo; lo < partition.hi; lo += batch_size_) {
    out.push_back({lo, std::min(partition.hi, lo + batch_size_)});
  }
  return out;
}

Location locate(VertexId v, const PartitionLayout& layout, const BatchLayout& batching) {
  std::uint32_t p = layout.owner(v);
  VertexRange r = layout.range(p);
  std::uint64_t b = batching.batch_of(r, v);
  return {p, b, v - r.lo - b * batching.batch_size()};
}

VertexId vertex_at(const Location& loc, const PartitionLayout& layout,
                   const BatchLayout& batching) {
  VertexRange b = batching.batch(layout.range(loc.partition), loc.batch);
  VertexId v = b.lo + loc.offset;
  if (v >= b.hi) throw RangeError("offset outside batch");
  return v;
}

DegreeTable DegreeTable::from_edges(VertexId num_vertices, std::span<const Edge> edges) {
  DegreeTable t(num_vertices);
  for (const Edge& e : edges) t.add_edge(e.src, e.dst);
  return t;
}

std::uint64_t DegreeTable::incoming(VertexRange r) const {
  std::uint64_t sum = 0;
  for (VertexId v = r.lo; v < r.hi; ++v) sum += in_[v];
  return sum;
}

std::uint64_t DegreeTable::outgoing(VertexRange r) const {
  std::uint64_t sum = 0;
  for (VertexId v = r.lo; v < r.hi; ++v) sum += out_[v];
  return sum;
}

}  // namespace dfog
