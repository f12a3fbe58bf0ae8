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

#include "dfog/partition.hpp"

#include <algorithm>
#include <string>

namespace dfog {

namespace {

// Largest end in (start, limit] with prefix(end) - prefix(start) <= bound.
// Returns start when even one item exceeds the bound.
VertexId furthest_end(const std::function<std::uint64_t(VertexId)>& prefix, VertexId start,
                      VertexId limit, std::uint64_t bound) {
  std::uint64_t base = prefix(start);
  VertexId lo = start;
  VertexId hi = limit;
  while (lo < hi) {
    VertexId mid = lo + (hi - lo + 1) / 2;
    if (prefix(mid) - base <= bound) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return lo;
}

bool feasible(const std::function<std::uint64_t(VertexId)>& prefix, VertexId n,
              std::uint32_t parts, std::uint64_t bound) {
  VertexId start = 0;
  for (std::uint32_t p = 0; p < parts && start < n; ++p) {
    VertexId end = furthest_end(prefix, start, n, bound);
    if (end == start) return false;
    start = end;
  }
  return start == n;
}

}  // namespace

std::vector<VertexId> balanced_split(const std::function<std::uint64_t(VertexId)>& prefix,
                                     VertexId n, std::uint32_t parts,
                                     std::uint64_t max_item_weight) {
  if (parts < 1) throw ConfigError("need at least one partition");
  if (parts > n) {
    throw ConfigError("cannot split " + std::to_string(n) + " vertices into " +
                      std::to_string(parts) + " non-empty partitions");
  }
  std::uint64_t total = prefix(n);
  std::uint64_t lo = std::max<std::uint64_t>(max_item_weight, (total + parts - 1) / parts);
  std::uint64_t hi = std::max(lo, total);
  while (lo < hi) {
    std::uint64_t mid = lo + (hi - lo) / 2;
    if (feasible(prefix, n, parts, mid)) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  // Greedy with the optimal bound, capped so every later part keeps a vertex.
  std::vector<VertexId> bounds{0};
  VertexId start = 0;
  for (std::uint32_t p = 0; p + 1 < parts; ++p) {
    VertexId cap = n - (parts - p - 1);
    VertexId end = furthest_end(prefix, start, cap, lo);
    if (end == start) end = start + 1;
    bounds.push_back(end);
    start = end;
  }
  bounds.push_back(n);
  return bounds;
}

PartitionLayout partition_weights(std::span<const std::uint64_t> weights,
                                  std::uint32_t partitions) {
  std::vector<std::uint64_t> prefix(weights.size() + 1, 0);
  std::uint64_t max_w = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    prefix[i + 1] = prefix[i] + weights[i];
    max_w = std::max(max_w, weights[i]);
  }
  return PartitionLayout(balanced_split([&](VertexId k) { return prefix[k]; }, weights.size(),
                                        partitions, max_w));
}

PartitionLayout partition_vertices(const DegreeTable& degrees, std::uint32_t partitions,
                                   std::uint64_t alpha) {
  std::vector<std::uint64_t> weights(degrees.num_vertices());
  for (VertexId v = 0; v < weights.size(); ++v) weights[v] = vertex_weight(v, alpha, degrees);
  return partition_weights(weights, partitions);
}

VertexId normalize_batch_size(VertexId requested) {
  return std::max<VertexId>(64, requested / 64 * 64);
}

VertexId choose_batch_size(const BatchSizing& s) {
  if (s.threads < 1) throw ConfigError("threads must be >= 1");
  if (s.mode == OocMode::fully) {
    if (s.memory_budget_bytes == 0) throw ConfigError("memory budget must be > 0");
    if (s.vertex_record_bytes == 0) throw ConfigError("vertex record size must be > 0");
    // Largest B with B * record * T < budget / 2, i.e. 2 * B * record * T < budget.
    std::uint64_t per_vertex = s.vertex_record_bytes * s.threads;
    std::uint64_t b = (s.memory_budget_bytes - 1) / (2 * per_vertex);
    b = b / 64 * 64;
    if (b < 64) {
      throw ConfigError("memory budget " + std::to_string(s.memory_budget_bytes) +
                        " bytes is too small for a 64-vertex batch with " +
                        std::to_string(s.threads) + " threads");
    }
    return b;
  }
  // Semi out-of-core: min_partition / B >= 1.5 T  <=>  B <= 2 * min / (3 T).
  std::uint64_t b = 2 * s.min_partition_size / (3ull * s.threads);
  return std::max<std::uint64_t>(64, b / 64 * 64);
}

}  // namespace dfog
