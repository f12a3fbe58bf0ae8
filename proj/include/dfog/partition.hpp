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
#include <functional>
#include <span>
#include <vector>

#include "dfog/layout.hpp"

namespace dfog {

/// Optimal contiguous P-way split of a weight sequence given by its prefix
/// sums: prefix(k) = w[0] + ... + w[k-1], k in [0, n]. Minimizes the maximum
/// part weight (binary search on the bound, greedy feasibility) and keeps
/// every part non-empty when n >= parts.
std::vector<VertexId> balanced_split(const std::function<std::uint64_t(VertexId)>& prefix,
                                     VertexId n, std::uint32_t parts,
                                     std::uint64_t max_item_weight);

/// Contiguous partition minimizing max over i of alpha*|V_i| + |E_i^i| + |E_i^o|.
PartitionLayout partition_vertices(const DegreeTable& degrees, std::uint32_t partitions,
                                   std::uint64_t alpha);

/// Same as above for an explicit weight vector.
PartitionLayout partition_weights(std::span<const std::uint64_t> weights,
                                  std::uint32_t partitions);

enum class OocMode { fully, semi };

struct BatchSizing {
  OocMode mode = OocMode::fully;
  std::uint64_t memory_budget_bytes = 0;
  std::uint32_t threads = 1;
  std::uint64_t vertex_record_bytes = 8;
  std::uint64_t min_partition_size = 0;
};

/// Batches are as large as allowed: fully out-of-core keeps T batches of
/// vertex data under half the budget; semi out-of-core keeps at least 1.5T
/// batches per partition. Result is a multiple of 64, at least 64.
VertexId choose_batch_size(const BatchSizing& sizing);

/// Rounds a requested batch size down to a multiple of 64 (minimum 64).
VertexId normalize_batch_size(VertexId requested);

}  // namespace dfog
