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

#include "dfog/encoding.hpp"
#include "dfog/io.hpp"

namespace dfog {

// Binary edge files are packed records {src u64, dst u64, payload[K]},
// little-endian, no header.

struct EdgeView {
  VertexId src = 0;
  VertexId dst = 0;
  const std::byte* payload = nullptr;
};

class EdgeFileReader {
 public:
  EdgeFileReader(const std::filesystem::path& path, std::uint32_t payload_bytes,
                 MemoryGovernor* governor = nullptr, std::size_t buffer_bytes = 1 << 20);

  std::uint64_t num_edges() const { return count_; }
  /// Ordinal (0-based) of the record the next call to next() returns.
  std::uint64_t ordinal() const { return read_; }
  bool next(EdgeView& edge);

 private:
  File file_;
  std::uint32_t record_bytes_;
  std::uint64_t count_;
  std::uint64_t read_ = 0;
  FileReader reader_;
};

void write_edge_file(const std::filesystem::path& path, const EdgeList& edges);
EdgeList read_edge_file(const std::filesystem::path& path, std::uint32_t payload_bytes);

/// Sorts an edge file by (src, dst) with bounded memory: sorted runs are
/// spilled to `temp_dir` and merged. Equal keys keep input order. With
/// `swap_endpoints`, every record is written as (dst, src) before sorting.
void external_sort(const std::filesystem::path& input, const std::filesystem::path& output,
                   std::uint32_t payload_bytes, std::uint64_t memory_budget_bytes,
                   const std::filesystem::path& temp_dir, bool swap_endpoints = false);

}  // namespace dfog
