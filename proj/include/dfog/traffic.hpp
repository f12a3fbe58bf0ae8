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
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include "dfog/manifest.hpp"
#include "dfog/storage.hpp"

namespace dfog {

/// Counters of one phase on one node (one metrics CSV row).
struct PhaseRow {
  std::string phase;
  std::uint64_t msgs_generated = 0;
  std::vector<std::uint64_t> sent;  // per peer rank
  std::vector<std::uint64_t> recv;  // per peer rank
  std::uint64_t chunk_bytes_read = 0;
  std::uint64_t varray_bytes_read = 0;
  std::uint64_t varray_bytes_written = 0;
};

/// Message counts of one Process call on one node.
struct CallTraffic {
  std::uint32_t node = 0;
  std::uint64_t call = 0;
  CallKind kind = CallKind::vertices;
  std::uint64_t generated = 0;
  std::vector<std::uint64_t> sent;      // records sent to each peer
  std::vector<std::uint64_t> recv;      // records received from each peer
  std::vector<bool> sent_filtered;      // stream to peer was filtered
  std::vector<bool> recv_filtered;      // stream from peer was filtered
  std::vector<std::string> strategies;  // dispatch strategy per source node
  std::vector<PhaseRow> phases;
};

/// Per-node limits from the graph layout.
struct TrafficBounds {
  std::uint32_t node = 0;
  std::vector<std::uint64_t> partition_sizes;  // |V_j|
  std::vector<std::uint64_t> filter_to;        // |L_ij| by j (0 for j = i)
  std::uint64_t outgoing_edges = 0;            // |E_i^o|
  std::uint64_t incoming_edges = 0;            // |E_i^i|

  static TrafficBounds from_manifest(const Manifest& manifest, std::uint32_t node);
};

/// Violated message bounds of one ProcessEdges call, one line each.
std::vector<std::string> check_traffic_bounds(const CallTraffic& traffic,
                                              const TrafficBounds& bounds);

std::string metrics_header(std::uint32_t nodes);

/// Appends one CSV row per phase per call.
class MetricsWriter {
 public:
  MetricsWriter(const std::filesystem::path& path, std::uint32_t nodes);
  void write(const CallTraffic& traffic);

 private:
  std::mutex mutex_;
  std::ofstream out_;
  std::uint32_t nodes_;
};

}  // namespace dfog
