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

#include "dfog/traffic.hpp"

namespace dfog {

TrafficBounds TrafficBounds::from_manifest(const Manifest& m, std::uint32_t node) {
  TrafficBounds b;
  b.node = node;
  const std::uint32_t parts = m.layout.num_partitions();
  for (std::uint32_t j = 0; j < parts; ++j) {
    b.partition_sizes.push_back(m.layout.range(j).size());
    b.filter_to.push_back(j == node ? 0 : m.filter(node, j).length);
  }
  b.outgoing_edges = m.outgoing_edges.at(node);
  b.incoming_edges = m.incoming_edges.at(node);
  return b;
}

std::vector<std::string> check_traffic_bounds(const CallTraffic& t, const TrafficBounds& b) {
  std::vector<std::string> bad;
  const std::uint32_t i = b.node;
  const std::uint64_t vi = b.partition_sizes.at(i);
  auto where = [&](const std::string& what) {
    return "node " + std::to_string(i) + " call " + std::to_string(t.call) + ": " + what;
  };
  if (t.generated > vi) {
    bad.push_back(where("generated " + std::to_string(t.generated) + " > |V_i| = " +
                        std::to_string(vi)));
  }
  bool all_filtered = true;
  bool all_senders_filtered = true;
  std::uint64_t total_sent = 0;
  std::uint64_t total_recv = 0;
  for (std::uint32_t j = 0; j < b.partition_sizes.size(); ++j) {
    if (j == i) continue;
    std::uint64_t s = t.sent.at(j);
    total_sent += s;
    total_recv += t.recv.at(j);
    if (s > vi) {
      bad.push_back(where("sent " + std::to_string(s) + " to node " + std::to_string(j) +
                          " > |V_i| = " + std::to_string(vi)));
    }
    if (t.sent_filtered.at(j)) {
      if (s > b.filter_to.at(j)) {
        bad.push_back(where("sent " + std::to_string(s) + " filtered messages to node " +
                            std::to_string(j) + " > |L_ij| = " + std::to_string(b.filter_to.at(j))));
      }
    } else {
      all_filtered = false;
    }
    if (!t.recv_filtered.at(j)) all_senders_filtered = false;
    std::uint64_t vj = b.partition_sizes.at(j);
    if (t.recv.at(j) > vj) {
      bad.push_back(where("received " + std::to_string(t.recv.at(j)) + " from node " +
                          std::to_string(j) + " > |V_j| = " + std::to_string(vj)));
    }
  }
  if (all_filtered && total_sent > b.outgoing_edges) {
    bad.push_back(where("sent " + std::to_string(total_sent) + " in total > |E_i^o| = " +
                        std::to_string(b.outgoing_edges)));
  }
  if (all_senders_filtered && total_recv > b.incoming_edges) {
    bad.push_back(where("received " + std::to_string(total_recv) + " in total > |E_i^i| = " +
                        std::to_string(b.incoming_edges)));
  }
  return bad;
}

std::string metrics_header(std::uint32_t nodes) {
  std::string h = "node,call,phase,msgs_generated";
  for (std::uint32_t j = 0; j < nodes; ++j) h += ",msgs_sent_peer" + std::to_string(j);
  for (std::uint32_t j = 0; j < nodes; ++j) h += ",msgs_recv_peer" + std::to_string(j);
  h += ",chunk_bytes_read,varray_bytes_read,varray_bytes_written";
  return h;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path, std::uint32_t nodes)
    : nodes_(nodes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  out_.open(path, std::ios::app);
  if (!out_) throw IoError("cannot open metrics file '" + path.string() + "'");
  if (fresh) out_ << metrics_header(nodes) << '\n';
}

void MetricsWriter::write(const CallTraffic& t) {
  std::lock_guard lock(mutex_);
  for (const auto& row : t.phases) {
    out_ << t.node << ',' << t.call << ',' << row.phase << ',' << row.msgs_generated;
    for (std::uint32_t j = 0; j < nodes_; ++j) out_ << ',' << (j < row.sent.size() ? row.sent[j] : 0);
    for (std::uint32_t j = 0; j < nodes_; ++j) out_ << ',' << (j < row.recv.size() ? row.recv[j] : 0);
    out_ << ',' << row.chunk_bytes_read << ',' << row.varray_bytes_read << ','
         << row.varray_bytes_written << '\n';
  }
  out_.flush();
}

}  // namespace dfog
