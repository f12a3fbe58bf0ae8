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

#include "dfog/cluster.hpp"

#include <exception>
#include <mutex>
#include <thread>

#include "dfog/edge_file.hpp"
#include "dfog/io.hpp"

namespace dfog {

namespace fs = std::filesystem;

Manifest build_graph(const fs::path& edge_file, const fs::path& out, PreprocessOptions options) {
  fs::create_directories(out);
  fs::path sorted = out / "edges.sorted.bin";
  fs::path tmp = out / ".tmp_sort";
  external_sort(edge_file, sorted, options.payload_bytes, options.memory_budget_bytes, tmp);
  fs::remove_all(tmp);
  options.input = sorted;
  options.out = out;
  Manifest m = preprocess(options);
  fs::remove(sorted);
  return m;
}

Manifest build_graph(const EdgeList& edges, const fs::path& out, PreprocessOptions options) {
  fs::create_directories(out);
  fs::path raw = out / "edges.raw.bin";
  write_edge_file(raw, edges);
  options.payload_bytes = edges.payload_bytes();
  Manifest m = build_graph(raw, out, std::move(options));
  fs::remove(raw);
  return m;
}

fs::path output_part(const fs::path& output_dir, const std::string& array, std::uint32_t rank) {
  return output_dir / (array + ".part" + std::to_string(rank) + ".bin");
}

NodeResult run_node(const ClusterConfig& cluster, EngineConfig config, const fs::path& graph_dir,
                    const AlgorithmParams& params, const fs::path& output_dir) {
  Transport transport(cluster);
  Engine engine(std::move(config), graph_dir, transport);
  NodeResult r;
  r.resumed_through = engine.resumed_through();
  r.array = run_algorithm(engine, params);
  fs::create_directories(output_dir);
  engine.export_array(r.array, output_part(output_dir, r.array, engine.rank()));
  // Nobody tears down sockets while a peer may still be committing.
  transport.barrier(engine.next_call());
  r.traffic = engine.traffic_log();
  r.peak_memory = engine.governor().peak();
  r.calls = engine.next_call() - 1;
  return r;
}

std::vector<NodeResult> run_local_threads(std::uint32_t nodes, const EngineConfig& config,
                                          const fs::path& storage_root, const fs::path& graph_dir,
                                          const AlgorithmParams& params,
                                          const fs::path& output_dir) {
  auto endpoints = allocate_local_endpoints(nodes);
  std::vector<NodeResult> results(nodes);
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> threads;
  for (std::uint32_t rank = 0; rank < nodes; ++rank) {
    threads.emplace_back([&, rank] {
      try {
        ClusterConfig cluster;
        cluster.endpoints = endpoints;
        cluster.rank = rank;
        cluster.io_timeout = std::chrono::milliseconds(120000);
        EngineConfig c = config;
        c.storage_dir = storage_root / ("node" + std::to_string(rank));
        if (!config.metrics_path.empty()) {
          c.metrics_path = config.metrics_path.string() + ".node" + std::to_string(rank);
        }
        results[rank] = run_node(cluster, c, graph_dir, params, output_dir);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
  return results;
}

std::vector<std::byte> collect_output(const fs::path& output_dir, const std::string& array,
                                      std::uint32_t nodes) {
  std::vector<std::byte> out;
  for (std::uint32_t rank = 0; rank < nodes; ++rank) {
    fs::path part = output_part(output_dir, array, rank);
    if (!fs::exists(part)) throw IoError("missing output slice " + part.string());
    File f(part, File::Mode::read);
    std::size_t at = out.size();
    out.resize(at + f.size());
    f.pread_exact(0, {out.data() + at, f.size()});
  }
  return out;
}

}  // namespace dfog
