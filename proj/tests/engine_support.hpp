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

#include <functional>
#include <thread>

#include "dfog/cluster.hpp"
#include "dfog/engine.hpp"
#include "support.hpp"

namespace dfog::testing {

inline EngineConfig quiet_config() {
  EngineConfig c;
  c.memory_budget_bytes = 16 << 20;
  c.threads = 2;
  c.fsync = false;
  c.strict = true;
  return c;
}

/// Runs fn on an Engine for every rank of a loopback cluster. Node r stores
/// under storage/node<r>. Rethrows the first failure.
inline void with_engines(std::uint32_t nodes, const std::filesystem::path& graph_dir,
                         const std::filesystem::path& storage, EngineConfig config,
                         const std::function<void(Engine&)>& fn) {
  auto endpoints = allocate_local_endpoints(nodes);
  std::vector<std::exception_ptr> errors(nodes);
  std::vector<std::thread> threads;
  for (std::uint32_t r = 0; r < nodes; ++r) {
    threads.emplace_back([&, r] {
      try {
        ClusterConfig cc;
        cc.endpoints = endpoints;
        cc.rank = r;
        cc.io_timeout = std::chrono::seconds(60);
        Transport t(cc);
        EngineConfig c = config;
        c.storage_dir = storage / ("node" + std::to_string(r));
        Engine e(c, graph_dir, t);
        fn(e);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace dfog::testing
