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

#include "dfog/algorithms.hpp"

#include <cmath>
#include <optional>

namespace dfog {

const char* to_string(Algorithm a) { return algorithm_spec(a).name; }

Algorithm parse_algorithm(const std::string& name) {
  if (name == "pr" || name == "pagerank") return Algorithm::pagerank;
  if (name == "bfs") return Algorithm::bfs;
  if (name == "wcc") return Algorithm::wcc;
  if (name == "sssp") return Algorithm::sssp;
  throw ConfigError("unknown algorithm '" + name + "' (expected pr, bfs, wcc or sssp)");
}

const char* to_string(OutputType t) {
  switch (t) {
    case OutputType::f64: return "f64";
    case OutputType::u32: return "u32";
    case OutputType::u64: return "u64";
    case OutputType::f32: return "f32";
  }
  return "?";
}

std::size_t element_bytes(OutputType t) {
  switch (t) {
    case OutputType::f64: return 8;
    case OutputType::u32: return 4;
    case OutputType::u64: return 8;
    case OutputType::f32: return 4;
  }
  return 0;
}

const AlgorithmSpec& algorithm_spec(Algorithm a) {
  static const AlgorithmSpec specs[] = {
      {Algorithm::pagerank, "pr", 0, false, "rank", OutputType::f64},
      {Algorithm::bfs, "bfs", 0, false, "level", OutputType::u32},
      {Algorithm::wcc, "wcc", 0, true, "label", OutputType::u64},
      {Algorithm::sssp, "sssp", 4, false, "dist", OutputType::f32},
  };
  return specs[static_cast<int>(a)];
}

void validate_params(const AlgorithmParams& p, const Manifest& m) {
  const AlgorithmSpec& spec = algorithm_spec(p.algorithm);
  if (m.meta.edge_payload_bytes != spec.edge_payload_bytes) {
    throw ConfigError(std::string(spec.name) + " needs " +
                      std::to_string(spec.edge_payload_bytes) + "-byte edge data; the graph has " +
                      std::to_string(m.meta.edge_payload_bytes));
  }
  if (spec.needs_reversed && m.reversed_graph.empty()) {
    throw ConfigError(std::string(spec.name) + " needs a graph preprocessed with --reversed");
  }
  switch (p.algorithm) {
    case Algorithm::pagerank:
      if (p.iterations < 1) throw PreconditionError("pagerank needs at least one iteration");
      if (!(p.damping > 0.0 && p.damping < 1.0)) {
        throw PreconditionError("damping must lie strictly between 0 and 1");
      }
      break;
    case Algorithm::bfs:
    case Algorithm::sssp:
      if (p.source >= m.meta.num_vertices) {
        throw PreconditionError("source " + std::to_string(p.source) + " is not a vertex (|V| = " +
                                std::to_string(m.meta.num_vertices) + ")");
      }
      break;
    case Algorithm::wcc:
      break;
  }
}

namespace fixed {

std::int64_t from_double(double x) { return std::llround(x * kScale); }
double to_double(std::int64_t x) { return static_cast<double>(x) / kScale; }

}  // namespace fixed

VertexArray<double> pagerank(Engine& engine, std::uint32_t iterations, double damping) {
  const double n = static_cast<double>(engine.num_vertices());
  auto degree = engine.get_degree_array("out_degree");
  auto rank = engine.get_vertex_array<double>("rank", 1.0 / n);
  auto acc = engine.get_vertex_array<std::int64_t>("pr_acc", 0);

  std::int64_t dangling = engine.process_vertices<std::int64_t>(
      [&](VertexId v) { return degree[v] == 0 ? fixed::from_double(rank[v]) : 0; },
      {reads(rank), reads(degree)});

  for (std::uint32_t it = 0; it < iterations; ++it) {
    engine.process_edges<std::int64_t>(
        engine.graph(),
        [&](VertexId v) -> std::optional<std::int64_t> {
          if (degree[v] == 0) return std::nullopt;
          return fixed::from_double(rank[v] / static_cast<double>(degree[v]));
        },
        [&](std::int64_t contribution, VertexId, VertexId dst, Empty) { acc[dst] += contribution; },
        {reads(rank), reads(degree)}, {writes(acc)});
    const double spread = fixed::to_double(dangling) / n;
    dangling = engine.process_vertices<std::int64_t>(
        [&](VertexId v) {
          rank[v] = (1.0 - damping) / n + damping * (fixed::to_double(acc[v]) + spread);
          acc[v] = 0;
          return degree[v] == 0 ? fixed::from_double(rank[v]) : 0;
        },
        {writes(rank), writes(acc), reads(degree)});
  }
  return rank;
}

VertexArray<std::uint32_t> bfs(Engine& engine, VertexId source) {
  auto level = engine.get_vertex_array<std::uint32_t>(
      "level", [source](VertexId v) { return v == source ? 0u : kUnreached; });
  Bitmap frontier[2] = {engine.get_bitmap("bfs_frontier_a", [source](VertexId v) { return v == source; }),
                        engine.get_bitmap("bfs_frontier_b", [](VertexId) { return false; })};
  for (int cur = 0;; cur ^= 1) {
    const Bitmap& next = frontier[cur ^ 1];
    std::int64_t reached = engine.process_edges<std::uint32_t>(
        engine.graph(), [&](VertexId v) -> std::optional<std::uint32_t> { return level[v]; },
        [&](std::uint32_t l, VertexId, VertexId dst, Empty) -> std::int64_t {
          if (level[dst] != kUnreached) return 0;
          level[dst] = l + 1;
          next.set(dst);
          return 1;
        },
        {reads(level)}, {writes(level), writes(next)}, &frontier[cur]);
    if (reached == 0) break;
    const Bitmap& done = frontier[cur];
    engine.process_vertices([&](VertexId v) { done.set(v, false); }, {writes(done)}, &done);
  }
  return level;
}

VertexArray<VertexId> wcc(Engine& engine) {
  const Graph& reversed = engine.reversed();
  auto label = engine.get_vertex_array<VertexId>("label", [](VertexId v) { return v; });
  Bitmap active[2] = {engine.get_bitmap("wcc_active_a", [](VertexId) { return true; }),
                      engine.get_bitmap("wcc_active_b", [](VertexId) { return false; })};
  for (int cur = 0;; cur ^= 1) {
    const Bitmap& next = active[cur ^ 1];
    auto signal = [&](VertexId v) -> std::optional<VertexId> { return label[v]; };
    auto slot = [&](VertexId l, VertexId, VertexId dst, Empty) -> std::int64_t {
      if (l >= label[dst]) return 0;
      label[dst] = l;
      next.set(dst);
      return 1;
    };
    std::int64_t changed = engine.process_edges<VertexId>(engine.graph(), signal, slot,
                                                          {reads(label)},
                                                          {writes(label), writes(next)},
                                                          &active[cur]);
    changed += engine.process_edges<VertexId>(reversed, signal, slot, {reads(label)},
                                              {writes(label), writes(next)}, &active[cur]);
    if (changed == 0) break;
    const Bitmap& done = active[cur];
    engine.process_vertices([&](VertexId v) { done.set(v, false); }, {writes(done)}, &done);
  }
  return label;
}

VertexArray<float> sssp(Engine& engine, VertexId source) {
  const float inf = std::numeric_limits<float>::infinity();
  auto dist = engine.get_vertex_array<float>(
      "dist", [source, inf](VertexId v) { return v == source ? 0.0f : inf; });
  Bitmap active[2] = {engine.get_bitmap("sssp_active_a", [source](VertexId v) { return v == source; }),
                      engine.get_bitmap("sssp_active_b", [](VertexId) { return false; })};
  for (int cur = 0;; cur ^= 1) {
    const Bitmap& next = active[cur ^ 1];
    std::int64_t improved = engine.process_edges<float, std::int64_t, float>(
        engine.graph(), [&](VertexId v) -> std::optional<float> { return dist[v]; },
        [&](float d, VertexId src, VertexId dst, float w) -> std::int64_t {
          if (!(w >= 0.0f)) {
            throw PreconditionError("edge " + std::to_string(src) + "->" + std::to_string(dst) +
                                    " has weight " + std::to_string(w) +
                                    "; shortest paths need non-negative weights");
          }
          float candidate = d + w;
          if (!(candidate < dist[dst])) return 0;
          dist[dst] = candidate;
          next.set(dst);
          return 1;
        },
        {reads(dist)}, {writes(dist), writes(next)}, &active[cur]);
    if (improved == 0) break;
    const Bitmap& done = active[cur];
    engine.process_vertices([&](VertexId v) { done.set(v, false); }, {writes(done)}, &done);
  }
  return dist;
}

std::string run_algorithm(Engine& engine, const AlgorithmParams& p) {
  validate_params(p, engine.graph().manifest());
  switch (p.algorithm) {
    case Algorithm::pagerank: return pagerank(engine, p.iterations, p.damping).name();
    case Algorithm::bfs: return bfs(engine, p.source).name();
    case Algorithm::wcc: return wcc(engine).name();
    case Algorithm::sssp: return sssp(engine, p.source).name();
  }
  return {};
}

}  // namespace dfog
