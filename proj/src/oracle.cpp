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

#include "dfog/oracle.hpp"

#include <cmath>
#include <cstring>
#include <deque>
#include <numeric>
#include <queue>
#include <sstream>

namespace dfog::oracle {

void check_guard(std::uint64_t num_edges) {
  if (num_edges > kMaxEdges) {
    throw ConfigError("graph has " + std::to_string(num_edges) +
                      " edges; the in-memory oracle is limited to " + std::to_string(kMaxEdges) +
                      ". Verify a sampled subgraph instead");
  }
}

namespace {

struct Adjacency {
  std::vector<std::uint64_t> offsets;
  std::vector<std::size_t> edges;  // index into the edge list
};

Adjacency out_adjacency(VertexId n, const EdgeList& edges) {
  Adjacency a;
  a.offsets.assign(n + 1, 0);
  for (std::size_t i = 0; i < edges.size(); ++i) ++a.offsets[edges.src(i) + 1];
  std::partial_sum(a.offsets.begin(), a.offsets.end(), a.offsets.begin());
  a.edges.resize(edges.size());
  std::vector<std::uint64_t> at(a.offsets.begin(), a.offsets.end() - 1);
  for (std::size_t i = 0; i < edges.size(); ++i) a.edges[at[edges.src(i)]++] = i;
  return a;
}

float weight(const EdgeList& edges, std::size_t i) {
  float w;
  std::memcpy(&w, edges.payload(i).data(), sizeof w);
  return w;
}

}  // namespace

std::vector<std::uint32_t> bfs(VertexId n, const EdgeList& edges, VertexId source) {
  check_guard(edges.size());
  Adjacency adj = out_adjacency(n, edges);
  std::vector<std::uint32_t> level(n, kUnreached);
  std::deque<VertexId> queue{source};
  level[source] = 0;
  while (!queue.empty()) {
    VertexId u = queue.front();
    queue.pop_front();
    for (auto k = adj.offsets[u]; k < adj.offsets[u + 1]; ++k) {
      VertexId v = edges.dst(adj.edges[k]);
      if (level[v] == kUnreached) {
        level[v] = level[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return level;
}

std::vector<VertexId> wcc(VertexId n, const EdgeList& edges) {
  check_guard(edges.size());
  std::vector<VertexId> parent(n);
  std::iota(parent.begin(), parent.end(), VertexId{0});
  auto find = [&](VertexId v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  };
  for (std::size_t i = 0; i < edges.size(); ++i) {
    VertexId a = find(edges.src(i)), b = find(edges.dst(i));
    if (a == b) continue;
    // The smaller root wins, so every root is its component's minimum.
    if (a < b) parent[b] = a;
    else parent[a] = b;
  }
  std::vector<VertexId> label(n);
  for (VertexId v = 0; v < n; ++v) label[v] = find(v);
  return label;
}

std::vector<float> sssp(VertexId n, const EdgeList& edges, VertexId source) {
  check_guard(edges.size());
  Adjacency adj = out_adjacency(n, edges);
  std::vector<float> dist(n, std::numeric_limits<float>::infinity());
  using Item = std::pair<float, VertexId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[source] = 0.0f;
  heap.emplace(0.0f, source);
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    for (auto k = adj.offsets[u]; k < adj.offsets[u + 1]; ++k) {
      std::size_t e = adj.edges[k];
      float w = weight(edges, e);
      if (!(w >= 0.0f)) throw PreconditionError("negative edge weight in oracle input");
      float candidate = d + w;
      VertexId v = edges.dst(e);
      if (candidate < dist[v]) {
        dist[v] = candidate;
        heap.emplace(candidate, v);
      }
    }
  }
  return dist;
}

std::vector<double> pagerank(VertexId n, const EdgeList& edges, std::uint32_t iterations,
                             double damping) {
  check_guard(edges.size());
  const double nd = static_cast<double>(n);
  std::vector<std::uint64_t> degree(n, 0);
  for (std::size_t i = 0; i < edges.size(); ++i) ++degree[edges.src(i)];
  std::vector<double> rank(n, 1.0 / nd);
  std::vector<std::int64_t> acc(n);
  for (std::uint32_t it = 0; it < iterations; ++it) {
    std::int64_t dangling = 0;
    for (VertexId v = 0; v < n; ++v) {
      if (degree[v] == 0) dangling += fixed::from_double(rank[v]);
    }
    std::fill(acc.begin(), acc.end(), 0);
    for (std::size_t i = 0; i < edges.size(); ++i) {
      VertexId u = edges.src(i);
      acc[edges.dst(i)] += fixed::from_double(rank[u] / static_cast<double>(degree[u]));
    }
    const double spread = fixed::to_double(dangling) / nd;
    for (VertexId v = 0; v < n; ++v) {
      rank[v] = (1.0 - damping) / nd + damping * (fixed::to_double(acc[v]) + spread);
    }
  }
  return rank;
}

std::vector<double> pagerank_double(VertexId n, const EdgeList& edges, std::uint32_t iterations,
                                    double damping) {
  check_guard(edges.size());
  const double nd = static_cast<double>(n);
  std::vector<std::uint64_t> degree(n, 0);
  for (std::size_t i = 0; i < edges.size(); ++i) ++degree[edges.src(i)];
  std::vector<double> rank(n, 1.0 / nd), acc(n);
  for (std::uint32_t it = 0; it < iterations; ++it) {
    double dangling = 0.0;
    for (VertexId v = 0; v < n; ++v) {
      if (degree[v] == 0) dangling += rank[v];
    }
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t i = 0; i < edges.size(); ++i) {
      VertexId u = edges.src(i);
      acc[edges.dst(i)] += rank[u] / static_cast<double>(degree[u]);
    }
    for (VertexId v = 0; v < n; ++v) {
      rank[v] = (1.0 - damping) / nd + damping * (acc[v] + dangling / nd);
    }
  }
  return rank;
}

namespace {

template <typename T>
std::string show(T v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

template <typename T>
Report compare(const std::vector<T>& expected, const std::vector<std::byte>& actual_bytes,
               double tolerance) {
  Report r;
  if (actual_bytes.size() != expected.size() * sizeof(T)) {
    r.pass = false;
    r.note = "output holds " + std::to_string(actual_bytes.size() / sizeof(T)) +
             " values; the graph has " + std::to_string(expected.size()) + " vertices";
    return r;
  }
  for (std::size_t v = 0; v < expected.size(); ++v) {
    T a;
    std::memcpy(&a, actual_bytes.data() + v * sizeof(T), sizeof(T));
    bool ok;
    if constexpr (std::is_floating_point_v<T>) {
      if (tolerance > 0) {
        double e = expected[v];
        ok = std::fabs(a - e) <= tolerance * std::max(std::fabs(e), 1e-300);
      } else {
        ok = std::memcmp(&a, &expected[v], sizeof(T)) == 0;
      }
    } else {
      ok = a == expected[v];
    }
    ++r.checked;
    if (!ok) {
      r.pass = false;
      ++r.failed;
      if (r.mismatches.size() < 10) r.mismatches.push_back({v, show(expected[v]), show(a)});
    }
  }
  return r;
}

}  // namespace

Report verify(VertexId n, const EdgeList& edges, const AlgorithmParams& p,
              const std::vector<std::byte>& actual, double pr_tolerance) {
  switch (p.algorithm) {
    case Algorithm::pagerank: {
      Report r = compare(pagerank_double(n, edges, p.iterations, p.damping), actual, pr_tolerance);
      if (!r.pass && r.note.empty()) {
        r.note = "ranks differ from " + std::to_string(p.iterations) +
                 " oracle iterations; check that the run used the same iteration count and damping";
      }
      return r;
    }
    case Algorithm::bfs: return compare(bfs(n, edges, p.source), actual, 0);
    case Algorithm::wcc: return compare(wcc(n, edges), actual, 0);
    case Algorithm::sssp: return compare(sssp(n, edges, p.source), actual, 0);
  }
  return {};
}

}  // namespace dfog::oracle
