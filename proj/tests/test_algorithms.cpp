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

#include <cmath>
#include <cstring>
#include <random>

#include "doctest.h"
#include "dfog/cluster.hpp"
#include "dfog/oracle.hpp"
#include "support.hpp"

using namespace dfog;
using dfog::testing::TempDir;

namespace {

EngineConfig quick_config() {
  EngineConfig c;
  c.memory_budget_bytes = 8 << 20;
  c.threads = 2;
  c.fsync = false;
  c.strict = true;
  return c;
}

template <typename T>
std::vector<T> as(const std::vector<std::byte>& bytes) {
  std::vector<T> out(bytes.size() / sizeof(T));
  std::memcpy(out.data(), bytes.data(), out.size() * sizeof(T));
  return out;
}

struct Run {
  std::vector<std::byte> output;
  std::vector<NodeResult> nodes;
};

Run run(const EdgeList& edges, VertexId n, std::uint32_t P, const AlgorithmParams& params,
        VertexId batch = 64, EngineConfig config = quick_config(), bool reversed = false) {
  TempDir dir("alg");
  PreprocessOptions po;
  po.num_vertices = n;
  po.partitions = P;
  po.batch_size = batch;
  po.memory_budget_bytes = 4 << 20;
  po.reversed = reversed || algorithm_spec(params.algorithm).needs_reversed;
  build_graph(edges, dir / "graph", po);
  Run r;
  r.nodes = run_local_threads(P, config, dir / "store", dir / "graph", params, dir / "out");
  r.output = collect_output(dir / "out", r.nodes[0].array, P);
  return r;
}

AlgorithmParams params(Algorithm a, VertexId source = 0) {
  AlgorithmParams p;
  p.algorithm = a;
  p.source = source;
  return p;
}

}  // namespace

TEST_CASE("pagerank on a directed 3-cycle stays uniform") {
  EdgeList e;
  e.push_back(0, 1);
  e.push_back(1, 2);
  e.push_back(2, 0);
  auto ranks = as<double>(run(e, 3, 1, params(Algorithm::pagerank)).output);
  REQUIRE(ranks.size() == 3);
  for (double r : ranks) CHECK(r == doctest::Approx(1.0 / 3).epsilon(1e-15));
}

TEST_CASE("pagerank on a single vertex is 1 at every iteration") {
  for (std::uint32_t iters : {1u, 3u}) {
    AlgorithmParams p = params(Algorithm::pagerank);
    p.iterations = iters;
    auto ranks = as<double>(run(EdgeList{}, 1, 1, p).output);
    REQUIRE(ranks.size() == 1);
    CHECK(ranks[0] == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("pagerank on G7 matches the power-iteration oracle") {
  auto expected = oracle::pagerank_double(7, testing::g7(), 5, 0.85);
  for (std::uint32_t P : {1u, 2u}) {
    auto ranks = as<double>(run(testing::g7(), 7, P, params(Algorithm::pagerank), 2).output);
    REQUIRE(ranks.size() == 7);
    for (VertexId v = 0; v < 7; ++v) CHECK(std::fabs(ranks[v] - expected[v]) <= 1e-12);
  }
}

TEST_CASE("bfs levels on small graphs") {
  EdgeList path;
  path.push_back(0, 1);
  path.push_back(1, 2);
  CHECK(as<std::uint32_t>(run(path, 3, 1, params(Algorithm::bfs)).output) ==
        std::vector<std::uint32_t>{0, 1, 2});
  CHECK(as<std::uint32_t>(run(path, 3, 1, params(Algorithm::bfs, 2)).output) ==
        std::vector<std::uint32_t>{kUnreached, kUnreached, 0});
  for (std::uint32_t P : {1u, 2u}) {
    CHECK(as<std::uint32_t>(run(testing::g7(), 7, P, params(Algorithm::bfs), 2).output) ==
          oracle::bfs(7, testing::g7(), 0));
  }
}

TEST_CASE("wcc labels are component minima") {
  EdgeList e;
  e.push_back(0, 1);
  e.push_back(2, 3);
  CHECK(as<VertexId>(run(e, 4, 2, params(Algorithm::wcc)).output) ==
        std::vector<VertexId>{0, 0, 2, 2});
  EdgeList cycle;
  for (VertexId v = 0; v < 5; ++v) cycle.push_back(v, (v + 1) % 5);
  CHECK(as<VertexId>(run(cycle, 5, 1, params(Algorithm::wcc)).output) ==
        std::vector<VertexId>(5, 0));
}

TEST_CASE("wcc without a reversed graph is a configuration error") {
  TempDir dir("wccrev");
  PreprocessOptions po;
  po.num_vertices = 7;
  build_graph(testing::g7(), dir / "graph", po);
  CHECK_THROWS_AS(run_local_threads(1, quick_config(), dir / "store", dir / "graph",
                                    params(Algorithm::wcc), dir / "out"),
                  ConfigError);
}

TEST_CASE("sssp distances") {
  std::mt19937_64 rng(7);
  EdgeList path;
  path.push_back(0, 1);
  path.push_back(1, 2);
  auto unit = testing::with_weights(path, rng, true);
  CHECK(as<float>(run(unit, 3, 1, params(Algorithm::sssp)).output) ==
        std::vector<float>{0.0f, 1.0f, 2.0f});

  auto g7w = testing::with_weights(testing::g7(), rng, true);
  auto dist = as<float>(run(g7w, 7, 2, params(Algorithm::sssp), 2).output);
  auto levels = oracle::bfs(7, testing::g7(), 0);
  for (VertexId v = 0; v < 7; ++v) CHECK(dist[v] == static_cast<float>(levels[v]));
}

TEST_CASE("sssp rejects a negative weight") {
  EdgeList e(4);
  e.push_back(0, 1, testing::float_bytes(-1.0f));
  CHECK_THROWS_AS(run(e, 2, 1, params(Algorithm::sssp)), PreconditionError);
}

TEST_CASE("parameters are validated before any call") {
  TempDir dir("params");
  PreprocessOptions po;
  po.num_vertices = 7;
  Manifest m = build_graph(testing::g7(), dir / "graph", po);
  CHECK_THROWS_AS(validate_params(params(Algorithm::bfs, 7), m), PreconditionError);
  AlgorithmParams pr = params(Algorithm::pagerank);
  pr.damping = 1.0;
  CHECK_THROWS_AS(validate_params(pr, m), PreconditionError);
  pr.damping = 0.85;
  pr.iterations = 0;
  CHECK_THROWS_AS(validate_params(pr, m), PreconditionError);
  CHECK_THROWS_AS(validate_params(params(Algorithm::sssp), m), ConfigError);
}
