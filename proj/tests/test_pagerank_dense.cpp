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

#include <Eigen/Dense>

#include <cstring>
#include <random>

#include "doctest.h"
#include "dfog/cluster.hpp"
#include "support.hpp"

using namespace dfog;
using dfog::testing::TempDir;

namespace {

// Power iteration on the dense column-stochastic matrix, with dangling mass
// spread uniformly.
Eigen::VectorXd dense_pagerank(VertexId n, const EdgeList& edges, int iterations, double d) {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd out_degree = Eigen::VectorXd::Zero(n);
  for (std::size_t k = 0; k < edges.size(); ++k) out_degree(edges.src(k)) += 1;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    M(edges.dst(k), edges.src(k)) += 1.0 / out_degree(edges.src(k));
  }
  Eigen::VectorXd dangling = (out_degree.array() == 0).cast<double>();
  Eigen::VectorXd r = Eigen::VectorXd::Constant(n, 1.0 / n);
  for (int it = 0; it < iterations; ++it) {
    double lost = dangling.dot(r);
    r = Eigen::VectorXd::Constant(n, (1 - d) / n + d * lost / n) + d * (M * r);
  }
  return r;
}

std::vector<double> engine_pagerank(VertexId n, const EdgeList& edges, std::uint32_t nodes) {
  TempDir dir("dense");
  PreprocessOptions po;
  po.num_vertices = n;
  po.partitions = nodes;
  po.batch_size = 64;
  build_graph(edges, dir / "graph", po);
  EngineConfig c;
  c.fsync = false;
  c.strict = true;
  AlgorithmParams p;
  p.algorithm = Algorithm::pagerank;
  auto res = run_local_threads(nodes, c, dir / "store", dir / "graph", p, dir / "out");
  auto bytes = collect_output(dir / "out", res[0].array, nodes);
  std::vector<double> out(n);
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

}  // namespace

TEST_CASE("PageRank agrees with dense power iteration") {
  std::mt19937_64 rng(12);
  const std::vector<std::pair<VertexId, EdgeList>> graphs = {
      {7, testing::g7()},
      {300, testing::random_skewed(300, 1500, rng)},
      {500, testing::random_uniform(500, 900, rng)},
  };
  for (const auto& [n, edges] : graphs) {
    Eigen::VectorXd expect = dense_pagerank(n, edges, 5, 0.85);
    CHECK(expect.sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (std::uint32_t nodes : {1u, 2u}) {
      auto got = engine_pagerank(n, edges, nodes);
      for (VertexId v = 0; v < n; ++v) {
        CAPTURE(v);
        CHECK(std::fabs(got[v] - expect(v)) <= 1e-12 * expect(v));
      }
    }
  }
}
