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

#include <random>

#include "doctest.h"
#include "dfog/layout.hpp"
#include "support.hpp"

using namespace dfog;

namespace {

DegreeTable g7_degrees() {
  DegreeTable d(7);
  auto e = testing::g7();
  for (std::size_t i = 0; i < e.size(); ++i) d.add_edge(e.src(i), e.dst(i));
  return d;
}

}  // namespace

TEST_CASE("locate on boundaries [0,3,7] with B=2") {
  PartitionLayout layout({0, 3, 7});
  BatchLayout batching(2);
  CHECK(locate(0, layout, batching) == Location{0, 0, 0});
  CHECK(locate(4, layout, batching) == Location{1, 0, 1});
  CHECK(locate(6, layout, batching) == Location{1, 1, 1});
  CHECK_THROWS_AS(locate(7, layout, batching), RangeError);
}

TEST_CASE("vertex_weight") {
  DegreeTable d(3);
  d.add_edge(0, 1);
  d.add_edge(0, 2);
  d.add_edge(1, 0);
  CHECK(vertex_weight(0, 3, d) == 6);  // out 2, in 1
  DegreeTable e(4);
  e.add_edge(1, 0);
  e.add_edge(2, 0);
  e.add_edge(0, 3);
  CHECK(vertex_weight(0, 3, e) == 6);  // out 1, in 2
  DegreeTable iso(1);
  CHECK(vertex_weight(0, 0, iso) == 0);
}

TEST_CASE("G7 vertex weights with alpha 3") {
  DegreeTable d = g7_degrees();
  std::vector<std::uint64_t> w;
  for (VertexId v = 0; v < 7; ++v) w.push_back(vertex_weight(v, 3, d));
  CHECK(w == std::vector<std::uint64_t>{6, 5, 6, 6, 5, 6, 5});
  CHECK(d.incoming({0, 3}) + d.outgoing({0, 3}) + 3 * 3 == 17);
}

TEST_CASE("ranges tile the vertex space and locate inverts enumeration") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    VertexId n = 1 + rng() % 3000;
    std::uint32_t parts = 1 + rng() % 6;
    std::vector<VertexId> bounds{0};
    for (std::uint32_t p = 1; p < parts; ++p) bounds.push_back(rng() % (n + 1));
    bounds.push_back(n);
    std::sort(bounds.begin(), bounds.end());
    PartitionLayout layout(bounds);
    BatchLayout batching(1 + rng() % 100);
    VertexId expected = 0;
    for (std::uint32_t p = 0; p < layout.num_partitions(); ++p) {
      auto batches = batching.batches_of(layout.range(p));
      for (std::uint64_t b = 0; b < batches.size(); ++b) {
        CHECK(batches[b].lo == expected);
        for (VertexId v = batches[b].lo; v < batches[b].hi; ++v) {
          Location loc = locate(v, layout, batching);
          REQUIRE(loc == Location{p, b, v - batches[b].lo});
          REQUIRE(vertex_at(loc, layout, batching) == v);
        }
        expected = batches[b].hi;
      }
    }
    CHECK(expected == n);
  }
}

TEST_CASE("degree table aggregates match a recount") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    VertexId n = 1 + rng() % 500;
    auto edges = testing::random_uniform(n, rng() % 5000, rng);
    DegreeTable d(n);
    for (std::size_t i = 0; i < edges.size(); ++i) d.add_edge(edges.src(i), edges.dst(i));
    VertexRange r{rng() % n, 0};
    r.hi = r.lo + rng() % (n - r.lo + 1);
    std::uint64_t in = 0, out = 0, sum_in = 0, sum_out = 0;
    for (std::size_t i = 0; i < edges.size(); ++i) {
      in += r.contains(edges.dst(i));
      out += r.contains(edges.src(i));
    }
    for (VertexId v = 0; v < n; ++v) {
      sum_in += d.in_degree(v);
      sum_out += d.out_degree(v);
    }
    CHECK(d.incoming(r) == in);
    CHECK(d.outgoing(r) == out);
    CHECK(sum_in == edges.size());
    CHECK(sum_out == edges.size());
  }
}

TEST_CASE("layouts reject malformed input") {
  CHECK_THROWS(PartitionLayout({1, 3}));
  CHECK_THROWS(PartitionLayout({0, 4, 3}));
  CHECK_THROWS(BatchLayout(0));
}
