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

#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "dfog/cluster.hpp"
#include "dfog/edge_file.hpp"
#include "dfog/preprocess.hpp"
#include "support.hpp"

using namespace dfog;
using dfog::testing::TempDir;
namespace fs = std::filesystem;

namespace {

using Pairs = std::multiset<std::pair<VertexId, VertexId>>;

Pairs pairs_of(const EdgeList& e) {
  Pairs p;
  for (std::size_t i = 0; i < e.size(); ++i) p.emplace(e.src(i), e.dst(i));
  return p;
}

Pairs chunk_pairs(const fs::path& dir, const ChunkRecord& r) {
  if (r.edge_count == 0) return {};
  auto c = read_chunk_file(dir / r.dcsr_file);
  return pairs_of(decode(std::get<DcsrChunk>(c)));
}

Manifest g7_graph(const fs::path& out, bool reversed = false) {
  PreprocessOptions po;
  po.num_vertices = 7;
  po.partitions = 2;
  po.batch_size = 2;
  po.reversed = reversed;
  return build_graph(testing::g7(), out, po);
}

}  // namespace

TEST_CASE("G7 chunks on boundaries [0,3,7] with B=2") {
  TempDir dir("pre");
  Manifest m = g7_graph(dir.path());
  REQUIRE(m.layout.boundaries() == std::vector<VertexId>{0, 3, 7});
  CHECK(m.meta.alpha == 3);
  CHECK(chunk_pairs(dir.path(), m.chunk(0, 1, 0)) == Pairs{{1, 3}, {2, 3}});
  CHECK(chunk_pairs(dir.path(), m.chunk(0, 1, 1)) == Pairs{{2, 5}});
  CHECK(chunk_pairs(dir.path(), m.chunk(1, 1, 0)) == Pairs{{3, 4}});
  CHECK(chunk_pairs(dir.path(), m.chunk(1, 1, 1)) == Pairs{{4, 5}, {5, 6}});
  CHECK(chunk_pairs(dir.path(), m.chunk(0, 0, 0)) == Pairs{{0, 1}});
  CHECK(chunk_pairs(dir.path(), m.chunk(0, 0, 1)) == Pairs{{0, 2}});
  CHECK(chunk_pairs(dir.path(), m.chunk(1, 0, 0)) == Pairs{{6, 0}});
  CHECK(m.chunk(1, 0, 1).edge_count == 0);
  CHECK(m.chunk(1, 0, 1).dcsr_file.empty());
  std::uint64_t total = 0;
  for (const auto& c : m.chunks) total += c.edge_count;
  CHECK(total == 9);
  CHECK(m.chunks.size() == 2 * (2 + 2));
}

TEST_CASE("G7 filter lists") {
  TempDir dir("filt");
  Manifest m = g7_graph(dir.path());
  CHECK(load_filter_list(dir.path(), m, 0, 1) == std::vector<VertexId>{1, 2});
  CHECK(load_filter_list(dir.path(), m, 1, 0) == std::vector<VertexId>{6});
  CHECK(m.filter(0, 1).length == 2);
}

TEST_CASE("G7 dispatching graph and pull lists") {
  TempDir dir("disp");
  Manifest m = g7_graph(dir.path());
  const DispatchRecord& d = m.dispatch_for(0, 1);
  auto graph = decode(std::get<DcsrChunk>(read_chunk_file(dir.path() / d.dcsr_file)));
  CHECK(pairs_of(graph) == Pairs{{1, 0}, {2, 0}, {2, 1}});
  PullListFile pull(dir.path() / d.pull_file);
  REQUIRE(pull.num_batches() == 2);
  CHECK(pull.read_list(0) == std::vector<VertexId>{1, 2});
  CHECK(pull.read_list(1) == std::vector<VertexId>{2});
}

TEST_CASE("single batch maps every listed source to batch 0") {
  TempDir dir("single");
  PreprocessOptions po;
  po.num_vertices = 7;
  po.partitions = 2;
  po.batch_size = 64;
  Manifest m = build_graph(testing::g7(), dir.path(), po);
  const DispatchRecord& d = m.dispatch_for(0, 1);
  auto graph = decode(std::get<DcsrChunk>(read_chunk_file(dir.path() / d.dcsr_file)));
  CHECK(pairs_of(graph) == Pairs{{1, 0}, {2, 0}});
}

TEST_CASE("reversed graph") {
  TempDir dir("rev");
  Manifest m = g7_graph(dir.path(), true);
  REQUIRE(m.reversed_graph == "reversed");
  fs::path rdir = dir.path() / m.reversed_graph;
  Manifest r = Manifest::load(rdir);
  CHECK(r.is_reversed);
  CHECK(r.layout == m.layout);
  CHECK(r.batching == m.batching);
  CHECK(r.meta.num_edges == 9);
  auto rev = pairs_of(decode_all_chunks(rdir, r));
  CHECK(rev.count({1, 0}) == 1);

  // Reversing the reversed edges gives the original chunks back.
  EdgeList back;
  for (auto [s, d] : rev) back.push_back(d, s);
  TempDir again("rev2");
  PreprocessOptions po;
  po.num_vertices = 7;
  po.partitions = 2;
  po.batch_size = 2;
  Manifest m2 = build_graph(back, again.path(), po);
  for (std::size_t k = 0; k < m.chunks.size(); ++k) {
    CHECK(chunk_pairs(dir.path(), m.chunks[k]) == chunk_pairs(again.path(), m2.chunks[k]));
  }
}

TEST_CASE("graph with no edges") {
  TempDir dir("empty");
  PreprocessOptions po;
  po.num_vertices = 100;
  po.partitions = 3;
  Manifest m = build_graph(EdgeList{}, dir.path(), po);
  for (const auto& c : m.chunks) CHECK(c.edge_count == 0);
  for (const auto& f : m.filters) CHECK(f.length == 0);
  CHECK(m.meta.num_edges == 0);
}

TEST_CASE("unsorted input is rejected with the first offending ordinal") {
  TempDir dir("unsorted");
  EdgeList e;
  e.push_back(0, 1);
  e.push_back(2, 0);
  e.push_back(1, 0);
  write_edge_file(dir / "e.bin", e);
  PreprocessOptions po;
  po.input = dir / "e.bin";
  po.out = dir / "g";
  po.num_vertices = 3;
  try {
    preprocess(po);
    FAIL("expected a rejection");
  } catch (const FormatError& err) {
    CHECK(std::string(err.what()).find("#2") != std::string::npos);
  }
  EdgeList big;
  big.push_back(0, 5);
  write_edge_file(dir / "b.bin", big);
  po.input = dir / "b.bin";
  CHECK_THROWS_WITH_AS(preprocess(po), doctest::Contains("edge #0"), FormatError);
}

TEST_CASE("decoded chunks reproduce the input and filter lists agree with chunks") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 6; ++trial) {
    TempDir dir("e2e");
    VertexId n = 50 + rng() % 3000;
    auto edges = trial % 2 ? testing::random_skewed(n, 200 + rng() % 20000, rng)
                           : testing::random_uniform(n, 200 + rng() % 20000, rng);
    PreprocessOptions po;
    po.num_vertices = n;
    po.partitions = 1 + rng() % 4;
    po.batch_size = 64 * (1 + rng() % 4);
    po.memory_budget_bytes = 256 << 10;
    Manifest m = build_graph(edges, dir.path(), po);
    CHECK(pairs_of(decode_all_chunks(dir.path(), m)) == pairs_of(edges));

    const std::uint32_t P = m.meta.num_partitions;
    for (std::uint32_t i = 0; i < P; ++i) {
      for (std::uint32_t j = 0; j < P; ++j) {
        if (i == j) continue;
        std::set<VertexId> from_chunks;
        for (std::uint64_t b = 0; b < m.num_batches(j); ++b) {
          for (auto [s, d] : chunk_pairs(dir.path(), m.chunk(i, j, b))) from_chunks.insert(s);
        }
        const DispatchRecord& dr = m.dispatch_for(i, j);
        std::set<VertexId> from_dispatch;
        if (dr.edge_count > 0) {
          auto g = decode(std::get<DcsrChunk>(read_chunk_file(dir.path() / dr.dcsr_file)));
          for (std::size_t k = 0; k < g.size(); ++k) from_dispatch.insert(g.src(k));
        }
        auto list = load_filter_list(dir.path(), m, i, j);
        CHECK(std::is_sorted(list.begin(), list.end()));
        CHECK(std::set<VertexId>(list.begin(), list.end()) == from_chunks);
        CHECK(from_dispatch == from_chunks);
      }
    }
  }
}

TEST_CASE("CSR files exist exactly where the inflate ratio allows") {
  std::mt19937_64 rng(55);
  std::uint64_t with_csr = 0, without = 0;
  for (int trial = 0; trial < 8; ++trial) {
    TempDir dir("csr");
    VertexId n = 500 + rng() % 5000;
    auto edges = testing::random_skewed(n, rng() % (n * (trial + 1)), rng);
    PreprocessOptions po;
    po.num_vertices = n;
    po.partitions = 1 + rng() % 4;
    po.batch_size = 64 * (1 + rng() % 8);
    Manifest m = build_graph(edges, dir.path(), po);
    for (const auto& c : m.chunks) {
      std::uint64_t v_src = m.layout.range(c.source_partition).size();
      bool expect = should_build_csr(v_src, c.edge_count, 32.0);
      CHECK(c.has_csr == expect);
      CHECK((!c.csr_file.empty() && fs::exists(dir.path() / c.csr_file)) == expect);
      if (c.edge_count > 0) CHECK(fs::exists(dir.path() / c.dcsr_file));
      (expect ? with_csr : without) += 1;
    }
  }
  CHECK(with_csr > 0);
  CHECK(without > 0);
}

TEST_CASE("preprocessing stays within a small memory budget") {
  TempDir dir("budget");
  std::mt19937_64 rng(4);
  auto edges = testing::random_uniform(20000, 200000, rng);
  PreprocessOptions po;
  po.num_vertices = 20000;
  po.partitions = 2;
  po.batch_size = 256;
  po.memory_budget_bytes = 256 << 10;
  Manifest m = build_graph(edges, dir.path(), po);
  CHECK(m.meta.num_edges == 200000);
  CHECK(pairs_of(decode_all_chunks(dir.path(), m)) == pairs_of(edges));
}
