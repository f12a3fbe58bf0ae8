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
#include <set>

#include "doctest.h"
#include "dfog/encoding.hpp"
#include "support.hpp"

using namespace dfog;
using dfog::testing::TempDir;

namespace {

EdgeChunk chunk_of(VertexRange src_range, std::initializer_list<std::pair<VertexId, VertexId>> edges) {
  EdgeChunk c;
  c.src_range = src_range;
  for (auto [s, d] : edges) c.edges.push_back(s, d);
  return c;
}

EdgeChunk random_chunk(std::mt19937_64& rng, std::uint64_t max_edges, std::uint32_t payload) {
  EdgeChunk c;
  VertexId lo = rng() % 1000;
  c.src_range = {lo, lo + 1 + rng() % 300};
  c.edges = EdgeList(payload);
  std::uint64_t m = rng() % (max_edges + 1);
  std::vector<std::pair<VertexId, VertexId>> pairs;
  for (std::uint64_t k = 0; k < m; ++k) {
    pairs.emplace_back(c.src_range.lo + rng() % c.src_range.size(), rng() % 5000);
  }
  std::sort(pairs.begin(), pairs.end());
  for (auto [s, d] : pairs) {
    std::vector<std::byte> p(payload);
    for (auto& b : p) b = static_cast<std::byte>(rng());
    c.edges.push_back(s, d, p);
  }
  return c;
}

double csr_cost(std::uint64_t m, std::uint64_t v_src, double gamma) {
  return std::min(gamma * static_cast<double>(m), static_cast<double>(v_src));
}

}  // namespace

TEST_CASE("CSR and DCSR of {1->3, 2->3} over [0,3)") {
  auto c = chunk_of({0, 3}, {{1, 3}, {2, 3}});
  CsrChunk csr = encode_csr(c);
  CHECK(csr.idx == std::vector<std::uint64_t>{0, 0, 1, 2});
  CHECK(csr.dst == std::vector<VertexId>{3, 3});
  DcsrChunk dcsr = encode_dcsr(c);
  CHECK(dcsr.src == std::vector<VertexId>{1, 2});
  CHECK(dcsr.idx == std::vector<std::uint64_t>{0, 1, 2});
  CHECK(dcsr.dst == std::vector<VertexId>{3, 3});
}

TEST_CASE("empty chunk encodings") {
  auto c = chunk_of({0, 4}, {});
  CsrChunk csr = encode_csr(c);
  CHECK(csr.idx == std::vector<std::uint64_t>{0, 0, 0, 0, 0});
  CHECK(csr.dst.empty());
  DcsrChunk dcsr = encode_dcsr(c);
  CHECK(dcsr.src.empty());
  CHECK(dcsr.dst.empty());
}

TEST_CASE("unsorted chunks are rejected") {
  auto c = chunk_of({0, 3}, {{2, 3}, {1, 3}});
  CHECK_THROWS_AS(encode_csr(c), PreconditionError);
  CHECK_THROWS_AS(encode_dcsr(c), PreconditionError);
}

TEST_CASE("should_build_csr threshold") {
  CHECK(should_build_csr(100, 4, 32));
  CHECK_FALSE(should_build_csr(100, 2, 32));
  CHECK(should_build_csr(64, 2, 32));
  CHECK_FALSE(should_build_csr(10, 0, 32));
  for (std::uint64_t v = 1; v < 300; v += 7) {
    bool seen = false;
    for (std::uint64_t e = 0; e < 40; ++e) {
      bool now = should_build_csr(v, e, 32);
      CHECK(!(seen && !now));
      seen = seen || now;
    }
  }
}

TEST_CASE("choose_read_representation examples") {
  CHECK(choose_read_representation(1, 2'000'000, 1000, 1024, true) == Representation::csr);
  CHECK(choose_read_representation(10'000, 100'000, 50'000, 1024, true) == Representation::csr);
  CHECK(choose_read_representation(1, 2'000'000, 1000, 1024, false) == Representation::dcsr);
  CHECK(choose_read_representation(5000, 2'000'000, 1000, 1024, true) == Representation::dcsr);
}

TEST_CASE("choose_read_representation matches the closed-form costs") {
  std::mt19937_64 rng(1024);
  for (int k = 0; k < 1000; ++k) {
    std::uint64_t v_src = 1 + rng() % 1'000'000;
    std::uint64_t dcsr_len = rng() % (v_src + 1);
    std::uint64_t m = rng() % 4 == 0 ? rng() % 10 : rng() % (v_src + 1);
    bool csr = rng() % 5 != 0;
    auto expected = csr && csr_cost(m, v_src, 1024) <= 2.0 * static_cast<double>(dcsr_len)
                        ? Representation::csr
                        : Representation::dcsr;
    CHECK(choose_read_representation(m, v_src, dcsr_len, 1024, csr) == expected);
  }
}

TEST_CASE("iterate_edges_for_sources examples") {
  auto c = chunk_of({0, 3}, {{1, 3}, {2, 3}});
  std::vector<VertexId> two{2};
  auto out = iterate_edges_for_sources(encode_csr(c), two);
  REQUIRE(out.size() == 1);
  CHECK(out.src(0) == 2);
  CHECK(out.dst(0) == 3);
  std::vector<VertexId> zero{0};
  CHECK(iterate_edges_for_sources(encode_dcsr(c), zero).empty());
  std::vector<VertexId> all{0, 1, 2};
  CHECK(iterate_edges_for_sources(encode_csr(c), all) == c.edges);
  CHECK(iterate_edges_for_sources(encode_dcsr(c), all) == c.edges);
  std::vector<VertexId> down{2, 1};
  CHECK_THROWS_AS(iterate_edges_for_sources(encode_csr(c), down), PreconditionError);
  CHECK_THROWS_AS(iterate_edges_for_sources(encode_dcsr(c), down), PreconditionError);
}

TEST_CASE("round trip and size bounds on random chunks") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 60; ++trial) {
    auto c = random_chunk(rng, trial < 5 ? 100'000 : 3000, trial % 3 == 0 ? 4 : 0);
    CsrChunk csr = encode_csr(c);
    DcsrChunk dcsr = encode_dcsr(c);
    CHECK(decode(csr) == c.edges);
    CHECK(decode(dcsr) == c.edges);
    CHECK(csr.idx.size() == c.src_range.size() + 1);
    CHECK(dcsr.src.size() <= std::min<std::uint64_t>(c.src_range.size(), c.edges.size()));
    CHECK(dcsr.idx.size() == dcsr.src.size() + 1);
  }
}

TEST_CASE("CSR and DCSR joins agree on every source subset") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    EdgeChunk c;
    c.src_range = {10, 10 + 1 + rng() % 9};
    std::vector<std::pair<VertexId, VertexId>> pairs;
    for (int k = 0, m = static_cast<int>(rng() % 60); k < m; ++k) {
      pairs.emplace_back(c.src_range.lo + rng() % c.src_range.size(), rng() % 100);
    }
    std::sort(pairs.begin(), pairs.end());
    for (auto [s, d] : pairs) c.edges.push_back(s, d);
    CsrChunk csr = encode_csr(c);
    DcsrChunk dcsr = encode_dcsr(c);
    const std::uint64_t n = c.src_range.size();
    for (std::uint64_t mask = 0; mask < (1ull << n); ++mask) {
      std::vector<VertexId> sources;
      for (std::uint64_t k = 0; k < n; ++k) {
        if (mask >> k & 1) sources.push_back(c.src_range.lo + k);
      }
      auto a = iterate_edges_for_sources(csr, sources);
      REQUIRE(a == iterate_edges_for_sources(dcsr, sources));
      std::size_t expected = 0;
      for (auto [s, d] : pairs) expected += std::binary_search(sources.begin(), sources.end(), s);
      REQUIRE(a.size() == expected);
    }
  }
}

TEST_CASE("chunk file header is bit-exact") {
  ChunkHeader h;
  h.form = Representation::dcsr;
  h.src_range = {3, 7};
  h.edge_count = 2;
  h.payload_bytes = 4;
  auto bytes = encode_chunk_header(h);
  const unsigned char golden[kChunkHeaderBytes] = {
      'D', 'F', 'O', 'C', 1, 0, 0, 0, 1,            // magic, version, form
      3, 0, 0, 0, 0, 0, 0, 0, 7, 0, 0, 0, 0, 0, 0, 0,  // src_lo, src_hi
      2, 0, 0, 0, 0, 0, 0, 0, 4, 0, 0, 0};            // edge_count, payload_bytes
  for (std::size_t i = 0; i < kChunkHeaderBytes; ++i) {
    CAPTURE(i);
    CHECK(std::to_integer<unsigned>(bytes[i]) == golden[i]);
  }
  auto back = decode_chunk_header(bytes);
  CHECK(back.src_range == h.src_range);
  CHECK(back.edge_count == 2);
  auto bad = bytes;
  bad[0] = std::byte{'X'};
  CHECK_THROWS_AS(decode_chunk_header(bad), FormatError);
}

TEST_CASE("chunk files round-trip and join through bounded windows") {
  TempDir dir("enc");
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 10; ++trial) {
    auto c = random_chunk(rng, 4000, trial % 2 ? 4 : 0);
    CsrChunk csr = encode_csr(c);
    DcsrChunk dcsr = encode_dcsr(c);
    write_chunk_file(dir / "c.csr", csr);
    write_chunk_file(dir / "c.dcsr", dcsr);
    CHECK(decode(std::get<CsrChunk>(read_chunk_file(dir / "c.csr"))) == c.edges);
    CHECK(decode(std::get<DcsrChunk>(read_chunk_file(dir / "c.dcsr"))) == c.edges);

    std::vector<VertexId> sources;
    for (VertexId v = c.src_range.lo; v < c.src_range.hi; ++v) {
      if (rng() % 3 == 0) sources.push_back(v);
    }
    auto expected = iterate_edges_for_sources(csr, sources);
    for (auto [path, repr] : {std::pair{dir / "c.csr", Representation::csr},
                              std::pair{dir / "c.dcsr", Representation::dcsr}}) {
      ChunkFile f(path);
      SpanSources s(sources);
      MemoryGovernor gov(1 << 20);
      std::uint64_t read = 0;
      EdgeList got(c.edges.payload_bytes());
      join_chunk_file(f, repr, s, &gov, 4096, &read,
                      [&](VertexId src, VertexId dst, const std::byte* p) {
                        got.push_back(src, dst, {p, c.edges.payload_bytes()});
                      });
      CHECK(got == expected);
      CHECK(gov.used() == 0);
    }
  }
}
