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

#include <numeric>
#include <random>

#include "doctest.h"
#include "dfog/partition.hpp"
#include "support.hpp"

using namespace dfog;

namespace {

std::uint64_t max_part(std::span<const std::uint64_t> w, const std::vector<VertexId>& bounds) {
  std::uint64_t best = 0;
  for (std::size_t p = 0; p + 1 < bounds.size(); ++p) {
    std::uint64_t s = 0;
    for (VertexId v = bounds[p]; v < bounds[p + 1]; ++v) s += w[v];
    best = std::max(best, s);
  }
  return best;
}

// Exhaustive search over every contiguous split into `parts` non-empty
// ranges, by dynamic programming over (prefix length, parts used).
std::uint64_t exhaustive_optimum(std::span<const std::uint64_t> w, std::uint32_t parts) {
  const std::size_t n = w.size();
  std::vector<std::uint64_t> prefix(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + w[i];
  const std::uint64_t inf = std::numeric_limits<std::uint64_t>::max();
  std::vector<std::vector<std::uint64_t>> best(parts + 1, std::vector<std::uint64_t>(n + 1, inf));
  best[0][0] = 0;
  for (std::uint32_t k = 1; k <= parts; ++k) {
    for (std::size_t end = k; end <= n; ++end) {
      for (std::size_t start = k - 1; start < end; ++start) {
        if (best[k - 1][start] == inf) continue;
        best[k][end] = std::min(best[k][end], std::max(best[k - 1][start], prefix[end] - prefix[start]));
      }
    }
  }
  return best[parts][n];
}

}  // namespace

TEST_CASE("G7 splits into [0,3,7] with weights 17 and 22") {
  DegreeTable d(7);
  auto e = testing::g7();
  for (std::size_t i = 0; i < e.size(); ++i) d.add_edge(e.src(i), e.dst(i));
  PartitionLayout layout = partition_vertices(d, 2, GraphMeta::default_alpha(2));
  CHECK(layout.boundaries() == std::vector<VertexId>{0, 3, 7});
  std::vector<std::uint64_t> w{6, 5, 6, 6, 5, 6, 5};
  CHECK(max_part(w, layout.boundaries()) == 22);
}

TEST_CASE("trivial partitions") {
  std::vector<std::uint64_t> w(12, 3);
  CHECK(partition_weights(w, 1).boundaries() == std::vector<VertexId>{0, 12});
  CHECK(partition_weights(w, 4).boundaries() == std::vector<VertexId>{0, 3, 6, 9, 12});
  CHECK_THROWS_AS(partition_weights(w, 13), ConfigError);
}

TEST_CASE("partitions are optimal and within the balance bound") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 200;
    const std::uint32_t parts = 1 + rng() % std::min<std::size_t>(8, n);
    std::vector<std::uint64_t> w(n);
    const std::uint64_t spread = trial % 3 == 0 ? 1000 : 20;
    for (auto& x : w) x = rng() % spread;
    auto layout = partition_weights(w, parts);
    const auto& b = layout.boundaries();
    REQUIRE(b.size() == parts + 1);
    for (std::size_t p = 0; p < parts; ++p) CHECK(b[p] < b[p + 1]);
    std::uint64_t got = max_part(w, b);
    CHECK(got == exhaustive_optimum(w, parts));
    std::uint64_t total = std::accumulate(w.begin(), w.end(), std::uint64_t{0});
    std::uint64_t heaviest = *std::max_element(w.begin(), w.end());
    CHECK(got <= (total + parts - 1) / parts + heaviest);
  }
}

TEST_CASE("batch size rules") {
  BatchSizing fully;
  fully.mode = OocMode::fully;
  fully.memory_budget_bytes = 1ull << 30;
  fully.threads = 12;
  fully.vertex_record_bytes = 16;
  CHECK(choose_batch_size(fully) == 2796160);

  BatchSizing semi;
  semi.mode = OocMode::semi;
  semi.threads = 12;
  semi.min_partition_size = 7200;
  semi.memory_budget_bytes = 1ull << 30;
  CHECK(choose_batch_size(semi) == 384);

  semi.threads = 1;
  semi.min_partition_size = 96;
  CHECK(choose_batch_size(semi) == 64);

  fully.memory_budget_bytes = 1024;
  CHECK_THROWS_AS(choose_batch_size(fully), ConfigError);

  CHECK(normalize_batch_size(1) == 64);
  CHECK(normalize_batch_size(1000) == 960);
  CHECK(normalize_batch_size(1024) == 1024);
}

TEST_CASE("fully out-of-core batch size is the largest admissible multiple of 64") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    BatchSizing s;
    s.threads = 1 + rng() % 32;
    s.vertex_record_bytes = 1 + rng() % 128;
    s.memory_budget_bytes = (64 * s.threads * s.vertex_record_bytes * 2) + 1 + rng() % (1ull << 32);
    VertexId b = choose_batch_size(s);
    CHECK(b % 64 == 0);
    CHECK(b * s.vertex_record_bytes * s.threads < s.memory_budget_bytes / 2.0);
    CHECK_FALSE((b + 64) * s.vertex_record_bytes * s.threads < s.memory_budget_bytes / 2.0);
  }
}
