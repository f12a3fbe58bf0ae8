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

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dfog/encoding.hpp"
#include "dfog/layout.hpp"

namespace dfog::testing {

/// Directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("dfog_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline constexpr VertexId kG7Vertices = 7;

/// 0→1, 0→2, 1→3, 2→3, 3→4, 4→5, 5→6, 6→0, 2→5
inline EdgeList g7() {
  EdgeList e;
  const std::pair<VertexId, VertexId> pairs[] = {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {3, 4},
                                                 {4, 5}, {5, 6}, {6, 0}, {2, 5}};
  for (auto [s, d] : pairs) e.push_back(s, d);
  return e;
}

inline std::vector<std::byte> float_bytes(float w) {
  std::vector<std::byte> b(sizeof w);
  std::memcpy(b.data(), &w, sizeof w);
  return b;
}

inline EdgeList with_weights(const EdgeList& in, std::mt19937_64& rng, bool unit = false) {
  EdgeList out(4);
  std::uniform_real_distribution<float> dist(0.0f, 10.0f);
  for (std::size_t i = 0; i < in.size(); ++i) {
    out.push_back(in.src(i), in.dst(i), float_bytes(unit ? 1.0f : dist(rng)));
  }
  return out;
}

/// Erdős–Rényi style: `m` uniformly random directed edges, no self loops.
inline EdgeList random_uniform(VertexId n, std::uint64_t m, std::mt19937_64& rng) {
  EdgeList e;
  std::uniform_int_distribution<VertexId> pick(0, n - 1);
  for (std::uint64_t k = 0; k < m; ++k) {
    VertexId s = pick(rng), d = pick(rng);
    if (n > 1) {
      while (d == s) d = pick(rng);
    }
    e.push_back(s, d);
  }
  return e;
}

/// Skewed degrees: endpoints drawn from a power law over vertex IDs, with
/// the hot IDs scattered by a fixed permutation.
inline EdgeList random_skewed(VertexId n, std::uint64_t m, std::mt19937_64& rng) {
  std::vector<VertexId> perm(n);
  for (VertexId v = 0; v < n; ++v) perm[v] = v;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto draw = [&] {
    double x = std::pow(u(rng), 2.5);
    return perm[std::min<VertexId>(n - 1, static_cast<VertexId>(x * static_cast<double>(n)))];
  };
  EdgeList e;
  for (std::uint64_t k = 0; k < m; ++k) e.push_back(draw(), draw());
  return e;
}

}  // namespace dfog::testing
