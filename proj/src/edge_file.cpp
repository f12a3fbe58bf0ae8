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

#include "dfog/edge_file.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <queue>
#include <tuple>
#include <vector>

namespace dfog {

namespace {

File open_edges(const std::filesystem::path& path) { return File(path, File::Mode::read); }

}  // namespace

EdgeFileReader::EdgeFileReader(const std::filesystem::path& path, std::uint32_t payload_bytes,
                               MemoryGovernor* governor, std::size_t buffer_bytes)
    : file_(open_edges(path)),
      record_bytes_(16 + payload_bytes),
      count_(0),
      reader_(file_, 0, file_.size(), governor,
              std::max<std::size_t>(buffer_bytes / record_bytes_ * record_bytes_, record_bytes_)) {
  std::uint64_t size = file_.size();
  if (size % record_bytes_ != 0) {
    throw FormatError("edge file '" + path.string() + "' size " + std::to_string(size) +
                      " is not a multiple of the " + std::to_string(record_bytes_) +
                      "-byte record");
  }
  count_ = size / record_bytes_;
}

bool EdgeFileReader::next(EdgeView& edge) {
  if (read_ == count_) return false;
  const std::byte* p = reader_.take(record_bytes_);
  edge.src = le::get<std::uint64_t>(p);
  edge.dst = le::get<std::uint64_t>(p + 8);
  edge.payload = p + 16;
  ++read_;
  return true;
}

void write_edge_file(const std::filesystem::path& path, const EdgeList& edges) {
  FileWriter out(path, File::Mode::write_truncate, nullptr, 1 << 20);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    out.put<std::uint64_t>(edges.src(i));
    out.put<std::uint64_t>(edges.dst(i));
    auto p = edges.payload(i);
    out.write(p.data(), p.size());
  }
  out.flush();
}

EdgeList read_edge_file(const std::filesystem::path& path, std::uint32_t payload_bytes) {
  EdgeFileReader in(path, payload_bytes);
  EdgeList out(payload_bytes);
  EdgeView e;
  while (in.next(e)) out.push_back(e.src, e.dst, {e.payload, payload_bytes});
  return out;
}

namespace {

struct RunCursor {
  std::unique_ptr<EdgeFileReader> reader;
  EdgeView current;
};

}  // namespace

void external_sort(const std::filesystem::path& input, const std::filesystem::path& output,
                   std::uint32_t payload_bytes, std::uint64_t memory_budget_bytes,
                   const std::filesystem::path& temp_dir, bool swap_endpoints) {
  const std::size_t rec = 16 + payload_bytes;
  // Each record in a run costs its bytes plus a 4-byte sort index.
  std::uint64_t per_run = std::max<std::uint64_t>(1, memory_budget_bytes / (rec + 4));
  std::filesystem::create_directories(temp_dir);

  EdgeFileReader in(input, payload_bytes);
  std::vector<std::filesystem::path> runs;
  std::vector<std::byte> records;
  std::vector<std::uint32_t> order;
  auto key = [&](std::uint32_t i) {
    const std::byte* p = records.data() + static_cast<std::size_t>(i) * rec;
    return std::pair(le::get<std::uint64_t>(p), le::get<std::uint64_t>(p + 8));
  };
  EdgeView e;
  bool more = true;
  while (more) {
    records.clear();
    std::uint64_t n = 0;
    while (n < per_run && (more = in.next(e))) {
      auto at = records.size();
      records.resize(at + rec);
      le::put<std::uint64_t>(records.data() + at, swap_endpoints ? e.dst : e.src);
      le::put<std::uint64_t>(records.data() + at + 8, swap_endpoints ? e.src : e.dst);
      if (payload_bytes > 0) std::memcpy(records.data() + at + 16, e.payload, payload_bytes);
      ++n;
    }
    if (n == 0) break;
    order.resize(n);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return key(a) < key(b); });
    auto run_path = temp_dir / ("run" + std::to_string(runs.size()) + ".bin");
    FileWriter w(run_path, File::Mode::write_truncate, nullptr, 1 << 20);
    for (std::uint32_t i : order) w.write(records.data() + static_cast<std::size_t>(i) * rec, rec);
    w.flush();
    runs.push_back(run_path);
  }
  records = {};
  order = {};

  FileWriter out(output, File::Mode::write_truncate, nullptr, 1 << 20);
  std::vector<RunCursor> cursors;
  std::size_t per_reader = std::max<std::size_t>(
      rec, static_cast<std::size_t>(memory_budget_bytes / std::max<std::size_t>(1, runs.size() + 1)));
  per_reader = std::min<std::size_t>(per_reader, 1 << 20);
  for (const auto& r : runs) {
    RunCursor c{std::make_unique<EdgeFileReader>(r, payload_bytes, nullptr, per_reader), {}};
    cursors.push_back(std::move(c));
  }
  using Head = std::tuple<VertexId, VertexId, std::size_t>;
  std::priority_queue<Head, std::vector<Head>, std::greater<>> heap;
  for (std::size_t i = 0; i < cursors.size(); ++i) {
    if (cursors[i].reader->next(cursors[i].current)) {
      heap.emplace(cursors[i].current.src, cursors[i].current.dst, i);
    }
  }
  while (!heap.empty()) {
    auto [s, d, i] = heap.top();
    heap.pop();
    out.put<std::uint64_t>(s);
    out.put<std::uint64_t>(d);
    if (payload_bytes > 0) out.write(cursors[i].current.payload, payload_bytes);
    if (cursors[i].reader->next(cursors[i].current)) {
      heap.emplace(cursors[i].current.src, cursors[i].current.dst, i);
    }
  }
  out.flush();
  cursors.clear();
  for (const auto& r : runs) std::filesystem::remove(r);
}

}  // namespace dfog
