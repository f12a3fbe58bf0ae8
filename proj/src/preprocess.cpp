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

#include "dfog/preprocess.hpp"

#include <algorithm>
#include <cstring>
#include <map>
#include <optional>
#include <queue>
#include <tuple>
#include <utility>

namespace dfog {

namespace fs = std::filesystem;

namespace {

std::size_t io_buffer(std::uint64_t budget) {
  return static_cast<std::size_t>(std::clamp<std::uint64_t>(budget / 16, 4096, 1 << 20));
}

void check_edge(const EdgeView& e, VertexId n, std::uint64_t ordinal, const EdgeView& prev,
                bool first) {
  if (e.src >= n || e.dst >= n) {
    throw FormatError("edge #" + std::to_string(ordinal) + " (" + std::to_string(e.src) + " -> " +
                      std::to_string(e.dst) + ") has a vertex ID >= " + std::to_string(n));
  }
  if (!first && (e.src < prev.src || (e.src == prev.src && e.dst < prev.dst))) {
    throw FormatError("input is not sorted by (src, dst): first offending edge is #" +
                      std::to_string(ordinal));
  }
}

void copy_range(const File& from, std::uint64_t begin, std::uint64_t end, FileWriter& to,
                MemoryGovernor* governor, std::size_t buffer) {
  if (begin == end) return;
  FileReader r(from, begin, end, governor, buffer);
  while (!r.at_end()) {
    std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(buffer, r.end() - r.position()));
    to.write(r.take(n), n);
  }
}

// Accumulates one chunk's edges (already in (src, dst) order) and writes its
// DCSR / CSR files. Pending arrays live in memory until spill() moves them to
// temp files next to `stem`.
class ChunkBuilder {
 public:
  ChunkBuilder(VertexRange src_range, std::uint32_t payload_bytes, fs::path stem)
      : src_range_(src_range), payload_bytes_(payload_bytes), stem_(std::move(stem)) {}

  void add(VertexId src, VertexId dst, const std::byte* payload) {
    if (edges_ == 0 || src != current_src_) {
      if (edges_ > 0) runs_.emplace_back(current_src_, current_count_);
      current_src_ = src;
      current_count_ = 0;
      ++num_runs_;
    }
    ++current_count_;
    ++edges_;
    dsts_.push_back(dst);
    if (payload_bytes_ > 0) payloads_.insert(payloads_.end(), payload, payload + payload_bytes_);
  }

  std::uint64_t edges() const { return edges_; }
  std::uint64_t num_runs() const { return num_runs_; }
  std::uint64_t pending_bytes() const {
    return runs_.size() * 16 + dsts_.size() * 8 + payloads_.size();
  }

  void spill() {
    if (pending_bytes() == 0) return;
    append(path(".runs"), runs_.data(), runs_.size() * 16);
    append(path(".dst"), dsts_.data(), dsts_.size() * 8);
    append(path(".payload"), payloads_.data(), payloads_.size());
    spilled_ = true;
    std::vector<std::pair<VertexId, std::uint64_t>>().swap(runs_);
    std::vector<VertexId>().swap(dsts_);
    std::vector<std::byte>().swap(payloads_);
  }

  struct Result {
    std::uint64_t edge_count = 0;
    std::uint64_t dcsr_len = 0;
    bool has_csr = false;
  };

  /// Writes the chunk files (nothing for an empty chunk) and removes temps.
  Result assemble(const fs::path& dcsr_path, const fs::path& csr_path, double ratio,
                  MemoryGovernor* governor, std::size_t buffer) {
    Result res;
    res.edge_count = edges_;
    res.dcsr_len = num_runs_;
    if (edges_ == 0) return res;
    runs_.emplace_back(current_src_, current_count_);
    if (spilled_) spill();
    res.has_csr = should_build_csr(src_range_.size(), edges_, ratio);
    write_file(dcsr_path, Representation::dcsr, governor, buffer);
    if (res.has_csr) write_file(csr_path, Representation::csr, governor, buffer);
    if (spilled_) {
      for (const char* ext : {".runs", ".dst", ".payload"}) fs::remove(path(ext));
    }
    return res;
  }

 private:
  fs::path path(const char* ext) const {
    fs::path p = stem_;
    p += ext;
    return p;
  }

  static void append(const fs::path& p, const void* data, std::size_t n) {
    File f(p, File::Mode::append_create);
    if (n > 0) f.write_all({static_cast<const std::byte*>(data), n});
  }

  template <class F>
  void for_each_run(MemoryGovernor* governor, std::size_t buffer, F&& f) const {
    if (!spilled_) {
      for (const auto& [s, c] : runs_) f(s, c);
      return;
    }
    File runs(path(".runs"), File::Mode::read);
    FileReader r(runs, 0, runs.size(), governor, std::max<std::size_t>(buffer / 16 * 16, 16));
    while (!r.at_end()) {
      const std::byte* p = r.take(16);
      f(le::get<std::uint64_t>(p), le::get<std::uint64_t>(p + 8));
    }
  }

  void write_file(const fs::path& out, Representation form, MemoryGovernor* governor,
                  std::size_t buffer) const {
    FileWriter w(out, File::Mode::write_truncate, governor, buffer);
    auto header =
        encode_chunk_header({kChunkVersion, form, src_range_, edges_, payload_bytes_});
    w.write(header.data(), header.size());
    std::uint64_t cum = 0;
    if (form == Representation::dcsr) {
      w.put<std::uint64_t>(0);
      for_each_run(governor, buffer, [&](VertexId, std::uint64_t c) {
        cum += c;
        w.put<std::uint64_t>(cum);
      });
      for_each_run(governor, buffer, [&](VertexId s, std::uint64_t) { w.put<std::uint64_t>(s); });
    } else {
      VertexId pos = src_range_.lo;
      for_each_run(governor, buffer, [&](VertexId s, std::uint64_t c) {
        for (; pos <= s; ++pos) w.put<std::uint64_t>(cum);
        cum += c;
      });
      for (; pos <= src_range_.hi; ++pos) w.put<std::uint64_t>(cum);
    }
    if (spilled_) {
      File dst(path(".dst"), File::Mode::read);
      copy_range(dst, 0, dst.size(), w, governor, buffer);
      File payload(path(".payload"), File::Mode::read);
      copy_range(payload, 0, payload.size(), w, governor, buffer);
    } else {
      w.write(dsts_.data(), dsts_.size() * 8);
      w.write(payloads_.data(), payloads_.size());
    }
    w.flush();
  }

  VertexRange src_range_;
  std::uint32_t payload_bytes_;
  fs::path stem_;
  std::vector<std::pair<VertexId, std::uint64_t>> runs_;
  std::vector<VertexId> dsts_;
  std::vector<std::byte> payloads_;
  VertexId current_src_ = 0;
  std::uint64_t current_count_ = 0;
  std::uint64_t edges_ = 0;
  std::uint64_t num_runs_ = 0;
  bool spilled_ = false;
};

std::string chunk_name(std::uint32_t node, std::uint32_t p, std::uint64_t b, const char* ext) {
  return Manifest::node_dir(node) + "/chunk_p" + std::to_string(p) + "_b" + std::to_string(b) +
         ext;
}

// Flat index of (node, batch) over all batches of all nodes.
struct BatchIndex {
  std::vector<std::uint64_t> first;  // per node, plus total at the end

  BatchIndex(const PartitionLayout& layout, const BatchLayout& batching) {
    first.push_back(0);
    for (std::uint32_t j = 0; j < layout.num_partitions(); ++j) {
      first.push_back(first.back() + batching.num_batches(layout.range(j)));
    }
  }
  std::uint64_t total() const { return first.back(); }
};

template <typename T>
void write_array(const fs::path& path, const File& from, std::uint64_t first,
                 std::uint64_t count, MemoryGovernor* governor, std::size_t buffer) {
  FileWriter w(path, File::Mode::write_truncate, governor, buffer);
  copy_range(from, first * sizeof(T), (first + count) * sizeof(T), w, governor, buffer);
  w.flush();
}

}  // namespace

DegreePass count_degrees(const fs::path& input, VertexId n, std::uint32_t payload_bytes,
                         std::uint64_t budget, const fs::path& work_dir) {
  fs::create_directories(work_dir);
  MemoryGovernor governor(budget);
  std::size_t buffer = io_buffer(budget);
  DegreePass out;
  out.out_degree = work_dir / "out_degree.all";
  out.in_degree = work_dir / "in_degree.all";

  // Out-degrees stream in source order, so one pass suffices.
  {
    EdgeFileReader in(input, payload_bytes, &governor, buffer);
    FileWriter w(out.out_degree, File::Mode::write_truncate, &governor, buffer);
    EdgeView e, prev;
    VertexId next = 0;
    std::uint64_t run = 0;
    bool first = true;
    while (in.next(e)) {
      check_edge(e, n, in.ordinal() - 1, prev, first);
      if (!first && e.src != prev.src) {
        for (; next < prev.src; ++next) w.put<std::uint64_t>(0);
        w.put<std::uint64_t>(run);
        ++next;
        run = 0;
      }
      ++run;
      prev = e;
      first = false;
    }
    if (!first) {
      for (; next < prev.src; ++next) w.put<std::uint64_t>(0);
      w.put<std::uint64_t>(run);
      ++next;
    }
    for (; next < n; ++next) w.put<std::uint64_t>(0);
    w.flush();
    out.num_edges = in.num_edges();
  }

  // In-degrees: counters for as many destinations as half the budget holds.
  std::uint64_t span = std::max<std::uint64_t>(1, budget / 2 / 8);
  FileWriter w(out.in_degree, File::Mode::write_truncate, &governor, buffer);
  for (VertexId lo = 0; lo < n; lo += span) {
    VertexId hi = std::min<VertexId>(n, lo + span);
    Buffer counts(&governor, (hi - lo) * 8);
    auto* c = reinterpret_cast<std::uint64_t*>(counts.data());
    std::fill(c, c + (hi - lo), 0);
    EdgeFileReader in(input, payload_bytes, &governor, buffer);
    EdgeView e;
    while (in.next(e)) {
      if (e.dst >= lo && e.dst < hi) ++c[e.dst - lo];
    }
    w.write(c, (hi - lo) * 8);
  }
  w.flush();
  return out;
}

PartitionLayout partition_from_degrees(const DegreePass& degrees, VertexId n,
                                       std::uint32_t partitions, std::uint64_t alpha,
                                       const fs::path& work_dir) {
  if (partitions > n) {
    throw ConfigError("cannot split " + std::to_string(n) + " vertices into " +
                      std::to_string(partitions) + " partitions");
  }
  fs::path prefix_path = work_dir / "weights.prefix";
  std::uint64_t max_w = 0;
  {
    File outd(degrees.out_degree, File::Mode::read);
    File ind(degrees.in_degree, File::Mode::read);
    ArrayReader<std::uint64_t> o(outd, 0, n, nullptr, 1 << 16);
    ArrayReader<std::uint64_t> i(ind, 0, n, nullptr, 1 << 16);
    FileWriter w(prefix_path, File::Mode::write_truncate, nullptr, 1 << 16);
    std::uint64_t sum = 0;
    w.put<std::uint64_t>(0);
    for (VertexId v = 0; v < n; ++v) {
      std::uint64_t weight = alpha + o[v] + i[v];
      max_w = std::max(max_w, weight);
      sum += weight;
      w.put<std::uint64_t>(sum);
    }
    w.flush();
  }
  File prefix_file(prefix_path, File::Mode::read);
  auto prefix = [&](VertexId k) {
    std::array<std::byte, 8> raw{};
    prefix_file.pread_exact(k * 8, raw);
    return le::get<std::uint64_t>(raw.data());
  };
  PartitionLayout layout(balanced_split(prefix, n, partitions, max_w));
  prefix_file.close();
  fs::remove(prefix_path);
  return layout;
}

std::vector<ChunkRecord> build_chunks(const fs::path& sorted_edges, const GraphMeta& meta,
                                      const PartitionLayout& layout, const BatchLayout& batching,
                                      const fs::path& out_dir, std::uint64_t budget) {
  MemoryGovernor governor(budget);
  std::size_t buffer = io_buffer(budget);
  const std::uint32_t parts = layout.num_partitions();
  const std::uint32_t pb = meta.edge_payload_bytes;
  BatchIndex index(layout, batching);
  fs::path temp = out_dir / ".tmp_chunks";
  fs::create_directories(temp);
  for (std::uint32_t j = 0; j < parts; ++j) fs::create_directories(out_dir / Manifest::node_dir(j));

  // Pending edges are charged up front as one pool; builders spill past it.
  std::uint64_t pool = std::max<std::uint64_t>(budget / 4, 1);
  Lease pool_lease = governor.reserve(pool);
  std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint64_t>, ChunkRecord> records;
  std::vector<std::optional<ChunkBuilder>> builders;
  std::uint64_t pending = 0;

  auto finish_partition = [&](std::uint32_t p) {
    for (std::uint32_t j = 0; j < parts; ++j) {
      std::uint64_t nb = index.first[j + 1] - index.first[j];
      for (std::uint64_t b = 0; b < nb; ++b) {
        ChunkRecord rec{p, j, b, 0, 0, false, "", ""};
        auto& builder = builders[index.first[j] + b];
        if (builder && builder->edges() > 0) {
          auto dcsr = chunk_name(j, p, b, ".dcsr");
          auto csr = chunk_name(j, p, b, ".csr");
          auto res = builder->assemble(out_dir / dcsr, out_dir / csr, meta.csr_inflate_ratio,
                                       &governor, buffer);
          rec.edge_count = res.edge_count;
          rec.dcsr_len = res.dcsr_len;
          rec.has_csr = res.has_csr;
          rec.dcsr_file = dcsr;
          if (res.has_csr) rec.csr_file = csr;
        }
        records.emplace(std::tuple(j, p, b), rec);
      }
    }
    builders.clear();
    pending = 0;
  };

  EdgeFileReader in(sorted_edges, pb, &governor, buffer);
  EdgeView e, prev;
  bool first = true;
  std::uint32_t current = 0;
  builders.resize(index.total());
  while (in.next(e)) {
    check_edge(e, meta.num_vertices, in.ordinal() - 1, prev, first);
    std::uint32_t p = layout.owner(e.src);
    while (current < p) {
      finish_partition(current++);
      builders.resize(index.total());
    }
    std::uint32_t j = layout.owner(e.dst);
    std::uint64_t b = batching.batch_of(layout.range(j), e.dst);
    auto& builder = builders[index.first[j] + b];
    if (!builder) {
      builder.emplace(layout.range(p), pb,
                      temp / ("p" + std::to_string(p) + "_n" + std::to_string(j) + "_b" +
                              std::to_string(b)));
    }
    std::uint64_t before = builder->pending_bytes();
    builder->add(e.src, e.dst, e.payload);
    pending += builder->pending_bytes() - before;
    if (pending > pool) {
      for (auto& bld : builders) {
        if (bld) bld->spill();
      }
      pending = 0;
    }
    prev = e;
    first = false;
  }
  while (current < parts) {
    finish_partition(current++);
    builders.resize(index.total());
  }
  fs::remove_all(temp);

  std::vector<ChunkRecord> out;
  out.reserve(records.size());
  for (auto& [key, rec] : records) out.push_back(std::move(rec));
  return out;
}

std::vector<FilterRecord> build_filter_lists(const fs::path& sorted_edges,
                                             std::uint32_t payload_bytes,
                                             const PartitionLayout& layout,
                                             const fs::path& out_dir) {
  const std::uint32_t parts = layout.num_partitions();
  std::vector<FilterRecord> records;
  if (parts < 2) return records;
  for (std::uint32_t j = 0; j < parts; ++j) fs::create_directories(out_dir / Manifest::node_dir(j));

  std::vector<std::optional<FileWriter>> writers(parts);
  std::vector<std::uint64_t> counts(parts, 0);
  std::vector<VertexId> last(parts, 0);
  std::uint32_t current = 0;

  auto name = [](std::uint32_t from, std::uint32_t to) {
    return Manifest::node_dir(from) + "/filter_to" + std::to_string(to) + ".bin";
  };
  auto open = [&](std::uint32_t from) {
    for (std::uint32_t to = 0; to < parts; ++to) {
      counts[to] = 0;
      if (to == from) continue;
      writers[to].emplace(out_dir / name(from, to), File::Mode::write_truncate, nullptr, 1 << 16);
      writers[to]->write("DFOL", 4);
      writers[to]->put<std::uint32_t>(1);
      writers[to]->put<std::uint64_t>(0);
    }
  };
  auto close = [&](std::uint32_t from) {
    for (std::uint32_t to = 0; to < parts; ++to) {
      if (to == from) continue;
      writers[to]->flush();
      writers[to].reset();
      File f(out_dir / name(from, to), File::Mode::read_write_create);
      std::array<std::byte, 8> raw{};
      le::put<std::uint64_t>(raw.data(), counts[to]);
      f.pwrite_all(8, raw);
      records.push_back({from, to, counts[to], name(from, to)});
    }
  };

  EdgeFileReader in(sorted_edges, payload_bytes);
  EdgeView e, prev;
  bool first = true;
  open(0);
  while (in.next(e)) {
    check_edge(e, layout.num_vertices(), in.ordinal() - 1, prev, first);
    std::uint32_t p = layout.owner(e.src);
    while (current < p) {
      close(current);
      open(++current);
    }
    std::uint32_t to = layout.owner(e.dst);
    if (to != p && (counts[to] == 0 || last[to] != e.src)) {
      writers[to]->put<std::uint64_t>(e.src);
      last[to] = e.src;
      ++counts[to];
    }
    prev = e;
    first = false;
  }
  close(current);
  while (current + 1 < parts) {
    open(++current);
    close(current);
  }
  return records;
}

std::vector<DispatchRecord> build_dispatch_structures(const std::vector<ChunkRecord>& chunks,
                                                      const GraphMeta& meta,
                                                      const PartitionLayout& layout,
                                                      const BatchLayout& batching,
                                                      const fs::path& out_dir) {
  const std::uint32_t parts = layout.num_partitions();
  std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint64_t>, const ChunkRecord*> by_key;
  for (const auto& c : chunks) by_key[{c.node, c.source_partition, c.batch}] = &c;
  fs::path temp = out_dir / ".tmp_dispatch";
  fs::create_directories(temp);
  const std::size_t buffer = 1 << 16;

  std::vector<DispatchRecord> out;
  for (std::uint32_t j = 0; j < parts; ++j) {
    std::uint64_t nb = batching.num_batches(layout.range(j));
    for (std::uint32_t p = 0; p < parts; ++p) {
      std::vector<const ChunkRecord*> cs(nb, nullptr);
      for (std::uint64_t b = 0; b < nb; ++b) {
        auto it = by_key.find({j, p, b});
        if (it == by_key.end()) throw FormatError("missing chunk record for dispatch structure");
        cs[b] = it->second;
      }
      DispatchRecord rec;
      rec.source_partition = p;
      rec.node = j;
      std::string stem = Manifest::node_dir(j) + "/dispatch_p" + std::to_string(p);
      rec.pull_file = Manifest::node_dir(j) + "/pull_p" + std::to_string(p) + ".bin";

      // Pull lists: the DCSR source IDs of each chunk, concatenated by batch.
      std::vector<std::optional<ChunkFile>> files(nb);
      {
        FileWriter w(out_dir / rec.pull_file, File::Mode::write_truncate, nullptr, buffer);
        w.write("DFOP", 4);
        w.put<std::uint32_t>(1);
        w.put<std::uint64_t>(nb);
        std::uint64_t cum = 0;
        w.put<std::uint64_t>(0);
        for (std::uint64_t b = 0; b < nb; ++b) {
          cum += cs[b]->dcsr_len;
          w.put<std::uint64_t>(cum);
        }
        for (std::uint64_t b = 0; b < nb; ++b) {
          if (cs[b]->edge_count == 0) continue;
          files[b].emplace(out_dir / cs[b]->dcsr_file);
          if (files[b]->num_sources() != cs[b]->dcsr_len) {
            throw FormatError("chunk '" + cs[b]->dcsr_file + "' disagrees with its record");
          }
          copy_range(files[b]->file(), files[b]->src_base(),
                     files[b]->src_base() + files[b]->num_sources() * 8, w, nullptr, buffer);
        }
        w.flush();
      }

      // Dispatching graph: k-way merge of the per-batch source lists.
      ChunkBuilder builder(layout.range(p), 0, temp / stem.substr(stem.find('/') + 1));
      std::vector<std::optional<ArrayReader<VertexId>>> readers(nb);
      std::vector<std::uint64_t> pos(nb, 0);
      using Head = std::pair<VertexId, std::uint64_t>;
      std::priority_queue<Head, std::vector<Head>, std::greater<>> heap;
      for (std::uint64_t b = 0; b < nb; ++b) {
        if (!files[b]) continue;
        readers[b].emplace(files[b]->file(), files[b]->src_base(), files[b]->num_sources(),
                           nullptr, 4096);
        heap.emplace((*readers[b])[0], b);
      }
      std::uint64_t spill_at = 8ull << 20;
      while (!heap.empty()) {
        auto [v, b] = heap.top();
        heap.pop();
        builder.add(v, b, nullptr);
        if (builder.pending_bytes() > spill_at) builder.spill();
        if (++pos[b] < readers[b]->size()) heap.emplace((*readers[b])[pos[b]], b);
      }
      readers.clear();
      files.clear();
      auto res = builder.assemble(out_dir / (stem + ".dcsr"), out_dir / (stem + ".csr"),
                                  meta.csr_inflate_ratio, nullptr, buffer);
      rec.edge_count = res.edge_count;
      rec.dcsr_len = res.dcsr_len;
      rec.has_csr = res.has_csr;
      if (res.edge_count > 0) rec.dcsr_file = stem + ".dcsr";
      if (res.has_csr) rec.csr_file = stem + ".csr";
      out.push_back(std::move(rec));
    }
  }
  fs::remove_all(temp);
  return out;
}

namespace {

Manifest build_graph(const fs::path& sorted, const fs::path& out_dir, const GraphMeta& meta,
                     const PartitionLayout& layout, const BatchLayout& batching,
                     const DegreePass& degrees, bool reversed, std::uint64_t budget) {
  fs::create_directories(out_dir);
  Manifest m;
  m.meta = meta;
  m.layout = layout;
  m.batching = batching;
  m.is_reversed = reversed;
  const std::uint32_t parts = layout.num_partitions();

  // Per-node degree slices; a reversed graph swaps in and out.
  const fs::path& out_src = reversed ? degrees.in_degree : degrees.out_degree;
  const fs::path& in_src = reversed ? degrees.out_degree : degrees.in_degree;
  File outd(out_src, File::Mode::read);
  File ind(in_src, File::Mode::read);
  for (std::uint32_t j = 0; j < parts; ++j) {
    fs::create_directories(out_dir / Manifest::node_dir(j));
    VertexRange r = layout.range(j);
    write_array<std::uint64_t>(out_dir / Manifest::out_degree_file(j), outd, r.lo, r.size(),
                               nullptr, 1 << 16);
    write_array<std::uint64_t>(out_dir / Manifest::in_degree_file(j), ind, r.lo, r.size(),
                               nullptr, 1 << 16);
    ArrayReader<std::uint64_t> o(outd, r.lo * 8, r.size(), nullptr, 1 << 16);
    ArrayReader<std::uint64_t> i(ind, r.lo * 8, r.size(), nullptr, 1 << 16);
    std::uint64_t in_sum = 0, out_sum = 0;
    for (std::uint64_t k = 0; k < r.size(); ++k) {
      out_sum += o[k];
      in_sum += i[k];
    }
    m.incoming_edges.push_back(in_sum);
    m.outgoing_edges.push_back(out_sum);
  }

  m.chunks = build_chunks(sorted, meta, layout, batching, out_dir, budget);
  m.filters = build_filter_lists(sorted, meta.edge_payload_bytes, layout, out_dir);
  m.dispatch = build_dispatch_structures(m.chunks, meta, layout, batching, out_dir);
  return m;
}

}  // namespace

Manifest preprocess(const PreprocessOptions& o) {
  if (o.partitions < 1) throw ConfigError("need at least one node");
  if (o.num_vertices < 1) throw ConfigError("graph needs at least one vertex");
  if (o.partitions > o.num_vertices) {
    throw ConfigError("cannot split " + std::to_string(o.num_vertices) + " vertices into " +
                      std::to_string(o.partitions) + " partitions");
  }
  if (o.memory_budget_bytes < (64u << 10)) {
    throw ConfigError("preprocessing needs a memory budget of at least 64 KiB");
  }
  fs::path work = o.out / ".tmp";
  fs::create_directories(work);

  GraphMeta meta;
  meta.num_vertices = o.num_vertices;
  meta.edge_payload_bytes = o.payload_bytes;
  meta.num_partitions = o.partitions;
  meta.alpha = o.alpha.value_or(GraphMeta::default_alpha(o.partitions));
  meta.csr_inflate_ratio = o.csr_inflate_ratio;
  meta.gamma = o.gamma;
  meta.filter_skip_ratio = o.filter_skip_ratio;
  meta.validate();

  DegreePass degrees =
      count_degrees(o.input, o.num_vertices, o.payload_bytes, o.memory_budget_bytes, work);
  meta.num_edges = degrees.num_edges;
  PartitionLayout layout =
      partition_from_degrees(degrees, o.num_vertices, o.partitions, meta.alpha, work);

  VertexId batch = 0;
  if (o.batch_size) {
    if (*o.batch_size < 1) throw ConfigError("batch size must be >= 1");
    batch = *o.batch_size;
  } else {
    VertexId min_part = layout.range(0).size();
    for (std::uint32_t p = 1; p < o.partitions; ++p) {
      min_part = std::min(min_part, layout.range(p).size());
    }
    batch = choose_batch_size(
        {o.mode, o.memory_budget_bytes, o.threads, o.vertex_record_bytes, min_part});
  }
  BatchLayout batching(batch);

  Manifest forward = build_graph(o.input, o.out, meta, layout, batching, degrees, false,
                                 o.memory_budget_bytes);
  if (o.reversed) {
    fs::path swapped = work / "reversed_edges.bin";
    external_sort(o.input, swapped, o.payload_bytes, o.memory_budget_bytes / 2, work / "sort",
                  true);
    Manifest rev = build_graph(swapped, o.out / "reversed", meta, layout, batching, degrees, true,
                               o.memory_budget_bytes);
    rev.validate();
    rev.save(o.out / "reversed");
    forward.reversed_graph = "reversed";
  }
  forward.validate();
  forward.save(o.out);
  fs::remove_all(work);
  return forward;
}

std::vector<VertexId> load_filter_list(const fs::path& graph_dir, const Manifest& manifest,
                                       std::uint32_t from, std::uint32_t to) {
  return read_id_list(graph_dir / manifest.filter(from, to).file);
}

EdgeList decode_all_chunks(const fs::path& graph_dir, const Manifest& manifest) {
  EdgeList all(manifest.meta.edge_payload_bytes);
  for (const auto& c : manifest.chunks) {
    if (c.edge_count == 0) continue;
    auto chunk = read_chunk_file(graph_dir / c.dcsr_file);
    EdgeList part = std::visit([](const auto& x) { return decode(x); }, chunk);
    for (std::size_t i = 0; i < part.size(); ++i) {
      all.push_back(part.src(i), part.dst(i), part.payload(i));
    }
  }
  return all;
}

}  // namespace dfog
