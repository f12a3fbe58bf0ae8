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

#include "dfog/manifest.hpp"

#include <cstring>
#include "json.hpp"
#include <numeric>

namespace dfog {

using nlohmann::json;

namespace {

json to_json(const GraphMeta& m) {
  return {{"num_vertices", m.num_vertices},
          {"num_edges", m.num_edges},
          {"edge_payload_bytes", m.edge_payload_bytes},
          {"num_partitions", m.num_partitions},
          {"alpha", m.alpha},
          {"csr_inflate_ratio", m.csr_inflate_ratio},
          {"gamma", m.gamma},
          {"filter_skip_ratio", m.filter_skip_ratio}};
}

GraphMeta meta_from_json(const json& j) {
  GraphMeta m;
  m.num_vertices = j.at("num_vertices").get<std::uint64_t>();
  m.num_edges = j.at("num_edges").get<std::uint64_t>();
  m.edge_payload_bytes = j.at("edge_payload_bytes").get<std::uint32_t>();
  m.num_partitions = j.at("num_partitions").get<std::uint32_t>();
  m.alpha = j.at("alpha").get<std::uint64_t>();
  m.csr_inflate_ratio = j.at("csr_inflate_ratio").get<double>();
  m.gamma = j.at("gamma").get<double>();
  m.filter_skip_ratio = j.at("filter_skip_ratio").get<double>();
  return m;
}

}  // namespace

const ChunkRecord& Manifest::chunk(std::uint32_t p, std::uint32_t node, std::uint64_t batch) const {
  std::uint32_t parts = layout.num_partitions();
  std::uint64_t before = 0;
  for (std::uint32_t n = 0; n < node; ++n) before += num_batches(n) * parts;
  std::uint64_t nb = num_batches(node);
  if (p >= parts || batch >= nb) throw RangeError("chunk index out of range");
  const ChunkRecord& r = chunks.at(before + p * nb + batch);
  if (r.source_partition != p || r.node != node || r.batch != batch) {
    throw FormatError("manifest chunk records are out of order");
  }
  return r;
}

const DispatchRecord& Manifest::dispatch_for(std::uint32_t p, std::uint32_t node) const {
  const DispatchRecord& r = dispatch.at(static_cast<std::size_t>(node) * layout.num_partitions() + p);
  if (r.source_partition != p || r.node != node) {
    throw FormatError("manifest dispatch records are out of order");
  }
  return r;
}

const FilterRecord& Manifest::filter(std::uint32_t from, std::uint32_t to) const {
  std::uint32_t parts = layout.num_partitions();
  if (from == to || from >= parts || to >= parts) throw RangeError("no filter list for pair");
  std::size_t i = static_cast<std::size_t>(from) * (parts - 1) + (to < from ? to : to - 1);
  const FilterRecord& r = filters.at(i);
  if (r.from != from || r.to != to) throw FormatError("manifest filter records are out of order");
  return r;
}

void Manifest::validate() const {
  meta.validate();
  std::uint32_t parts = layout.num_partitions();
  if (parts != meta.num_partitions) throw FormatError("partition count mismatch in manifest");
  if (layout.num_vertices() != meta.num_vertices) throw FormatError("vertex count mismatch");
  std::uint64_t expected_chunks = 0;
  for (std::uint32_t n = 0; n < parts; ++n) expected_chunks += num_batches(n) * parts;
  if (chunks.size() != expected_chunks) throw FormatError("wrong number of chunk records");
  std::uint64_t sum = 0;
  for (const auto& c : chunks) sum += c.edge_count;
  if (sum != meta.num_edges) throw FormatError("chunk edge counts do not sum to |E|");
  if (dispatch.size() != static_cast<std::size_t>(parts) * parts) {
    throw FormatError("wrong number of dispatch records");
  }
  if (filters.size() != static_cast<std::size_t>(parts) * (parts - 1)) {
    throw FormatError("wrong number of filter records");
  }
  if (incoming_edges.size() != parts || outgoing_edges.size() != parts) {
    throw FormatError("wrong number of per-partition edge aggregates");
  }
}

void Manifest::save(const std::filesystem::path& dir) const {
  json j;
  j["format_version"] = kFormatVersion;
  j["meta"] = to_json(meta);
  j["boundaries"] = layout.boundaries();
  j["batch_size"] = batching.batch_size();
  j["is_reversed"] = is_reversed;
  j["reversed_graph"] = reversed_graph;
  j["incoming_edges"] = incoming_edges;
  j["outgoing_edges"] = outgoing_edges;
  json cs = json::array();
  for (const auto& c : chunks) {
    cs.push_back({{"source_partition", c.source_partition},
                  {"node", c.node},
                  {"batch", c.batch},
                  {"edge_count", c.edge_count},
                  {"dcsr_len", c.dcsr_len},
                  {"has_csr", c.has_csr},
                  {"dcsr_file", c.dcsr_file},
                  {"csr_file", c.csr_file}});
  }
  j["chunks"] = std::move(cs);
  json ds = json::array();
  for (const auto& d : dispatch) {
    ds.push_back({{"source_partition", d.source_partition},
                  {"node", d.node},
                  {"edge_count", d.edge_count},
                  {"dcsr_len", d.dcsr_len},
                  {"has_csr", d.has_csr},
                  {"dcsr_file", d.dcsr_file},
                  {"csr_file", d.csr_file},
                  {"pull_file", d.pull_file}});
  }
  j["dispatch"] = std::move(ds);
  json fs = json::array();
  for (const auto& f : filters) {
    fs.push_back({{"from", f.from}, {"to", f.to}, {"length", f.length}, {"file", f.file}});
  }
  j["filters"] = std::move(fs);
  std::string text = j.dump(1);
  text.push_back('\n');
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "manifest.json",
                    {reinterpret_cast<const std::byte*>(text.data()), text.size()}, false);
}

bool Manifest::exists(const std::filesystem::path& dir) {
  return std::filesystem::exists(dir / "manifest.json");
}

Manifest Manifest::load(const std::filesystem::path& dir) {
  if (!exists(dir)) throw ManifestMissing("no manifest in '" + dir.string() + "'");
  auto bytes = read_whole_file(dir / "manifest.json");
  json j;
  try {
    j = json::parse(std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  } catch (const json::exception& e) {
    throw FormatError("manifest is not valid JSON: " + std::string(e.what()));
  }
  try {
    if (j.at("format_version").get<std::uint32_t>() != kFormatVersion) {
      throw FormatError("unsupported manifest version");
    }
    Manifest m;
    m.meta = meta_from_json(j.at("meta"));
    m.layout = PartitionLayout(j.at("boundaries").get<std::vector<VertexId>>());
    m.batching = BatchLayout(j.at("batch_size").get<VertexId>());
    m.is_reversed = j.at("is_reversed").get<bool>();
    m.reversed_graph = j.at("reversed_graph").get<std::string>();
    m.incoming_edges = j.at("incoming_edges").get<std::vector<std::uint64_t>>();
    m.outgoing_edges = j.at("outgoing_edges").get<std::vector<std::uint64_t>>();
    for (const auto& c : j.at("chunks")) {
      m.chunks.push_back({c.at("source_partition"), c.at("node"), c.at("batch"),
                          c.at("edge_count"), c.at("dcsr_len"), c.at("has_csr"),
                          c.at("dcsr_file"), c.at("csr_file")});
    }
    for (const auto& d : j.at("dispatch")) {
      m.dispatch.push_back({d.at("source_partition"), d.at("node"), d.at("edge_count"),
                            d.at("dcsr_len"), d.at("has_csr"), d.at("dcsr_file"),
                            d.at("csr_file"), d.at("pull_file")});
    }
    for (const auto& f : j.at("filters")) {
      m.filters.push_back({f.at("from"), f.at("to"), f.at("length"), f.at("file")});
    }
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw FormatError("malformed manifest: " + std::string(e.what()));
  }
}

bool operator==(const Manifest& a, const Manifest& b) {
  auto chunk_eq = [](const ChunkRecord& x, const ChunkRecord& y) {
    return x.source_partition == y.source_partition && x.node == y.node && x.batch == y.batch &&
           x.edge_count == y.edge_count && x.dcsr_len == y.dcsr_len && x.has_csr == y.has_csr &&
           x.dcsr_file == y.dcsr_file && x.csr_file == y.csr_file;
  };
  auto disp_eq = [](const DispatchRecord& x, const DispatchRecord& y) {
    return x.source_partition == y.source_partition && x.node == y.node &&
           x.edge_count == y.edge_count && x.dcsr_len == y.dcsr_len && x.has_csr == y.has_csr &&
           x.dcsr_file == y.dcsr_file && x.csr_file == y.csr_file && x.pull_file == y.pull_file;
  };
  auto filt_eq = [](const FilterRecord& x, const FilterRecord& y) {
    return x.from == y.from && x.to == y.to && x.length == y.length && x.file == y.file;
  };
  auto& ma = a.meta;
  auto& mb = b.meta;
  return ma.num_vertices == mb.num_vertices && ma.num_edges == mb.num_edges &&
         ma.edge_payload_bytes == mb.edge_payload_bytes &&
         ma.num_partitions == mb.num_partitions && ma.alpha == mb.alpha &&
         ma.csr_inflate_ratio == mb.csr_inflate_ratio && ma.gamma == mb.gamma &&
         ma.filter_skip_ratio == mb.filter_skip_ratio && a.layout == b.layout &&
         a.batching == b.batching && a.is_reversed == b.is_reversed &&
         a.reversed_graph == b.reversed_graph && a.incoming_edges == b.incoming_edges &&
         a.outgoing_edges == b.outgoing_edges &&
         std::equal(a.chunks.begin(), a.chunks.end(), b.chunks.begin(), b.chunks.end(),
                    chunk_eq) &&
         std::equal(a.dispatch.begin(), a.dispatch.end(), b.dispatch.begin(), b.dispatch.end(),
                    disp_eq) &&
         std::equal(a.filters.begin(), a.filters.end(), b.filters.begin(), b.filters.end(),
                    filt_eq);
}

void write_id_list(const std::filesystem::path& path, std::span<const VertexId> ids) {
  std::vector<std::byte> out;
  out.reserve(kIdListHeaderBytes + ids.size() * 8);
  for (char c : std::string("DFOL")) out.push_back(static_cast<std::byte>(c));
  le::append<std::uint32_t>(out, 1);
  le::append<std::uint64_t>(out, ids.size());
  for (VertexId v : ids) le::append<std::uint64_t>(out, v);
  File(path, File::Mode::write_truncate).write_all(out);
}

std::vector<VertexId> read_id_list(const std::filesystem::path& path) {
  auto bytes = read_whole_file(path);
  if (bytes.size() < kIdListHeaderBytes || std::memcmp(bytes.data(), "DFOL", 4) != 0) {
    throw FormatError("bad id list file '" + path.string() + "'");
  }
  auto count = le::get<std::uint64_t>(bytes.data() + 8);
  if (bytes.size() != kIdListHeaderBytes + count * 8) {
    throw FormatError("id list '" + path.string() + "' has inconsistent size");
  }
  std::vector<VertexId> ids(count);
  if (count > 0) std::memcpy(ids.data(), bytes.data() + kIdListHeaderBytes, count * 8);
  return ids;
}

PullListFile::PullListFile(const std::filesystem::path& path) : file_(path, File::Mode::read) {
  std::array<std::byte, kPullHeaderBytes> head{};
  file_.pread_exact(0, head);
  if (std::memcmp(head.data(), "DFOP", 4) != 0) {
    throw FormatError("bad pull list file '" + path.string() + "'");
  }
  auto batches = le::get<std::uint64_t>(head.data() + 8);
  offsets_.resize(batches + 1);
  file_.pread_exact(kPullHeaderBytes, {reinterpret_cast<std::byte*>(offsets_.data()),
                                       offsets_.size() * 8});
  ids_base_ = kPullHeaderBytes + offsets_.size() * 8;
  if (file_.size() != ids_base_ + offsets_.back() * 8) {
    throw FormatError("pull list '" + path.string() + "' has inconsistent size");
  }
}

std::vector<VertexId> PullListFile::read_list(std::uint64_t batch) const {
  std::vector<VertexId> ids(list_size(batch));
  if (!ids.empty()) {
    file_.pread_exact(list_begin(batch),
                      {reinterpret_cast<std::byte*>(ids.data()), ids.size() * 8});
  }
  return ids;
}

}  // namespace dfog
