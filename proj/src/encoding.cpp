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

#include "dfog/encoding.hpp"

#include <algorithm>
#include <cstring>

namespace dfog {

void EdgeList::push_back(VertexId src, VertexId dst, std::span<const std::byte> payload) {
  if (payload.size() != payload_bytes_) {
    throw PreconditionError("edge payload has " + std::to_string(payload.size()) +
                            " bytes, expected " + std::to_string(payload_bytes_));
  }
  src_.push_back(src);
  dst_.push_back(dst);
  payload_.insert(payload_.end(), payload.begin(), payload.end());
}

bool EdgeList::is_sorted() const {
  for (std::size_t i = 1; i < src_.size(); ++i) {
    if (src_[i] < src_[i - 1] || (src_[i] == src_[i - 1] && dst_[i] < dst_[i - 1])) return false;
  }
  return true;
}

void EdgeChunk::validate() const {
  if (!edges.is_sorted()) throw PreconditionError("edge chunk is not sorted by (src, dst)");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (!src_range.contains(edges.src(i))) {
      throw PreconditionError("edge source " + std::to_string(edges.src(i)) +
                              " outside chunk source range");
    }
    if (!dst_range.empty() && !dst_range.contains(edges.dst(i))) {
      throw PreconditionError("edge destination " + std::to_string(edges.dst(i)) +
                              " outside chunk destination range");
    }
  }
}

namespace {

void copy_edge_arrays(const EdgeList& edges, std::vector<VertexId>& dst,
                      std::vector<std::byte>& payload) {
  dst.reserve(edges.size());
  payload.reserve(edges.size() * edges.payload_bytes());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    dst.push_back(edges.dst(i));
    auto p = edges.payload(i);
    payload.insert(payload.end(), p.begin(), p.end());
  }
}

}  // namespace

CsrChunk encode_csr(const EdgeChunk& chunk) {
  chunk.validate();
  CsrChunk out;
  out.src_range = chunk.src_range;
  out.payload_bytes = chunk.edges.payload_bytes();
  out.idx.assign(chunk.src_range.size() + 1, 0);
  for (std::size_t i = 0; i < chunk.edges.size(); ++i) {
    ++out.idx[chunk.edges.src(i) - chunk.src_range.lo + 1];
  }
  for (std::size_t s = 1; s < out.idx.size(); ++s) out.idx[s] += out.idx[s - 1];
  copy_edge_arrays(chunk.edges, out.dst, out.payload);
  return out;
}

DcsrChunk encode_dcsr(const EdgeChunk& chunk) {
  chunk.validate();
  DcsrChunk out;
  out.src_range = chunk.src_range;
  out.payload_bytes = chunk.edges.payload_bytes();
  for (std::size_t i = 0; i < chunk.edges.size(); ++i) {
    if (out.src.empty() || out.src.back() != chunk.edges.src(i)) {
      out.src.push_back(chunk.edges.src(i));
      out.idx.push_back(i);
    }
  }
  if (!out.src.empty()) out.idx.push_back(chunk.edges.size());
  copy_edge_arrays(chunk.edges, out.dst, out.payload);
  return out;
}

EdgeList decode(const CsrChunk& chunk) {
  EdgeList out(chunk.payload_bytes);
  for (std::uint64_t s = 0; s + 1 < chunk.idx.size(); ++s) {
    for (std::uint64_t k = chunk.idx[s]; k < chunk.idx[s + 1]; ++k) {
      out.push_back(chunk.src_range.lo + s, chunk.dst[k],
                    {chunk.payload.data() + k * chunk.payload_bytes, chunk.payload_bytes});
    }
  }
  return out;
}

EdgeList decode(const DcsrChunk& chunk) {
  EdgeList out(chunk.payload_bytes);
  for (std::size_t j = 0; j < chunk.src.size(); ++j) {
    for (std::uint64_t k = chunk.idx[j]; k < chunk.idx[j + 1]; ++k) {
      out.push_back(chunk.src[j], chunk.dst[k],
                    {chunk.payload.data() + k * chunk.payload_bytes, chunk.payload_bytes});
    }
  }
  return out;
}

bool should_build_csr(std::uint64_t v_src, std::uint64_t edges, double ratio) {
  if (edges == 0) return false;
  return static_cast<double>(v_src) / static_cast<double>(edges) <= ratio;
}

Representation choose_read_representation(std::uint64_t msg_count, std::uint64_t v_src,
                                          std::uint64_t dcsr_len, double gamma,
                                          bool csr_available) {
  if (!csr_available) return Representation::dcsr;
  double csr_cost = std::min(gamma * static_cast<double>(msg_count), static_cast<double>(v_src));
  double dcsr_cost = 2.0 * static_cast<double>(dcsr_len);
  return csr_cost <= dcsr_cost ? Representation::csr : Representation::dcsr;
}

EdgeList iterate_edges_for_sources(const CsrChunk& chunk, std::span<const VertexId> sources) {
  EdgeList out(chunk.payload_bytes);
  SpanSources cursor(sources);
  SpanArray<std::uint64_t> idx{chunk.idx};
  MemoryEdges edges{chunk.dst, chunk.payload, chunk.payload_bytes};
  csr_join(chunk.src_range, cursor, idx, edges,
           [&](VertexId s, VertexId d, const std::byte* p) {
             out.push_back(s, d, {p, chunk.payload_bytes});
           });
  return out;
}

EdgeList iterate_edges_for_sources(const DcsrChunk& chunk, std::span<const VertexId> sources) {
  EdgeList out(chunk.payload_bytes);
  SpanSources cursor(sources);
  SpanArray<VertexId> ids{chunk.src};
  SpanArray<std::uint64_t> idx{chunk.idx};
  MemoryEdges edges{chunk.dst, chunk.payload, chunk.payload_bytes};
  dcsr_join(chunk.src_range, chunk.src.size(), cursor, ids, idx, edges,
            [&](VertexId s, VertexId d, const std::byte* p) {
              out.push_back(s, d, {p, chunk.payload_bytes});
            });
  return out;
}

std::array<std::byte, kChunkHeaderBytes> encode_chunk_header(const ChunkHeader& h) {
  std::array<std::byte, kChunkHeaderBytes> out{};
  std::memcpy(out.data(), "DFOC", 4);
  le::put<std::uint32_t>(out.data() + 4, h.version);
  le::put<std::uint8_t>(out.data() + 8, static_cast<std::uint8_t>(h.form));
  le::put<std::uint64_t>(out.data() + 9, h.src_range.lo);
  le::put<std::uint64_t>(out.data() + 17, h.src_range.hi);
  le::put<std::uint64_t>(out.data() + 25, h.edge_count);
  le::put<std::uint32_t>(out.data() + 33, h.payload_bytes);
  return out;
}

ChunkHeader decode_chunk_header(std::span<const std::byte> bytes) {
  if (bytes.size() < kChunkHeaderBytes) throw FormatError("chunk header truncated");
  if (std::memcmp(bytes.data(), "DFOC", 4) != 0) throw FormatError("bad chunk magic");
  ChunkHeader h;
  h.version = le::get<std::uint32_t>(bytes.data() + 4);
  if (h.version != kChunkVersion) throw FormatError("unsupported chunk version");
  auto form = le::get<std::uint8_t>(bytes.data() + 8);
  if (form > 1) throw FormatError("bad chunk form");
  h.form = static_cast<Representation>(form);
  h.src_range.lo = le::get<std::uint64_t>(bytes.data() + 9);
  h.src_range.hi = le::get<std::uint64_t>(bytes.data() + 17);
  h.edge_count = le::get<std::uint64_t>(bytes.data() + 25);
  h.payload_bytes = le::get<std::uint32_t>(bytes.data() + 33);
  if (h.src_range.hi < h.src_range.lo) throw FormatError("bad chunk source range");
  return h;
}

namespace {

template <typename T>
void append_array(std::vector<std::byte>& out, const std::vector<T>& values) {
  auto at = out.size();
  out.resize(at + values.size() * sizeof(T));
  if (!values.empty()) std::memcpy(out.data() + at, values.data(), values.size() * sizeof(T));
}

}  // namespace

std::vector<std::byte> serialize_chunk(const CsrChunk& chunk) {
  ChunkHeader h{kChunkVersion, Representation::csr, chunk.src_range, chunk.edge_count(),
                chunk.payload_bytes};
  auto header = encode_chunk_header(h);
  std::vector<std::byte> out(header.begin(), header.end());
  append_array(out, chunk.idx);
  append_array(out, chunk.dst);
  append_array(out, chunk.payload);
  return out;
}

std::vector<std::byte> serialize_chunk(const DcsrChunk& chunk) {
  ChunkHeader h{kChunkVersion, Representation::dcsr, chunk.src_range, chunk.edge_count(),
                chunk.payload_bytes};
  auto header = encode_chunk_header(h);
  std::vector<std::byte> out(header.begin(), header.end());
  // An empty chunk still carries the closing sentinel offset.
  std::vector<std::uint64_t> idx = chunk.idx;
  if (idx.empty()) idx.push_back(0);
  append_array(out, idx);
  append_array(out, chunk.src);
  append_array(out, chunk.dst);
  append_array(out, chunk.payload);
  return out;
}

void write_chunk_file(const std::filesystem::path& path, const CsrChunk& chunk) {
  auto bytes = serialize_chunk(chunk);
  File(path, File::Mode::write_truncate).write_all(bytes);
}

void write_chunk_file(const std::filesystem::path& path, const DcsrChunk& chunk) {
  auto bytes = serialize_chunk(chunk);
  File(path, File::Mode::write_truncate).write_all(bytes);
}

namespace {

template <typename T>
std::vector<T> slice(const std::vector<std::byte>& bytes, std::uint64_t at, std::uint64_t count) {
  std::vector<T> out(count);
  if (count > 0) std::memcpy(out.data(), bytes.data() + at, count * sizeof(T));
  return out;
}

}  // namespace

std::variant<CsrChunk, DcsrChunk> read_chunk_file(const std::filesystem::path& path) {
  ChunkFile file(path);
  auto bytes = read_whole_file(path);
  const ChunkHeader& h = file.header();
  auto idx = slice<std::uint64_t>(bytes, file.offsets_base(), file.num_offsets());
  auto dst = slice<VertexId>(bytes, file.dst_base(), h.edge_count);
  auto payload = slice<std::byte>(bytes, file.payload_base(), h.edge_count * h.payload_bytes);
  if (h.form == Representation::csr) {
    return CsrChunk{h.src_range, h.payload_bytes, std::move(idx), std::move(dst),
                    std::move(payload)};
  }
  auto src = slice<VertexId>(bytes, file.src_base(), file.num_sources());
  if (src.empty()) idx.clear();
  return DcsrChunk{h.src_range, h.payload_bytes, std::move(src), std::move(idx), std::move(dst),
                   std::move(payload)};
}

ChunkFile::ChunkFile(const std::filesystem::path& path) : file_(path, File::Mode::read) {
  std::array<std::byte, kChunkHeaderBytes> raw{};
  file_.pread_exact(0, raw);
  header_ = decode_chunk_header(raw);
  std::uint64_t size = file_.size();
  std::uint64_t edge_bytes = header_.edge_count * (8 + header_.payload_bytes);
  if (header_.form == Representation::csr) {
    num_sources_ = header_.src_range.size();
    if (size != kChunkHeaderBytes + (num_sources_ + 1) * 8 + edge_bytes) {
      throw FormatError("CSR chunk '" + path.string() + "' has inconsistent size");
    }
  } else {
    std::uint64_t fixed = kChunkHeaderBytes + 8 + edge_bytes;
    if (size < fixed || (size - fixed) % 16 != 0) {
      throw FormatError("DCSR chunk '" + path.string() + "' has inconsistent size");
    }
    num_sources_ = (size - fixed) / 16;
  }
  dst_base_ = header_.form == Representation::csr ? kChunkHeaderBytes + (num_sources_ + 1) * 8
                                                  : kChunkHeaderBytes + (num_sources_ + 1) * 8 +
                                                        num_sources_ * 8;
}

FileEdges::FileEdges(const ChunkFile& chunk, MemoryGovernor* governor, std::size_t buffer_bytes,
                     std::uint64_t* counter)
    : dst_(chunk.file(), chunk.dst_base(), chunk.header().edge_count, governor, buffer_bytes,
           counter),
      payload_base_(chunk.payload_base()),
      payload_bytes_(chunk.header().payload_bytes) {
  if (payload_bytes_ > 0) {
    payload_.emplace(chunk.file(), payload_base_,
                     payload_base_ + chunk.header().edge_count * payload_bytes_, governor,
                     std::max<std::size_t>(buffer_bytes, payload_bytes_), counter);
  }
}

const std::byte* FileEdges::payload(std::uint64_t k) {
  if (payload_bytes_ == 0) return nullptr;
  payload_->seek(payload_base_ + k * payload_bytes_);
  return payload_->take(payload_bytes_);
}

}  // namespace dfog
