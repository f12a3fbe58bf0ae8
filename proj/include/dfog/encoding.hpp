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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dfog/io.hpp"
#include "dfog/types.hpp"

namespace dfog {

/// Edges in (src, dst) order, each carrying a fixed-width opaque payload.
class EdgeList {
 public:
  explicit EdgeList(std::uint32_t payload_bytes = 0) : payload_bytes_(payload_bytes) {}

  void push_back(VertexId src, VertexId dst, std::span<const std::byte> payload = {});
  std::size_t size() const { return src_.size(); }
  bool empty() const { return src_.empty(); }
  std::uint32_t payload_bytes() const { return payload_bytes_; }
  VertexId src(std::size_t i) const { return src_[i]; }
  VertexId dst(std::size_t i) const { return dst_[i]; }
  std::span<const std::byte> payload(std::size_t i) const {
    return {payload_.data() + i * payload_bytes_, payload_bytes_};
  }
  /// True when edges are in non-decreasing (src, dst) order.
  bool is_sorted() const;

  friend bool operator==(const EdgeList&, const EdgeList&) = default;

 private:
  std::uint32_t payload_bytes_;
  std::vector<VertexId> src_;
  std::vector<VertexId> dst_;
  std::vector<std::byte> payload_;
};

/// All edges sharing one (source partition, destination batch) pair.
struct EdgeChunk {
  std::uint32_t source_partition = 0;
  std::uint32_t dest_node = 0;
  std::uint64_t dest_batch = 0;
  VertexRange src_range;
  VertexRange dst_range;
  EdgeList edges;

  void validate() const;
};

struct CsrChunk {
  VertexRange src_range;
  std::uint32_t payload_bytes = 0;
  std::vector<std::uint64_t> idx;  // |V_src| + 1 offsets
  std::vector<VertexId> dst;
  std::vector<std::byte> payload;

  std::uint64_t edge_count() const { return dst.size(); }
};

struct DcsrChunk {
  VertexRange src_range;
  std::uint32_t payload_bytes = 0;
  std::vector<VertexId> src;       // sources with at least one edge
  std::vector<std::uint64_t> idx;  // src.size() + 1 offsets
  std::vector<VertexId> dst;
  std::vector<std::byte> payload;

  std::uint64_t edge_count() const { return dst.size(); }
};

CsrChunk encode_csr(const EdgeChunk& chunk);
DcsrChunk encode_dcsr(const EdgeChunk& chunk);
EdgeList decode(const CsrChunk& chunk);
EdgeList decode(const DcsrChunk& chunk);

/// CSR is built only for non-empty chunks with |V_src| / |E| <= ratio.
bool should_build_csr(std::uint64_t v_src, std::uint64_t edges, double ratio);

enum class Representation : std::uint8_t { csr = 0, dcsr = 1 };

/// Seek-cost model: DCSR costs 2 x (number of sources), CSR costs
/// min(gamma x |M|, |V_src|). Ties go to CSR.
Representation choose_read_representation(std::uint64_t msg_count, std::uint64_t v_src,
                                          std::uint64_t dcsr_len, double gamma,
                                          bool csr_available);

// ---------------------------------------------------------------------------
// Join algorithms. They are written against small access concepts so the same
// code walks in-memory chunks (tests, preprocessing) and on-disk chunks
// (runtime):
//   Sources: valid(), id(), advance()  -- ascending vertex stream
//   Array:   operator[](uint64_t)      -- offsets / source IDs
//   Edges:   dst(k), payload(k)        -- k-th (dst, payload) record

namespace detail {

inline void check_source(VertexId s, VertexId prev, bool first, VertexRange range) {
  if (!first && s < prev) throw PreconditionError("source stream is not ascending");
  if (!range.contains(s)) {
    throw PreconditionError("source " + std::to_string(s) + " outside chunk source range");
  }
}

}  // namespace detail

/// Direct seek by source through the offset array.
template <class Sources, class Idx, class Edges, class Emit>
void csr_join(VertexRange src_range, Sources& sources, Idx& idx, Edges& edges, Emit&& emit) {
  VertexId prev = 0;
  bool first = true;
  for (; sources.valid(); sources.advance()) {
    VertexId s = sources.id();
    detail::check_source(s, prev, first, src_range);
    prev = s;
    first = false;
    std::uint64_t begin = idx[s - src_range.lo];
    std::uint64_t end = idx[s - src_range.lo + 1];
    for (std::uint64_t k = begin; k < end; ++k) emit(s, edges.dst(k), edges.payload(k));
  }
}

/// Sequential merge of the source stream with the (src, idx) pairs.
template <class Sources, class SrcIds, class Idx, class Edges, class Emit>
void dcsr_join(VertexRange src_range, std::uint64_t num_sources, Sources& sources, SrcIds& src_ids,
               Idx& idx, Edges& edges, Emit&& emit) {
  VertexId prev = 0;
  bool first = true;
  std::uint64_t j = 0;
  VertexId current = num_sources > 0 ? src_ids[0] : 0;
  for (; sources.valid(); sources.advance()) {
    VertexId s = sources.id();
    detail::check_source(s, prev, first, src_range);
    prev = s;
    first = false;
    while (j < num_sources && current < s) {
      if (++j < num_sources) current = src_ids[j];
    }
    if (j < num_sources && current == s) {
      std::uint64_t begin = idx[j];
      std::uint64_t end = idx[j + 1];
      for (std::uint64_t k = begin; k < end; ++k) emit(s, edges.dst(k), edges.payload(k));
    }
  }
}

/// Ascending cursor over an in-memory list of vertex IDs.
class SpanSources {
 public:
  explicit SpanSources(std::span<const VertexId> ids) : ids_(ids) {}
  bool valid() const { return pos_ < ids_.size(); }
  VertexId id() const { return ids_[pos_]; }
  void advance() { ++pos_; }

 private:
  std::span<const VertexId> ids_;
  std::size_t pos_ = 0;
};

template <typename T>
struct SpanArray {
  std::span<const T> values;
  T operator[](std::uint64_t i) const { return values[i]; }
};

struct MemoryEdges {
  std::span<const VertexId> dsts;
  std::span<const std::byte> payloads;
  std::uint32_t payload_bytes;
  VertexId dst(std::uint64_t k) const { return dsts[k]; }
  const std::byte* payload(std::uint64_t k) const {
    return payload_bytes == 0 ? nullptr : payloads.data() + k * payload_bytes;
  }
};

/// Edges of `chunk` whose source appears in the ascending `sources`.
EdgeList iterate_edges_for_sources(const CsrChunk& chunk, std::span<const VertexId> sources);
EdgeList iterate_edges_for_sources(const DcsrChunk& chunk, std::span<const VertexId> sources);

// ---------------------------------------------------------------------------
// On-disk chunk files.
//
// Layout (little-endian, packed):
//   "DFOC" | version u32 | form u8 | src_lo u64 | src_hi u64 | edge_count u64 |
//   payload_bytes u32 | offsets u64[] | (DCSR) source IDs u64[] | dst u64[] |
//   payload bytes[]
// CSR stores |V_src| + 1 offsets; DCSR stores n + 1 offsets and n source IDs,
// where n is recovered from the file size.

inline constexpr std::uint32_t kChunkVersion = 1;
inline constexpr std::size_t kChunkHeaderBytes = 37;

struct ChunkHeader {
  std::uint32_t version = kChunkVersion;
  Representation form = Representation::dcsr;
  VertexRange src_range;
  std::uint64_t edge_count = 0;
  std::uint32_t payload_bytes = 0;
};

std::array<std::byte, kChunkHeaderBytes> encode_chunk_header(const ChunkHeader& header);
ChunkHeader decode_chunk_header(std::span<const std::byte> bytes);

std::vector<std::byte> serialize_chunk(const CsrChunk& chunk);
std::vector<std::byte> serialize_chunk(const DcsrChunk& chunk);
void write_chunk_file(const std::filesystem::path& path, const CsrChunk& chunk);
void write_chunk_file(const std::filesystem::path& path, const DcsrChunk& chunk);
std::variant<CsrChunk, DcsrChunk> read_chunk_file(const std::filesystem::path& path);

/// An opened chunk file with its section offsets resolved.
class ChunkFile {
 public:
  explicit ChunkFile(const std::filesystem::path& path);

  const ChunkHeader& header() const { return header_; }
  const File& file() const { return file_; }
  /// DCSR: number of (src, idx) pairs. CSR: |V_src|.
  std::uint64_t num_sources() const { return num_sources_; }
  std::uint64_t offsets_base() const { return kChunkHeaderBytes; }
  std::uint64_t num_offsets() const { return num_sources_ + 1; }
  std::uint64_t src_base() const { return kChunkHeaderBytes + num_offsets() * 8; }
  std::uint64_t dst_base() const { return dst_base_; }
  std::uint64_t payload_base() const { return dst_base_ + header_.edge_count * 8; }

 private:
  File file_;
  ChunkHeader header_;
  std::uint64_t num_sources_ = 0;
  std::uint64_t dst_base_ = 0;
};

/// (dst, payload) access to a chunk file through bounded windows.
class FileEdges {
 public:
  FileEdges(const ChunkFile& chunk, MemoryGovernor* governor, std::size_t buffer_bytes,
            std::uint64_t* counter);
  VertexId dst(std::uint64_t k) { return dst_[k]; }
  const std::byte* payload(std::uint64_t k);

 private:
  ArrayReader<VertexId> dst_;
  std::optional<FileReader> payload_;
  std::uint64_t payload_base_;
  std::uint32_t payload_bytes_;
};

/// Streams the join of an ascending source cursor with an on-disk chunk,
/// reading through `representation`. Emits (src, dst, payload pointer).
template <class Sources, class Emit>
void join_chunk_file(const ChunkFile& chunk, Representation representation, Sources& sources,
                     MemoryGovernor* governor, std::size_t buffer_bytes, std::uint64_t* counter,
                     Emit&& emit) {
  if (chunk.header().form != representation) {
    throw StateError("chunk file form does not match requested representation");
  }
  FileEdges edges(chunk, governor, buffer_bytes, counter);
  ArrayReader<std::uint64_t> idx(chunk.file(), chunk.offsets_base(), chunk.num_offsets(), governor,
                                 buffer_bytes, counter);
  if (representation == Representation::csr) {
    csr_join(chunk.header().src_range, sources, idx, edges, emit);
  } else {
    ArrayReader<VertexId> src_ids(chunk.file(), chunk.src_base(), chunk.num_sources(), governor,
                                  buffer_bytes, counter);
    dcsr_join(chunk.header().src_range, chunk.num_sources(), sources, src_ids, idx, edges, emit);
  }
}

}  // namespace dfog
