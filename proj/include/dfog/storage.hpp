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

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dfog/io.hpp"
#include "dfog/layout.hpp"

namespace dfog {

/// Value of a global reduction: exact 64-bit integer or 64-bit float.
struct Reduction {
  enum class Type : std::uint8_t { integer = 0, real = 1 };
  Type type = Type::integer;
  std::int64_t integer = 0;
  double real = 0.0;

  static Reduction of(std::int64_t v) { return {Type::integer, v, 0.0}; }
  static Reduction of(double v) { return {Type::real, 0, v}; }
  /// Raw 8 bytes for the wire / journal.
  std::uint64_t bits() const;
  static Reduction from_bits(Type type, std::uint64_t bits);
  Reduction& operator+=(const Reduction& other);
  friend bool operator==(const Reduction& a, const Reduction& b) {
    return a.type == b.type && a.bits() == b.bits();
  }
};

struct StorageOptions {
  std::filesystem::path dir;
  bool checkpointing = true;
  std::uint32_t keep = 2;  // checkpoints retained after GC
  bool fsync = true;
};

inline constexpr std::uint64_t kBlockAlign = 4096;

/// Shape of one vertex array: `element_bytes` per vertex, or one bit per
/// vertex (bitmap) with blocks of ceil(batch / 8) bytes.
struct ArrayShape {
  std::uint32_t element_bytes = 0;
  bool bitmap = false;

  std::uint64_t block_bytes(std::uint64_t vertices) const {
    return bitmap ? (vertices + 7) / 8 : vertices * element_bytes;
  }
  friend bool operator==(const ArrayShape&, const ArrayShape&) = default;
};

/// All vertex arrays of one node: batch blocks in a single block file,
/// copy-on-write versions per Process call, and the lineage that maps each
/// retained checkpoint to its blocks.
///
/// Thread safety: distinct batches may be read and written concurrently;
/// the call lifecycle methods (begin/prepare/finish/abort) are not
/// concurrent with anything.
class VertexStore {
 public:
  /// Opens or creates the store. With `recover_to`, lineage newer than that
  /// checkpoint is discarded together with any uncommitted blocks; without
  /// it, existing state is wiped.
  VertexStore(StorageOptions options, VertexRange partition, BatchLayout batching,
              std::optional<std::uint64_t> recover_to = std::nullopt);
  VertexStore(const VertexStore&) = delete;
  VertexStore& operator=(const VertexStore&) = delete;

  const StorageOptions& options() const { return options_; }
  VertexRange partition() const { return partition_; }
  const BatchLayout& batching() const { return batching_; }
  std::uint64_t num_batches() const { return num_batches_; }
  VertexRange batch_range(std::uint64_t b) const { return batching_.batch(partition_, b); }

  bool has_array(const std::string& name) const;
  ArrayShape shape(const std::string& name) const;
  std::vector<std::string> array_names() const;

  /// Starts Process call `ordinal`; ordinals must increase.
  void begin_call(std::uint64_t ordinal);
  bool in_call() const { return call_.has_value(); }
  std::uint64_t current_call() const;

  /// Declares a new array inside the open call. All of its batches must be
  /// written before the call commits.
  void create_array(const std::string& name, ArrayShape shape);

  void read_batch(const std::string& name, std::uint64_t batch, std::span<std::byte> out,
                  std::uint64_t* bytes_read = nullptr) const;
  /// Copy-on-write: the first write of a batch in a call gets a fresh block;
  /// later writes in the same call overwrite that block.
  void write_batch(const std::string& name, std::uint64_t batch, std::span<const std::byte> data,
                   std::uint64_t* bytes_written = nullptr);

  /// Durably writes the call's blocks and the lineage extended with it.
  void prepare_commit();
  /// Releases checkpoints beyond the newest `keep` (after the call is journaled).
  void finish_commit();
  /// Drops every uncommitted block of the open call.
  void abort_call();

  /// Names of arrays written (or created) by the open call.
  std::vector<std::string> touched_arrays() const;

  std::optional<std::uint64_t> last_checkpoint() const;
  std::vector<std::uint64_t> checkpoints() const;
  /// Block backing (array, batch) at checkpoint `at` (latest when absent).
  std::uint64_t block_id(const std::string& name, std::uint64_t batch,
                         std::optional<std::uint64_t> at = std::nullopt) const;
  /// Retained checkpoints whose state references the block.
  std::uint32_t refcount(std::uint64_t block_id) const;
  std::uint64_t live_blocks() const;
  std::uint64_t block_file_bytes() const;
  std::uint64_t free_bytes() const;
  /// True when the array was changed at exactly checkpoint `ordinal`.
  bool has_version_at(const std::string& name, std::uint64_t ordinal) const;

  std::filesystem::path block_path() const { return options_.dir / "blocks.dat"; }
  std::filesystem::path lineage_path() const { return options_.dir / "lineage.bin"; }

 private:
  struct Block {
    std::uint64_t offset = 0;
    std::uint64_t length = 0;
    std::uint32_t crc = 0;
  };
  struct Version {
    std::uint64_t ordinal = 0;
    std::vector<std::uint64_t> blocks;  // per batch
  };
  struct Array {
    ArrayShape shape;
    std::vector<Version> versions;                    // ascending ordinal
    std::map<std::uint64_t, std::uint64_t> pending;   // batch -> uncommitted block
    bool created_in_call = false;
  };

  const Array& array(const std::string& name) const;
  Array& array(const std::string& name);
  std::uint64_t allocate(std::uint64_t length);
  void release(std::uint64_t id);
  void rebuild_free_space();
  std::uint64_t committed_block(const Array& a, std::uint64_t batch,
                                std::optional<std::uint64_t> at) const;
  void write_lineage() const;
  void load_lineage(std::uint64_t recover_to);
  std::uint64_t batch_vertices(std::uint64_t b) const { return batch_range(b).size(); }

  StorageOptions options_;
  VertexRange partition_;
  BatchLayout batching_;
  std::uint64_t num_batches_ = 0;
  File blocks_file_;

  mutable std::mutex mutex_;
  std::map<std::string, Array> arrays_;
  std::map<std::uint64_t, Block> blocks_;
  std::map<std::uint64_t, std::uint64_t> free_;  // offset -> length
  std::uint64_t file_end_ = 0;
  std::uint64_t next_block_ = 1;
  std::vector<std::uint64_t> checkpoints_;
  std::optional<std::uint64_t> call_;
};

enum class CallKind : std::uint8_t { create = 0, vertices = 1, edges = 2 };

struct JournalRecord {
  std::uint64_t ordinal = 0;
  CallKind kind = CallKind::vertices;
  std::vector<std::string> arrays;  // arrays touched on any node
  Reduction value;
  friend bool operator==(const JournalRecord&, const JournalRecord&) = default;
};

/// Append-only log of completed calls, kept by node 0. Each record is
/// length-prefixed and checksummed; a torn tail is ignored on load.
class Journal {
 public:
  Journal(const std::filesystem::path& path, bool fsync, bool truncate);
  void append(const JournalRecord& record);
  const std::vector<JournalRecord>& records() const { return records_; }
  std::optional<std::uint64_t> last_ordinal() const;
  const JournalRecord* find(std::uint64_t ordinal) const;

  static std::vector<std::byte> encode(const JournalRecord& record);
  /// Parses records from a byte stream, stopping at the first torn record.
  static std::vector<JournalRecord> decode_all(std::span<const std::byte> bytes);

 private:
  std::filesystem::path path_;
  bool fsync_;
  File file_;
  std::vector<JournalRecord> records_;
};

}  // namespace dfog
