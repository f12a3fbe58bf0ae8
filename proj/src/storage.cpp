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

#include "dfog/storage.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <set>

namespace dfog {

namespace fs = std::filesystem;

std::uint64_t Reduction::bits() const {
  return type == Type::integer ? static_cast<std::uint64_t>(integer)
                               : std::bit_cast<std::uint64_t>(real);
}

Reduction Reduction::from_bits(Type type, std::uint64_t bits) {
  if (type == Type::integer) return of(static_cast<std::int64_t>(bits));
  return of(std::bit_cast<double>(bits));
}

Reduction& Reduction::operator+=(const Reduction& other) {
  if (other.type != type) throw PreconditionError("cannot add reductions of different types");
  if (type == Type::integer) {
    integer = static_cast<std::int64_t>(static_cast<std::uint64_t>(integer) +
                                        static_cast<std::uint64_t>(other.integer));
  } else {
    real += other.real;
  }
  return *this;
}

namespace {

constexpr std::uint32_t kLineageVersion = 1;
enum : std::uint8_t { kHeaderRec = 1, kArrayRec = 2, kBlockRec = 3 };

std::uint64_t round_up(std::uint64_t n) { return (n + kBlockAlign - 1) / kBlockAlign * kBlockAlign; }

void append_record(std::vector<std::byte>& out, const std::vector<std::byte>& body) {
  le::append<std::uint32_t>(out, static_cast<std::uint32_t>(body.size()));
  le::append<std::uint32_t>(out, crc32(body));
  le::append_bytes(out, body);
}

void append_string(std::vector<std::byte>& out, const std::string& s) {
  le::append<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  le::append_bytes(out, {reinterpret_cast<const std::byte*>(s.data()), s.size()});
}

// Bounds-checked cursor over a record body.
class Cursor {
 public:
  explicit Cursor(std::span<const std::byte> bytes) : bytes_(bytes) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v = le::get<T>(bytes_.data() + pos_);
    pos_ += sizeof(T);
    return v;
  }
  std::string string() {
    auto n = get<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("record truncated");
  }
  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

// Splits a stream of length-prefixed, checksummed records. Returns the bodies
// of intact records and stops at the first torn or corrupt one.
std::vector<std::span<const std::byte>> split_records(std::span<const std::byte> bytes,
                                                      bool* clean) {
  std::vector<std::span<const std::byte>> out;
  std::size_t pos = 0;
  *clean = true;
  while (pos < bytes.size()) {
    if (pos + 8 > bytes.size()) {
      *clean = false;
      break;
    }
    auto len = le::get<std::uint32_t>(bytes.data() + pos);
    auto crc = le::get<std::uint32_t>(bytes.data() + pos + 4);
    if (pos + 8 + len > bytes.size()) {
      *clean = false;
      break;
    }
    auto body = bytes.subspan(pos + 8, len);
    if (crc32(body) != crc) {
      *clean = false;
      break;
    }
    out.push_back(body);
    pos += 8 + len;
  }
  return out;
}

}  // namespace

VertexStore::VertexStore(StorageOptions options, VertexRange partition, BatchLayout batching,
                         std::optional<std::uint64_t> recover_to)
    : options_(std::move(options)),
      partition_(partition),
      batching_(batching),
      num_batches_(batching.num_batches(partition)) {
  if (options_.keep < 1) throw ConfigError("checkpoints_keep must be >= 1");
  fs::create_directories(options_.dir);
  if (recover_to) {
    if (!options_.checkpointing) throw ConfigError("recovery requires checkpointing");
    if (!fs::exists(lineage_path())) {
      throw RecoveryError("no lineage in '" + options_.dir.string() + "'");
    }
    blocks_file_ = File(block_path(), File::Mode::read_write_create);
    load_lineage(*recover_to);
  } else {
    fs::remove(lineage_path());
    blocks_file_ = File(block_path(), File::Mode::read_write_create);
    blocks_file_.truncate(0);
  }
}

const VertexStore::Array& VertexStore::array(const std::string& name) const {
  auto it = arrays_.find(name);
  if (it == arrays_.end()) throw PreconditionError("unknown vertex array '" + name + "'");
  return it->second;
}

VertexStore::Array& VertexStore::array(const std::string& name) {
  auto it = arrays_.find(name);
  if (it == arrays_.end()) throw PreconditionError("unknown vertex array '" + name + "'");
  return it->second;
}

bool VertexStore::has_array(const std::string& name) const {
  std::lock_guard lock(mutex_);
  return arrays_.count(name) > 0;
}

ArrayShape VertexStore::shape(const std::string& name) const {
  std::lock_guard lock(mutex_);
  return array(name).shape;
}

std::vector<std::string> VertexStore::array_names() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [name, a] : arrays_) out.push_back(name);
  return out;
}

void VertexStore::begin_call(std::uint64_t ordinal) {
  std::lock_guard lock(mutex_);
  if (call_) throw StateError("a Process call is already open");
  if (!checkpoints_.empty() && ordinal <= checkpoints_.back()) {
    throw StateError("call ordinal " + std::to_string(ordinal) + " is not newer than checkpoint " +
                     std::to_string(checkpoints_.back()));
  }
  call_ = ordinal;
}

std::uint64_t VertexStore::current_call() const {
  std::lock_guard lock(mutex_);
  if (!call_) throw StateError("no Process call is open");
  return *call_;
}

void VertexStore::create_array(const std::string& name, ArrayShape shape) {
  std::lock_guard lock(mutex_);
  if (!call_) throw StateError("create_array outside a Process call");
  if (!shape.bitmap && shape.element_bytes < 1) throw PreconditionError("element_bytes must be >= 1");
  if (arrays_.count(name)) throw PreconditionError("vertex array '" + name + "' already exists");
  Array a;
  a.shape = shape;
  a.created_in_call = true;
  if (!options_.checkpointing) {
    Version v{*call_, {}};
    for (std::uint64_t b = 0; b < num_batches_; ++b) {
      v.blocks.push_back(allocate(shape.block_bytes(batch_vertices(b))));
    }
    a.versions.push_back(std::move(v));
  }
  arrays_.emplace(name, std::move(a));
}

std::uint64_t VertexStore::committed_block(const Array& a, std::uint64_t batch,
                                           std::optional<std::uint64_t> at) const {
  const Version* found = nullptr;
  for (const auto& v : a.versions) {
    if (at && v.ordinal > *at) break;
    found = &v;
  }
  if (found == nullptr) throw StateError("array has no committed state at that checkpoint");
  return found->blocks.at(batch);
}

void VertexStore::read_batch(const std::string& name, std::uint64_t batch,
                             std::span<std::byte> out, std::uint64_t* bytes_read) const {
  Block blk;
  {
    std::lock_guard lock(mutex_);
    if (batch >= num_batches_) throw RangeError("batch index out of range");
    const Array& a = array(name);
    std::uint64_t expect = a.shape.block_bytes(batch_vertices(batch));
    if (out.size() != expect) throw PreconditionError("read buffer size does not match batch");
    auto p = a.pending.find(batch);
    std::uint64_t id;
    if (p != a.pending.end()) {
      id = p->second;
    } else if (!a.versions.empty()) {
      id = committed_block(a, batch, std::nullopt);
    } else {
      throw StateError("batch " + std::to_string(batch) + " of '" + name + "' was never written");
    }
    blk = blocks_.at(id);
  }
  blocks_file_.pread_exact(blk.offset, out);
  if (bytes_read != nullptr) *bytes_read += out.size();
  if (crc32(out) != blk.crc) {
    throw InvariantViolation("checksum mismatch in block of '" + name + "' batch " +
                             std::to_string(batch));
  }
}

void VertexStore::write_batch(const std::string& name, std::uint64_t batch,
                              std::span<const std::byte> data, std::uint64_t* bytes_written) {
  std::uint64_t offset;
  std::uint64_t id;
  {
    std::lock_guard lock(mutex_);
    if (!call_) throw StateError("write to '" + name + "' outside a Process call");
    if (batch >= num_batches_) throw RangeError("batch index out of range");
    Array& a = array(name);
    if (data.size() != a.shape.block_bytes(batch_vertices(batch))) {
      throw PreconditionError("batch contents of '" + name + "' have the wrong length");
    }
    if (!options_.checkpointing) {
      id = a.versions.front().blocks.at(batch);
      a.pending[batch] = id;
    } else {
      auto p = a.pending.find(batch);
      if (p != a.pending.end()) {
        id = p->second;
      } else {
        id = allocate(data.size());
        a.pending.emplace(batch, id);
      }
    }
    offset = blocks_.at(id).offset;
  }
  blocks_file_.pwrite_all(offset, data);
  if (bytes_written != nullptr) *bytes_written += data.size();
  std::uint32_t crc = crc32(data);
  std::lock_guard lock(mutex_);
  blocks_.at(id).crc = crc;
}

std::vector<std::string> VertexStore::touched_arrays() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [name, a] : arrays_) {
    if (!a.pending.empty() || a.created_in_call) out.push_back(name);
  }
  return out;
}

void VertexStore::prepare_commit() {
  std::lock_guard lock(mutex_);
  if (!call_) throw StateError("no Process call to commit");
  if (!options_.checkpointing) {
    for (auto& [name, a] : arrays_) {
      a.pending.clear();
      a.created_in_call = false;
    }
    call_.reset();
    return;
  }
  for (auto& [name, a] : arrays_) {
    if (a.pending.empty() && !a.created_in_call) continue;
    Version v;
    v.ordinal = *call_;
    if (a.versions.empty()) {
      if (a.pending.size() != num_batches_) {
        throw StateError("new array '" + name + "' has unwritten batches at commit");
      }
      v.blocks.resize(num_batches_);
    } else {
      v.blocks = a.versions.back().blocks;
    }
    for (auto [b, id] : a.pending) v.blocks[b] = id;
    a.versions.push_back(std::move(v));
    a.pending.clear();
    a.created_in_call = false;
  }
  checkpoints_.push_back(*call_);
  call_.reset();
  if (options_.fsync) blocks_file_.sync();
  write_lineage();
}

void VertexStore::finish_commit() {
  std::lock_guard lock(mutex_);
  if (!options_.checkpointing) return;
  if (checkpoints_.size() <= options_.keep) return;
  std::vector<std::uint64_t> retained(checkpoints_.end() - options_.keep, checkpoints_.end());
  std::set<std::uint64_t> referenced;
  std::set<std::uint64_t> dropped;
  for (auto& [name, a] : arrays_) {
    std::vector<bool> keep(a.versions.size(), false);
    for (std::uint64_t c : retained) {
      std::optional<std::size_t> idx;
      for (std::size_t i = 0; i < a.versions.size() && a.versions[i].ordinal <= c; ++i) idx = i;
      if (idx) keep[*idx] = true;
    }
    std::vector<Version> kept;
    for (std::size_t i = 0; i < a.versions.size(); ++i) {
      auto& ids = a.versions[i].blocks;
      if (keep[i]) {
        referenced.insert(ids.begin(), ids.end());
        kept.push_back(std::move(a.versions[i]));
      } else {
        dropped.insert(ids.begin(), ids.end());
      }
    }
    a.versions = std::move(kept);
  }
  checkpoints_ = retained;
  // Lineage first, so no on-disk state ever refers to a reused extent.
  write_lineage();
  for (std::uint64_t id : dropped) {
    if (!referenced.count(id)) release(id);
  }
}

void VertexStore::abort_call() {
  std::lock_guard lock(mutex_);
  if (!call_) return;
  for (auto it = arrays_.begin(); it != arrays_.end();) {
    Array& a = it->second;
    if (options_.checkpointing) {
      for (auto [b, id] : a.pending) release(id);
    }
    a.pending.clear();
    if (a.created_in_call && options_.checkpointing) {
      it = arrays_.erase(it);
      continue;
    }
    a.created_in_call = false;
    ++it;
  }
  call_.reset();
}

std::uint64_t VertexStore::allocate(std::uint64_t length) {
  std::uint64_t need = std::max<std::uint64_t>(round_up(length), kBlockAlign);
  std::uint64_t offset = 0;
  bool found = false;
  for (auto it = free_.begin(); it != free_.end(); ++it) {
    if (it->second >= need) {
      offset = it->first;
      std::uint64_t rest = it->second - need;
      free_.erase(it);
      if (rest > 0) free_.emplace(offset + need, rest);
      found = true;
      break;
    }
  }
  if (!found) {
    offset = file_end_;
    file_end_ += need;
  }
  std::uint64_t id = next_block_++;
  blocks_.emplace(id, Block{offset, length, 0});
  return id;
}

void VertexStore::release(std::uint64_t id) {
  auto it = blocks_.find(id);
  if (it == blocks_.end()) return;
  std::uint64_t offset = it->second.offset;
  std::uint64_t length = std::max<std::uint64_t>(round_up(it->second.length), kBlockAlign);
  blocks_.erase(it);
  auto next = free_.lower_bound(offset);
  if (next != free_.end() && offset + length == next->first) {
    length += next->second;
    next = free_.erase(next);
  }
  if (next != free_.begin()) {
    auto prev = std::prev(next);
    if (prev->first + prev->second == offset) {
      offset = prev->first;
      length += prev->second;
      free_.erase(prev);
    }
  }
  free_.emplace(offset, length);
}

void VertexStore::rebuild_free_space() {
  free_.clear();
  std::vector<std::pair<std::uint64_t, std::uint64_t>> used;
  for (const auto& [id, b] : blocks_) {
    used.emplace_back(b.offset, std::max<std::uint64_t>(round_up(b.length), kBlockAlign));
  }
  std::sort(used.begin(), used.end());
  std::uint64_t at = 0;
  for (auto [off, len] : used) {
    if (off > at) free_.emplace(at, off - at);
    at = std::max(at, off + len);
  }
  file_end_ = at;
}

std::optional<std::uint64_t> VertexStore::last_checkpoint() const {
  std::lock_guard lock(mutex_);
  if (checkpoints_.empty()) return std::nullopt;
  return checkpoints_.back();
}

std::vector<std::uint64_t> VertexStore::checkpoints() const {
  std::lock_guard lock(mutex_);
  return checkpoints_;
}

std::uint64_t VertexStore::block_id(const std::string& name, std::uint64_t batch,
                                    std::optional<std::uint64_t> at) const {
  std::lock_guard lock(mutex_);
  return committed_block(array(name), batch, at);
}

std::uint32_t VertexStore::refcount(std::uint64_t id) const {
  std::lock_guard lock(mutex_);
  std::uint32_t count = 0;
  for (std::uint64_t c : checkpoints_) {
    bool hit = false;
    for (const auto& [name, a] : arrays_) {
      const Version* state = nullptr;
      for (const auto& v : a.versions) {
        if (v.ordinal > c) break;
        state = &v;
      }
      if (state && std::find(state->blocks.begin(), state->blocks.end(), id) != state->blocks.end()) {
        hit = true;
        break;
      }
    }
    if (hit) ++count;
  }
  return count;
}

std::uint64_t VertexStore::live_blocks() const {
  std::lock_guard lock(mutex_);
  return blocks_.size();
}

std::uint64_t VertexStore::block_file_bytes() const {
  std::lock_guard lock(mutex_);
  return file_end_;
}

std::uint64_t VertexStore::free_bytes() const {
  std::lock_guard lock(mutex_);
  std::uint64_t n = 0;
  for (const auto& [off, len] : free_) n += len;
  return n;
}

bool VertexStore::has_version_at(const std::string& name, std::uint64_t ordinal) const {
  std::lock_guard lock(mutex_);
  for (const auto& v : array(name).versions) {
    if (v.ordinal == ordinal) return true;
  }
  return false;
}

// Lineage file: "DFLN" | version u32 | records, each u32 length | u32 crc32 |
// body. Bodies: header {1, next_block, checkpoints}, one per array
// {2, name, element_bytes, bitmap, versions}, one per block {3, id, offset,
// length, crc}.
void VertexStore::write_lineage() const {
  std::vector<std::byte> out;
  for (char c : std::string("DFLN")) out.push_back(static_cast<std::byte>(c));
  le::append<std::uint32_t>(out, kLineageVersion);
  {
    std::vector<std::byte> body;
    le::append<std::uint8_t>(body, kHeaderRec);
    le::append<std::uint64_t>(body, next_block_);
    le::append<std::uint64_t>(body, checkpoints_.size());
    for (auto c : checkpoints_) le::append<std::uint64_t>(body, c);
    append_record(out, body);
  }
  std::set<std::uint64_t> live;
  for (const auto& [name, a] : arrays_) {
    if (a.versions.empty()) continue;
    std::vector<std::byte> body;
    le::append<std::uint8_t>(body, kArrayRec);
    append_string(body, name);
    le::append<std::uint32_t>(body, a.shape.element_bytes);
    le::append<std::uint8_t>(body, a.shape.bitmap ? 1 : 0);
    le::append<std::uint64_t>(body, a.versions.size());
    for (const auto& v : a.versions) {
      le::append<std::uint64_t>(body, v.ordinal);
      le::append<std::uint64_t>(body, v.blocks.size());
      for (auto id : v.blocks) {
        le::append<std::uint64_t>(body, id);
        live.insert(id);
      }
    }
    append_record(out, body);
  }
  for (auto id : live) {
    const Block& b = blocks_.at(id);
    std::vector<std::byte> body;
    le::append<std::uint8_t>(body, kBlockRec);
    le::append<std::uint64_t>(body, id);
    le::append<std::uint64_t>(body, b.offset);
    le::append<std::uint64_t>(body, b.length);
    le::append<std::uint32_t>(body, b.crc);
    append_record(out, body);
  }
  write_file_atomic(lineage_path(), out, options_.fsync);
}

void VertexStore::load_lineage(std::uint64_t recover_to) {
  auto bytes = read_whole_file(lineage_path());
  if (bytes.size() < 8 || std::memcmp(bytes.data(), "DFLN", 4) != 0 ||
      le::get<std::uint32_t>(bytes.data() + 4) != kLineageVersion) {
    throw RecoveryError("lineage file is not recognized");
  }
  bool clean = true;
  auto records = split_records(std::span(bytes).subspan(8), &clean);
  if (!clean) throw RecoveryError("lineage file is corrupt");
  std::map<std::uint64_t, Block> blocks;
  for (auto body : records) {
    Cursor c(body);
    auto type = c.get<std::uint8_t>();
    if (type == kHeaderRec) {
      next_block_ = c.get<std::uint64_t>();
      auto n = c.get<std::uint64_t>();
      for (std::uint64_t i = 0; i < n; ++i) checkpoints_.push_back(c.get<std::uint64_t>());
    } else if (type == kArrayRec) {
      std::string name = c.string();
      Array a;
      a.shape.element_bytes = c.get<std::uint32_t>();
      a.shape.bitmap = c.get<std::uint8_t>() != 0;
      auto nv = c.get<std::uint64_t>();
      for (std::uint64_t i = 0; i < nv; ++i) {
        Version v;
        v.ordinal = c.get<std::uint64_t>();
        auto nb = c.get<std::uint64_t>();
        if (nb != num_batches_) {
          throw RecoveryError("lineage of array '" + name + "' does not match the batch layout");
        }
        for (std::uint64_t k = 0; k < nb; ++k) v.blocks.push_back(c.get<std::uint64_t>());
        a.versions.push_back(std::move(v));
      }
      arrays_.emplace(name, std::move(a));
    } else if (type == kBlockRec) {
      auto id = c.get<std::uint64_t>();
      Block b;
      b.offset = c.get<std::uint64_t>();
      b.length = c.get<std::uint64_t>();
      b.crc = c.get<std::uint32_t>();
      blocks.emplace(id, b);
    } else {
      throw RecoveryError("unknown lineage record type");
    }
  }

  // Forget everything newer than the recovery point.
  std::erase_if(checkpoints_, [&](std::uint64_t c) { return c > recover_to; });
  if (checkpoints_.empty() || checkpoints_.back() != recover_to) {
    throw RecoveryError("lineage has no checkpoint " + std::to_string(recover_to));
  }
  for (auto it = arrays_.begin(); it != arrays_.end();) {
    std::erase_if(it->second.versions, [&](const Version& v) { return v.ordinal > recover_to; });
    if (it->second.versions.empty()) {
      it = arrays_.erase(it);
    } else {
      ++it;
    }
  }
  for (const auto& [name, a] : arrays_) {
    for (const auto& v : a.versions) {
      for (auto id : v.blocks) {
        auto b = blocks.find(id);
        if (b == blocks.end()) {
          throw RecoveryError("lineage of array '" + name + "' references a missing block");
        }
        blocks_.emplace(id, b->second);
      }
    }
  }
  rebuild_free_space();
  write_lineage();
}

Journal::Journal(const fs::path& path, bool fsync, bool truncate) : path_(path), fsync_(fsync) {
  fs::create_directories(path.parent_path());
  if (truncate) {
    file_ = File(path, File::Mode::write_truncate);
    file_.close();
  } else if (fs::exists(path)) {
    auto bytes = read_whole_file(path);
    records_ = decode_all(bytes);
    // Drop a torn tail so later appends start at a record boundary.
    std::uint64_t good = 0;
    for (const auto& r : records_) good += encode(r).size();
    File(path, File::Mode::read_write_create).truncate(good);
  }
  file_ = File(path, File::Mode::append_create);
}

std::vector<std::byte> Journal::encode(const JournalRecord& r) {
  std::vector<std::byte> body;
  le::append<std::uint64_t>(body, r.ordinal);
  le::append<std::uint8_t>(body, static_cast<std::uint8_t>(r.kind));
  le::append<std::uint8_t>(body, static_cast<std::uint8_t>(r.value.type));
  le::append<std::uint64_t>(body, r.value.bits());
  le::append<std::uint32_t>(body, static_cast<std::uint32_t>(r.arrays.size()));
  for (const auto& a : r.arrays) append_string(body, a);
  std::vector<std::byte> out;
  append_record(out, body);
  return out;
}

std::vector<JournalRecord> Journal::decode_all(std::span<const std::byte> bytes) {
  bool clean = true;
  std::vector<JournalRecord> out;
  for (auto body : split_records(bytes, &clean)) {
    Cursor c(body);
    JournalRecord r;
    r.ordinal = c.get<std::uint64_t>();
    auto kind = c.get<std::uint8_t>();
    if (kind > 2) break;
    r.kind = static_cast<CallKind>(kind);
    auto type = c.get<std::uint8_t>();
    if (type > 1) break;
    r.value = Reduction::from_bits(static_cast<Reduction::Type>(type), c.get<std::uint64_t>());
    auto n = c.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n; ++i) r.arrays.push_back(c.string());
    if (!out.empty() && r.ordinal <= out.back().ordinal) break;
    out.push_back(std::move(r));
  }
  return out;
}

void Journal::append(const JournalRecord& record) {
  if (!records_.empty() && record.ordinal <= records_.back().ordinal) {
    throw StateError("journal ordinals must increase");
  }
  auto bytes = encode(record);
  file_.write_all(bytes);
  if (fsync_) file_.sync();
  records_.push_back(record);
}

std::optional<std::uint64_t> Journal::last_ordinal() const {
  if (records_.empty()) return std::nullopt;
  return records_.back().ordinal;
}

const JournalRecord* Journal::find(std::uint64_t ordinal) const {
  for (const auto& r : records_) {
    if (r.ordinal == ordinal) return &r;
  }
  return nullptr;
}

}  // namespace dfog
