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
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "dfog/memory.hpp"
#include "dfog/types.hpp"

namespace dfog {

namespace le {

template <typename T>
  requires std::is_trivially_copyable_v<T>
inline void put(std::byte* dst, T value) {
  std::memcpy(dst, &value, sizeof(T));
}

template <typename T>
  requires std::is_trivially_copyable_v<T>
inline T get(const std::byte* src) {
  T value;
  std::memcpy(&value, src, sizeof(T));
  return value;
}

/// Appends the raw little-endian bytes of `value`.
template <typename T>
  requires std::is_trivially_copyable_v<T>
inline void append(std::vector<std::byte>& out, T value) {
  auto at = out.size();
  out.resize(at + sizeof(T));
  put(out.data() + at, value);
}

inline void append_bytes(std::vector<std::byte>& out, std::span<const std::byte> bytes) {
  out.insert(out.end(), bytes.begin(), bytes.end());
}

}  // namespace le

std::uint32_t crc32(std::span<const std::byte> bytes, std::uint32_t seed = 0);

/// Owning POSIX file descriptor with positional I/O.
class File {
 public:
  enum class Mode { read, write_truncate, read_write_create, append_create };

  File() = default;
  File(const std::filesystem::path& path, Mode mode);
  File(File&& other) noexcept : fd_(other.fd_), path_(std::move(other.path_)) { other.fd_ = -1; }
  File& operator=(File&& other) noexcept;
  File(const File&) = delete;
  File& operator=(const File&) = delete;
  ~File();

  bool is_open() const { return fd_ >= 0; }
  const std::filesystem::path& path() const { return path_; }

  void pread_exact(std::uint64_t offset, std::span<std::byte> out) const;
  /// Reads up to out.size() bytes; returns the count (short only at EOF).
  std::size_t pread_some(std::uint64_t offset, std::span<std::byte> out) const;
  void pwrite_all(std::uint64_t offset, std::span<const std::byte> bytes) const;
  /// Writes at the descriptor's current position (append mode appends).
  void write_all(std::span<const std::byte> bytes) const;
  std::uint64_t size() const;
  void sync() const;
  void truncate(std::uint64_t size) const;
  void close();

 private:
  int fd_ = -1;
  std::filesystem::path path_;
};

std::vector<std::byte> read_whole_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename so readers never see a torn file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::byte> bytes,
                       bool sync);

/// Buffered sequential reader over a byte region of a file. Seeking within the
/// current window is free; seeking elsewhere refills the window.
class FileReader {
 public:
  FileReader(const File& file, std::uint64_t begin, std::uint64_t end, MemoryGovernor* governor,
             std::size_t buffer_bytes, std::uint64_t* bytes_read_counter = nullptr);

  std::uint64_t position() const { return pos_; }
  std::uint64_t end() const { return end_; }
  bool at_end() const { return pos_ >= end_; }
  void seek(std::uint64_t pos);
  /// Copies exactly n bytes or throws at end of region.
  void read(void* dst, std::size_t n);
  /// Pointer to n contiguous bytes at the cursor (n ≤ buffer size); advances.
  const std::byte* take(std::size_t n);

 private:
  void fill(std::uint64_t at, std::size_t min_bytes);

  const File* file_;
  std::uint64_t begin_;
  std::uint64_t end_;
  std::uint64_t pos_;
  Buffer buffer_;
  std::uint64_t window_lo_ = 0;
  std::uint64_t window_hi_ = 0;
  std::uint64_t* counter_;
};

/// Random/forward access to a packed array of fixed-width elements stored in
/// a file region, through a bounded window.
template <typename T>
class ArrayReader {
 public:
  ArrayReader(const File& file, std::uint64_t base, std::uint64_t count, MemoryGovernor* governor,
              std::size_t buffer_bytes, std::uint64_t* counter = nullptr)
      : reader_(file, base, base + count * sizeof(T), governor,
                std::max<std::size_t>(buffer_bytes, sizeof(T)), counter),
        base_(base),
        count_(count) {}

  std::uint64_t size() const { return count_; }

  T operator[](std::uint64_t index) {
    if (index >= count_) throw RangeError("array index out of range");
    reader_.seek(base_ + index * sizeof(T));
    T value;
    reader_.read(&value, sizeof(T));
    return value;
  }

 private:
  FileReader reader_;
  std::uint64_t base_;
  std::uint64_t count_;
};

/// Buffered appender. Bytes are handed to the file when the buffer fills or
/// on flush().
class FileWriter {
 public:
  FileWriter(const std::filesystem::path& path, File::Mode mode, MemoryGovernor* governor,
             std::size_t buffer_bytes, std::uint64_t* bytes_written_counter = nullptr);
  FileWriter(FileWriter&&) = default;
  ~FileWriter();

  void write(const void* src, std::size_t n);
  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void put(T value) {
    write(&value, sizeof(T));
  }
  void flush();
  void sync();
  std::uint64_t bytes_written() const { return total_ + fill_; }
  const std::filesystem::path& path() const { return file_.path(); }

 private:
  File file_;
  Buffer buffer_;
  std::size_t fill_ = 0;
  std::uint64_t total_ = 0;
  std::uint64_t* counter_;
};

}  // namespace dfog
