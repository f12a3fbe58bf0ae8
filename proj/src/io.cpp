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

#include "dfog/io.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <cerrno>
#include <system_error>

namespace dfog {

namespace {

[[noreturn]] void throw_io(const std::string& what, const std::filesystem::path& path) {
  throw IoError(what + " '" + path.string() + "': " + std::generic_category().message(errno));
}

}  // namespace

std::uint32_t crc32(std::span<const std::byte> bytes, std::uint32_t seed) {
  uLong crc = seed;
  const auto* p = reinterpret_cast<const Bytef*>(bytes.data());
  std::size_t left = bytes.size();
  while (left > 0) {
    auto n = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    crc = ::crc32(crc, p, n);
    p += n;
    left -= n;
  }
  return static_cast<std::uint32_t>(crc);
}

File::File(const std::filesystem::path& path, Mode mode) : path_(path) {
  int flags = O_CLOEXEC;
  switch (mode) {
    case Mode::read: flags |= O_RDONLY; break;
    case Mode::write_truncate: flags |= O_WRONLY | O_CREAT | O_TRUNC; break;
    case Mode::read_write_create: flags |= O_RDWR | O_CREAT; break;
    case Mode::append_create: flags |= O_WRONLY | O_CREAT | O_APPEND; break;
  }
  fd_ = ::open(path.c_str(), flags, 0644);
  if (fd_ < 0) throw_io("cannot open", path);
}

File& File::operator=(File&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    path_ = std::move(other.path_);
    other.fd_ = -1;
  }
  return *this;
}

File::~File() { close(); }

void File::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

std::size_t File::pread_some(std::uint64_t offset, std::span<std::byte> out) const {
  std::size_t done = 0;
  while (done < out.size()) {
    ssize_t n = ::pread(fd_, out.data() + done, out.size() - done,
                        static_cast<off_t>(offset + done));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_io("read failed on", path_);
    }
    if (n == 0) break;
    done += static_cast<std::size_t>(n);
  }
  return done;
}

void File::pread_exact(std::uint64_t offset, std::span<std::byte> out) const {
  if (pread_some(offset, out) != out.size()) {
    throw IoError("unexpected end of file '" + path_.string() + "' at offset " +
                  std::to_string(offset));
  }
}

void File::pwrite_all(std::uint64_t offset, std::span<const std::byte> bytes) const {
  std::size_t done = 0;
  while (done < bytes.size()) {
    ssize_t n = ::pwrite(fd_, bytes.data() + done, bytes.size() - done,
                         static_cast<off_t>(offset + done));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_io("write failed on", path_);
    }
    done += static_cast<std::size_t>(n);
  }
}

void File::write_all(std::span<const std::byte> bytes) const {
  std::size_t done = 0;
  while (done < bytes.size()) {
    ssize_t n = ::write(fd_, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_io("write failed on", path_);
    }
    done += static_cast<std::size_t>(n);
  }
}

std::uint64_t File::size() const {
  struct stat st {};
  if (::fstat(fd_, &st) != 0) throw_io("cannot stat", path_);
  return static_cast<std::uint64_t>(st.st_size);
}

void File::sync() const {
  if (::fdatasync(fd_) != 0) throw_io("fdatasync failed on", path_);
}

void File::truncate(std::uint64_t size) const {
  if (::ftruncate(fd_, static_cast<off_t>(size)) != 0) throw_io("cannot truncate", path_);
}

std::vector<std::byte> read_whole_file(const std::filesystem::path& path) {
  File f(path, File::Mode::read);
  std::vector<std::byte> bytes(f.size());
  f.pread_exact(0, bytes);
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::byte> bytes,
                       bool sync) {
  auto tmp = path;
  tmp += ".tmp";
  {
    File f(tmp, File::Mode::write_truncate);
    f.write_all(bytes);
    if (sync) f.sync();
  }
  std::filesystem::rename(tmp, path);
  if (sync) {
    int dfd = ::open(path.parent_path().empty() ? "." : path.parent_path().c_str(),
                     O_RDONLY | O_DIRECTORY | O_CLOEXEC);
    if (dfd >= 0) {
      ::fsync(dfd);
      ::close(dfd);
    }
  }
}

FileReader::FileReader(const File& file, std::uint64_t begin, std::uint64_t end,
                       MemoryGovernor* governor, std::size_t buffer_bytes,
                       std::uint64_t* bytes_read_counter)
    : file_(&file),
      begin_(begin),
      end_(end),
      pos_(begin),
      buffer_(governor, std::max<std::size_t>(buffer_bytes, 64)),
      counter_(bytes_read_counter) {}

void FileReader::seek(std::uint64_t pos) {
  if (pos < begin_ || pos > end_) throw RangeError("seek outside file region");
  pos_ = pos;
}

void FileReader::fill(std::uint64_t at, std::size_t min_bytes) {
  std::size_t want = static_cast<std::size_t>(
      std::min<std::uint64_t>(buffer_.size(), end_ - at));
  if (want < min_bytes) {
    throw IoError("read past end of region in '" + file_->path().string() + "'");
  }
  std::size_t got = file_->pread_some(at, buffer_.span().first(want));
  if (got < min_bytes) throw IoError("truncated file '" + file_->path().string() + "'");
  if (counter_ != nullptr) *counter_ += got;
  window_lo_ = at;
  window_hi_ = at + got;
}

const std::byte* FileReader::take(std::size_t n) {
  if (n > buffer_.size()) throw RangeError("take larger than reader buffer");
  if (pos_ < window_lo_ || pos_ + n > window_hi_) fill(pos_, n);
  const std::byte* p = buffer_.data() + (pos_ - window_lo_);
  pos_ += n;
  return p;
}

void FileReader::read(void* dst, std::size_t n) {
  auto* out = static_cast<std::byte*>(dst);
  while (n > 0) {
    std::size_t step = std::min(n, buffer_.size());
    std::memcpy(out, take(step), step);
    out += step;
    n -= step;
  }
}

FileWriter::FileWriter(const std::filesystem::path& path, File::Mode mode,
                       MemoryGovernor* governor, std::size_t buffer_bytes,
                       std::uint64_t* bytes_written_counter)
    : file_(path, mode),
      buffer_(governor, std::max<std::size_t>(buffer_bytes, 64)),
      counter_(bytes_written_counter) {}

FileWriter::~FileWriter() {
  try {
    if (file_.is_open()) flush();
  } catch (...) {
  }
}

void FileWriter::write(const void* src, std::size_t n) {
  const auto* in = static_cast<const std::byte*>(src);
  while (n > 0) {
    if (fill_ == buffer_.size()) flush();
    std::size_t step = std::min(n, buffer_.size() - fill_);
    std::memcpy(buffer_.data() + fill_, in, step);
    fill_ += step;
    in += step;
    n -= step;
  }
}

void FileWriter::flush() {
  if (fill_ == 0) return;
  file_.write_all(buffer_.span().first(fill_));
  total_ += fill_;
  if (counter_ != nullptr) *counter_ += fill_;
  fill_ = 0;
}

void FileWriter::sync() {
  flush();
  file_.sync();
}

}  // namespace dfog
