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

#include <atomic>
#include <cstddef>
#include <memory>
#include <span>

#include "dfog/types.hpp"

namespace dfog {

class MemoryGovernor;

/// RAII claim on part of a governor's budget.
class Lease {
 public:
  Lease() = default;
  Lease(MemoryGovernor* governor, std::size_t bytes) : governor_(governor), bytes_(bytes) {}
  Lease(Lease&& other) noexcept { *this = std::move(other); }
  Lease& operator=(Lease&& other) noexcept;
  Lease(const Lease&) = delete;
  Lease& operator=(const Lease&) = delete;
  ~Lease() { release(); }

  std::size_t bytes() const { return bytes_; }
  void release();

 private:
  MemoryGovernor* governor_ = nullptr;
  std::size_t bytes_ = 0;
};

/// Hard cap on engine-owned buffer memory. A reservation that would exceed the
/// budget throws instead of blocking; callers size their concurrency so that
/// this never happens in a correctly planned call.
class MemoryGovernor {
 public:
  explicit MemoryGovernor(std::size_t budget_bytes) : budget_(budget_bytes) {}
  MemoryGovernor(const MemoryGovernor&) = delete;
  MemoryGovernor& operator=(const MemoryGovernor&) = delete;

  Lease reserve(std::size_t bytes);

  std::size_t budget() const { return budget_; }
  std::size_t used() const { return used_.load(std::memory_order_relaxed); }
  std::size_t peak() const { return peak_.load(std::memory_order_relaxed); }
  void reset_peak() { peak_.store(used(), std::memory_order_relaxed); }

 private:
  friend class Lease;
  void give_back(std::size_t bytes) { used_.fetch_sub(bytes, std::memory_order_relaxed); }

  std::size_t budget_;
  std::atomic<std::size_t> used_{0};
  std::atomic<std::size_t> peak_{0};
};

/// Heap byte buffer whose size is charged to a governor (or uncharged when the
/// governor is null, as in preprocessing helpers and tests).
class Buffer {
 public:
  Buffer() = default;
  Buffer(MemoryGovernor* governor, std::size_t bytes);

  std::byte* data() { return data_.get(); }
  const std::byte* data() const { return data_.get(); }
  std::size_t size() const { return size_; }
  std::span<std::byte> span() { return {data_.get(), size_}; }
  std::span<const std::byte> span() const { return {data_.get(), size_}; }

 private:
  Lease lease_;
  std::unique_ptr<std::byte[]> data_;
  std::size_t size_ = 0;
};

}  // namespace dfog
