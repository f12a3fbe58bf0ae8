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

#include "dfog/memory.hpp"

#include <string>

namespace dfog {

Lease& Lease::operator=(Lease&& other) noexcept {
  if (this != &other) {
    release();
    governor_ = other.governor_;
    bytes_ = other.bytes_;
    other.governor_ = nullptr;
    other.bytes_ = 0;
  }
  return *this;
}

void Lease::release() {
  if (governor_ != nullptr && bytes_ != 0) governor_->give_back(bytes_);
  governor_ = nullptr;
  bytes_ = 0;
}

Lease MemoryGovernor::reserve(std::size_t bytes) {
  std::size_t cur = used_.load(std::memory_order_relaxed);
  for (;;) {
    if (cur + bytes > budget_) {
      throw BudgetExceeded("memory budget exceeded: requested " + std::to_string(bytes) +
                           " bytes with " + std::to_string(cur) + " of " +
                           std::to_string(budget_) + " in use");
    }
    if (used_.compare_exchange_weak(cur, cur + bytes, std::memory_order_relaxed)) break;
  }
  std::size_t now = cur + bytes;
  std::size_t p = peak_.load(std::memory_order_relaxed);
  while (now > p && !peak_.compare_exchange_weak(p, now, std::memory_order_relaxed)) {
  }
  return Lease(this, bytes);
}

Buffer::Buffer(MemoryGovernor* governor, std::size_t bytes) : size_(bytes) {
  if (governor != nullptr) lease_ = governor->reserve(bytes);
  data_ = std::make_unique_for_overwrite<std::byte[]>(bytes == 0 ? 1 : bytes);
}

}  // namespace dfog
