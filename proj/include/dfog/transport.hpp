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
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "dfog/memory.hpp"
#include "dfog/queue.hpp"
#include "dfog/storage.hpp"

namespace dfog {

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;
  friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

struct ClusterConfig {
  std::vector<Endpoint> endpoints;  // index = rank
  std::uint32_t rank = 0;
  std::chrono::milliseconds connect_timeout{30000};
  std::chrono::milliseconds io_timeout{600000};
  std::chrono::milliseconds retry_interval{50};
  std::size_t queue_depth = 8;

  std::uint32_t size() const { return static_cast<std::uint32_t>(endpoints.size()); }
  void validate() const;
};

/// Hostfile: one `host:port` per line, line number = rank. Blank lines and
/// lines starting with '#' are skipped.
std::vector<Endpoint> parse_hostfile(const std::string& text);
std::vector<Endpoint> read_hostfile(const std::filesystem::path& path);
void write_hostfile(const std::filesystem::path& path, const std::vector<Endpoint>& endpoints);

/// Peers in send order: i+1, ..., P-1, 0, ..., i-1.
std::vector<std::uint32_t> round_robin_targets(std::uint32_t self, std::uint32_t parts);

/// Loopback endpoints on ports that were free at the time of the call.
std::vector<Endpoint> allocate_local_endpoints(std::uint32_t count);

enum class FrameKind : std::uint8_t { message = 0, control = 1, reduction = 2, journal = 3 };
enum class ControlCode : std::uint8_t { end_of_stream = 1, barrier = 2, hello = 3, abort = 4 };

inline constexpr std::uint32_t kFrameVersion = 1;
inline constexpr std::size_t kFrameHeaderBytes = 47;
inline constexpr std::uint16_t kFlagFiltered = 1;

// Wire header, little-endian, packed:
//   "DFOM" | version u32 | call u64 | kind u8 | src u32 | flags u16 |
//   count u64 | message_bytes u32 | payload_len u64 | crc32 u32
// The checksum covers the preceding 43 bytes.
struct FrameHeader {
  std::uint32_t version = kFrameVersion;
  std::uint64_t call = 0;
  FrameKind kind = FrameKind::message;
  std::uint32_t src = 0;
  std::uint16_t flags = 0;
  std::uint64_t count = 0;
  std::uint32_t message_bytes = 0;
  std::uint64_t payload_len = 0;

  bool filtered() const { return (flags & kFlagFiltered) != 0; }
  friend bool operator==(const FrameHeader&, const FrameHeader&) = default;
};

std::array<std::byte, kFrameHeaderBytes> encode_frame_header(const FrameHeader& header);
/// Validates magic, version, checksum and (for message frames)
/// payload_len = count * (8 + message_bytes).
FrameHeader decode_frame_header(std::span<const std::byte> bytes);
/// Header of a message frame carrying `count` records.
FrameHeader message_header(std::uint64_t call, std::uint32_t src, std::uint64_t count,
                           std::uint32_t message_bytes, bool filtered);

struct Frame {
  FrameHeader header;
  std::vector<std::byte> payload;

  ControlCode control() const;
};

/// Full mesh of TCP connections: one outbound (send) and one inbound
/// (receive) socket per peer. A reader thread per inbound socket feeds a
/// bounded queue; recv() pops from it.
class Transport {
 public:
  explicit Transport(ClusterConfig config);
  ~Transport();
  Transport(const Transport&) = delete;
  Transport& operator=(const Transport&) = delete;

  std::uint32_t rank() const { return config_.rank; }
  std::uint32_t size() const { return config_.size(); }
  const ClusterConfig& config() const { return config_; }

  /// Sends one frame; safe to call concurrently for different peers.
  void send(std::uint32_t peer, const FrameHeader& header, std::span<const std::byte> payload = {});
  void send_control(std::uint32_t peer, std::uint64_t call, ControlCode code);
  /// Next frame from `peer`; throws PeerLost on EOF, error, ABORT or timeout.
  Frame recv(std::uint32_t peer);
  /// Bytes handed to the kernel for `peer` but not yet acknowledged.
  std::uint64_t unsent_bytes(std::uint32_t peer) const;

  /// Rank-ordered gather at node 0: returns every node's payload there (own
  /// included at its rank), an empty list elsewhere.
  std::vector<std::vector<std::byte>> gather(std::uint64_t call, FrameKind kind,
                                             std::span<const std::byte> payload);
  /// Node 0's payload, delivered to all nodes.
  std::vector<std::byte> broadcast(std::uint64_t call, FrameKind kind,
                                   std::span<const std::byte> payload);
  /// Sum of all nodes' values in ascending rank order, at every node.
  Reduction reduce_sum(std::uint64_t call, Reduction local);
  void barrier(std::uint64_t call);
  /// Best-effort ABORT to every peer.
  void abort_all(std::uint64_t call) noexcept;
  /// Wakes every blocked recv() with PeerLost; the transport is unusable after.
  void shutdown() noexcept;

  std::uint64_t bytes_sent(std::uint32_t peer) const { return peers_.at(peer)->sent.load(); }
  std::uint64_t bytes_received(std::uint32_t peer) const {
    return peers_.at(peer)->received.load();
  }

 private:
  struct Peer {
    int out_fd = -1;
    int in_fd = -1;
    std::mutex send_mutex;
    std::unique_ptr<BoundedQueue<Frame>> queue;
    std::thread reader;
    std::atomic<bool> lost{false};
    std::mutex why_mutex;
    std::string why;
    void set_why(std::string text) {
      std::lock_guard lock(why_mutex);
      if (why.empty()) why = std::move(text);
    }
    std::string get_why() {
      std::lock_guard lock(why_mutex);
      return why;
    }
    std::atomic<std::uint64_t> sent{0};
    std::atomic<std::uint64_t> received{0};
  };

  void connect_all(int listen_fd);
  void reader_loop(std::uint32_t peer);
  [[noreturn]] void lost(std::uint32_t peer, const std::string& why) const;

  ClusterConfig config_;
  std::vector<std::unique_ptr<Peer>> peers_;
};

}  // namespace dfog
