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

#include "dfog/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <linux/sockios.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/ioctl.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <sstream>

namespace dfog {

void ClusterConfig::validate() const {
  if (endpoints.empty()) throw ConfigError("cluster has no endpoints");
  if (rank >= endpoints.size()) {
    throw ConfigError("rank " + std::to_string(rank) + " outside a cluster of " +
                      std::to_string(endpoints.size()));
  }
  for (std::size_t i = 0; i < endpoints.size(); ++i) {
    for (std::size_t j = i + 1; j < endpoints.size(); ++j) {
      if (endpoints[i] == endpoints[j]) {
        throw ConfigError("duplicate endpoint " + endpoints[i].host + ":" +
                          std::to_string(endpoints[i].port));
      }
    }
  }
}

std::vector<Endpoint> parse_hostfile(const std::string& text) {
  std::vector<Endpoint> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    auto colon = line.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == line.size()) {
      throw ConfigError("hostfile line " + std::to_string(lineno) + ": expected host:port");
    }
    unsigned long port = 0;
    try {
      std::size_t used = 0;
      port = std::stoul(line.substr(colon + 1), &used);
      if (used != line.size() - colon - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError("hostfile line " + std::to_string(lineno) + ": bad port");
    }
    if (port == 0 || port > 65535) {
      throw ConfigError("hostfile line " + std::to_string(lineno) + ": port out of range");
    }
    out.push_back({line.substr(0, colon), static_cast<std::uint16_t>(port)});
  }
  return out;
}

std::vector<Endpoint> read_hostfile(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("hostfile '" + path.string() + "' not found");
  auto bytes = read_whole_file(path);
  return parse_hostfile(std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

void write_hostfile(const std::filesystem::path& path, const std::vector<Endpoint>& endpoints) {
  std::string text;
  for (const auto& e : endpoints) text += e.host + ":" + std::to_string(e.port) + "\n";
  write_file_atomic(path, {reinterpret_cast<const std::byte*>(text.data()), text.size()}, false);
}

std::vector<std::uint32_t> round_robin_targets(std::uint32_t self, std::uint32_t parts) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t k = 1; k < parts; ++k) out.push_back((self + k) % parts);
  return out;
}

std::vector<Endpoint> allocate_local_endpoints(std::uint32_t count) {
  std::vector<int> fds;
  std::vector<Endpoint> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0) throw IoError("socket failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    socklen_t len = sizeof(addr);
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 ||
        ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) < 0) {
      ::close(fd);
      throw IoError("cannot reserve a loopback port");
    }
    fds.push_back(fd);
    out.push_back({"127.0.0.1", ntohs(addr.sin_port)});
  }
  for (int fd : fds) ::close(fd);
  return out;
}

std::array<std::byte, kFrameHeaderBytes> encode_frame_header(const FrameHeader& h) {
  std::array<std::byte, kFrameHeaderBytes> out{};
  std::byte* p = out.data();
  std::memcpy(p, "DFOM", 4);
  le::put<std::uint32_t>(p + 4, h.version);
  le::put<std::uint64_t>(p + 8, h.call);
  le::put<std::uint8_t>(p + 16, static_cast<std::uint8_t>(h.kind));
  le::put<std::uint32_t>(p + 17, h.src);
  le::put<std::uint16_t>(p + 21, h.flags);
  le::put<std::uint64_t>(p + 23, h.count);
  le::put<std::uint32_t>(p + 31, h.message_bytes);
  le::put<std::uint64_t>(p + 35, h.payload_len);
  le::put<std::uint32_t>(p + 43, crc32({p, 43}));
  return out;
}

FrameHeader decode_frame_header(std::span<const std::byte> bytes) {
  if (bytes.size() < kFrameHeaderBytes) throw FormatError("frame header truncated");
  const std::byte* p = bytes.data();
  if (std::memcmp(p, "DFOM", 4) != 0) throw FormatError("bad frame magic");
  if (le::get<std::uint32_t>(p + 43) != crc32({p, 43})) {
    throw FormatError("frame header checksum mismatch");
  }
  FrameHeader h;
  h.version = le::get<std::uint32_t>(p + 4);
  if (h.version != kFrameVersion) throw FormatError("unsupported frame version");
  h.call = le::get<std::uint64_t>(p + 8);
  auto kind = le::get<std::uint8_t>(p + 16);
  if (kind > 3) throw FormatError("bad frame kind");
  h.kind = static_cast<FrameKind>(kind);
  h.src = le::get<std::uint32_t>(p + 17);
  h.flags = le::get<std::uint16_t>(p + 21);
  h.count = le::get<std::uint64_t>(p + 23);
  h.message_bytes = le::get<std::uint32_t>(p + 31);
  h.payload_len = le::get<std::uint64_t>(p + 35);
  if (h.kind == FrameKind::message && h.payload_len != h.count * (8ull + h.message_bytes)) {
    throw FormatError("message frame payload length " + std::to_string(h.payload_len) +
                      " does not match " + std::to_string(h.count) + " records of " +
                      std::to_string(8 + h.message_bytes) + " bytes");
  }
  return h;
}

FrameHeader message_header(std::uint64_t call, std::uint32_t src, std::uint64_t count,
                           std::uint32_t message_bytes, bool filtered) {
  FrameHeader h;
  h.call = call;
  h.kind = FrameKind::message;
  h.src = src;
  h.flags = filtered ? kFlagFiltered : 0;
  h.count = count;
  h.message_bytes = message_bytes;
  h.payload_len = count * (8ull + message_bytes);
  return h;
}

ControlCode Frame::control() const {
  if (header.kind != FrameKind::control || payload.empty()) {
    throw FormatError("frame is not a control frame");
  }
  return static_cast<ControlCode>(payload[0]);
}

namespace {

std::string errno_text() { return std::strerror(errno); }

// Returns false on EOF before any byte; throws on error or mid-read EOF.
bool read_full(int fd, std::byte* dst, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    ssize_t r = ::read(fd, dst + got, n - got);
    if (r == 0) {
      if (got == 0) return false;
      throw IoError("connection closed mid-frame");
    }
    if (r < 0) {
      if (errno == EINTR) continue;
      throw IoError("socket read failed: " + errno_text());
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

void write_full(int fd, const std::byte* src, std::size_t n) {
  std::size_t done = 0;
  while (done < n) {
    ssize_t r = ::send(fd, src + done, n - done, MSG_NOSIGNAL);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw IoError("socket write failed: " + errno_text());
    }
    done += static_cast<std::size_t>(r);
  }
}

sockaddr_in resolve(const Endpoint& e) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  int rc = ::getaddrinfo(e.host.c_str(), nullptr, &hints, &res);
  if (rc != 0 || res == nullptr) {
    throw ConfigError("cannot resolve host '" + e.host + "': " + gai_strerror(rc));
  }
  sockaddr_in addr = *reinterpret_cast<sockaddr_in*>(res->ai_addr);
  ::freeaddrinfo(res);
  addr.sin_port = htons(e.port);
  return addr;
}

void tune(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

std::vector<std::byte> control_payload(ControlCode code) {
  return {static_cast<std::byte>(code)};
}

}  // namespace

Transport::Transport(ClusterConfig config) : config_(std::move(config)) {
  config_.validate();
  const std::uint32_t parts = size();
  for (std::uint32_t i = 0; i < parts; ++i) {
    auto p = std::make_unique<Peer>();
    p->queue = std::make_unique<BoundedQueue<Frame>>(config_.queue_depth);
    peers_.push_back(std::move(p));
  }
  if (parts == 1) return;

  int lfd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (lfd < 0) throw IoError("socket failed: " + errno_text());
  int one = 1;
  ::setsockopt(lfd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(config_.endpoints[rank()].port);
  if (::bind(lfd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 ||
      ::listen(lfd, static_cast<int>(parts)) < 0) {
    int err = errno;
    ::close(lfd);
    throw IoError("cannot listen on port " + std::to_string(config_.endpoints[rank()].port) +
                  ": " + std::strerror(err));
  }
  try {
    connect_all(lfd);
  } catch (...) {
    ::close(lfd);
    for (auto& p : peers_) {
      if (p->out_fd >= 0) ::close(p->out_fd);
      if (p->in_fd >= 0) ::close(p->in_fd);
    }
    throw;
  }
  ::close(lfd);
  for (std::uint32_t i = 0; i < parts; ++i) {
    if (i == rank()) continue;
    peers_[i]->reader = std::thread([this, i] { reader_loop(i); });
  }
}

void Transport::connect_all(int lfd) {
  const std::uint32_t parts = size();
  auto deadline = std::chrono::steady_clock::now() + config_.connect_timeout;

  // Outbound: connect to every peer and introduce ourselves.
  for (std::uint32_t i = 0; i < parts; ++i) {
    if (i == rank()) continue;
    sockaddr_in addr = resolve(config_.endpoints[i]);
    while (true) {
      int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
      if (fd < 0) throw IoError("socket failed: " + errno_text());
      if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) {
        tune(fd);
        peers_[i]->out_fd = fd;
        break;
      }
      ::close(fd);
      if (std::chrono::steady_clock::now() > deadline) {
        throw PeerLost("could not connect to rank " + std::to_string(i) + " at " +
                       config_.endpoints[i].host + ":" + std::to_string(config_.endpoints[i].port));
      }
      std::this_thread::sleep_for(config_.retry_interval);
    }
    FrameHeader h;
    h.kind = FrameKind::control;
    h.src = rank();
    h.payload_len = 1;
    auto payload = control_payload(ControlCode::hello);
    auto head = encode_frame_header(h);
    write_full(peers_[i]->out_fd, head.data(), head.size());
    write_full(peers_[i]->out_fd, payload.data(), payload.size());
  }

  // Inbound: accept P-1 connections, identified by their HELLO.
  std::uint32_t accepted = 0;
  while (accepted + 1 < parts) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw PeerLost("timed out waiting for peers to connect");
    pollfd pfd{lfd, POLLIN, 0};
    int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc <= 0) continue;
    int fd = ::accept4(lfd, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) continue;
    tune(fd);
    std::array<std::byte, kFrameHeaderBytes> raw{};
    std::byte code{};
    FrameHeader h;
    try {
      if (!read_full(fd, raw.data(), raw.size())) throw IoError("eof");
      h = decode_frame_header(raw);
      if (h.kind != FrameKind::control || h.payload_len != 1) throw FormatError("no hello");
      if (!read_full(fd, &code, 1)) throw IoError("eof");
    } catch (const Error&) {
      ::close(fd);
      continue;
    }
    if (static_cast<ControlCode>(code) != ControlCode::hello || h.src >= parts || h.src == rank() ||
        peers_[h.src]->in_fd >= 0) {
      ::close(fd);
      continue;
    }
    peers_[h.src]->in_fd = fd;
    ++accepted;
  }
}

Transport::~Transport() {
  for (auto& p : peers_) {
    if (p->in_fd >= 0) ::shutdown(p->in_fd, SHUT_RDWR);
    if (p->out_fd >= 0) ::shutdown(p->out_fd, SHUT_RDWR);
    if (p->queue) p->queue->close();
  }
  for (auto& p : peers_) {
    if (p->reader.joinable()) p->reader.join();
    if (p->in_fd >= 0) ::close(p->in_fd);
    if (p->out_fd >= 0) ::close(p->out_fd);
  }
}

void Transport::reader_loop(std::uint32_t peer) {
  Peer& p = *peers_[peer];
  try {
    while (true) {
      std::array<std::byte, kFrameHeaderBytes> raw{};
      if (!read_full(p.in_fd, raw.data(), raw.size())) {
        p.set_why("rank " + std::to_string(peer) + " closed its connection");
        break;
      }
      Frame f;
      f.header = decode_frame_header(raw);
      if (f.header.src != peer) throw FormatError("frame source rank does not match connection");
      f.payload.resize(f.header.payload_len);
      if (!f.payload.empty() && !read_full(p.in_fd, f.payload.data(), f.payload.size())) {
        throw IoError("connection closed mid-frame");
      }
      p.received += kFrameHeaderBytes + f.payload.size();
      if (!p.queue->push(std::move(f))) return;
    }
  } catch (const std::exception& e) {
    p.set_why("rank " + std::to_string(peer) + ": " + e.what());
  }
  p.lost = true;
  p.queue->close();
}

void Transport::lost(std::uint32_t peer, const std::string& why) const {
  throw PeerLost(why.empty() ? "lost rank " + std::to_string(peer) : why);
}

void Transport::send(std::uint32_t peer, const FrameHeader& header,
                     std::span<const std::byte> payload) {
  if (peer == rank() || peer >= size()) throw PreconditionError("bad send target");
  if (header.payload_len != payload.size()) throw PreconditionError("payload length mismatch");
  Peer& p = *peers_[peer];
  auto head = encode_frame_header(header);
  std::lock_guard lock(p.send_mutex);
  try {
    write_full(p.out_fd, head.data(), head.size());
    if (!payload.empty()) write_full(p.out_fd, payload.data(), payload.size());
  } catch (const IoError& e) {
    lost(peer, "send to rank " + std::to_string(peer) + " failed: " + e.what());
  }
  p.sent += head.size() + payload.size();
}

void Transport::send_control(std::uint32_t peer, std::uint64_t call, ControlCode code) {
  FrameHeader h;
  h.call = call;
  h.kind = FrameKind::control;
  h.src = rank();
  h.payload_len = 1;
  auto payload = control_payload(code);
  send(peer, h, payload);
}

Frame Transport::recv(std::uint32_t peer) {
  if (peer == rank() || peer >= size()) throw PreconditionError("bad receive source");
  Peer& p = *peers_[peer];
  auto f = p.queue->pop_for(config_.io_timeout);
  if (!f) {
    if (p.lost || p.queue->closed()) lost(peer, p.get_why());
    throw PeerLost("timed out waiting for rank " + std::to_string(peer));
  }
  if (f->header.kind == FrameKind::control && !f->payload.empty() &&
      f->control() == ControlCode::abort) {
    throw PeerLost("rank " + std::to_string(peer) + " aborted call " +
                   std::to_string(f->header.call));
  }
  return std::move(*f);
}

std::uint64_t Transport::unsent_bytes(std::uint32_t peer) const {
  const Peer& p = *peers_.at(peer);
  if (p.out_fd < 0) return 0;
  int n = 0;
  if (::ioctl(p.out_fd, SIOCOUTQ, &n) < 0) return 0;
  return static_cast<std::uint64_t>(n);
}

std::vector<std::vector<std::byte>> Transport::gather(std::uint64_t call, FrameKind kind,
                                                      std::span<const std::byte> payload) {
  std::vector<std::vector<std::byte>> out;
  if (rank() != 0) {
    FrameHeader h;
    h.call = call;
    h.kind = kind;
    h.src = rank();
    h.payload_len = payload.size();
    send(0, h, payload);
    return out;
  }
  out.emplace_back(payload.begin(), payload.end());
  for (std::uint32_t i = 1; i < size(); ++i) {
    Frame f = recv(i);
    if (f.header.kind != kind || f.header.call != call) {
      throw InvariantViolation("rank " + std::to_string(i) + " sent an unexpected frame during gather for call " +
                               std::to_string(call));
    }
    out.push_back(std::move(f.payload));
  }
  return out;
}

std::vector<std::byte> Transport::broadcast(std::uint64_t call, FrameKind kind,
                                            std::span<const std::byte> payload) {
  if (rank() == 0) {
    FrameHeader h;
    h.call = call;
    h.kind = kind;
    h.src = 0;
    h.payload_len = payload.size();
    for (std::uint32_t i = 1; i < size(); ++i) send(i, h, payload);
    return {payload.begin(), payload.end()};
  }
  Frame f = recv(0);
  if (f.header.kind != kind || f.header.call != call) {
    throw InvariantViolation("unexpected frame from rank 0 during broadcast for call " +
                             std::to_string(call));
  }
  return std::move(f.payload);
}

Reduction Transport::reduce_sum(std::uint64_t call, Reduction local) {
  std::vector<std::byte> mine;
  le::append<std::uint8_t>(mine, static_cast<std::uint8_t>(local.type));
  le::append<std::uint64_t>(mine, local.bits());
  auto all = gather(call, FrameKind::reduction, mine);
  std::vector<std::byte> total_bytes;
  if (rank() == 0) {
    Reduction total = local.type == Reduction::Type::integer ? Reduction::of(std::int64_t{0})
                                                             : Reduction::of(0.0);
    for (const auto& part : all) {
      if (part.size() != 9) throw FormatError("bad reduction payload");
      auto type = static_cast<Reduction::Type>(le::get<std::uint8_t>(part.data()));
      total += Reduction::from_bits(type, le::get<std::uint64_t>(part.data() + 1));
    }
    le::append<std::uint8_t>(total_bytes, static_cast<std::uint8_t>(total.type));
    le::append<std::uint64_t>(total_bytes, total.bits());
  }
  auto got = broadcast(call, FrameKind::reduction, total_bytes);
  if (got.size() != 9) throw FormatError("bad reduction payload");
  return Reduction::from_bits(static_cast<Reduction::Type>(le::get<std::uint8_t>(got.data())),
                              le::get<std::uint64_t>(got.data() + 1));
}

void Transport::barrier(std::uint64_t call) {
  if (size() == 1) return;
  std::vector<std::byte> code{static_cast<std::byte>(ControlCode::barrier)};
  gather(call, FrameKind::control, code);
  broadcast(call, FrameKind::control, code);
}

void Transport::shutdown() noexcept {
  for (auto& p : peers_) {
    p->lost = true;
    p->set_why("transport shut down");
    if (p->queue) p->queue->close();
    if (p->in_fd >= 0) ::shutdown(p->in_fd, SHUT_RDWR);
    if (p->out_fd >= 0) ::shutdown(p->out_fd, SHUT_RDWR);
  }
}

void Transport::abort_all(std::uint64_t call) noexcept {
  for (std::uint32_t i = 0; i < size(); ++i) {
    if (i == rank() || peers_[i]->out_fd < 0) continue;
    try {
      send_control(i, call, ControlCode::abort);
    } catch (...) {
    }
  }
}

}  // namespace dfog
