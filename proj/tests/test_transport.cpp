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

#include <cstring>
#include <functional>
#include <thread>

#include "doctest.h"
#include "dfog/io.hpp"
#include "dfog/transport.hpp"
#include "support.hpp"

using namespace dfog;
using dfog::testing::TempDir;

namespace {

std::vector<std::byte> from_hex(const std::string& hex) {
  std::vector<std::byte> out;
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    out.push_back(static_cast<std::byte>(std::stoi(hex.substr(i, 2), nullptr, 16)));
  }
  return out;
}

// Runs fn on every rank of a loopback cluster; rethrows the first failure.
void run_cluster(std::uint32_t parts, const std::function<void(Transport&)>& fn) {
  auto endpoints = allocate_local_endpoints(parts);
  std::vector<std::exception_ptr> errors(parts);
  std::vector<std::thread> threads;
  for (std::uint32_t r = 0; r < parts; ++r) {
    threads.emplace_back([&, r] {
      try {
        ClusterConfig cfg;
        cfg.endpoints = endpoints;
        cfg.rank = r;
        cfg.io_timeout = std::chrono::seconds(20);
        cfg.connect_timeout = std::chrono::seconds(20);
        Transport t(cfg);
        fn(t);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

TEST_CASE("round-robin targets") {
  CHECK(round_robin_targets(0, 4) == std::vector<std::uint32_t>{1, 2, 3});
  CHECK(round_robin_targets(2, 4) == std::vector<std::uint32_t>{3, 0, 1});
  CHECK(round_robin_targets(0, 1).empty());
  for (std::uint32_t p = 1; p <= 6; ++p) {
    for (std::uint32_t i = 0; i < p; ++i) {
      auto t = round_robin_targets(i, p);
      CHECK(t.size() == p - 1);
      for (std::size_t k = 0; k < t.size(); ++k) CHECK(t[k] == (i + 1 + k) % p);
    }
  }
}

TEST_CASE("frame header golden bytes") {
  FrameHeader h = message_header(5, 2, 5, 8, true);
  CHECK(h.payload_len == 80);
  auto bytes = encode_frame_header(h);
  auto golden = from_hex(
      "44464f4d01000000050000000000000000020000000100050000000000000008000000500000000000000006c2"
      "50bd");
  REQUIRE(golden.size() == kFrameHeaderBytes);
  CHECK(std::memcmp(bytes.data(), golden.data(), golden.size()) == 0);
  FrameHeader back = decode_frame_header(bytes);
  CHECK(back == h);
  CHECK(back.filtered());
}

TEST_CASE("corrupted frame headers are rejected") {
  auto bytes = encode_frame_header(message_header(1, 0, 3, 4, false));
  for (std::size_t i = 0; i < kFrameHeaderBytes; ++i) {
    auto bad = bytes;
    bad[i] ^= std::byte{0x10};
    CHECK_THROWS_AS(decode_frame_header(bad), FormatError);
  }
  CHECK_THROWS_AS(decode_frame_header(std::span(bytes).first(20)), FormatError);
}

TEST_CASE("hostfile parsing") {
  auto eps = parse_hostfile("# cluster\n10.0.0.1:7000\n\n  node-b:7001  \n[::1]:7002\n");
  REQUIRE(eps.size() == 3);
  CHECK(eps[0] == Endpoint{"10.0.0.1", 7000});
  CHECK(eps[1] == Endpoint{"node-b", 7001});
  CHECK(eps[2].port == 7002);
  CHECK_THROWS_AS(parse_hostfile("host\n"), ConfigError);
  CHECK_THROWS_AS(parse_hostfile("host:x\n"), ConfigError);
  CHECK_THROWS_AS(parse_hostfile("host:70000\n"), ConfigError);

  TempDir dir("hosts");
  write_hostfile(dir / "hosts", {{"127.0.0.1", 1}, {"127.0.0.1", 2}});
  CHECK(read_hostfile(dir / "hosts") == std::vector<Endpoint>{{"127.0.0.1", 1}, {"127.0.0.1", 2}});

  ClusterConfig cfg;
  cfg.endpoints = {{"a", 1}, {"a", 1}};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.endpoints = {{"a", 1}};
  cfg.rank = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("message streams arrive in order with a terminal frame") {
  run_cluster(3, [](Transport& t) {
    const std::uint32_t me = t.rank();
    for (std::uint32_t peer : round_robin_targets(me, t.size())) {
      std::uint64_t blocks = peer == 1 ? 3 : 0;
      for (std::uint64_t b = 0; b < blocks; ++b) {
        std::vector<std::byte> payload(b * 12);
        for (std::size_t k = 0; k < payload.size(); ++k) payload[k] = std::byte(b + k);
        t.send(peer, message_header(7, me, b, 4, false), payload);
      }
      t.send_control(peer, 7, ControlCode::end_of_stream);
    }
    for (std::uint32_t src = 0; src < t.size(); ++src) {
      if (src == me) continue;
      std::uint64_t seen = 0;
      for (;;) {
        Frame f = t.recv(src);
        CHECK(f.header.call == 7);
        CHECK(f.header.src == src);
        if (f.header.kind == FrameKind::control) {
          CHECK(f.control() == ControlCode::end_of_stream);
          break;
        }
        CHECK(f.header.count == seen);
        CHECK(f.payload.size() == seen * 12);
        ++seen;
      }
      CHECK(seen == (me == 1 ? 3u : 0u));
    }
    t.barrier(7);
  });
}

TEST_CASE("send checks the payload length") {
  run_cluster(2, [](Transport& t) {
    if (t.rank() == 0) {
      std::vector<std::byte> short_payload(10);
      CHECK_THROWS_AS(t.send(1, message_header(1, 0, 5, 8, false), short_payload),
                      PreconditionError);
      CHECK_THROWS_AS(t.send(0, message_header(1, 0, 0, 8, false)), PreconditionError);
    }
    t.barrier(1);
  });
}

TEST_CASE("gather, broadcast and reduce_sum") {
  for (std::uint32_t parts : {1u, 2u, 4u}) {
    run_cluster(parts, [parts](Transport& t) {
      std::vector<std::byte> mine{std::byte(t.rank() * 3)};
      auto all = t.gather(1, FrameKind::control, mine);
      if (t.rank() == 0) {
        REQUIRE(all.size() == parts);
        for (std::uint32_t r = 0; r < parts; ++r) CHECK(all[r] == std::vector<std::byte>{std::byte(r * 3)});
      } else {
        CHECK(all.empty());
      }
      std::vector<std::byte> msg{std::byte{42}, std::byte{7}};
      auto got = t.broadcast(2, FrameKind::journal, t.rank() == 0 ? msg : std::vector<std::byte>{});
      CHECK(got == msg);

      Reduction s = t.reduce_sum(3, Reduction::of(std::int64_t(t.rank() + 1)));
      std::int64_t expect = std::int64_t(parts) * (parts + 1) / 2;
      CHECK(s.integer == expect);

      // Floats are summed in rank order starting from zero.
      const double vals[] = {0.1, 1e16, -1e16, 0.7};
      Reduction f = t.reduce_sum(4, Reduction::of(vals[t.rank()]));
      double ordered = 0.0;
      for (std::uint32_t r = 0; r < parts; ++r) ordered += vals[r];
      CHECK(std::memcmp(&f.real, &ordered, sizeof ordered) == 0);
      t.barrier(5);
    });
  }
}

TEST_CASE("byte accounting") {
  run_cluster(2, [](Transport& t) {
    if (t.rank() == 0) {
      std::vector<std::byte> payload(5 * (8 + 8));
      t.send(1, message_header(1, 0, 5, 8, false), payload);
      CHECK(t.bytes_sent(1) == kFrameHeaderBytes + 80);
    } else {
      Frame f = t.recv(0);
      CHECK(f.header.count * (8 + f.header.message_bytes) == f.header.payload_len);
      CHECK(t.bytes_received(0) >= kFrameHeaderBytes + 80);
    }
    t.barrier(2);
  });
}

TEST_CASE("a vanished peer is reported as lost") {
  auto endpoints = allocate_local_endpoints(2);
  std::exception_ptr seen;
  std::thread a([&] {
    ClusterConfig cfg;
    cfg.endpoints = endpoints;
    cfg.rank = 0;
    cfg.io_timeout = std::chrono::seconds(20);
    Transport t(cfg);
    try {
      t.recv(1);
    } catch (...) {
      seen = std::current_exception();
    }
  });
  {
    ClusterConfig cfg;
    cfg.endpoints = endpoints;
    cfg.rank = 1;
    Transport t(cfg);
    t.shutdown();
  }
  a.join();
  REQUIRE(seen);
  CHECK_THROWS_AS(std::rethrow_exception(seen), PeerLost);
}

TEST_CASE("connect timeout when peers never start") {
  auto endpoints = allocate_local_endpoints(2);
  ClusterConfig cfg;
  cfg.endpoints = endpoints;
  cfg.rank = 0;
  cfg.connect_timeout = std::chrono::milliseconds(300);
  CHECK_THROWS_AS(Transport{cfg}, PeerLost);
}
