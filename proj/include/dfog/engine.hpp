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

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "dfog/manifest.hpp"
#include "dfog/memory.hpp"
#include "dfog/storage.hpp"
#include "dfog/traffic.hpp"
#include "dfog/transport.hpp"

namespace dfog {

enum class DispatchStrategy : std::uint8_t { push = 0, pull = 1, none = 2 };
const char* to_string(DispatchStrategy s);
DispatchStrategy parse_dispatch_strategy(const std::string& text);

/// none when the dispatch list is more than `cost_factor` times the
/// messages; otherwise pull for self-messages or an idle pipeline; else push.
DispatchStrategy select_dispatch_strategy(std::uint32_t source_node, std::uint32_t self_node,
                                          std::uint64_t msg_count, std::uint64_t dispatch_list_size,
                                          bool pipeline_idle, double cost_factor = 4.0);

/// Filtering is applied iff |L_ij| / |M_i| < skip_ratio (and there is at
/// least one message).
bool should_filter(std::uint64_t list_size, std::uint64_t msg_count, double skip_ratio);

/// Where a fault-injection run kills the process (exit code 86).
struct CrashPlan {
  enum class Point : std::uint8_t { start, mid, prepared, committed };
  std::uint32_t rank = 0;
  std::uint64_t call = 0;
  Point point = Point::start;
};
inline constexpr int kCrashExitCode = 86;

struct EngineConfig {
  std::uint64_t memory_budget_bytes = 256ull << 20;
  std::uint32_t threads = 1;
  double dispatch_cost_factor = 4.0;
  std::optional<double> filter_skip_ratio;  // manifest value when absent
  std::optional<double> gamma;              // manifest value when absent
  bool checkpointing = true;
  std::uint32_t checkpoints_keep = 2;
  bool fsync = true;
  std::size_t pipeline_queue_depth = 8;
  std::size_t frame_bytes = 64 << 10;
  bool self_first = false;
  std::filesystem::path storage_dir;  // this node's private directory
  std::filesystem::path metrics_path;  // CSV, empty = none
  bool strict = false;
  bool recover = false;

  // Testing overrides.
  std::optional<DispatchStrategy> force_dispatch;
  std::optional<bool> force_filtering;
  bool inject_oversend = false;
  std::optional<CrashPlan> crash;
};

class Engine;

/// One preprocessed graph (forward or reversed) as seen by one node.
class Graph {
 public:
  Graph(std::filesystem::path dir, Manifest manifest);
  const std::filesystem::path& dir() const { return dir_; }
  const Manifest& manifest() const { return manifest_; }
  std::filesystem::path file(const std::string& relative) const { return dir_ / relative; }

 private:
  std::filesystem::path dir_;
  Manifest manifest_;
};

struct ArrayUse {
  std::uint32_t slot = 0;
  bool write = false;
};

namespace detail {

struct BoundArray {
  std::byte* data = nullptr;
  VertexRange range;
  bool bitmap = false;
  bool writable = false;
};

/// Arrays loaded for the batch the current thread is working on.
struct BatchContext {
  std::vector<BoundArray> arrays;  // by slot
};

extern thread_local BatchContext* tls_batch;

[[noreturn]] void unbound_access(std::uint32_t slot, VertexId v);

inline const BoundArray& bound(std::uint32_t slot, VertexId v) {
  BatchContext* ctx = tls_batch;
  if (ctx == nullptr || slot >= ctx->arrays.size() || ctx->arrays[slot].data == nullptr ||
      !ctx->arrays[slot].range.contains(v)) {
    unbound_access(slot, v);
  }
  return ctx->arrays[slot];
}

}  // namespace detail

/// Per-vertex data of type T. Elements are reachable only inside a Process
/// call, for vertices of the batch being worked on.
template <typename T>
class VertexArray {
  static_assert(std::is_trivially_copyable_v<T>, "vertex data must be trivially copyable");

 public:
  VertexArray() = default;
  const std::string& name() const { return name_; }
  std::uint32_t slot() const { return slot_; }

  T& operator[](VertexId v) const {
    const auto& b = detail::bound(slot_, v);
    return reinterpret_cast<T*>(b.data)[v - b.range.lo];
  }

 private:
  friend class Engine;
  VertexArray(std::string name, std::uint32_t slot) : name_(std::move(name)), slot_(slot) {}
  std::string name_;
  std::uint32_t slot_ = 0;
};

/// Boolean vertex array stored one bit per vertex (active sets).
class Bitmap {
 public:
  Bitmap() = default;
  const std::string& name() const { return name_; }
  std::uint32_t slot() const { return slot_; }

  bool test(VertexId v) const {
    const auto& b = detail::bound(slot_, v);
    VertexId k = v - b.range.lo;
    return (std::to_integer<unsigned>(b.data[k / 8]) >> (k % 8)) & 1u;
  }
  void set(VertexId v, bool value = true) const {
    const auto& b = detail::bound(slot_, v);
    VertexId k = v - b.range.lo;
    auto mask = static_cast<std::byte>(1u << (k % 8));
    b.data[k / 8] = value ? (b.data[k / 8] | mask) : (b.data[k / 8] & ~mask);
  }

 private:
  friend class Engine;
  Bitmap(std::string name, std::uint32_t slot) : name_(std::move(name)), slot_(slot) {}
  std::string name_;
  std::uint32_t slot_ = 0;
};

template <typename A>
ArrayUse reads(const A& a) {
  return {a.slot(), false};
}
template <typename A>
ArrayUse writes(const A& a) {
  return {a.slot(), true};
}

namespace detail {

template <typename R>
Reduction to_reduction(R value) {
  if constexpr (std::is_floating_point_v<R>) {
    return Reduction::of(static_cast<double>(value));
  } else {
    return Reduction::of(static_cast<std::int64_t>(value));
  }
}

template <typename R>
Reduction zero_reduction() {
  return to_reduction<R>(R{});
}

template <typename R>
R from_reduction(const Reduction& r) {
  if constexpr (std::is_floating_point_v<R>) {
    return static_cast<R>(r.real);
  } else {
    return static_cast<R>(r.integer);
  }
}

}  // namespace detail

/// Type-erased user functions handed to the engine core.
using WorkFn = std::function<void(VertexId, Reduction&)>;
using SignalFn = std::function<bool(VertexId, std::byte* message)>;
using SlotFn = std::function<void(const std::byte* message, VertexId src, VertexId dst,
                                  const std::byte* edge_data, Reduction&)>;
using BatchInitFn = std::function<void(VertexRange batch, std::byte* data)>;

/// The per-node execution engine. All nodes run the same driver code and
/// make the same sequence of calls; every call is a collective operation.
class Engine {
 public:
  Engine(EngineConfig config, const std::filesystem::path& graph_dir, Transport& transport);
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  std::uint32_t rank() const { return transport_.rank(); }
  std::uint32_t num_nodes() const { return transport_.size(); }
  const Graph& graph() const { return *forward_; }
  /// Graph with every edge reversed; ConfigError when it was not built.
  const Graph& reversed() const;
  bool has_reversed() const { return reversed_ != nullptr; }
  VertexRange partition() const { return partition_; }
  std::uint64_t num_vertices() const { return forward_->manifest().meta.num_vertices; }
  const EngineConfig& config() const { return config_; }
  MemoryGovernor& governor() { return governor_; }
  VertexStore& store() { return *store_; }
  /// Ordinal the next Process call will get.
  std::uint64_t next_call() const { return next_call_; }
  /// Last call restored from the journal (recovery mode).
  std::optional<std::uint64_t> resumed_through() const { return resume_point_; }
  const std::vector<CallTraffic>& traffic_log() const { return traffic_log_; }

  /// Creates (or, when replaying a recovered run, re-binds) a vertex array
  /// initialized per vertex. Counts as one Process call.
  template <typename T, typename Init>
    requires std::is_invocable_r_v<T, Init&, VertexId>
  VertexArray<T> get_vertex_array(const std::string& name, Init&& init) {
    auto slot = create_array(name, ArrayShape{sizeof(T), false},
                             [&](VertexRange r, std::byte* data) {
                               T* out = reinterpret_cast<T*>(data);
                               for (VertexId v = r.lo; v < r.hi; ++v) out[v - r.lo] = init(v);
                             });
    return VertexArray<T>(name, slot);
  }
  template <typename T>
  VertexArray<T> get_vertex_array(const std::string& name, std::type_identity_t<T> value = T{}) {
    return get_vertex_array<T>(name, [value](VertexId) { return value; });
  }
  template <typename Init>
  Bitmap get_bitmap(const std::string& name, Init&& init) {
    auto slot = create_array(name, ArrayShape{0, true}, [&](VertexRange r, std::byte* data) {
      std::fill(data, data + (r.size() + 7) / 8, std::byte{0});
      for (VertexId v = r.lo; v < r.hi; ++v) {
        if (init(v)) {
          VertexId k = v - r.lo;
          data[k / 8] |= static_cast<std::byte>(1u << (k % 8));
        }
      }
    });
    return Bitmap(name, slot);
  }
  /// u64 out- or in-degree of every vertex, from the preprocessed graph.
  VertexArray<std::uint64_t> get_degree_array(const std::string& name, bool out_degree = true);

  /// work(v) -> R for every (active) local vertex; returns the global sum.
  template <typename R = std::int64_t, typename Work>
  R process_vertices(Work&& work, std::initializer_list<ArrayUse> arrays,
                     const Bitmap* active = nullptr) {
    WorkFn fn = [&](VertexId v, Reduction& acc) {
      if constexpr (std::is_void_v<decltype(work(v))>) {
        work(v);
      } else {
        acc += detail::to_reduction<R>(work(v));
      }
    };
    return detail::from_reduction<R>(
        vertices_core(fn, arrays, active, detail::zero_reduction<R>()));
  }

  /// signal(src) -> std::optional<Msg>; slot(msg, src, dst, edge) -> R.
  /// Returns the global sum of slot results.
  template <typename Msg, typename R = std::int64_t, typename EdgeT = Empty, typename Signal,
            typename Slot>
  R process_edges(const Graph& graph, Signal&& signal, Slot&& slot,
                  std::initializer_list<ArrayUse> signal_arrays,
                  std::initializer_list<ArrayUse> slot_arrays, const Bitmap* active = nullptr) {
    static_assert(std::is_trivially_copyable_v<Msg>);
    static_assert(std::is_trivially_copyable_v<EdgeT>);
    constexpr std::uint32_t edge_bytes = std::is_empty_v<EdgeT> ? 0 : sizeof(EdgeT);
    SignalFn sig = [&](VertexId v, std::byte* out) {
      std::optional<Msg> m = signal(v);
      if (!m) return false;
      std::memcpy(out, &*m, sizeof(Msg));
      return true;
    };
    SlotFn sl = [&](const std::byte* msg, VertexId src, VertexId dst, const std::byte* edge,
                    Reduction& acc) {
      Msg m;
      std::memcpy(&m, msg, sizeof(Msg));
      EdgeT e{};
      if constexpr (edge_bytes > 0) std::memcpy(&e, edge, edge_bytes);
      if constexpr (std::is_void_v<decltype(slot(m, src, dst, e))>) {
        slot(m, src, dst, e);
      } else {
        acc += detail::to_reduction<R>(slot(m, src, dst, e));
      }
    };
    return detail::from_reduction<R>(edges_core(graph, sizeof(Msg), edge_bytes, sig, sl,
                                                signal_arrays, slot_arrays, active,
                                                detail::zero_reduction<R>()));
  }

  /// Local partition values of an array (outside of Process calls).
  template <typename T>
  std::vector<T> read_local(const VertexArray<T>& array) const {
    std::vector<T> out(partition_.size());
    read_local_bytes(array.name(), reinterpret_cast<std::byte*>(out.data()));
    return out;
  }
  std::vector<bool> read_local(const Bitmap& bitmap) const;
  /// Raw little-endian values of the local partition.
  void export_array(const std::string& name, const std::filesystem::path& path) const;

 private:
  struct EdgesCall;

  std::uint32_t create_array(const std::string& name, ArrayShape shape, const BatchInitFn& init);
  Reduction vertices_core(const WorkFn& work, std::initializer_list<ArrayUse> arrays,
                          const Bitmap* active, Reduction zero);
  Reduction edges_core(const Graph& graph, std::uint32_t message_bytes, std::uint32_t edge_bytes,
                       const SignalFn& signal, const SlotFn& slot,
                       std::initializer_list<ArrayUse> signal_arrays,
                       std::initializer_list<ArrayUse> slot_arrays, const Bitmap* active,
                       Reduction zero);
  void read_local_bytes(const std::string& name, std::byte* out) const;

  // Call lifecycle.
  std::optional<Reduction> begin_call(CallKind kind);
  Reduction commit_call(CallKind kind, Reduction local);
  void maybe_crash(CrashPlan::Point point) const;
  void fail_call() noexcept;
  void record_traffic(CallTraffic traffic);

  std::uint32_t slot_of(const std::string& name, ArrayShape shape);
  const std::string& slot_name(std::uint32_t slot) const { return slot_names_.at(slot); }

  EngineConfig config_;
  Transport& transport_;
  std::unique_ptr<Graph> forward_;
  std::unique_ptr<Graph> reversed_;
  VertexRange partition_;
  MemoryGovernor governor_;
  std::unique_ptr<VertexStore> store_;
  std::unique_ptr<Journal> journal_;
  std::uint64_t next_call_ = 1;
  std::optional<std::uint64_t> resume_point_;
  std::vector<JournalRecord> replay_;  // journaled calls to skip
  std::vector<std::string> slot_names_;
  std::vector<CallTraffic> traffic_log_;
  std::unique_ptr<MetricsWriter> metrics_;
};

}  // namespace dfog
