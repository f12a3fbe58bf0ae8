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

#include "dfog/engine.hpp"

#include <algorithm>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <set>
#include <thread>

#include "dfog/encoding.hpp"

namespace dfog {

namespace fs = std::filesystem;

const char* to_string(DispatchStrategy s) {
  switch (s) {
    case DispatchStrategy::push: return "push";
    case DispatchStrategy::pull: return "pull";
    case DispatchStrategy::none: return "none";
  }
  return "?";
}

DispatchStrategy parse_dispatch_strategy(const std::string& text) {
  if (text == "push") return DispatchStrategy::push;
  if (text == "pull") return DispatchStrategy::pull;
  if (text == "none") return DispatchStrategy::none;
  throw ConfigError("unknown dispatch strategy '" + text + "' (expected push, pull or none)");
}

DispatchStrategy select_dispatch_strategy(std::uint32_t source_node, std::uint32_t self_node,
                                          std::uint64_t msg_count, std::uint64_t dispatch_list_size,
                                          bool pipeline_idle, double cost_factor) {
  if (static_cast<double>(dispatch_list_size) > cost_factor * static_cast<double>(msg_count)) {
    return DispatchStrategy::none;
  }
  if (source_node == self_node || pipeline_idle) return DispatchStrategy::pull;
  return DispatchStrategy::push;
}

bool should_filter(std::uint64_t list_size, std::uint64_t msg_count, double skip_ratio) {
  if (msg_count == 0) return true;
  return static_cast<double>(list_size) / static_cast<double>(msg_count) < skip_ratio;
}

Graph::Graph(fs::path dir, Manifest manifest) : dir_(std::move(dir)), manifest_(std::move(manifest)) {}

namespace detail {

thread_local BatchContext* tls_batch = nullptr;

void unbound_access(std::uint32_t slot, VertexId v) {
  if (tls_batch == nullptr) {
    throw PreconditionError("vertex data accessed outside a Process call");
  }
  if (slot >= tls_batch->arrays.size() || tls_batch->arrays[slot].data == nullptr) {
    throw PreconditionError("vertex array (slot " + std::to_string(slot) +
                            ") was not passed to this Process call");
  }
  throw PreconditionError("vertex " + std::to_string(v) +
                          " is outside the batch being processed");
}

}  // namespace detail

namespace {

struct ContextGuard {
  explicit ContextGuard(detail::BatchContext* ctx) : prev(detail::tls_batch) {
    detail::tls_batch = ctx;
  }
  ~ContextGuard() { detail::tls_batch = prev; }
  detail::BatchContext* prev;
};

// Runs fn(0..n-1) on up to `threads` threads, handing out indices in
// ascending order. The first exception stops further work and is rethrown.
void parallel_for(std::uint64_t n, std::uint32_t threads,
                  const std::function<void(std::uint64_t)>& fn) {
  std::atomic<std::uint64_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex mu;
  auto run = [&] {
    while (!stop) {
      std::uint64_t k = next++;
      if (k >= n) break;
      try {
        fn(k);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        stop = true;
      }
    }
  };
  std::uint64_t t = std::min<std::uint64_t>(std::max<std::uint32_t>(threads, 1), n);
  std::vector<std::thread> pool;
  for (std::uint64_t k = 1; k < t; ++k) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::size_t io_buffer_bytes(std::uint64_t budget) {
  return static_cast<std::size_t>(std::clamp<std::uint64_t>(budget / 64, 4096, 256 << 10));
}

struct Segment {
  fs::path path;
  std::uint64_t count = 0;
};

// Ascending stream of (source, message) records spread over files.
class MessageCursor {
 public:
  MessageCursor(std::vector<Segment> segments, std::uint32_t message_bytes,
                MemoryGovernor* governor, std::size_t buffer, std::uint64_t* counter)
      : segments_(std::move(segments)),
        rec_(8 + message_bytes),
        governor_(governor),
        buffer_(std::max<std::size_t>(buffer / rec_ * rec_, rec_)),
        counter_(counter),
        current_(rec_) {
    open_next();
    advance();
  }
  bool valid() const { return valid_; }
  VertexId id() const { return id_; }
  const std::byte* payload() const { return current_.data() + 8; }
  const std::byte* record() const { return current_.data(); }
  std::size_t record_bytes() const { return rec_; }
  void advance() {
    while (reader_ && reader_->at_end()) open_next();
    if (!reader_) {
      valid_ = false;
      return;
    }
    reader_->read(current_.data(), rec_);
    VertexId next = le::get<std::uint64_t>(current_.data());
    if (valid_ && next <= id_) {
      throw InvariantViolation("message stream is not strictly ascending at source " +
                               std::to_string(next));
    }
    id_ = next;
    valid_ = true;
  }

 private:
  void open_next() {
    reader_.reset();
    file_.reset();
    while (seg_ < segments_.size()) {
      const Segment& s = segments_[seg_++];
      if (s.count == 0) continue;
      file_.emplace(s.path, File::Mode::read);
      reader_.emplace(*file_, 0, s.count * rec_, governor_, buffer_, counter_);
      return;
    }
  }

  std::vector<Segment> segments_;
  std::size_t seg_ = 0;
  std::size_t rec_;
  MemoryGovernor* governor_;
  std::size_t buffer_;
  std::uint64_t* counter_;
  std::optional<File> file_;
  std::optional<FileReader> reader_;
  std::vector<std::byte> current_;
  VertexId id_ = 0;
  bool valid_ = false;
};

std::uint64_t record_count(const fs::path& p, std::size_t rec) {
  std::error_code ec;
  auto size = fs::file_size(p, ec);
  return ec ? 0 : size / rec;
}

// Shared failure state of one ProcessEdges call.
struct Failure {
  std::mutex mu;
  std::exception_ptr first;
  std::atomic<bool> failed{false};
  std::function<void()> on_fail;

  void set(std::exception_ptr e) {
    {
      std::lock_guard lock(mu);
      if (first) return;
      first = e;
      failed = true;
    }
    if (on_fail) on_fail();
  }
  template <class F>
  std::thread spawn(F&& f) {
    return std::thread([this, f = std::forward<F>(f)]() mutable {
      try {
        f();
      } catch (...) {
        set(std::current_exception());
      }
    });
  }
};

}  // namespace

// ---------------------------------------------------------------------------

Engine::Engine(EngineConfig config, const fs::path& graph_dir, Transport& transport)
    : config_(std::move(config)),
      transport_(transport),
      governor_(config_.memory_budget_bytes) {
  if (config_.threads < 1) throw ConfigError("threads must be >= 1");
  if (config_.memory_budget_bytes == 0) throw ConfigError("memory budget must be > 0");
  if (config_.checkpoints_keep < 1) throw ConfigError("checkpoints_keep must be >= 1");
  if (config_.dispatch_cost_factor <= 0) throw ConfigError("dispatch_cost_factor must be > 0");
  if (config_.storage_dir.empty()) throw ConfigError("engine needs a storage directory");
  forward_ = std::make_unique<Graph>(graph_dir, Manifest::load(graph_dir));
  const Manifest& m = forward_->manifest();
  if (m.meta.num_partitions != transport_.size()) {
    throw ClusterMismatch("graph was preprocessed for " + std::to_string(m.meta.num_partitions) +
                          " nodes but the cluster has " + std::to_string(transport_.size()));
  }
  if (!m.reversed_graph.empty()) {
    fs::path rdir = graph_dir / m.reversed_graph;
    reversed_ = std::make_unique<Graph>(rdir, Manifest::load(rdir));
    const Manifest& r = reversed_->manifest();
    if (!(r.layout == m.layout) || !(r.batching == m.batching)) {
      throw FormatError("reversed graph does not share the vertex layout");
    }
  }
  partition_ = m.layout.range(rank());
  fs::create_directories(config_.storage_dir);

  StorageOptions so{config_.storage_dir, config_.checkpointing, config_.checkpoints_keep,
                    config_.fsync};
  fs::path journal_path = config_.storage_dir / "journal.bin";
  if (config_.recover) {
    if (!config_.checkpointing) throw ConfigError("recovery requires checkpointing");
    std::vector<std::byte> encoded;
    if (rank() == 0) {
      journal_ = std::make_unique<Journal>(journal_path, config_.fsync, false);
      for (const auto& r : journal_->records()) {
        auto e = Journal::encode(r);
        encoded.insert(encoded.end(), e.begin(), e.end());
      }
    }
    auto all = transport_.broadcast(0, FrameKind::journal, encoded);
    replay_ = Journal::decode_all(all);
  }
  if (config_.recover && !replay_.empty()) {
    resume_point_ = replay_.back().ordinal;
    store_ = std::make_unique<VertexStore>(so, partition_, m.batching, resume_point_);
    for (const auto& r : replay_) {
      if (r.kind != CallKind::create) continue;
      for (const auto& name : r.arrays) {
        if (!store_->has_array(name)) {
          throw RecoveryError("journal records array '" + name + "' but node " +
                              std::to_string(rank()) + " has no lineage for it");
        }
      }
    }
    for (const auto& name : replay_.back().arrays) {
      if (!store_->has_array(name)) {
        throw RecoveryError("array '" + name + "' of the last journaled call is missing on node " +
                            std::to_string(rank()));
      }
    }
  } else {
    // Fresh runs, and recoveries with nothing journaled, start from scratch.
    store_ = std::make_unique<VertexStore>(so, partition_, m.batching);
    if (rank() == 0 && config_.checkpointing) {
      journal_ = std::make_unique<Journal>(journal_path, config_.fsync, true);
    }
  }
  if (!config_.metrics_path.empty()) {
    metrics_ = std::make_unique<MetricsWriter>(config_.metrics_path, transport_.size());
  }
}

Engine::~Engine() = default;

const Graph& Engine::reversed() const {
  if (!reversed_) throw ConfigError("graph was preprocessed without --reversed");
  return *reversed_;
}

std::uint32_t Engine::slot_of(const std::string& name, ArrayShape) {
  for (std::uint32_t i = 0; i < slot_names_.size(); ++i) {
    if (slot_names_[i] == name) {
      throw PreconditionError("vertex array '" + name + "' was already requested");
    }
  }
  slot_names_.push_back(name);
  return static_cast<std::uint32_t>(slot_names_.size() - 1);
}

void Engine::maybe_crash(CrashPlan::Point point) const {
  const auto& c = config_.crash;
  if (c && c->rank == rank() && c->call == next_call_ - 1 && c->point == point) {
    std::fflush(nullptr);
    std::_Exit(kCrashExitCode);
  }
}

std::optional<Reduction> Engine::begin_call(CallKind kind) {
  std::uint64_t ordinal = next_call_++;
  if (resume_point_ && ordinal <= *resume_point_) {
    auto it = std::find_if(replay_.begin(), replay_.end(),
                           [&](const JournalRecord& r) { return r.ordinal == ordinal; });
    if (it == replay_.end()) {
      throw RecoveryError("call " + std::to_string(ordinal) + " is missing from the journal");
    }
    if (it->kind != kind) {
      throw RecoveryError("call " + std::to_string(ordinal) +
                          " does not match the journaled call kind; the driver changed");
    }
    return it->value;
  }
  maybe_crash(CrashPlan::Point::start);
  store_->begin_call(ordinal);
  fs::path scratch = config_.storage_dir / "scratch";
  fs::remove_all(scratch);
  fs::create_directories(scratch);
  return std::nullopt;
}

void Engine::fail_call() noexcept {
  try {
    transport_.abort_all(next_call_ - 1);
    transport_.shutdown();
    store_->abort_call();
  } catch (...) {
  }
}

Reduction Engine::commit_call(CallKind kind, Reduction local) {
  const std::uint64_t ordinal = next_call_ - 1;
  maybe_crash(CrashPlan::Point::mid);
  auto touched = store_->touched_arrays();
  store_->prepare_commit();
  maybe_crash(CrashPlan::Point::prepared);

  std::vector<std::byte> mine;
  le::append<std::uint8_t>(mine, static_cast<std::uint8_t>(local.type));
  le::append<std::uint64_t>(mine, local.bits());
  le::append<std::uint32_t>(mine, static_cast<std::uint32_t>(touched.size()));
  for (const auto& name : touched) {
    le::append<std::uint32_t>(mine, static_cast<std::uint32_t>(name.size()));
    le::append_bytes(mine, {reinterpret_cast<const std::byte*>(name.data()), name.size()});
  }
  auto parts = transport_.gather(ordinal, FrameKind::reduction, mine);
  std::vector<std::byte> total_bytes;
  if (rank() == 0) {
    Reduction total = local.type == Reduction::Type::integer ? Reduction::of(std::int64_t{0})
                                                             : Reduction::of(0.0);
    std::set<std::string> names;
    for (const auto& p : parts) {
      if (p.size() < 13) throw FormatError("bad commit payload");
      auto type = static_cast<Reduction::Type>(le::get<std::uint8_t>(p.data()));
      total += Reduction::from_bits(type, le::get<std::uint64_t>(p.data() + 1));
      auto n = le::get<std::uint32_t>(p.data() + 9);
      std::size_t at = 13;
      for (std::uint32_t k = 0; k < n; ++k) {
        if (at + 4 > p.size()) throw FormatError("bad commit payload");
        auto len = le::get<std::uint32_t>(p.data() + at);
        at += 4;
        if (at + len > p.size()) throw FormatError("bad commit payload");
        names.emplace(reinterpret_cast<const char*>(p.data() + at), len);
        at += len;
      }
    }
    if (journal_) {
      journal_->append({ordinal, kind, {names.begin(), names.end()}, total});
    }
    le::append<std::uint8_t>(total_bytes, static_cast<std::uint8_t>(total.type));
    le::append<std::uint64_t>(total_bytes, total.bits());
  }
  auto got = transport_.broadcast(ordinal, FrameKind::journal, total_bytes);
  if (got.size() != 9) throw FormatError("bad commit broadcast");
  Reduction total = Reduction::from_bits(static_cast<Reduction::Type>(le::get<std::uint8_t>(got.data())),
                                         le::get<std::uint64_t>(got.data() + 1));
  store_->finish_commit();
  maybe_crash(CrashPlan::Point::committed);
  return total;
}

void Engine::record_traffic(CallTraffic traffic) {
  if (metrics_) metrics_->write(traffic);
  traffic_log_.push_back(std::move(traffic));
}

std::uint32_t Engine::create_array(const std::string& name, ArrayShape shape,
                                   const BatchInitFn& init) {
  std::uint32_t slot = slot_of(name, shape);
  if (auto replayed = begin_call(CallKind::create)) {
    if (!store_->has_array(name)) {
      throw RecoveryError("array '" + name + "' was journaled but has no lineage");
    }
    if (!(store_->shape(name) == shape)) {
      throw RecoveryError("array '" + name + "' was recovered with a different element type");
    }
    return slot;
  }
  try {
    store_->create_array(name, shape);
    std::atomic<std::uint64_t> written{0};
    parallel_for(store_->num_batches(), config_.threads, [&](std::uint64_t b) {
      VertexRange r = store_->batch_range(b);
      Buffer buf(&governor_, shape.block_bytes(r.size()));
      init(r, buf.data());
      std::uint64_t w = 0;
      store_->write_batch(name, b, buf.span(), &w);
      written += w;
    });
    CallTraffic t;
    t.node = rank();
    t.call = next_call_ - 1;
    t.kind = CallKind::create;
    PhaseRow row;
    row.phase = "create";
    row.sent.assign(num_nodes(), 0);
    row.recv.assign(num_nodes(), 0);
    row.varray_bytes_written = written;
    t.phases.push_back(row);
    record_traffic(std::move(t));
    commit_call(CallKind::create, Reduction::of(std::int64_t{0}));
  } catch (...) {
    fail_call();
    throw;
  }
  return slot;
}

VertexArray<std::uint64_t> Engine::get_degree_array(const std::string& name, bool out_degree) {
  fs::path file = forward_->file(out_degree ? Manifest::out_degree_file(rank())
                                            : Manifest::in_degree_file(rank()));
  File f(file, File::Mode::read);
  if (f.size() != partition_.size() * 8) throw FormatError("degree file has the wrong size");
  VertexRange part = partition_;
  return get_vertex_array<std::uint64_t>(name, [&, part](VertexId v) {
    std::array<std::byte, 8> raw{};
    f.pread_exact((v - part.lo) * 8, raw);
    return le::get<std::uint64_t>(raw.data());
  });
}

namespace {

// Loads the batch blocks of the listed arrays and binds them in `ctx`.
struct BatchArrays {
  std::vector<Buffer> buffers;
  std::vector<std::pair<std::string, std::uint32_t>> writable;  // name, slot
};

bool any_bit(const std::byte* data, std::uint64_t vertices) {
  std::uint64_t full = vertices / 8;
  for (std::uint64_t k = 0; k < full; ++k) {
    if (data[k] != std::byte{0}) return true;
  }
  std::uint64_t rest = vertices % 8;
  if (rest == 0) return false;
  return (std::to_integer<unsigned>(data[full]) & ((1u << rest) - 1)) != 0;
}

}  // namespace

Reduction Engine::vertices_core(const WorkFn& work, std::initializer_list<ArrayUse> arrays,
                                const Bitmap* active, Reduction zero) {
  if (auto replayed = begin_call(CallKind::vertices)) return *replayed;
  try {
    const std::uint64_t nb = store_->num_batches();
    std::vector<Reduction> partial(nb, zero);
    std::atomic<std::uint64_t> bytes_read{0}, bytes_written{0};
    std::vector<ArrayUse> uses(arrays);
    parallel_for(nb, config_.threads, [&](std::uint64_t b) {
      VertexRange r = store_->batch_range(b);
      detail::BatchContext ctx;
      ctx.arrays.resize(slot_names_.size());
      std::vector<Buffer> buffers;
      std::uint64_t rd = 0, wr = 0;
      auto load = [&](std::uint32_t slot, bool writable) {
        const std::string& name = slot_name(slot);
        ArrayShape shape = store_->shape(name);
        auto& buf = buffers.emplace_back(&governor_, shape.block_bytes(r.size()));
        store_->read_batch(name, b, buf.span(), &rd);
        ctx.arrays[slot] = {buf.data(), r, shape.bitmap, writable};
      };
      if (active != nullptr) {
        bool w = false;
        for (const auto& u : uses) {
          if (u.slot == active->slot()) w = w || u.write;
        }
        load(active->slot(), w);
        if (!any_bit(ctx.arrays[active->slot()].data, r.size())) {
          bytes_read += rd;
          return;
        }
      }
      for (const auto& u : uses) {
        if (ctx.arrays[u.slot].data != nullptr) {
          ctx.arrays[u.slot].writable = ctx.arrays[u.slot].writable || u.write;
          continue;
        }
        load(u.slot, u.write);
      }
      // The active set is read before any work call may clear it.
      std::vector<std::byte> mask;
      if (active != nullptr) {
        const auto& a = ctx.arrays[active->slot()];
        mask.assign(a.data, a.data + (r.size() + 7) / 8);
      }
      {
        ContextGuard guard(&ctx);
        for (VertexId v = r.lo; v < r.hi; ++v) {
          if (active != nullptr) {
            VertexId k = v - r.lo;
            if (((std::to_integer<unsigned>(mask[k / 8]) >> (k % 8)) & 1u) == 0) continue;
          }
          work(v, partial[b]);
        }
      }
      for (std::uint32_t slot = 0; slot < ctx.arrays.size(); ++slot) {
        const auto& a = ctx.arrays[slot];
        if (a.data == nullptr || !a.writable) continue;
        const std::string& name = slot_name(slot);
        std::uint64_t len = store_->shape(name).block_bytes(r.size());
        store_->write_batch(name, b, {a.data, len}, &wr);
      }
      bytes_read += rd;
      bytes_written += wr;
    });
    Reduction local = zero;
    for (const auto& p : partial) local += p;

    CallTraffic t;
    t.node = rank();
    t.call = next_call_ - 1;
    t.kind = CallKind::vertices;
    PhaseRow row;
    row.phase = "vertices";
    row.sent.assign(num_nodes(), 0);
    row.recv.assign(num_nodes(), 0);
    row.varray_bytes_read = bytes_read;
    row.varray_bytes_written = bytes_written;
    t.phases.push_back(row);
    record_traffic(std::move(t));
    return commit_call(CallKind::vertices, local);
  } catch (...) {
    fail_call();
    throw;
  }
}

// ---------------------------------------------------------------------------
// ProcessEdges

Reduction Engine::edges_core(const Graph& graph, std::uint32_t message_bytes,
                             std::uint32_t edge_bytes, const SignalFn& signal, const SlotFn& slot,
                             std::initializer_list<ArrayUse> signal_arrays,
                             std::initializer_list<ArrayUse> slot_arrays, const Bitmap* active,
                             Reduction zero) {
  if (auto replayed = begin_call(CallKind::edges)) return *replayed;
  const std::uint64_t call = next_call_ - 1;
  const Manifest& m = graph.manifest();
  const std::uint32_t P = num_nodes();
  const std::uint32_t me = rank();
  const std::uint64_t nb = store_->num_batches();
  const std::size_t rec = 8 + message_bytes;
  const std::size_t iobuf = io_buffer_bytes(config_.memory_budget_bytes);
  const double gamma = config_.gamma.value_or(m.meta.gamma);
  const double skip_ratio = config_.filter_skip_ratio.value_or(m.meta.filter_skip_ratio);
  const fs::path scratch = config_.storage_dir / "scratch";
  std::vector<ArrayUse> sig_uses(signal_arrays);
  std::vector<ArrayUse> slot_uses(slot_arrays);

  CallTraffic traffic;
  traffic.node = me;
  traffic.call = call;
  traffic.kind = CallKind::edges;
  traffic.sent.assign(P, 0);
  traffic.recv.assign(P, 0);
  traffic.sent_filtered.assign(P, false);
  traffic.recv_filtered.assign(P, false);
  traffic.strategies.assign(P, "");

  try {
    if (!(m.layout == forward_->manifest().layout) || !(m.batching == forward_->manifest().batching)) {
      throw PreconditionError("graph does not share the engine's vertex layout");
    }
    if (m.meta.edge_payload_bytes != edge_bytes) {
      throw PreconditionError("slot expects " + std::to_string(edge_bytes) +
                              "-byte edge data but the graph stores " +
                              std::to_string(m.meta.edge_payload_bytes));
    }
    if (message_bytes == 0) throw PreconditionError("messages must be at least one byte");

    // Phase 1: generate. One message file per batch, elided when empty.
    std::vector<std::uint64_t> gen_count(nb, 0);
    std::atomic<std::uint64_t> gen_read{0};
    auto gen_path = [&](std::uint64_t b) { return scratch / ("gen_b" + std::to_string(b) + ".bin"); };
    parallel_for(nb, config_.threads, [&](std::uint64_t b) {
      VertexRange r = store_->batch_range(b);
      detail::BatchContext ctx;
      ctx.arrays.resize(slot_names_.size());
      std::vector<Buffer> buffers;
      std::uint64_t rd = 0;
      auto load = [&](std::uint32_t s) {
        if (ctx.arrays[s].data != nullptr) return;
        const std::string& name = slot_name(s);
        ArrayShape shape = store_->shape(name);
        auto& buf = buffers.emplace_back(&governor_, shape.block_bytes(r.size()));
        store_->read_batch(name, b, buf.span(), &rd);
        ctx.arrays[s] = {buf.data(), r, shape.bitmap, false};
      };
      if (active != nullptr) {
        load(active->slot());
        if (!any_bit(ctx.arrays[active->slot()].data, r.size())) {
          gen_read += rd;
          return;
        }
      }
      for (const auto& u : sig_uses) load(u.slot);
      std::optional<FileWriter> out;
      std::vector<std::byte> msg(message_bytes);
      std::uint64_t count = 0;
      {
        ContextGuard guard(&ctx);
        for (VertexId v = r.lo; v < r.hi; ++v) {
          if (active != nullptr && !active->test(v)) continue;
          if (!signal(v, msg.data())) continue;
          if (!out) out.emplace(gen_path(b), File::Mode::write_truncate, &governor_, iobuf);
          out->put<std::uint64_t>(v);
          out->write(msg.data(), message_bytes);
          ++count;
        }
      }
      if (out) out->flush();
      gen_count[b] = count;
      gen_read += rd;
    });
    std::uint64_t generated = 0;
    for (auto c : gen_count) generated += c;
    traffic.generated = generated;

    auto self_segments = [&] {
      std::vector<Segment> segs;
      for (std::uint64_t b = 0; b < nb; ++b) {
        if (gen_count[b] > 0) segs.push_back({gen_path(b), gen_count[b]});
      }
      return segs;
    };

    // Frames in flight are bounded by the queues; charge them up front.
    Lease queue_lease = governor_.reserve(static_cast<std::size_t>(P - 1) *
                                          config_.pipeline_queue_depth * config_.frame_bytes);

    // Shared state of the overlapped pass / dispatch / process phases.
    struct Group {
      bool arrived = false;
      std::uint64_t count = 0;
      bool filtered = false;
      bool ready = false;
      DispatchStrategy strategy = DispatchStrategy::pull;
    };
    std::mutex mu;
    std::condition_variable cv;
    std::vector<Group> groups(P);
    std::uint32_t waiting = 0;
    std::uint32_t workers_alive = 0;
    Failure failure;
    failure.on_fail = [&] {
      transport_.abort_all(call);
      transport_.shutdown();
      std::lock_guard lock(mu);
      cv.notify_all();
    };
    auto check_failed = [&] {
      if (failure.failed) throw StateError("call aborted");
    };

    groups[me].arrived = true;
    groups[me].count = generated;

    std::vector<std::uint32_t> order;
    if (config_.self_first) order.push_back(me);
    for (std::uint32_t k = 1; k < P; ++k) order.push_back((me + P - k) % P);
    if (!config_.self_first) order.push_back(me);

    std::atomic<std::uint64_t> dispatch_chunk_bytes{0};
    std::atomic<std::uint64_t> process_chunk_bytes{0};
    std::atomic<std::uint64_t> process_read{0};
    std::atomic<std::uint64_t> process_written{0};
    std::vector<std::uint64_t> sent(P, 0);
    std::vector<bool> sent_filtered(P, false);

    std::vector<std::thread> threads;

    // Receivers: spool every peer's stream to a local file.
    auto recv_path = [&](std::uint32_t s) { return scratch / ("recv_s" + std::to_string(s) + ".bin"); };
    for (std::uint32_t s = 0; s < P; ++s) {
      if (s == me) continue;
      threads.push_back(failure.spawn([&, s] {
        FileWriter out(recv_path(s), File::Mode::write_truncate, &governor_, iobuf);
        std::uint64_t count = 0;
        std::optional<bool> filtered;
        while (true) {
          Frame f = transport_.recv(s);
          if (f.header.call != call) {
            throw InvariantViolation("rank " + std::to_string(s) + " sent a frame of call " +
                                     std::to_string(f.header.call) + " during call " +
                                     std::to_string(call));
          }
          if (f.header.kind == FrameKind::message) {
            if (f.header.message_bytes != message_bytes) {
              throw InvariantViolation("message size mismatch in frame from rank " +
                                       std::to_string(s));
            }
            out.write(f.payload.data(), f.payload.size());
            count += f.header.count;
            filtered = f.header.filtered();
          } else if (f.header.kind == FrameKind::control &&
                     f.control() == ControlCode::end_of_stream) {
            if (f.header.count != count) {
              throw InvariantViolation("stream from rank " + std::to_string(s) + " carried " +
                                       std::to_string(count) + " records, trailer says " +
                                       std::to_string(f.header.count));
            }
            if (!filtered) filtered = f.header.filtered();
            break;
          } else {
            throw InvariantViolation("unexpected frame kind from rank " + std::to_string(s));
          }
        }
        out.flush();
        std::lock_guard lock(mu);
        groups[s].arrived = true;
        groups[s].count = count;
        groups[s].filtered = *filtered;
        cv.notify_all();
      }));
    }

    // Senders: round-robin over peers, one stream at a time unless the
    // current peer's socket has drained.
    const auto targets = round_robin_targets(me, P);
    std::atomic<std::size_t> next_target{0};
    std::mutex helpers_mu;
    std::vector<std::thread> helpers;
    std::atomic<std::uint32_t> senders_running{0};
    const std::uint32_t max_senders = std::max<std::uint32_t>(1, config_.threads);
    std::function<void()> sender_loop;
    auto stream_to = [&](std::uint32_t j) {
      const FilterRecord& fr = m.filter(me, j);
      bool filter = config_.force_filtering.value_or(should_filter(fr.length, generated, skip_ratio));
      bool claim_filtered = filter;
      if (config_.inject_oversend) {
        filter = false;
        claim_filtered = true;
      }
      std::size_t per_frame = std::max<std::size_t>(1, config_.frame_bytes / rec);
      Buffer frame(&governor_, per_frame * rec);
      std::size_t in_frame = 0;
      std::uint64_t total = 0;
      auto flush = [&] {
        if (in_frame == 0) return;
        transport_.send(j, message_header(call, me, in_frame, message_bytes, claim_filtered),
                        {frame.data(), in_frame * rec});
        total += in_frame;
        in_frame = 0;
        if (transport_.unsent_bytes(j) == 0 && next_target < targets.size() &&
            senders_running < max_senders) {
          std::lock_guard lock(helpers_mu);
          ++senders_running;
          helpers.push_back(failure.spawn([&] { sender_loop(); }));
        }
      };
      std::optional<File> lf;
      std::optional<ArrayReader<VertexId>> list;
      std::uint64_t li = 0;
      if (filter && fr.length > 0) {
        lf.emplace(graph.file(fr.file), File::Mode::read);
        list.emplace(*lf, kIdListHeaderBytes, fr.length, &governor_, iobuf);
      }
      MessageCursor cur(self_segments(), message_bytes, &governor_, iobuf, nullptr);
      for (; cur.valid(); cur.advance()) {
        check_failed();
        if (filter) {
          while (li < fr.length && (*list)[li] < cur.id()) ++li;
          if (li == fr.length) break;
          if ((*list)[li] != cur.id()) continue;
        }
        std::memcpy(frame.data() + in_frame * rec, cur.record(), rec);
        if (++in_frame == per_frame) flush();
      }
      flush();
      FrameHeader eos;
      eos.call = call;
      eos.kind = FrameKind::control;
      eos.src = me;
      eos.flags = claim_filtered ? kFlagFiltered : 0;
      eos.count = total;
      eos.payload_len = 1;
      std::byte code = static_cast<std::byte>(ControlCode::end_of_stream);
      transport_.send(j, eos, {&code, 1});
      std::lock_guard lock(mu);
      sent[j] = total;
      sent_filtered[j] = claim_filtered;
    };
    sender_loop = [&] {
      while (!failure.failed) {
        std::size_t k = next_target++;
        if (k >= targets.size()) break;
        stream_to(targets[k]);
      }
      --senders_running;
    };
    if (!targets.empty()) {
      senders_running = 1;
      threads.push_back(failure.spawn([&] {
        sender_loop();
        while (true) {
          std::thread h;
          {
            std::lock_guard lock(helpers_mu);
            if (helpers.empty()) {
              if (senders_running == 0) break;
            } else {
              h = std::move(helpers.back());
              helpers.pop_back();
            }
          }
          if (h.joinable()) {
            h.join();
          } else {
            std::this_thread::sleep_for(std::chrono::milliseconds(1));
          }
        }
      }));
    }

    auto group_segments = [&](std::uint32_t s) {
      if (s == me) return self_segments();
      std::lock_guard lock(mu);
      return std::vector<Segment>{{recv_path(s), groups[s].count}};
    };
    auto disp_path = [&](std::uint32_t s, std::uint64_t b) {
      return scratch / ("disp_s" + std::to_string(s) + "_b" + std::to_string(b) + ".bin");
    };

    // Dispatcher: picks a strategy per source group, in processing order,
    // and performs push dispatching itself.
    threads.push_back(failure.spawn([&] {
      for (std::uint32_t s : order) {
        std::uint64_t count;
        {
          std::unique_lock lock(mu);
          cv.wait(lock, [&] { return groups[s].arrived || failure.failed; });
          check_failed();
          count = groups[s].count;
        }
        const DispatchRecord& d = m.dispatch_for(s, me);
        bool idle;
        {
          std::lock_guard lock(mu);
          idle = workers_alive > 0 && waiting == workers_alive;
        }
        DispatchStrategy strategy = config_.force_dispatch.value_or(select_dispatch_strategy(
            s, me, count, d.edge_count, idle, config_.dispatch_cost_factor));
        if (strategy == DispatchStrategy::push && count > 0 && d.edge_count > 0) {
          Representation repr = choose_read_representation(count, m.layout.range(s).size(),
                                                           d.dcsr_len, gamma, d.has_csr);
          ChunkFile cf(graph.file(repr == Representation::csr ? d.csr_file : d.dcsr_file));
          std::vector<std::optional<FileWriter>> outs(nb);
          std::size_t wbuf = std::min<std::size_t>(iobuf, 16 << 10);
          std::uint64_t cb = 0;
          MessageCursor cur(group_segments(s), message_bytes, &governor_, iobuf, nullptr);
          join_chunk_file(cf, repr, cur, &governor_, iobuf, &cb,
                          [&](VertexId, VertexId batch, const std::byte*) {
                            auto& w = outs.at(batch);
                            if (!w) w.emplace(disp_path(s, batch), File::Mode::write_truncate,
                                              &governor_, wbuf);
                            w->write(cur.record(), rec);
                          });
          for (auto& w : outs) {
            if (w) w->flush();
          }
          dispatch_chunk_bytes += cb;
        }
        std::lock_guard lock(mu);
        groups[s].strategy = strategy;
        groups[s].ready = true;
        traffic.strategies[s] = to_string(strategy);
        cv.notify_all();
      }
    }));

    // Batch workers: each batch walks the groups in order.
    std::vector<Reduction> partial(nb, zero);
    std::atomic<std::uint64_t> next_batch{0};
    auto worker = [&] {
      {
        std::lock_guard lock(mu);
        ++workers_alive;
      }
      struct Leave {
        std::mutex& mu;
        std::condition_variable& cv;
        std::uint32_t& alive;
        ~Leave() {
          std::lock_guard lock(mu);
          --alive;
          cv.notify_all();
        }
      } leave{mu, cv, workers_alive};
      while (!failure.failed) {
        std::uint64_t b = next_batch++;
        if (b >= nb) break;
        VertexRange r = store_->batch_range(b);
        detail::BatchContext ctx;
        ctx.arrays.resize(slot_names_.size());
        std::vector<Buffer> buffers;
        bool loaded = false;
        std::uint64_t rd = 0, wr = 0, cb = 0;
        for (std::uint32_t s : order) {
          Group g;
          {
            std::unique_lock lock(mu);
            ++waiting;
            cv.notify_all();
            cv.wait(lock, [&] { return groups[s].ready || failure.failed; });
            --waiting;
            check_failed();
            g = groups[s];
          }
          if (g.count == 0) continue;
          const ChunkRecord& chunk = m.chunk(s, me, b);
          if (chunk.edge_count == 0) continue;
          const DispatchRecord& d = m.dispatch_for(s, me);
          std::vector<Segment> segs;
          std::uint64_t msgs = 0;
          if (g.strategy == DispatchStrategy::push) {
            msgs = record_count(disp_path(s, b), rec);
            segs.push_back({disp_path(s, b), msgs});
          } else {
            PullListFile pull(graph.file(d.pull_file));
            std::uint64_t list = pull.list_size(b);
            if (list == 0) continue;
            if (g.strategy == DispatchStrategy::pull) {
              ArrayReader<VertexId> ids(pull.file(), pull.list_begin(b), list, &governor_, iobuf,
                                        &cb);
              FileWriter out(disp_path(s, b), File::Mode::write_truncate, &governor_, iobuf);
              MessageCursor cur(group_segments(s), message_bytes, &governor_, iobuf, nullptr);
              std::uint64_t li = 0;
              for (; cur.valid() && li < list; cur.advance()) {
                while (li < list && ids[li] < cur.id()) ++li;
                if (li < list && ids[li] == cur.id()) {
                  out.write(cur.record(), rec);
                  ++msgs;
                }
              }
              out.flush();
              segs.push_back({disp_path(s, b), msgs});
            } else {
              segs = group_segments(s);
              msgs = std::min(list, g.count);
            }
          }
          if (msgs == 0) continue;
          if (!loaded) {
            for (const auto& u : slot_uses) {
              if (ctx.arrays[u.slot].data != nullptr) {
                ctx.arrays[u.slot].writable = ctx.arrays[u.slot].writable || u.write;
                continue;
              }
              const std::string& name = slot_name(u.slot);
              ArrayShape shape = store_->shape(name);
              auto& buf = buffers.emplace_back(&governor_, shape.block_bytes(r.size()));
              store_->read_batch(name, b, buf.span(), &rd);
              ctx.arrays[u.slot] = {buf.data(), r, shape.bitmap, u.write};
            }
            loaded = true;
          }
          Representation repr = choose_read_representation(msgs, m.layout.range(s).size(),
                                                           chunk.dcsr_len, gamma, chunk.has_csr);
          ChunkFile cf(graph.file(repr == Representation::csr ? chunk.csr_file : chunk.dcsr_file));
          MessageCursor cur(std::move(segs), message_bytes, &governor_, iobuf, nullptr);
          ContextGuard guard(&ctx);
          join_chunk_file(cf, repr, cur, &governor_, iobuf, &cb,
                          [&](VertexId src, VertexId dst, const std::byte* data) {
                            slot(cur.payload(), src, dst, data, partial[b]);
                          });
        }
        if (loaded) {
          for (std::uint32_t sl = 0; sl < ctx.arrays.size(); ++sl) {
            const auto& a = ctx.arrays[sl];
            if (a.data == nullptr || !a.writable) continue;
            const std::string& name = slot_name(sl);
            store_->write_batch(name, b, {a.data, store_->shape(name).block_bytes(r.size())}, &wr);
          }
        }
        process_read += rd;
        process_written += wr;
        process_chunk_bytes += cb;
      }
    };
    std::uint32_t nworkers = static_cast<std::uint32_t>(
        std::min<std::uint64_t>(std::max<std::uint32_t>(config_.threads, 1), std::max<std::uint64_t>(nb, 1)));
    for (std::uint32_t k = 0; k < nworkers; ++k) threads.push_back(failure.spawn(worker));
    for (auto& th : threads) th.join();
    if (failure.first) std::rethrow_exception(failure.first);
    queue_lease.release();

    Reduction local = zero;
    for (const auto& p : partial) local += p;

    for (std::uint32_t s = 0; s < P; ++s) {
      if (s == me) continue;
      traffic.sent[s] = sent[s];
      traffic.sent_filtered[s] = sent_filtered[s];
      traffic.recv[s] = groups[s].count;
      traffic.recv_filtered[s] = groups[s].filtered;
    }
    auto row = [&](const char* phase) {
      PhaseRow r;
      r.phase = phase;
      r.sent.assign(P, 0);
      r.recv.assign(P, 0);
      return r;
    };
    PhaseRow gen = row("generate");
    gen.msgs_generated = generated;
    gen.varray_bytes_read = gen_read;
    PhaseRow pass = row("pass");
    pass.sent = traffic.sent;
    PhaseRow disp = row("dispatch");
    disp.recv = traffic.recv;
    disp.chunk_bytes_read = dispatch_chunk_bytes;
    PhaseRow proc = row("process");
    proc.chunk_bytes_read = process_chunk_bytes;
    proc.varray_bytes_read = process_read;
    proc.varray_bytes_written = process_written;
    traffic.phases = {gen, pass, disp, proc};

    auto violations = check_traffic_bounds(traffic, TrafficBounds::from_manifest(m, me));
    record_traffic(traffic);
    if (config_.strict && !violations.empty()) {
      std::string text = "traffic bound violated: " + violations.front();
      for (std::size_t k = 1; k < violations.size(); ++k) text += "; " + violations[k];
      throw InvariantViolation(text);
    }
    fs::remove_all(scratch);
    return commit_call(CallKind::edges, local);
  } catch (...) {
    fail_call();
    throw;
  }
}

void Engine::read_local_bytes(const std::string& name, std::byte* out) const {
  ArrayShape shape = store_->shape(name);
  if (shape.bitmap) throw PreconditionError("use the bitmap overload for '" + name + "'");
  std::uint64_t at = 0;
  for (std::uint64_t b = 0; b < store_->num_batches(); ++b) {
    VertexRange r = store_->batch_range(b);
    std::uint64_t len = shape.block_bytes(r.size());
    store_->read_batch(name, b, {out + at, len});
    at += len;
  }
}

std::vector<bool> Engine::read_local(const Bitmap& bitmap) const {
  std::vector<bool> out;
  out.reserve(partition_.size());
  for (std::uint64_t b = 0; b < store_->num_batches(); ++b) {
    VertexRange r = store_->batch_range(b);
    std::vector<std::byte> buf((r.size() + 7) / 8);
    store_->read_batch(bitmap.name(), b, buf);
    for (VertexId k = 0; k < r.size(); ++k) {
      out.push_back(((std::to_integer<unsigned>(buf[k / 8]) >> (k % 8)) & 1u) != 0);
    }
  }
  return out;
}

void Engine::export_array(const std::string& name, const fs::path& path) const {
  ArrayShape shape = store_->shape(name);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  FileWriter w(path, File::Mode::write_truncate, nullptr, 1 << 16);
  for (std::uint64_t b = 0; b < store_->num_batches(); ++b) {
    VertexRange r = store_->batch_range(b);
    std::vector<std::byte> buf(shape.block_bytes(r.size()));
    store_->read_batch(name, b, buf);
    if (shape.bitmap) {
      for (VertexId k = 0; k < r.size(); ++k) {
        w.put<std::uint8_t>((std::to_integer<unsigned>(buf[k / 8]) >> (k % 8)) & 1u);
      }
    } else {
      w.write(buf.data(), buf.size());
    }
  }
  w.flush();
}

}  // namespace dfog
