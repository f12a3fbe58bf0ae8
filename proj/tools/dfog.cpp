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

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <charconv>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "dfog/cluster.hpp"
#include "dfog/edge_file.hpp"
#include "dfog/io.hpp"
#include "dfog/oracle.hpp"
#include "dfog/preprocess.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace dfog;

namespace {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kNoManifest = 3,
  kClusterMismatch = 4,
  kPeerLost = 5,
  kBudget = 6,
  kStrict = 7,
  kVerifyFailed = 8,
  kOracleGuard = 9,
  kRecovery = 10,
};

class UsageError : public Error {
 public:
  using Error::Error;
};

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ManifestMissing*>(&e)) return kNoManifest;
  if (dynamic_cast<const ClusterMismatch*>(&e)) return kClusterMismatch;
  if (dynamic_cast<const PeerLost*>(&e)) return kPeerLost;
  if (dynamic_cast<const BudgetExceeded*>(&e)) return kBudget;
  if (dynamic_cast<const InvariantViolation*>(&e)) return kStrict;
  if (dynamic_cast<const RecoveryError*>(&e)) return kRecovery;
  if (dynamic_cast<const UsageError*>(&e)) return kUsage;
  if (dynamic_cast<const ConfigError*>(&e)) return kUsage;
  if (dynamic_cast<const PreconditionError*>(&e)) return kUsage;
  return kInternal;
}

// ---------------------------------------------------------------------------
// Configuration layering: command line, then DFOG_* environment, then the
// JSON file given by --config.

std::string env_name(const CLI::Option* opt) {
  std::string name = "DFOG_" + opt->get_single_name();
  for (char& c : name) c = c == '-' ? '_' : static_cast<char>(std::toupper(c));
  return name;
}

void add_env_names(CLI::App* sub) {
  for (CLI::Option* opt : sub->get_options()) {
    if (opt->get_lnames().empty() || opt->get_single_name() == "help") continue;
    opt->envname(env_name(opt));
  }
}

const json* find_key(const json& obj, std::string name) {
  if (!obj.is_object()) return nullptr;
  if (auto it = obj.find(name); it != obj.end()) return &*it;
  for (char& c : name) c = c == '-' ? '_' : c;
  if (auto it = obj.find(name); it != obj.end()) return &*it;
  return nullptr;
}

void apply_config_file(CLI::App* sub, const json& config) {
  const json* section = find_key(config, sub->get_name());
  for (CLI::Option* opt : sub->get_options()) {
    if (opt->count() > 0 || opt->get_lnames().empty()) continue;
    const std::string name = opt->get_single_name();
    const json* value = section ? find_key(*section, name) : nullptr;
    if (value == nullptr) value = find_key(config, name);
    if (value == nullptr || value->is_object()) continue;
    if (value->is_boolean() && !value->get<bool>()) continue;
    opt->add_result(value->is_string() ? value->get<std::string>() : value->dump());
    opt->run_callback();
  }
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config file " + path + ": " + e.what());
  }
}

void require(CLI::App* sub, std::initializer_list<const char*> names) {
  for (const char* n : names) {
    if (sub->get_option(n)->count() == 0) {
      throw UsageError(std::string(n) + " is required (flag, DFOG_ environment variable or config file)");
    }
  }
}

// ---------------------------------------------------------------------------
// sort / preprocess

struct SortArgs {
  std::string input, output, temp;
  std::uint32_t payload_bytes = 0;
  std::uint64_t memory_budget = 256ull << 20;
  bool swap = false;
  bool text = false;
};

// Text edges: "src dst [weight]" per line, '#' comments.
void convert_text(const fs::path& in_path, const fs::path& out_path, std::uint32_t payload_bytes) {
  if (payload_bytes != 0 && payload_bytes != 4) {
    throw UsageError("text input supports no payload or a 4-byte float weight");
  }
  std::ifstream in(in_path);
  if (!in) throw IoError("cannot open " + in_path.string());
  FileWriter out(out_path, File::Mode::write_truncate, nullptr, 1 << 20);
  std::string line;
  std::uint64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream s(line);
    std::uint64_t src, dst;
    if (!(s >> src)) continue;
    if (!(s >> dst)) throw FormatError(in_path.string() + ":" + std::to_string(lineno) + ": missing destination");
    out.put<std::uint64_t>(src);
    out.put<std::uint64_t>(dst);
    if (payload_bytes == 4) {
      float w = 1.0f;
      s >> w;
      out.write(reinterpret_cast<const std::byte*>(&w), sizeof w);
    }
  }
  out.flush();
}

int cmd_sort(const SortArgs& a) {
  fs::path temp = a.temp.empty() ? fs::path(a.output).parent_path() / ".dfog_sort_tmp" : fs::path(a.temp);
  fs::path input = a.input;
  fs::path converted;
  if (a.text) {
    fs::create_directories(temp);
    converted = temp / "text_edges.bin";
    convert_text(a.input, converted, a.payload_bytes);
    input = converted;
  }
  external_sort(input, a.output, a.payload_bytes, a.memory_budget, temp, a.swap);
  fs::remove_all(temp);
  std::cout << "sorted " << fs::file_size(a.output) / (16 + a.payload_bytes) << " edges into "
            << a.output << "\n";
  return kOk;
}

struct PreprocessArgs {
  PreprocessOptions opts;
  std::string input, out, mode = "fully";
  std::uint64_t alpha = 0;
  std::uint64_t batch = 0;
  bool unsorted = false;
};

int cmd_preprocess(PreprocessArgs a) {
  if (a.mode == "fully") a.opts.mode = OocMode::fully;
  else if (a.mode == "semi") a.opts.mode = OocMode::semi;
  else throw UsageError("--mode must be fully or semi");
  if (a.alpha > 0) a.opts.alpha = a.alpha;
  if (a.batch > 0) a.opts.batch_size = normalize_batch_size(a.batch);
  Manifest m = a.unsorted ? build_graph(fs::path(a.input), a.out, a.opts) : [&] {
    a.opts.input = a.input;
    a.opts.out = a.out;
    return preprocess(a.opts);
  }();
  std::cout << "preprocessed " << m.meta.num_vertices << " vertices, " << m.meta.num_edges
            << " edges into " << m.meta.num_partitions << " partitions (batch size "
            << m.batching.batch_size() << ", alpha " << m.meta.alpha << ")\n";
  for (std::uint32_t p = 0; p < m.meta.num_partitions; ++p) {
    auto r = m.layout.range(p);
    std::cout << "  node " << p << ": vertices [" << r.lo << ", " << r.hi << "), "
              << m.num_batches(p) << " batches, " << m.incoming_edges[p] << " incoming, "
              << m.outgoing_edges[p] << " outgoing edges\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// run / recover / bench

struct RunArgs {
  std::string graph, algo, storage, output, metrics, hostfile, force_dispatch, force_filtering,
      crash_at;
  std::uint32_t iterations = 5;
  double damping = 0.85;
  std::uint64_t source = 0;
  std::uint32_t local_nodes = 0;
  std::uint32_t rank = 0;
  std::uint64_t memory_budget = 256ull << 20;
  std::uint32_t threads = 1;
  bool no_checkpoint = false;
  std::uint32_t keep = 2;
  bool no_fsync = false;
  bool strict = false;
  bool testing = false;
  bool inject_oversend = false;
  bool self_first = false;
  std::uint64_t frame_bytes = 64 << 10;
  std::uint32_t queue_depth = 8;
  double cost_factor = 4.0;
  std::optional<double> skip_ratio;
  std::optional<double> gamma;
  double connect_timeout = 30;
  double io_timeout = 600;
  std::uint32_t repeat = 3;
};

void add_run_options(CLI::App* sub, RunArgs& a, bool bench) {
  sub->add_option("--graph", a.graph, "Preprocessed graph directory");
  sub->add_option("--algo", a.algo, "Algorithm: pr, bfs, wcc or sssp");
  sub->add_option("--iters", a.iterations, "PageRank iterations")->capture_default_str();
  sub->add_option("--damping", a.damping, "PageRank damping factor")->capture_default_str();
  sub->add_option("--source", a.source, "BFS/SSSP source vertex")->capture_default_str();
  sub->add_option("--local-nodes", a.local_nodes, "Spawn this many loopback node processes");
  sub->add_option("--hostfile", a.hostfile, "One host:port per line, line number = rank");
  sub->add_option("--rank", a.rank, "This process's rank in the hostfile")->capture_default_str();
  sub->add_option("--memory-budget", a.memory_budget, "Engine memory cap per node (e.g. 64M)")
      ->transform(CLI::AsSizeValue(false))->capture_default_str();
  sub->add_option("--threads", a.threads, "Worker threads per node")->capture_default_str();
  sub->add_flag("--no-checkpoint", a.no_checkpoint, "Disable checkpoints and the journal");
  sub->add_option("--checkpoint-keep", a.keep, "Checkpoints retained (K)")->capture_default_str();
  sub->add_flag("--no-fsync", a.no_fsync, "Skip fsync on commits (tests only)");
  sub->add_option("--storage", a.storage, "Vertex storage root; node r uses <storage>/node<r>");
  sub->add_option("--output", a.output, "Output directory (default <storage>/output)");
  sub->add_option("--metrics", a.metrics, "Per-phase metrics CSV");
  sub->add_flag("--strict", a.strict, "Fail on any traffic-bound violation");
  sub->add_option("--frame-bytes", a.frame_bytes, "Message frame size")
      ->transform(CLI::AsSizeValue(false))->capture_default_str();
  sub->add_option("--queue-depth", a.queue_depth, "Frames buffered per peer")->capture_default_str();
  sub->add_option("--cost-factor", a.cost_factor, "Dispatch cost factor c")->capture_default_str();
  sub->add_option("--skip-ratio", a.skip_ratio, "Filtering skip ratio (default: manifest)");
  sub->add_option("--gamma", a.gamma, "Random/sequential read cost ratio (default: manifest)");
  sub->add_flag("--self-first", a.self_first, "Process local messages before remote ones");
  sub->add_option("--connect-timeout", a.connect_timeout, "Seconds to wait for peers")
      ->capture_default_str();
  sub->add_option("--io-timeout", a.io_timeout, "Seconds before a silent peer is declared lost")
      ->capture_default_str();
  sub->add_flag("--testing", a.testing, "Allow the test overrides below");
  sub->add_option("--force-dispatch", a.force_dispatch, "[testing] push, pull or none");
  sub->add_option("--force-filtering", a.force_filtering, "[testing] on or off");
  sub->add_flag("--inject-oversend", a.inject_oversend,
                "[testing] send unfiltered streams flagged as filtered");
  sub->add_option("--crash-at", a.crash_at, "[testing] rank:call:point, point = start|mid|prepared|committed");
  if (bench) sub->add_option("--repeat", a.repeat, "Timed runs")->capture_default_str();
}

CrashPlan parse_crash(const std::string& text) {
  CrashPlan c;
  auto a = text.find(':');
  auto b = text.find(':', a == std::string::npos ? a : a + 1);
  if (a == std::string::npos || b == std::string::npos) {
    throw UsageError("--crash-at expects rank:call:point");
  }
  try {
    c.rank = static_cast<std::uint32_t>(std::stoul(text.substr(0, a)));
    c.call = std::stoull(text.substr(a + 1, b - a - 1));
  } catch (const std::exception&) {
    throw UsageError("--crash-at expects numeric rank and call");
  }
  std::string p = text.substr(b + 1);
  if (p == "start") c.point = CrashPlan::Point::start;
  else if (p == "mid") c.point = CrashPlan::Point::mid;
  else if (p == "prepared") c.point = CrashPlan::Point::prepared;
  else if (p == "committed") c.point = CrashPlan::Point::committed;
  else throw UsageError("unknown crash point '" + p + "'");
  return c;
}

struct Plan {
  AlgorithmParams params;
  EngineConfig engine;
  fs::path graph, storage, output, metrics;
};

Plan make_plan(const RunArgs& a, bool recover) {
  Plan p;
  p.params.algorithm = parse_algorithm(a.algo);
  p.params.iterations = a.iterations;
  p.params.damping = a.damping;
  p.params.source = a.source;
  p.graph = a.graph;
  p.storage = a.storage;
  p.output = a.output.empty() ? p.storage / "output" : fs::path(a.output);
  p.metrics = a.metrics;
  EngineConfig& c = p.engine;
  c.memory_budget_bytes = a.memory_budget;
  c.threads = a.threads;
  c.dispatch_cost_factor = a.cost_factor;
  c.filter_skip_ratio = a.skip_ratio;
  c.gamma = a.gamma;
  c.checkpointing = !a.no_checkpoint;
  c.checkpoints_keep = a.keep;
  c.fsync = !a.no_fsync;
  c.pipeline_queue_depth = a.queue_depth;
  c.frame_bytes = a.frame_bytes;
  c.self_first = a.self_first;
  c.strict = a.strict;
  c.recover = recover;
  bool overrides = !a.force_dispatch.empty() || !a.force_filtering.empty() || a.inject_oversend ||
                   !a.crash_at.empty();
  if (overrides && !a.testing) {
    throw UsageError("--force-dispatch, --force-filtering, --inject-oversend and --crash-at need --testing");
  }
  if (!a.force_dispatch.empty()) c.force_dispatch = parse_dispatch_strategy(a.force_dispatch);
  if (a.force_filtering == "on") c.force_filtering = true;
  else if (a.force_filtering == "off") c.force_filtering = false;
  else if (!a.force_filtering.empty()) throw UsageError("--force-filtering must be on or off");
  c.inject_oversend = a.inject_oversend;
  if (!a.crash_at.empty()) c.crash = parse_crash(a.crash_at);
  return p;
}

json format_calls(const std::optional<std::uint64_t>& resumed) {
  return resumed ? json(*resumed) : json(nullptr);
}

int run_one(const Plan& plan, const ClusterConfig& cluster, const fs::path& metrics) {
  const std::uint32_t rank = cluster.rank;
  try {
    EngineConfig c = plan.engine;
    c.storage_dir = plan.storage / ("node" + std::to_string(rank));
    c.metrics_path = metrics;
    NodeResult r = run_node(cluster, c, plan.graph, plan.params, plan.output);
    json node = {{"rank", rank},
                 {"calls", r.calls},
                 {"peak_memory_bytes", r.peak_memory},
                 {"memory_budget_bytes", c.memory_budget_bytes},
                 {"resumed_through", format_calls(r.resumed_through)}};
    std::ofstream(plan.output / ("node" + std::to_string(rank) + ".json")) << node.dump(2) << "\n";
    if (rank == 0) {
      const AlgorithmSpec& spec = algorithm_spec(plan.params.algorithm);
      json run = {{"algorithm", spec.name},
                  {"iterations", plan.params.iterations},
                  {"damping", plan.params.damping},
                  {"source", plan.params.source},
                  {"array", r.array},
                  {"type", to_string(spec.output_type)},
                  {"nodes", cluster.size()},
                  {"graph", fs::absolute(plan.graph).string()},
                  {"calls", r.calls}};
      std::ofstream(plan.output / "run.json") << run.dump(2) << "\n";
    }
    return kOk;
  } catch (const std::exception& e) {
    std::cerr << "dfog[rank " << rank << "]: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

void merge_metrics(const fs::path& target, std::uint32_t nodes) {
  bool fresh = !fs::exists(target);
  std::ofstream out(target, std::ios::app);
  for (std::uint32_t r = 0; r < nodes; ++r) {
    fs::path part = target.string() + ".node" + std::to_string(r);
    std::ifstream in(part);
    if (!in) continue;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (first) {
        first = false;
        if (fresh) out << line << "\n";
        fresh = false;
        continue;
      }
      out << line << "\n";
    }
    in.close();
    fs::remove(part);
  }
}

// Forks one process per node over loopback and waits for all of them. The
// reported status prefers a root cause over "peer lost" in the survivors.
int launch_local(const Plan& plan, std::uint32_t nodes, const RunArgs& a) {
  if (nodes < 1) throw UsageError("--local-nodes must be >= 1");
  fs::create_directories(plan.storage);
  fs::create_directories(plan.output);
  ClusterConfig cluster;
  cluster.endpoints = allocate_local_endpoints(nodes);
  cluster.connect_timeout = std::chrono::milliseconds(static_cast<long>(a.connect_timeout * 1000));
  cluster.io_timeout = std::chrono::milliseconds(static_cast<long>(a.io_timeout * 1000));
  cluster.queue_depth = a.queue_depth;
  write_hostfile(plan.storage / "hostfile", cluster.endpoints);
  std::cout.flush();
  std::cerr.flush();
  std::vector<pid_t> pids;
  for (std::uint32_t r = 0; r < nodes; ++r) {
    pid_t pid = ::fork();
    if (pid < 0) throw IoError("fork failed");
    if (pid == 0) {
      ClusterConfig mine = cluster;
      mine.rank = r;
      fs::path metrics = plan.metrics.empty() ? fs::path() : fs::path(plan.metrics.string() + ".node" + std::to_string(r));
      int code = run_one(plan, mine, metrics);
      std::cout.flush();
      std::cerr.flush();
      ::_exit(code);
    }
    pids.push_back(pid);
  }
  int result = kOk;
  for (pid_t pid : pids) {
    int status = 0;
    ::waitpid(pid, &status, 0);
    int code = WIFEXITED(status) ? WEXITSTATUS(status) : kInternal;
    if (code != kOk && (result == kOk || result == kPeerLost)) result = code;
  }
  if (!plan.metrics.empty()) merge_metrics(plan.metrics, nodes);
  return result;
}

int cmd_run(const RunArgs& a, bool recover) {
  Plan plan = make_plan(a, recover);
  if (a.local_nodes > 0) {
    if (!a.hostfile.empty()) throw UsageError("give either --local-nodes or --hostfile, not both");
    int code = launch_local(plan, a.local_nodes, a);
    if (code == kOk) {
      std::cout << (recover ? "recovered " : "ran ") << a.algo << " on " << a.local_nodes
                << " nodes; outputs in " << plan.output << "\n";
    }
    return code;
  }
  if (a.hostfile.empty()) throw UsageError("give --local-nodes P or --hostfile FILE");
  ClusterConfig cluster;
  cluster.endpoints = read_hostfile(a.hostfile);
  cluster.rank = a.rank;
  cluster.connect_timeout = std::chrono::milliseconds(static_cast<long>(a.connect_timeout * 1000));
  cluster.io_timeout = std::chrono::milliseconds(static_cast<long>(a.io_timeout * 1000));
  cluster.queue_depth = a.queue_depth;
  cluster.validate();
  fs::create_directories(plan.output);
  return run_one(plan, cluster, plan.metrics);
}

int cmd_bench(RunArgs a) {
  if (a.local_nodes == 0) throw UsageError("bench needs --local-nodes");
  fs::path root = a.storage;
  std::vector<double> times;
  for (std::uint32_t k = 0; k < a.repeat; ++k) {
    RunArgs one = a;
    one.storage = (root / ("bench" + std::to_string(k))).string();
    Plan plan = make_plan(one, false);
    auto t0 = std::chrono::steady_clock::now();
    int code = launch_local(plan, a.local_nodes, one);
    double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (code != kOk) return code;
    fs::remove_all(one.storage);
    times.push_back(s);
    std::cout << "run " << k << ": " << s << " s\n";
  }
  json summary = {{"algorithm", a.algo},
                  {"nodes", a.local_nodes},
                  {"threads", a.threads},
                  {"memory_budget_bytes", a.memory_budget},
                  {"seconds", times},
                  {"best_seconds", *std::min_element(times.begin(), times.end())}};
  std::cout << summary.dump() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// export / verify

json load_run(const fs::path& output) {
  std::ifstream in(output / "run.json");
  if (!in) throw UsageError("no run.json in " + output.string() + "; run an algorithm first");
  return json::parse(in);
}

OutputType parse_output_type(const std::string& t) {
  for (OutputType o : {OutputType::f64, OutputType::u32, OutputType::u64, OutputType::f32}) {
    if (t == to_string(o)) return o;
  }
  throw FormatError("unknown output type '" + t + "'");
}

std::string format_value(const std::byte* p, OutputType t) {
  char buf[64];
  std::to_chars_result r{};
  switch (t) {
    case OutputType::f64: {
      double v;
      std::memcpy(&v, p, sizeof v);
      r = std::to_chars(buf, buf + sizeof buf, v);
      break;
    }
    case OutputType::f32: {
      float v;
      std::memcpy(&v, p, sizeof v);
      r = std::to_chars(buf, buf + sizeof buf, v);
      break;
    }
    case OutputType::u32: {
      std::uint32_t v;
      std::memcpy(&v, p, sizeof v);
      r = std::to_chars(buf, buf + sizeof buf, v);
      break;
    }
    case OutputType::u64: {
      std::uint64_t v;
      std::memcpy(&v, p, sizeof v);
      r = std::to_chars(buf, buf + sizeof buf, v);
      break;
    }
  }
  return std::string(buf, r.ptr);
}

struct ExportArgs {
  std::string output, array, format = "text", to;
};

int cmd_export(const ExportArgs& a) {
  json run = load_run(a.output);
  std::string array = a.array.empty() ? run["array"].get<std::string>() : a.array;
  if (array != run["array"].get<std::string>()) {
    throw UsageError("only the run's output array '" + run["array"].get<std::string>() +
                     "' is exported");
  }
  auto type = parse_output_type(run["type"].get<std::string>());
  auto bytes = collect_output(a.output, array, run["nodes"].get<std::uint32_t>());
  std::ofstream file;
  if (!a.to.empty()) {
    file.open(a.to, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot write " + a.to);
  }
  std::ostream& out = a.to.empty() ? std::cout : file;
  if (a.format == "binary") {
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  } else if (a.format == "text") {
    std::size_t eb = element_bytes(type);
    for (std::size_t v = 0; v * eb < bytes.size(); ++v) {
      out << v << '\t' << format_value(bytes.data() + v * eb, type) << '\n';
    }
  } else {
    throw UsageError("--format must be text or binary");
  }
  return kOk;
}

struct VerifyArgs {
  std::string graph, output;
  std::optional<std::uint32_t> iterations;
  std::optional<double> damping;
  std::optional<std::uint64_t> source;
  double tolerance = 1e-9;
};

int cmd_verify(const VerifyArgs& a) {
  json run = load_run(a.output);
  fs::path graph = a.graph.empty() ? fs::path(run["graph"].get<std::string>()) : fs::path(a.graph);
  Manifest m = Manifest::load(graph);
  if (m.meta.num_edges > oracle::kMaxEdges) {
    std::cerr << "verify: the graph has " << m.meta.num_edges
              << " edges, above the in-memory oracle limit of " << oracle::kMaxEdges
              << ". Verify a smaller graph of the same shape instead.\n";
    return kOracleGuard;
  }
  AlgorithmParams p;
  p.algorithm = parse_algorithm(run["algorithm"].get<std::string>());
  p.iterations = run["iterations"].get<std::uint32_t>();
  p.damping = run["damping"].get<double>();
  p.source = run["source"].get<std::uint64_t>();
  std::string mismatch;
  if (a.iterations && *a.iterations != p.iterations) {
    mismatch = "the run used " + std::to_string(p.iterations) + " iterations but " +
               std::to_string(*a.iterations) + " were requested";
    p.iterations = *a.iterations;
  }
  if (a.damping && *a.damping != p.damping) {
    if (!mismatch.empty()) mismatch += "; ";
    mismatch += "the run used damping " + std::to_string(p.damping) + " but " +
                std::to_string(*a.damping) + " was requested";
    p.damping = *a.damping;
  }
  if (a.source && *a.source != p.source) {
    if (!mismatch.empty()) mismatch += "; ";
    mismatch += "the run used source " + std::to_string(p.source) + " but " +
                std::to_string(*a.source) + " was requested";
    p.source = *a.source;
  }
  EdgeList edges = decode_all_chunks(graph, m);
  auto bytes = collect_output(a.output, run["array"].get<std::string>(), run["nodes"].get<std::uint32_t>());
  oracle::Report r = oracle::verify(m.meta.num_vertices, edges, p, bytes, a.tolerance);
  const char* name = algorithm_spec(p.algorithm).name;
  if (r.pass) {
    std::cout << "PASS " << name << ": " << r.checked << " vertices match the oracle\n";
    return kOk;
  }
  std::cout << "FAIL " << name << ": ";
  if (r.failed > 0) std::cout << r.failed << " of " << r.checked << " vertices differ";
  if (r.failed > 0 && !r.note.empty()) std::cout << "; ";
  std::cout << r.note << "\n";
  if (!mismatch.empty()) std::cout << "  " << mismatch << "\n";
  for (const auto& mm : r.mismatches) {
    std::cout << "  vertex " << mm.vertex << ": expected " << mm.expected << ", got " << mm.actual
              << "\n";
  }
  return kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dfog: distributed fully-out-of-core graph processing"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (flags > DFOG_* env > file)")
      ->envname("DFOG_CONFIG");

  SortArgs sort_args;
  auto* sort = app.add_subcommand("sort", "Sort a binary (or --text) edge file by (src, dst)");
  sort->add_option("--input", sort_args.input, "Edge file");
  sort->add_option("--output", sort_args.output, "Sorted binary edge file");
  sort->add_option("--payload-bytes", sort_args.payload_bytes, "Bytes of data per edge")->capture_default_str();
  sort->add_option("--memory-budget", sort_args.memory_budget, "Sort memory")
      ->transform(CLI::AsSizeValue(false))->capture_default_str();
  sort->add_option("--temp", sort_args.temp, "Spill directory");
  sort->add_flag("--swap", sort_args.swap, "Swap endpoints (reverse every edge)");
  sort->add_flag("--text", sort_args.text, "Input is text: src dst [weight] per line");

  PreprocessArgs pp;
  auto* prep = app.add_subcommand("preprocess", "Partition, chunk and index a sorted edge file");
  prep->add_option("--input", pp.input, "Binary edge file sorted by (src, dst)");
  prep->add_option("--out", pp.out, "Graph directory to create");
  prep->add_option("--vertices", pp.opts.num_vertices, "Number of vertices |V|");
  prep->add_option("--payload-bytes", pp.opts.payload_bytes, "Bytes of data per edge")->capture_default_str();
  prep->add_option("--nodes,--partitions", pp.opts.partitions, "Number of nodes P")->capture_default_str();
  prep->add_option("--alpha", pp.alpha, "Vertex weight constant (default 2P-1)");
  prep->add_option("--batch-size", pp.batch, "Batch size, rounded down to a multiple of 64");
  prep->add_option("--mode", pp.mode, "fully or semi (out-of-core sizing rule)")->capture_default_str();
  prep->add_option("--memory-budget", pp.opts.memory_budget_bytes, "Per-node memory")
      ->transform(CLI::AsSizeValue(false))->capture_default_str();
  prep->add_option("--threads", pp.opts.threads, "Worker threads per node")->capture_default_str();
  prep->add_option("--vertex-bytes", pp.opts.vertex_record_bytes, "Expected vertex record size")
      ->capture_default_str();
  prep->add_option("--csr-inflate-ratio,--csr-ratio", pp.opts.csr_inflate_ratio, "Build CSR when |V_src|/|E| <= ratio")
      ->capture_default_str();
  prep->add_option("--gamma", pp.opts.gamma, "Random/sequential read cost ratio")->capture_default_str();
  prep->add_option("--skip-ratio", pp.opts.filter_skip_ratio, "Filtering skip ratio")->capture_default_str();
  prep->add_flag("--reversed", pp.opts.reversed, "Also build the reversed graph");
  prep->add_flag("--unsorted", pp.unsorted, "Sort the input first");

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run an algorithm");
  add_run_options(run, run_args, false);
  RunArgs recover_args;
  auto* recover = app.add_subcommand("recover", "Resume a crashed run from its last journaled call");
  add_run_options(recover, recover_args, false);
  RunArgs bench_args;
  auto* bench = app.add_subcommand("bench", "Time repeated runs");
  add_run_options(bench, bench_args, true);

  ExportArgs ex;
  auto* exp = app.add_subcommand("export", "Print a run's output array");
  exp->add_option("--output", ex.output, "Run output directory");
  exp->add_option("--array", ex.array, "Array name (default: the run's output)");
  exp->add_option("--format", ex.format, "text (vertex_id<TAB>value) or binary")->capture_default_str();
  exp->add_option("--to", ex.to, "File to write (default stdout)");

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "Check a run's output against the in-memory oracle");
  verify->add_option("--graph", va.graph, "Graph directory (default: the run's)");
  verify->add_option("--output", va.output, "Run output directory");
  verify->add_option("--iters", va.iterations, "PageRank iterations to verify against");
  verify->add_option("--damping", va.damping, "PageRank damping to verify against");
  verify->add_option("--source", va.source, "Source vertex to verify against");
  verify->add_option("--tolerance", va.tolerance, "Relative PageRank tolerance")->capture_default_str();

  for (auto* sub : {sort, prep, run, recover, bench, exp, verify}) add_env_names(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  try {
    json config = load_config(config_path);
    CLI::App* sub = app.get_subcommands().front();
    apply_config_file(sub, config);
    if (sub == sort) {
      require(sort, {"--input", "--output"});
      return cmd_sort(sort_args);
    }
    if (sub == prep) {
      require(prep, {"--input", "--out", "--vertices"});
      return cmd_preprocess(pp);
    }
    if (sub == run || sub == recover || sub == bench) {
      require(sub, {"--graph", "--algo", "--storage"});
      if (sub == run) return cmd_run(run_args, false);
      if (sub == recover) return cmd_run(recover_args, true);
      return cmd_bench(bench_args);
    }
    if (sub == exp) {
      require(exp, {"--output"});
      return cmd_export(ex);
    }
    require(verify, {"--output"});
    return cmd_verify(va);
  } catch (const std::exception& e) {
    std::cerr << "dfog: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (...) {
    return kInternal;
  }
}
