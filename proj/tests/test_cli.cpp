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

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "dfog/io.hpp"
#include "support.hpp"

using dfog::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

// Runs the dfog binary with `args` inside `cwd`, capturing stdout and stderr.
Result cli(const fs::path& cwd, const std::string& args, const std::string& env = "") {
  std::string cmd = "cd '" + cwd.string() + "' && " + env + " '" DFOG_BIN "' " + args + " 2>&1";
  Result r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

// Writes G7 as text, sorts and preprocesses it for two nodes into dir/g.
void prepare_g7(const TempDir& dir) {
  write_text(dir / "g7.txt", "0 1\n0 2\n1 3\n2 3\n3 4\n4 5\n5 6\n6 0\n2 5\n");
  REQUIRE(cli(dir.path(), "sort --text --input g7.txt --output g7.bin").code == 0);
  auto r = cli(dir.path(), "preprocess --input g7.bin --out g --vertices 7 --partitions 2");
  REQUIRE(r.code == 0);
}

void write_weighted_g7(const TempDir& dir) {
  write_text(dir / "w.txt", "0 1 1\n0 2 4\n1 3 2\n2 3 1\n3 4 3\n4 5 1\n5 6 2\n6 0 1\n2 5 7\n");
  REQUIRE(cli(dir.path(), "sort --text --payload-bytes 4 --input w.txt --output w.bin").code == 0);
  REQUIRE(cli(dir.path(),
               "preprocess --input w.bin --payload-bytes 4 --out w --vertices 7 --partitions 2")
              .code == 0);
}

}  // namespace

TEST_CASE("help documents every subcommand and flag") {
  TempDir dir("help");
  auto top = cli(dir.path(), "--help");
  CHECK(top.code == 0);
  for (const char* sub : {"sort", "preprocess", "run", "recover", "bench", "export", "verify"}) {
    CHECK(top.out.find(sub) != std::string::npos);
  }
  auto run = cli(dir.path(), "run --help").out;
  for (const char* flag : {"--graph", "--algo", "--iters", "--damping", "--source", "--local-nodes",
                           "--hostfile", "--rank", "--memory-budget", "--threads", "--no-checkpoint",
                           "--checkpoint-keep", "--metrics", "--strict", "--cost-factor",
                           "--skip-ratio", "--gamma", "--queue-depth", "--testing",
                           "--force-dispatch", "--force-filtering", "--crash-at"}) {
    CHECK_MESSAGE(run.find(flag) != std::string::npos, flag);
  }
  auto pre = cli(dir.path(), "preprocess --help").out;
  for (const char* flag : {"--input", "--out", "--vertices", "--partitions", "--alpha",
                           "--batch-size", "--memory-budget", "--reversed"}) {
    CHECK_MESSAGE(pre.find(flag) != std::string::npos, flag);
  }
  CHECK(cli(dir.path(), "run --no-such-flag").code == 2);
}

TEST_CASE("PageRank on G7 with two local nodes") {
  TempDir dir("pr");
  prepare_g7(dir);
  auto r = cli(dir.path(), "run --algo pr --iters 5 --graph g --local-nodes 2 --strict "
                            "--storage st --metrics m.csv");
  REQUIRE_MESSAGE(r.code == 0, r.out);
  CHECK(fs::exists(dir / "st/output/rank.part0.bin"));
  CHECK(fs::exists(dir / "st/output/rank.part1.bin"));
  CHECK(fs::file_size(dir / "st/output/rank.part1.bin") == 4 * 8);

  std::ifstream metrics(dir / "m.csv");
  std::string header;
  std::getline(metrics, header);
  CHECK(header ==
        "node,call,phase,msgs_generated,msgs_sent_peer0,msgs_sent_peer1,msgs_recv_peer0,"
        "msgs_recv_peer1,chunk_bytes_read,varray_bytes_read,varray_bytes_written");
  bool saw_pass = false;
  for (std::string line; std::getline(metrics, line);) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    REQUIRE(f.size() == 11);
    if (f[0] == "0" && f[2] == "pass") {
      CHECK(f[5] == "2");
      saw_pass = true;
    }
  }
  CHECK(saw_pass);

  auto v = cli(dir.path(), "verify --output st/output");
  CHECK_MESSAGE(v.code == 0, v.out);
  CHECK(v.out.rfind("PASS pr", 0) == 0);

  auto mismatch = cli(dir.path(), "verify --output st/output --iters 3");
  CHECK(mismatch.code == 8);
  CHECK(mismatch.out.find("the run used 5 iterations but 3 were requested") != std::string::npos);

  auto text = cli(dir.path(), "export --output st/output --format text");
  CHECK(text.code == 0);
  CHECK(std::count(text.out.begin(), text.out.end(), '\n') == 7);
  CHECK(text.out.rfind("0\t", 0) == 0);
}

TEST_CASE("verify names a corrupted vertex") {
  TempDir dir("corrupt");
  prepare_g7(dir);
  REQUIRE(cli(dir.path(), "run --algo bfs --source 0 --graph g --local-nodes 2 --storage st").code == 0);
  CHECK(cli(dir.path(), "verify --output st/output").code == 0);
  {
    std::fstream f(dir / "st/output/level.part1.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    std::uint32_t bad = 9;
    f.write(reinterpret_cast<const char*>(&bad), 4);
  }
  auto v = cli(dir.path(), "verify --output st/output");
  CHECK(v.code == 8);
  CHECK(v.out.find("vertex 4: expected 3, got 9") != std::string::npos);
}

TEST_CASE("WCC and SSSP end to end") {
  TempDir dir("algos");
  write_text(dir / "g7.txt", "0 1\n0 2\n1 3\n2 3\n3 4\n4 5\n5 6\n6 0\n2 5\n");
  REQUIRE(cli(dir.path(), "sort --text --input g7.txt --output g7.bin").code == 0);
  REQUIRE(cli(dir.path(), "preprocess --input g7.bin --out g --vertices 7 --partitions 2 --reversed")
              .code == 0);
  REQUIRE(cli(dir.path(), "run --algo wcc --graph g --local-nodes 2 --storage st --strict").code == 0);
  CHECK(cli(dir.path(), "verify --output st/output").code == 0);

  write_weighted_g7(dir);
  REQUIRE(cli(dir.path(), "run --algo sssp --source 0 --graph w --local-nodes 2 --storage sw").code == 0);
  CHECK(cli(dir.path(), "verify --output sw/output").code == 0);
  auto text = cli(dir.path(), "export --output sw/output --format text").out;
  CHECK(text.find("5\t7\n") != std::string::npos);
}

TEST_CASE("error paths have distinct exit codes") {
  TempDir dir("errors");
  prepare_g7(dir);
  fs::create_directories(dir / "empty");
  CHECK(cli(dir.path(), "run --algo bfs --source 0 --graph empty --local-nodes 2 --storage s0").code == 3);
  CHECK(cli(dir.path(), "run --algo bfs --source 0 --graph g --local-nodes 3 --storage s1").code == 4);
  CHECK(cli(dir.path(), "run --algo bfs --source 0 --graph g --local-nodes 2 --storage s2 "
                         "--memory-budget 1K")
            .code == 6);
  CHECK(cli(dir.path(), "run --algo pr --graph g --local-nodes 2 --storage s3 --strict --testing "
                         "--inject-oversend")
            .code == 7);
  CHECK(cli(dir.path(), "run --algo pr --graph g --local-nodes 2 --storage s4 --force-dispatch pull")
            .code == 2);
  CHECK(cli(dir.path(), "run --algo bfs --source 99 --graph g --local-nodes 2 --storage s5").code == 2);
  CHECK(cli(dir.path(), "run --algo nope --graph g --local-nodes 2").code == 2);
  write_text(dir / "hosts", "127.0.0.1:1\n127.0.0.1:2\n");
  CHECK(cli(dir.path(), "run --algo bfs --source 0 --graph g --hostfile hosts --rank 0 "
                         "--storage s6 --connect-timeout 0.5")
            .code == 5);
}

TEST_CASE("forced strategies are honoured under --testing") {
  TempDir dir("forced");
  prepare_g7(dir);
  for (const char* s : {"push", "pull", "none"}) {
    auto r = cli(dir.path(), std::string("run --algo pr --graph g --local-nodes 2 --storage st_") + s +
                                  " --testing --force-dispatch " + s + " --force-filtering off");
    CHECK_MESSAGE(r.code == 0, r.out);
    CHECK(cli(dir.path(), std::string("verify --output st_") + s + "/output").code == 0);
  }
}

TEST_CASE("configuration precedence is flag over env over file") {
  TempDir dir("prec");
  prepare_g7(dir);
  write_text(dir / "cfg.json", R"({"iters": 2, "run": {"damping": 0.5}, "storage": "st"})");
  auto iters = [&] { return read_json(dir / "st/output/run.json")["iterations"].get<int>(); };

  REQUIRE(cli(dir.path(), "--config cfg.json run --algo pr --graph g --local-nodes 2").code == 0);
  CHECK(iters() == 2);
  CHECK(read_json(dir / "st/output/run.json")["damping"].get<double>() == 0.5);

  REQUIRE(cli(dir.path(), "--config cfg.json run --algo pr --graph g --local-nodes 2", "DFOG_ITERS=3")
              .code == 0);
  CHECK(iters() == 3);

  REQUIRE(cli(dir.path(), "--config cfg.json run --algo pr --graph g --local-nodes 2 --iters 4",
               "DFOG_ITERS=3")
              .code == 0);
  CHECK(iters() == 4);
}

TEST_CASE("a crashed run resumes from its journal") {
  TempDir dir("crash");
  prepare_g7(dir);
  REQUIRE(cli(dir.path(), "run --algo pr --graph g --local-nodes 2 --storage ref").code == 0);
  auto crashed = cli(dir.path(), "run --algo pr --graph g --local-nodes 2 --storage st --testing "
                                  "--crash-at 1:5:mid");
  CHECK(crashed.code == 86);
  auto rec = cli(dir.path(), "recover --algo pr --graph g --local-nodes 2 --storage st");
  REQUIRE_MESSAGE(rec.code == 0, rec.out);
  CHECK(read_json(dir / "st/output/node0.json")["resumed_through"].get<int>() == 4);
  for (const char* part : {"rank.part0.bin", "rank.part1.bin"}) {
    auto a = dfog::read_whole_file(dir / "ref/output" / part);
    auto b = dfog::read_whole_file(dir / "st/output" / part);
    CHECK(a == b);
  }
}
