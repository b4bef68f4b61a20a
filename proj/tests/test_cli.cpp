#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "gatnet/data.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace gatnet;

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string output;  // stdout only
};

CmdResult run(const std::string& args) {
  const char* bin = std::getenv("GAT_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "GAT_BIN must point at the gat binary");
  const std::string cmd = std::string(bin) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CmdResult res;
  std::array<char, 4096> buf;
  size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) res.output.append(buf.data(), n);
  const int status = pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("gatnet_cli_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synth then train twice with the same seed is byte-identical") {
  TempDir tmp;
  const std::string bundle = (tmp.path / "toy.gatb").string();
  CmdResult synth = run("synth --kind planted-classes --nodes 60 --features 6 --classes 3 "
                        "--degree 4 --noise 0.3 --seed 5 --out " + bundle);
  CHECK(synth.exit_code == 0);
  REQUIRE(fs::exists(bundle));

  const std::string cfg_path = (tmp.path / "run.json").string();
  std::ofstream(cfg_path) << R"({"preset": "synth", "dataset": ")" << bundle
                          << R"(", "runs": 1, "seed": 7, "max_epochs": 15, "patience": 5,)"
                          << R"( "out_dir": ")" << (tmp.path / "out1").string() << R"("})";

  CmdResult t1 = run("train --config " + cfg_path);
  CHECK(t1.exit_code == 0);
  CmdResult t2 = run("train --config " + cfg_path + " --out " + (tmp.path / "out2").string());
  CHECK(t2.exit_code == 0);
  CHECK(t1.output == t2.output);
  CHECK(slurp(tmp.path / "out1" / "results.json") == slurp(tmp.path / "out2" / "results.json"));
  CHECK(slurp(tmp.path / "out1" / "checkpoint_run0.gatw") ==
        slurp(tmp.path / "out2" / "checkpoint_run0.gatw"));

  // eval on the written checkpoint works and reports the metric object
  CmdResult ev = run("eval --checkpoint " + (tmp.path / "out1" / "checkpoint_run0.gatw").string() +
                     " --data " + bundle);
  CHECK(ev.exit_code == 0);
  CHECK(ev.output.find("\"metric\"") != std::string::npos);

  // export-attention writes K * |E| records
  const std::string att = (tmp.path / "att.tsv").string();
  CmdResult ex = run("export-attention --checkpoint " +
                     (tmp.path / "out1" / "checkpoint_run0.gatw").string() + " --data " + bundle +
                     " --out " + att);
  CHECK(ex.exit_code == 0);
  GraphBundle b = load_bundle(bundle);
  std::ifstream att_in(att);
  size_t lines = 0;
  std::string line;
  while (std::getline(att_in, line)) ++lines;
  CHECK(lines == 4 * size_t(b.graph.num_edges()));  // synth preset layer 0 has 4 heads
}

TEST_CASE("missing dataset exits 2 and writes nothing") {
  TempDir tmp;
  const std::string cfg_path = (tmp.path / "bad.json").string();
  const std::string out_dir = (tmp.path / "never").string();
  std::ofstream(cfg_path) << R"({"preset": "synth", "dataset": "/nonexistent/x.gatb",)"
                          << R"( "out_dir": ")" << out_dir << R"("})";
  CmdResult r = run("train --config " + cfg_path);
  CHECK(r.exit_code == 2);
  CHECK_FALSE(fs::exists(out_dir));
}

TEST_CASE("unknown config keys are rejected") {
  TempDir tmp;
  const std::string cfg_path = (tmp.path / "unknown.json").string();
  std::ofstream(cfg_path) << R"({"preset": "synth", "dataset": "x.gatb", "learning_rate": 0.1})";
  CmdResult r = run("train --config " + cfg_path);
  CHECK(r.exit_code == 2);
}

TEST_CASE("gradcheck passes at the default tolerance and fails at 1e-9") {
  CmdResult ok = run("gradcheck --preset cora-citeseer --seed 3");
  CHECK(ok.exit_code == 0);
  CHECK(ok.output.find("PASS") != std::string::npos);

  CmdResult strict = run("gradcheck --preset cora-citeseer --seed 3 --tol 1e-9");
  CHECK(strict.exit_code == 1);
  CHECK(strict.output.find("FAIL") != std::string::npos);

  CmdResult constant = run("gradcheck --preset const-ppi --seed 3");
  CHECK(constant.exit_code == 0);
  CHECK(constant.output.find("a_src0: max rel err 0") != std::string::npos);
  CHECK(constant.output.find("(zero gradient)") != std::string::npos);
}

TEST_CASE("corrupted checkpoint is a format error (exit 2)") {
  TempDir tmp;
  const std::string fake = (tmp.path / "fake.gatw").string();
  std::ofstream(fake, std::ios::binary) << "NOTACKPT";
  const std::string bundle = (tmp.path / "b.gatb").string();
  run("synth --nodes 20 --features 5 --classes 2 --seed 1 --out " + bundle);
  CmdResult r = run("eval --checkpoint " + fake + " --data " + bundle);
  CHECK(r.exit_code == 2);
}

}  // TEST_SUITE
