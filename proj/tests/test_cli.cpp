#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hgmts/cli.hpp"

using namespace hgmts;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t line_count(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

std::filesystem::path scratch(const char* name) {
  const auto dir = std::filesystem::temp_directory_path() / "hgmts_cli_test" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

const std::vector<std::string> kTiny = {"--set", "synth_nodes=4", "--set", "synth_drivers=2", "--set",
                                        "synth_length=300", "--set", "L=12", "--set", "K=6", "--set", "D=6",
                                        "--set", "kernel=5", "--set", "stacks=1", "--set", "rounds=1",
                                        "--epochs", "1"};

std::vector<std::string> with_tiny(std::vector<std::string> args) {
  args.insert(args.end(), kTiny.begin(), kTiny.end());
  return args;
}

}  // namespace

TEST_CASE("train, eval and inspect-graph") {
  const auto dir = scratch("train");
  const Result t = run(with_tiny({"train", "--out-dir", dir.string(), "--horizon", "6"}));
  REQUIRE_MESSAGE(t.code == 0, t.err);
  CHECK(std::filesystem::exists(dir / "model.ckpt"));
  CHECK(std::filesystem::exists(dir / "history.csv"));
  CHECK(std::filesystem::exists(dir / "manifest.txt"));
  CHECK(line_count(dir / "history.csv") == 2);

  const Result e = run({"eval", "--checkpoint", (dir / "model.ckpt").string(), "--split", "test", "--out-dir",
                        dir.string(), "--predictions", (dir / "pred.csv").string()});
  REQUIRE_MESSAGE(e.code == 0, e.err);
  CHECK(e.out.find("dataset,variant,gamma,horizon,seed,mse,mae,epochs,wall_s") != std::string::npos);
  CHECK(line_count(dir / "eval.csv") == 2);
  CHECK(line_count(dir / "pred.csv") > 1);

  // The eval row reproduces the test score written at training time.
  std::ifstream tr(dir / "train_report.csv"), ev(dir / "eval.csv");
  std::string header, train_row, eval_row;
  std::getline(tr, header);
  std::getline(tr, train_row);
  std::getline(ev, header);
  std::getline(ev, eval_row);
  auto field = [](const std::string& row, int idx) {
    std::stringstream s(row);
    std::string f;
    for (int i = 0; i <= idx; ++i) std::getline(s, f, ',');
    return f;
  };
  CHECK(field(train_row, 5) == field(eval_row, 5));

  const Result g = run({"inspect-graph", "--checkpoint", (dir / "model.ckpt").string(), "--window", "2",
                        "--out", (dir / "adj.csv").string()});
  REQUIRE_MESSAGE(g.code == 0, g.err);
  CHECK(line_count(dir / "adj.csv") > 1);
}

TEST_CASE("sweep-gamma emits one row per gamma and horizon") {
  const auto dir = scratch("sweep");
  const Result r = run(with_tiny({"sweep-gamma", "--gammas", "0.2,0.3,0.4,0.5,0.6,0.7", "--horizons", "3,6",
                                  "--out-dir", dir.string()}));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(line_count(dir / "sweep_gamma.csv") == 1 + 12);
  CHECK(line_count(dir / "sweep_gamma_runs.csv") == 1 + 12);
}

TEST_CASE("ablate with a single variant") {
  const auto dir = scratch("ablate");
  const Result r = run(with_tiny({"ablate", "--variants", "HGMTS4", "--out-dir", dir.string()}));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(line_count(dir / "ablation.csv") == 2);
}

TEST_CASE("synth-gen writes data and coupling") {
  const auto dir = scratch("synth");
  const Result r = run({"synth-gen", "--out", (dir / "s.csv").string(), "--set", "synth_length=50"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(line_count(dir / "s.csv") == 51);
  CHECK(line_count(dir / "s_coupling.csv") == 5);
}

TEST_CASE("config file plus flag override") {
  const auto dir = scratch("cfg");
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "synth_nodes=4\nsynth_drivers=2\nsynth_length=300\nL=12\nK=3\nD=6\nkernel=5\nstacks=1\nrounds=1\n"
           "max_epochs=1\n";
  }
  const Result r = run({"train", "--config", (dir / "run.cfg").string(), "--horizon", "5", "--out-dir", dir.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find(",5,") != std::string::npos);
}

TEST_CASE("errors print usage and exit nonzero") {
  Result r = run({"train", "--no-such-flag"});
  CHECK(r.code != 0);
  CHECK(r.err.find("Usage") != std::string::npos);

  r = run({"eval", "--checkpoint", "/nonexistent/model.ckpt"});
  CHECK(r.code != 0);

  r = run({"train", "--set", "kernel=4"});
  CHECK(r.code != 0);
  CHECK(r.err.find("kernel") != std::string::npos);
  CHECK(r.err.find("Usage") != std::string::npos);

  r = run({"train", "--set", "bogus=1"});
  CHECK(r.code != 0);

  r = run({});
  CHECK(r.code != 0);

  r = run({"frobnicate"});
  CHECK(r.code != 0);

  r = run({"--help"});
  CHECK(r.code == 0);
}
