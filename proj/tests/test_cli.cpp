#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const fs::path kScratch = fs::temp_directory_path() / "dsae_test_cli";

int run(const std::string& args) {
  const std::string cmd = std::string(DSAE_CLI_PATH) + " " + args + " > " + (kScratch / "log.txt").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string at(const std::string& name) { return (kScratch / name).string(); }

const std::string kTiny = "--system lorenz --steps 600 --n 16 --p 6 --hidden 8 --epochs 2 --rollout-steps 3";

struct Scratch {
  Scratch() {
    fs::remove_all(kScratch);
    fs::create_directories(kScratch);
  }
  ~Scratch() { fs::remove_all(kScratch); }
};

}  // namespace

TEST_CASE("usage errors and exit codes") {
  Scratch s;
  CHECK(run("") == 2);
  CHECK(run("--help") == 0);
  CHECK(run("simulate --no-such-flag 1") == 2);
  CHECK(run("simulate --out " + at("x")) == 2);
  CHECK(slurp(kScratch / "log.txt").find("--system") != std::string::npos);
  CHECK(run("simulate --system duffing --out " + at("x")) == 2);
  CHECK(run("eval --checkpoint " + at("missing") + " --system lorenz --out " + at("e")) == 4);
  CHECK(run("embed --input " + at("absent.csv") + " --out " + at("e")) == 4);
}

TEST_CASE("simulate is deterministic and its manifest reruns it") {
  Scratch s;
  REQUIRE(run("simulate --system rossler --steps 500 --noise 0.1 --seed 7 --out " + at("a")) == 0);
  REQUIRE(run("simulate --system rossler --steps 500 --noise 0.1 --seed 7 --out " + at("b")) == 0);
  CHECK(slurp(kScratch / "a/trajectory.csv") == slurp(kScratch / "b/trajectory.csv"));
  CHECK(slurp(kScratch / "a/measurement.csv") == slurp(kScratch / "b/measurement.csv"));
  REQUIRE(run("simulate --config " + at("a/manifest.ini") + " --out " + at("c")) == 0);
  CHECK(slurp(kScratch / "a/measurement.csv") == slurp(kScratch / "c/measurement.csv"));
  REQUIRE(run("simulate --config " + at("a/manifest.ini") + " --seed 8 --out " + at("d")) == 0);
  CHECK(slurp(kScratch / "a/measurement.csv") != slurp(kScratch / "d/measurement.csv"));
  CHECK(slurp(kScratch / "a/trajectory.csv") == slurp(kScratch / "d/trajectory.csv"));
}

TEST_CASE("embed writes the embedding and basis") {
  Scratch s;
  REQUIRE(run("simulate --system lorenz --steps 400 --out " + at("sim")) == 0);
  REQUIRE(run("embed --input " + at("sim/measurement.csv") + " --n 20 --p 4 --out " + at("emb")) == 0);
  CHECK(fs::exists(kScratch / "emb/spectrum.csv"));
  CHECK(fs::exists(kScratch / "emb/diagnostics.txt"));
  CHECK(fs::exists(kScratch / "emb/basis"));
  CHECK(run("embed --input " + at("sim/measurement.csv") + " --n 20 --p 40 --out " + at("bad")) == 2);
}

TEST_CASE("train then eval") {
  Scratch s;
  REQUIRE(run("train " + kTiny + " --out " + at("t1")) == 0);
  REQUIRE(run("train " + kTiny + " --out " + at("t2")) == 0);
  CHECK(slurp(kScratch / "t1/train_report.csv") == slurp(kScratch / "t2/train_report.csv"));
  CHECK(slurp(kScratch / "t1/checkpoint/xi.csv") == slurp(kScratch / "t2/checkpoint/xi.csv"));
  CHECK(fs::exists(kScratch / "t1/equations.txt"));
  CHECK(fs::exists(kScratch / "t1/coefficients.csv"));

  REQUIRE(run("eval --checkpoint " + at("t1/checkpoint") + " --system lorenz --steps 600 --horizon 5 --out " + at("ev")) == 0);
  const std::string metrics = slurp(kScratch / "ev/metrics.txt");
  CHECK(metrics.find("horizon = 5\n") != std::string::npos);
  CHECK(metrics.find("prediction_mse = ") != std::string::npos);
  CHECK(fs::exists(kScratch / "ev/comparison.csv"));
  // Sampling interval must match the checkpoint.
  CHECK(run("eval --checkpoint " + at("t1/checkpoint") + " --system lorenz --dt 0.002 --steps 600 --out " + at("ev2")) == 2);
}

TEST_CASE("sweep leaderboard does not depend on the worker count") {
  Scratch s;
  const std::string args = "sweep " + kTiny + " --grid lr=1e-3,3e-3 --grid hidden=8,6 --seeds 2";
  REQUIRE(run(args + " --workers 1 --out " + at("w1")) == 0);
  REQUIRE(run(args + " --workers 4 --out " + at("w4")) == 0);
  const std::string board = slurp(kScratch / "w1/leaderboard.csv");
  CHECK(board == slurp(kScratch / "w4/leaderboard.csv"));
  std::size_t lines = 0;
  for (char c : board) lines += c == '\n';
  CHECK(lines == 9);
  CHECK(board.rfind("rank,config_hash,status,lr,hidden,seed,", 0) == 0);
  CHECK(run("sweep " + kTiny + " --grid lr --out " + at("bad")) == 2);
}
