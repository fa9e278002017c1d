#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "debias_kit_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = std::string("\"") + DEBIAS_KIT_EXE + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const std::string kData = std::string("--data \"") + DEBIAS_DATA_FILE + "\"";

}  // namespace

TEST_CASE("run succeeds and honours flags over the config file") {
  const auto dir = scratch("run");
  std::ofstream(dir / "cfg.txt") << "seed = 7\nvariant = linear\n";
  CHECK(run("run --config \"" + (dir / "cfg.txt").string() + "\" --seed 9 " + kData + " --out \"" +
            (dir / "out").string() + "\"") == 0);
  const auto split = nlohmann::json::parse(slurp(dir / "out" / "split_manifest.json"));
  CHECK(split["provenance"]["seed"] == 9);
  const auto model = nlohmann::json::parse(slurp(dir / "out" / "path_model.json"));
  CHECK(model["variant"] == "linear");
}

TEST_CASE("audit subcommand consumes written scores") {
  const auto dir = scratch("audit");
  REQUIRE(run("run " + kData + " --out \"" + (dir / "run").string() + "\"") == 0);
  CHECK(run("audit " + kData + " --scores \"" + (dir / "run" / "scores_train.csv").string() +
            "\" --test-scores \"" + (dir / "run" / "scores_test.csv").string() + "\" --out \"" +
            (dir / "audit").string() + "\"") == 0);
  CHECK(slurp(dir / "run" / "comparison.json") == slurp(dir / "audit" / "comparison.json"));
}

TEST_CASE("stage failures exit 1 with an error record") {
  const auto dir = scratch("fail");
  CHECK(run("run --data /nonexistent/german.data --out \"" + dir.string() + "\"") == 1);
  const auto err = nlohmann::json::parse(slurp(dir / "error.json"));
  CHECK(err["stage"] == "ingest");
  CHECK(err["kind"] == "FileNotFound");
}

TEST_CASE("usage and configuration errors exit 2") {
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("run --seed") == 2);
  CHECK(run("run --variant cubic") == 2);
  CHECK(run("run --train-fraction 1.5") == 2);
  CHECK(run("audit") == 2);
  CHECK(run("run --config /nonexistent/cfg.txt") == 2);
  const auto dir = scratch("sweep0");
  CHECK(run("sweep --n-seeds 0 " + kData + " --out \"" + dir.string() + "\"") == 2);
  CHECK(run("--help") == 0);
}

TEST_CASE("sweep writes a summary") {
  const auto dir = scratch("sweep");
  CHECK(run("sweep --n-seeds 2 " + kData + " --out \"" + dir.string() + "\"") == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "sweep_summary.json"));
  CHECK(j["seeds"].size() == 2);
  CHECK(j.contains("aggregate"));
}
