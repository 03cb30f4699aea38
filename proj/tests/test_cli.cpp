// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <json.hpp>

#include "scdm/image.hpp"
#include "scdm/io_util.hpp"
#include "scdm/labelmap.hpp"
#include "test_support.hpp"

using namespace scdm;
using scdm::testing::random_map;
using scdm::testing::TempDir;

namespace {

// Runs the binary with stdout/stderr captured to a file; returns the exit code.
int run(const std::string& args, const TempDir& dir, std::string* output = nullptr, const std::string& env = "") {
  const auto log = dir / "cli.log";
  const std::string cmd = (env.empty() ? "" : env + " ") + std::string(SCDM_BIN) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (output) *output = read_text(log);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

void write_inputs(const TempDir& dir) {
  CounterStream rng(1, "test.cli");
  for (int i = 0; i < 4; ++i) save_map(random_map(8, 8, 3, rng), dir / ("m" + std::to_string(i) + ".slm"));
  ToyDataSpec spec;
  spec.class_means.resize(3, 1);
  spec.class_means << -0.8, 0.0, 0.8;
  spec.sigma0 = 0.2;
  spec.class_prior = Eigen::Vector3d::Constant(1.0 / 3.0);
  write_atomic(dir / "oracle.json", "{\"flavor\":\"oracle\",\"toy_spec\":" + toy_spec_to_json(spec) + "}");
}

}  // namespace

TEST_CASE("verify exit codes") {
  TempDir dir;
  std::string out;
  CHECK(run("verify --targets prop1", dir, &out) == 0);
  CHECK(out.find("PASS prop1") != std::string::npos);
  CHECK(run("verify --targets ''", dir) == 2);
  CHECK(run("verify --targets nonsense", dir) == 2);
  CHECK(run("no-such-command", dir) == 2);
  CHECK(run("", dir) == 2);
}

TEST_CASE("stats, schedule, trajectory and sampling pipeline") {
  TempDir dir;
  write_inputs(dir);
  const std::string maps = q(dir / "m0.slm") + " " + q(dir / "m1.slm") + " " + q(dir / "m2.slm") + " " + q(dir / "m3.slm");
  REQUIRE(run("estimate-stats --maps " + maps + " --clamp-phi --out " + q(dir / "stats.json"), dir) == 0);
  REQUIRE(run("schedule --stats " + q(dir / "stats.json") + " --T 20 --eta 1.0 --uniform-classes 0 --out " +
                  q(dir / "sched.json"),
              dir) == 0);
  const auto sched = nlohmann::json::parse(read_text(dir / "sched.json"));
  CHECK(sched.at("T") == 20);
  CHECK(sched.at("gamma").size() == 20u);

  REQUIRE(run("diffuse-labels --map " + q(dir / "m0.slm") + " --sched " + q(dir / "sched.json") +
                  " --seed 7 --emit-steps 0,0.5,1 --out-dir " + q(dir / "traj"),
              dir) == 0);
  CHECK(load_map(dir / "traj" / "step_0.slm") == load_map(dir / "m0.slm"));
  CHECK(std::filesystem::exists(dir / "traj" / "step_10.slm"));
  CHECK(std::filesystem::exists(dir / "traj" / "mask_times.slm"));
  CHECK(std::filesystem::exists(dir / "traj" / "manifest.json"));

  const std::string sample_args = "sample --map " + q(dir / "m1.slm") + " --sched " + q(dir / "sched.json") +
                                  " --denoiser " + q(dir / "oracle.json") + " --steps 10 --extrapolation 0.8 --seed 3 --out ";
  REQUIRE(run(sample_args + q(dir / "a.sim"), dir) == 0);
  REQUIRE(run(sample_args + q(dir / "b.sim"), dir) == 0);
  CHECK(read_bytes(dir / "a.sim") == read_bytes(dir / "b.sim"));
  const ToyImage img = load_image(dir / "a.sim");
  CHECK(img.height() == 8);
  CHECK(img.channels() == 1);
  CHECK(std::filesystem::exists(dir / "a.sim.meta.json"));

  std::string out;
  REQUIRE(run("metrics --task psnr --a " + q(dir / "a.sim") + " --b " + q(dir / "b.sim") + " --report " +
                  q(dir / "psnr.json"),
              dir, &out) == 0);
  const auto rep = nlohmann::json::parse(read_text(dir / "psnr.json"));
  CHECK(rep.contains("schema"));

  REQUIRE(run("metrics --task miou --a " + q(dir / "m0.slm") + " --b " + q(dir / "m0.slm"), dir, &out) == 0);
  CHECK(out.find("miou") != std::string::npos);
}

TEST_CASE("corrupt and the seed environment variable") {
  TempDir dir;
  write_inputs(dir);
  const std::string base = "corrupt --mode random --rate 0.3 --in " + q(dir / "m0.slm") + " --out ";
  REQUIRE(run(base + q(dir / "e1.slm"), dir, nullptr, "SCDM_SEED=11") == 0);
  REQUIRE(run(base + q(dir / "e2.slm"), dir, nullptr, "SCDM_SEED=11") == 0);
  REQUIRE(run(base + q(dir / "e3.slm"), dir, nullptr, "SCDM_SEED=12") == 0);
  REQUIRE(run(base + q(dir / "e4.slm") + " --seed 11", dir, nullptr, "SCDM_SEED=12") == 0);
  CHECK(read_bytes(dir / "e1.slm") == read_bytes(dir / "e2.slm"));
  CHECK_FALSE(read_bytes(dir / "e1.slm") == read_bytes(dir / "e3.slm"));
  CHECK(read_bytes(dir / "e1.slm") == read_bytes(dir / "e4.slm"));
  CHECK(std::filesystem::exists(dir / "e1.slm.meta.json"));

  REQUIRE(run("corrupt --mode edge --distance 1 --in " + q(dir / "m0.slm") + " --out " + q(dir / "edge.slm"), dir) == 0);
  CHECK(run("corrupt --mode blur --in " + q(dir / "m0.slm") + " --out " + q(dir / "x.slm"), dir) == 2);
  CHECK(run("corrupt --mode ds --in " + q(dir / "missing.slm") + " --out " + q(dir / "x.slm"), dir) == 3);
}

TEST_CASE("ablation rows and replay from the CSV header") {
  TempDir dir;
  REQUIRE(run("ablate --seed 4 --T 10 --pairs 2 --step-counts 2,5,10 --out " + q(dir / "a.csv"), dir) == 0);
  const std::string text = read_text(dir / "a.csv");
  std::istringstream lines(text);
  std::string line;
  int rows = 0;
  std::getline(lines, line);
  CHECK(line.rfind("# {", 0) == 0);
  std::getline(lines, line);
  CHECK(line.rfind("mode,method,", 0) == 0);
  while (std::getline(lines, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 27);
  CHECK(text.find(",differs") == std::string::npos);
  CHECK(text.find(",bitwise") != std::string::npos);

  REQUIRE(run("ablate --config " + q(dir / "a.csv") + " --out " + q(dir / "b.csv"), dir) == 0);
  CHECK(read_text(dir / "b.csv") == text);
}
