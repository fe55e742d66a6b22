// Copyright 2026 The lsgd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "doctest.h"

#include "lsgd/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace lsgd;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("lsgd_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

const char* const kMinimal = R"({
  "problem": {"kind": "quadratic", "n": 4, "m": 3, "d": 5, "mu": 0.01},
  "method": {"preset": "local-sgd", "tau": 2, "base": "full"},
  "run": {"K": 20}
})";

}  // namespace

TEST_SUITE("config") {

TEST_CASE("omitted fields take their defaults") {
  const ExperimentConfig c = parse_config(kMinimal);
  CHECK(c.run.record_every == 1);
  CHECK(c.run.seeds == std::vector<std::uint64_t>{0});
  CHECK(c.run.threads == 1);
  CHECK_FALSE(c.method.gamma);
  CHECK(c.theory.enabled);
  CHECK_FALSE(c.sweep);
  CHECK(c.method.tau == std::size_t{2});
  CHECK(c.problem.n == 4);
}

TEST_CASE("tau and p are mutually exclusive") {
  const char* both = R"({
    "problem": {"kind": "quadratic", "n": 2, "m": 1, "d": 2, "mu": 0.1},
    "method": {"preset": "local-sgd", "tau": 2, "p": 0.5},
    "run": {"K": 10}
  })";
  CHECK_THROWS_WITH_AS(parse_config(both), doctest::Contains("exactly one"), ConfigError);
}

TEST_CASE("unknown keys are rejected") {
  const char* extra = R"({
    "problem": {"kind": "quadratic", "n": 2, "m": 1, "d": 2, "mu": 0.1, "colour": 1},
    "method": {"preset": "local-sgd", "tau": 1},
    "run": {"K": 10}
  })";
  CHECK_THROWS_WITH_AS(parse_config(extra), doctest::Contains("colour"), ConfigError);
}

TEST_CASE("syntax errors report their line") {
  try {
    parse_config("{\n  \"problem\": {\n    \"n\": 2,,\n  }\n}");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("serialization round-trips") {
  ExperimentConfig c = parse_config(kMinimal);
  c.method.gamma = 0.125;
  c.run.seeds = {1, 2, 3};
  c.run.stop_below = 1e-9;
  c.theory.zeta_sq = 0.5;
  c.sweep = SweepBlock{{1.0, 0.1}, {1, 5}, {}};
  CHECK(parse_config(serialize_config(c)) == c);
  const ExperimentConfig d = parse_config(kMinimal);
  CHECK(parse_config(serialize_config(d)) == d);
}

TEST_CASE("a missing dataset is named in the error") {
  const char* text = R"({
    "problem": {"kind": "logistic", "n": 2, "mu": 1e-4, "dataset": "/nonexistent/mushrooms"},
    "method": {"preset": "local-sgd", "tau": 1},
    "run": {"K": 10}
  })";
  const ExperimentConfig c = parse_config(text);
  try {
    build_problem(c.problem);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/mushrooms") != std::string::npos);
  }
}

TEST_CASE("the quadratic flag parses into a problem block") {
  const ProblemConfig p = parse_quadratic_flag("n=10,m=20,d=30,mu=1e-3,seed=4");
  CHECK(p.kind == ProblemKind::Quadratic);
  CHECK(p.n == 10);
  CHECK(p.m == 20);
  CHECK(p.d == 30);
  CHECK(p.mu == 1e-3);
  CHECK(p.seed == 4);
  CHECK_THROWS_AS(parse_quadratic_flag("n=10,m=20"), ConfigError);
  CHECK_THROWS_AS(parse_quadratic_flag("n=10,m=20,d=30,mu=1e-3,w=2"), ConfigError);
}

TEST_CASE("a theory stepsize resolves to gamma_max") {
  const ExperimentConfig c = parse_config(kMinimal);
  const GlobalProblem p = build_problem(c.problem);
  const PreparedRun prep = prepare_run(c, p);
  REQUIRE(prep.theory);
  CHECK(prep.gamma == prep.theory->gamma_max);
}

TEST_CASE("run output is a strict CSV with metadata that reproduces gamma_max") {
  const auto dir = scratch_dir("run");
  ExperimentConfig c = parse_config(kMinimal);
  c.run.output = (dir / "out").string();
  c.run.seeds = {0, 1};
  const GlobalProblem p = build_problem(c.problem);
  const auto outs = run_experiment(c, p);
  REQUIRE(outs.size() == 2);
  for (const RunOutput& o : outs) {
    std::ifstream csv(o.csv_path);
    const CsvTable t = read_trajectory_csv(csv);
    CHECK(t.rows.size() == o.trajectory.samples.size());
    std::ifstream meta(o.meta_path);
    const KeyValues kv = read_key_values(meta);
    CHECK(gamma_max_from_key_values(kv) == prepare_run(c, p).theory->gamma_max);
    CHECK(kv.at("run.seed") == std::to_string(o.seed));
  }
}

TEST_CASE("malformed CSV is rejected") {
  const std::string header = "k,comm_rounds,grad_evals,f_gap_virtual,f_gap_avg,dist_sq,V_k\n";
  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return read_trajectory_csv(in);
  };
  CHECK(parse(header + "0,0,0,1,1,1,0\n").rows.size() == 1);
  CHECK_THROWS_AS(parse(header + "0,0,0,1,1,1\n"), ParseError);
  CHECK_THROWS_AS(parse(header + "0,0,0,1,1,1,0,\n"), ParseError);
  CHECK_THROWS_AS(parse(header + "0,0,0,nan,1,1,0\n"), ParseError);
  CHECK_THROWS_AS(parse(header + "0,0,0,x,1,1,0\n"), ParseError);
  CHECK_THROWS_AS(parse("k,comm\n0,0\n"), ParseError);
}

TEST_CASE("sweeps cross the grid and index every cell") {
  const auto dir = scratch_dir("sweep");
  ExperimentConfig c = parse_config(kMinimal);
  c.run.output = (dir / "grid").string();
  c.run.threads = 3;
  c.sweep = SweepBlock{{0.1, 0.05}, {1, 4}, {}};
  CHECK(sweep_cells(c).size() == 4);
  const GlobalProblem p = build_problem(c.problem);
  const std::string index = run_sweep(c, p);
  std::ifstream in(index);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 5);
  CHECK(std::filesystem::exists(dir / "grid_cell3_seed0.csv"));
}

}  // TEST_SUITE
