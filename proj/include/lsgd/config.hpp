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

#pragma once

#include "lsgd/data.hpp"
#include "lsgd/engine.hpp"
#include "lsgd/theory.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lsgd {

/// Problem block. Quadratic problems use (m, d, seed) or the benchmark
/// instance type; logistic problems read `dataset` and partition it.
struct ProblemConfig {
  ProblemKind kind = ProblemKind::Quadratic;
  std::size_t n = 1;
  double mu = 1e-4;
  // Quadratic.
  std::size_t m = 1;
  std::size_t d = 1;
  std::uint64_t seed = 0;
  /// Benchmark instance type 0..3; determines m.
  std::optional<int> instance;
  // Logistic.
  std::string dataset;
  PartitionMode partition = PartitionMode::Random;
  std::uint64_t partition_seed = 0;
  bool normalize = true;

  bool operator==(const ProblemConfig&) const = default;
};

/// Method block: preset plus overrides. Exactly one of tau / p is set.
struct MethodConfig {
  Preset preset = Preset::LocalSGD;
  /// Absolute stepsize; unset means "theory" (resolved to gamma_max).
  std::optional<double> gamma;
  std::optional<std::size_t> tau;
  std::optional<double> p;
  std::optional<double> q;
  std::optional<std::size_t> r;
  EstimatorType base = EstimatorType::NoisyGradient;
  double noise_variance = 0.0;
  std::optional<bool> coupled;

  bool operator==(const MethodConfig&) const = default;
};

struct RunBlock {
  std::size_t K = 1000;
  std::vector<std::uint64_t> seeds{0};
  std::size_t record_every = 1;
  std::string output = "run";
  double eta_weight = 0.0;
  std::size_t threads = 1;
  std::optional<double> stop_below;

  bool operator==(const RunBlock&) const = default;
};

struct TheoryBlock {
  bool enabled = true;
  double epsilon = 1e-6;
  /// Use the zeta-heterogeneous loop rows with this zeta^2.
  std::optional<double> zeta_sq;

  bool operator==(const TheoryBlock&) const = default;
};

/// Grid for the sweep subcommand; empty axes keep the method's value.
struct SweepBlock {
  std::vector<double> gamma;
  std::vector<std::size_t> tau;
  std::vector<double> p;

  bool operator==(const SweepBlock&) const = default;
};

struct ExperimentConfig {
  ProblemConfig problem;
  MethodConfig method;
  RunBlock run;
  TheoryBlock theory;
  std::optional<SweepBlock> sweep;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Strict JSON parsing: unknown keys, wrong types and violated invariants
/// throw ConfigError; syntax errors throw ParseError with line and column.
ExperimentConfig parse_config(std::string_view json_text);
/// Reads and parses a config file; an unreadable file is a ConfigError naming it.
ExperimentConfig load_config(const std::string& path);
/// Canonical JSON; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& c);

/// Quadratic problem block from "n=10,m=20,d=30,mu=1e-3[,seed=0][,instance=1]".
ProblemConfig parse_quadratic_flag(const std::string& text);
EstimatorType base_from_string(const std::string& name);
PartitionMode partition_from_string(const std::string& name);
std::string to_string(PartitionMode mode);

/// Builds the problem (a missing dataset is a ConfigError naming the path).
GlobalProblem build_problem(const ProblemConfig& c);
MethodSpec build_spec(const MethodConfig& c, std::size_t m);
DataModel build_data_model(const TheoryBlock& t);

}  // namespace lsgd
