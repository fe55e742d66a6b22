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

#include "lsgd/config.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lsgd {

using KeyValues = std::map<std::string, std::string>;

/// Method spec, theory report and the stepsize a config resolves to.
struct PreparedRun {
  MethodSpec spec;
  std::optional<TheoryReport> theory;
  /// Why the theory report is missing (unsupported configuration), if it is.
  std::string theory_error;
  double gamma = 0.0;
};

/// Resolves the method spec and gamma ("theory" -> gamma_max; a ConfigError when the
/// theory does not cover the configuration).
PreparedRun prepare_run(const ExperimentConfig& c, const GlobalProblem& p);

/// Engine configuration for one seed (x0 = 0).
RunConfig make_run_config(const ExperimentConfig& c, const PreparedRun& prep, const GlobalProblem& p,
                          std::uint64_t seed);

/// Sidecar metadata: problem constants, run parameters, final values and the
/// theory key-values (enough to re-derive gamma_max exactly).
KeyValues run_metadata(const ExperimentConfig& c, const PreparedRun& prep, const GlobalProblem& p,
                       std::uint64_t seed, const Trajectory& t);

struct RunOutput {
  std::uint64_t seed = 0;
  std::string csv_path;
  std::string meta_path;
  Trajectory trajectory;
};

/// Runs every seed of the config, writing `<output>_seed<s>.csv` and `.meta`.
std::vector<RunOutput> run_experiment(const ExperimentConfig& c, const GlobalProblem& p);

struct SweepCell {
  std::size_t index = 0;
  ExperimentConfig config;
};

/// Cross product of the sweep axes (gamma x tau-or-p); each cell's output is
/// `<output>_cell<index>`.
std::vector<SweepCell> sweep_cells(const ExperimentConfig& c);

/// Runs every cell (cells in parallel up to run.threads) and writes
/// `<output>_index.csv` last. Returns the index path.
std::string run_sweep(const ExperimentConfig& c, const GlobalProblem& p);

void write_key_values(const KeyValues& kv, std::ostream& out);
/// Parses `key=value` lines; malformed lines throw ParseError.
KeyValues read_key_values(std::istream& in);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Strict reparser for trajectory CSV: exact header, equal column counts, and
/// finite numeric cells. Throws ParseError naming the line.
CsvTable read_trajectory_csv(std::istream& in);

}  // namespace lsgd
