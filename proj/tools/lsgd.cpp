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

// Command-line front end: run, sweep, theory, verify, info.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "lsgd/experiment.hpp"
#include "lsgd/verify.hpp"

namespace {

using namespace lsgd;

constexpr int kExitConfig = 1;
constexpr int kExitDivergence = 2;
constexpr int kExitVerification = 3;

/// Problem/method flags shared by theory, verify and info (used when no
/// --config is given).
struct InlineFlags {
  std::string config;
  std::string preset = "local-sgd";
  std::string quadratic;
  std::string dataset;
  std::size_t n = 1;
  double mu = 1e-4;
  std::string partition = "random";
  std::optional<std::size_t> tau;
  std::optional<double> p;
  std::optional<double> q;
  std::optional<std::size_t> r;
  std::string base = "noisy";
  double noise = 0.0;
  std::optional<bool> coupled;
  std::optional<double> gamma;
  std::optional<double> epsilon;
  std::optional<double> zeta_sq;

  void add_problem(CLI::App* app) {
    app->add_option("--config", config, "Experiment config (JSON); replaces the inline flags");
    app->add_option("--quadratic", quadratic, "Quadratic problem, e.g. n=10,m=20,d=30,mu=1e-3");
    app->add_option("--dataset", dataset, "LibSVM dataset for a logistic problem");
    app->add_option("--n", n, "Number of clients (logistic)");
    app->add_option("--mu", mu, "Regularization (logistic)");
    app->add_option("--partition", partition, "random | label-sorted");
  }
  void add_method(CLI::App* app) {
    app->add_option("--preset", preset, "Method preset");
    auto* t = app->add_option("--tau", tau, "Fixed local loop length");
    app->add_option("--p", p, "Communication probability")->excludes(t);
    app->add_option("--q", q, "Anchor refresh probability");
    app->add_option("--r", r, "Batch size of learned-shift targets");
    app->add_option("--base", base, "Base estimator: full | uniform | noisy");
    app->add_option("--noise", noise, "Noise variance of the noisy oracle");
    app->add_option("--coupled", coupled, "Couple refreshes with communication");
    app->add_option("--gamma", gamma, "Stepsize (default: theory)");
    app->add_option("--epsilon", epsilon, "Target accuracy for K(eps)");
    app->add_option("--zeta-sq", zeta_sq, "Use the zeta-heterogeneous rows with this zeta^2");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig c;
    if (!config.empty()) {
      c = load_config(config);
    } else {
      if (!quadratic.empty() && !dataset.empty()) throw ConfigError("give --quadratic or --dataset, not both");
      if (!quadratic.empty()) {
        c.problem = parse_quadratic_flag(quadratic);
      } else if (!dataset.empty()) {
        c.problem.kind = ProblemKind::Logistic;
        c.problem.dataset = dataset;
        c.problem.n = n;
        c.problem.mu = mu;
        c.problem.partition = partition_from_string(partition);
      } else {
        throw ConfigError("one of --config, --quadratic or --dataset is required");
      }
      c.method.preset = preset_from_string(preset);
      if (tau) c.method.tau = tau;
      else if (p) c.method.p = p;
      else c.method.tau = 1;
      c.method.q = q;
      c.method.r = r;
      c.method.base = base_from_string(base);
      c.method.noise_variance = noise;
      c.method.coupled = coupled;
    }
    if (gamma) c.method.gamma = gamma;
    if (epsilon) c.theory.epsilon = *epsilon;
    if (zeta_sq) c.theory.zeta_sq = zeta_sq;
    return c;
  }
};

int cmd_run(const std::string& path, std::optional<std::size_t> threads, const std::string& output) {
  ExperimentConfig c = load_config(path);
  if (threads) c.run.threads = *threads;
  if (!output.empty()) c.run.output = output;
  const GlobalProblem p = build_problem(c.problem);
  if (c.sweep) {
    // A config carrying a grid runs every cell, as the sweep subcommand does.
    std::printf("index=%s\n", run_sweep(c, p).c_str());
    return 0;
  }
  for (const RunOutput& o : run_experiment(c, p)) {
    const Sample& last = o.trajectory.samples.back();
    std::printf("seed=%llu iterations=%zu comm_rounds=%zu f_gap_virtual=%.6e f_gap_avg=%.6e csv=%s\n",
                static_cast<unsigned long long>(o.seed), o.trajectory.iterations, o.trajectory.comm_rounds,
                last.f_gap_virtual, last.f_gap_avg, o.csv_path.c_str());
  }
  return 0;
}

int cmd_sweep(const std::string& path, std::optional<std::size_t> threads) {
  ExperimentConfig c = load_config(path);
  if (threads) c.run.threads = *threads;
  const GlobalProblem p = build_problem(c.problem);
  std::printf("index=%s\n", run_sweep(c, p).c_str());
  return 0;
}

int cmd_theory(const InlineFlags& f) {
  const ExperimentConfig c = f.resolve();
  const GlobalProblem p = build_problem(c.problem);
  const MethodSpec spec = build_spec(c.method, p.m());
  spec.validate(p);
  const TheoryReport r = analyze(spec, p, Vector::Zero(static_cast<Eigen::Index>(p.d())),
                                 build_data_model(c.theory), c.method.gamma);
  print_report(r, c.theory.epsilon, std::cout);
  write_key_values(to_key_values(r, c.theory.epsilon), std::cout);
  return 0;
}

struct VerifyFlags {
  std::string checks = "unbiasedness,second-moment,reduction,finite-differences";
  std::size_t draws = 10000;
  std::size_t moment_draws = 1000;
  std::size_t states = 10;
  std::size_t K = 500;
  std::size_t points = 20;
  std::uint64_t seed = 0;
  bool halve_a = false;
  bool items = false;
};

int cmd_verify(const InlineFlags& f, const VerifyFlags& v) {
  const ExperimentConfig c = f.resolve();
  const GlobalProblem p = build_problem(c.problem);
  const PreparedRun prep = prepare_run(c, p);
  RunConfig cfg = make_run_config(c, prep, p, v.seed);
  cfg.K = v.K;
  cfg.stop_below.reset();

  std::vector<std::string> wanted;
  std::stringstream ss(v.checks);
  for (std::string s; std::getline(ss, s, ',');) wanted.push_back(s);

  bool all_passed = true;
  std::optional<std::vector<AuditState>> states;
  auto trajectory_states = [&]() -> const std::vector<AuditState>& {
    if (!states) states = sample_states(cfg, p, v.states);
    return *states;
  };
  for (const std::string& name : wanted) {
    CheckReport r;
    if (name == "unbiasedness") {
      r = check_unbiasedness(prep.spec, p, trajectory_states().back(), v.draws, v.seed);
    } else if (name == "second-moment") {
      KeyParams kp = key_params_for(prep.spec, p);
      std::vector<EstimatorParams> estimators = estimator_params(prep.spec, p);
      if (v.halve_a) {
        kp = halve_A(kp);
        estimators = halve_A(estimators);
      }
      r = check_second_moment(prep.spec, p, kp, trajectory_states(), v.moment_draws, v.seed, estimators);
    } else if (name == "reduction") {
      r = check_parallel_sgd_reduction(prep.spec, p, prep.gamma, v.K, v.seed);
    } else if (name == "finite-differences") {
      r = finite_difference_audit(p, v.points, v.seed);
    } else {
      throw ConfigError("unknown check '" + name + "'");
    }
    print_check(r, std::cout, v.items);
    if (!r.skipped && !r.passed) all_passed = false;
  }
  return all_passed ? 0 : kExitVerification;
}

int cmd_info(const InlineFlags& f) {
  ExperimentConfig c;
  if (!f.config.empty() || !f.quadratic.empty()) {
    c = f.resolve();
  } else if (!f.dataset.empty()) {
    c.problem.kind = ProblemKind::Logistic;
    c.problem.dataset = f.dataset;
    c.problem.n = f.n;
    c.problem.mu = f.mu;
    c.problem.partition = partition_from_string(f.partition);
  } else {
    throw ConfigError("one of --config, --quadratic or --dataset is required");
  }
  KeyValues kv;
  if (c.problem.kind == ProblemKind::Logistic) {
    if (!std::filesystem::exists(c.problem.dataset))
      throw ConfigError("dataset file not found: '" + c.problem.dataset + "'");
    const Dataset ds = load_libsvm(c.problem.dataset);
    std::size_t nnz = 0, positive = 0;
    for (const Row& row : ds.rows) {
      nnz += row.features.size();
      positive += row.label > 0;
    }
    kv["dataset.path"] = c.problem.dataset;
    kv["dataset.rows"] = std::to_string(ds.count());
    kv["dataset.dim"] = std::to_string(ds.dim);
    kv["dataset.density"] = format_double(ds.count() && ds.dim
                                              ? static_cast<double>(nnz) / static_cast<double>(ds.count() * ds.dim)
                                              : 0.0);
    kv["dataset.positive_fraction"] =
        format_double(ds.count() ? static_cast<double>(positive) / static_cast<double>(ds.count()) : 0.0);
    kv["partition.mode"] = to_string(c.problem.partition);
  }
  const GlobalProblem p = build_problem(c.problem);
  kv["problem.kind"] = to_string(p.kind());
  kv["problem.n"] = std::to_string(p.n());
  kv["problem.m"] = std::to_string(p.m());
  kv["problem.d"] = std::to_string(p.d());
  kv["problem.mu"] = format_double(p.mu());
  kv["problem.L"] = format_double(p.L());
  kv["problem.max_Lij"] = format_double(p.max_Lij());
  if (p.optimum()) {
    kv["problem.f_star"] = format_double(p.optimum()->f);
    kv["problem.zeta_star_sq"] = format_double(zeta_star_sq(p));
  }
  std::printf("%-28s %s\n", "quantity", "value");
  for (const auto& [k, val] : kv) std::printf("%-28s %s\n", k.c_str(), val.c_str());
  write_key_values(kv, std::cout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local stochastic gradient methods: runs, sweeps, theory and verification"};
  app.require_subcommand(1);

  std::string config_path, output;
  std::optional<std::size_t> threads;
  auto* run_cmd = app.add_subcommand("run", "Run one configuration (one trajectory per seed)");
  run_cmd->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run_cmd->add_option("--threads", threads, "Worker threads per run");
  run_cmd->add_option("--output", output, "Output prefix (overrides run.output)");

  auto* sweep_cmd = app.add_subcommand("sweep", "Run the config's sweep grid and write an index file");
  sweep_cmd->add_option("--config", config_path, "Experiment config (JSON)")->required();
  sweep_cmd->add_option("--threads", threads, "Cells run in parallel");

  InlineFlags theory_flags;
  auto* theory_cmd = app.add_subcommand("theory", "Print the stepsize and rate report without running");
  theory_flags.add_problem(theory_cmd);
  theory_flags.add_method(theory_cmd);

  InlineFlags verify_flags;
  VerifyFlags vf;
  auto* verify_cmd = app.add_subcommand("verify", "Run the empirical checks");
  verify_flags.add_problem(verify_cmd);
  verify_flags.add_method(verify_cmd);
  verify_cmd->add_option("--checks", vf.checks, "Comma-separated checks");
  verify_cmd->add_option("--draws", vf.draws, "Monte-Carlo draws for unbiasedness");
  verify_cmd->add_option("--moment-draws", vf.moment_draws, "Monte-Carlo draws per state for the moment audit");
  verify_cmd->add_option("--states", vf.states, "Trajectory states for the moment audit");
  verify_cmd->add_option("--K", vf.K, "Trajectory length");
  verify_cmd->add_option("--points", vf.points, "Finite-difference probe points");
  verify_cmd->add_option("--seed", vf.seed, "Seed");
  verify_cmd->add_flag("--halve-a", vf.halve_a, "Audit with every A constant halved");
  verify_cmd->add_flag("--items", vf.items, "Print every sub-check");

  InlineFlags info_flags;
  auto* info_cmd = app.add_subcommand("info", "Dataset, partition and problem statistics");
  info_flags.add_problem(info_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run_cmd) return cmd_run(config_path, threads, output);
    if (*sweep_cmd) return cmd_sweep(config_path, threads);
    if (*theory_cmd) return cmd_theory(theory_flags);
    if (*verify_cmd) return cmd_verify(verify_flags, vf);
    if (*info_cmd) return cmd_info(info_flags);
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitConfig;
}
