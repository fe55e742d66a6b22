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

// Acceptance suite: one pass/fail line per criterion. Every tolerance used in
// a verdict is a named constant below. Exit status: 0 pass, 1 fail, 77 skip.

#include "lsgd/data.hpp"
#include "lsgd/experiment.hpp"
#include "lsgd/verify.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace lsgd;

namespace {

// --- Tolerances ------------------------------------------------------------

constexpr double kC1Target = 1e-10;          // f-gap target
constexpr double kC1HorizonFactor = 2.0;     // within 2 x predicted K
constexpr double kC1MinRSquared = 0.9;       // log-gap regression fit
constexpr double kC2PlateauFloor = 1e-6;     // Local-GD must stay at or above
constexpr double kC2ShiftedTarget = 1e-8;    // SS-Local-SGD must reach
constexpr double kC3MaxSeconds = 120.0;
constexpr std::size_t kC3Rounds = 1000;      // communication rounds per run
constexpr double kC4RatioLow = 1.5;
constexpr double kC4RatioHigh = 3.0;
constexpr double kC5Tolerance = 1e-12;       // per coordinate, relative to max(1, |x|)
constexpr double kC6MaxDiscrepancy = 1e-24;  // V_k after communication
constexpr double kC8Tolerance = 1e-12;
constexpr double kC9QuadraticBound = 1e-9;
constexpr double kC9LogisticBound = 1e-5;
constexpr double kTotalBudgetSeconds = 600.0;

// --- Fixed experiment parameters -------------------------------------------

constexpr std::size_t kSeeds = 5;
const QuadraticSpec kReferenceQuadratic{10, 20, 30, 1e-3, 0};

struct Outcome {
  enum class Status { Pass, Fail, Skip };
  Status status = Status::Pass;
  std::string summary;
};

Outcome verdict(bool ok, std::string summary) {
  return {ok ? Outcome::Status::Pass : Outcome::Status::Fail, std::move(summary)};
}

std::string fmt(const char* format, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, a);
  return buf;
}

std::string sci(double v) { return fmt("%.3e", v); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

Vector zeros(const GlobalProblem& p) { return Vector::Zero(static_cast<Eigen::Index>(p.d())); }

RunConfig config_for(const GlobalProblem& p, const MethodSpec& spec, double gamma, std::size_t K,
                     std::uint64_t seed) {
  RunConfig cfg;
  cfg.spec = spec;
  cfg.gamma = gamma;
  cfg.K = K;
  cfg.x0 = zeros(p);
  cfg.master_seed = seed;
  return cfg;
}

struct Fit {
  double slope = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

/// Least-squares fit of log(gap) against k over samples with k >= from.
Fit log_gap_fit(const Trajectory& t, std::size_t from) {
  std::vector<double> xs, ys;
  for (const Sample& s : t.samples) {
    if (s.k < from || !(s.f_gap_virtual > 0.0)) continue;
    xs.push_back(static_cast<double>(s.k));
    ys.push_back(std::log(s.f_gap_virtual));
  }
  Fit f;
  f.points = xs.size();
  if (xs.size() < 3) return f;
  const double nx = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= nx;
  my /= nx;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  f.slope = sxy / sxx;
  f.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 0.0;
  return f;
}

// --- Criteria --------------------------------------------------------------

Outcome c1_exact_convergence() {
  const GlobalProblem p = make_quadratic(kReferenceQuadratic);
  struct Case {
    std::string name;
    MethodSpec spec;
  };
  PresetOptions svrg;
  svrg.loop = LoopKind::bernoulli(0.1);
  svrg.q = 0.1;
  PresetOptions star;
  star.loop = LoopKind::fixed(10);
  const std::vector<Case> cases = {{"s-local-svrg", make_preset(Preset::SLocalSVRG, svrg, p.m())},
                                   {"star-local-sgd-star", make_preset(Preset::StarLocalSGDStar, star, p.m())}};
  bool ok = true;
  std::string summary;
  for (const Case& c : cases) {
    const TheoryReport r = analyze(c.spec, p, zeros(p));
    const auto predicted = r.rate ? r.rate->predicted_K(kC1Target) : std::nullopt;
    if (!predicted) {
      ok = false;
      summary += c.name + ": no finite predicted K; ";
      continue;
    }
    const auto horizon = static_cast<std::size_t>(kC1HorizonFactor * *predicted);
    RunConfig cfg = config_for(p, c.spec, r.gamma_max, horizon, 0);
    cfg.stop_below = kC1Target;
    const Trajectory t = run(cfg, p);
    const double gap = t.samples.back().f_gap_virtual;
    const Fit fit = log_gap_fit(t, t.iterations / 2);
    const bool reached = gap <= kC1Target && t.iterations <= horizon;
    const bool linear = fit.slope < 0.0 && fit.r_squared > kC1MinRSquared;
    ok = ok && reached && linear;
    summary += c.name + ": gamma=" + sci(r.gamma_max) + " gap=" + sci(gap) + " at k=" +
               std::to_string(t.iterations) + " (<= " + std::to_string(horizon) + "), slope=" + sci(fit.slope) +
               " R^2=" + fmt("%.4f", fit.r_squared) + "; ";
  }
  summary += "[gap <= " + sci(kC1Target) + " within " + fmt("%g", kC1HorizonFactor) +
             " x predicted K; slope < 0; R^2 > " + fmt("%g", kC1MinRSquared) + "]";
  return verdict(ok, summary);
}

Outcome c2_fixed_point() {
  // Budget: 500 communication rounds of tau = 20 local steps at gamma = 1/(4L).
  const GlobalProblem p = make_quadratic(kReferenceQuadratic);
  const std::size_t tau = 20, rounds = 500;
  const double gamma = 1.0 / (4.0 * p.L());
  PresetOptions o;
  o.loop = LoopKind::fixed(tau);
  o.base = EstimatorType::FullGradient;
  const MethodSpec local_gd = make_preset(Preset::LocalSGD, o, p.m());
  const MethodSpec scaffold = make_preset(Preset::SSLocalSGD, o, p.m());
  std::vector<double> plain, shifted;
  std::size_t comm_plain = 0, comm_shifted = 0;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const Trajectory a = run(config_for(p, local_gd, gamma, tau * rounds, seed), p);
    const Trajectory b = run(config_for(p, scaffold, gamma, tau * rounds, seed), p);
    plain.push_back(a.samples.back().f_gap_virtual);
    shifted.push_back(b.samples.back().f_gap_virtual);
    comm_plain = a.comm_rounds;
    comm_shifted = b.comm_rounds;
  }
  const double mp = median(plain), ms = median(shifted);
  const bool ok = mp >= kC2PlateauFloor && ms <= kC2ShiftedTarget && comm_plain == comm_shifted;
  return verdict(ok, "local-gd median final gap " + sci(mp) + ", ss-local-sgd " + sci(ms) + " after " +
                         std::to_string(comm_plain) + "/" + std::to_string(comm_shifted) + " rounds (gamma=" +
                         fmt("%g", gamma) + ", tau=20) [local-gd >= " + sci(kC2PlateauFloor) +
                         ", ss-local-sgd <= " + sci(kC2ShiftedTarget) + ", equal rounds]");
}

std::optional<std::filesystem::path> mushrooms_path() {
  std::vector<std::filesystem::path> candidates;
  if (const char* dir = std::getenv("LSGD_DATA_DIR")) candidates.push_back(std::filesystem::path(dir) / "mushrooms");
  candidates.push_back(std::filesystem::path(LSGD_SOURCE_DIR) / "data" / "mushrooms");
  for (const auto& c : candidates)
    if (std::filesystem::exists(c)) return c;
  return std::nullopt;
}

Outcome c3_mushrooms() {
  const auto path = mushrooms_path();
  if (!path) return {Outcome::Status::Skip, "mushrooms not found (set LSGD_DATA_DIR or place data/mushrooms)"};
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset ds = load_libsvm(path->string());
  const GlobalProblem p = make_logistic(ds, partition(ds, 12, PartitionMode::Random, 0), 1e-4);
  const std::size_t tau = 40, rounds = kC3Rounds;
  PresetOptions sgd;
  sgd.loop = LoopKind::fixed(tau);
  sgd.base = EstimatorType::UniformSample;
  PresetOptions svrg;
  svrg.loop = LoopKind::fixed(tau);
  const MethodSpec local_sgd = make_preset(Preset::LocalSGD, sgd, p.m());
  const MethodSpec local_svrg = make_preset(Preset::LocalSVRG, svrg, p.m());
  const std::vector<double> gammas{1.0, 0.1, 0.01};
  // Independent runs, one thread each: results[g][method][seed].
  std::vector<RunConfig> jobs;
  for (double gamma : gammas)
    for (const MethodSpec* spec : {&local_sgd, &local_svrg})
      for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
        RunConfig cfg = config_for(p, *spec, gamma, tau * rounds, seed);
        cfg.record_every = tau * rounds;
        jobs.push_back(std::move(cfg));
      }
  std::vector<double> finals(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      try {
        finals[j] = run(jobs[j], p).samples.back().f_gap_avg;
      } catch (const std::exception& e) {
        errors[j] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t workers = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, jobs.size());
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const std::string& e : errors)
    if (!e.empty()) throw Error(e);

  bool ok = true;
  std::string summary;
  for (std::size_t g = 0; g < gammas.size(); ++g) {
    const auto at = [&](std::size_t method) {
      const auto first = finals.begin() + static_cast<std::ptrdiff_t>((2 * g + method) * kSeeds);
      return median(std::vector<double>(first, first + static_cast<std::ptrdiff_t>(kSeeds)));
    };
    const double ms = at(0), mv = at(1);
    ok = ok && mv <= ms;
    summary += "gamma=" + fmt("%g", gammas[g]) + ": svrg " + sci(mv) + " vs sgd " + sci(ms) + "; ";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ok = ok && secs < kC3MaxSeconds;
  return verdict(ok, summary + std::to_string(rounds) + " rounds, " + fmt("%.1f s", secs) +
                         " [svrg <= sgd for every gamma; < " +
                         fmt("%g", kC3MaxSeconds) + " s]");
}

Outcome c4_neighborhood_scaling() {
  // The neighborhood is proportional to gamma (plus a gamma^2 drift term), so
  // halving the stepsize shrinks the plateau by a factor in [1.5, 3]; the
  // verdict uses plateau(gamma) / plateau(gamma/2) and also prints the inverse.
  const GlobalProblem p = make_quadratic(kReferenceQuadratic);
  PresetOptions o;
  o.loop = LoopKind::fixed(5);
  o.base = EstimatorType::NoisyGradient;
  o.noise_variance = 1.0;
  const MethodSpec spec = make_preset(Preset::LocalSGD, o, p.m());
  const double gamma = analyze(spec, p, zeros(p)).gamma_max / 4.0;
  const std::size_t K = 40000;
  auto plateau = [&](double g, std::uint64_t seed) {
    const Trajectory t = run(config_for(p, spec, g, K, seed), p);
    double sum = 0.0;
    std::size_t count = 0;
    for (const Sample& s : t.samples)
      if (s.k > K / 2) {
        sum += s.f_gap_virtual;
        ++count;
      }
    return sum / static_cast<double>(count);
  };
  std::vector<double> ratios;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) ratios.push_back(plateau(gamma, seed) / plateau(gamma / 2.0, seed));
  const double r = median(ratios);
  const bool ok = r >= kC4RatioLow && r <= kC4RatioHigh;
  return verdict(ok, "gamma=" + sci(gamma) + ", median plateau(gamma)/plateau(gamma/2) = " + fmt("%.4f", r) +
                         " (inverse " + fmt("%.4f", 1.0 / r) + ") [in [" + fmt("%g", kC4RatioLow) + ", " +
                         fmt("%g", kC4RatioHigh) + "]]");
}

Outcome c5_reduction() {
  const GlobalProblem p = make_quadratic(kReferenceQuadratic);
  bool ok = true;
  double worst = 0.0;
  for (EstimatorType base : {EstimatorType::FullGradient, EstimatorType::NoisyGradient, EstimatorType::UniformSample}) {
    PresetOptions o;
    o.loop = LoopKind::fixed(1);
    o.base = base;
    o.noise_variance = base == EstimatorType::NoisyGradient ? 1.0 : 0.0;
    const MethodSpec spec = make_preset(Preset::LocalSGD, o, p.m());
    const double gamma = analyze(spec, p, zeros(p)).gamma_max;
    const CheckReport r = check_parallel_sgd_reduction(spec, p, gamma, 1000, 0);
    ok = ok && r.passed && !r.skipped && r.observed <= kC5Tolerance;
    worst = std::max(worst, r.observed);
  }
  return verdict(ok, "max deviation " + sci(worst) + " over K=1000 for full/noisy/uniform [<= " + sci(kC5Tolerance) + "]");
}

Outcome c6_invariants() {
  const GlobalProblem p = make_quadratic(kReferenceQuadratic);
  PresetOptions o;
  o.loop = LoopKind::bernoulli(0.2);
  o.base = EstimatorType::UniformSample;
  double worst_v = 0.0;
  std::size_t comm_records = 0, shift_checks = 0, shift_violations = 0;
  std::size_t unbiased_fail = 0, unbiased_total = 0;
  double worst_z = 0.0;
  for (Preset preset : all_presets()) {
    const MethodSpec spec = make_preset(preset, o, p.m());
    const double gamma = analyze(spec, p, zeros(p)).gamma_max;
    RunConfig cfg = config_for(p, spec, gamma, 2000, 1);
    run(cfg, p, [&](std::size_t, const MethodState& st, bool comm) {
      if (comm) {
        worst_v = std::max(worst_v, virtual_and_discrepancy(st).second);
        ++comm_records;
      }
      if (spec.shift.type == ShiftType::Learned) {
        Vector sum = zeros(p);
        for (const Vector& b : st.shared.shifts) sum += b;
        ++shift_checks;
        if (sum.cwiseAbs().maxCoeff() != 0.0) ++shift_violations;
      }
    });
    for (const AuditState& at : sample_states(cfg, p, 5)) {
      const CheckReport r = check_unbiasedness(spec, p, at, 10000, 2);
      ++unbiased_total;
      if (!r.passed) ++unbiased_fail;
      worst_z = std::max(worst_z, r.observed);
    }
  }
  const bool ok = worst_v <= kC6MaxDiscrepancy && shift_violations == 0 && unbiased_fail == 0 && comm_records > 0 &&
                  shift_checks > 0;
  return verdict(ok, "max V after " + std::to_string(comm_records) + " communications " + sci(worst_v) + "; " +
                         std::to_string(shift_violations) + "/" + std::to_string(shift_checks) +
                         " nonzero shift sums; unbiasedness " + std::to_string(unbiased_total - unbiased_fail) + "/" +
                         std::to_string(unbiased_total) + " pass (max z " + fmt("%.2f", worst_z) + ") [V <= " +
                         sci(kC6MaxDiscrepancy) + ", sum b_i == 0, z < " + fmt("%g", kStandardErrors) + "]");
}

Outcome c7_second_moment_audit() {
  const GlobalProblem quad = make_quadratic(kReferenceQuadratic);
  const Dataset ds = synthetic_classification(512, 32, 1);
  const GlobalProblem logi = make_logistic(ds, partition(ds, 8, PartitionMode::LabelSorted, 0), 1e-2);
  bool ok = true;
  std::string summary;
  for (const GlobalProblem* p : {&quad, &logi}) {
    std::size_t audits = 0, passed = 0, halved_detected = 0;
    for (Preset preset : all_presets()) {
      const bool has_base = preset == Preset::LocalSGD || preset == Preset::StarLocalSGD || preset == Preset::SSLocalSGD;
      std::vector<EstimatorType> bases{EstimatorType::NoisyGradient};
      if (has_base) bases = {EstimatorType::NoisyGradient, EstimatorType::UniformSample, EstimatorType::FullGradient};
      for (EstimatorType base : bases) {
        PresetOptions o;
        o.loop = LoopKind::bernoulli(0.2);
        o.base = base;
        o.noise_variance = base == EstimatorType::NoisyGradient ? 1.0 : 0.0;
        const MethodSpec spec = make_preset(preset, o, p->m());
        const KeyParams kp = key_params_for(spec, *p);
        const auto est = estimator_params(spec, *p);
        RunConfig cfg = config_for(*p, spec, analyze(spec, *p, zeros(*p)).gamma_max, 500, 3);
        cfg.x0 = Vector::Ones(static_cast<Eigen::Index>(p->d()));
        const auto states = sample_states(cfg, *p, 50);
        const CheckReport r = check_second_moment(spec, *p, kp, states, 400, 7, est);
        const CheckReport h = check_second_moment(spec, *p, halve_A(kp), states, 400, 7, halve_A(est));
        ++audits;
        passed += r.passed;
        halved_detected += !h.passed;
      }
    }
    ok = ok && passed == audits && halved_detected > 0;
    summary += to_string(p->kind()) + ": " + std::to_string(passed) + "/" + std::to_string(audits) +
               " pass, halved A detected in " + std::to_string(halved_detected) + "; ";
  }
  return verdict(ok, summary + "[50 states each; all pass; halved A fails at least once per problem kind]");
}

Outcome c8_theory_spot_values() {
  const double L = 1.7;
  EstimatorParams full;
  full.A = L;
  const KeyParams kp1 = derive_key_params({full}, ShiftCase::I, 0.0, L);
  const double g1 = max_stepsize(kp1, loop_params(kp1, LoopKind::fixed(1), DataModel::heterogeneous(), 0.0, L), L);
  const double e1 = std::abs(g1 - 1.0 / (6.0 * L));

  PresetConstants c;
  c.n = 10;
  c.L = c.max_Lij = c.expected_smoothness = 1.0;
  c.sigma_sq = 1.0;
  const KeyParams kp2 = *preset_key_params(Preset::LocalSGD, EstimatorType::NoisyGradient, c);
  const double g2 = max_stepsize(kp2, loop_params(kp2, LoopKind::fixed(5), DataModel::heterogeneous(), 1e-3, 1.0), 1.0);
  const double e2 = std::abs(g2 - 1.0 / (16.0 * std::sqrt(6.0 * std::numbers::e)));

  const LoopParams lp1 = loop_params(kp2, LoopKind::fixed(1), DataModel::heterogeneous(), 1e-3, 1.0);
  const bool zero = lp1.H(0.01) == 0.0 && lp1.D3(0.01) == 0.0;
  const bool ok = e1 <= kC8Tolerance && e2 <= kC8Tolerance && zero;
  return verdict(ok, "|gamma - 1/(6L)| = " + sci(e1) + ", |gamma - 1/(16 sqrt(6e))| = " + sci(e2) +
                         ", tau=1 H=D3=0: " + (zero ? "yes" : "no") + " [<= " + sci(kC8Tolerance) + ", exact zeros]");
}

Outcome c9_gradient_audit() {
  const GlobalProblem quad = make_quadratic(kReferenceQuadratic);
  const Dataset ds = synthetic_classification(512, 32, 1);
  const GlobalProblem logi = make_logistic(ds, partition(ds, 8, PartitionMode::Random, 0), 1e-2);
  const CheckReport rq = finite_difference_audit(quad, 20, 0);
  const CheckReport rl = finite_difference_audit(logi, 20, 0);
  const bool ok = rq.observed < kC9QuadraticBound && rl.observed < kC9LogisticBound && rq.passed && rl.passed;
  return verdict(ok, "quadratic " + sci(rq.observed) + ", logistic " + sci(rl.observed) + " at 20 points [< " +
                         sci(kC9QuadraticBound) + ", < " + sci(kC9LogisticBound) + "]");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome c10_determinism() {
  const auto dir = std::filesystem::temp_directory_path() / "lsgd_acceptance_c10";
  std::filesystem::remove_all(dir);
  std::size_t compared = 0, identical = 0;
  for (Preset preset : all_presets()) {
    ExperimentConfig c;
    c.problem.kind = ProblemKind::Quadratic;
    c.problem.n = 8;
    c.problem.m = 10;
    c.problem.d = 20;
    c.problem.mu = 1e-2;
    c.method.preset = preset;
    c.method.p = 0.2;
    c.method.base = EstimatorType::UniformSample;
    c.run.K = 500;
    c.run.seeds = {0, 1};
    const GlobalProblem p = build_problem(c.problem);
    std::vector<std::string> baseline;
    for (int pass = 0; pass < 3; ++pass) {
      c.run.threads = pass == 2 ? 8 : 1;
      c.run.output = (dir / (to_string(preset) + "_pass" + std::to_string(pass))).string();
      const auto outs = run_experiment(c, p);
      for (std::size_t s = 0; s < outs.size(); ++s) {
        const std::string csv = slurp(outs[s].csv_path);
        if (pass == 0) {
          baseline.push_back(csv);
          continue;
        }
        ++compared;
        identical += csv == baseline[s] && !csv.empty();
      }
    }
  }
  std::filesystem::remove_all(dir);
  return verdict(compared > 0 && identical == compared,
                 std::to_string(identical) + "/" + std::to_string(compared) +
                     " CSVs byte-identical (repeat and 1 vs 8 threads, six presets) [all identical]");
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome()> check;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "exact convergence of shifted variance-reduced methods", c1_exact_convergence},
      {2, "plain local methods stall at a wrong fixed point", c2_fixed_point},
      {3, "local-svrg beats local-sgd on mushrooms", c3_mushrooms},
      {4, "neighborhood scales with the stepsize", c4_neighborhood_scaling},
      {5, "tau = 1 reduces to parallel sgd", c5_reduction},
      {6, "structural invariants", c6_invariants},
      {7, "second-moment assumption audit", c7_second_moment_audit},
      {8, "theory spot values", c8_theory_spot_values},
      {9, "finite-difference gradient audit", c9_gradient_audit},
      {10, "bit-identical runs", c10_determinism},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lsgd acceptance criteria"};
  int only = 0;
  app.add_option("--criterion", only, "run a single criterion (1-10); default runs all")->check(CLI::Range(0, 10));
  CLI11_PARSE(app, argc, argv);

  const auto start = std::chrono::steady_clock::now();
  bool any_fail = false, any_run = false;
  for (const Criterion& c : criteria()) {
    if (only != 0 && c.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {Outcome::Status::Fail, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* status = o.status == Outcome::Status::Pass ? "PASS" : (o.status == Outcome::Status::Fail ? "FAIL" : "SKIP");
    std::printf("C%-2d %s  %s (%.1fs): %s\n", c.id, status, c.title, secs, o.summary.c_str());
    std::fflush(stdout);
    any_fail = any_fail || o.status == Outcome::Status::Fail;
    any_run = any_run || o.status != Outcome::Status::Skip;
  }
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (only == 0) {
    const bool in_budget = total < kTotalBudgetSeconds;
    std::printf("TOTAL %s  runtime %.1fs [< %g s]\n", in_budget ? "PASS" : "FAIL", total, kTotalBudgetSeconds);
    any_fail = any_fail || !in_budget;
  }
  if (any_fail) return 1;
  return any_run ? 0 : 77;
}
