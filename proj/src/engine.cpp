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

#include "lsgd/engine.hpp"

#include <cmath>
#include <cstdio>

namespace lsgd {

std::pair<Vector, double> virtual_and_discrepancy(const MethodState& state) {
  std::vector<Vector> xs;
  xs.reserve(state.workers.size());
  for (const auto& w : state.workers) xs.push_back(w.x);
  return virtual_and_discrepancy(xs);
}

void RunConfig::validate(const GlobalProblem& p) const {
  spec.validate(p);
  if (!(gamma > 0.0 && std::isfinite(gamma))) throw ConfigError("gamma must be > 0");
  if (K < 1) throw ConfigError("K must be >= 1");
  if (!(eta_weight >= 0.0 && eta_weight < 1.0)) throw ConfigError("eta_weight must lie in [0, 1)");
  if (record_every < 1) throw ConfigError("record_every must be >= 1");
  if (static_cast<std::size_t>(x0.size()) != p.d()) throw ConfigError("x0 has the wrong dimension");
  if (!p.optimum()) throw ConfigError("runs require a problem with a known optimum");
}

StepResult step(const MethodSpec& spec, const GlobalProblem& p, MethodState& state, std::uint64_t k, double gamma,
                std::uint64_t seed, ClientPool* pool) {
  const std::size_t n = p.n();
  StepResult res;
  res.communicated = is_communication(spec.loop, k, seed);

  std::vector<Vector> xs;
  xs.reserve(n);
  for (const auto& w : state.workers) xs.push_back(w.x);
  const Vector virtual_x = pairwise_mean(xs);

  std::vector<Vector> dirs(n);
  std::vector<std::uint64_t> evals(n, 0);
  auto draw = [&](std::size_t i) {
    evals[i] = sample_direction(spec, p, i, state.workers[i], state.shared, k, seed, 0, dirs[i]);
  };
  if (pool)
    pool->run(n, draw);
  else
    for (std::size_t i = 0; i < n; ++i) draw(i);
  for (std::uint64_t e : evals) res.grad_evals += e;

  res.grad_evals += refresh_state(spec, p, state, virtual_x, res.communicated, k, seed);

  for (std::size_t i = 0; i < n; ++i) state.workers[i].x -= gamma * dirs[i];
  if (res.communicated) {
    for (std::size_t i = 0; i < n; ++i) xs[i] = state.workers[i].x;
    const Vector mean = pairwise_mean(xs);
    for (auto& w : state.workers) w.x = mean;
  }
  return res;
}

Trajectory run(const RunConfig& cfg, const GlobalProblem& p, const StepObserver& observer) {
  cfg.validate(p);
  const Vector& xstar = p.optimum()->x;
  MethodState state;
  Trajectory traj;
  traj.total_grad_evals = initialize_states(cfg.spec, p, cfg.x0, cfg.master_seed, state);

  WeightedAverage<double> avg(cfg.eta_weight);
  avg.push(cfg.x0);

  auto record = [&](std::size_t k, const Vector& xv, double v) {
    Sample s;
    s.k = k;
    s.comm_rounds = traj.comm_rounds;
    s.grad_evals = traj.total_grad_evals;
    s.f_gap_virtual = p.suboptimality(xv);
    s.f_gap_avg = p.suboptimality(avg.value());
    s.dist_sq = (xv - xstar).squaredNorm();
    s.V = v;
    traj.samples.push_back(s);
    return s;
  };

  const Sample first = record(0, cfg.x0, 0.0);
  const double initial_gap = first.f_gap_virtual > 0.0 ? first.f_gap_virtual : 1.0;
  const double limit = 1e12 * initial_gap;

  std::optional<ClientPool> pool;
  if (cfg.threads > 1) pool.emplace(cfg.threads);

  Vector xv = cfg.x0;
  if (cfg.stop_below && first.f_gap_virtual <= *cfg.stop_below) {
    traj.stopped_early = true;
  } else {
    for (std::size_t k = 0; k < cfg.K; ++k) {
      const StepResult r = step(cfg.spec, p, state, k, cfg.gamma, cfg.master_seed, pool ? &*pool : nullptr);
      traj.total_grad_evals += r.grad_evals;
      if (r.communicated) ++traj.comm_rounds;
      traj.iterations = k + 1;
      for (const auto& w : state.workers)
        if (!w.x.allFinite()) throw DivergenceError(k, "non-finite iterate");

      const auto [x_next, v] = virtual_and_discrepancy(state);
      xv = x_next;
      avg.push(xv);
      if (observer) observer(k + 1, state, r.communicated);

      const bool due = (k + 1) % cfg.record_every == 0 || r.communicated || k + 1 == cfg.K;
      if (!due) continue;
      const Sample s = record(k + 1, xv, v);
      if (!std::isfinite(s.f_gap_virtual) || s.f_gap_virtual > limit)
        throw DivergenceError(k, "function gap exceeded 1e12 x initial gap");
      if (cfg.stop_below && s.f_gap_virtual <= *cfg.stop_below) {
        traj.stopped_early = true;
        break;
      }
    }
  }
  traj.final_x_virtual = xv;
  traj.final_x_avg = avg.value();
  return traj;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(const Trajectory& t, std::ostream& out) {
  out << "k,comm_rounds,grad_evals,f_gap_virtual,f_gap_avg,dist_sq,V_k\n";
  for (const Sample& s : t.samples) {
    out << s.k << ',' << s.comm_rounds << ',' << s.grad_evals << ',' << format_double(s.f_gap_virtual) << ','
        << format_double(s.f_gap_avg) << ',' << format_double(s.dist_sq) << ',' << format_double(s.V) << '\n';
  }
}

}  // namespace lsgd
