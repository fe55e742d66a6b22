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

#include "lsgd/data.hpp"
#include "lsgd/engine.hpp"

#include <cmath>
#include <memory>
#include <sstream>
#include <vector>

using namespace lsgd;

namespace {

RunConfig base_config(const GlobalProblem& p, Preset preset, LoopKind loop, EstimatorType base, double gamma,
                      std::size_t K) {
  PresetOptions o;
  o.loop = loop;
  o.base = base;
  o.noise_variance = base == EstimatorType::NoisyGradient ? 0.5 : 0.0;
  RunConfig cfg;
  cfg.spec = make_preset(preset, o, p.m());
  cfg.gamma = gamma;
  cfg.K = K;
  cfg.x0 = Vector::Zero(static_cast<Eigen::Index>(p.d()));
  cfg.master_seed = 17;
  return cfg;
}

std::string csv_of(const Trajectory& t) {
  std::ostringstream out;
  write_csv(t, out);
  return out.str();
}

}  // namespace

TEST_SUITE("engine") {

TEST_CASE("two opposite iterates have mean zero and discrepancy |v|^2") {
  const Vector v = Vector::LinSpaced(4, 1.0, -2.5);
  const auto [mean, V] = virtual_and_discrepancy<double>({v, Vector(-v)});
  CHECK(mean.norm() == 0.0);
  CHECK(V == doctest::Approx(v.squaredNorm()).epsilon(1e-15));
}

TEST_CASE("discrepancy is templated on the scalar type") {
  const VectorX<float> a = VectorX<float>::Constant(3, 1.0f);
  const auto [mean, V] = virtual_and_discrepancy<float>({a, a});
  CHECK(V == 0.0f);
  CHECK(mean == a);
}

TEST_CASE("weighted averages follow the geometric weights") {
  const Vector x0 = Vector::Constant(2, 1.0);
  const Vector x1 = Vector::Constant(2, 4.0);
  // eta = 0.5, K = 1: weights 1 and 2, i.e. (2 x0 + 4 x1) / 6.
  const Vector avg = weighted_average<double>({x0, x1}, 0.5);
  CHECK((avg - (2.0 * x0 + 4.0 * x1) / 6.0).norm() <= 1e-15);
  // eta = 0: the plain mean.
  const Vector plain = weighted_average<double>({x0, x1, Vector(Vector::Constant(2, 7.0))}, 0.0);
  CHECK((plain - Vector::Constant(2, 4.0)).norm() <= 1e-15);
  // A single iterate is its own average.
  CHECK(weighted_average<double>({x1}, 0.3) == x1);
  CHECK_THROWS_AS(WeightedAverage<double>(1.0), Error);
}

TEST_CASE("one client takes a plain gradient step") {
  const GlobalProblem p = make_quadratic({1, 2, 4, 0.1, 3});
  const RunConfig cfg = base_config(p, Preset::LocalSGD, LoopKind::fixed(1), EstimatorType::FullGradient, 0.3, 1);
  MethodState st;
  initialize_states(cfg.spec, p, cfg.x0, cfg.master_seed, st);
  const Vector x = st.workers[0].x;
  step(cfg.spec, p, st, 0, cfg.gamma, cfg.master_seed);
  CHECK((st.workers[0].x - (x - 0.3 * p.local_gradient(0, x))).norm() == 0.0);
}

TEST_CASE("communication makes iterates identical") {
  const GlobalProblem p = make_quadratic({5, 2, 4, 0.1, 3});
  const RunConfig cfg = base_config(p, Preset::LocalSGD, LoopKind::fixed(4), EstimatorType::NoisyGradient, 0.1, 8);
  run(cfg, p, [&](std::size_t, const MethodState& st, bool comm) {
    if (!comm) return;
    for (const WorkerState& w : st.workers) CHECK(w.x == st.workers[0].x);
    // Identical iterates; only the rounding of their mean remains.
    CHECK(virtual_and_discrepancy(st).second <= 1e-24);
  });
}

TEST_CASE("identical clients reproduce gradient descent for any loop") {
  const auto local = std::make_shared<QuadraticLocal>(Matrix::Identity(3, 3), Vector::LinSpaced(3, 1.0, 2.0), 0.2);
  GlobalProblem p(ProblemKind::Quadratic, {local, local, local}, 0.2, 1.0, 1.0);
  attach_optimum(p);
  const double gamma = 0.25;
  for (LoopKind loop : {LoopKind::fixed(1), LoopKind::fixed(5), LoopKind::bernoulli(0.3)}) {
    const RunConfig cfg = base_config(p, Preset::LocalSGD, loop, EstimatorType::FullGradient, gamma, 20);
    Vector x = cfg.x0;
    run(cfg, p, [&](std::size_t, const MethodState& st, bool) {
      x -= gamma * p.gradient(x);
      const Vector xv = virtual_and_discrepancy(st).first;
      CHECK((xv - x).norm() <= 1e-13);
    });
  }
}

TEST_CASE("trajectories are bit-identical across repeats and thread counts") {
  const GlobalProblem p = make_quadratic({8, 4, 6, 0.01, 4});
  PresetOptions o;
  o.loop = LoopKind::bernoulli(0.2);
  o.base = EstimatorType::UniformSample;
  for (Preset preset : all_presets()) {
    RunConfig cfg;
    cfg.spec = make_preset(preset, o, p.m());
    cfg.gamma = 0.05;
    cfg.K = 60;
    cfg.x0 = Vector::Zero(6);
    cfg.master_seed = 99;
    const std::string one = csv_of(run(cfg, p));
    CHECK(csv_of(run(cfg, p)) == one);
    cfg.threads = 8;
    CHECK(csv_of(run(cfg, p)) == one);
  }
}

TEST_CASE("K = 1 records the start and a single step") {
  const GlobalProblem p = make_quadratic({2, 2, 3, 0.1, 1});
  RunConfig cfg = base_config(p, Preset::LocalSGD, LoopKind::fixed(1), EstimatorType::FullGradient, 0.1, 1);
  const Trajectory t = run(cfg, p);
  REQUIRE(t.samples.size() == 2);
  CHECK(t.samples[0].k == 0);
  CHECK(t.samples[1].k == 1);
  CHECK(t.iterations == 1);
  cfg.K = 0;
  CHECK_THROWS_AS(run(cfg, p), ConfigError);
}

TEST_CASE("recorded metrics are consistent") {
  const GlobalProblem p = make_quadratic({4, 3, 5, 0.05, 2});
  const RunConfig cfg = base_config(p, Preset::LocalSGD, LoopKind::fixed(3), EstimatorType::NoisyGradient, 0.1, 30);
  const Trajectory t = run(cfg, p);
  std::size_t prev_comm = 0;
  std::uint64_t prev_evals = 0;
  for (const Sample& s : t.samples) {
    CHECK(s.comm_rounds >= prev_comm);
    CHECK(s.grad_evals >= prev_evals);
    CHECK(s.f_gap_virtual >= -1e-12);
    CHECK(s.f_gap_avg >= -1e-12);
    CHECK(s.V >= 0.0);
    CHECK(s.comm_rounds == s.k / 3);
    prev_comm = s.comm_rounds;
    prev_evals = s.grad_evals;
  }
  CHECK(t.comm_rounds == 10);
}

TEST_CASE("diverging runs raise a divergence error") {
  const GlobalProblem p = make_quadratic({2, 2, 3, 0.1, 1});
  RunConfig cfg = base_config(p, Preset::LocalSGD, LoopKind::fixed(1), EstimatorType::FullGradient, 50.0, 500);
  CHECK_THROWS_AS(run(cfg, p), DivergenceError);
}

TEST_CASE("runs can stop early below a target gap") {
  const GlobalProblem p = make_quadratic({2, 2, 3, 0.5, 1});
  RunConfig cfg = base_config(p, Preset::LocalSGD, LoopKind::fixed(1), EstimatorType::FullGradient, 0.5, 10000);
  cfg.stop_below = 1e-10;
  const Trajectory t = run(cfg, p);
  CHECK(t.stopped_early);
  CHECK(t.iterations < 10000);
  CHECK(t.samples.back().f_gap_virtual <= 1e-10);
}

TEST_CASE("CSV output has the fixed header and full precision") {
  const GlobalProblem p = make_quadratic({2, 2, 3, 0.1, 1});
  const Trajectory t =
      run(base_config(p, Preset::LocalSGD, LoopKind::fixed(2), EstimatorType::FullGradient, 0.1, 4), p);
  const std::string csv = csv_of(t);
  CHECK(csv.rfind("k,comm_rounds,grad_evals,f_gap_virtual,f_gap_avg,dist_sq,V_k\n", 0) == 0);
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

}  // TEST_SUITE
