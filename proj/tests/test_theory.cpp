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
#include "lsgd/experiment.hpp"
#include "lsgd/theory.hpp"

#include <cmath>
#include <numbers>
#include <vector>

using namespace lsgd;

namespace {

const double kE = std::numbers::e;

EstimatorParams make_params(double A, double B, double rho, double C) {
  EstimatorParams e;
  e.A = A;
  e.B = B;
  e.rho = rho;
  e.C = C;
  return e;
}

EstimatorParams full_gradient(double L) { return make_params(L, 0.0, 1.0, 0.0); }

KeyParams local_sgd_noisy(double L, double sigma_sq, std::size_t n) {
  PresetConstants c;
  c.n = n;
  c.L = L;
  c.max_Lij = L;
  c.expected_smoothness = L;
  c.sigma_sq = sigma_sq;
  return *preset_key_params(Preset::LocalSGD, EstimatorType::NoisyGradient, c);
}

}  // namespace

TEST_SUITE("theory") {

TEST_CASE("one client with full gradients gives the textbook constants") {
  const double L = 2.5;
  const KeyParams kp = derive_key_params({full_gradient(L)}, ShiftCase::I, 0.0, L);
  CHECK(kp.A == 4.0 * L);
  CHECK(kp.B == 2.0);
  CHECK(kp.F == 4.0 * L * L);
  CHECK(kp.D1 == 0.0);
  CHECK(kp.A_prime == 3.0 * L);
  CHECK(kp.B_prime == 1.0);
  CHECK(kp.F_prime == 4.0 * L * L);
  CHECK(kp.rho == 1.0);
  CHECK(kp.C == 0.0);
  CHECK(kp.G == 0.0);
  CHECK(kp.D2 == 0.0);
  const LoopParams lp = loop_params(kp, LoopKind::fixed(1), DataModel::heterogeneous(), 0.0, L);
  CHECK(max_stepsize(kp, lp, L) == doctest::Approx(1.0 / (6.0 * L)).epsilon(1e-15));
}

TEST_CASE("estimator constants for the documented estimators") {
  GlobalProblem p = make_quadratic({2, 4, 6, 0.01, 1});
  const double M = p.max_Lij();
  PresetOptions o;
  o.q = 0.25;
  const auto svrg = estimator_params(make_preset(Preset::LocalSVRG, o, p.m()), p);
  REQUIRE(svrg.size() == 2);
  CHECK(svrg[0].A == 2.0 * M);
  CHECK(svrg[0].B == 2.0);
  CHECK(svrg[0].rho == 0.25);
  CHECK(svrg[0].C == M * 0.25);
  PresetOptions f;
  f.base = EstimatorType::FullGradient;
  const auto full = estimator_params(make_preset(Preset::LocalSGD, f, p.m()), p);
  CHECK(full[1].A == p.L());
  CHECK(full[1].B == 0.0);
  CHECK(full[1].D1 == 0.0);
  PresetOptions z;
  z.base = EstimatorType::NoisyGradient;
  z.noise_variance = 0.7;
  CHECK(estimator_params(make_preset(Preset::LocalSGD, z, p.m()), p)[0].D1 == 0.7);
}

TEST_CASE("per-client LSVRG aggregates to C = 8 q M") {
  const double M = 3.0, q = 0.2;
  const EstimatorParams e = make_params(2.0 * M, 2.0, q, M * q);
  const KeyParams kp = derive_key_params({e, e, e}, ShiftCase::I, 0.0, 1.0);
  CHECK(kp.C == doctest::Approx(8.0 * q * M).epsilon(1e-15));
  CHECK(kp.rho == q);
}

TEST_CASE("learned shifts take the smaller of the two refresh rates") {
  EstimatorParams e = make_params(1.0, 2.0, 0.5, 0.1);
  e.A_shift = 1.0;
  e.D3 = 0.0;
  e.rho_shift = 0.2;
  CHECK(derive_key_params({e}, ShiftCase::III, 0.0, 1.0).rho == 0.2);
  e.rho_shift = 0.9;
  CHECK(derive_key_params({e}, ShiftCase::III, 0.0, 1.0).rho == 0.5);
  const EstimatorParams missing = make_params(1.0, 2.0, 0.5, 0.1);
  CHECK_THROWS_AS(derive_key_params({missing}, ShiftCase::III, 0.0, 1.0), TheoryError);
}

TEST_CASE("tau = 1 and p = 1 need no loop correction") {
  const KeyParams kp = local_sgd_noisy(1.0, 1.0, 4);
  for (LoopKind loop : {LoopKind::fixed(1), LoopKind::bernoulli(1.0)}) {
    const LoopParams lp = loop_params(kp, loop, DataModel::heterogeneous(), 0.1, 1.0);
    CHECK(lp.H(0.3) == 0.0);
    CHECK(lp.D3(0.3) == 0.0);
    CHECK(lp.caps.empty());
  }
}

TEST_CASE("local SGD with unit variance has D3 = 2e at tau = 2") {
  const KeyParams kp = local_sgd_noisy(1.0, 1.0, 4);
  const LoopParams lp = loop_params(kp, LoopKind::fixed(2), DataModel::heterogeneous(), 0.0, 1.0);
  CHECK(lp.D3(0.01) == doctest::Approx(2.0 * kE).epsilon(1e-15));
}

TEST_CASE("local SGD with tau = 5 and L = 1 has gamma_max = 1/(16 sqrt(6e))") {
  const KeyParams kp = local_sgd_noisy(1.0, 1.0, 10);
  const LoopParams lp = loop_params(kp, LoopKind::fixed(5), DataModel::heterogeneous(), 1e-3, 1.0);
  const double expected = 1.0 / (16.0 * std::sqrt(6.0 * kE));
  CHECK(std::abs(max_stepsize(kp, lp, 1.0) - expected) <= 1e-12);
  CHECK(expected == doctest::Approx(0.01547594406).epsilon(1e-9));
}

TEST_CASE("without B' the theorem caps reduce to 1/(2A') and L/F'") {
  KeyParams kp;
  kp.A_prime = 2.0;
  kp.F_prime = 8.0;
  kp.B_prime = 0.0;
  kp.C = 5.0;
  const auto caps = theorem_caps(kp, 1.0);
  REQUIRE(caps.size() == 2);
  CHECK(caps[0].value == 0.25);
  CHECK(caps[1].value == 0.125);
}

TEST_CASE("stepsize caps shrink as tau grows") {
  const KeyParams kp = local_sgd_noisy(1.0, 1.0, 4);
  double prev = INFINITY;
  for (std::size_t tau = 1; tau <= 64; tau *= 2) {
    const double g = max_stepsize(kp, loop_params(kp, LoopKind::fixed(tau), DataModel::heterogeneous(), 1e-3, 1.0), 1.0);
    CHECK(g <= prev);
    prev = g;
  }
}

TEST_CASE("a noiseless rate has zero neighborhood and a log-linear horizon") {
  KeyParams kp = derive_key_params({full_gradient(1.0)}, ShiftCase::I, 0.0, 1.0);
  const LoopParams lp = loop_params(kp, LoopKind::fixed(1), DataModel::heterogeneous(), 0.1, 1.0);
  const double gamma = 0.1, dist = 4.0;
  const RateBound rb = rate_bound(kp, lp, 1.0, gamma, 0.1, 0.0, dist);
  CHECK(rb.Psi0 == 0.0);
  CHECK(rb.theta == doctest::Approx(1.0 - std::min(gamma * 0.1, 0.25)).epsilon(1e-15));
  CHECK(rb.Phi0 == doctest::Approx(2.0 * dist / gamma).epsilon(1e-15));
  const double eps = 1e-6;
  const double expected = std::ceil(std::log(rb.Phi0 / eps) / -std::log(rb.theta));
  REQUIRE(rb.predicted_K(eps));
  CHECK(*rb.predicted_K(eps) == expected);
  CHECK(rb.bound(*rb.predicted_K(eps)) <= eps * (1.0 + 1e-12));
  CHECK(*rb.predicted_K(1e-8) >= *rb.predicted_K(eps));
}

TEST_CASE("targets inside the noise floor are unreachable") {
  const KeyParams kp = local_sgd_noisy(1.0, 1.0, 4);
  const LoopParams lp = loop_params(kp, LoopKind::fixed(1), DataModel::heterogeneous(), 0.1, 1.0);
  const RateBound rb = rate_bound(kp, lp, 1.0, 0.05, 0.1, 0.0, 1.0);
  REQUIRE(rb.Psi0 > 0.0);
  CHECK_FALSE(rb.predicted_K(rb.gamma * rb.Psi0 / 2.0));
  CHECK_FALSE(rb.predicted_K(rb.gamma * rb.Psi0));
}

TEST_CASE("without strong convexity the rate is sublinear") {
  const KeyParams kp = derive_key_params({full_gradient(1.0)}, ShiftCase::I, 0.0, 1.0);
  const LoopParams lp = loop_params(kp, LoopKind::fixed(1), DataModel::heterogeneous(), 0.0, 1.0);
  const RateBound rb = rate_bound(kp, lp, 1.0, 0.1, 0.0, 0.0, 1.0);
  CHECK(rb.theta == 1.0);
  CHECK(rb.bound(10.0) == doctest::Approx(rb.Phi0 / 10.0).epsilon(1e-15));
  CHECK(*rb.predicted_K(1e-3) == std::ceil(rb.Phi0 / 1e-3));
}

TEST_CASE("horizon stepsizes never exceed gamma_max") {
  const KeyParams kp = local_sgd_noisy(1.0, 1.0, 4);
  const LoopParams lp = loop_params(kp, LoopKind::fixed(4), DataModel::heterogeneous(), 1e-2, 1.0);
  const double gmax = max_stepsize(kp, lp, 1.0);
  double prev = INFINITY;
  for (double K : {1e2, 1e4, 1e6}) {
    const HorizonStepsize hs = horizon_stepsize(kp, lp, 1.0, 1e-2, 1.0, 0.0, K);
    CHECK(hs.gamma <= gmax);
    CHECK(hs.gamma > 0.0);
    CHECK(hs.gamma <= prev * (1.0 + 1e-12));
    prev = hs.gamma;
  }
  CHECK_THROWS_AS(horizon_stepsize(kp, lp, 1.0, 1e-2, 1.0, 0.0, 0.0), TheoryError);
}

TEST_CASE("zeta-heterogeneous loops add a 1/gamma term") {
  const KeyParams kp = local_sgd_noisy(1.0, 0.0, 4);
  const LoopParams lp = loop_params(kp, LoopKind::fixed(3), DataModel::zeta(0.5), 0.1, 1.0);
  CHECK(lp.D3_over_gamma == doctest::Approx(2.0 * 2.0 * 0.5 / 0.1).epsilon(1e-15));
  CHECK_THROWS_AS(loop_params(kp, LoopKind::fixed(3), DataModel::zeta(0.5), 0.0, 1.0), TheoryError);
}

TEST_CASE("key-value metadata reproduces gamma_max exactly") {
  const GlobalProblem p = make_quadratic({10, 20, 30, 1e-3, 0});
  for (Preset preset : all_presets()) {
    PresetOptions o;
    o.loop = LoopKind::bernoulli(0.1);
    o.base = EstimatorType::UniformSample;
    const MethodSpec spec = make_preset(preset, o, p.m());
    const TheoryReport r = analyze(spec, p, Vector::Zero(30));
    CHECK(gamma_max_from_key_values(to_key_values(r, 1e-6)) == r.gamma_max);
  }
}

TEST_CASE("s-local-svrg on the reference quadratic has a finite linear rate") {
  const GlobalProblem p = make_quadratic({10, 20, 30, 1e-3, 0});
  PresetOptions o;
  o.loop = LoopKind::bernoulli(0.1);
  o.q = 0.1;
  const TheoryReport r = analyze(make_preset(Preset::SLocalSVRG, o, p.m()), p, Vector::Zero(30));
  REQUIRE(r.rate);
  CHECK(r.rate->Psi0 == 0.0);
  CHECK(r.rate->theta < 1.0);
  CHECK(r.gamma_max > 0.0);
  CHECK(r.gamma_max <= 1.0 / (4.0 * p.L()));
  CHECK(r.rate->predicted_K(1e-10));
}

}  // TEST_SUITE
