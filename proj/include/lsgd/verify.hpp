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

#include "lsgd/engine.hpp"
#include "lsgd/theory.hpp"

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace lsgd {

/// Outcome of one empirical check. A check passes when
///   observed <= bound * (1 + rel_tol) + slack,
/// where `slack` absorbs Monte-Carlo error (a multiple of the standard error)
/// and floating-point rounding. margin = bound * (1 + rel_tol) + slack - observed.
struct CheckReport {
  std::string name;
  bool passed = true;
  bool skipped = false;
  double observed = 0.0;
  double bound = 0.0;
  double slack = 0.0;
  std::uint64_t samples = 0;
  double margin = 0.0;
  std::string detail;
  /// Sub-checks (per state / per inequality); the report itself shows the worst one.
  std::vector<CheckReport> items;
};

/// Multiplicative slack on inequality checks.
inline constexpr double kRelativeSlack = 0.02;
/// Number of standard errors allowed on Monte-Carlo estimates.
inline constexpr double kStandardErrors = 4.0;

/// A method state together with the iteration index whose randomness acts on it next.
struct AuditState {
  std::size_t k = 0;
  MethodState state;
};

/// Runs cfg and keeps `count` states spread evenly over the trajectory.
std::vector<AuditState> sample_states(const RunConfig& cfg, const GlobalProblem& p, std::size_t count);

/// Realization of sigma_k^2 named by kp.sigma_model at `state`. Shifts learned
/// from a stochastic target at the shared anchor are taken in expectation over
/// the target's sampling.
double sigma_sq_at(const MethodSpec& spec, const GlobalProblem& p, const KeyParams& kp, const MethodState& state);

/// Monte-Carlo check that (1/n) sum_i E g_i = (1/n) sum_i grad f_i(x_i). Every
/// coordinate must deviate by less than 4 standard errors (exactly zero up to
/// rounding for deterministic directions). For unshifted methods each client's
/// direction is additionally checked on its own.
CheckReport check_unbiasedness(const MethodSpec& spec, const GlobalProblem& p, const AuditState& at,
                               std::uint64_t draws, std::uint64_t seed);

/// Monte-Carlo audit of the second-moment inequalities (both global bounds,
/// the split bounds and the sigma recursion) at every state with constants kp.
/// When per-client estimator constants are given, the estimator inequality
///   E||a_i - grad f_i(x*)||^2 <= 2 A_i D_{f_i}(x_i, x*) + B_i sigma_i^2 + D1_i
/// that the key constants are derived from is audited as well.
CheckReport check_second_moment(const MethodSpec& spec, const GlobalProblem& p, const KeyParams& kp,
                                const std::vector<AuditState>& states, std::uint64_t draws, std::uint64_t seed,
                                const std::vector<EstimatorParams>& estimators = {});

/// Halves every A-type constant (A, A', A~, A^); used to test the audit's power.
KeyParams halve_A(KeyParams kp);
/// Halves every per-client A_i.
std::vector<EstimatorParams> halve_A(std::vector<EstimatorParams> estimators);

/// Runs the engine with tau = 1 (or p = 1) next to an independent parallel
/// minibatch SGD loop that draws from the same streams; passes when the
/// iterates agree within 1e-12 per coordinate. Skipped for other loops/shifts.
CheckReport check_parallel_sgd_reduction(const MethodSpec& spec, const GlobalProblem& p, double gamma,
                                         std::size_t K, std::uint64_t seed);

/// Central differences (extended precision) against analytic local gradients
/// at the zero vector and `points - 1` random probes; reports the largest
/// relative error max_c |fd_c - g_c| / max(1, ||g||_inf). Bounds: 1e-9
/// (quadratic) and 1e-5 (logistic).
CheckReport finite_difference_audit(const GlobalProblem& p, std::size_t points, std::uint64_t seed);

/// Human-readable table plus key=value lines.
void print_check(const CheckReport& r, std::ostream& out, bool with_items = false);

}  // namespace lsgd
