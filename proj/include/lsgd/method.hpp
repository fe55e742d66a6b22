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

#include "lsgd/problem.hpp"
#include "lsgd/rng.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lsgd {

// ---------------------------------------------------------------------------
// Declarative method description

enum class EstimatorType { FullGradient, UniformSample, NoisyGradient, LSVRG, StarSVRG, GlobalAnchorSVRG };

struct EstimatorKind {
  EstimatorType type = EstimatorType::FullGradient;
  /// Anchor refresh probability (LSVRG, GlobalAnchorSVRG).
  double q = 1.0;
  /// LSVRG only: false makes the anchor the shared y, as in GlobalAnchorSVRG.
  bool per_client_anchor = true;
  /// NoisyGradient: E||noise_i||^2 per client; a single entry applies to all clients.
  std::vector<double> noise_variance{0.0};

  double noise_for(std::size_t i) const;
};

enum class ShiftType { None, Star, Learned };
enum class ShiftSource { CurrentStochastic, AnchorStochastic, AnchorFull };

struct ShiftKind {
  ShiftType type = ShiftType::None;
  /// Learned: probability of h_i <- l_i (for anchor sources, the y-refresh probability).
  double rho_prime = 1.0;
  ShiftSource source = ShiftSource::AnchorFull;
  /// AnchorStochastic: minibatch size r of the target at y.
  std::size_t batch = 1;
};

enum class LoopType { Fixed, Bernoulli };

struct LoopKind {
  LoopType type = LoopType::Fixed;
  std::size_t tau = 1;
  double p = 1.0;

  static LoopKind fixed(std::size_t tau) { return {LoopType::Fixed, tau, 1.0}; }
  static LoopKind bernoulli(double p) { return {LoopType::Bernoulli, 1, p}; }
};

enum class Preset { LocalSGD, LocalSVRG, StarLocalSGD, SSLocalSGD, StarLocalSGDStar, SLocalSVRG };

std::string to_string(Preset p);
std::string to_string(EstimatorType t);
Preset preset_from_string(const std::string& name);
const std::vector<Preset>& all_presets();

struct MethodSpec {
  EstimatorKind estimator;
  ShiftKind shift;
  LoopKind loop;
  /// Anchor and shift refreshes fire exactly at communication events.
  bool coupled_updates = false;
  std::optional<Preset> preset;

  /// Throws ConfigError on invalid probabilities, loop parameters or couplings.
  void validate() const;
  /// Validation against a problem (optimum needed for Star variants, etc.).
  void validate(const GlobalProblem& p) const;

  bool needs_local_anchor() const;
  bool needs_global_anchor() const;
  bool needs_shift_memory() const;
  /// Probability of the shared y refresh when it is not coupled.
  double global_anchor_q() const;
};

/// Options that specialize a preset. Unset values take documented defaults:
/// q = 1/m for Local-SVRG; for SS-Local-SGD and S-Local-SVRG, q = p (Bernoulli
/// loop) or 1/tau (fixed loop), r = ceil(1/p) (or tau), and coupled updates.
struct PresetOptions {
  LoopKind loop = LoopKind::fixed(1);
  std::optional<double> q;
  std::optional<std::size_t> r;
  /// Base estimator for local-sgd / star-local-sgd / ss-local-sgd.
  EstimatorType base = EstimatorType::NoisyGradient;
  double noise_variance = 0.0;
  std::optional<bool> coupled;
};

MethodSpec make_preset(Preset preset, const PresetOptions& opt, std::size_t m);

// ---------------------------------------------------------------------------
// Runtime state

struct WorkerState {
  Vector x;
  std::optional<Vector> anchor;       // per-client anchor w_i
  std::optional<Vector> anchor_grad;  // grad f_i(w_i)
  std::optional<Vector> h;            // learned shift memory h_i
};

struct SharedState {
  std::optional<Vector> y;         // shared anchor
  std::vector<Vector> grad_at_y;   // grad f_i(y) per client
  Vector grad_f_at_y;              // (1/n) sum_i grad f_i(y)
  std::vector<Vector> shifts;      // b_i for learned shifts (sum is exactly zero)
};

struct MethodState {
  std::vector<WorkerState> workers;
  SharedState shared;
};

/// Builds the initial state at x0; returns the gradient evaluations spent.
std::uint64_t initialize_states(const MethodSpec& spec, const GlobalProblem& p, const Vector& x0,
                                std::uint64_t seed, MethodState& state);

/// Draws a_i from the estimator at x_i using stream (seed, Direction, i, k, draw).
std::uint64_t sample_estimator(const MethodSpec& spec, const GlobalProblem& p, std::size_t i,
                               const WorkerState& w, const SharedState& s, std::uint64_t k,
                               std::uint64_t seed, std::uint64_t draw, Vector& out);

/// The shift b_i currently in force (zero vector for ShiftType::None).
void current_shift(const MethodSpec& spec, const GlobalProblem& p, std::size_t i, const SharedState& s,
                   Vector& out);

/// g_i = a_i - b_i; returns gradient evaluations spent.
std::uint64_t sample_direction(const MethodSpec& spec, const GlobalProblem& p, std::size_t i,
                               const WorkerState& w, const SharedState& s, std::uint64_t k,
                               std::uint64_t seed, std::uint64_t draw, Vector& out);

/// Target l_i of a learned shift. Anchor sources evaluate at `at` (= y), the
/// current-stochastic source at `at` (= x_i). Stream (seed, Batch, i, k, draw).
std::uint64_t learned_target(const MethodSpec& spec, const GlobalProblem& p, std::size_t i, const Vector& at,
                             const std::optional<Vector>& grad_i_at, std::uint64_t k, std::uint64_t seed,
                             std::uint64_t draw, Vector& out);

/// b_i = h_i - mean(h) for i < n-1 and b_{n-1} = -sum_{i<n-1} b_i, so the sum is exactly 0.
void recompute_shifts(MethodState& state);

/// Outcome of the refresh coins at iteration k.
struct RefreshEvents {
  std::vector<bool> local_anchor;
  bool global_anchor = false;
  std::vector<bool> shift;
};

/// Draws every refresh coin of iteration k without touching the state.
RefreshEvents refresh_coins(const MethodSpec& spec, std::size_t n, bool comm, std::uint64_t k,
                            std::uint64_t seed);

/// Applies the refresh step using the pre-step iterates and virtual iterate.
std::uint64_t refresh_state(const MethodSpec& spec, const GlobalProblem& p, MethodState& state,
                            const Vector& virtual_x, bool comm, std::uint64_t k, std::uint64_t seed);

/// Fixed: (k+1) mod tau == 0. Bernoulli: one shared coin from (seed, Loop, 0, k).
bool is_communication(const LoopKind& loop, std::uint64_t k, std::uint64_t seed);

}  // namespace lsgd
