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

#include "lsgd/method.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace lsgd {

// ---------------------------------------------------------------------------
// Names

std::string to_string(Preset p) {
  switch (p) {
    case Preset::LocalSGD: return "local-sgd";
    case Preset::LocalSVRG: return "local-svrg";
    case Preset::StarLocalSGD: return "star-local-sgd";
    case Preset::SSLocalSGD: return "ss-local-sgd";
    case Preset::StarLocalSGDStar: return "star-local-sgd-star";
    case Preset::SLocalSVRG: return "s-local-svrg";
  }
  return "?";
}

std::string to_string(EstimatorType t) {
  switch (t) {
    case EstimatorType::FullGradient: return "full";
    case EstimatorType::UniformSample: return "uniform";
    case EstimatorType::NoisyGradient: return "noisy";
    case EstimatorType::LSVRG: return "lsvrg";
    case EstimatorType::StarSVRG: return "star-svrg";
    case EstimatorType::GlobalAnchorSVRG: return "global-anchor-svrg";
  }
  return "?";
}

Preset preset_from_string(const std::string& name) {
  for (Preset p : all_presets())
    if (to_string(p) == name) return p;
  throw ConfigError("unknown preset '" + name + "'");
}

const std::vector<Preset>& all_presets() {
  static const std::vector<Preset> kAll = {Preset::LocalSGD,     Preset::LocalSVRG,        Preset::StarLocalSGD,
                                           Preset::SSLocalSGD,   Preset::StarLocalSGDStar, Preset::SLocalSVRG};
  return kAll;
}

double EstimatorKind::noise_for(std::size_t i) const {
  if (noise_variance.empty()) return 0.0;
  return noise_variance.size() == 1 ? noise_variance.front() : noise_variance.at(i);
}

// ---------------------------------------------------------------------------
// Validation

namespace {

bool is_probability(double v) { return v > 0.0 && v <= 1.0; }

}  // namespace

bool MethodSpec::needs_local_anchor() const {
  return estimator.type == EstimatorType::LSVRG && estimator.per_client_anchor;
}

bool MethodSpec::needs_global_anchor() const {
  const bool est = estimator.type == EstimatorType::GlobalAnchorSVRG ||
                   (estimator.type == EstimatorType::LSVRG && !estimator.per_client_anchor);
  const bool shf = shift.type == ShiftType::Learned && shift.source != ShiftSource::CurrentStochastic;
  return est || shf;
}

bool MethodSpec::needs_shift_memory() const { return shift.type == ShiftType::Learned; }

double MethodSpec::global_anchor_q() const {
  const bool est = estimator.type == EstimatorType::GlobalAnchorSVRG ||
                   (estimator.type == EstimatorType::LSVRG && !estimator.per_client_anchor);
  return est ? estimator.q : shift.rho_prime;
}

void MethodSpec::validate() const {
  if (loop.type == LoopType::Fixed && loop.tau < 1) throw ConfigError("tau must be >= 1");
  if (loop.type == LoopType::Bernoulli && !is_probability(loop.p)) throw ConfigError("p must lie in (0, 1]");
  const auto t = estimator.type;
  if ((t == EstimatorType::LSVRG || t == EstimatorType::GlobalAnchorSVRG) && !is_probability(estimator.q))
    throw ConfigError("q must lie in (0, 1]");
  for (double s : estimator.noise_variance)
    if (!(s >= 0.0 && std::isfinite(s))) throw ConfigError("noise variance must be finite and >= 0");
  if (shift.type == ShiftType::Learned) {
    if (!is_probability(shift.rho_prime)) throw ConfigError("rho_prime must lie in (0, 1]");
    if (shift.batch < 1) throw ConfigError("shift batch r must be >= 1");
  }
  const bool est_y = t == EstimatorType::GlobalAnchorSVRG || (t == EstimatorType::LSVRG && !estimator.per_client_anchor);
  const bool shift_y = shift.type == ShiftType::Learned && shift.source != ShiftSource::CurrentStochastic;
  if (est_y && shift_y && estimator.q != shift.rho_prime)
    throw ConfigError("shared anchor: estimator q and shift rho_prime must coincide");
  if (coupled_updates && loop.type == LoopType::Bernoulli) {
    // Coupled refreshes fire with the communication coin, i.e. with probability p.
    if ((needs_local_anchor() || est_y) && estimator.q != loop.p)
      throw ConfigError("coupled updates require q == p");
    if (shift.type == ShiftType::Learned && shift.rho_prime != loop.p)
      throw ConfigError("coupled updates require rho_prime == p");
  }
  if (preset == Preset::SLocalSVRG && loop.type == LoopType::Bernoulli && estimator.q > loop.p)
    throw ConfigError("s-local-svrg requires q <= p");
}

void MethodSpec::validate(const GlobalProblem& p) const {
  validate();
  const bool star = shift.type == ShiftType::Star || estimator.type == EstimatorType::StarSVRG;
  if (star && !p.optimum()) throw ConfigError("star shift / star estimator require the exact optimum");
  if (estimator.noise_variance.size() > 1 && estimator.noise_variance.size() != p.n())
    throw ConfigError("per-client noise variance list must have n entries");
}

// ---------------------------------------------------------------------------
// Presets

MethodSpec make_preset(Preset preset, const PresetOptions& opt, std::size_t m) {
  MethodSpec s;
  s.preset = preset;
  s.loop = opt.loop;
  const double loop_rate =
      opt.loop.type == LoopType::Bernoulli ? opt.loop.p : 1.0 / static_cast<double>(std::max<std::size_t>(opt.loop.tau, 1));
  auto base = [&] {
    EstimatorKind e;
    e.type = opt.base;
    if (opt.base != EstimatorType::FullGradient && opt.base != EstimatorType::UniformSample &&
        opt.base != EstimatorType::NoisyGradient)
      throw ConfigError("base estimator must be full, uniform or noisy");
    e.noise_variance = {opt.base == EstimatorType::NoisyGradient ? opt.noise_variance : 0.0};
    return e;
  };
  switch (preset) {
    case Preset::LocalSGD:
      s.estimator = base();
      break;
    case Preset::LocalSVRG:
      s.estimator.type = EstimatorType::LSVRG;
      s.estimator.q = opt.q.value_or(1.0 / static_cast<double>(m));
      s.coupled_updates = opt.coupled.value_or(false);
      break;
    case Preset::StarLocalSGD:
      s.estimator = base();
      s.shift.type = ShiftType::Star;
      break;
    case Preset::SSLocalSGD: {
      s.estimator = base();
      s.coupled_updates = opt.coupled.value_or(true);
      s.shift.type = ShiftType::Learned;
      s.shift.source = ShiftSource::AnchorStochastic;
      s.shift.rho_prime = opt.q.value_or(loop_rate);
      const double r_default =
          opt.loop.type == LoopType::Bernoulli ? std::ceil(1.0 / opt.loop.p) : static_cast<double>(opt.loop.tau);
      s.shift.batch = opt.r.value_or(static_cast<std::size_t>(r_default));
      break;
    }
    case Preset::StarLocalSGDStar:
      s.estimator.type = EstimatorType::StarSVRG;
      s.shift.type = ShiftType::Star;
      break;
    case Preset::SLocalSVRG:
      s.estimator.type = EstimatorType::GlobalAnchorSVRG;
      s.estimator.q = opt.q.value_or(loop_rate);
      s.coupled_updates = opt.coupled.value_or(true);
      s.shift.type = ShiftType::Learned;
      s.shift.source = ShiftSource::AnchorFull;
      s.shift.rho_prime = s.estimator.q;
      break;
  }
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

std::size_t draw_index(CounterEngine& gen, std::size_t m) {
  std::uniform_int_distribution<std::size_t> pick(0, m - 1);
  return pick(gen);
}

bool draw_coin(std::uint64_t seed, Stream stream, std::uint64_t a, std::uint64_t k, double prob) {
  if (prob >= 1.0) return true;
  CounterEngine gen(seed, stream, a, k);
  std::bernoulli_distribution coin(prob);
  return coin(gen);
}

void add_noise(CounterEngine& gen, double variance, Vector& out) {
  if (variance <= 0.0) return;
  std::normal_distribution<double> normal(0.0, std::sqrt(variance / static_cast<double>(out.size())));
  for (Eigen::Index r = 0; r < out.size(); ++r) out(r) += normal(gen);
}

/// One stochastic target at `at` using the estimator's base oracle, averaged over r draws.
std::uint64_t base_oracle_batch(const MethodSpec& spec, const GlobalProblem& p, std::size_t i, const Vector& at,
                                std::size_t r, CounterEngine& gen, Vector& out) {
  const LocalObjective& f = p.local(i);
  const std::uint64_t m = p.m();
  switch (spec.estimator.type) {
    case EstimatorType::FullGradient:
      f.gradient(at, out);
      return m;
    case EstimatorType::NoisyGradient: {
      f.gradient(at, out);
      Vector noise = Vector::Zero(out.size());
      for (std::size_t b = 0; b < r; ++b) add_noise(gen, spec.estimator.noise_for(i), noise);
      out += noise / static_cast<double>(r);
      return m;
    }
    default: {
      out.setZero(at.size());
      Vector g(at.size());
      for (std::size_t b = 0; b < r; ++b) {
        f.component_gradient(draw_index(gen, p.m()), at, g);
        out += g;
      }
      out /= static_cast<double>(r);
      return r;
    }
  }
}

}  // namespace

std::uint64_t sample_estimator(const MethodSpec& spec, const GlobalProblem& p, std::size_t i,
                               const WorkerState& w, const SharedState& s, std::uint64_t k, std::uint64_t seed,
                               std::uint64_t draw, Vector& out) {
  const LocalObjective& f = p.local(i);
  CounterEngine gen(seed, Stream::Direction, i, k, draw);
  out.resize(w.x.size());
  switch (spec.estimator.type) {
    case EstimatorType::FullGradient:
      f.gradient(w.x, out);
      return p.m();
    case EstimatorType::UniformSample:
      f.component_gradient(draw_index(gen, p.m()), w.x, out);
      return 1;
    case EstimatorType::NoisyGradient:
      f.gradient(w.x, out);
      add_noise(gen, spec.estimator.noise_for(i), out);
      return p.m();
    case EstimatorType::LSVRG:
    case EstimatorType::GlobalAnchorSVRG: {
      const bool own = spec.needs_local_anchor();
      if (own && (!w.anchor || !w.anchor_grad)) throw Error("missing anchor state for client " + std::to_string(i));
      if (!own && !s.y) throw Error("missing shared anchor");
      const Vector& anchor = own ? *w.anchor : *s.y;
      const Vector& anchor_grad = own ? *w.anchor_grad : s.grad_at_y.at(i);
      const std::size_t j = draw_index(gen, p.m());
      Vector ga(out.size());
      f.component_gradient(j, w.x, out);
      f.component_gradient(j, anchor, ga);
      out -= ga;
      out += anchor_grad;
      return 2;
    }
    case EstimatorType::StarSVRG: {
      if (!p.optimum()) throw Error("StarSVRG requires the exact optimum");
      const std::size_t j = draw_index(gen, p.m());
      Vector gs(out.size());
      f.component_gradient(j, w.x, out);
      f.component_gradient(j, p.optimum()->x, gs);
      out -= gs;
      out += p.local_gradients_at_optimum()[i];
      return 2;
    }
  }
  return 0;
}

void current_shift(const MethodSpec& spec, const GlobalProblem& p, std::size_t i, const SharedState& s,
                   Vector& out) {
  switch (spec.shift.type) {
    case ShiftType::None:
      out.setZero(static_cast<Eigen::Index>(p.d()));
      return;
    case ShiftType::Star:
      if (!p.optimum()) throw Error("Star shift requires the exact optimum");
      out = p.local_gradients_at_optimum()[i];
      return;
    case ShiftType::Learned:
      out = s.shifts.at(i);
      return;
  }
}

std::uint64_t sample_direction(const MethodSpec& spec, const GlobalProblem& p, std::size_t i,
                               const WorkerState& w, const SharedState& s, std::uint64_t k, std::uint64_t seed,
                               std::uint64_t draw, Vector& out) {
  const std::uint64_t evals = sample_estimator(spec, p, i, w, s, k, seed, draw, out);
  switch (spec.shift.type) {
    case ShiftType::None:
      break;
    case ShiftType::Star:
      if (!p.optimum()) throw Error("Star shift requires the exact optimum");
      out -= p.local_gradients_at_optimum()[i];
      break;
    case ShiftType::Learned:
      out -= s.shifts.at(i);
      break;
  }
  return evals;
}

std::uint64_t learned_target(const MethodSpec& spec, const GlobalProblem& p, std::size_t i, const Vector& at,
                             const std::optional<Vector>& grad_i_at, std::uint64_t k, std::uint64_t seed,
                             std::uint64_t draw, Vector& out) {
  if (spec.shift.source == ShiftSource::AnchorFull) {
    if (grad_i_at) {
      out = *grad_i_at;
      return 0;
    }
    out.resize(at.size());
    p.local(i).gradient(at, out);
    return p.m();
  }
  CounterEngine gen(seed, Stream::Batch, i, k, draw);
  out.resize(at.size());
  return base_oracle_batch(spec, p, i, at, spec.shift.batch, gen, out);
}

void recompute_shifts(MethodState& state) {
  const std::size_t n = state.workers.size();
  std::vector<Vector> hs;
  hs.reserve(n);
  for (const auto& w : state.workers) hs.push_back(*w.h);
  const Vector mean = pairwise_mean(hs);
  auto& b = state.shared.shifts;
  b.resize(n);
  Vector acc = Vector::Zero(mean.size());
  for (std::size_t i = 0; i + 1 < n; ++i) {
    b[i] = hs[i] - mean;
    acc += b[i];
  }
  b[n - 1] = -acc;
}

// ---------------------------------------------------------------------------
// State lifecycle

std::uint64_t initialize_states(const MethodSpec& spec, const GlobalProblem& p, const Vector& x0,
                                std::uint64_t seed, MethodState& state) {
  spec.validate(p);
  if (static_cast<std::size_t>(x0.size()) != p.d()) throw Error("x0 has the wrong dimension");
  const std::size_t n = p.n();
  std::uint64_t evals = 0;
  state.workers.assign(n, WorkerState{});
  state.shared = SharedState{};
  for (std::size_t i = 0; i < n; ++i) {
    WorkerState& w = state.workers[i];
    w.x = x0;
    if (spec.needs_local_anchor()) {
      w.anchor = x0;
      w.anchor_grad = p.local_gradient(i, x0);
      evals += p.m();
    }
  }
  const bool need_y_grads = spec.estimator.type == EstimatorType::GlobalAnchorSVRG ||
                            (spec.estimator.type == EstimatorType::LSVRG && !spec.estimator.per_client_anchor) ||
                            (spec.shift.type == ShiftType::Learned && spec.shift.source == ShiftSource::AnchorFull);
  if (spec.needs_global_anchor()) {
    state.shared.y = x0;
    if (need_y_grads) {
      for (std::size_t i = 0; i < n; ++i) state.shared.grad_at_y.push_back(p.local_gradient(i, x0));
      state.shared.grad_f_at_y = pairwise_mean(state.shared.grad_at_y);
      evals += n * p.m();
    }
  }
  if (spec.needs_shift_memory()) {
    for (std::size_t i = 0; i < n; ++i) {
      Vector h;
      std::optional<Vector> g;
      if (!state.shared.grad_at_y.empty()) g = state.shared.grad_at_y[i];
      evals += learned_target(spec, p, i, x0, g, kInitialIteration, seed, 0, h);
      state.workers[i].h = std::move(h);
    }
    recompute_shifts(state);
  }
  return evals;
}

RefreshEvents refresh_coins(const MethodSpec& spec, std::size_t n, bool comm, std::uint64_t k, std::uint64_t seed) {
  RefreshEvents ev;
  ev.local_anchor.assign(n, false);
  ev.shift.assign(n, false);
  if (spec.needs_local_anchor())
    for (std::size_t i = 0; i < n; ++i)
      ev.local_anchor[i] = spec.coupled_updates ? comm : draw_coin(seed, Stream::Anchor, i, k, spec.estimator.q);
  if (spec.needs_global_anchor())
    ev.global_anchor = spec.coupled_updates ? comm : draw_coin(seed, Stream::GlobalAnchor, 0, k, spec.global_anchor_q());
  if (spec.shift.type == ShiftType::Learned) {
    for (std::size_t i = 0; i < n; ++i) {
      if (spec.shift.source == ShiftSource::CurrentStochastic)
        ev.shift[i] = spec.coupled_updates ? comm : draw_coin(seed, Stream::Shift, i, k, spec.shift.rho_prime);
      else
        ev.shift[i] = ev.global_anchor;
    }
  }
  return ev;
}

std::uint64_t refresh_state(const MethodSpec& spec, const GlobalProblem& p, MethodState& state,
                            const Vector& virtual_x, bool comm, std::uint64_t k, std::uint64_t seed) {
  const std::size_t n = p.n();
  const RefreshEvents ev = refresh_coins(spec, n, comm, k, seed);
  std::uint64_t evals = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!ev.local_anchor[i]) continue;
    WorkerState& w = state.workers[i];
    w.anchor = w.x;
    w.anchor_grad = p.local_gradient(i, w.x);
    evals += p.m();
  }
  if (ev.global_anchor) {
    state.shared.y = virtual_x;
    if (!state.shared.grad_at_y.empty()) {
      for (std::size_t i = 0; i < n; ++i) state.shared.grad_at_y[i] = p.local_gradient(i, virtual_x);
      state.shared.grad_f_at_y = pairwise_mean(state.shared.grad_at_y);
      evals += n * p.m();
    }
  }
  bool changed = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (!ev.shift[i]) continue;
    WorkerState& w = state.workers[i];
    const bool at_y = spec.shift.source != ShiftSource::CurrentStochastic;
    std::optional<Vector> g;
    if (at_y && !state.shared.grad_at_y.empty()) g = state.shared.grad_at_y[i];
    Vector h;
    evals += learned_target(spec, p, i, at_y ? *state.shared.y : w.x, g, k, seed, 0, h);
    w.h = std::move(h);
    changed = true;
  }
  if (changed) recompute_shifts(state);
  return evals;
}

bool is_communication(const LoopKind& loop, std::uint64_t k, std::uint64_t seed) {
  if (loop.type == LoopType::Fixed) return (k + 1) % loop.tau == 0;
  return draw_coin(seed, Stream::Loop, 0, k, loop.p);
}

}  // namespace lsgd
