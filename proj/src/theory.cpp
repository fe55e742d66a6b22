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

#include "lsgd/theory.hpp"

#include "lsgd/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>

namespace lsgd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kE = std::numbers::e;

/// 1 / (rho (1 - rho)), taken as 0 at rho = 1: with a full refresh the sigma
/// recursion can always be written with B = C = G = 0, so the coupling term vanishes.
double inv_rho_one_minus_rho(double rho) { return rho < 1.0 ? 1.0 / (rho * (1.0 - rho)) : 0.0; }

/// Adds the cap coef / sqrt(x) when x > 0 (a zero x means the restriction is void).
void add_sqrt_cap(std::vector<StepsizeCap>& caps, std::string label, double coef, double x) {
  if (x > 0.0) caps.push_back({std::move(label), coef / std::sqrt(x)});
}

bool is_uniform_like(EstimatorType t) {
  return t != EstimatorType::FullGradient && t != EstimatorType::NoisyGradient;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Communication-coupled refreshes on a deterministic loop are periodic rather
/// than geometric and are not covered by the sigma recursion.
void require_geometric_refreshes(const MethodSpec& spec) {
  const bool refreshes = spec.needs_local_anchor() || spec.needs_global_anchor() || spec.needs_shift_memory();
  if (spec.coupled_updates && refreshes && spec.loop.type == LoopType::Fixed)
    throw TheoryError("communication-coupled refreshes on a fixed loop are outside the analysed family");
}

const std::vector<Vector>& grads_at_optimum(const GlobalProblem& p, const char* what) {
  if (!p.optimum()) throw TheoryError(std::string(what) + " requires the exact optimum");
  return p.local_gradients_at_optimum();
}

ShiftCase shift_case_of(const MethodSpec& spec) {
  switch (spec.shift.type) {
    case ShiftType::None: return ShiftCase::I;
    case ShiftType::Star: return ShiftCase::II;
    case ShiftType::Learned: return ShiftCase::III;
  }
  return ShiftCase::I;
}

/// Probability with which the learned-shift memory is refreshed.
double shift_refresh_probability(const MethodSpec& spec) {
  if (spec.coupled_updates && spec.loop.type == LoopType::Bernoulli) return spec.loop.p;
  return spec.shift.rho_prime;
}

/// Probability with which the estimator anchor is refreshed.
double anchor_refresh_probability(const MethodSpec& spec) {
  if (spec.coupled_updates && spec.loop.type == LoopType::Bernoulli) return spec.loop.p;
  return spec.estimator.q;
}

/// Variance of the r-batch base oracle at `at` for client i.
double target_variance(const MethodSpec& spec, const GlobalProblem& p, std::size_t i, const Vector& at) {
  const double r = static_cast<double>(spec.shift.batch);
  switch (spec.estimator.type) {
    case EstimatorType::FullGradient: return 0.0;
    case EstimatorType::NoisyGradient: return spec.estimator.noise_for(i) / r;
    default: {
      const Vector gi = p.local_gradient(i, at);
      double v = 0.0;
      for (std::size_t j = 0; j < p.m(); ++j) v += (p.component_gradient(i, j, at) - gi).squaredNorm();
      return v / static_cast<double>(p.m()) / r;
    }
  }
}

/// (1/m) sum_j ||grad f_ij(w) - grad f_ij(x*)||^2.
double component_residual(const GlobalProblem& p, std::size_t i, const Vector& w) {
  const Vector& xs = p.optimum()->x;
  double v = 0.0;
  for (std::size_t j = 0; j < p.m(); ++j)
    v += (p.component_gradient(i, j, w) - p.component_gradient(i, j, xs)).squaredNorm();
  return v / static_cast<double>(p.m());
}

bool preset_structure_matches(const MethodSpec& spec) {
  if (!spec.preset) return false;
  const auto t = spec.estimator.type;
  const bool base = t == EstimatorType::FullGradient || t == EstimatorType::NoisyGradient ||
                    t == EstimatorType::UniformSample;
  switch (*spec.preset) {
    case Preset::LocalSGD: return base && spec.shift.type == ShiftType::None;
    case Preset::LocalSVRG:
      return t == EstimatorType::LSVRG && spec.estimator.per_client_anchor && spec.shift.type == ShiftType::None;
    case Preset::StarLocalSGD: return base && spec.shift.type == ShiftType::Star;
    case Preset::SSLocalSGD:
      return base && spec.shift.type == ShiftType::Learned && spec.shift.source == ShiftSource::AnchorStochastic;
    case Preset::StarLocalSGDStar: return t == EstimatorType::StarSVRG && spec.shift.type == ShiftType::Star;
    case Preset::SLocalSVRG:
      return t == EstimatorType::GlobalAnchorSVRG && spec.shift.type == ShiftType::Learned &&
             spec.shift.source == ShiftSource::AnchorFull;
  }
  return false;
}

std::string fmt(double v) { return format_double(v); }

}  // namespace

std::string to_string(ShiftCase c) {
  switch (c) {
    case ShiftCase::I: return "I";
    case ShiftCase::II: return "II";
    case ShiftCase::III: return "III";
  }
  return "?";
}

std::string to_string(SigmaModel s) {
  switch (s) {
    case SigmaModel::Zero: return "zero";
    case SigmaModel::LocalAnchorResidual: return "local-anchor-residual";
    case SigmaModel::SharedAnchorLocal: return "shared-anchor-local";
    case SigmaModel::SharedAnchorFull: return "shared-anchor-full";
    case SigmaModel::Aggregated: return "aggregated";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Estimator constants

std::vector<EstimatorParams> estimator_params(const MethodSpec& spec, const GlobalProblem& p) {
  spec.validate(p);
  require_geometric_refreshes(spec);
  const double L = p.L();
  const double M = p.max_Lij();
  const double expected_smoothness = M;  // single uniformly sampled index
  const std::size_t n = p.n();

  std::vector<double> sigma_star;
  const bool needs_sigma_star =
      spec.estimator.type == EstimatorType::UniformSample ||
      (spec.shift.type == ShiftType::Learned && spec.shift.source != ShiftSource::AnchorFull &&
       is_uniform_like(spec.estimator.type));
  if (needs_sigma_star) {
    grads_at_optimum(p, "the variance at the optimum");
    sigma_star = sigma_star_sq_per_client(p);
  }

  std::vector<EstimatorParams> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    EstimatorParams& e = out[i];
    switch (spec.estimator.type) {
      case EstimatorType::FullGradient:
        e = {L, 0.0, 1.0, 0.0, 0.0, 0.0, {}, {}, {}};
        break;
      case EstimatorType::NoisyGradient:
        e = {L, 0.0, 1.0, 0.0, spec.estimator.noise_for(i), 0.0, {}, {}, {}};
        break;
      case EstimatorType::UniformSample:
        e = {2.0 * expected_smoothness, 0.0, 1.0, 0.0, 2.0 * sigma_star[i], 0.0, {}, {}, {}};
        break;
      case EstimatorType::LSVRG:
      case EstimatorType::GlobalAnchorSVRG: {
        const double q = anchor_refresh_probability(spec);
        e = {2.0 * M, 2.0, q, M * q, 0.0, 0.0, {}, {}, {}};
        break;
      }
      case EstimatorType::StarSVRG:
        e = {M, 0.0, 1.0, 0.0, 0.0, 0.0, {}, {}, {}};
        break;
    }
    if (spec.shift.type == ShiftType::Learned) {
      e.rho_shift = shift_refresh_probability(spec);
      const double r = static_cast<double>(spec.shift.batch);
      if (spec.shift.source == ShiftSource::AnchorFull || spec.estimator.type == EstimatorType::FullGradient) {
        e.A_shift = L;
        e.D3 = 0.0;
      } else if (spec.estimator.type == EstimatorType::NoisyGradient) {
        e.A_shift = L;
        e.D3 = spec.estimator.noise_for(i) / r;
      } else {
        e.A_shift = L + 2.0 * expected_smoothness / r;
        e.D3 = 2.0 * sigma_star[i] / r;
      }
    }
  }
  return out;
}

KeyParams derive_key_params(const std::vector<EstimatorParams>& per_client, ShiftCase shift_case,
                            double zeta_star_sq, double L) {
  if (per_client.empty()) throw TheoryError("derive_key_params: empty client list");
  const double n = static_cast<double>(per_client.size());
  double max_A = 0.0, sum_D1 = 0.0, sum_BD2 = 0.0, max_BC = 0.0, max_rhoA = 0.0, sum_rhoD3 = 0.0;
  double rho = 1.0;
  for (const EstimatorParams& e : per_client) {
    max_A = std::max(max_A, e.A);
    sum_D1 += e.D1;
    sum_BD2 += e.B * e.D2;
    max_BC = std::max(max_BC, e.B * e.C);
    rho = std::min(rho, e.rho);
    if (shift_case == ShiftCase::III) {
      if (!e.A_shift || !e.D3 || !e.rho_shift) throw TheoryError("learned shift constants missing");
      rho = std::min(rho, *e.rho_shift);
      max_rhoA = std::max(max_rhoA, *e.rho_shift * *e.A_shift);
      sum_rhoD3 += *e.rho_shift * *e.D3;
    }
  }
  KeyParams kp;
  kp.shift_case = shift_case;
  kp.A = 4.0 * max_A;
  kp.B = 2.0;
  kp.F = 4.0 * L * max_A;
  kp.D1 = 2.0 / n * sum_D1 + (shift_case == ShiftCase::I ? 2.0 * zeta_star_sq : 0.0);
  kp.B_prime = 1.0 / n;
  kp.F_prime = 2.0 * L * max_A / n + 2.0 * L * L;
  kp.D1_prime = sum_D1 / (n * n);
  kp.A_prime = 2.0 * max_A / n + L;
  kp.rho = rho;
  if (shift_case == ShiftCase::III) {
    kp.D2 = (2.0 * sum_BD2 + sum_rhoD3) / n;
    kp.C = 4.0 * max_BC + 4.0 * max_rhoA;
  } else {
    kp.D2 = 2.0 / n * sum_BD2;
    kp.C = 4.0 * max_BC;
  }
  kp.G = kp.C * L / 2.0;
  kp.split = VarianceSplit{kp.A, kp.A, kp.B, kp.B, kp.F, kp.F, kp.D1, kp.D1};
  kp.generic_split = true;
  kp.sigma_model = SigmaModel::Aggregated;
  kp.source = "lemma";
  return kp;
}

std::optional<KeyParams> preset_key_params(Preset preset, EstimatorType base, const PresetConstants& c) {
  const double n = static_cast<double>(c.n);
  const double L = c.L, M = c.max_Lij, Ls = c.expected_smoothness, q = c.q, r = c.r;
  const bool es = base == EstimatorType::UniformSample;
  KeyParams kp;
  VarianceSplit s;
  switch (preset) {
    case Preset::LocalSGD:
      kp.shift_case = ShiftCase::I;
      if (es) {
        s = {3 * L, 4 * Ls, 0, 0, 3 * L * L, 4 * Ls * L, 3 * c.zeta_star_sq, 2 * c.sigma_star_sq};
        kp.A_prime = 4 * Ls / n + 2 * L;
        kp.F_prime = 4 * Ls * L / n + 2 * L * L;
        kp.D1_prime = 2 * c.sigma_star_sq / n;
      } else {
        s = {3 * L, 0, 0, 0, 3 * L * L, 0, 3 * c.zeta_star_sq, c.sigma_sq};
        kp.A_prime = 2 * L;
        kp.F_prime = 2 * L * L;
        kp.D1_prime = c.sigma_sq / n;
      }
      break;
    case Preset::LocalSVRG:
      kp.shift_case = ShiftCase::I;
      s = {3 * L, 4 * M, 0, 0.5, 3 * L * L, 4 * L * M, 3 * c.zeta_star_sq, 0};
      kp.A_prime = 4 * M / n + L;
      kp.B_prime = 1 / n;
      kp.F_prime = 4 * L * M / n + 2 * L * L;
      kp.rho = q;
      kp.C = 8 * q * M;
      kp.G = 4 * q * L * M;
      kp.sigma_model = SigmaModel::LocalAnchorResidual;
      break;
    case Preset::StarLocalSGD:
      if (es) return std::nullopt;
      kp.shift_case = ShiftCase::II;
      s = {2 * L, 0, 0, 0, 2 * L * L, 0, 0, c.sigma_sq};
      kp.A_prime = 2 * L;
      kp.F_prime = 2 * L * L;
      kp.D1_prime = c.sigma_sq / n;
      break;
    case Preset::SSLocalSGD:
      kp.shift_case = ShiftCase::III;
      kp.rho = q;
      kp.sigma_model = SigmaModel::SharedAnchorLocal;
      if (es) {
        s = {4 * L, 4 * Ls, 2, 0, 4 * L * L, 4 * Ls * L, 0, 2 * c.sigma_star_sq};
        kp.A_prime = 2 * (2 * Ls / n + L);
        kp.F_prime = 2 * L * (2 * Ls / n + L);
        kp.D1_prime = 2 * c.sigma_star_sq / n;
        kp.C = q * (2 * Ls / r + L);
        kp.D2 = 2 * q * c.sigma_star_sq / r;
      } else {
        s = {4 * L, 0, 2, 0, 4 * L * L, 0, 2 * c.sigma_sq / r, c.sigma_sq};
        kp.A_prime = 2 * L;
        kp.F_prime = 2 * L * L;
        kp.D1_prime = c.sigma_sq / n;
        kp.C = L * q;
      }
      break;
    case Preset::StarLocalSGDStar:
      kp.shift_case = ShiftCase::II;
      s = {2 * L, 2 * M, 0, 0, 2 * L * L, 2 * L * M, 0, 0};
      kp.A_prime = 2 * (M / n + L);
      kp.F_prime = 2 * L * (M / n + L);
      break;
    case Preset::SLocalSVRG:
      kp.shift_case = ShiftCase::III;
      s = {4 * L, 4 * M, 2, 2, 4 * L * L, 4 * L * M, 0, 0};
      kp.A_prime = 4 * M / n + 2 * L;
      kp.B_prime = 2 / n;
      kp.F_prime = 2 * L * (2 * M / n + L);
      kp.rho = q;
      kp.C = (L + M) * q;
      kp.sigma_model = SigmaModel::SharedAnchorFull;
      break;
  }
  // The split bounds add up to the plain second-moment bound.
  kp.A = s.A_tilde + s.A_hat;
  kp.B = s.B_tilde + s.B_hat;
  kp.F = s.F_tilde + s.F_hat;
  kp.D1 = s.D1_tilde + s.D1_hat;
  kp.split = s;
  kp.generic_split = false;
  kp.source = to_string(preset);
  return kp;
}

KeyParams key_params_for(const MethodSpec& spec, const GlobalProblem& p) {
  spec.validate(p);
  require_geometric_refreshes(spec);
  const ShiftCase sc = shift_case_of(spec);
  if (preset_structure_matches(spec)) {
    const Preset preset = *spec.preset;
    PresetConstants c;
    c.n = p.n();
    c.L = p.L();
    c.max_Lij = p.max_Lij();
    c.expected_smoothness = p.max_Lij();
    const bool needs_zeta = preset == Preset::LocalSGD || preset == Preset::LocalSVRG;
    if (needs_zeta) {
      grads_at_optimum(p, "the heterogeneity at the optimum");
      c.zeta_star_sq = zeta_star_sq(p);
    }
    std::vector<double> noise(p.n());
    for (std::size_t i = 0; i < p.n(); ++i) noise[i] = spec.estimator.noise_for(i);
    c.sigma_sq = spec.estimator.type == EstimatorType::NoisyGradient ? mean(noise) : 0.0;
    if (spec.estimator.type == EstimatorType::UniformSample) {
      grads_at_optimum(p, "the variance at the optimum");
      c.sigma_star_sq = mean(sigma_star_sq_per_client(p));
    }
    switch (preset) {
      case Preset::LocalSVRG: c.q = anchor_refresh_probability(spec); break;
      case Preset::SSLocalSGD: c.q = shift_refresh_probability(spec); break;
      case Preset::SLocalSVRG: c.q = anchor_refresh_probability(spec); break;
      default: break;
    }
    c.r = static_cast<double>(spec.shift.batch);
    if (auto kp = preset_key_params(preset, spec.estimator.type, c)) return *kp;
  }
  const double zeta = sc == ShiftCase::I ? (grads_at_optimum(p, "case I constants"), zeta_star_sq(p)) : 0.0;
  return derive_key_params(estimator_params(spec, p), sc, zeta, p.L());
}

// ---------------------------------------------------------------------------
// Loop constants

LoopParams loop_params(const KeyParams& kp, const LoopKind& loop, const DataModel& data, double mu, double L) {
  LoopParams lp;
  const double rho = kp.rho;
  if (!(rho > 0.0 && rho <= 1.0)) throw TheoryError("rho must lie in (0, 1]");
  const double irr = inv_rho_one_minus_rho(rho);
  const bool zeta = data.type == DataModel::Type::ZetaHeterogeneous;
  if (!zeta && !kp.split) throw TheoryError("heterogeneous data requires a variance split");
  if (zeta && data.zeta_sq > 0.0 && !(mu > 0.0))
    throw TheoryError("zeta-heterogeneous bounds require mu > 0");
  const double zeta_over_mu = zeta && data.zeta_sq > 0.0 ? data.zeta_sq / mu : 0.0;

  if (loop.type == LoopType::Fixed) {
    if (loop.tau <= 1) return lp;
    const double t = static_cast<double>(loop.tau - 1);
    if (mu > 0.0) lp.caps.push_back({"loop: 1/(4(tau-1)mu)", 1.0 / (4.0 * t * mu)});
    if (!zeta) {
      const VarianceSplit& s = *kp.split;
      const double Bs = s.B_tilde * t + s.B_hat;
      add_sqrt_cap(lp.caps, "loop: F-term", 0.5, kE * t * (s.F_tilde * t + s.F_hat + 2.0 * kp.G * Bs * irr));
      add_sqrt_cap(lp.caps, "loop: A-term", 0.25,
                   2.0 * kE * L * t * (s.A_tilde * t + s.A_hat + 2.0 * kp.C * Bs * irr));
      lp.H_coef = 4.0 * kE * t * Bs * (2.0 + rho) / rho;
      lp.D3_const = 2.0 * kE * t * (s.D1_tilde * t + s.D1_hat + 2.0 * kp.D2 * Bs / rho);
    } else {
      add_sqrt_cap(lp.caps, "loop: F-term", 0.5, t * (kp.F + 2.0 * kp.B * kp.G * irr));
      add_sqrt_cap(lp.caps, "loop: A-term", 0.25, 2.0 * L * t * (kp.A + 2.0 * kp.B * kp.C * irr));
      lp.H_coef = 4.0 * kp.B * t * (2.0 + rho) / rho;
      lp.D3_const = 2.0 * t * (kp.D1 + 2.0 * kp.B * kp.D2 / rho);
      lp.D3_over_gamma = 2.0 * t * zeta_over_mu;
    }
    return lp;
  }

  const double p = loop.p;
  if (!(p > 0.0 && p <= 1.0)) throw TheoryError("p must lie in (0, 1]");
  if (p >= 1.0) return lp;
  const double u = 1.0 - p;
  if (!zeta) {
    const VarianceSplit& s = *kp.split;
    const double Bs = (p + 2.0) * s.B_tilde + p * s.B_hat;
    if (mu > 0.0) lp.caps.push_back({"loop: p/(16mu)", p / (16.0 * mu)});
    add_sqrt_cap(lp.caps, "loop: F-term", p / 2.0, u * ((2.0 + p) * s.F_tilde + p * s.F_hat));
    add_sqrt_cap(lp.caps, "loop: G-term", p * std::sqrt(3.0) / 8.0, 2.0 * kp.G * u * Bs * irr);
    add_sqrt_cap(lp.caps, "loop: A-term", p * std::sqrt(3.0) / 16.0,
                 2.0 * L * u * ((2.0 + p) * s.A_tilde + p * s.A_hat + 2.0 * kp.C * Bs * irr));
    lp.H_coef = 64.0 * u * Bs * (2.0 + rho) / (3.0 * p * p * rho);
    lp.D3_const = 8.0 * u / (p * p) * ((p + 2.0) * s.D1_tilde + p * s.D1_hat + 8.0 * kp.D2 * Bs / (3.0 * rho));
  } else {
    if (mu > 0.0) lp.caps.push_back({"loop: p/(8mu)", p / (8.0 * mu)});
    add_sqrt_cap(lp.caps, "loop: F-term", 1.0, 2.0 * kp.F * u / p);
    add_sqrt_cap(lp.caps, "loop: G-term", 1.0, 32.0 * kp.B * kp.G * u * irr / p);
    add_sqrt_cap(lp.caps, "loop: A-term", 1.0, 128.0 * L * u * (kp.A + 2.0 * kp.B * kp.C * irr) / p);
    lp.H_coef = 16.0 * kp.B * u * (2.0 + rho) / (p * rho);
    lp.D3_const = 4.0 * u / p * (kp.D1 + 4.0 * kp.B * kp.D2 / rho);
    lp.D3_over_gamma = 4.0 * u / p * zeta_over_mu;
  }
  return lp;
}

std::vector<StepsizeCap> theorem_caps(const KeyParams& kp, double L) {
  std::vector<StepsizeCap> caps;
  const double d1 = 2.0 * (kp.A_prime + 4.0 * kp.C * kp.B_prime / (3.0 * kp.rho));
  if (d1 > 0.0) caps.push_back({"theorem: 1/(2(A'+4CB'/(3rho)))", 1.0 / d1});
  const double d2 = kp.F_prime + 4.0 * kp.G * kp.B_prime / (3.0 * kp.rho);
  if (d2 > 0.0) caps.push_back({"theorem: L/(F'+4GB'/(3rho))", L / d2});
  return caps;
}

double max_stepsize(const KeyParams& kp, const LoopParams& lp, double L) {
  double g = kInf;
  for (const StepsizeCap& c : theorem_caps(kp, L)) g = std::min(g, c.value);
  for (const StepsizeCap& c : lp.caps) g = std::min(g, c.value);
  return g;
}

// ---------------------------------------------------------------------------
// Rates

double RateBound::bound(double K) const {
  if (mu > 0.0) return std::pow(theta, K) * Phi0 + gamma * Psi0;
  return Phi0 / std::max(K, 1.0) + gamma * Psi0;
}

std::optional<double> RateBound::predicted_K(double eps) const {
  const double slack = eps - gamma * Psi0;
  if (!(slack > 0.0)) return std::nullopt;
  if (mu > 0.0) {
    if (Phi0 <= slack) return 0.0;
    const double rate = -std::log1p(-(1.0 - theta));
    return std::ceil(std::log(Phi0 / slack) / rate);
  }
  return std::ceil(Phi0 / slack);
}

RateBound rate_bound(const KeyParams& kp, const LoopParams& lp, double L, double gamma, double mu,
                     double sigma0_sq, double dist0_sq) {
  if (!(gamma > 0.0)) throw TheoryError("gamma must be > 0");
  RateBound rb;
  rb.gamma = gamma;
  rb.mu = mu;
  rb.theta = 1.0 - std::min(gamma * mu, kp.rho / 4.0);
  rb.stepsize_valid = gamma <= max_stepsize(kp, lp, L);
  const double H = lp.H(gamma);
  const double D3 = lp.D3(gamma);
  rb.Phi0_terms = {{"2 dist0_sq / gamma", 2.0 * dist0_sq / gamma},
                   {"8 B' gamma sigma0_sq / (3 rho)", 8.0 * kp.B_prime * gamma * sigma0_sq / (3.0 * kp.rho)},
                   {"4 L H sigma0_sq", 4.0 * L * H * sigma0_sq}};
  rb.Psi0_terms = {{"2 D1'", 2.0 * kp.D1_prime},
                   {"8 B' D2 / (3 rho)", 8.0 * kp.B_prime * kp.D2 / (3.0 * kp.rho)},
                   {"4 L gamma D3", 4.0 * L * gamma * D3}};
  rb.Phi0 = 0.0;
  for (const Term& t : rb.Phi0_terms) rb.Phi0 += t.value;
  rb.Psi0 = 0.0;
  for (const Term& t : rb.Psi0_terms) rb.Psi0 += t.value;
  return rb;
}

HorizonStepsize horizon_stepsize(const KeyParams& kp, const LoopParams& lp, double L, double mu, double dist0_sq,
                                 double sigma0_sq, double K) {
  if (!(K >= 1.0)) throw TheoryError("horizon K must be >= 1");
  HorizonStepsize hs;
  const double gmax = max_stepsize(kp, lp, L);
  hs.h = 1.0 / gmax;
  const double H = lp.H(gmax);
  hs.c1 = 2.0 * kp.D1_prime + 4.0 * kp.B_prime * kp.D2 / (3.0 * kp.rho) + 2.0 * L * lp.D3_over_gamma;
  hs.c2 = 4.0 * L * lp.D3_const;
  if (mu > 0.0) {
    hs.a = 2.0 * dist0_sq + 8.0 * kp.B_prime * sigma0_sq / (3.0 * hs.h * hs.h * kp.rho) +
           4.0 * L * H * sigma0_sq / hs.h;
    const double t1 = hs.c1 > 0.0 ? hs.a * mu * mu * K * K / hs.c1 : kInf;
    const double t2 = hs.c2 > 0.0 ? hs.a * mu * mu * mu * K * K * K / hs.c2 : kInf;
    const double inner = std::max(2.0, std::min(t1, t2));
    hs.gamma = std::isinf(inner) ? gmax : std::min(gmax, std::log(inner) / (mu * K));
  } else {
    hs.a = 2.0 * dist0_sq;
    hs.b1 = 4.0 * L * H * sigma0_sq;
    hs.b2 = 8.0 * kp.B_prime * sigma0_sq / (3.0 * kp.rho);
    double g = gmax;
    if (hs.b1 > 0.0) g = std::min(g, std::sqrt(hs.a / hs.b1));
    if (hs.b2 > 0.0) g = std::min(g, std::cbrt(hs.a / hs.b2));
    if (hs.c1 > 0.0) g = std::min(g, std::sqrt(hs.a / (hs.c1 * K)));
    if (hs.c2 > 0.0) g = std::min(g, std::cbrt(hs.a / (hs.c2 * K)));
    hs.gamma = g;
  }
  return hs;
}

double initial_sigma_sq(const MethodSpec& spec, const GlobalProblem& p, const KeyParams& kp, const Vector& x0) {
  if (kp.sigma_model == SigmaModel::Zero) return 0.0;
  const auto& g_opt = grads_at_optimum(p, "sigma_0");
  const double n = static_cast<double>(p.n());
  double total = 0.0;
  switch (kp.sigma_model) {
    case SigmaModel::Zero: break;
    case SigmaModel::LocalAnchorResidual:
      for (std::size_t i = 0; i < p.n(); ++i) total += 4.0 * component_residual(p, i, x0);
      return total / n;
    case SigmaModel::SharedAnchorLocal:
      for (std::size_t i = 0; i < p.n(); ++i) {
        total += (p.local_gradient(i, x0) - g_opt[i]).squaredNorm();
        // The bounded-variance variant measures the exact gradient at y; the
        // sampled variant includes the batch variance of the target.
        if (spec.estimator.type == EstimatorType::UniformSample) total += target_variance(spec, p, i, x0);
      }
      return total / n;
    case SigmaModel::SharedAnchorFull:
      for (std::size_t i = 0; i < p.n(); ++i)
        total += component_residual(p, i, x0) + (p.local_gradient(i, x0) - g_opt[i]).squaredNorm();
      return total / n;
    case SigmaModel::Aggregated: {
      const bool anchored =
          spec.estimator.type == EstimatorType::LSVRG || spec.estimator.type == EstimatorType::GlobalAnchorSVRG;
      for (std::size_t i = 0; i < p.n(); ++i) {
        if (anchored) total += 2.0 * 2.0 * component_residual(p, i, x0);
        if (spec.shift.type == ShiftType::Learned) {
          total += (p.local_gradient(i, x0) - g_opt[i]).squaredNorm();
          if (spec.shift.source != ShiftSource::AnchorFull) total += target_variance(spec, p, i, x0);
        }
      }
      return total / n;
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Reports

TheoryReport analyze(const MethodSpec& spec, const GlobalProblem& p, const Vector& x0, const DataModel& data,
                     std::optional<double> gamma) {
  TheoryReport r;
  r.kp = key_params_for(spec, p);
  r.data = data;
  r.L = p.L();
  r.mu = p.mu();
  r.lp = loop_params(r.kp, spec.loop, data, r.mu, r.L);
  r.caps = theorem_caps(r.kp, r.L);
  r.caps.insert(r.caps.end(), r.lp.caps.begin(), r.lp.caps.end());
  r.gamma_max = max_stepsize(r.kp, r.lp, r.L);
  r.gamma = gamma.value_or(r.gamma_max);
  if (p.optimum()) {
    r.dist0_sq = (x0 - p.optimum()->x).squaredNorm();
    r.sigma0_sq = initial_sigma_sq(spec, p, r.kp, x0);
    r.rate = rate_bound(r.kp, r.lp, r.L, r.gamma, r.mu, *r.sigma0_sq, *r.dist0_sq);
  }
  return r;
}

std::map<std::string, std::string> to_key_values(const TheoryReport& r, std::optional<double> eps) {
  std::map<std::string, std::string> kv;
  const KeyParams& k = r.kp;
  kv["kp.source"] = k.source;
  kv["kp.shift_case"] = to_string(k.shift_case);
  kv["kp.sigma_model"] = to_string(k.sigma_model);
  kv["kp.generic_split"] = k.generic_split ? "1" : "0";
  const std::pair<const char*, double> scalars[] = {
      {"kp.A", k.A}, {"kp.A_prime", k.A_prime}, {"kp.B", k.B},   {"kp.B_prime", k.B_prime},
      {"kp.C", k.C}, {"kp.F", k.F},             {"kp.F_prime", k.F_prime}, {"kp.G", k.G},
      {"kp.D1", k.D1}, {"kp.D1_prime", k.D1_prime}, {"kp.D2", k.D2}, {"kp.rho", k.rho}};
  for (const auto& [name, v] : scalars) kv[name] = fmt(v);
  if (k.split) {
    const VarianceSplit& s = *k.split;
    kv["kp.A_tilde"] = fmt(s.A_tilde);
    kv["kp.A_hat"] = fmt(s.A_hat);
    kv["kp.B_tilde"] = fmt(s.B_tilde);
    kv["kp.B_hat"] = fmt(s.B_hat);
    kv["kp.F_tilde"] = fmt(s.F_tilde);
    kv["kp.F_hat"] = fmt(s.F_hat);
    kv["kp.D1_tilde"] = fmt(s.D1_tilde);
    kv["kp.D1_hat"] = fmt(s.D1_hat);
  }
  kv["lp.H_coef"] = fmt(r.lp.H_coef);
  kv["lp.D3_const"] = fmt(r.lp.D3_const);
  kv["lp.D3_over_gamma"] = fmt(r.lp.D3_over_gamma);
  kv["lp.caps"] = std::to_string(r.lp.caps.size());
  for (std::size_t i = 0; i < r.lp.caps.size(); ++i) kv["lp.cap." + std::to_string(i)] = fmt(r.lp.caps[i].value);
  kv["L"] = fmt(r.L);
  kv["mu"] = fmt(r.mu);
  kv["gamma_max"] = fmt(r.gamma_max);
  kv["gamma"] = fmt(r.gamma);
  kv["data"] = r.data.type == DataModel::Type::Heterogeneous ? "heterogeneous" : "zeta";
  if (r.data.type == DataModel::Type::ZetaHeterogeneous) kv["zeta_sq"] = fmt(r.data.zeta_sq);
  if (r.sigma0_sq) kv["sigma0_sq"] = fmt(*r.sigma0_sq);
  if (r.dist0_sq) kv["dist0_sq"] = fmt(*r.dist0_sq);
  if (r.rate) {
    kv["theta"] = fmt(r.rate->theta);
    kv["Phi0"] = fmt(r.rate->Phi0);
    kv["Psi0"] = fmt(r.rate->Psi0);
    kv["stepsize_valid"] = r.rate->stepsize_valid ? "1" : "0";
    if (eps) {
      kv["epsilon"] = fmt(*eps);
      const auto K = r.rate->predicted_K(*eps);
      kv["predicted_K"] = K ? fmt(*K) : "unreachable";
    }
  }
  return kv;
}

double gamma_max_from_key_values(const std::map<std::string, std::string>& kv) {
  auto get = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("metadata is missing '" + key + "'");
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument(key);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("metadata entry '" + key + "' is not a number");
    }
  };
  KeyParams kp;
  kp.A_prime = get("kp.A_prime");
  kp.B_prime = get("kp.B_prime");
  kp.C = get("kp.C");
  kp.F_prime = get("kp.F_prime");
  kp.G = get("kp.G");
  kp.rho = get("kp.rho");
  LoopParams lp;
  const auto caps = static_cast<std::size_t>(get("lp.caps"));
  for (std::size_t i = 0; i < caps; ++i) lp.caps.push_back({"", get("lp.cap." + std::to_string(i))});
  return max_stepsize(kp, lp, get("L"));
}

void print_report(const TheoryReport& r, std::optional<double> eps, std::ostream& out) {
  char line[160];
  auto row = [&](const std::string& name, double v) {
    std::snprintf(line, sizeof line, "  %-34s %.10g\n", name.c_str(), v);
    out << line;
  };
  const KeyParams& k = r.kp;
  out << "constants (" << k.source << ", shift case " << to_string(k.shift_case)
      << (k.generic_split ? ", generic split" : "") << ")\n";
  row("A", k.A);
  row("A'", k.A_prime);
  row("B", k.B);
  row("B'", k.B_prime);
  row("C", k.C);
  row("F", k.F);
  row("F'", k.F_prime);
  row("G", k.G);
  row("D1", k.D1);
  row("D1'", k.D1_prime);
  row("D2", k.D2);
  row("rho", k.rho);
  out << "loop\n";
  row("H / gamma^2", r.lp.H_coef);
  row("D3 (constant part)", r.lp.D3_const);
  row("D3 (coefficient of 1/gamma)", r.lp.D3_over_gamma);
  out << "stepsize caps\n";
  for (const StepsizeCap& c : r.caps) row(c.label, c.value);
  row("gamma_max", r.gamma_max);
  row("gamma", r.gamma);
  if (r.rate) {
    out << "rate\n";
    row("theta", r.rate->theta);
    row("Phi0", r.rate->Phi0);
    row("Psi0", r.rate->Psi0);
    if (eps) {
      const auto K = r.rate->predicted_K(*eps);
      std::snprintf(line, sizeof line, "  %-34s %s\n", ("predicted K(" + fmt(*eps) + ")").c_str(),
                    K ? fmt(*K).c_str() : "unreachable");
      out << line;
    }
    if (!r.rate->stepsize_valid) out << "  warning: gamma exceeds gamma_max; the bound is not guaranteed\n";
  } else {
    out << "rate: unavailable (optimum unknown)\n";
  }
}

}  // namespace lsgd
