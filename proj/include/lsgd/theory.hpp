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

#include "lsgd/method.hpp"

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace lsgd {

// ---------------------------------------------------------------------------
// Parameter families

/// Per-client constants of the local estimator recursion
///   E||a_i - grad f_i(x*)||^2 <= 2 A_i D_{f_i}(x_i, x*) + B_i sigma_i^2 + D1_i,
///   E sigma_i'^2 <= (1 - rho_i) sigma_i^2 + 2 C_i D_{f_i}(x_i, x*) + D2_i,
/// plus the optional learned-shift constants (A'_i, D3_i, rho'_i).
struct EstimatorParams {
  double A = 0.0;
  double B = 0.0;
  double rho = 1.0;
  double C = 0.0;
  double D1 = 0.0;
  double D2 = 0.0;
  std::optional<double> A_shift;
  std::optional<double> D3;
  std::optional<double> rho_shift;
};

/// Shift family: I = no shift, II = ideal shift grad f_i(x*), III = learned shift.
enum class ShiftCase { I, II, III };

std::string to_string(ShiftCase c);

/// Separate bounds for the conditional mean and the variance of the directions.
struct VarianceSplit {
  double A_tilde = 0.0, A_hat = 0.0;
  double B_tilde = 0.0, B_hat = 0.0;
  double F_tilde = 0.0, F_hat = 0.0;
  double D1_tilde = 0.0, D1_hat = 0.0;
};

/// Which quantity plays the role of sigma_k^2 for a given parameter set.
enum class SigmaModel {
  Zero,                 // sigma_k == 0
  LocalAnchorResidual,  // (4/nm) sum_ij ||grad f_ij(w_i) - grad f_ij(x*)||^2
  SharedAnchorLocal,    // (1/n) sum_i E||l_i(y) - grad f_i(x*)||^2
  SharedAnchorFull,     // (1/nm) sum_ij ||.||^2 at y + (1/n) sum_i ||grad f_i(y) - grad f_i(x*)||^2
  Aggregated,           // (2/n) sum_i B_i sigma_i^2 [+ (1/n) sum_i E||h_i - grad f_i(x*)||^2]
};

std::string to_string(SigmaModel s);

/// Constants of the key parametric assumption on the directions g_i.
struct KeyParams {
  double A = 0.0, A_prime = 0.0;
  double B = 0.0, B_prime = 0.0;
  double C = 0.0;
  double F = 0.0, F_prime = 0.0;
  double G = 0.0;
  double D1 = 0.0, D1_prime = 0.0;
  double D2 = 0.0;
  double rho = 1.0;
  ShiftCase shift_case = ShiftCase::I;
  std::optional<VarianceSplit> split;
  /// True when the split is the trivial A~ = A^ = A (likewise B, F, D1) choice.
  bool generic_split = false;
  SigmaModel sigma_model = SigmaModel::Zero;
  /// "lemma" for the generic derivation, or the preset name for published constants.
  std::string source = "lemma";
};

/// Data model of the loop analysis.
struct DataModel {
  enum class Type { Heterogeneous, ZetaHeterogeneous };
  Type type = Type::Heterogeneous;
  double zeta_sq = 0.0;

  static DataModel heterogeneous() { return {}; }
  static DataModel zeta(double zeta_sq) { return {Type::ZetaHeterogeneous, zeta_sq}; }
};

struct StepsizeCap {
  std::string label;
  double value = 0.0;
};

/// Loop- and data-dependent constants: H = H_coef * gamma^2 and
/// D3 = D3_const + D3_over_gamma / gamma, plus the extra stepsize caps.
struct LoopParams {
  double H_coef = 0.0;
  double D3_const = 0.0;
  double D3_over_gamma = 0.0;
  std::vector<StepsizeCap> caps;

  double H(double gamma) const { return H_coef * gamma * gamma; }
  double D3(double gamma) const { return D3_const + (D3_over_gamma > 0.0 ? D3_over_gamma / gamma : 0.0); }
};

// ---------------------------------------------------------------------------
// Derivations

/// Per-client estimator constants for `spec` on `p` (Lipschitz constants and,
/// for uniform sampling, the per-client variance at the optimum).
/// Throws TheoryError for configurations outside the analysed family.
std::vector<EstimatorParams> estimator_params(const MethodSpec& spec, const GlobalProblem& p);

/// Aggregation of per-client constants into the key assumption.
/// `zeta_star_sq` = (1/n) sum_i ||grad f_i(x*)||^2 enters D1 only in case I.
KeyParams derive_key_params(const std::vector<EstimatorParams>& per_client, ShiftCase shift_case,
                            double zeta_star_sq, double L);

/// Scalar inputs of the published per-method constants.
struct PresetConstants {
  std::size_t n = 1;
  double L = 0.0;
  double max_Lij = 0.0;
  /// Expected-smoothness constant of the single-index sampling.
  double expected_smoothness = 0.0;
  double zeta_star_sq = 0.0;
  /// Mean uniform-variance bound (1/n) sum_i D1_i of the noisy oracle.
  double sigma_sq = 0.0;
  /// Mean variance of the sampled gradient at x*.
  double sigma_star_sq = 0.0;
  double q = 1.0;
  double r = 1.0;
};

/// Published constants (with their variance split) for the named methods.
/// `base` selects the bounded-variance or expected-smoothness variant.
/// Returns nullopt when no published set covers the combination.
std::optional<KeyParams> preset_key_params(Preset preset, EstimatorType base, const PresetConstants& c);

/// Preset constants when applicable, otherwise the generic aggregation.
KeyParams key_params_for(const MethodSpec& spec, const GlobalProblem& p);

/// H, D3 and stepsize caps for the loop/data row. Heterogeneous rows need a
/// variance split; zeta rows with zeta > 0 need mu > 0.
LoopParams loop_params(const KeyParams& kp, const LoopKind& loop, const DataModel& data, double mu, double L);

/// The two stepsize restrictions of the main convergence theorem.
std::vector<StepsizeCap> theorem_caps(const KeyParams& kp, double L);

/// Minimum of the theorem caps and every loop cap.
double max_stepsize(const KeyParams& kp, const LoopParams& lp, double L);

// ---------------------------------------------------------------------------
// Rates

struct Term {
  std::string quantity;
  double value = 0.0;
};

struct RateBound {
  double gamma = 0.0;
  double mu = 0.0;
  double theta = 1.0;
  double Phi0 = 0.0;
  double Psi0 = 0.0;
  std::vector<Term> Phi0_terms;
  std::vector<Term> Psi0_terms;
  /// False when gamma exceeds max_stepsize (the bound is still evaluated).
  bool stepsize_valid = true;

  /// theta^K Phi0 + gamma Psi0 (mu > 0) or Phi0 / K + gamma Psi0 (mu = 0).
  double bound(double K) const;
  /// Smallest K with bound(K) <= eps; nullopt when gamma Psi0 >= eps.
  std::optional<double> predicted_K(double eps) const;
};

RateBound rate_bound(const KeyParams& kp, const LoopParams& lp, double L, double gamma, double mu,
                     double sigma0_sq, double dist0_sq);

/// Decreasing-stepsize choice for a horizon K. With mu > 0:
///   gamma = min{1/h, ln(max{2, min{a mu^2 K^2 / c1, a mu^3 K^3 / c2}}) / (mu K)};
/// with mu = 0: gamma = min{1/h, sqrt(a/b1), cbrt(a/b2), sqrt(a/(c1 K)), cbrt(a/(c2 K))}.
/// A D3 term proportional to 1/gamma moves into c1. Zero denominators drop their term.
struct HorizonStepsize {
  double gamma = 0.0;
  double h = 0.0;
  double a = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
};

HorizonStepsize horizon_stepsize(const KeyParams& kp, const LoopParams& lp, double L, double mu, double dist0_sq,
                                 double sigma0_sq, double K);

/// Expected sigma_0^2 of the realization named by kp.sigma_model, started at x0.
double initial_sigma_sq(const MethodSpec& spec, const GlobalProblem& p, const KeyParams& kp, const Vector& x0);

// ---------------------------------------------------------------------------
// Reports

struct TheoryReport {
  KeyParams kp;
  LoopParams lp;
  DataModel data;
  double L = 0.0;
  double mu = 0.0;
  std::vector<StepsizeCap> caps;  // theorem caps followed by loop caps
  double gamma_max = 0.0;
  double gamma = 0.0;
  std::optional<double> sigma0_sq;
  std::optional<double> dist0_sq;
  std::optional<RateBound> rate;
};

/// Full analysis of `spec` on `p` at stepsize `gamma` (default gamma_max).
/// The rate part requires the optimum.
TheoryReport analyze(const MethodSpec& spec, const GlobalProblem& p, const Vector& x0,
                     const DataModel& data = DataModel::heterogeneous(),
                     std::optional<double> gamma = std::nullopt);

/// Machine-readable key=value lines with 17 significant digits.
std::map<std::string, std::string> to_key_values(const TheoryReport& r, std::optional<double> eps = std::nullopt);

/// Re-derives gamma_max from the kp.* / lp.* / L entries written by to_key_values.
double gamma_max_from_key_values(const std::map<std::string, std::string>& kv);

/// Human-readable table.
void print_report(const TheoryReport& r, std::optional<double> eps, std::ostream& out);

}  // namespace lsgd
