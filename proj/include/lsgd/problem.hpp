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

#include "lsgd/core.hpp"

#include <Eigen/SparseCore>

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lsgd {

enum class ProblemKind { Quadratic, Logistic };

std::string to_string(ProblemKind kind);

/// One client's finite sum f_i = (1/m) sum_j f_{i,j}. Indices are 0-based.
class LocalObjective {
 public:
  virtual ~LocalObjective() = default;

  virtual std::size_t dim() const = 0;
  virtual std::size_t components() const = 0;

  virtual double value(const Vector& x) const = 0;
  virtual void gradient(const Vector& x, Vector& out) const = 0;
  virtual double component_value(std::size_t j, const Vector& x) const = 0;
  virtual void component_gradient(std::size_t j, const Vector& x, Vector& out) const = 0;

  /// f_i(x + delta * e_coord) evaluated in extended precision (finite differences).
  virtual long double value_shifted(const Vector& x, std::size_t coord, long double delta) const = 0;

  /// Dense Hessian of f_i at x.
  virtual Matrix hessian(const Vector& x) const = 0;

  /// Smoothness constant of component j.
  virtual double component_smoothness(std::size_t j) const = 0;

  /// Uniform bound on E||grad f_{i,j}(x) - grad f_i(x)||^2 over all x, if one exists.
  virtual std::optional<double> variance_bound() const { return std::nullopt; }
};

/// f_{i,j}(x) = (mu/2)||x||^2 + ((1-mu) m / 2) (a_j^T (x - z))^2 with orthonormal a_j.
class QuadraticLocal final : public LocalObjective {
 public:
  /// `directions` is d x m with orthonormal columns.
  QuadraticLocal(Matrix directions, Vector center, double mu);

  std::size_t dim() const override { return static_cast<std::size_t>(directions_.rows()); }
  std::size_t components() const override { return static_cast<std::size_t>(directions_.cols()); }
  double value(const Vector& x) const override;
  void gradient(const Vector& x, Vector& out) const override;
  double component_value(std::size_t j, const Vector& x) const override;
  void component_gradient(std::size_t j, const Vector& x, Vector& out) const override;
  long double value_shifted(const Vector& x, std::size_t coord, long double delta) const override;
  Matrix hessian(const Vector& x) const override;
  double component_smoothness(std::size_t j) const override;

  const Matrix& directions() const { return directions_; }
  const Vector& center() const { return center_; }
  double mu() const { return mu_; }

 private:
  Matrix directions_;
  Vector center_;
  double mu_;
};

/// f_{i,j}(x) = log(1 + exp(b_j <a_j, x>)) + (mu/2)||x||^2.
class LogisticLocal final : public LocalObjective {
 public:
  using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  LogisticLocal(SparseRows rows, Vector labels, double mu);

  std::size_t dim() const override { return static_cast<std::size_t>(rows_.cols()); }
  std::size_t components() const override { return static_cast<std::size_t>(rows_.rows()); }
  double value(const Vector& x) const override;
  void gradient(const Vector& x, Vector& out) const override;
  double component_value(std::size_t j, const Vector& x) const override;
  void component_gradient(std::size_t j, const Vector& x, Vector& out) const override;
  long double value_shifted(const Vector& x, std::size_t coord, long double delta) const override;
  Matrix hessian(const Vector& x) const override;
  double component_smoothness(std::size_t j) const override;
  std::optional<double> variance_bound() const override;

  const SparseRows& rows() const { return rows_; }
  const Vector& labels() const { return labels_; }
  double mu() const { return mu_; }

 private:
  SparseRows rows_;
  Vector labels_;
  Vector row_sq_norms_;
  double mu_;
};

struct Optimum {
  Vector x;
  double f = 0.0;
  double grad_norm = 0.0;
};

/// n local finite sums with equal component counts, their constants, and (when
/// known) the exact optimum. Read-only after construction apart from
/// attaching the optimum.
class GlobalProblem {
 public:
  GlobalProblem(ProblemKind kind, std::vector<std::shared_ptr<const LocalObjective>> locals,
                double mu, double L, double max_Lij);

  ProblemKind kind() const { return kind_; }
  std::size_t n() const { return locals_.size(); }
  std::size_t m() const { return m_; }
  std::size_t d() const { return d_; }
  double mu() const { return mu_; }
  double L() const { return L_; }
  double max_Lij() const { return max_Lij_; }

  const LocalObjective& local(std::size_t i) const;

  double local_value(std::size_t i, const Vector& x) const;
  Vector local_gradient(std::size_t i, const Vector& x) const;
  Vector component_gradient(std::size_t i, std::size_t j, const Vector& x) const;

  /// f(x) = (1/n) sum_i f_i(x).
  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;

  const std::optional<Optimum>& optimum() const { return optimum_; }
  void set_optimum(Optimum opt);
  /// grad f_i(x*) for every client; empty when the optimum is unknown.
  const std::vector<Vector>& local_gradients_at_optimum() const { return grads_at_opt_; }

  /// Global Hessian for quadratics (constant); enables a cancellation-free gap.
  void set_quadratic_hessian(Matrix hessian) { hessian_ = std::move(hessian); }
  const std::optional<Matrix>& quadratic_hessian() const { return hessian_; }

  /// f(x) - f* (requires the optimum).
  double suboptimality(const Vector& x) const;

 private:
  ProblemKind kind_;
  std::vector<std::shared_ptr<const LocalObjective>> locals_;
  std::size_t m_ = 0;
  std::size_t d_ = 0;
  double mu_;
  double L_;
  double max_Lij_;
  std::optional<Optimum> optimum_;
  std::vector<Vector> grads_at_opt_;
  Vector grad_f_at_opt_;
  std::optional<Matrix> hessian_;
};

/// (f_i(x), grad f_i(x)) for 0-based client i.
std::pair<double, Vector> value_and_grad(const GlobalProblem& p, std::size_t i, const Vector& x);

/// grad f_{i,j}(x) for 0-based client i and component j.
Vector component_grad(const GlobalProblem& p, std::size_t i, std::size_t j, const Vector& x);

struct OptimumResult {
  std::optional<Optimum> optimum;
  std::size_t iterations = 0;
  std::string message;
};

/// Exact minimizer: dense direct solve for quadratics, certified Newton / GD for logistic.
OptimumResult exact_optimum(const GlobalProblem& p);

/// Computes the optimum and attaches it; throws Error when certification fails.
void attach_optimum(GlobalProblem& p);

struct HeterogeneityReport {
  double zeta_sq_at = 0.0;
  std::optional<double> zeta_star_sq;
  std::optional<double> sigma_star_sq;
};

HeterogeneityReport measure_heterogeneity(const GlobalProblem& p, const std::vector<Vector>& probes);

/// (1/n) sum_i ||grad f_i(x*)||^2; requires the optimum.
double zeta_star_sq(const GlobalProblem& p);

/// Per-client variance of a uniformly sampled component gradient at x*.
std::vector<double> sigma_star_sq_per_client(const GlobalProblem& p);

struct SmoothnessConstants {
  double L = 0.0;
  double max_Lij = 0.0;
  double expected_smoothness = 0.0;
  bool converged = true;
};

/// Numerically recomputed constants (spectra for quadratics, power iteration for logistic).
SmoothnessConstants smoothness_constants(const GlobalProblem& p);

/// Stable log(1 + exp(t)) and logistic sigmoid.
double softplus(double t);
double sigmoid(double t);

}  // namespace lsgd
