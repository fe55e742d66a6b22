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

#include "lsgd/problem.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace lsgd {

std::string to_string(ProblemKind kind) {
  return kind == ProblemKind::Quadratic ? "quadratic" : "logistic";
}

double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

namespace {

long double softplus_ld(long double t) {
  return t > 0.0L ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

void check_dim(const Vector& x, std::size_t d) {
  if (static_cast<std::size_t>(x.size()) != d)
    throw Error("dimension mismatch: expected " + std::to_string(d) + ", got " +
                std::to_string(x.size()));
}

}  // namespace

// ---------------------------------------------------------------------------
// QuadraticLocal

QuadraticLocal::QuadraticLocal(Matrix directions, Vector center, double mu)
    : directions_(std::move(directions)), center_(std::move(center)), mu_(mu) {
  if (center_.size() != directions_.rows()) throw Error("quadratic: center/direction size mismatch");
  if (directions_.cols() < 1) throw Error("quadratic: at least one component required");
}

double QuadraticLocal::value(const Vector& x) const {
  const Vector t = directions_.transpose() * (x - center_);
  return 0.5 * mu_ * x.squaredNorm() + 0.5 * (1.0 - mu_) * t.squaredNorm();
}

void QuadraticLocal::gradient(const Vector& x, Vector& out) const {
  const Vector t = directions_.transpose() * (x - center_);
  out.noalias() = mu_ * x;
  out.noalias() += (1.0 - mu_) * (directions_ * t);
}

double QuadraticLocal::component_value(std::size_t j, const Vector& x) const {
  const double t = directions_.col(static_cast<Eigen::Index>(j)).dot(x - center_);
  const double m = static_cast<double>(components());
  return 0.5 * mu_ * x.squaredNorm() + 0.5 * (1.0 - mu_) * m * t * t;
}

void QuadraticLocal::component_gradient(std::size_t j, const Vector& x, Vector& out) const {
  const auto a = directions_.col(static_cast<Eigen::Index>(j));
  const double t = a.dot(x - center_);
  const double m = static_cast<double>(components());
  out.noalias() = mu_ * x;
  out.noalias() += ((1.0 - mu_) * m * t) * a;
}

long double QuadraticLocal::value_shifted(const Vector& x, std::size_t coord, long double delta) const {
  VectorX<long double> xs = x.cast<long double>();
  xs(static_cast<Eigen::Index>(coord)) += delta;
  const VectorX<long double> e = xs - center_.cast<long double>();
  const VectorX<long double> t = directions_.cast<long double>().transpose() * e;
  const long double mu = mu_;
  return 0.5L * mu * xs.squaredNorm() + 0.5L * (1.0L - mu) * t.squaredNorm();
}

Matrix QuadraticLocal::hessian(const Vector& /*x*/) const {
  Matrix h = (1.0 - mu_) * (directions_ * directions_.transpose());
  h.diagonal().array() += mu_;
  return h;
}

double QuadraticLocal::component_smoothness(std::size_t j) const {
  const double m = static_cast<double>(components());
  return mu_ + (1.0 - mu_) * m * directions_.col(static_cast<Eigen::Index>(j)).squaredNorm();
}

// ---------------------------------------------------------------------------
// LogisticLocal

LogisticLocal::LogisticLocal(SparseRows rows, Vector labels, double mu)
    : rows_(std::move(rows)), labels_(std::move(labels)), mu_(mu) {
  if (labels_.size() != rows_.rows()) throw Error("logistic: label/row count mismatch");
  if (rows_.rows() < 1) throw Error("logistic: at least one row required");
  rows_.makeCompressed();
  row_sq_norms_.resize(rows_.rows());
  for (Eigen::Index j = 0; j < rows_.rows(); ++j) {
    double s = 0.0;
    for (SparseRows::InnerIterator it(rows_, j); it; ++it) s += it.value() * it.value();
    row_sq_norms_(j) = s;
  }
}

double LogisticLocal::value(const Vector& x) const {
  const Vector t = rows_ * x;
  double s = 0.0;
  for (Eigen::Index j = 0; j < t.size(); ++j) s += softplus(labels_(j) * t(j));
  return s / static_cast<double>(t.size()) + 0.5 * mu_ * x.squaredNorm();
}

void LogisticLocal::gradient(const Vector& x, Vector& out) const {
  const Vector t = rows_ * x;
  Vector w(t.size());
  const double inv_m = 1.0 / static_cast<double>(t.size());
  for (Eigen::Index j = 0; j < t.size(); ++j) w(j) = labels_(j) * sigmoid(labels_(j) * t(j)) * inv_m;
  out.noalias() = rows_.transpose() * w;
  out.noalias() += mu_ * x;
}

double LogisticLocal::component_value(std::size_t j, const Vector& x) const {
  const auto r = static_cast<Eigen::Index>(j);
  double t = 0.0;
  for (SparseRows::InnerIterator it(rows_, r); it; ++it) t += it.value() * x(it.index());
  return softplus(labels_(r) * t) + 0.5 * mu_ * x.squaredNorm();
}

void LogisticLocal::component_gradient(std::size_t j, const Vector& x, Vector& out) const {
  const auto r = static_cast<Eigen::Index>(j);
  double t = 0.0;
  for (SparseRows::InnerIterator it(rows_, r); it; ++it) t += it.value() * x(it.index());
  const double c = labels_(r) * sigmoid(labels_(r) * t);
  out.noalias() = mu_ * x;
  for (SparseRows::InnerIterator it(rows_, r); it; ++it) out(it.index()) += c * it.value();
}

long double LogisticLocal::value_shifted(const Vector& x, std::size_t coord, long double delta) const {
  VectorX<long double> xs = x.cast<long double>();
  const auto c = static_cast<Eigen::Index>(coord);
  xs(c) += delta;
  long double s = 0.0L;
  for (Eigen::Index j = 0; j < rows_.rows(); ++j) {
    long double t = 0.0L;
    for (SparseRows::InnerIterator it(rows_, j); it; ++it)
      t += static_cast<long double>(it.value()) * xs(it.index());
    s += softplus_ld(static_cast<long double>(labels_(j)) * t);
  }
  const long double mu = mu_;
  return s / static_cast<long double>(rows_.rows()) + 0.5L * mu * xs.squaredNorm();
}

Matrix LogisticLocal::hessian(const Vector& x) const {
  const Vector t = rows_ * x;
  Vector s(t.size());
  const double inv_m = 1.0 / static_cast<double>(t.size());
  for (Eigen::Index j = 0; j < t.size(); ++j) {
    const double p = sigmoid(labels_(j) * t(j));
    s(j) = p * (1.0 - p) * inv_m;
  }
  const SparseRows weighted = s.asDiagonal() * rows_;
  Matrix h = Matrix(rows_.transpose() * weighted);
  h.diagonal().array() += mu_;
  return h;
}

double LogisticLocal::component_smoothness(std::size_t j) const {
  return 0.25 * row_sq_norms_(static_cast<Eigen::Index>(j)) + mu_;
}

std::optional<double> LogisticLocal::variance_bound() const { return row_sq_norms_.mean(); }

// ---------------------------------------------------------------------------
// GlobalProblem

GlobalProblem::GlobalProblem(ProblemKind kind, std::vector<std::shared_ptr<const LocalObjective>> locals,
                             double mu, double L, double max_Lij)
    : kind_(kind), locals_(std::move(locals)), mu_(mu), L_(L), max_Lij_(max_Lij) {
  if (locals_.empty()) throw Error("problem needs at least one client");
  m_ = locals_.front()->components();
  d_ = locals_.front()->dim();
  for (const auto& l : locals_) {
    if (!l) throw Error("null local objective");
    if (l->components() != m_) throw Error("all clients must hold the same number of components");
    if (l->dim() != d_) throw Error("all clients must share the dimension");
  }
  const double slack = 1e-12 * std::max(1.0, max_Lij);
  if (!(mu >= 0.0 && mu <= L + slack && L <= max_Lij + slack))
    throw Error("constants must satisfy 0 <= mu <= L <= maxLij");
}

const LocalObjective& GlobalProblem::local(std::size_t i) const {
  if (i >= locals_.size()) throw Error("client index " + std::to_string(i) + " out of range");
  return *locals_[i];
}

double GlobalProblem::local_value(std::size_t i, const Vector& x) const {
  check_dim(x, d_);
  return local(i).value(x);
}

Vector GlobalProblem::local_gradient(std::size_t i, const Vector& x) const {
  check_dim(x, d_);
  Vector g(static_cast<Eigen::Index>(d_));
  local(i).gradient(x, g);
  return g;
}

Vector GlobalProblem::component_gradient(std::size_t i, std::size_t j, const Vector& x) const {
  check_dim(x, d_);
  if (j >= m_) throw Error("component index " + std::to_string(j) + " out of range");
  Vector g(static_cast<Eigen::Index>(d_));
  local(i).component_gradient(j, x, g);
  return g;
}

double GlobalProblem::value(const Vector& x) const {
  check_dim(x, d_);
  double s = 0.0;
  for (const auto& l : locals_) s += l->value(x);
  return s / static_cast<double>(locals_.size());
}

Vector GlobalProblem::gradient(const Vector& x) const {
  check_dim(x, d_);
  std::vector<Vector> gs(locals_.size(), Vector(static_cast<Eigen::Index>(d_)));
  for (std::size_t i = 0; i < locals_.size(); ++i) locals_[i]->gradient(x, gs[i]);
  return pairwise_mean(gs);
}

void GlobalProblem::set_optimum(Optimum opt) {
  check_dim(opt.x, d_);
  grads_at_opt_.assign(locals_.size(), Vector(static_cast<Eigen::Index>(d_)));
  for (std::size_t i = 0; i < locals_.size(); ++i) locals_[i]->gradient(opt.x, grads_at_opt_[i]);
  grad_f_at_opt_ = pairwise_mean(grads_at_opt_);
  optimum_ = std::move(opt);
}

double GlobalProblem::suboptimality(const Vector& x) const {
  if (!optimum_) throw Error("suboptimality requires the optimum");
  if (hessian_) {
    const Vector e = x - optimum_->x;
    return grad_f_at_opt_.dot(e) + 0.5 * e.dot(*hessian_ * e);
  }
  return value(x) - optimum_->f;
}

std::pair<double, Vector> value_and_grad(const GlobalProblem& p, std::size_t i, const Vector& x) {
  return {p.local_value(i, x), p.local_gradient(i, x)};
}

Vector component_grad(const GlobalProblem& p, std::size_t i, std::size_t j, const Vector& x) {
  return p.component_gradient(i, j, x);
}

// ---------------------------------------------------------------------------
// Optimum

namespace {

bool certified(double grad_norm, const Vector& x, double rel) {
  return grad_norm <= rel * std::max(1.0, x.norm());
}

OptimumResult quadratic_optimum(const GlobalProblem& p) {
  const auto d = static_cast<Eigen::Index>(p.d());
  Matrix h = Matrix::Zero(d, d);
  Vector rhs = Vector::Zero(d);
  const Vector zero = Vector::Zero(d);
  for (std::size_t i = 0; i < p.n(); ++i) {
    const auto& q = dynamic_cast<const QuadraticLocal&>(p.local(i));
    h += q.hessian(zero);
    const Matrix& a = q.directions();
    rhs += (1.0 - q.mu()) * (a * (a.transpose() * q.center()));
  }
  h /= static_cast<double>(p.n());
  rhs /= static_cast<double>(p.n());

  OptimumResult res;
  const Eigen::LDLT<Matrix> ldlt(h);
  if (ldlt.info() != Eigen::Success) {
    res.message = "quadratic system factorization failed";
    return res;
  }
  Vector x = ldlt.solve(rhs);
  // Two rounds of iterative refinement push the residual to rounding level.
  for (int r = 0; r < 2; ++r) x += ldlt.solve(rhs - h * x);
  const double gn = p.gradient(x).norm();
  res.iterations = 1;
  if (!x.allFinite() || !certified(gn, x, 1e-8)) {
    res.message = "quadratic minimizer is not unique (singular system)";
    return res;
  }
  res.optimum = Optimum{x, p.value(x), gn};
  res.message = "direct solve";
  return res;
}

OptimumResult logistic_optimum(const GlobalProblem& p) {
  constexpr double kRel = 1e-12;
  const auto d = static_cast<Eigen::Index>(p.d());
  OptimumResult res;
  Vector x = Vector::Zero(d);
  Vector g = p.gradient(x);
  double f = p.value(x);

  if (p.d() <= 2048) {
    // Damped Newton with Armijo backtracking.
    for (std::size_t it = 0; it < 200; ++it) {
      if (certified(g.norm(), x, kRel)) break;
      Matrix h = Matrix::Zero(d, d);
      for (std::size_t i = 0; i < p.n(); ++i) h += p.local(i).hessian(x);
      h /= static_cast<double>(p.n());
      const Eigen::LLT<Matrix> llt(h);
      if (llt.info() != Eigen::Success) break;
      const Vector dir = -llt.solve(g);
      double t = 1.0;
      bool accepted = false;
      for (int bt = 0; bt < 60; ++bt) {
        const Vector xn = x + t * dir;
        const double fn = p.value(xn);
        const Vector gn = p.gradient(xn);
        if (fn <= f + 1e-4 * t * g.dot(dir) || gn.norm() < g.norm()) {
          x = xn;
          f = fn;
          g = gn;
          accepted = true;
          break;
        }
        t *= 0.5;
      }
      res.iterations = it + 1;
      if (!accepted) break;
    }
  }
  if (!certified(g.norm(), x, kRel)) {
    // Full-batch gradient descent with stepsize 1/L.
    const double step = 1.0 / p.L();
    constexpr std::size_t kCap = 200000;
    for (std::size_t it = 0; it < kCap && !certified(g.norm(), x, kRel); ++it) {
      x -= step * g;
      g = p.gradient(x);
      ++res.iterations;
    }
    f = p.value(x);
  }
  const double gn = g.norm();
  if (!x.allFinite() || !certified(gn, x, kRel)) {
    res.message = "iteration cap reached without certification (gradient norm " + std::to_string(gn) + ")";
    return res;
  }
  res.optimum = Optimum{x, f, gn};
  res.message = "newton/gd certified";
  return res;
}

}  // namespace

OptimumResult exact_optimum(const GlobalProblem& p) {
  return p.kind() == ProblemKind::Quadratic ? quadratic_optimum(p) : logistic_optimum(p);
}

void attach_optimum(GlobalProblem& p) {
  OptimumResult res = exact_optimum(p);
  if (!res.optimum) throw Error("exact optimum: " + res.message);
  if (p.kind() == ProblemKind::Quadratic) {
    const auto d = static_cast<Eigen::Index>(p.d());
    const Vector zero = Vector::Zero(d);
    Matrix h = Matrix::Zero(d, d);
    for (std::size_t i = 0; i < p.n(); ++i) h += p.local(i).hessian(zero);
    p.set_quadratic_hessian(h / static_cast<double>(p.n()));
  }
  p.set_optimum(std::move(*res.optimum));
}

// ---------------------------------------------------------------------------
// Heterogeneity and smoothness

double zeta_star_sq(const GlobalProblem& p) {
  if (!p.optimum()) throw Error("zeta_star_sq requires the optimum");
  double s = 0.0;
  for (const Vector& g : p.local_gradients_at_optimum()) s += g.squaredNorm();
  return s / static_cast<double>(p.n());
}

std::vector<double> sigma_star_sq_per_client(const GlobalProblem& p) {
  if (!p.optimum()) throw Error("sigma_star_sq requires the optimum");
  const Vector& xs = p.optimum()->x;
  std::vector<double> out(p.n(), 0.0);
  Vector g(static_cast<Eigen::Index>(p.d()));
  for (std::size_t i = 0; i < p.n(); ++i) {
    const Vector& gi = p.local_gradients_at_optimum()[i];
    double s = 0.0;
    for (std::size_t j = 0; j < p.m(); ++j) {
      p.local(i).component_gradient(j, xs, g);
      s += (g - gi).squaredNorm();
    }
    out[i] = s / static_cast<double>(p.m());
  }
  return out;
}

HeterogeneityReport measure_heterogeneity(const GlobalProblem& p, const std::vector<Vector>& probes) {
  if (probes.empty()) throw Error("measure_heterogeneity needs at least one probe");
  HeterogeneityReport rep;
  for (const Vector& x : probes) {
    std::vector<Vector> gs;
    gs.reserve(p.n());
    for (std::size_t i = 0; i < p.n(); ++i) gs.push_back(p.local_gradient(i, x));
    const Vector mean = pairwise_mean(gs);
    double s = 0.0;
    for (const Vector& g : gs) s += (g - mean).squaredNorm();
    rep.zeta_sq_at = std::max(rep.zeta_sq_at, s / static_cast<double>(p.n()));
  }
  if (p.optimum()) {
    rep.zeta_star_sq = zeta_star_sq(p);
    const auto per = sigma_star_sq_per_client(p);
    double s = 0.0;
    for (double v : per) s += v;
    rep.sigma_star_sq = s / static_cast<double>(per.size());
  }
  return rep;
}

SmoothnessConstants smoothness_constants(const GlobalProblem& p) {
  SmoothnessConstants out;
  for (std::size_t i = 0; i < p.n(); ++i)
    for (std::size_t j = 0; j < p.m(); ++j)
      out.max_Lij = std::max(out.max_Lij, p.local(i).component_smoothness(j));
  out.expected_smoothness = out.max_Lij;

  if (p.kind() == ProblemKind::Quadratic) {
    const Vector zero = Vector::Zero(static_cast<Eigen::Index>(p.d()));
    for (std::size_t i = 0; i < p.n(); ++i) {
      const Eigen::SelfAdjointEigenSolver<Matrix> es(p.local(i).hessian(zero), Eigen::EigenvaluesOnly);
      out.L = std::max(out.L, es.eigenvalues().maxCoeff());
    }
    return out;
  }

  // Power iteration on (1/m) A^T A per client.
  for (std::size_t i = 0; i < p.n(); ++i) {
    const auto& lg = dynamic_cast<const LogisticLocal&>(p.local(i));
    const auto& a = lg.rows();
    const double inv_m = 1.0 / static_cast<double>(a.rows());
    Vector v = Vector::Ones(a.cols()).normalized();
    double lambda = 0.0;
    bool conv = false;
    for (int it = 0; it < 5000; ++it) {
      Vector w = inv_m * (a.transpose() * (a * v));
      const double next = v.dot(w);
      const double nw = w.norm();
      if (nw == 0.0) {
        lambda = 0.0;
        conv = true;
        break;
      }
      v = w / nw;
      if (std::abs(next - lambda) <= 1e-13 * std::max(1.0, std::abs(next))) {
        lambda = next;
        conv = true;
        break;
      }
      lambda = next;
    }
    if (!conv) out.converged = false;
    out.L = std::max(out.L, 0.25 * lambda + lg.mu());
  }
  if (!out.converged) out.L = out.max_Lij;
  return out;
}

}  // namespace lsgd
