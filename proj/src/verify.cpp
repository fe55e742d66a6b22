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

#include "lsgd/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace lsgd {

namespace {

/// Seed of the audit's own streams, disjoint from the run that produced the states.
std::uint64_t audit_seed(std::uint64_t seed) {
  return mix64(seed ^ (static_cast<std::uint64_t>(Stream::Verify) << 56));
}

/// Running mean / variance (Welford).
struct Moments {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double v) {
    ++count;
    const double delta = v - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (v - mean);
  }
  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
  double standard_error() const { return count > 0 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0; }
};

/// Absolute allowance for floating-point rounding in exact comparisons.
double rounding_floor(double observed, double bound) {
  return 1e-12 * (1.0 + std::abs(observed) + std::abs(bound));
}

CheckReport inequality(std::string name, double observed, double bound, double se, std::uint64_t samples) {
  CheckReport r;
  r.name = std::move(name);
  r.observed = observed;
  r.bound = bound;
  r.slack = kStandardErrors * se + rounding_floor(observed, bound);
  r.samples = samples;
  r.margin = bound * (1.0 + kRelativeSlack) + r.slack - observed;
  r.passed = r.margin >= 0.0;
  return r;
}

/// Summarizes sub-checks by the one with the smallest relative margin.
CheckReport summarize(std::string name, std::vector<CheckReport> items) {
  CheckReport r;
  r.name = std::move(name);
  r.passed = true;
  const CheckReport* worst = nullptr;
  double worst_rel = std::numeric_limits<double>::infinity();
  for (const CheckReport& c : items) {
    if (c.skipped) continue;
    r.passed = r.passed && c.passed;
    r.samples += c.samples;
    const double rel = c.margin / std::max(std::abs(c.bound) + c.slack, 1e-300);
    if (!worst || rel < worst_rel) {
      worst = &c;
      worst_rel = rel;
    }
  }
  if (worst) {
    r.observed = worst->observed;
    r.bound = worst->bound;
    r.slack = worst->slack;
    r.margin = worst->margin;
    r.detail = "worst: " + worst->name;
  } else {
    r.skipped = true;
  }
  r.items = std::move(items);
  return r;
}

bool same(const std::optional<Vector>& a, const std::optional<Vector>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || *a == *b;
}

double component_residual(const GlobalProblem& p, std::size_t i, const Vector& w) {
  const Vector& xs = p.optimum()->x;
  double v = 0.0;
  for (std::size_t j = 0; j < p.m(); ++j)
    v += (p.component_gradient(i, j, w) - p.component_gradient(i, j, xs)).squaredNorm();
  return v / static_cast<double>(p.m());
}

/// Variance of the r-batch base-oracle target at `at`.
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

/// Client i's contribution to sigma^2 (sigma^2 is the mean over clients).
double client_sigma_term(const MethodSpec& spec, const GlobalProblem& p, const KeyParams& kp,
                         const MethodState& s, std::size_t i) {
  const Vector& g_opt = p.local_gradients_at_optimum()[i];
  auto at_y = [&]() -> const Vector& {
    if (!s.shared.y) throw Error("state has no shared anchor");
    return *s.shared.y;
  };
  auto uniform_base = [&] { return spec.estimator.type == EstimatorType::UniformSample; };
  switch (kp.sigma_model) {
    case SigmaModel::Zero: return 0.0;
    case SigmaModel::LocalAnchorResidual: return 4.0 * component_residual(p, i, *s.workers[i].anchor);
    case SigmaModel::SharedAnchorLocal: {
      const Vector& y = at_y();
      double v = (p.local_gradient(i, y) - g_opt).squaredNorm();
      if (uniform_base()) v += target_variance(spec, p, i, y);
      return v;
    }
    case SigmaModel::SharedAnchorFull: {
      const Vector& y = at_y();
      return component_residual(p, i, y) + (p.local_gradient(i, y) - g_opt).squaredNorm();
    }
    case SigmaModel::Aggregated: {
      double v = 0.0;
      const auto t = spec.estimator.type;
      if (t == EstimatorType::LSVRG || t == EstimatorType::GlobalAnchorSVRG) {
        const Vector& w = spec.needs_local_anchor() ? *s.workers[i].anchor : at_y();
        v += 4.0 * component_residual(p, i, w);
      }
      if (spec.shift.type == ShiftType::Learned) {
        if (spec.shift.source == ShiftSource::AnchorStochastic) {
          const Vector& y = at_y();
          v += (p.local_gradient(i, y) - g_opt).squaredNorm() + target_variance(spec, p, i, y);
        } else {
          v += (*s.workers[i].h - g_opt).squaredNorm();
        }
      }
      return v;
    }
  }
  return 0.0;
}

/// sigma_i^2 of the per-client SVRG-type estimator: anchor residual at w_i (or y).
double estimator_sigma_sq(const MethodSpec& spec, const GlobalProblem& p, const MethodState& s, std::size_t i) {
  const auto t = spec.estimator.type;
  if (t != EstimatorType::LSVRG && t != EstimatorType::GlobalAnchorSVRG) return 0.0;
  const Vector& w = spec.needs_local_anchor() ? *s.workers[i].anchor : *s.shared.y;
  return component_residual(p, i, w);
}

bool redraws_shift(const MethodSpec& spec) {
  return spec.shift.type == ShiftType::Learned && spec.shift.source == ShiftSource::AnchorStochastic;
}

/// Replaces every h_i by a fresh target at y (the expectation the sigma model refers to).
void redraw_shifts(const MethodSpec& spec, const GlobalProblem& p, MethodState& s, std::uint64_t k,
                   std::uint64_t seed, std::uint64_t draw) {
  for (std::size_t i = 0; i < p.n(); ++i) {
    Vector h;
    learned_target(spec, p, i, *s.shared.y, std::nullopt, k, seed, draw, h);
    s.workers[i].h = std::move(h);
  }
  recompute_shifts(s);
}

std::string fmt(double v) { return format_double(v); }

}  // namespace

std::vector<AuditState> sample_states(const RunConfig& cfg, const GlobalProblem& p, std::size_t count) {
  if (count == 0) return {};
  if (cfg.K < count) throw ConfigError("sample_states: K must be >= count");
  std::vector<std::size_t> wanted;
  for (std::size_t j = 0; j < count; ++j) wanted.push_back(cfg.K * (j + 1) / count);
  std::vector<AuditState> out;
  out.reserve(count);
  std::size_t next = 0;
  run(cfg, p, [&](std::size_t k, const MethodState& s, bool) {
    while (next < wanted.size() && wanted[next] == k) {
      out.push_back({k, s});
      ++next;
    }
  });
  return out;
}

double sigma_sq_at(const MethodSpec& spec, const GlobalProblem& p, const KeyParams& kp, const MethodState& state) {
  if (kp.sigma_model == SigmaModel::Zero) return 0.0;
  if (!p.optimum()) throw Error("sigma_k^2 requires the optimum");
  double total = 0.0;
  for (std::size_t i = 0; i < p.n(); ++i) total += client_sigma_term(spec, p, kp, state, i);
  return total / static_cast<double>(p.n());
}

CheckReport check_unbiasedness(const MethodSpec& spec, const GlobalProblem& p, const AuditState& at,
                               std::uint64_t draws, std::uint64_t seed) {
  const std::size_t n = p.n();
  const auto d = static_cast<Eigen::Index>(p.d());
  const std::uint64_t vseed = audit_seed(seed);
  std::vector<Vector> grads(n);
  for (std::size_t i = 0; i < n; ++i) grads[i] = p.local_gradient(i, at.state.workers[i].x);
  const Vector target = pairwise_mean(grads);

  Vector sum = Vector::Zero(d), sum_sq = Vector::Zero(d);
  std::vector<Vector> dirs(n);
  Vector first;
  bool varies = false;
  for (std::uint64_t t = 0; t < draws; ++t) {
    for (std::size_t i = 0; i < n; ++i)
      sample_direction(spec, p, i, at.state.workers[i], at.state.shared, at.k, vseed, t, dirs[i]);
    const Vector g = pairwise_mean(dirs);
    if (t == 0) first = g;
    else if (g != first) varies = true;
    sum += g;
    sum_sq += g.cwiseProduct(g);
  }
  const double T = static_cast<double>(draws);
  const Vector mean = sum / T;
  CheckReport r;
  r.name = "unbiasedness";
  r.samples = draws;
  r.bound = kStandardErrors;
  if (!varies) {
    // Deterministic directions: the mean must equal the target up to rounding.
    const double dev = (first - target).cwiseAbs().maxCoeff();
    const double tol = 1e-12 * (1.0 + target.cwiseAbs().maxCoeff());
    r.observed = dev;
    r.bound = tol;
    r.margin = tol - dev;
    r.passed = dev <= tol;
    r.detail = "deterministic directions";
    return r;
  }
  double worst = 0.0;
  for (Eigen::Index c = 0; c < d; ++c) {
    const double var = std::max(0.0, (sum_sq(c) - T * mean(c) * mean(c)) / (T - 1.0));
    const double se = std::sqrt(var / T);
    const double dev = std::abs(mean(c) - target(c));
    const double tol = 1e-12 * (1.0 + std::abs(target(c)));
    const double z = dev <= tol ? 0.0 : (se > 0.0 ? dev / se : std::numeric_limits<double>::infinity());
    worst = std::max(worst, z);
  }
  r.observed = worst;
  r.margin = kStandardErrors - worst;
  r.passed = worst < kStandardErrors;
  r.detail = "max |z| over coordinates";
  return r;
}

CheckReport check_second_moment(const MethodSpec& spec, const GlobalProblem& p, const KeyParams& kp,
                                const std::vector<AuditState>& states, std::uint64_t draws, std::uint64_t seed,
                                const std::vector<EstimatorParams>& estimators) {
  if (!p.optimum()) throw Error("check_second_moment requires the optimum");
  if (!estimators.empty() && estimators.size() != p.n())
    throw ConfigError("check_second_moment: one estimator parameter set per client is required");
  if (draws < 2) throw ConfigError("check_second_moment needs at least 2 draws");
  const std::size_t n = p.n();
  const double nd = static_cast<double>(n);
  const std::uint64_t vseed = audit_seed(seed);
  const bool redraw = redraws_shift(spec);
  std::vector<double> f_opt(n);
  for (std::size_t i = 0; i < n; ++i) f_opt[i] = p.local_value(i, p.optimum()->x);
  std::vector<CheckReport> items;

  for (const AuditState& at : states) {
    const MethodState& s = at.state;
    const std::string where = "@k=" + std::to_string(at.k);
    const auto [xv, V] = virtual_and_discrepancy(s);
    const double gap = p.suboptimality(xv);
    std::vector<double> terms(n);
    double sigma = 0.0;
    if (kp.sigma_model != SigmaModel::Zero) {
      for (std::size_t i = 0; i < n; ++i) sigma += terms[i] = client_sigma_term(spec, p, kp, s, i);
      sigma /= nd;
    }

    // The conditional mean of g_i given the state (shift memory included) is
    // grad f_i(x_i) - b_i, so both split parts have exact per-draw estimates.
    std::vector<Vector> grads(n);
    for (std::size_t i = 0; i < n; ++i) grads[i] = p.local_gradient(i, s.workers[i].x);
    MethodState local = s;
    std::vector<Vector> dirs(n);
    Vector shift;
    Moments m6, m7, mtilde, mhat;
    std::vector<Moments> mest(estimators.size());
    const std::vector<Vector>& g_opt = p.local_gradients_at_optimum();
    for (std::uint64_t t = 0; t < draws; ++t) {
      if (redraw) redraw_shifts(spec, p, local, at.k, vseed, t);
      double v6 = 0.0, tilde = 0.0, hat = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        sample_estimator(spec, p, i, local.workers[i], local.shared, at.k, vseed, t, dirs[i]);
        if (!estimators.empty()) mest[i].push((dirs[i] - g_opt[i]).squaredNorm());
        current_shift(spec, p, i, local.shared, shift);
        dirs[i] -= shift;
        const Vector mean_i = grads[i] - shift;
        v6 += dirs[i].squaredNorm();
        tilde += mean_i.squaredNorm();
        hat += (dirs[i] - mean_i).squaredNorm();
      }
      m6.push(v6 / nd);
      m7.push(pairwise_mean(dirs).squaredNorm());
      mtilde.push(tilde / nd);
      mhat.push(hat / nd);
    }

    for (std::size_t i = 0; i < estimators.size(); ++i) {
      const EstimatorParams& e = estimators[i];
      const Vector& xi = s.workers[i].x;
      const double bregman = std::max(
          0.0, p.local_value(i, xi) - f_opt[i] - g_opt[i].dot(xi - p.optimum()->x));
      const double sigma_i = e.B > 0.0 ? estimator_sigma_sq(spec, p, s, i) : 0.0;
      items.push_back(inequality("estimator[" + std::to_string(i) + "]" + where, mest[i].mean,
                                 2.0 * e.A * bregman + e.B * sigma_i + e.D1, mest[i].standard_error(), draws));
    }

    items.push_back(inequality("second-moment" + where, m6.mean,
                               2.0 * kp.A * gap + kp.B * sigma + kp.F * V + kp.D1, m6.standard_error(), draws));
    items.push_back(inequality("mean-second-moment" + where, m7.mean,
                               2.0 * kp.A_prime * gap + kp.B_prime * sigma + kp.F_prime * V + kp.D1_prime,
                               m7.standard_error(), draws));
    if (kp.split) {
      const VarianceSplit& sp = *kp.split;
      items.push_back(inequality("mean-part" + where, mtilde.mean,
                                 2.0 * sp.A_tilde * gap + sp.B_tilde * sigma + sp.F_tilde * V + sp.D1_tilde,
                                 mtilde.standard_error(), draws));
      items.push_back(inequality("variance-part" + where, mhat.mean,
                                 2.0 * sp.A_hat * gap + sp.B_hat * sigma + sp.F_hat * V + sp.D1_hat,
                                 mhat.standard_error(), draws));
    }

    if (kp.sigma_model != SigmaModel::Zero) {
      Moments m8;
      for (std::uint64_t t = 0; t < draws; ++t) {
        const std::uint64_t tseed = mix64(vseed + 0x9e3779b97f4a7c15ULL * (t + 1));
        MethodState next = s;
        const bool comm = is_communication(spec.loop, at.k, tseed);
        refresh_state(spec, p, next, xv, comm, at.k, tseed);
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const bool unchanged = same(next.workers[i].anchor, s.workers[i].anchor) &&
                                 same(next.shared.y, s.shared.y) && same(next.workers[i].h, s.workers[i].h);
          v += unchanged ? terms[i] : client_sigma_term(spec, p, kp, next, i);
        }
        m8.push(v / nd);
      }
      items.push_back(inequality("sigma-recursion" + where, m8.mean,
                                 (1.0 - kp.rho) * sigma + 2.0 * kp.C * gap + kp.G * V + kp.D2,
                                 m8.standard_error(), draws));
    }
  }
  return summarize("second-moment audit", std::move(items));
}

std::vector<EstimatorParams> halve_A(std::vector<EstimatorParams> estimators) {
  for (EstimatorParams& e : estimators) e.A *= 0.5;
  return estimators;
}

KeyParams halve_A(KeyParams kp) {
  kp.A *= 0.5;
  kp.A_prime *= 0.5;
  if (kp.split) {
    kp.split->A_tilde *= 0.5;
    kp.split->A_hat *= 0.5;
  }
  return kp;
}

CheckReport check_parallel_sgd_reduction(const MethodSpec& spec, const GlobalProblem& p, double gamma,
                                         std::size_t K, std::uint64_t seed) {
  CheckReport r;
  r.name = "parallel-sgd reduction";
  const bool single_step_loop = (spec.loop.type == LoopType::Fixed && spec.loop.tau == 1) ||
                                (spec.loop.type == LoopType::Bernoulli && spec.loop.p >= 1.0);
  const auto t = spec.estimator.type;
  const bool plain = t == EstimatorType::FullGradient || t == EstimatorType::NoisyGradient ||
                     t == EstimatorType::UniformSample;
  if (!single_step_loop || !plain || spec.shift.type != ShiftType::None) {
    r.skipped = true;
    r.detail = "inapplicable: requires an unshifted plain estimator with a single-step loop";
    return r;
  }

  const std::size_t n = p.n();
  const auto d = static_cast<Eigen::Index>(p.d());
  RunConfig cfg;
  cfg.spec = spec;
  cfg.gamma = gamma;
  cfg.K = K;
  cfg.x0 = Vector::Zero(d);
  cfg.master_seed = seed;
  cfg.record_every = K;
  std::vector<Vector> engine_path;
  engine_path.reserve(K);
  run(cfg, p, [&](std::size_t, const MethodState& s, bool) { engine_path.push_back(s.workers[0].x); });

  // Reference: x <- x - gamma * (1/n) sum_i g_i with the same per-client streams.
  Vector x = cfg.x0;
  Vector g(d), gi(d);
  double worst = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    g.setZero();
    for (std::size_t i = 0; i < n; ++i) {
      CounterEngine gen(seed, Stream::Direction, i, k, 0);
      const LocalObjective& f = p.local(i);
      if (t == EstimatorType::UniformSample) {
        std::uniform_int_distribution<std::size_t> pick(0, p.m() - 1);
        f.component_gradient(pick(gen), x, gi);
      } else {
        f.gradient(x, gi);
        const double s = spec.estimator.noise_for(i);
        if (t == EstimatorType::NoisyGradient && s > 0.0) {
          std::normal_distribution<double> normal(0.0, std::sqrt(s / static_cast<double>(d)));
          for (Eigen::Index c = 0; c < d; ++c) gi(c) += normal(gen);
        }
      }
      g += gi;
    }
    x -= gamma * (g / static_cast<double>(n));
    const Vector& e = engine_path.at(k);
    for (Eigen::Index c = 0; c < d; ++c)
      worst = std::max(worst, std::abs(e(c) - x(c)) / std::max(1.0, std::abs(x(c))));
  }
  r.observed = worst;
  r.bound = 1e-12;
  r.samples = K;
  r.margin = r.bound - worst;
  r.passed = worst <= r.bound;
  r.detail = "max relative coordinate difference";
  return r;
}

CheckReport finite_difference_audit(const GlobalProblem& p, std::size_t points, std::uint64_t seed) {
  if (points < 1) throw ConfigError("finite_difference_audit needs at least one point");
  const bool quadratic = p.kind() == ProblemKind::Quadratic;
  const long double h = quadratic ? 1e-5L : 1e-6L;
  const auto d = static_cast<Eigen::Index>(p.d());
  CheckReport r;
  r.name = "finite differences";
  r.bound = quadratic ? 1e-9 : 1e-5;
  Vector g(d);
  double worst = 0.0;
  for (std::size_t t = 0; t < points; ++t) {
    Vector x = Vector::Zero(d);
    if (t > 0) {
      CounterEngine gen(seed, Stream::Probe, t);
      std::normal_distribution<double> normal(0.0, 1.0);
      for (Eigen::Index c = 0; c < d; ++c) x(c) = normal(gen);
    }
    for (std::size_t i = 0; i < p.n(); ++i) {
      const LocalObjective& f = p.local(i);
      f.gradient(x, g);
      const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
      for (Eigen::Index c = 0; c < d; ++c) {
        const long double fd = (f.value_shifted(x, static_cast<std::size_t>(c), h) -
                                f.value_shifted(x, static_cast<std::size_t>(c), -h)) /
                               (2.0L * h);
        worst = std::max(worst, static_cast<double>(std::abs(fd - static_cast<long double>(g(c)))) / scale);
      }
      ++r.samples;
    }
  }
  r.observed = worst;
  r.margin = r.bound - worst;
  r.passed = worst < r.bound;
  r.detail = std::string(quadratic ? "quadratic" : "logistic") + ", step " + fmt(static_cast<double>(h));
  return r;
}

void print_check(const CheckReport& r, std::ostream& out, bool with_items) {
  char line[256];
  auto emit = [&](const CheckReport& c, const char* indent) {
    const char* status = c.skipped ? "SKIP" : (c.passed ? "PASS" : "FAIL");
    std::snprintf(line, sizeof line, "%s%-36s %s  observed=%-12.6g bound=%-12.6g slack=%-10.3g samples=%llu\n",
                  indent, c.name.c_str(), status, c.observed, c.bound, c.slack,
                  static_cast<unsigned long long>(c.samples));
    out << line;
  };
  emit(r, "");
  if (with_items)
    for (const CheckReport& c : r.items) emit(c, "    ");
  std::string key = r.name;
  std::replace(key.begin(), key.end(), ' ', '-');
  out << "check." << key << ".passed=" << (r.skipped ? "skipped" : (r.passed ? "1" : "0")) << '\n';
  out << "check." << key << ".observed=" << fmt(r.observed) << '\n';
  out << "check." << key << ".bound=" << fmt(r.bound) << '\n';
  if (!r.detail.empty()) out << "check." << key << ".detail=" << r.detail << '\n';
}

}  // namespace lsgd
