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
#include "lsgd/pool.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

namespace lsgd {

/// Virtual iterate x = (1/n) sum_i x_i (pairwise, ascending order) and
/// discrepancy V = (1/n) sum_i ||x_i - x||^2.
template <typename Scalar>
std::pair<VectorX<Scalar>, Scalar> virtual_and_discrepancy(const std::vector<VectorX<Scalar>>& xs) {
  VectorX<Scalar> mean = pairwise_mean(xs);
  Scalar v = Scalar(0);
  for (const auto& x : xs) v += (x - mean).squaredNorm();
  return {std::move(mean), v / static_cast<Scalar>(xs.size())};
}

std::pair<Vector, double> virtual_and_discrepancy(const MethodState& state);

/// Weighted ergodic average with weights w_k = (1 - eta)^{-(k+1)}, kept in
/// normalized form: S_k = 1 + (1 - eta) S_{k-1}, xbar <- (1 - 1/S_k) xbar + x^k / S_k.
template <typename Scalar>
class WeightedAverage {
 public:
  explicit WeightedAverage(Scalar eta = Scalar(0)) : eta_(eta) {
    if (!(eta >= Scalar(0) && eta < Scalar(1))) throw Error("eta must lie in [0, 1)");
  }

  template <typename Derived>
  void push(const Eigen::MatrixBase<Derived>& x) {
    if (count_ == 0) {
      s_ = Scalar(1);
      avg_ = x;
    } else {
      s_ = Scalar(1) + (Scalar(1) - eta_) * s_;
      const Scalar rho = Scalar(1) / s_;
      avg_ = (Scalar(1) - rho) * avg_ + rho * x;
    }
    ++count_;
  }

  const VectorX<Scalar>& value() const { return avg_; }
  std::size_t count() const { return count_; }

 private:
  Scalar eta_;
  Scalar s_ = Scalar(0);
  VectorX<Scalar> avg_;
  std::size_t count_ = 0;
};

/// Averages a finite sequence of iterates with weights (1 - eta)^{-(k+1)}.
template <typename Scalar>
VectorX<Scalar> weighted_average(const std::vector<VectorX<Scalar>>& iterates, Scalar eta) {
  WeightedAverage<Scalar> avg(eta);
  for (const auto& x : iterates) avg.push(x);
  return avg.value();
}

struct RunConfig {
  MethodSpec spec;
  double gamma = 0.0;
  std::size_t K = 1;
  double eta_weight = 0.0;
  Vector x0;
  std::uint64_t master_seed = 0;
  std::size_t record_every = 1;
  std::size_t threads = 1;
  /// Stop at the first record whose virtual gap is at or below this value.
  std::optional<double> stop_below;

  void validate(const GlobalProblem& p) const;
};

struct Sample {
  std::size_t k = 0;
  std::size_t comm_rounds = 0;
  std::uint64_t grad_evals = 0;
  double f_gap_virtual = 0.0;
  double f_gap_avg = 0.0;
  double dist_sq = 0.0;
  double V = 0.0;
};

struct Trajectory {
  std::vector<Sample> samples;
  Vector final_x_avg;
  Vector final_x_virtual;
  std::uint64_t total_grad_evals = 0;
  std::size_t iterations = 0;
  std::size_t comm_rounds = 0;
  bool stopped_early = false;
};

struct StepResult {
  bool communicated = false;
  std::uint64_t grad_evals = 0;
};

/// One iteration k: communication coin, directions (fanned out over `pool`),
/// refresh at the pre-step iterates, local steps, and averaging on communication.
StepResult step(const MethodSpec& spec, const GlobalProblem& p, MethodState& state, std::uint64_t k, double gamma,
                std::uint64_t seed, ClientPool* pool = nullptr);

/// Called after every step with (k + 1, state after the step, communicated).
using StepObserver = std::function<void(std::size_t, const MethodState&, bool)>;

/// Executes cfg.K iterations. Throws DivergenceError on non-finite iterates or
/// when the gap exceeds 1e12 times the initial gap.
Trajectory run(const RunConfig& cfg, const GlobalProblem& p, const StepObserver& observer = {});

/// CSV with header `k,comm_rounds,grad_evals,f_gap_virtual,f_gap_avg,dist_sq,V_k`.
void write_csv(const Trajectory& t, std::ostream& out);

/// Formats a double with 17 significant digits.
std::string format_double(double v);

}  // namespace lsgd
