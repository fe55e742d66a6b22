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

#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace lsgd {

/// One stored feature; `index` is 1-based as in the LibSVM text format.
struct Feature {
  std::size_t index = 0;
  double value = 0.0;
  bool operator==(const Feature&) const = default;
};

struct Row {
  int label = 1;  // exactly +1 or -1
  std::vector<Feature> features;
  bool operator==(const Row&) const = default;
};

struct Dataset {
  std::vector<Row> rows;
  std::size_t dim = 0;  // largest feature index
  std::size_t count() const { return rows.size(); }
  bool operator==(const Dataset&) const = default;
};

/// Parses LibSVM text. Labels map to +1 if positive and -1 otherwise, except
/// that a file using exactly two positive class codes (such as 1/2) maps the
/// smaller code to -1.
Dataset parse_libsvm(std::istream& in);
Dataset parse_libsvm_text(std::string_view text);
/// Reads a LibSVM file; throws ConfigError naming the path when it cannot be opened.
Dataset load_libsvm(const std::string& path);
/// Emits LibSVM text with 17 significant digits so that parsing round-trips exactly.
std::string serialize_libsvm(const Dataset& ds);

enum class PartitionMode { Random, LabelSorted };

struct Partition {
  std::vector<std::vector<std::size_t>> shards;
  std::size_t n = 0;
  std::size_t m = 0;
};

/// Splits rows into n shards of m = floor(count / n) rows; the tail is dropped.
Partition partition(const Dataset& ds, std::size_t n, PartitionMode mode, std::uint64_t seed = 0);

struct QuadraticSpec {
  std::size_t n = 1;
  std::size_t m = 1;
  std::size_t d = 1;
  double mu = 1e-3;
  std::uint64_t seed = 0;
};

/// Instance types 0..3 of the synthetic benchmark: types 0 and 2 use m = 1,
/// types 1 and 3 use m = 10. The type index only perturbs the seed.
QuadraticSpec quadratic_instance(int type, std::size_t n, std::size_t d, double mu, std::uint64_t seed);

/// Heterogeneous quadratics with orthonormal directions; the exact optimum is attached.
GlobalProblem make_quadratic(const QuadraticSpec& spec);

/// Regularized logistic regression over partitioned rows. With `normalize`,
/// every nonzero row is scaled to Euclidean norm 2. The optimum is attached
/// when it can be certified.
GlobalProblem make_logistic(const Dataset& ds, const Partition& part, double mu, bool normalize = true);

/// Small synthetic binary classification set (Gaussian features, noisy linear labels).
Dataset synthetic_classification(std::size_t rows, std::size_t dim, std::uint64_t seed);

}  // namespace lsgd
