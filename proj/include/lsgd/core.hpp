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

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lsgd {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vector = VectorX<double>;
using Matrix = MatrixX<double>;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user configuration (CLI exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Non-finite iterate or exploding gap (CLI exit code 2).
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t k, const std::string& what)
      : Error("diverged at k=" + std::to_string(k) + ": " + what), k_(k) {}
  std::size_t iteration() const noexcept { return k_; }

 private:
  std::size_t k_;
};

/// The parameter algebra does not cover the requested configuration.
class TheoryError : public Error {
 public:
  using Error::Error;
};

/// Sum of vectors in fixed ascending order using pairwise (cascade) summation.
template <typename Scalar>
VectorX<Scalar> pairwise_sum(const std::vector<VectorX<Scalar>>& xs, std::size_t begin,
                             std::size_t end) {
  if (end - begin == 1) return xs[begin];
  const std::size_t mid = begin + (end - begin) / 2;
  return pairwise_sum(xs, begin, mid) + pairwise_sum(xs, mid, end);
}

/// Arithmetic mean of a non-empty set of equally sized vectors.
template <typename Scalar>
VectorX<Scalar> pairwise_mean(const std::vector<VectorX<Scalar>>& xs) {
  if (xs.empty()) throw Error("pairwise_mean of an empty set");
  return pairwise_sum(xs, 0, xs.size()) / static_cast<Scalar>(xs.size());
}

}  // namespace lsgd
