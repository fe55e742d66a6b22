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

#include "lsgd/data.hpp"

#include "lsgd/rng.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace lsgd {

// ---------------------------------------------------------------------------
// LibSVM text

namespace {

bool parse_real(std::string_view tok, double& out) {
  if (tok.empty()) return false;
  const std::string s(tok);
  char* end = nullptr;
  errno = 0;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && errno != ERANGE && std::isfinite(out);
}

bool parse_index(std::string_view tok, std::size_t& out) {
  if (tok.empty()) return false;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

}  // namespace

Dataset parse_libsvm(std::istream& in) {
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> raw_labels;
  while (std::getline(in, line)) {
    ++lineno;
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    double raw_label = 0.0;
    if (!parse_real(toks[0], raw_label))
      throw ParseError(lineno, "non-numeric label '" + std::string(toks[0]) + "'");
    Row row;
    row.label = raw_label > 0.0 ? 1 : -1;
    raw_labels.push_back(raw_label);
    std::size_t prev = 0;
    for (std::size_t t = 1; t < toks.size(); ++t) {
      const auto colon = toks[t].find(':');
      if (colon == std::string_view::npos)
        throw ParseError(lineno, "expected idx:val, got '" + std::string(toks[t]) + "'");
      Feature f;
      if (!parse_index(toks[t].substr(0, colon), f.index))
        throw ParseError(lineno, "non-numeric index in '" + std::string(toks[t]) + "'");
      if (f.index < 1) throw ParseError(lineno, "feature index must be >= 1");
      if (f.index <= prev) throw ParseError(lineno, "feature indices must be strictly increasing");
      if (!parse_real(toks[t].substr(colon + 1), f.value))
        throw ParseError(lineno, "non-numeric value in '" + std::string(toks[t]) + "'");
      prev = f.index;
      ds.dim = std::max(ds.dim, f.index);
      row.features.push_back(f);
    }
    ds.rows.push_back(std::move(row));
  }
  if (ds.rows.empty()) throw ParseError(std::max<std::size_t>(lineno, 1), "empty dataset");
  // Two-class files with positive class codes (e.g. 1/2) would collapse to a
  // single class under the sign rule; the smaller code becomes -1 instead.
  const auto [lo, hi] = std::minmax_element(raw_labels.begin(), raw_labels.end());
  const bool two_positive_codes =
      *lo > 0.0 && *lo != *hi &&
      std::all_of(raw_labels.begin(), raw_labels.end(), [&](double v) { return v == *lo || v == *hi; });
  if (two_positive_codes)
    for (std::size_t r = 0; r < ds.rows.size(); ++r) ds.rows[r].label = raw_labels[r] == *lo ? -1 : 1;
  return ds;
}

Dataset parse_libsvm_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_libsvm(in);
}

Dataset load_libsvm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file '" + path + "'");
  return parse_libsvm(in);
}

std::string serialize_libsvm(const Dataset& ds) {
  std::string out;
  char buf[64];
  for (const Row& r : ds.rows) {
    out += r.label > 0 ? "+1" : "-1";
    for (const Feature& f : r.features) {
      std::snprintf(buf, sizeof buf, " %zu:%.17g", f.index, f.value);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Partitioning

Partition partition(const Dataset& ds, std::size_t n, PartitionMode mode, std::uint64_t seed) {
  if (n < 1) throw ConfigError("partition: n must be >= 1");
  if (ds.count() < n)
    throw ConfigError("partition: n=" + std::to_string(n) + " exceeds row count " + std::to_string(ds.count()));
  std::vector<std::size_t> order(ds.count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (mode == PartitionMode::Random) {
    CounterEngine gen(seed, Stream::Partition);
    std::shuffle(order.begin(), order.end(), gen);
  } else {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return ds.rows[a].label < ds.rows[b].label; });
  }
  Partition p;
  p.n = n;
  p.m = ds.count() / n;
  p.shards.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    p.shards[i].assign(order.begin() + static_cast<std::ptrdiff_t>(i * p.m),
                       order.begin() + static_cast<std::ptrdiff_t>((i + 1) * p.m));
  return p;
}

// ---------------------------------------------------------------------------
// Synthetic quadratics

QuadraticSpec quadratic_instance(int type, std::size_t n, std::size_t d, double mu, std::uint64_t seed) {
  if (type < 0 || type > 3) throw ConfigError("quadratic instance type must be 0..3");
  QuadraticSpec s;
  s.n = n;
  s.d = d;
  s.mu = mu;
  s.m = (type % 2 == 0) ? 1 : 10;
  s.seed = mix64(seed ^ (0x5479706500000000ULL + static_cast<std::uint64_t>(type)));
  return s;
}

namespace {

/// d x m matrix with orthonormal columns from modified Gram-Schmidt (applied
/// twice) on Gaussian draws; degenerate columns are redrawn.
Matrix orthonormal_columns(std::size_t d, std::size_t m, CounterEngine& gen) {
  std::normal_distribution<double> normal;
  Matrix a(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(m));
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    bool ok = false;
    for (int attempt = 0; attempt < 16 && !ok; ++attempt) {
      Vector v(a.rows());
      for (Eigen::Index r = 0; r < v.size(); ++r) v(r) = normal(gen);
      const double initial = v.norm();
      for (int pass = 0; pass < 2; ++pass)
        for (Eigen::Index k = 0; k < j; ++k) v -= a.col(k).dot(v) * a.col(k);
      const double nv = v.norm();
      if (nv > 1e-8 * initial) {
        a.col(j) = v / nv;
        ok = true;
      }
    }
    if (!ok) throw Error("orthogonalization failed: rank-deficient draws after retries");
  }
  return a;
}

}  // namespace

GlobalProblem make_quadratic(const QuadraticSpec& spec) {
  if (spec.n < 1 || spec.m < 1 || spec.d < 1) throw ConfigError("quadratic: n, m, d must be >= 1");
  if (spec.m > spec.d) throw ConfigError("quadratic: m must not exceed d");
  if (!(spec.mu >= 0.0 && spec.mu <= 1.0)) throw ConfigError("quadratic: mu must lie in [0, 1]");
  std::vector<std::shared_ptr<const LocalObjective>> locals;
  locals.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    // Fresh distribution per client: normal_distribution caches a spare draw.
    CounterEngine gen(spec.seed, Stream::Generator, i);
    std::normal_distribution<double> normal;
    Vector z(static_cast<Eigen::Index>(spec.d));
    for (Eigen::Index r = 0; r < z.size(); ++r) z(r) = normal(gen);
    Matrix a = orthonormal_columns(spec.d, spec.m, gen);
    locals.push_back(std::make_shared<QuadraticLocal>(std::move(a), std::move(z), spec.mu));
  }
  const double max_lij = spec.mu + (1.0 - spec.mu) * static_cast<double>(spec.m);
  GlobalProblem p(ProblemKind::Quadratic, std::move(locals), spec.mu, 1.0, max_lij);
  attach_optimum(p);
  return p;
}

// ---------------------------------------------------------------------------
// Logistic regression

GlobalProblem make_logistic(const Dataset& ds, const Partition& part, double mu, bool normalize) {
  if (part.n < 1 || part.m < 1) throw ConfigError("logistic: empty partition");
  if (mu < 0.0) throw ConfigError("logistic: mu must be >= 0");
  const auto d = static_cast<Eigen::Index>(ds.dim);
  std::vector<std::shared_ptr<const LocalObjective>> locals;
  double max_lij = 0.0;
  for (const auto& shard : part.shards) {
    std::vector<Eigen::Triplet<double>> trips;
    Vector labels(static_cast<Eigen::Index>(shard.size()));
    for (std::size_t r = 0; r < shard.size(); ++r) {
      const Row& row = ds.rows.at(shard[r]);
      double scale = 1.0;
      if (normalize) {
        double sq = 0.0;
        for (const Feature& f : row.features) sq += f.value * f.value;
        if (sq > 0.0) scale = 2.0 / std::sqrt(sq);
      }
      for (const Feature& f : row.features)
        if (f.value != 0.0)
          trips.emplace_back(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f.index - 1),
                             f.value * scale);
      labels(static_cast<Eigen::Index>(r)) = row.label;
    }
    LogisticLocal::SparseRows a(static_cast<Eigen::Index>(shard.size()), d);
    a.setFromTriplets(trips.begin(), trips.end());
    auto local = std::make_shared<LogisticLocal>(std::move(a), std::move(labels), mu);
    for (std::size_t j = 0; j < local->components(); ++j)
      max_lij = std::max(max_lij, local->component_smoothness(j));
    locals.push_back(std::move(local));
  }
  // Provisional L = maxLij; refined by power iteration below.
  GlobalProblem provisional(ProblemKind::Logistic, locals, mu, std::max(mu, max_lij), std::max(mu, max_lij));
  const SmoothnessConstants sc = smoothness_constants(provisional);
  GlobalProblem p(ProblemKind::Logistic, std::move(locals), mu, std::min(sc.L, max_lij), std::max(mu, max_lij));
  if (mu > 0.0) {
    OptimumResult opt = exact_optimum(p);
    if (opt.optimum) p.set_optimum(std::move(*opt.optimum));
  }
  return p;
}

Dataset synthetic_classification(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  if (rows < 1 || dim < 1) throw ConfigError("synthetic_classification: rows and dim must be >= 1");
  CounterEngine gen(seed, Stream::Generator, 0xC1A55ULL);
  std::normal_distribution<double> normal;
  Vector w(static_cast<Eigen::Index>(dim));
  for (Eigen::Index k = 0; k < w.size(); ++k) w(k) = normal(gen);
  Dataset ds;
  ds.dim = dim;
  for (std::size_t r = 0; r < rows; ++r) {
    Row row;
    double t = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double v = normal(gen);
      row.features.push_back({k + 1, v});
      t += v * w(static_cast<Eigen::Index>(k));
    }
    // Labels follow the sign of a noisy linear score, so the data are not separable.
    row.label = (t + 0.5 * std::sqrt(static_cast<double>(dim)) * normal(gen) > 0.0) ? 1 : -1;
    ds.rows.push_back(std::move(row));
  }
  return ds;
}

}  // namespace lsgd
