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

#include "lsgd/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace lsgd {

namespace {

using Json = nlohmann::json;

/// Reads one JSON object and rejects keys that were never asked for.
class Block {
 public:
  Block(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  /// True when the key is present and not null (null means "use the default").
  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const Json& at(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(where(key) + ": missing required key");
    return j_.at(key);
  }

  std::string where(const std::string& key) const { return path_ + "." + key; }

  double number(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_number()) throw ConfigError(where(key) + ": expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(where(key) + ": must be finite");
    return x;
  }
  std::uint64_t unsigned_int(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_number_unsigned()) throw ConfigError(where(key) + ": expected a non-negative integer");
    return v.get<std::uint64_t>();
  }
  std::string text(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_string()) throw ConfigError(where(key) + ": expected a string");
    return v.get<std::string>();
  }
  bool boolean(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_boolean()) throw ConfigError(where(key) + ": expected true or false");
    return v.get<bool>();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(where(it.key()) + ": unknown key");
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class T, class Get>
std::vector<T> list(Block& b, const std::string& key, Get get_elem) {
  const Json& v = b.at(key);
  if (!v.is_array()) throw ConfigError(b.where(key) + ": expected an array");
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(get_elem(v[i], b.where(key) + "[" + std::to_string(i) + "]"));
  return out;
}

double elem_number(const Json& v, const std::string& where) {
  if (!v.is_number() || !std::isfinite(v.get<double>())) throw ConfigError(where + ": expected a finite number");
  return v.get<double>();
}
std::uint64_t elem_unsigned(const Json& v, const std::string& where) {
  if (!v.is_number_unsigned()) throw ConfigError(where + ": expected a non-negative integer");
  return v.get<std::uint64_t>();
}

ProblemKind kind_from_string(const std::string& s, const std::string& where) {
  if (s == "quadratic") return ProblemKind::Quadratic;
  if (s == "logistic") return ProblemKind::Logistic;
  throw ConfigError(where + ": kind must be 'quadratic' or 'logistic'");
}

ProblemConfig parse_problem(const Json& j) {
  Block b(j, "problem");
  ProblemConfig c;
  c.kind = kind_from_string(b.text("kind"), b.where("kind"));
  c.n = b.unsigned_int("n");
  if (c.n < 1) throw ConfigError("problem.n: must be >= 1");
  c.mu = b.number("mu");
  if (c.kind == ProblemKind::Quadratic) {
    if (b.has("instance")) {
      const std::uint64_t t = b.unsigned_int("instance");
      if (t > 3) throw ConfigError("problem.instance: must lie in 0..3");
      c.instance = static_cast<int>(t);
    } else {
      c.m = b.unsigned_int("m");
    }
    c.d = b.unsigned_int("d");
    if (b.has("seed")) c.seed = b.unsigned_int("seed");
  } else {
    c.dataset = b.text("dataset");
    if (b.has("partition")) c.partition = partition_from_string(b.text("partition"));
    if (b.has("partition_seed")) c.partition_seed = b.unsigned_int("partition_seed");
    if (b.has("normalize")) c.normalize = b.boolean("normalize");
  }
  b.finish();
  return c;
}

MethodConfig parse_method(const Json& j) {
  Block b(j, "method");
  MethodConfig c;
  c.preset = preset_from_string(b.text("preset"));
  if (b.has("gamma")) {
    const Json& g = b.at("gamma");
    if (g.is_string()) {
      if (g.get<std::string>() != "theory") throw ConfigError("method.gamma: expected a number or \"theory\"");
    } else {
      c.gamma = b.number("gamma");
      if (!(*c.gamma > 0.0)) throw ConfigError("method.gamma: must be > 0");
    }
  }
  const bool has_tau = b.has("tau"), has_p = b.has("p");
  if (has_tau && has_p) throw ConfigError("method: give exactly one of 'tau' and 'p', not both");
  if (!has_tau && !has_p) throw ConfigError("method: one of 'tau' or 'p' is required");
  if (has_tau) {
    c.tau = b.unsigned_int("tau");
    if (*c.tau < 1) throw ConfigError("method.tau: must be >= 1");
  } else {
    c.p = b.number("p");
    if (!(*c.p > 0.0 && *c.p <= 1.0)) throw ConfigError("method.p: must lie in (0, 1]");
  }
  if (b.has("q")) c.q = b.number("q");
  if (b.has("r")) c.r = b.unsigned_int("r");
  if (b.has("base")) c.base = base_from_string(b.text("base"));
  if (b.has("noise_variance")) c.noise_variance = b.number("noise_variance");
  if (c.noise_variance < 0.0) throw ConfigError("method.noise_variance: must be >= 0");
  if (b.has("coupled")) c.coupled = b.boolean("coupled");
  b.finish();
  return c;
}

RunBlock parse_run(const Json& j) {
  Block b(j, "run");
  RunBlock c;
  c.K = b.unsigned_int("K");
  if (c.K < 1) throw ConfigError("run.K: must be >= 1");
  if (b.has("seeds")) {
    c.seeds = list<std::uint64_t>(b, "seeds", elem_unsigned);
    if (c.seeds.empty()) throw ConfigError("run.seeds: must not be empty");
  }
  if (b.has("record_every")) c.record_every = b.unsigned_int("record_every");
  if (c.record_every < 1) throw ConfigError("run.record_every: must be >= 1");
  if (b.has("output")) c.output = b.text("output");
  if (b.has("eta_weight")) c.eta_weight = b.number("eta_weight");
  if (!(c.eta_weight >= 0.0 && c.eta_weight < 1.0)) throw ConfigError("run.eta_weight: must lie in [0, 1)");
  if (b.has("threads")) c.threads = b.unsigned_int("threads");
  if (c.threads < 1) throw ConfigError("run.threads: must be >= 1");
  if (b.has("stop_below")) c.stop_below = b.number("stop_below");
  b.finish();
  return c;
}

TheoryBlock parse_theory(const Json& j) {
  Block b(j, "theory");
  TheoryBlock c;
  if (b.has("enabled")) c.enabled = b.boolean("enabled");
  if (b.has("epsilon")) c.epsilon = b.number("epsilon");
  if (!(c.epsilon > 0.0)) throw ConfigError("theory.epsilon: must be > 0");
  if (b.has("zeta_sq")) c.zeta_sq = b.number("zeta_sq");
  if (c.zeta_sq && *c.zeta_sq < 0.0) throw ConfigError("theory.zeta_sq: must be >= 0");
  b.finish();
  return c;
}

SweepBlock parse_sweep(const Json& j) {
  Block b(j, "sweep");
  SweepBlock c;
  if (b.has("gamma")) c.gamma = list<double>(b, "gamma", elem_number);
  if (b.has("tau")) c.tau = list<std::size_t>(b, "tau", elem_unsigned);
  if (b.has("p")) c.p = list<double>(b, "p", elem_number);
  b.finish();
  if (!c.tau.empty() && !c.p.empty()) throw ConfigError("sweep: give at most one of 'tau' and 'p'");
  for (double g : c.gamma)
    if (!(g > 0.0)) throw ConfigError("sweep.gamma: entries must be > 0");
  for (std::size_t t : c.tau)
    if (t < 1) throw ConfigError("sweep.tau: entries must be >= 1");
  for (double p : c.p)
    if (!(p > 0.0 && p <= 1.0)) throw ConfigError("sweep.p: entries must lie in (0, 1]");
  return c;
}

/// 1-based line and column of a byte offset.
std::pair<std::size_t, std::size_t> locate(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

EstimatorType base_from_string(const std::string& name) {
  for (EstimatorType t : {EstimatorType::FullGradient, EstimatorType::UniformSample, EstimatorType::NoisyGradient})
    if (to_string(t) == name) return t;
  throw ConfigError("unknown base estimator '" + name + "' (expected full, uniform or noisy)");
}

PartitionMode partition_from_string(const std::string& name) {
  if (name == "random") return PartitionMode::Random;
  if (name == "label-sorted") return PartitionMode::LabelSorted;
  throw ConfigError("unknown partition mode '" + name + "' (expected random or label-sorted)");
}

std::string to_string(PartitionMode mode) { return mode == PartitionMode::Random ? "random" : "label-sorted"; }

ExperimentConfig parse_config(std::string_view json_text) {
  Json j;
  try {
    j = Json::parse(json_text.begin(), json_text.end());
  } catch (const Json::parse_error& e) {
    const auto [line, col] = locate(json_text, e.byte > 0 ? e.byte - 1 : 0);
    throw ParseError(line, "column " + std::to_string(col) + ": invalid JSON");
  }
  Block b(j, "config");
  ExperimentConfig c;
  c.problem = parse_problem(b.at("problem"));
  c.method = parse_method(b.at("method"));
  c.run = parse_run(b.at("run"));
  if (b.has("theory")) c.theory = parse_theory(b.at("theory"));
  if (b.has("sweep")) c.sweep = parse_sweep(b.at("sweep"));
  b.finish();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  Json j;
  Json& p = j["problem"];
  p["kind"] = to_string(c.problem.kind);
  p["n"] = c.problem.n;
  p["mu"] = c.problem.mu;
  if (c.problem.kind == ProblemKind::Quadratic) {
    if (c.problem.instance)
      p["instance"] = *c.problem.instance;
    else
      p["m"] = c.problem.m;
    p["d"] = c.problem.d;
    p["seed"] = c.problem.seed;
  } else {
    p["dataset"] = c.problem.dataset;
    p["partition"] = to_string(c.problem.partition);
    p["partition_seed"] = c.problem.partition_seed;
    p["normalize"] = c.problem.normalize;
  }
  Json& m = j["method"];
  m["preset"] = to_string(c.method.preset);
  if (c.method.gamma)
    m["gamma"] = *c.method.gamma;
  else
    m["gamma"] = "theory";
  if (c.method.tau) m["tau"] = *c.method.tau;
  if (c.method.p) m["p"] = *c.method.p;
  if (c.method.q) m["q"] = *c.method.q;
  if (c.method.r) m["r"] = *c.method.r;
  m["base"] = to_string(c.method.base);
  m["noise_variance"] = c.method.noise_variance;
  if (c.method.coupled) m["coupled"] = *c.method.coupled;
  Json& r = j["run"];
  r["K"] = c.run.K;
  r["seeds"] = c.run.seeds;
  r["record_every"] = c.run.record_every;
  r["output"] = c.run.output;
  r["eta_weight"] = c.run.eta_weight;
  r["threads"] = c.run.threads;
  if (c.run.stop_below) r["stop_below"] = *c.run.stop_below;
  Json& t = j["theory"];
  t["enabled"] = c.theory.enabled;
  t["epsilon"] = c.theory.epsilon;
  if (c.theory.zeta_sq) t["zeta_sq"] = *c.theory.zeta_sq;
  if (c.sweep) {
    Json& s = j["sweep"];
    s = Json::object();
    if (!c.sweep->gamma.empty()) s["gamma"] = c.sweep->gamma;
    if (!c.sweep->tau.empty()) s["tau"] = c.sweep->tau;
    if (!c.sweep->p.empty()) s["p"] = c.sweep->p;
  }
  return j.dump(2) + "\n";
}

ProblemConfig parse_quadratic_flag(const std::string& text) {
  ProblemConfig c;
  c.kind = ProblemKind::Quadratic;
  c.mu = 1e-3;
  bool has_m = false, has_d = false, has_n = false;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("--quadratic: expected key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
    try {
      std::size_t used = 0;
      if (key == "n") {
        c.n = std::stoul(value, &used);
        has_n = true;
      } else if (key == "m") {
        c.m = std::stoul(value, &used);
        has_m = true;
      } else if (key == "d") {
        c.d = std::stoul(value, &used);
        has_d = true;
      } else if (key == "mu") {
        c.mu = std::stod(value, &used);
      } else if (key == "seed") {
        c.seed = std::stoull(value, &used);
      } else if (key == "instance") {
        c.instance = std::stoi(value, &used);
      } else {
        throw ConfigError("--quadratic: unknown key '" + key + "'");
      }
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::logic_error&) {
      throw ConfigError("--quadratic: bad value for '" + key + "': '" + value + "'");
    }
  }
  if (!has_n || !has_d || (!has_m && !c.instance)) throw ConfigError("--quadratic: n, d and m (or instance) are required");
  return c;
}

GlobalProblem build_problem(const ProblemConfig& c) {
  if (c.kind == ProblemKind::Quadratic) {
    QuadraticSpec q;
    if (c.instance) {
      q = quadratic_instance(*c.instance, c.n, c.d, c.mu, c.seed);
    } else {
      q.n = c.n;
      q.m = c.m;
      q.d = c.d;
      q.mu = c.mu;
      q.seed = c.seed;
    }
    return make_quadratic(q);
  }
  if (!std::filesystem::exists(c.dataset)) throw ConfigError("dataset file not found: '" + c.dataset + "'");
  const Dataset ds = load_libsvm(c.dataset);
  return make_logistic(ds, partition(ds, c.n, c.partition, c.partition_seed), c.mu, c.normalize);
}

MethodSpec build_spec(const MethodConfig& c, std::size_t m) {
  PresetOptions o;
  o.loop = c.tau ? LoopKind::fixed(*c.tau) : LoopKind::bernoulli(c.p.value_or(1.0));
  o.q = c.q;
  o.r = c.r;
  o.base = c.base;
  o.noise_variance = c.noise_variance;
  o.coupled = c.coupled;
  MethodSpec spec = make_preset(c.preset, o, m);
  spec.validate();
  return spec;
}

DataModel build_data_model(const TheoryBlock& t) {
  return t.zeta_sq ? DataModel::zeta(*t.zeta_sq) : DataModel::heterogeneous();
}

}  // namespace lsgd
