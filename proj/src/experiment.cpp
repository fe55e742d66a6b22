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

#include "lsgd/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace lsgd {

namespace {

const char* const kCsvHeader = "k,comm_rounds,grad_evals,f_gap_virtual,f_gap_avg,dist_sq,V_k";

std::ofstream open_output(const std::string& path) {
  const std::filesystem::path fp(path);
  if (fp.has_parent_path()) std::filesystem::create_directories(fp.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write output file '" + path + "'");
  return out;
}

}  // namespace

PreparedRun prepare_run(const ExperimentConfig& c, const GlobalProblem& p) {
  PreparedRun prep;
  prep.spec = build_spec(c.method, p.m());
  prep.spec.validate(p);
  const Vector x0 = Vector::Zero(static_cast<Eigen::Index>(p.d()));
  const DataModel data = build_data_model(c.theory);
  if (c.theory.enabled || !c.method.gamma) {
    try {
      prep.theory = analyze(prep.spec, p, x0, data, c.method.gamma);
    } catch (const TheoryError& e) {
      prep.theory_error = e.what();
    }
  }
  if (c.method.gamma) {
    prep.gamma = *c.method.gamma;
  } else {
    if (!prep.theory) throw ConfigError("gamma \"theory\" is unavailable: " + prep.theory_error);
    if (!std::isfinite(prep.theory->gamma_max))
      throw ConfigError("gamma \"theory\" is unavailable: no finite stepsize cap");
    prep.gamma = prep.theory->gamma_max;
  }
  return prep;
}

RunConfig make_run_config(const ExperimentConfig& c, const PreparedRun& prep, const GlobalProblem& p,
                          std::uint64_t seed) {
  RunConfig cfg;
  cfg.spec = prep.spec;
  cfg.gamma = prep.gamma;
  cfg.K = c.run.K;
  cfg.eta_weight = c.run.eta_weight;
  cfg.x0 = Vector::Zero(static_cast<Eigen::Index>(p.d()));
  cfg.master_seed = seed;
  cfg.record_every = c.run.record_every;
  cfg.threads = c.run.threads;
  cfg.stop_below = c.run.stop_below;
  return cfg;
}

KeyValues run_metadata(const ExperimentConfig& c, const PreparedRun& prep, const GlobalProblem& p,
                       std::uint64_t seed, const Trajectory& t) {
  KeyValues kv;
  if (prep.theory) {
    kv = to_key_values(*prep.theory, c.theory.epsilon);
  } else {
    kv["theory.error"] = prep.theory_error.empty() ? "disabled" : prep.theory_error;
    kv["L"] = format_double(p.L());
    kv["mu"] = format_double(p.mu());
  }
  kv["problem.kind"] = to_string(p.kind());
  kv["problem.n"] = std::to_string(p.n());
  kv["problem.m"] = std::to_string(p.m());
  kv["problem.d"] = std::to_string(p.d());
  kv["problem.max_Lij"] = format_double(p.max_Lij());
  if (p.optimum()) kv["problem.zeta_star_sq"] = format_double(zeta_star_sq(p));
  kv["method.preset"] = to_string(c.method.preset);
  kv["method.base"] = to_string(c.method.base);
  if (c.method.tau) kv["method.tau"] = std::to_string(*c.method.tau);
  if (c.method.p) kv["method.p"] = format_double(*c.method.p);
  kv["run.gamma"] = format_double(prep.gamma);
  kv["run.seed"] = std::to_string(seed);
  kv["run.K"] = std::to_string(c.run.K);
  kv["run.iterations"] = std::to_string(t.iterations);
  kv["run.comm_rounds"] = std::to_string(t.comm_rounds);
  kv["run.grad_evals"] = std::to_string(t.total_grad_evals);
  kv["run.stopped_early"] = t.stopped_early ? "1" : "0";
  if (!t.samples.empty()) {
    kv["final.f_gap_virtual"] = format_double(t.samples.back().f_gap_virtual);
    kv["final.f_gap_avg"] = format_double(t.samples.back().f_gap_avg);
  }
  return kv;
}

std::vector<RunOutput> run_experiment(const ExperimentConfig& c, const GlobalProblem& p) {
  const PreparedRun prep = prepare_run(c, p);
  std::vector<RunOutput> outs;
  for (std::uint64_t seed : c.run.seeds) {
    RunOutput o;
    o.seed = seed;
    o.trajectory = run(make_run_config(c, prep, p, seed), p);
    o.csv_path = c.run.output + "_seed" + std::to_string(seed) + ".csv";
    o.meta_path = o.csv_path + ".meta";
    std::ofstream csv = open_output(o.csv_path);
    write_csv(o.trajectory, csv);
    std::ofstream meta = open_output(o.meta_path);
    write_key_values(run_metadata(c, prep, p, seed, o.trajectory), meta);
    if (!csv || !meta) throw Error("failed writing '" + o.csv_path + "'");
    outs.push_back(std::move(o));
  }
  return outs;
}

std::vector<SweepCell> sweep_cells(const ExperimentConfig& c) {
  const SweepBlock grid = c.sweep.value_or(SweepBlock{});
  std::vector<std::optional<double>> gammas;
  for (double g : grid.gamma) gammas.emplace_back(g);
  if (gammas.empty()) gammas.push_back(c.method.gamma);
  std::vector<SweepCell> cells;
  auto add = [&](const ExperimentConfig& base) {
    for (const auto& g : gammas) {
      SweepCell cell;
      cell.index = cells.size();
      cell.config = base;
      cell.config.method.gamma = g;
      cell.config.sweep.reset();
      cell.config.run.output = c.run.output + "_cell" + std::to_string(cell.index);
      cells.push_back(std::move(cell));
    }
  };
  if (!grid.tau.empty()) {
    for (std::size_t tau : grid.tau) {
      ExperimentConfig e = c;
      e.method.tau = tau;
      e.method.p.reset();
      add(e);
    }
  } else if (!grid.p.empty()) {
    for (double pr : grid.p) {
      ExperimentConfig e = c;
      e.method.p = pr;
      e.method.tau.reset();
      add(e);
    }
  } else {
    add(c);
  }
  return cells;
}

std::string run_sweep(const ExperimentConfig& c, const GlobalProblem& p) {
  const std::vector<SweepCell> cells = sweep_cells(c);
  std::vector<std::vector<RunOutput>> results(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        ExperimentConfig cell = cells[i].config;
        cell.run.threads = 1;
        results[i] = run_experiment(cell, p);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min(c.run.threads, cells.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  const std::string index_path = c.run.output + "_index.csv";
  std::ofstream index = open_output(index_path);
  index << "cell,gamma,tau,p,seed,final_f_gap_virtual,final_f_gap_avg,csv\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const MethodConfig& m = cells[i].config.method;
    for (const RunOutput& o : results[i]) {
      const Sample& last = o.trajectory.samples.back();
      std::ifstream meta(o.meta_path);
      const KeyValues kv = read_key_values(meta);
      index << i << ',' << kv.at("run.gamma") << ',' << (m.tau ? std::to_string(*m.tau) : "") << ','
            << (m.p ? format_double(*m.p) : "") << ',' << o.seed << ',' << format_double(last.f_gap_virtual) << ','
            << format_double(last.f_gap_avg) << ',' << o.csv_path << '\n';
    }
  }
  if (!index) throw Error("failed writing '" + index_path + "'");
  return index_path;
}

void write_key_values(const KeyValues& kv, std::ostream& out) {
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
}

KeyValues read_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) throw ParseError(no, "expected key=value");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

CsvTable read_trajectory_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  std::size_t no = 0;
  if (!std::getline(in, line)) throw ParseError(1, "empty CSV");
  ++no;
  if (line != kCsvHeader) throw ParseError(no, "unexpected header '" + line + "'");
  std::stringstream hs(line);
  for (std::string cell; std::getline(hs, cell, ',');) t.header.push_back(cell);
  while (std::getline(in, line)) {
    ++no;
    std::vector<double> row;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || *end != '\0') throw ParseError(no, "non-numeric cell '" + cell + "'");
      if (!std::isfinite(v)) throw ParseError(no, "non-finite cell '" + cell + "'");
      row.push_back(v);
    }
    if (!line.empty() && line.back() == ',') throw ParseError(no, "trailing comma");
    if (row.size() != t.header.size())
      throw ParseError(no, "expected " + std::to_string(t.header.size()) + " columns, got " + std::to_string(row.size()));
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace lsgd
