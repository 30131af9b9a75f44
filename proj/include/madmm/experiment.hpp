// Copyright 2026 The madmm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "madmm/admm.hpp"
#include "madmm/error.hpp"
#include "madmm/fem.hpp"
#include "madmm/problems.hpp"

namespace madmm {

inline constexpr const char* kRecordSchema = "madmm.records/1";

struct ExperimentConfig {
  std::string problem = "example2";
  std::vector<Algorithm> algorithms{Algorithm::kMadmm};
  std::vector<std::size_t> levels{4, 5, 6};
  SolverConfig solver;
  /// 0 picks a default: finest level + 2 for example2, finest + 3 for example1.
  std::size_t reference_level = 0;
  std::string output_dir = "results";
  std::size_t threads = 1;

  void validate() const {
    if (problem != "example1" && problem != "example2") {
      throw Error(ErrorCode::kInvalidArgument, "unknown problem '" + problem + "'");
    }
    if (algorithms.empty()) throw Error(ErrorCode::kInvalidArgument, "no algorithm selected");
    if (levels.empty()) throw Error(ErrorCode::kInvalidArgument, "no levels selected");
    for (std::size_t i = 1; i < levels.size(); ++i) {
      if (levels[i] <= levels[i - 1]) throw Error(ErrorCode::kInvalidArgument, "levels must be strictly increasing");
    }
    if (reference_level != 0 && reference_level <= levels.back()) {
      throw Error(ErrorCode::kInvalidArgument, "reference level must be finer than every solved level");
    }
    if (threads == 0) throw Error(ErrorCode::kInvalidArgument, "threads must be positive");
    solver.validate();
  }

  std::size_t resolved_reference_level() const {
    if (reference_level != 0) return reference_level;
    return levels.back() + (problem == "example2" ? 2 : 3);
  }
};

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// "4..6" or "4,5,6" or "5".
inline std::vector<std::size_t> parse_levels(const std::string& text) {
  auto to_level = [&](const std::string& raw) -> std::size_t {
    const std::string s = detail::trim(raw);
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      throw Error(ErrorCode::kInvalidArgument, "bad level '" + raw + "' in '" + text + "'");
    }
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(s, &pos);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument, "bad level '" + s + "' in '" + text + "'");
    }
    if (pos != s.size()) throw Error(ErrorCode::kInvalidArgument, "bad level '" + s + "' in '" + text + "'");
    return v;
  };
  std::vector<std::size_t> out;
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const std::size_t a = to_level(text.substr(0, dots));
    const std::size_t b = to_level(text.substr(dots + 2));
    if (b < a) throw Error(ErrorCode::kInvalidArgument, "empty level range '" + text + "'");
    for (std::size_t l = a; l <= b; ++l) out.push_back(l);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_level(item));
  if (out.empty()) throw Error(ErrorCode::kInvalidArgument, "no levels in '" + text + "'");
  return out;
}

inline std::vector<Algorithm> parse_algorithms(const std::string& text) {
  std::vector<Algorithm> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = detail::trim(item);
    if (!item.empty()) out.push_back(parse_algorithm(item));
  }
  return out;
}

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty()) throw Error(ErrorCode::kInvalidArgument, "key '" + key + "': bad number '" + v + "'");
  return d;
}

inline std::size_t to_count(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d < 0.0 || d != std::floor(d)) throw Error(ErrorCode::kInvalidArgument, "key '" + key + "': expected a count");
  return static_cast<std::size_t>(d);
}

}  // namespace detail

/// Applies one key=value setting. Unknown keys are rejected.
inline void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  using detail::to_count;
  using detail::to_double;
  if (key == "problem") {
    cfg.problem = value;
  } else if (key == "algorithm" || key == "algorithms") {
    cfg.algorithms = parse_algorithms(value);
  } else if (key == "levels") {
    cfg.levels = parse_levels(value);
  } else if (key == "sigma") {
    cfg.solver.sigma = to_double(key, value);
  } else if (key == "tau") {
    cfg.solver.tau = to_double(key, value);
  } else if (key == "eta_tol") {
    cfg.solver.eta_tol = to_double(key, value);
  } else if (key == "max_iter") {
    cfg.solver.max_iter = to_count(key, value);
  } else if (key == "xi_scale") {
    cfg.solver.xi.scale = to_double(key, value);
  } else if (key == "xi_power") {
    cfg.solver.xi.power = to_double(key, value);
  } else if (key == "start_level") {
    cfg.solver.start_level = to_count(key, value);
  } else if (key == "residual_norm") {
    if (value == "l2") {
      cfg.solver.residual_norm = ResidualNorm::kL2;
    } else if (value == "euclidean") {
      cfg.solver.residual_norm = ResidualNorm::kEuclidean;
    } else {
      throw Error(ErrorCode::kInvalidArgument, "residual_norm must be l2 or euclidean");
    }
  } else if (key == "eta5") {
    if (value == "plain") {
      cfg.solver.eta5_variant = Eta5Variant::kPlain;
    } else if (value == "mass") {
      cfg.solver.eta5_variant = Eta5Variant::kMassWeighted;
    } else {
      throw Error(ErrorCode::kInvalidArgument, "eta5 must be plain or mass");
    }
  } else if (key == "reference_level") {
    cfg.reference_level = to_count(key, value);
  } else if (key == "output_dir") {
    cfg.output_dir = value;
  } else if (key == "threads") {
    cfg.threads = to_count(key, value);
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown config key '" + key + "'");
  }
}

/// Flat `key = value` lines; `#` starts a comment.
inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kInvalidArgument, "config line " + std::to_string(lineno) + ": expected key = value");
    }
    apply_setting(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path.string());
  return parse_config(in);
}

/// MADMM_THREADS, if set and positive.
inline std::optional<std::size_t> threads_from_env() {
  const char* v = std::getenv("MADMM_THREADS");
  if (v == nullptr || *v == '\0') return std::nullopt;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n <= 0) throw Error(ErrorCode::kInvalidArgument, "MADMM_THREADS must be a positive integer");
  return static_cast<std::size_t>(n);
}

// ---------------------------------------------------------------------------
// EOC table
// ---------------------------------------------------------------------------

/// (log E₁ − log E₂) / (log h₁ − log h₂)
inline double compute_eoc(double e1, double e2, double h1, double h2) {
  if (!(e1 > 0.0) || !(e2 > 0.0) || !(h1 > 0.0) || !(h2 > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "EOC needs positive errors and mesh sizes");
  }
  if (h1 == h2) throw Error(ErrorCode::kInvalidArgument, "EOC needs distinct mesh sizes");
  return (std::log(e1) - std::log(e2)) / (std::log(h1) - std::log(h2));
}

/// One solved (algorithm, level) cell.
struct CellResult {
  Algorithm algorithm = Algorithm::kMadmm;
  std::size_t level = 0;
  double h = 0.0;
  std::optional<double> error;  // E against exact control or reference
  RunRecord record;
  std::string failure;  // non-empty when the solve threw
};

struct EocRow {
  Algorithm algorithm = Algorithm::kMadmm;
  std::size_t level = 0;
  double h = 0.0;
  std::size_t state_dofs = 0;
  std::size_t control_dofs = 0;
  std::optional<double> error;
  std::optional<double> eoc;
  double eta = 0.0;
  std::size_t iterations = 0;
  std::string termination;
  double wall_time = 0.0;
};

struct EocTable {
  std::string problem;
  std::vector<EocRow> rows;
};

/// Rows ordered by (algorithm, level); EOC from the previous row of the same
/// algorithm when both errors are known.
inline EocTable build_eoc_table(const std::string& problem, std::vector<CellResult> cells) {
  std::stable_sort(cells.begin(), cells.end(), [](const CellResult& a, const CellResult& b) {
    if (a.algorithm != b.algorithm) return static_cast<int>(a.algorithm) < static_cast<int>(b.algorithm);
    return a.level < b.level;
  });
  EocTable t;
  t.problem = problem;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const CellResult& c = cells[i];
    EocRow row;
    row.algorithm = c.algorithm;
    row.level = c.level;
    row.h = c.h;
    row.error = c.error;
    if (!c.record.rows.empty()) {
      row.state_dofs = c.record.rows.back().state_dofs;
      row.control_dofs = c.record.rows.back().control_dofs;
    }
    row.eta = c.record.final_eta();
    row.iterations = c.record.iterations();
    row.termination = c.failure.empty() ? to_string(c.record.termination) : "failure";
    row.wall_time = c.record.wall_time;
    if (i > 0 && cells[i - 1].algorithm == c.algorithm && c.error && cells[i - 1].error && *c.error > 0.0 &&
        *cells[i - 1].error > 0.0 && cells[i - 1].h != c.h) {
      row.eoc = compute_eoc(*cells[i - 1].error, *c.error, cells[i - 1].h, c.h);
    }
    t.rows.push_back(row);
  }
  return t;
}

struct ExperimentResult {
  EocTable table;
  std::vector<CellResult> cells;  // ordered by (algorithm, level)

  bool all_converged() const {
    return std::all_of(cells.begin(), cells.end(),
                       [](const CellResult& c) { return c.failure.empty() && c.record.converged(); });
  }
};

inline ProblemSpec make_problem(const ExperimentConfig& cfg) {
  if (cfg.problem == "example1") return example1();
  if (cfg.problem == "example2") return example2(cfg.resolved_reference_level());
  throw Error(ErrorCode::kInvalidArgument, "unknown problem '" + cfg.problem + "'");
}

/// Solves every (algorithm, level) cell, measures E, and tabulates. Cells run
/// on `threads` workers; results are ordered by (algorithm, level).
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const ProblemSpec problem = make_problem(cfg);
  const bool needs_reference = !problem.exact_control.has_value();
  const std::size_t finest = needs_reference ? cfg.resolved_reference_level() : cfg.levels.back();
  const Discretization disc = discretize(problem, hierarchy_for(problem, finest));

  std::shared_ptr<const Vector> reference;
  if (needs_reference) {
    ReferenceCache cache;
    reference = cache.get(disc, finest, cfg.solver);
  }

  std::vector<CellResult> cells;
  for (Algorithm a : cfg.algorithms) {
    for (std::size_t l : cfg.levels) {
      CellResult c;
      c.algorithm = a;
      c.level = l;
      c.h = disc.level(l).mesh->mesh_size();
      cells.push_back(std::move(c));
    }
  }

  auto solve_cell = [&](CellResult& c) {
    SolverConfig sc = cfg.solver;
    sc.algorithm = c.algorithm;
    try {
      c.record = run_algorithm(disc, c.level, sc);
      if (c.record.termination == Termination::kFailure) c.failure = c.record.failure;
      const AssembledLevel& lvl = disc.level(c.level);
      if (needs_reference) {
        c.error = error_against_reference(disc, c.record.final_state.u, c.level, *reference, finest);
      } else {
        c.error = l2_error(c.record.final_state.u, *problem.exact_control, *lvl.mesh);
      }
    } catch (const Error& e) {
      c.failure = e.what();
    }
  };

  const std::size_t workers = std::min(cfg.threads, cells.size());
  if (workers <= 1) {
    for (CellResult& c : cells) solve_cell(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) solve_cell(cells[i]);
      });
    }
    for (std::thread& t : pool) t.join();
  }

  ExperimentResult out;
  out.table = build_eoc_table(problem.name, cells);
  out.cells = std::move(cells);
  std::stable_sort(out.cells.begin(), out.cells.end(), [](const CellResult& a, const CellResult& b) {
    if (a.algorithm != b.algorithm) return static_cast<int>(a.algorithm) < static_cast<int>(b.algorithm);
    return a.level < b.level;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9e", v);
  return buf;
}

inline std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

}  // namespace detail

inline constexpr const char* kTableHeader =
    "algorithm,level,h,state_dofs,control_dofs,E,EOC,eta,iterations,termination";

/// Timing is left out so reruns give identical bytes; see write_metadata.
inline void write_table_csv(std::ostream& out, const EocTable& table) {
  using detail::fmt;
  out << kTableHeader << '\n';
  for (const EocRow& r : table.rows) {
    out << to_string(r.algorithm) << ',' << r.level << ',' << fmt(r.h) << ',' << r.state_dofs << ',' << r.control_dofs
        << ',' << fmt(r.error) << ',' << fmt(r.eoc) << ',' << fmt(r.eta) << ',' << r.iterations << ',' << r.termination
        << '\n';
  }
}

inline constexpr const char* kIterationHeader =
    "algorithm,target_level,k,level,state_dofs,control_dofs,eta1,eta2,eta3,eta4,eta5,eta5_plain,eta,eta_used,R,"
    "delta_norm,delta_l2,xi,inner_iterations";

inline void write_iterations_csv(std::ostream& out, const std::vector<CellResult>& cells) {
  using detail::fmt;
  out << kIterationHeader << '\n';
  for (const CellResult& c : cells) {
    for (const IterationRow& r : c.record.rows) {
      out << to_string(c.algorithm) << ',' << c.level << ',' << r.k << ',' << r.level << ',' << r.state_dofs << ','
          << r.control_dofs << ',' << fmt(r.res.eta1) << ',' << fmt(r.res.eta2) << ',' << fmt(r.res.eta3) << ','
          << fmt(r.res.eta4) << ',' << fmt(r.res.eta5) << ',' << fmt(r.res.eta5_plain) << ',' << fmt(r.res.eta) << ','
          << fmt(r.eta_used) << ',' << fmt(r.res.R) << ',' << fmt(r.delta_norm) << ',' << fmt(r.delta_l2) << ','
          << fmt(r.xi) << ',' << r.inner_iterations << '\n';
    }
  }
}

/// Series for external plotting: η against k per run, E against h per
/// algorithm. Blocks are separated by a blank line and start with a `#` tag.
inline void write_plotdata(std::ostream& out, const std::vector<CellResult>& cells) {
  using detail::fmt;
  for (const CellResult& c : cells) {
    out << "# eta_vs_k " << to_string(c.algorithm) << " level=" << c.level << '\n';
    for (const IterationRow& r : c.record.rows) out << r.k << ' ' << fmt(r.eta_used) << '\n';
    out << '\n';
  }
  std::vector<Algorithm> seen;
  for (const CellResult& c : cells) {
    if (std::find(seen.begin(), seen.end(), c.algorithm) != seen.end()) continue;
    seen.push_back(c.algorithm);
    out << "# E_vs_h " << to_string(c.algorithm) << '\n';
    for (const CellResult& d : cells) {
      if (d.algorithm == c.algorithm && d.error) out << fmt(d.h) << ' ' << fmt(*d.error) << '\n';
    }
    out << '\n';
  }
}

// JSON ---------------------------------------------------------------------

inline nlohmann::json to_json(const IterationRow& r) {
  return {{"k", r.k},
          {"level", r.level},
          {"state_dofs", r.state_dofs},
          {"control_dofs", r.control_dofs},
          {"eta1", r.res.eta1},
          {"eta2", r.res.eta2},
          {"eta3", r.res.eta3},
          {"eta4", r.res.eta4},
          {"eta5", r.res.eta5},
          {"eta5_plain", r.res.eta5_plain},
          {"eta", r.res.eta},
          {"eta_plain", r.res.eta_plain},
          {"R", r.res.R},
          {"eta_used", r.eta_used},
          {"delta_norm", r.delta_norm},
          {"delta_l2", r.delta_l2},
          {"xi", r.xi},
          {"inner_iterations", r.inner_iterations},
          {"wall_time", r.wall_time}};
}

inline IterationRow iteration_row_from_json(const nlohmann::json& j) {
  IterationRow r;
  r.k = j.at("k").get<std::size_t>();
  r.level = j.at("level").get<std::size_t>();
  r.state_dofs = j.at("state_dofs").get<std::size_t>();
  r.control_dofs = j.at("control_dofs").get<std::size_t>();
  r.res.eta1 = j.at("eta1").get<double>();
  r.res.eta2 = j.at("eta2").get<double>();
  r.res.eta3 = j.at("eta3").get<double>();
  r.res.eta4 = j.at("eta4").get<double>();
  r.res.eta5 = j.at("eta5").get<double>();
  r.res.eta5_plain = j.at("eta5_plain").get<double>();
  r.res.eta = j.at("eta").get<double>();
  r.res.eta_plain = j.at("eta_plain").get<double>();
  r.res.R = j.at("R").get<double>();
  r.eta_used = j.at("eta_used").get<double>();
  r.delta_norm = j.at("delta_norm").get<double>();
  r.delta_l2 = j.at("delta_l2").get<double>();
  r.xi = j.at("xi").get<double>();
  r.inner_iterations = j.at("inner_iterations").get<std::size_t>();
  r.wall_time = j.at("wall_time").get<double>();
  return r;
}

inline Termination parse_termination(const std::string& s) {
  if (s == "tolerance") return Termination::kTolerance;
  if (s == "max_iter") return Termination::kMaxIter;
  if (s == "failure") return Termination::kFailure;
  throw Error(ErrorCode::kInvalidArgument, "unknown termination '" + s + "'");
}

inline nlohmann::json to_json(const RunRecord& rec) {
  nlohmann::json rows = nlohmann::json::array();
  for (const IterationRow& r : rec.rows) rows.push_back(to_json(r));
  const IterateState& s = rec.final_state;
  return {{"problem", rec.problem},
          {"algorithm", to_string(rec.algorithm)},
          {"target_level", rec.target_level},
          {"termination", to_string(rec.termination)},
          {"failure", rec.failure},
          {"krylov_method", rec.krylov_method},
          {"config",
           {{"sigma", rec.sigma},
            {"tau", rec.tau},
            {"eta_tol", rec.eta_tol},
            {"max_iter", rec.max_iter},
            {"xi_scale", rec.xi_scale},
            {"xi_power", rec.xi_power},
            {"start_level", rec.start_level}}},
          {"wall_time", rec.wall_time},
          {"rows", rows},
          {"final_state",
           {{"level", s.level},
            {"u", s.u},
            {"z", s.z},
            {"lambda", s.lambda},
            {"y", s.y},
            {"p", s.p},
            {"delta_norm", s.delta_norm}}}};
}

inline RunRecord run_record_from_json(const nlohmann::json& j) {
  RunRecord rec;
  rec.problem = j.at("problem").get<std::string>();
  rec.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
  rec.target_level = j.at("target_level").get<std::size_t>();
  rec.termination = parse_termination(j.at("termination").get<std::string>());
  rec.failure = j.at("failure").get<std::string>();
  rec.krylov_method = j.at("krylov_method").get<std::string>();
  const auto& c = j.at("config");
  rec.sigma = c.at("sigma").get<double>();
  rec.tau = c.at("tau").get<double>();
  rec.eta_tol = c.at("eta_tol").get<double>();
  rec.max_iter = c.at("max_iter").get<std::size_t>();
  rec.xi_scale = c.at("xi_scale").get<double>();
  rec.xi_power = c.at("xi_power").get<double>();
  rec.start_level = c.at("start_level").get<std::size_t>();
  rec.wall_time = j.at("wall_time").get<double>();
  for (const auto& r : j.at("rows")) rec.rows.push_back(iteration_row_from_json(r));
  const auto& s = j.at("final_state");
  rec.final_state.level = s.at("level").get<std::size_t>();
  rec.final_state.u = s.at("u").get<Vector>();
  rec.final_state.z = s.at("z").get<Vector>();
  rec.final_state.lambda = s.at("lambda").get<Vector>();
  rec.final_state.y = s.at("y").get<Vector>();
  rec.final_state.p = s.at("p").get<Vector>();
  rec.final_state.delta_norm = s.at("delta_norm").get<double>();
  return rec;
}

/// Full records with the per-cell h and E, enough to rebuild the EOC table.
inline nlohmann::json records_to_json(const std::string& problem, const std::vector<CellResult>& cells) {
  nlohmann::json runs = nlohmann::json::array();
  for (const CellResult& c : cells) {
    nlohmann::json e = c.error ? nlohmann::json(*c.error) : nlohmann::json(nullptr);
    runs.push_back({{"algorithm", to_string(c.algorithm)},
                    {"level", c.level},
                    {"h", c.h},
                    {"E", e},
                    {"failure", c.failure},
                    {"record", to_json(c.record)}});
  }
  return {{"schema", kRecordSchema}, {"problem", problem}, {"runs", runs}};
}

struct RecordSet {
  std::string problem;
  std::vector<CellResult> cells;
};

inline RecordSet records_from_json(const nlohmann::json& j) {
  if (!j.contains("schema") || j.at("schema") != kRecordSchema) {
    throw Error(ErrorCode::kInvalidArgument, std::string("records file is not ") + kRecordSchema);
  }
  RecordSet set;
  set.problem = j.at("problem").get<std::string>();
  for (const auto& r : j.at("runs")) {
    CellResult c;
    c.algorithm = parse_algorithm(r.at("algorithm").get<std::string>());
    c.level = r.at("level").get<std::size_t>();
    c.h = r.at("h").get<double>();
    if (!r.at("E").is_null()) c.error = r.at("E").get<double>();
    c.failure = r.at("failure").get<std::string>();
    c.record = run_record_from_json(r.at("record"));
    set.cells.push_back(std::move(c));
  }
  return set;
}

/// Timestamp and wall times, kept apart from the reproducible outputs.
inline void write_metadata(std::ostream& out, const ExperimentConfig& cfg, const ExperimentResult& res,
                           const std::string& timestamp) {
  nlohmann::json cells = nlohmann::json::array();
  for (const CellResult& c : res.cells) {
    nlohmann::json per_iter = nlohmann::json::array();
    for (const IterationRow& r : c.record.rows) per_iter.push_back(r.wall_time);
    cells.push_back({{"algorithm", to_string(c.algorithm)},
                     {"level", c.level},
                     {"wall_time", c.record.wall_time},
                     {"iteration_wall_time", per_iter}});
  }
  const nlohmann::json j = {{"timestamp", timestamp}, {"threads", cfg.threads}, {"problem", res.table.problem}, {"cells", cells}};
  out << j.dump(2) << '\n';
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  f << content;
  if (!f) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

/// table.csv, iterations.csv, records.json, plotdata.txt, metadata.json.
inline void emit_all(const std::filesystem::path& dir, const ExperimentConfig& cfg, const ExperimentResult& res,
                     const std::string& timestamp) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  std::ostringstream table, iters, plot, meta;
  write_table_csv(table, res.table);
  write_iterations_csv(iters, res.cells);
  write_plotdata(plot, res.cells);
  write_metadata(meta, cfg, res, timestamp);
  write_file(dir / "table.csv", table.str());
  write_file(dir / "iterations.csv", iters.str());
  write_file(dir / "plotdata.txt", plot.str());
  write_file(dir / "records.json", records_to_json(res.table.problem, res.cells).dump(1) + "\n");
  write_file(dir / "metadata.json", meta.str());
}

}  // namespace madmm
