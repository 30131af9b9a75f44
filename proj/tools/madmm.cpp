// Copyright 2026 The madmm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Batch front end.
//
//   madmm solve --config run.cfg [--problem example2] [--algorithm madmm,inexact]
//               [--levels 4..6] [--out results] [--threads N]
//   madmm eoc --in results/records.json --out table.csv
//
// `solve` exits 0 only if every requested solve stopped on the tolerance.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "madmm/experiment.hpp"

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void print_table(const madmm::EocTable& t) {
  std::printf("%-10s %5s %10s %8s %11s %8s %10s %6s %s\n", "algorithm", "level", "h", "dofs", "E", "EOC", "eta", "iter",
              "stop");
  for (const auto& r : t.rows) {
    char e[32] = "-", eoc[32] = "-";
    if (r.error) std::snprintf(e, sizeof e, "%.4e", *r.error);
    if (r.eoc) std::snprintf(eoc, sizeof eoc, "%.4f", *r.eoc);
    std::printf("%-10s %5zu %10.4e %8zu %11s %8s %10.3e %6zu %s\n", madmm::to_string(r.algorithm).c_str(), r.level, r.h,
                r.state_dofs, e, eoc, r.eta, r.iterations, r.termination.c_str());
  }
}

int run_solve(const std::string& config_path, const std::string& problem, const std::string& algorithm,
              const std::string& levels, const std::string& out_dir, std::size_t threads) {
  madmm::ExperimentConfig cfg = config_path.empty() ? madmm::ExperimentConfig{} : madmm::load_config(config_path);
  if (auto env = madmm::threads_from_env()) cfg.threads = *env;
  if (!problem.empty()) madmm::apply_setting(cfg, "problem", problem);
  if (!algorithm.empty()) madmm::apply_setting(cfg, "algorithm", algorithm);
  if (!levels.empty()) madmm::apply_setting(cfg, "levels", levels);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (threads > 0) cfg.threads = threads;

  const madmm::ExperimentResult res = madmm::run_experiment(cfg);
  madmm::emit_all(cfg.output_dir, cfg, res, utc_timestamp());
  print_table(res.table);
  for (const auto& c : res.cells) {
    if (!c.failure.empty()) {
      std::cerr << madmm::to_string(c.algorithm) << " level " << c.level << ": " << c.failure << '\n';
    }
  }
  std::cout << "wrote " << cfg.output_dir << '\n';
  return res.all_converged() ? 0 : 1;
}

int run_eoc(const std::string& in_path, const std::string& out_path) {
  std::ifstream in(in_path);
  if (!in) throw madmm::Error(madmm::ErrorCode::kIo, "cannot open " + in_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw madmm::Error(madmm::ErrorCode::kIo, in_path + ": " + e.what());
  }
  madmm::RecordSet set = madmm::records_from_json(j);
  const madmm::EocTable table = madmm::build_eoc_table(set.problem, std::move(set.cells));
  std::ostringstream csv;
  madmm::write_table_csv(csv, table);
  madmm::write_file(out_path, csv.str());
  print_table(table);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-level inexact ADMM benchmarks"};
  app.require_subcommand(1);

  std::string config_path, problem, algorithm, levels, out_dir;
  std::size_t threads = 0;
  CLI::App* solve = app.add_subcommand("solve", "run a configured experiment");
  solve->add_option("--config", config_path, "flat key = value config file")->check(CLI::ExistingFile);
  solve->add_option("--problem", problem, "example1 or example2");
  solve->add_option("--algorithm", algorithm, "comma list of classical, inexact, madmm");
  solve->add_option("--levels", levels, "a..b or comma list of target levels");
  solve->add_option("--out", out_dir, "output directory");
  solve->add_option("--threads", threads, "worker threads (also MADMM_THREADS)");

  std::string in_path, table_path;
  CLI::App* eoc = app.add_subcommand("eoc", "rebuild an EOC table from records.json");
  eoc->add_option("--in", in_path, "records.json from solve")->required()->check(CLI::ExistingFile);
  eoc->add_option("--out", table_path, "output CSV")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (solve->parsed()) return run_solve(config_path, problem, algorithm, levels, out_dir, threads);
    return run_eoc(in_path, table_path);
  } catch (const madmm::Error& e) {
    std::cerr << "error [" << madmm::to_string(e.code()) << "]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
