// Copyright 2026 The madmm Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include "madmm/admm.hpp"
#include "madmm/problems.hpp"
#include "oracle.hpp"

using madmm::Vector;

namespace {

const madmm::Discretization& disc() {
  static const madmm::Discretization d = madmm::discretize(madmm::example2(5), madmm::square_hierarchy(3));
  return d;
}

madmm::SolverConfig base_config() {
  madmm::SolverConfig c;
  c.sigma = disc().problem.alpha;
  return c;
}

const oracle::FixedPoint& fixed_point() {
  static const oracle::FixedPoint fp = [] {
    auto f = oracle::projected_kkt(oracle::reduced_problem(disc().level(3)));
    REQUIRE(f.converged);
    return f;
  }();
  return fp;
}

double max_diff(const Vector& a, const Vector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("z update projects u + lambda/sigma", "[admm]") {
  const Vector u{0.0, 0.5, 1.2, -3.0};
  const Vector lambda{1.0, 0.0, -0.1, 0.5};
  const Vector z = madmm::z_update(u, lambda, 2.0, 0.3, 1.0);
  CHECK(z == Vector{0.5, 0.5, 1.0, 0.3});
  // Idempotent on feasible points with zero multiplier.
  CHECK(madmm::z_update(z, Vector(4, 0.0), 2.0, 0.3, 1.0) == z);
  CHECK_THROWS_AS(madmm::z_update(u, lambda, 0.0, 0.3, 1.0), madmm::Error);
  CHECK_THROWS_AS(madmm::z_update(u, lambda, 1.0, 1.0, 0.3), madmm::Error);
  CHECK_THROWS_AS(madmm::z_update(u, Vector(2, 0.0), 1.0, 0.3, 1.0), madmm::Error);
}

TEST_CASE("lambda update is a scaled dual ascent step", "[admm]") {
  const Vector lam{1.0, -1.0}, u{0.5, 0.2}, z{0.3, 0.4};
  const Vector out = madmm::lambda_update(lam, u, z, 1.5, 2.0);
  CHECK(out[0] == Catch::Approx(1.0 + 3.0 * 0.2));
  CHECK(out[1] == Catch::Approx(-1.0 - 3.0 * 0.2));
}

TEST_CASE("level and tolerance schedules", "[admm]") {
  CHECK(madmm::default_level_schedule(0, 2, 5) == 2);
  CHECK(madmm::default_level_schedule(2, 2, 5) == 4);
  CHECK(madmm::default_level_schedule(9, 2, 5) == 5);
  CHECK_THROWS_AS(madmm::default_level_schedule(0, 6, 5), madmm::Error);

  const madmm::XiSchedule xi{1e-3, 2.0};
  CHECK(xi(0) == 1e-3);
  CHECK(xi(1) == Catch::Approx(2.5e-4));
  double partial = 0.0;
  for (std::size_t k = 0; k < 100000; ++k) partial += xi(k);
  CHECK(partial < 1e-3 * std::numbers::pi * std::numbers::pi / 6.0);
  CHECK(partial > 1e-3 * 1.644);
}

TEST_CASE("configuration validation", "[admm]") {
  madmm::SolverConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.resolved_sigma(0.02) == Catch::Approx(0.002));
  c.tau = 1.7;
  CHECK_THROWS_AS(c.validate(), madmm::Error);
  c = {};
  c.xi.power = 1.0;
  CHECK_THROWS_AS(c.validate(), madmm::Error);
  c = {};
  c.sigma = -1.0;
  CHECK_THROWS_AS(c.validate(), madmm::Error);
  c = {};
  c.max_iter = 0;
  CHECK_THROWS_AS(c.validate(), madmm::Error);
  CHECK(madmm::parse_algorithm("ihadmm") == madmm::Algorithm::kInexact);
  CHECK_THROWS_AS(madmm::parse_algorithm("sqp"), madmm::Error);
}

TEST_CASE("a single iteration stops on the iteration cap", "[admm]") {
  auto cfg = base_config();
  cfg.max_iter = 1;
  const auto rec = madmm::run_inexact(disc(), 3, cfg);
  CHECK(rec.iterations() == 1);
  CHECK(rec.termination == madmm::Termination::kMaxIter);
  CHECK_FALSE(rec.converged());
  CHECK(rec.rows[0].k == 1);
  CHECK(rec.rows[0].delta_norm <= rec.rows[0].xi);
}

TEST_CASE("iterates stay box-feasible and runs are deterministic", "[admm]") {
  auto cfg = base_config();
  cfg.max_iter = 15;
  const auto a = madmm::run_madmm(disc(), 3, cfg);
  const auto b = madmm::run_madmm(disc(), 3, cfg);
  REQUIRE(a.iterations() == b.iterations());
  for (std::size_t i = 0; i < a.iterations(); ++i) {
    CHECK(a.rows[i].level == b.rows[i].level);
    CHECK(a.rows[i].res.eta == b.rows[i].res.eta);
    CHECK(a.rows[i].res.R == b.rows[i].res.R);
  }
  for (double z : a.final_state.z) {
    CHECK(z >= 0.3);
    CHECK(z <= 1.0);
  }
  // Default start three levels below the target, one level per iteration.
  CHECK(a.rows[0].level == 0);
  CHECK(a.rows[1].level == 1);
  CHECK(a.rows[3].level == 3);
}

TEST_CASE("multi-level run with start equal to target reproduces the fixed-level run", "[admm]") {
  auto cfg = base_config();
  cfg.max_iter = 12;
  cfg.start_level = 3;
  const auto m = madmm::run_madmm(disc(), 3, cfg);
  const auto i = madmm::run_inexact(disc(), 3, cfg);
  REQUIRE(m.iterations() == i.iterations());
  CHECK(max_diff(m.final_state.u, i.final_state.u) <= 1e-10);
  CHECK(max_diff(m.final_state.lambda, i.final_state.lambda) <= 1e-10);
}

TEST_CASE("custom level schedule is honoured and must be monotone", "[admm]") {
  auto cfg = base_config();
  cfg.max_iter = 6;
  cfg.level_schedule = [](std::size_t k) { return k < 2 ? std::size_t{1} : std::size_t{3}; };
  const auto rec = madmm::run_madmm(disc(), 3, cfg);
  CHECK(rec.rows[0].level == 1);
  CHECK(rec.rows[1].level == 1);
  CHECK(rec.rows[2].level == 3);
  cfg.level_schedule = [](std::size_t k) { return k == 0 ? std::size_t{2} : std::size_t{1}; };
  CHECK_THROWS_AS(madmm::run_madmm(disc(), 3, cfg), madmm::Error);
}

TEST_CASE("near-exact inexact solves track the classical iteration", "[admm]") {
  auto cfg = base_config();
  cfg.max_iter = 8;
  cfg.xi = {1e-11, 1.0001};
  cfg.classical_tol = 1e-11;
  cfg.classical_tau = cfg.tau;
  const auto inexact = madmm::run_inexact(disc(), 3, cfg);
  const auto classical = madmm::run_classical(disc(), 3, cfg);
  REQUIRE(inexact.iterations() == classical.iterations());
  CHECK(max_diff(inexact.final_state.u, classical.final_state.u) <= 1e-8);
  CHECK(max_diff(inexact.final_state.z, classical.final_state.z) <= 1e-8);
}

TEST_CASE("residuals vanish at the discrete KKT point", "[admm]") {
  const auto& lvl = disc().level(3);
  const auto& fp = fixed_point();
  madmm::IterateState s;
  s.level = 3;
  s.u = fp.u;
  s.z = fp.u;
  s.lambda = fp.mu;
  for (double& v : s.lambda) v = -v;
  const oracle::ReducedProblem rp = oracle::reduced_problem(lvl);
  Vector src = s.u;
  madmm::axpy(1.0, lvl.source_offset, src);
  s.y = oracle::solve(rp.K, oracle::mul(rp.B, src));
  Vector misfit = lvl.desired_state;
  madmm::axpy(-1.0, s.y, misfit);
  s.p = oracle::solve(rp.K, oracle::mul(rp.Mss, misfit));
  for (auto norm : {madmm::ResidualNorm::kEuclidean, madmm::ResidualNorm::kL2}) {
    const auto r = madmm::kkt_residuals(lvl, s, s.lambda, norm);
    CHECK(r.eta1 <= 1e-8);
    CHECK(r.eta2 == 0.0);
    CHECK(r.eta3 <= 1e-8);
    CHECK(r.eta4 <= 1e-8);
    CHECK(r.eta5_plain <= 1e-8);
    CHECK(r.eta_plain <= 1e-8);
    CHECK(r.R <= 1e-8);
  }
  // Perturbing z away from u shows up in η₂ and in R.
  madmm::IterateState t = s;
  t.z[10] += 0.05;
  const auto r = madmm::kkt_residuals(lvl, t, t.lambda, madmm::ResidualNorm::kL2);
  CHECK(r.eta2 > 1e-3);
  CHECK(r.R > 0.0);
  t.u.pop_back();
  CHECK_THROWS_AS(madmm::kkt_residuals(lvl, t, s.lambda), madmm::Error);
}

TEST_CASE("all drivers converge to the dense KKT solution", "[admm]") {
  const auto& lvl = disc().level(3);
  const auto& fp = fixed_point();
  const oracle::Dense m = oracle::to_dense(lvl.mass);
  auto cfg = base_config();
  cfg.eta_tol = 1e-9;
  for (auto alg : {madmm::Algorithm::kClassical, madmm::Algorithm::kInexact, madmm::Algorithm::kMadmm}) {
    cfg.algorithm = alg;
    const auto rec = madmm::run_algorithm(disc(), 3, cfg);
    INFO(madmm::to_string(alg));
    REQUIRE(rec.converged());
    Vector d = rec.final_state.u;
    madmm::axpy(-1.0, fp.u, d);
    CHECK(oracle::m_norm(m, d) <= 1e-5);
  }
}

TEST_CASE("target outside the hierarchy is rejected", "[admm]") {
  CHECK_THROWS_AS(madmm::run_inexact(disc(), 4, base_config()), madmm::Error);
}
