#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "ctsdr/refine.hpp"
#include "doctest.h"

using namespace ctsdr;

namespace {

// Independently frozen reference for the v0 = 0 instance on a (4, 4)
// grid: brute-force scan of the fixed-duration convex subproblems over a
// 0.005-spaced duration grid.
constexpr double kOracleCost44 = 2.8444458175;
constexpr double kOracleTheta1 = 0.345;
constexpr double kOracleTheta2 = 0.210;

}  // namespace

TEST_CASE("fixed-duration subproblem reproduces the frozen optimum") {
  OcpProblem p = double_integrator_benchmark(0.0);
  TranscribedNlp nlp = transcribe(p, ShootingGrid{{4, 4}});
  Eigen::VectorXd th(2);
  th << kOracleTheta1, kOracleTheta2;

  QpProblem qp = fixed_theta_qp(nlp, th);
  QpSolution sol = solve_qp(qp);
  REQUIRE(sol.status == QpStatus::optimal);

  NlpPoint pt = fixed_theta_point(nlp, th, sol.d);
  EvalResult ev = evaluate(nlp, pt);
  CHECK(ev.feasible(1e-6));
  CHECK(ev.cost == doctest::Approx(kOracleCost44).epsilon(1e-7));
}

TEST_CASE("pipeline lower-bounds the frozen optimum") {
  OcpProblem p = double_integrator_benchmark(0.0);
  PipelineResult r = solve_pipeline(p, ShootingGrid{{4, 4}});
  REQUIRE(r.sdp_status == SolveStatus::optimal);
  CHECK(r.refine_status == RefineStatus::converged);

  // The refined point is feasible and at least as good as the scan.
  CHECK(r.refined.feasibility_residual <= 1e-6);
  CHECK(r.J_rcvx <= kOracleCost44 + 1e-6);
  CHECK(r.J_rcvx >= kOracleCost44 - 5e-3);  // scan step limits the scan
  CHECK(r.J_cvx <= kOracleCost44 + 1e-6);
  CHECK(r.refined.source == "refined");
  CHECK(r.refined.crossing_times.size() == 1);
  CHECK(r.refined.crossing_times[0] > 1.2);
  CHECK(r.refined.crossing_times[0] < 1.6);
}

TEST_CASE("refinement is a fixed point at its own solution") {
  OcpProblem p = double_integrator_benchmark(0.5);
  ShootingGrid grid{{4, 4}};
  TranscribedNlp nlp = transcribe(p, grid);
  PipelineResult r = solve_pipeline(p, grid);
  REQUIRE(r.refine_status == RefineStatus::converged);

  RefineResult again = refine(nlp, r.refined.point);
  CHECK(again.status == RefineStatus::converged);
  CHECK(again.iterations <= 2);
  CHECK(again.trajectory.cost == doctest::Approx(r.J_rcvx).epsilon(1e-8));

  // Recovery from a perturbed warm start.
  NlpPoint noisy = r.refined.point;
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> un(-1e-3, 1e-3);
  for (auto& seg : noisy.states)
    for (auto& x : seg) x.array() += un(rng);
  RefineResult rec = refine(nlp, noisy);
  CHECK(rec.status == RefineStatus::converged);
  CHECK(rec.trajectory.cost == doctest::Approx(r.J_rcvx).epsilon(1e-6));
  CHECK(rec.trajectory.feasibility_residual <= 1e-6);
}

TEST_CASE("baseline fixes the crossing times") {
  OcpProblem p = double_integrator_benchmark(0.5);
  ShootingGrid grid{{4, 4}};

  TrajectorySolution base = solve_baseline(p, grid);
  CHECK(base.source == "baseline");
  // Default tau_hat is the window midpoint.
  CHECK(base.crossing_times[0] == doctest::Approx(1.4).epsilon(1e-9));
  CHECK(base.feasibility_residual <= 1e-6);

  PipelineResult r = solve_pipeline(p, grid);
  CHECK(base.cost >= r.J_rcvx - 1e-8);

  BaselineSpec spec;
  spec.tau_hat = Eigen::VectorXd::Constant(1, 1.25);
  TrajectorySolution shifted = solve_baseline(p, grid, spec);
  CHECK(shifted.crossing_times[0] == doctest::Approx(1.25).epsilon(1e-9));
  CHECK(shifted.cost >= r.J_rcvx - 1e-8);

  // Unreachable crossing time: 0.6 m cannot be covered in 0.1 s at v <= 2.
  BaselineSpec bad;
  bad.tau_hat = Eigen::VectorXd::Constant(1, 0.1);
  CHECK_THROWS(solve_baseline(p, grid, bad));
}

TEST_CASE("degenerate window pins the crossing time") {
  OcpProblem p = double_integrator_benchmark(0.5, {1.4, 1.4});
  ShootingGrid grid{{4, 4}};
  PipelineResult r = solve_pipeline(p, grid);
  REQUIRE(r.sdp_status == SolveStatus::optimal);
  REQUIRE(r.refine_status == RefineStatus::converged);
  CHECK(r.refined.crossing_times[0] == doctest::Approx(1.4).epsilon(1e-8));

  // With the time fixed, the baseline and the pipeline must agree.
  TrajectorySolution base = solve_baseline(p, grid);
  CHECK(base.cost == doctest::Approx(r.J_rcvx).epsilon(1e-4));
}
