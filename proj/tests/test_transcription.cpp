#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "ctsdr/transcription.hpp"
#include "doctest.h"

using namespace ctsdr;

TEST_CASE("shooting grid helpers") {
  ShootingGrid g{{2, 3, 4}};
  CHECK(g.num_segments() == 3);
  CHECK(g.total_intervals() == 9);
  CHECK(g.segment_begin(0) == 0);
  CHECK(g.segment_begin(1) == 2);
  CHECK(g.segment_begin(2) == 5);
}

TEST_CASE("transcription of the double integrator") {
  OcpProblem p = double_integrator_benchmark(0.5);
  TranscribedNlp nlp = transcribe(p, ShootingGrid{{2, 3}});
  CHECK(nlp.wdim() == 5);

  // F w = x_{k+1} - x_k.
  Eigen::MatrixXd F(2, 5);
  F << -1, 0, 1, 0, 0, 0, -1, 0, 1, 0;
  CHECK(nlp.interval.F == F);
  // K (theta w) = theta (A x_k + B u_k).
  Eigen::MatrixXd K(2, 5);
  K << 0, 1, 0, 0, 0, 0, 0, 0, 0, 1;
  CHECK(nlp.interval.K == K);

  // Finite box rows: velocity bounds on x_k and x_{k+1}, input bounds.
  CHECK(nlp.boxes.G.rows() == 6);
  for (int r = 0; r < 6; ++r) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(5);
    w[1] = 1.0;   // v_k = 1, feasible
    w[3] = 1.0;   // v_{k+1} = 1
    CHECK(nlp.boxes.G.row(r).dot(w) - nlp.boxes.g[r] >= 0.0);
  }
  // v_k above its bound: the tightest row reports the violation.
  Eigen::VectorXd bad = Eigen::VectorXd::Zero(5);
  bad[1] = 3.0;
  double worst = 0.0;
  for (int r = 0; r < 6; ++r)
    worst = std::min(worst, nlp.boxes.G.row(r).dot(bad) - nlp.boxes.g[r]);
  CHECK(worst == -1.0);

  CHECK_THROWS_AS(transcribe(p, ShootingGrid{{2}}), ProblemError);
  CHECK_THROWS_AS(transcribe(p, ShootingGrid{{2, 0}}), ProblemError);
}

TEST_CASE("waypoint boxes keep only finite rows") {
  TranscribedNlp nlp = transcribe(waypoint_problem(1), ShootingGrid{{1, 1, 1, 1, 1}});
  // 3 velocity components on x_k and x_{k+1} plus 3 inputs, two-sided.
  CHECK(nlp.boxes.G.rows() == 18);
  CHECK(nlp.wdim() == 15);
}

TEST_CASE("windows shrink by the open-interval margin") {
  OcpProblem p = double_integrator_benchmark(0.5);
  TranscribedNlp nlp = transcribe(p, ShootingGrid{{2, 2}});
  CHECK(nlp.problem.ctcs[0].tau_min == doctest::Approx(1.2 + 1e-6).epsilon(1e-12));
  CHECK(nlp.problem.ctcs[0].tau_max == doctest::Approx(1.6 - 1e-6).epsilon(1e-12));

  // Degenerate window: margin collapses to zero.
  OcpProblem q = double_integrator_benchmark(0.5, {1.4, 1.4});
  TranscribedNlp nlp2 = transcribe(q, ShootingGrid{{2, 2}});
  CHECK(nlp2.problem.ctcs[0].tau_min == 1.4);
  CHECK(nlp2.problem.ctcs[0].tau_max == 1.4);

  // Narrow window: margin capped at a quarter of the width.
  OcpProblem r = double_integrator_benchmark(0.5, {1.4, 1.4 + 2e-6});
  TranscribedNlp nlp3 = transcribe(r, ShootingGrid{{2, 2}});
  CHECK(nlp3.problem.ctcs[0].tau_min == doctest::Approx(1.4 + 5e-7).epsilon(1e-12));
}

TEST_CASE("euler step and stage cost") {
  OcpProblem p = double_integrator_benchmark(0.0);
  Eigen::VectorXd x(2), u(1);
  x << 0.3, 1.0;
  u << -0.5;
  Eigen::VectorXd next = euler_step(x, u, 0.1, p.dynamics);
  CHECK(next[0] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(next[1] == doctest::Approx(0.95).epsilon(1e-15));

  // Q = 0, R = 1/2: stage cost theta R u^2.
  u << 1.0;
  CHECK(stage_cost(x, u, 0.1, p.cost) == doctest::Approx(0.05).epsilon(1e-15));
}

TEST_CASE("crossing times accumulate durations") {
  ShootingGrid g{{2, 3}};
  Eigen::VectorXd th(2);
  th << 0.2, 0.3;
  CHECK(crossing_time(th, g, 1) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(crossing_time(th, g, 2) == doctest::Approx(1.3).epsilon(1e-15));
  CHECK_THROWS_AS(crossing_time(th, g, 0), std::out_of_range);
  CHECK_THROWS_AS(crossing_time(th, g, 3), std::out_of_range);
}

TEST_CASE("simulate and evaluate") {
  OcpProblem p = double_integrator_benchmark(0.5);
  ShootingGrid g{{2, 2}};
  TranscribedNlp nlp = transcribe(p, g);

  std::vector<std::vector<Eigen::VectorXd>> controls(
      2, std::vector<Eigen::VectorXd>(2, Eigen::VectorXd::Constant(1, 0.25)));
  Eigen::VectorXd th(2);
  th << 0.6, 0.4;
  NlpPoint pt = simulate(nlp, controls, th);

  EvalResult ev = evaluate(nlp, pt);
  // Simulation satisfies dynamics and continuity by construction.
  CHECK(ev.residuals.at("dynamics").cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(ev.residuals.at("continuity").cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(ev.residuals.at("boundary").head(2).cwiseAbs().maxCoeff() <= 1e-14);
  // Cost: w_t sum N_i theta_i + sum theta R u^2 with u = 1/4.
  double expect =
      2 * 0.6 + 2 * 0.4 + 2 * (0.6 * 0.5 * 0.0625) + 2 * (0.4 * 0.5 * 0.0625);
  CHECK(ev.cost == doctest::Approx(expect).epsilon(1e-12));
  CHECK(!ev.feasible(1e-6));  // terminal state and window are off

  NlpPoint wrong = pt;
  wrong.states[0].pop_back();
  CHECK_THROWS_AS(evaluate(nlp, wrong), ProblemError);
}
