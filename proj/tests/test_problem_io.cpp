#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>
#include <sstream>

#include "ctsdr/io.hpp"
#include "ctsdr/problem.hpp"
#include "doctest.h"

using namespace ctsdr;

TEST_CASE("double integrator benchmark fields") {
  OcpProblem p = double_integrator_benchmark(0.5);
  CHECK(p.nx() == 2);
  CHECK(p.nu() == 1);
  CHECK(p.dynamics.A(0, 1) == 1.0);
  CHECK(p.dynamics.A(0, 0) == 0.0);
  CHECK(p.dynamics.A(1, 0) == 0.0);
  CHECK(p.dynamics.A(1, 1) == 0.0);
  CHECK(p.dynamics.B(0, 0) == 0.0);
  CHECK(p.dynamics.B(1, 0) == 1.0);
  CHECK(p.bounds.x_min[1] == 0.0);
  CHECK(p.bounds.x_max[1] == 2.0);
  CHECK(std::isinf(p.bounds.x_min[0]));
  CHECK(std::isinf(p.bounds.x_max[0]));
  CHECK(p.bounds.u_min[0] == -1.0);
  CHECK(p.bounds.u_max[0] == 1.0);
  CHECK(p.x0[0] == 0.0);
  CHECK(p.x0[1] == 0.5);
  CHECK(p.xf[0] == 1.0);
  CHECK(p.xf[1] == 0.0);
  REQUIRE(p.num_ctcs() == 1);
  CHECK(p.ctcs[0].target[0] == 0.6);
  CHECK(p.ctcs[0].tau_min == 1.2);
  CHECK(p.ctcs[0].tau_max == 1.6);
  CHECK(p.ctcs[0].selector(0, 0) == 1.0);
  CHECK(p.ctcs[0].selector(0, 1) == 0.0);
  CHECK(p.cost.w_t == 1.0);
  CHECK(p.cost.Q_x.isZero());
  CHECK(p.cost.R_u(0, 0) == 0.5);

  OcpProblem q = double_integrator_benchmark(0.0, {1.0, 2.0});
  CHECK(q.ctcs[0].tau_min == 1.0);
  CHECK(q.ctcs[0].tau_max == 2.0);

  CHECK_THROWS_AS(double_integrator_benchmark(2.5), ProblemError);
  CHECK_THROWS_AS(double_integrator_benchmark(-0.1), ProblemError);
}

TEST_CASE("waypoint scenarios") {
  for (int sc : {1, 2}) {
    OcpProblem p = waypoint_problem(sc);
    CHECK(p.nx() == 6);
    CHECK(p.nu() == 3);
    REQUIRE(p.num_ctcs() == 4);
    for (const auto& c : p.ctcs) {
      REQUIRE(c.selector.rows() == 3);
      CHECK(c.selector.leftCols(3) == Eigen::MatrixXd::Identity(3, 3));
      CHECK(c.selector.rightCols(3).isZero());
      CHECK(c.tau_min < c.tau_max);
    }
    // At rest, 0.3 m above the first and last waypoints.
    CHECK(p.x0.head(3).isApprox(p.ctcs[0].target +
                                Eigen::Vector3d(0, 0, 0.3)));
    CHECK(p.xf.head(3).isApprox(p.ctcs[3].target +
                                Eigen::Vector3d(0, 0, 0.3)));
    CHECK(p.x0.tail(3).isZero());
    CHECK(p.xf.tail(3).isZero());
    CHECK(p.bounds.x_max.tail(3).isConstant(4.0));
    CHECK(p.bounds.u_max.isConstant(6.0));
    CHECK(p.cost.R_u.isApprox(0.005 * Eigen::MatrixXd::Identity(3, 3)));
  }

  OcpProblem p1 = waypoint_problem(1);
  CHECK(p1.ctcs[0].target.isApprox(Eigen::Vector3d(0.16, -1.03, 1.12)));
  CHECK(p1.ctcs[1].target.isApprox(Eigen::Vector3d(2.36, 0.55, 1.69)));
  CHECK(p1.ctcs[2].target.isApprox(Eigen::Vector3d(0.87, 1.80, 1.27)));
  CHECK(p1.ctcs[3].target.isApprox(Eigen::Vector3d(-1.87, 0.28, 1.63)));
  CHECK(p1.ctcs[3].tau_min == 4.0);
  CHECK(p1.ctcs[3].tau_max == 4.5);

  OcpProblem p2 = waypoint_problem(2);
  CHECK(p2.ctcs[0].target.isApprox(Eigen::Vector3d(0.17, -1.17, 1.33)));
  CHECK(p2.ctcs[3].target.isApprox(Eigen::Vector3d(-1.89, 0.30, 1.26)));
  CHECK(p2.ctcs[3].tau_min == 3.5);
  CHECK(p2.ctcs[3].tau_max == 4.0);

  CHECK_THROWS_AS(waypoint_problem(0), ProblemError);
  CHECK_THROWS_AS(waypoint_problem(3), ProblemError);
}

TEST_CASE("validate rejects broken instances") {
  OcpProblem p = double_integrator_benchmark(0.5);

  OcpProblem bad = p;
  bad.x0 = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(validate(bad), ProblemError);

  bad = p;
  bad.bounds.u_min[0] = 2.0;  // inverted box
  CHECK_THROWS_AS(validate(bad), ProblemError);

  bad = p;
  bad.x0[1] = 3.0;  // outside velocity bound
  CHECK_THROWS_AS(validate(bad), ProblemError);

  bad = p;
  bad.ctcs[0].tau_min = 2.0;  // tau_min > tau_max
  CHECK_THROWS_AS(validate(bad), ProblemError);

  bad = p;
  bad.ctcs.push_back(p.ctcs[0]);
  bad.ctcs[1].tau_min = 0.5;  // decreasing tau_min
  bad.ctcs[1].tau_max = 2.0;
  CHECK_THROWS_AS(validate(bad), ProblemError);

  bad = p;
  bad.ctcs[0].selector(0, 0) = 0.5;
  CHECK_THROWS_AS(validate(bad), ProblemError);
}

namespace {

void check_roundtrip(const OcpProblem& p) {
  std::stringstream ss;
  write_problem(p, ss);
  OcpProblem q = parse_problem(ss);
  CHECK(q.dynamics.A == p.dynamics.A);
  CHECK(q.dynamics.B == p.dynamics.B);
  CHECK(q.bounds.x_min == p.bounds.x_min);
  CHECK(q.bounds.x_max == p.bounds.x_max);
  CHECK(q.bounds.u_min == p.bounds.u_min);
  CHECK(q.bounds.u_max == p.bounds.u_max);
  CHECK(q.x0 == p.x0);
  CHECK(q.xf == p.xf);
  REQUIRE(q.num_ctcs() == p.num_ctcs());
  for (int l = 0; l < p.num_ctcs(); ++l) {
    CHECK(q.ctcs[l].selector == p.ctcs[l].selector);
    CHECK(q.ctcs[l].target == p.ctcs[l].target);
    CHECK(q.ctcs[l].tau_min == p.ctcs[l].tau_min);
    CHECK(q.ctcs[l].tau_max == p.ctcs[l].tau_max);
  }
  CHECK(q.cost.w_t == p.cost.w_t);
  CHECK(q.cost.Q_x == p.cost.Q_x);
  CHECK(q.cost.R_u == p.cost.R_u);
}

}  // namespace

TEST_CASE("problem text round-trip is exact") {
  check_roundtrip(double_integrator_benchmark(0.3));
  check_roundtrip(waypoint_problem(1));
  check_roundtrip(waypoint_problem(2));
  // Non-representable decimals survive via shortest round-trip formatting.
  OcpProblem p = double_integrator_benchmark(1.0 / 3.0, {1.1, 1.7});
  check_roundtrip(p);
}

TEST_CASE("parser tolerates comments and blank lines") {
  std::stringstream ss;
  write_problem(double_integrator_benchmark(0.5), ss);
  std::string text = "# leading comment\n\n" + ss.str() + "\n# trailing\n";
  std::stringstream in(text);
  OcpProblem q = parse_problem(in);
  CHECK(q.x0[1] == 0.5);
  CHECK(std::isinf(q.bounds.x_max[0]));  // "inf" parsed back
}

TEST_CASE("format_double") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-2.0) == "-2");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
  for (double v : {1.0 / 3.0, 0.6, 1e-17, -123.456e7, 2.2250738585072014e-308}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}
