#include "ctsdr/problem.hpp"

#include <cmath>
#include <set>
#include <string>

namespace ctsdr {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw ProblemError(msg);
}

bool within_bounds(const Eigen::VectorXd& v, const Eigen::VectorXd& lo,
                   const Eigen::VectorXd& hi) {
  for (int i = 0; i < v.size(); ++i) {
    if (v[i] < lo[i] || v[i] > hi[i]) return false;
  }
  return true;
}

}  // namespace

OcpProblem validate(const OcpProblem& problem) {
  OcpProblem p = problem;
  const int nx = p.dynamics.nx();
  const int nu = p.dynamics.nu();
  require(nx >= 1 && nu >= 1, "state and input dimensions must be positive");
  require(p.dynamics.A.rows() == nx && p.dynamics.A.cols() == nx,
          "A must be n_x x n_x");
  require(p.dynamics.B.rows() == nx, "B row count must equal n_x");

  require(p.bounds.x_min.size() == nx && p.bounds.x_max.size() == nx,
          "state bound dimension mismatch");
  require(p.bounds.u_min.size() == nu && p.bounds.u_max.size() == nu,
          "input bound dimension mismatch");
  for (int i = 0; i < nx; ++i)
    require(p.bounds.x_min[i] <= p.bounds.x_max[i], "inverted state bound");
  for (int i = 0; i < nu; ++i)
    require(p.bounds.u_min[i] <= p.bounds.u_max[i], "inverted input bound");

  require(p.x0.size() == nx && p.xf.size() == nx,
          "boundary state dimension mismatch");
  require(within_bounds(p.x0, p.bounds.x_min, p.bounds.x_max),
          "x0 outside state bounds");
  require(within_bounds(p.xf, p.bounds.x_min, p.bounds.x_max),
          "xf outside state bounds");

  require(p.cost.Q_x.rows() == nx && p.cost.Q_x.cols() == nx,
          "Q_x must be n_x x n_x");
  require(p.cost.R_u.rows() == nu && p.cost.R_u.cols() == nu,
          "R_u must be n_u x n_u");
  require(p.cost.w_t >= 0.0, "w_t must be nonnegative");
  require(p.cost.Q_x.isApprox(p.cost.Q_x.transpose(), 1e-12),
          "Q_x must be symmetric");
  require(p.cost.R_u.isApprox(p.cost.R_u.transpose(), 1e-12),
          "R_u must be symmetric");
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eq(p.cost.Q_x),
        er(p.cost.R_u);
    require(eq.eigenvalues().minCoeff() >= -1e-10, "Q_x must be PSD");
    require(er.eigenvalues().minCoeff() >= -1e-10, "R_u must be PSD");
  }

  double prev_tau_min = 0.0;
  for (auto& ctc : p.ctcs) {
    require(ctc.tau_min >= 0.0 && ctc.tau_min <= ctc.tau_max,
            "window-order violation: need 0 <= tau_min <= tau_max");
    require(ctc.tau_min >= prev_tau_min,
            "window-order violation: tau_min must be nondecreasing");
    prev_tau_min = ctc.tau_min;

    require(ctc.selector.cols() == nx, "selector column count mismatch");
    require(ctc.target.size() == ctc.selector.rows(),
            "target dimension must equal selector row count");
    std::set<int> picked;
    for (int r = 0; r < ctc.selector.rows(); ++r) {
      int hit = -1;
      for (int c = 0; c < nx; ++c) {
        double v = ctc.selector(r, c);
        if (std::abs(v) < 1e-9) {
          ctc.selector(r, c) = 0.0;
        } else if (std::abs(v - 1.0) < 1e-9) {
          require(hit < 0, "selector row must be a unit row");
          ctc.selector(r, c) = 1.0;
          hit = c;
        } else {
          throw ProblemError("selector entries must be 0 or 1");
        }
      }
      require(hit >= 0, "selector row selects nothing");
      require(picked.insert(hit).second, "selector rows must be distinct");
    }
  }
  return p;
}

OcpProblem double_integrator_benchmark(double v0,
                                       std::pair<double, double> window) {
  if (v0 < 0.0 || v0 > 2.0)
    throw ProblemError("v0 outside speed bounds [0, 2]");
  OcpProblem p;
  p.dynamics.A = (Eigen::MatrixXd(2, 2) << 0, 1, 0, 0).finished();
  p.dynamics.B = (Eigen::MatrixXd(2, 1) << 0, 1).finished();
  const double inf = std::numeric_limits<double>::infinity();
  p.bounds.x_min = (Eigen::VectorXd(2) << -inf, 0.0).finished();
  p.bounds.x_max = (Eigen::VectorXd(2) << inf, 2.0).finished();
  p.bounds.u_min = Eigen::VectorXd::Constant(1, -1.0);
  p.bounds.u_max = Eigen::VectorXd::Constant(1, 1.0);
  p.x0 = (Eigen::VectorXd(2) << 0.0, v0).finished();
  p.xf = (Eigen::VectorXd(2) << 1.0, 0.0).finished();

  CharacteristicTimeConstraint ctc;
  ctc.selector = (Eigen::MatrixXd(1, 2) << 1, 0).finished();
  ctc.target = Eigen::VectorXd::Constant(1, 0.6);
  ctc.tau_min = window.first;
  ctc.tau_max = window.second;
  p.ctcs.push_back(ctc);

  p.cost.w_t = 1.0;
  p.cost.Q_x = Eigen::MatrixXd::Zero(2, 2);
  p.cost.R_u = Eigen::MatrixXd::Constant(1, 1, 0.5);
  return validate(p);
}

OcpProblem waypoint_problem(int scenario) {
  if (scenario != 1 && scenario != 2)
    throw ProblemError("scenario must be 1 or 2");

  struct Wp {
    double x, y, z, lo, hi;
  };
  // Waypoint positions and open time windows for the two flight scenarios.
  static const Wp scenario1[4] = {{0.16, -1.03, 1.12, 0.0, 0.5},
                                  {2.36, 0.55, 1.69, 1.8, 3.0},
                                  {0.87, 1.80, 1.27, 2.5, 3.0},
                                  {-1.87, 0.28, 1.63, 4.0, 4.5}};
  static const Wp scenario2[4] = {{0.17, -1.17, 1.33, 0.0, 0.5},
                                  {2.42, 0.60, 1.35, 1.8, 3.0},
                                  {0.78, 1.76, 1.89, 2.5, 3.0},
                                  {-1.89, 0.30, 1.26, 3.5, 4.0}};
  const Wp* wps = (scenario == 1) ? scenario1 : scenario2;

  const int nx = 6, nu = 3;
  OcpProblem p;
  p.dynamics.A = Eigen::MatrixXd::Zero(nx, nx);
  p.dynamics.A.topRightCorner(3, 3) = Eigen::MatrixXd::Identity(3, 3);
  p.dynamics.B = Eigen::MatrixXd::Zero(nx, nu);
  p.dynamics.B.bottomRows(3) = Eigen::MatrixXd::Identity(3, 3);

  const double inf = std::numeric_limits<double>::infinity();
  p.bounds.x_min = Eigen::VectorXd::Constant(nx, -inf);
  p.bounds.x_max = Eigen::VectorXd::Constant(nx, inf);
  p.bounds.x_min.tail(3).setConstant(-4.0);
  p.bounds.x_max.tail(3).setConstant(4.0);
  p.bounds.u_min = Eigen::VectorXd::Constant(nu, -6.0);
  p.bounds.u_max = Eigen::VectorXd::Constant(nu, 6.0);

  for (int l = 0; l < 4; ++l) {
    CharacteristicTimeConstraint ctc;
    ctc.selector = Eigen::MatrixXd::Zero(3, nx);
    ctc.selector(0, 0) = ctc.selector(1, 1) = ctc.selector(2, 2) = 1.0;
    ctc.target = (Eigen::VectorXd(3) << wps[l].x, wps[l].y, wps[l].z).finished();
    ctc.tau_min = wps[l].lo;
    ctc.tau_max = wps[l].hi;
    p.ctcs.push_back(ctc);
  }

  // Start and finish at rest, hovering 0.3 m above waypoints 1 and 4.
  const Eigen::Vector3d hover(0.0, 0.0, 0.3);
  p.x0 = Eigen::VectorXd::Zero(nx);
  p.x0.head(3) = p.ctcs[0].target + hover;
  p.xf = Eigen::VectorXd::Zero(nx);
  p.xf.head(3) = p.ctcs[3].target + hover;

  p.cost.w_t = 1.0;
  p.cost.Q_x = Eigen::MatrixXd::Zero(nx, nx);
  p.cost.R_u = 0.005 * Eigen::MatrixXd::Identity(nu, nu);
  return validate(p);
}

}  // namespace ctsdr
