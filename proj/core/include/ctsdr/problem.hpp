#ifndef CTSDR_PROBLEM_HPP
#define CTSDR_PROBLEM_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace ctsdr {

/// Thrown when a problem instance violates one of its invariants.
class ProblemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Continuous-time LTI dynamics xdot = A x + B u.
struct LtiDynamics {
  Eigen::MatrixXd A;  // n_x x n_x
  Eigen::MatrixXd B;  // n_x x n_u

  int nx() const { return static_cast<int>(A.rows()); }
  int nu() const { return static_cast<int>(B.cols()); }
};

/// Componentwise box bounds on state and input. Entries may be +-inf.
struct Bounds {
  Eigen::VectorXd x_min, x_max;
  Eigen::VectorXd u_min, u_max;
};

/// Equality S x(tau) = target at an internal crossing time tau, with
/// tau constrained to the window [tau_min, tau_max]. S has 0/1 unit rows
/// selecting the constrained state components.
struct CharacteristicTimeConstraint {
  Eigen::MatrixXd selector;  // rows x n_x, distinct unit rows
  Eigen::VectorXd target;
  double tau_min = 0.0;
  double tau_max = 0.0;
};

struct CostWeights {
  double w_t = 0.0;       // weight on total time
  Eigen::MatrixXd Q_x;    // state weight, PSD
  Eigen::MatrixXd R_u;    // input weight, PSD
};

/// A continuous-time OCP with boundary states and M characteristic-time
/// constraints ordered by nondecreasing tau_min.
struct OcpProblem {
  LtiDynamics dynamics;
  Bounds bounds;
  Eigen::VectorXd x0;
  Eigen::VectorXd xf;
  std::vector<CharacteristicTimeConstraint> ctcs;
  CostWeights cost;

  int nx() const { return dynamics.nx(); }
  int nu() const { return dynamics.nu(); }
  int num_ctcs() const { return static_cast<int>(ctcs.size()); }
};

/// Checks every type invariant and normalizes selector rows (exact 0/1
/// entries). Throws ProblemError on dimension mismatch, inverted bounds,
/// boundary states outside bounds, or windows whose tau_min decreases.
OcpProblem validate(const OcpProblem& problem);

/// Point-mass eco-driving benchmark: double integrator with one
/// characteristic-time constraint at travel distance 0.6, terminal state
/// [1, 0], v in [0, 2], u in [-1, 1], cost t_f + 1/2 int u^2.
/// The crossing window defaults to [1.2, 1.6].
OcpProblem double_integrator_benchmark(double v0,
                                       std::pair<double, double> window = {1.2, 1.6});

/// 3D waypoint-flight scenarios (1 or 2): per-axis double integrator with
/// four position waypoints and open time windows; start and finish at
/// rest hovering 0.3 m above waypoints 1 and 4. Velocity bounded by
/// +-4 m/s and acceleration by +-6 m/s^2 per axis; cost
/// t_f + 0.005 int |a|^2.
OcpProblem waypoint_problem(int scenario);

}  // namespace ctsdr

#endif
