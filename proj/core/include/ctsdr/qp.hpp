#ifndef CTSDR_QP_HPP
#define CTSDR_QP_HPP

#include <Eigen/Dense>

namespace ctsdr {

/// Dense convex quadratic program
///     minimize    1/2 d' P d + q' d
///     subject to  E d = f,  C d <= u.
struct QpProblem {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd E;
  Eigen::VectorXd f;
  Eigen::MatrixXd C;
  Eigen::VectorXd u;

  int num_vars() const { return static_cast<int>(q.size()); }
};

struct QpSettings {
  double tol = 1e-9;
  int max_iterations = 100;
  double regularization = 1e-9;
};

enum class QpStatus { optimal, max_iter, numerical_failure };

struct QpSolution {
  Eigen::VectorXd d;       // primal point
  Eigen::VectorXd y;       // equality multipliers
  Eigen::VectorXd lambda;  // inequality multipliers (>= 0)
  Eigen::VectorXd s;       // inequality slacks (>= 0)
  double objective = 0.0;
  QpStatus status = QpStatus::numerical_failure;
  int iterations = 0;
};

/// Infeasible-start predictor-corrector interior-point method. The
/// problem must be convex (P positive semidefinite); inconsistent
/// constraints surface as max_iter.
QpSolution solve_qp(const QpProblem& qp, const QpSettings& settings = {});

/// L1-elastic relaxation: equalities get signed slack pairs, inequalities
/// one-sided slacks, all charged rho in the objective. Always feasible,
/// so the elastic mass doubles as an infeasibility certificate for the
/// original program.
struct ElasticQpSolution {
  QpSolution inner;           // solution of the augmented program
  Eigen::VectorXd d;          // original variables
  double elastic_mass = 0.0;  // sum of elastic magnitudes
  double objective = 0.0;     // original objective at d
};

ElasticQpSolution solve_qp_elastic(const QpProblem& qp, double rho = 1e6,
                                   const QpSettings& settings = {});

}  // namespace ctsdr

#endif
