#ifndef CTSDR_REFINE_HPP
#define CTSDR_REFINE_HPP

#include "ctsdr/extraction.hpp"
#include "ctsdr/qp.hpp"

namespace ctsdr {

struct SqpSettings {
  int max_iter = 100;
  double kkt_tol = 1e-8;
  double feas_tol = 1e-6;
  double tr_init = 1.0;
  double tr_min = 1e-12;
  double tr_max = 10.0;
  double penalty_init = 10.0;
};

enum class RefineStatus { converged, max_iter, restoration_failure };

struct RefineResult {
  TrajectorySolution trajectory;
  RefineStatus status = RefineStatus::max_iter;
  int iterations = 0;
  double kkt_residual = 0.0;
};

/// Trust-region SQP on the bilinear NLP: exact-Hessian convex quadratic
/// subproblems with L1-elastic constraint handling, accepted through an
/// exact-penalty merit function.
RefineResult refine(const TranscribedNlp& nlp, const NlpPoint& init,
                    const SqpSettings& settings = {});

/// Convex QP over (states, controls) for fixed segment durations; used
/// by the baseline sweep and the brute-force test oracle. Equalities
/// cover dynamics, continuity, boundary and selector rows; inequalities
/// the finite state/control boxes.
QpProblem fixed_theta_qp(const TranscribedNlp& nlp,
                         const Eigen::VectorXd& thetas);

/// Reassembles an NlpPoint from a fixed-theta QP solution vector.
NlpPoint fixed_theta_point(const TranscribedNlp& nlp,
                           const Eigen::VectorXd& thetas,
                           const Eigen::VectorXd& vars);

struct BaselineSpec {
  /// Fixed crossing times; empty means window midpoints.
  Eigen::VectorXd tau_hat;
  int sweep_points = 50;
  int zoom_rounds = 3;  // local re-sweeps around the best candidate
};

/// Fixed-crossing-time baseline: thetas of the anchored segments are
/// determined by tau_hat, the final-segment duration is swept over a
/// log-spaced scalar grid (then locally zoomed), each candidate being a
/// convex QP. Throws when no candidate is feasible.
TrajectorySolution solve_baseline(const OcpProblem& problem,
                                  const ShootingGrid& grid,
                                  const BaselineSpec& spec = {},
                                  const TranscriptionOptions& topt = {});

struct PipelineOptions {
  AssembleOptions assemble;
  SolverSettings solver;
  SqpSettings sqp;
};

struct PipelineResult {
  double J_cvx = 0.0;   // SDP lower bound
  double J_rcvx = 0.0;  // refined feasible cost
  TightnessReport report;
  ExtractionResult extraction;
  TrajectorySolution refined;
  SolveStatus sdp_status = SolveStatus::numerical_failure;
  RefineStatus refine_status = RefineStatus::max_iter;
  int sdp_iterations = 0;
  double assemble_ms = 0.0, solve_ms = 0.0, extract_ms = 0.0, refine_ms = 0.0;
};

/// transcribe -> assemble -> solve -> extract -> refine.
PipelineResult solve_pipeline(const OcpProblem& problem,
                              const ShootingGrid& grid,
                              const PipelineOptions& options = {});

}  // namespace ctsdr

#endif
