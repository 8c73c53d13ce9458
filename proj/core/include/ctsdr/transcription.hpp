#ifndef CTSDR_TRANSCRIPTION_HPP
#define CTSDR_TRANSCRIPTION_HPP

#include <map>
#include <string>
#include <vector>

#include "ctsdr/problem.hpp"

namespace ctsdr {

/// Numbers of shooting intervals per segment; one segment per
/// characteristic-time constraint plus the final segment.
struct ShootingGrid {
  std::vector<int> segment_counts;

  int num_segments() const { return static_cast<int>(segment_counts.size()); }
  int total_intervals() const;
  /// Index of the first interval of segment i (0-based).
  int segment_begin(int i) const;
};

/// Per-interval variable w_k = (x_k, x_{k+1}, u_k) of dimension 2 n_x + n_u.
/// F w - K theta w = 0 encodes the forward-Euler step.
struct IntervalData {
  Eigen::MatrixXd F;  // n_x x d
  Eigen::MatrixXd K;  // n_x x d
};

/// Rows of G w - g >= 0 for the state/input boxes of one interval
/// (infinite bounds dropped).
struct BoxRows {
  Eigen::MatrixXd G;
  Eigen::VectorXd g;
};

struct TranscriptionOptions {
  double theta_floor = 1e-4;  // lower duration bound for 1/theta lifting
  double theta_max = 1.0;     // conditioning cap on segment step length
  double feasibility_tol = 1e-6;
  // Windows are open intervals; the transcribed feasible set shrinks
  // each window by this margin so crossing times stay strictly inside.
  double window_margin = 1e-6;
};

/// The finite-dimensional bilinear NLP obtained by time-scaling direct
/// multiple shooting.
struct TranscribedNlp {
  OcpProblem problem;
  ShootingGrid grid;
  TranscriptionOptions options;
  IntervalData interval;  // identical for every interval (LTI dynamics)
  BoxRows boxes;          // identical for every interval

  int nx() const { return problem.nx(); }
  int nu() const { return problem.nu(); }
  int wdim() const { return 2 * nx() + nu(); }
};

/// Decision variables of the NLP: states per node, controls per interval,
/// one duration theta per segment. Node k of segment i is states[i][k],
/// k = 0..N_i (so each segment carries N_i + 1 nodes).
struct NlpPoint {
  std::vector<std::vector<Eigen::VectorXd>> states;
  std::vector<std::vector<Eigen::VectorXd>> controls;
  Eigen::VectorXd thetas;
};

/// Signed residuals per constraint family. Equalities report values,
/// inequalities report violation magnitudes (0 when satisfied).
struct EvalResult {
  double cost = 0.0;
  std::map<std::string, Eigen::VectorXd> residuals;
  double max_residual() const;
  bool feasible(double tol) const { return max_residual() <= tol; }
};

TranscribedNlp transcribe(const OcpProblem& problem, const ShootingGrid& grid,
                          const TranscriptionOptions& options = {});

/// One forward-Euler step x + theta (A x + B u).
Eigen::VectorXd euler_step(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                           double theta, const LtiDynamics& dyn);

/// Stage cost theta (x' Q_x x + u' R_u u).
double stage_cost(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                  double theta, const CostWeights& cost);

/// Accumulated duration tau_i = sum_{l<=i} N_l theta_l for 1 <= i <= M;
/// i = M+1 yields the total time t_f.
double crossing_time(const Eigen::VectorXd& thetas, const ShootingGrid& grid,
                     int i);

EvalResult evaluate(const TranscribedNlp& nlp, const NlpPoint& point);

/// Zero-initialized point with dimensions matching the grid.
NlpPoint make_point(const TranscribedNlp& nlp);

/// Point built by forward simulation from x0 under the given controls
/// and thetas (dynamics residual zero by construction).
NlpPoint simulate(const TranscribedNlp& nlp,
                  const std::vector<std::vector<Eigen::VectorXd>>& controls,
                  const Eigen::VectorXd& thetas);

}  // namespace ctsdr

#endif
