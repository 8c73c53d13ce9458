#ifndef CTSDR_LIFTING_HPP
#define CTSDR_LIFTING_HPP

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ctsdr/conic.hpp"
#include "ctsdr/transcription.hpp"

namespace ctsdr {

/// Index layout of one scaled lifted block. The lifted vector of an
/// interval is y = [1; theta; w; theta w] with w = (x_k, x_{k+1}, u_k),
/// and the block stores (1/theta) y y'. Row INV carries the 1/theta
/// scale, ONE the unscaled copy, W the w monomials and TH the theta-w
/// monomials.
struct LiftIndex {
  int n_x = 0, n_u = 0;

  int d() const { return 2 * n_x + n_u; }
  int r() const { return 2 + 2 * d(); }

  static constexpr int INV = 0;
  static constexpr int ONE = 1;
  int W(int j) const { return 2 + j; }
  int TH(int j) const { return 2 + d() + j; }

  /// Slices of the w range: i_a holds the predicted next state
  /// x_{k+1}, i_b the interval's initial state x_k.
  int i_a(int j) const { return W(n_x + j); }
  int i_b(int j) const { return W(j); }
};

LiftIndex lift_index(int n_x, int n_u);

/// One lifted block with accessors from semantic monomials to matrix
/// entries (p, q), p <= q, of the scaled lifted matrix.
struct LiftedBlock {
  int segment = 0, interval = 0;  // interval index local to its segment
  LiftIndex index;

  using Entry = std::pair<int, int>;
  Entry inv_theta() const { return {LiftIndex::INV, LiftIndex::INV}; }
  Entry unit() const { return {LiftIndex::INV, LiftIndex::ONE}; }
  Entry theta() const { return {LiftIndex::ONE, LiftIndex::ONE}; }
  Entry w_over_theta(int j) const { return {LiftIndex::INV, index.W(j)}; }
  Entry w(int j) const { return {LiftIndex::ONE, index.W(j)}; }
  Entry theta_w(int j) const { return {LiftIndex::ONE, index.TH(j)}; }
  Entry ww_over_theta(int j, int l) const {
    return {index.W(std::min(j, l)), index.W(std::max(j, l))};
  }
  Entry ww(int j, int l) const { return {index.W(j), index.TH(l)}; }
  Entry theta_ww(int j, int l) const {
    return {index.TH(std::min(j, l)), index.TH(std::max(j, l))};
  }
};

/// One coefficient on a semantic entry of one block.
struct LinearTerm {
  int block;
  int p, q;
  double coeff;
};

struct LinearConstraint {
  std::vector<LinearTerm> terms;
  double rhs = 0.0;
  std::string family;
};

struct AssembleOptions {
  /// When true, the matrix-level multiplied families (dynamics,
  /// boundary and continuity at the ww levels) are dropped, keeping a
  /// valid but looser vector-level relaxation that scales to large
  /// lifted dimensions.
  bool pruned = false;
};

/// The Fast SDR before slack conversion: per-interval PSD blocks, a
/// linear objective and sparse linear equalities / inequalities
/// (inequalities read sum of terms >= rhs).
struct LiftedSdp {
  LiftIndex index;
  ShootingGrid grid;
  TranscriptionOptions options;
  std::vector<LiftedBlock> blocks;
  std::vector<LinearTerm> objective;
  double objective_constant = 0.0;
  std::vector<LinearConstraint> equalities;
  std::vector<LinearConstraint> inequalities;

  int block_of(int segment, int interval) const;
  /// Counting routine: rows per constraint family.
  std::map<std::string, int> family_counts() const;
};

LiftedSdp assemble(const TranscribedNlp& nlp, const AssembleOptions& options = {});

/// Inequality-to-slack conversion into the conic standard form. Slack i
/// of the nonnegative cone belongs to inequality i, equalities keep
/// their order and come first.
struct StandardForm {
  ConicProgram program;
  int slack_count = 0;
};

StandardForm standard_form(const LiftedSdp& sdp);

/// Numeric lifted blocks (1/theta) y y' of a point; throws ProblemError
/// when any theta is below the floor.
std::vector<Eigen::MatrixXd> lift_point(const NlpPoint& point,
                                        const ShootingGrid& grid,
                                        const LiftIndex& index,
                                        double theta_floor = 1e-4);

/// Value of a linear functional at numeric blocks.
double eval_terms(const std::vector<LinearTerm>& terms,
                  const std::vector<Eigen::MatrixXd>& blocks);

struct LiftedEval {
  double objective = 0.0;
  double max_equality_violation = 0.0;
  double max_inequality_violation = 0.0;
};

LiftedEval evaluate_lifted(const LiftedSdp& sdp,
                           const std::vector<Eigen::MatrixXd>& blocks);

/// Self-describing sparse text dump (block sides; constraint
/// coefficients as "id block row col value"; right-hand sides).
void dump_sdp(const LiftedSdp& sdp, std::ostream& os);

}  // namespace ctsdr

#endif
