#ifndef CTSDR_CONIC_HPP
#define CTSDR_CONIC_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace ctsdr {

/// Standard-form conic program
///     minimize    c' x
///     subject to  A x = b,  x in K,
/// where K is a product of PSD cones (one per block side) and a
/// nonnegative orthant of dimension nonneg_dim. PSD blocks are stored in
/// scaled-vectorization (svec) form: for a side-r block the upper
/// triangle is stored column-major with off-diagonal entries multiplied
/// by sqrt(2), so that dot products of svec vectors equal matrix inner
/// products.
struct ConicProgram {
  std::vector<int> psd_sides;
  int nonneg_dim = 0;
  Eigen::VectorXd c;
  Eigen::SparseMatrix<double, Eigen::RowMajor> A;
  Eigen::VectorXd b;

  static int svec_dim(int side) { return side * (side + 1) / 2; }
  int block_offset(int j) const;
  int nonneg_offset() const;
  int dim() const;
  int num_rows() const { return static_cast<int>(b.size()); }
};

/// Index of a svec coordinate inside one block: entry (p, q) with p <= q.
inline int svec_index(int p, int q) { return q * (q + 1) / 2 + p; }

/// svec <-> symmetric matrix conversions for one block.
Eigen::VectorXd sym_to_svec(const Eigen::MatrixXd& M);
Eigen::MatrixXd svec_to_sym(const Eigen::Ref<const Eigen::VectorXd>& v, int side);

/// Incremental builder used by the lifting and QP embedding layers.
/// Coefficients are given in "semantic entry" form: coeff * Y(p, q)
/// with p <= q referring to the single matrix entry, not its symmetric
/// double-count.
class ConicProgramBuilder {
 public:
  int add_psd_block(int side);
  int add_nonneg(int count = 1);  // returns index of first new scalar

  void objective_entry(int block, int p, int q, double coeff);
  void objective_nonneg(int idx, double coeff);
  void set_objective_constant(double v) { obj_const_ = v; }

  int new_row(double rhs);
  void row_entry(int row, int block, int p, int q, double coeff);
  void row_nonneg(int row, int idx, double coeff);

  ConicProgram build() const;
  double objective_constant() const { return obj_const_; }
  int num_rows() const { return static_cast<int>(rhs_.size()); }

 private:
  int col_of(int block, int p, int q) const;
  std::vector<int> sides_, offsets_;
  int nonneg_ = 0;
  std::vector<Eigen::Triplet<double>> obj_, mat_;
  std::vector<double> rhs_;
  double obj_const_ = 0.0;
};

enum class SolveStatus {
  optimal,
  infeasible,
  unbounded,
  max_iter,
  numerical_failure
};

std::string to_string(SolveStatus s);

struct SolverSettings {
  double eps_primal = 1e-8;
  double eps_dual = 1e-8;
  double eps_gap = 1e-8;
  double eps_infeas = 1e-8;
  int max_iterations = 200;
  double fraction_to_boundary = 0.99;
  double static_regularization = 1e-9;
  bool presolve = true;
  int presolve_row_limit = 6000;  // skip rank-revealing presolve above this
  bool verbose = false;
};

/// Per-iteration snapshot (normalized by tau), recorded for diagnostics.
struct IterateRecord {
  double primal_objective, dual_objective;
  double primal_residual, dual_residual, gap, mu;
};

struct SdpSolution {
  std::vector<Eigen::MatrixXd> blocks;  // primal PSD matrices
  Eigen::VectorXd slacks;               // nonnegative part of x
  Eigen::VectorXd y;                    // equality multipliers
  Eigen::VectorXd z;                    // dual cone variable (svec layout)
  double objective = 0.0;
  SolveStatus status = SolveStatus::numerical_failure;
  double primal_residual = 0.0, dual_residual = 0.0, rel_gap = 0.0;
  int iterations = 0;
  std::vector<IterateRecord> trace;
};

/// Abstract backend entry point; the embedded interior-point method is
/// the default implementation, external solver adapters may register
/// alternatives under a name.
class ConicBackend {
 public:
  virtual ~ConicBackend() = default;
  virtual SdpSolution solve(const ConicProgram& prog,
                            const SolverSettings& settings) = 0;
  virtual std::string name() const = 0;
};

/// Solves with the embedded Nesterov-Todd predictor-corrector method on
/// the homogeneous self-dual embedding.
SdpSolution solve(const ConicProgram& prog, const SolverSettings& settings = {});

/// (primal, dual, gap) residuals of a candidate solution:
/// inf-norm of A x - b, inf-norm of c - A' y - z, and
/// |c'x - b'y| / (1 + |c'x|).
struct Residuals {
  double primal, dual, gap;
};
Residuals residuals(const ConicProgram& prog, const SdpSolution& sol);

/// Removes numerically dependent equality rows (pivoted Cholesky of
/// A A' with relative threshold 1e-10). The recovery map restores
/// full-space dual multipliers with zeros on removed rows.
struct PresolveResult {
  ConicProgram reduced;
  std::vector<int> kept_rows;
  int original_rows = 0;
  Eigen::VectorXd restore_duals(const Eigen::VectorXd& reduced_y) const;
};
PresolveResult presolve(const ConicProgram& prog, double threshold = 1e-10);

/// Registry for external solver adapters ("embedded" is always present).
ConicBackend& backend(const std::string& name = "embedded");
void register_backend(std::unique_ptr<ConicBackend> b);
std::vector<std::string> backend_names();

}  // namespace ctsdr

#endif
