#include "ctsdr/conic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>

namespace ctsdr {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;
}

int ConicProgram::block_offset(int j) const {
  int off = 0;
  for (int i = 0; i < j; ++i) off += svec_dim(psd_sides[i]);
  return off;
}

int ConicProgram::nonneg_offset() const {
  return block_offset(static_cast<int>(psd_sides.size()));
}

int ConicProgram::dim() const { return nonneg_offset() + nonneg_dim; }

Eigen::VectorXd sym_to_svec(const Eigen::MatrixXd& M) {
  const int r = static_cast<int>(M.rows());
  Eigen::VectorXd v(ConicProgram::svec_dim(r));
  int at = 0;
  for (int q = 0; q < r; ++q)
    for (int p = 0; p <= q; ++p)
      v[at++] = (p == q) ? M(p, q) : kSqrt2 * 0.5 * (M(p, q) + M(q, p));
  return v;
}

Eigen::MatrixXd svec_to_sym(const Eigen::Ref<const Eigen::VectorXd>& v,
                            int side) {
  Eigen::MatrixXd M(side, side);
  int at = 0;
  for (int q = 0; q < side; ++q)
    for (int p = 0; p <= q; ++p) {
      double x = (p == q) ? v[at] : v[at] / kSqrt2;
      M(p, q) = M(q, p) = x;
      ++at;
    }
  return M;
}

// ---------------------------------------------------------------------------
// Builder

int ConicProgramBuilder::add_psd_block(int side) {
  if (side < 1) throw std::invalid_argument("PSD block side must be positive");
  offsets_.push_back(offsets_.empty()
                         ? 0
                         : offsets_.back() + ConicProgram::svec_dim(sides_.back()));
  sides_.push_back(side);
  return static_cast<int>(sides_.size()) - 1;
}

int ConicProgramBuilder::add_nonneg(int count) {
  int first = nonneg_;
  nonneg_ += count;
  return first;
}

int ConicProgramBuilder::col_of(int block, int p, int q) const {
  if (p > q) std::swap(p, q);
  return offsets_[block] + svec_index(p, q);
}

void ConicProgramBuilder::objective_entry(int block, int p, int q,
                                          double coeff) {
  double v = (p == q) ? coeff : coeff / kSqrt2;
  obj_.emplace_back(0, col_of(block, p, q), v);
}

void ConicProgramBuilder::objective_nonneg(int idx, double coeff) {
  obj_.emplace_back(0, -(idx + 1), coeff);  // resolved in build()
}

int ConicProgramBuilder::new_row(double rhs) {
  rhs_.push_back(rhs);
  return static_cast<int>(rhs_.size()) - 1;
}

void ConicProgramBuilder::row_entry(int row, int block, int p, int q,
                                    double coeff) {
  double v = (p == q) ? coeff : coeff / kSqrt2;
  mat_.emplace_back(row, col_of(block, p, q), v);
}

void ConicProgramBuilder::row_nonneg(int row, int idx, double coeff) {
  mat_.emplace_back(row, -(idx + 1), coeff);
}

ConicProgram ConicProgramBuilder::build() const {
  ConicProgram prog;
  prog.psd_sides = sides_;
  prog.nonneg_dim = nonneg_;
  const int nn_off = offsets_.empty()
                         ? 0
                         : offsets_.back() + ConicProgram::svec_dim(sides_.back());
  const int n = nn_off + nonneg_;
  const int m = static_cast<int>(rhs_.size());

  auto fix = [&](const Eigen::Triplet<double>& t) {
    int col = t.col() < 0 ? nn_off - t.col() - 1 : t.col();
    return Eigen::Triplet<double>(t.row(), col, t.value());
  };

  prog.c = Eigen::VectorXd::Zero(n);
  for (const auto& t : obj_) prog.c[fix(t).col()] += t.value();

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(mat_.size());
  for (const auto& t : mat_) trips.push_back(fix(t));
  prog.A.resize(m, n);
  prog.A.setFromTriplets(trips.begin(), trips.end());
  prog.b = Eigen::Map<const Eigen::VectorXd>(rhs_.data(), m);
  return prog;
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Embedded interior-point solver (Nesterov-Todd scaling, Mehrotra
// predictor-corrector on the homogeneous self-dual embedding).

namespace {

struct Layout {
  std::vector<int> sides, offsets;
  int nn_off = 0, nn_dim = 0, n = 0;
  double barrier = 0.0;  // sum of block sides + nonneg count

  explicit Layout(const ConicProgram& p) {
    sides = p.psd_sides;
    int off = 0;
    for (int s : sides) {
      offsets.push_back(off);
      off += ConicProgram::svec_dim(s);
      barrier += s;
    }
    nn_off = off;
    nn_dim = p.nonneg_dim;
    n = off + nn_dim;
    barrier += nn_dim;
  }
};

struct BlockScaling {
  Eigen::MatrixXd T, Th, Thi;      // NT point, its sqrt and inverse sqrt
  Eigen::MatrixXd Q;               // eigenvectors of lambda
  Eigen::VectorXd sigma;           // eigenvalues of lambda (positive)
};

struct Scaling {
  std::vector<BlockScaling> blocks;
  Eigen::VectorXd d, lam_nn;  // nonneg cone: d = sqrt(x/z), lam = sqrt(x z)
  bool ok = true;
};

Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& M, Eigen::MatrixXd* inv) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(1e-300);
  Eigen::MatrixXd half =
      es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  if (inv)
    *inv = es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() *
           es.eigenvectors().transpose();
  return half;
}

Scaling compute_scaling(const Layout& L, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& z) {
  Scaling W;
  W.blocks.resize(L.sides.size());
  for (size_t j = 0; j < L.sides.size(); ++j) {
    const int r = L.sides[j], off = L.offsets[j];
    Eigen::MatrixXd X = svec_to_sym(x.segment(off, ConicProgram::svec_dim(r)), r);
    Eigen::MatrixXd Z = svec_to_sym(z.segment(off, ConicProgram::svec_dim(r)), r);
    Eigen::LLT<Eigen::MatrixXd> llt(X);
    if (llt.info() != Eigen::Success) {
      W.ok = false;
      return W;
    }
    Eigen::MatrixXd Lx = llt.matrixL();
    Eigen::MatrixXd M = Lx.transpose() * Z * Lx;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    if (es.eigenvalues().minCoeff() <= 0.0) {
      W.ok = false;
      return W;
    }
    Eigen::MatrixXd G = es.eigenvectors() *
                        es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                        es.eigenvectors().transpose();
    BlockScaling& bs = W.blocks[j];
    bs.T = Lx * G * Lx.transpose();
    bs.T = 0.5 * (bs.T + bs.T.transpose());
    bs.Th = sym_sqrt(bs.T, &bs.Thi);
    Eigen::MatrixXd lam = bs.Thi * X * bs.Thi;
    lam = 0.5 * (lam + lam.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> el(lam);
    if (el.eigenvalues().minCoeff() <= 0.0) {
      W.ok = false;
      return W;
    }
    bs.Q = el.eigenvectors();
    bs.sigma = el.eigenvalues();
  }
  if (L.nn_dim > 0) {
    Eigen::VectorXd xs = x.tail(L.nn_dim), zs = z.tail(L.nn_dim);
    if (xs.minCoeff() <= 0.0 || zs.minCoeff() <= 0.0) {
      W.ok = false;
      return W;
    }
    W.d = (xs.cwiseQuotient(zs)).cwiseSqrt();
    W.lam_nn = (xs.cwiseProduct(zs)).cwiseSqrt();
  }
  return W;
}

// H v with H = W'W: per block T * V * T, nonneg d^2 .* v.
Eigen::VectorXd apply_H(const Layout& L, const Scaling& W,
                        const Eigen::VectorXd& v) {
  Eigen::VectorXd out(L.n);
  for (size_t j = 0; j < L.sides.size(); ++j) {
    const int r = L.sides[j], off = L.offsets[j], t = ConicProgram::svec_dim(r);
    Eigen::MatrixXd V = svec_to_sym(v.segment(off, t), r);
    Eigen::MatrixXd M = W.blocks[j].T * V * W.blocks[j].T;
    out.segment(off, t) = sym_to_svec(0.5 * (M + M.transpose()));
  }
  if (L.nn_dim > 0)
    out.tail(L.nn_dim) =
        W.d.array().square() * v.tail(L.nn_dim).array();
  return out;
}

// W^{-1} v (scale primal-side) or W v (scale dual-side).
Eigen::VectorXd apply_Wscale(const Layout& L, const Scaling& W,
                             const Eigen::VectorXd& v, bool inverse) {
  Eigen::VectorXd out(L.n);
  for (size_t j = 0; j < L.sides.size(); ++j) {
    const int r = L.sides[j], off = L.offsets[j], t = ConicProgram::svec_dim(r);
    const Eigen::MatrixXd& S = inverse ? W.blocks[j].Thi : W.blocks[j].Th;
    Eigen::MatrixXd V = svec_to_sym(v.segment(off, t), r);
    Eigen::MatrixXd M = S * V * S;
    out.segment(off, t) = sym_to_svec(0.5 * (M + M.transpose()));
  }
  if (L.nn_dim > 0) {
    if (inverse)
      out.tail(L.nn_dim) = v.tail(L.nn_dim).cwiseQuotient(W.d);
    else
      out.tail(L.nn_dim) = v.tail(L.nn_dim).cwiseProduct(W.d);
  }
  return out;
}

// Solve lambda o u = r in the scaled space.
Eigen::VectorXd jordan_solve(const Layout& L, const Scaling& W,
                             const Eigen::VectorXd& r) {
  Eigen::VectorXd out(L.n);
  for (size_t j = 0; j < L.sides.size(); ++j) {
    const int rr = L.sides[j], off = L.offsets[j],
              t = ConicProgram::svec_dim(rr);
    const BlockScaling& bs = W.blocks[j];
    Eigen::MatrixXd R = bs.Q.transpose() * svec_to_sym(r.segment(off, t), rr) * bs.Q;
    for (int a = 0; a < rr; ++a)
      for (int b2 = 0; b2 < rr; ++b2)
        R(a, b2) *= 2.0 / (bs.sigma[a] + bs.sigma[b2]);
    Eigen::MatrixXd U = bs.Q * R * bs.Q.transpose();
    out.segment(off, t) = sym_to_svec(0.5 * (U + U.transpose()));
  }
  if (L.nn_dim > 0)
    out.tail(L.nn_dim) = r.tail(L.nn_dim).cwiseQuotient(W.lam_nn);
  return out;
}

// Jordan product u o v in scaled space.
Eigen::VectorXd jordan_product(const Layout& L, const Eigen::VectorXd& u,
                               const Eigen::VectorXd& v) {
  Eigen::VectorXd out(L.n);
  for (size_t j = 0; j < L.sides.size(); ++j) {
    const int r = L.sides[j], off = L.offsets[j], t = ConicProgram::svec_dim(r);
    Eigen::MatrixXd U = svec_to_sym(u.segment(off, t), r);
    Eigen::MatrixXd V = svec_to_sym(v.segment(off, t), r);
    out.segment(off, t) = sym_to_svec(0.5 * (U * V + V * U));
  }
  if (L.nn_dim > 0)
    out.tail(L.nn_dim) = u.tail(L.nn_dim).cwiseProduct(v.tail(L.nn_dim));
  return out;
}

// svec of lambda o lambda, and the identity element.
Eigen::VectorXd lambda_square(const Layout& L, const Scaling& W) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(L.n);
  for (size_t j = 0; j < L.sides.size(); ++j) {
    const int r = L.sides[j], off = L.offsets[j], t = ConicProgram::svec_dim(r);
    const BlockScaling& bs = W.blocks[j];
    Eigen::MatrixXd M =
        bs.Q * bs.sigma.array().square().matrix().asDiagonal() * bs.Q.transpose();
    out.segment(off, t) = sym_to_svec(0.5 * (M + M.transpose()));
  }
  if (L.nn_dim > 0)
    out.tail(L.nn_dim) = W.lam_nn.array().square();
  return out;
}

Eigen::VectorXd cone_identity(const Layout& L) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(L.n);
  for (size_t j = 0; j < L.sides.size(); ++j)
    for (int p = 0; p < L.sides[j]; ++p)
      e[L.offsets[j] + svec_index(p, p)] = 1.0;
  if (L.nn_dim > 0) e.tail(L.nn_dim).setOnes();
  return e;
}

// Maximum alpha with lambda + alpha * D staying in the cone, where D is
// a direction expressed in the scaled space.
double max_step_scaled(const Layout& L, const Scaling& W,
                       const Eigen::VectorXd& D) {
  double amax = std::numeric_limits<double>::infinity();
  for (size_t j = 0; j < L.sides.size(); ++j) {
    const int r = L.sides[j], off = L.offsets[j], t = ConicProgram::svec_dim(r);
    const BlockScaling& bs = W.blocks[j];
    Eigen::VectorXd isq = bs.sigma.cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd N = isq.asDiagonal() * bs.Q.transpose() *
                        svec_to_sym(D.segment(off, t), r) * bs.Q *
                        isq.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        0.5 * (N + N.transpose()), Eigen::EigenvaluesOnly);
    double mn = es.eigenvalues().minCoeff();
    if (mn < 0.0) amax = std::min(amax, -1.0 / mn);
  }
  if (L.nn_dim > 0)
    for (int i = 0; i < L.nn_dim; ++i) {
      double di = D[L.nn_off + i];
      if (di < 0.0) amax = std::min(amax, -W.lam_nn[i] / di);
    }
  return amax;
}

// Per-row constraint data grouped by PSD block for Schur assembly.
struct SchurStructure {
  struct Entry {
    int local;  // svec index within the block
    double val;
  };
  // per block: rows touching it, with their local coefficients
  std::vector<std::vector<std::pair<int, std::vector<Entry>>>> by_block;
  // nonneg columns: list of (row, coeff) per column
  std::vector<std::vector<std::pair<int, double>>> by_nonneg;

  SchurStructure(const ConicProgram& prog, const Layout& L) {
    by_block.resize(L.sides.size());
    by_nonneg.resize(L.nn_dim);
    std::vector<std::map<int, std::vector<Entry>>> tmp(L.sides.size());
    for (int row = 0; row < prog.A.outerSize(); ++row) {
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(
               prog.A, row);
           it; ++it) {
        int col = static_cast<int>(it.col());
        if (col >= L.nn_off) {
          by_nonneg[col - L.nn_off].emplace_back(row, it.value());
        } else {
          int j = 0;
          while (j + 1 < static_cast<int>(L.offsets.size()) &&
                 L.offsets[j + 1] <= col)
            ++j;
          tmp[j][row].push_back({col - L.offsets[j], it.value()});
        }
      }
    }
    for (size_t j = 0; j < tmp.size(); ++j)
      for (auto& [row, entries] : tmp[j])
        by_block[j].emplace_back(row, std::move(entries));
  }
};

const std::vector<std::pair<int, int>>& svec_coords(int side) {
  static std::map<int, std::vector<std::pair<int, int>>> cache;
  auto it = cache.find(side);
  if (it != cache.end()) return it->second;
  std::vector<std::pair<int, int>> c;
  for (int q = 0; q < side; ++q)
    for (int p = 0; p <= q; ++p) c.emplace_back(p, q);
  return cache.emplace(side, std::move(c)).first->second;
}

Eigen::SparseMatrix<double> build_schur(const ConicProgram& prog,
                                        const Layout& L, const Scaling& W,
                                        const SchurStructure& ss, double reg) {
  const int m = prog.num_rows();
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::MatrixXd M, V;
  for (size_t j = 0; j < L.sides.size(); ++j) {
    const int r = L.sides[j], t = ConicProgram::svec_dim(r);
    const auto& coords = svec_coords(r);
    const auto& rows = ss.by_block[j];
    const int nr = static_cast<int>(rows.size());
    if (nr == 0) continue;
    const Eigen::MatrixXd& T = W.blocks[j].T;
    // Columns of V are svec(T * mat(a_i) * T), built from the few sparse
    // entries of each row as rank-two outer products and processed in
    // chunks to bound memory for large monolithic blocks.
    const int chunk = std::max(1, std::min(nr, 8'000'000 / std::max(1, t)));
    V.resize(t, chunk);
    M.resize(r, r);
    for (int c0 = 0; c0 < nr; c0 += chunk) {
      const int cn = std::min(chunk, nr - c0);
      for (int ci = 0; ci < cn; ++ci) {
        M.setZero();
        for (const auto& e : rows[c0 + ci].second) {
          const auto [p, q] = coords[e.local];
          if (p == q) {
            M.noalias() += e.val * (T.col(p) * T.col(p).transpose());
          } else {
            const double v = e.val / kSqrt2;
            M.noalias() += v * (T.col(p) * T.col(q).transpose());
            M.noalias() += v * (T.col(q) * T.col(p).transpose());
          }
        }
        int at = 0;
        for (int q = 0; q < r; ++q)
          for (int p = 0; p <= q; ++p) {
            V(at, ci) = (p == q) ? M(p, q)
                                 : kSqrt2 * 0.5 * (M(p, q) + M(q, p));
            ++at;
          }
      }
      for (int ci = 0; ci < cn; ++ci) {
        const int gi = rows[c0 + ci].first;
        for (int k = 0; k < nr; ++k) {
          const int gk = rows[k].first;
          if (gk < gi) continue;
          double s = 0.0;
          for (const auto& e : rows[k].second) s += e.val * V(e.local, ci);
          trips.emplace_back(gk, gi, s);
        }
      }
    }
  }
  for (int col = 0; col < L.nn_dim; ++col) {
    const auto& rows = ss.by_nonneg[col];
    const double d2 = W.d[col] * W.d[col];
    for (size_t a = 0; a < rows.size(); ++a)
      for (size_t b2 = 0; b2 <= a; ++b2)
        trips.emplace_back(std::max(rows[a].first, rows[b2].first),
                           std::min(rows[a].first, rows[b2].first),
                           d2 * rows[a].second * rows[b2].second);
  }
  for (int i = 0; i < m; ++i) trips.emplace_back(i, i, reg);
  Eigen::SparseMatrix<double> S(m, m);
  S.setFromTriplets(trips.begin(), trips.end());
  return S;
}

struct EmbeddedSolver {
  const ConicProgram& prog;
  const SolverSettings& settings;
  Layout L;
  SchurStructure ss;
  Eigen::SparseMatrix<double> At;  // column-major transpose for products

  EmbeddedSolver(const ConicProgram& p, const SolverSettings& s)
      : prog(p), settings(s), L(p), ss(p, L), At(p.A.transpose()) {}

  SdpSolution run();
};

SdpSolution assemble_solution(const ConicProgram& prog, const Layout& L,
                              const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                              const Eigen::VectorXd& z) {
  SdpSolution sol;
  for (size_t j = 0; j < L.sides.size(); ++j)
    sol.blocks.push_back(svec_to_sym(
        x.segment(L.offsets[j], ConicProgram::svec_dim(L.sides[j])),
        L.sides[j]));
  sol.slacks = x.tail(L.nn_dim);
  sol.y = y;
  sol.z = z;
  sol.objective = prog.c.dot(x);
  return sol;
}

SdpSolution EmbeddedSolver::run() {
  const int m = prog.num_rows();
  const double bnorm = 1.0 + (m ? prog.b.cwiseAbs().maxCoeff() : 0.0);
  const double cnorm = 1.0 + (prog.c.size() ? prog.c.cwiseAbs().maxCoeff() : 0.0);

  Eigen::VectorXd x = cone_identity(L), z = cone_identity(L);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
  double tau = 1.0, kappa = 1.0;

  SdpSolution sol;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  bool analyzed = false;

  for (int iter = 0; iter < settings.max_iterations; ++iter) {
    // Residuals of the embedding.
    Eigen::VectorXd rp = prog.A * x - prog.b * tau;
    Eigen::VectorXd rd = -(At * y) + prog.c * tau - z;
    double rg = prog.b.dot(y) - prog.c.dot(x) - kappa;

    // Normalized convergence metrics.
    double pobj = prog.c.dot(x) / tau;
    double dobj = prog.b.dot(y) / tau;
    double pres = (m ? (prog.A * (x / tau) - prog.b).cwiseAbs().maxCoeff() : 0.0) / bnorm;
    Eigen::VectorXd dres_v = prog.c - (m ? Eigen::VectorXd(At * (y / tau)) :
                                          Eigen::VectorXd::Zero(L.n)) - z / tau;
    double dres = (L.n ? dres_v.cwiseAbs().maxCoeff() : 0.0) / cnorm;
    double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj));
    double mu = (x.dot(z) + tau * kappa) / (L.barrier + 1.0);

    sol.trace.push_back({pobj, dobj, pres, dres, gap, mu});
    if (settings.verbose)
      std::fprintf(stderr, "it %3d  pobj % .6e dobj % .6e pres %.2e dres %.2e gap %.2e tau %.2e kap %.2e\n",
                   iter, pobj, dobj, pres, dres, gap, tau, kappa);

    if (pres <= settings.eps_primal && dres <= settings.eps_dual &&
        gap <= settings.eps_gap) {
      sol = [&] {
        SdpSolution s2 = assemble_solution(prog, L, x / tau, y / tau, z / tau);
        s2.trace = sol.trace;
        return s2;
      }();
      sol.objective = pobj;
      sol.status = SolveStatus::optimal;
      sol.primal_residual = pres;
      sol.dual_residual = dres;
      sol.rel_gap = gap;
      sol.iterations = iter;
      return sol;
    }

    // Certificates of infeasibility / unboundedness.
    double by = prog.b.dot(y);
    if (by > 1e-12) {
      double cert = (At * y + z).cwiseAbs().maxCoeff() / by;
      if (cert <= settings.eps_infeas) {
        sol.status = SolveStatus::infeasible;
        SdpSolution s2 = assemble_solution(prog, L, x, y / by, z / by);
        s2.trace = sol.trace;
        s2.status = SolveStatus::infeasible;
        s2.iterations = iter;
        return s2;
      }
    }
    double cx = prog.c.dot(x);
    if (cx < -1e-12 && m) {
      double cert = (prog.A * x).cwiseAbs().maxCoeff() / (-cx);
      if (cert <= settings.eps_infeas) {
        sol.status = SolveStatus::unbounded;
        SdpSolution s2 = assemble_solution(prog, L, x / (-cx), y, z);
        s2.trace = sol.trace;
        s2.status = SolveStatus::unbounded;
        s2.iterations = iter;
        return s2;
      }
    }

    Scaling W = compute_scaling(L, x, z);
    if (!W.ok) {
      sol.status = SolveStatus::numerical_failure;
      sol.iterations = iter;
      return sol;
    }
    double lam_g = std::sqrt(tau * kappa);

    // Factor the Schur complement A H A' (with a regularization retry).
    double reg = settings.static_regularization;
    bool factored = false;
    for (int attempt = 0; attempt < 8 && !factored; ++attempt) {
      Eigen::SparseMatrix<double> S = build_schur(prog, L, W, ss, reg);
      if (!analyzed) {
        ldlt.analyzePattern(S);
        analyzed = true;
      }
      ldlt.factorize(S);
      if (ldlt.info() == Eigen::Success) {
        // S is PSD up to roundoff; reject only clearly indefinite pivots.
        const double dmax = ldlt.vectorD().maxCoeff();
        if (ldlt.vectorD().minCoeff() > -1e-10 * std::max(1.0, dmax)) {
          factored = true;
          break;
        }
      }
      reg *= 10.0;
    }
    if (!factored && m > 0) {
      sol.status = SolveStatus::numerical_failure;
      sol.iterations = iter;
      return sol;
    }

    Eigen::VectorXd Hc = apply_H(L, W, prog.c);
    Eigen::VectorXd y1 = m ? Eigen::VectorXd(ldlt.solve(prog.b + prog.A * Hc))
                           : Eigen::VectorXd(0);
    Eigen::VectorXd x1g = apply_H(L, W, m ? Eigen::VectorXd(At * y1)
                                          : Eigen::VectorXd::Zero(L.n)) - Hc;

    auto direction = [&](const Eigen::VectorXd& Rp, const Eigen::VectorXd& Rd,
                         double Rg, const Eigen::VectorXd& Rs, double Rk,
                         Eigen::VectorXd& dx, Eigen::VectorXd& dy,
                         Eigen::VectorXd& dz, double& dtau, double& dkappa) {
      Eigen::VectorXd q = jordan_solve(L, W, Rs);
      Eigen::VectorXd qz = apply_Wscale(L, W, q, /*inverse=*/true);
      Eigen::VectorXd Hrq = apply_H(L, W, Rd + qz);
      Eigen::VectorXd dy0 =
          m ? Eigen::VectorXd(ldlt.solve(Rp - prog.A * Hrq))
            : Eigen::VectorXd(0);
      Eigen::VectorXd dx0 =
          Hrq + apply_H(L, W, m ? Eigen::VectorXd(At * dy0)
                                : Eigen::VectorXd::Zero(L.n));
      double denom = prog.b.dot(y1) - prog.c.dot(x1g) + kappa / tau;
      double num = Rg + prog.c.dot(dx0) - prog.b.dot(dy0) + Rk / tau;
      dtau = num / denom;
      dkappa = (Rk - kappa * dtau) / tau;
      dy = dy0 + dtau * y1;
      dx = dx0 + dtau * x1g;
      dz = -(At * dy) + prog.c * dtau - Rd;
    };

    // Predictor (affine) direction.
    Eigen::VectorXd lam2 = lambda_square(L, W);
    Eigen::VectorXd dxa, dya, dza;
    double dtaua, dkappaa;
    direction(-rp, -rd, -rg, -lam2, -tau * kappa, dxa, dya, dza, dtaua,
              dkappaa);

    Eigen::VectorXd Dxa = apply_Wscale(L, W, dxa, true);
    Eigen::VectorXd Dza = apply_Wscale(L, W, dza, false);
    double amax = std::min(max_step_scaled(L, W, Dxa),
                           max_step_scaled(L, W, Dza));
    if (dtaua < 0.0) amax = std::min(amax, -tau / dtaua);
    if (dkappaa < 0.0) amax = std::min(amax, -kappa / dkappaa);
    double a_aff = std::min(1.0, amax);
    double mu_aff = ((x + a_aff * dxa).dot(z + a_aff * dza) +
                     (tau + a_aff * dtaua) * (kappa + a_aff * dkappaa)) /
                    (L.barrier + 1.0);
    double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3.0);

    // Combined corrector direction.
    Eigen::VectorXd e = cone_identity(L);
    Eigen::VectorXd Rs =
        -lam2 - jordan_product(L, Dxa, Dza) + sigma * mu * e;
    double Rk = -tau * kappa - dtaua * dkappaa + sigma * mu;
    Eigen::VectorXd dx, dy, dz;
    double dtau, dkappa;
    direction(-(1.0 - sigma) * rp, -(1.0 - sigma) * rd, -(1.0 - sigma) * rg,
              Rs, Rk, dx, dy, dz, dtau, dkappa);

    Eigen::VectorXd Dx = apply_Wscale(L, W, dx, true);
    Eigen::VectorXd Dz = apply_Wscale(L, W, dz, false);
    double step_max = std::min(max_step_scaled(L, W, Dx),
                               max_step_scaled(L, W, Dz));
    if (dtau < 0.0) step_max = std::min(step_max, -tau / dtau);
    if (dkappa < 0.0) step_max = std::min(step_max, -kappa / dkappa);
    double alpha = std::min(1.0, settings.fraction_to_boundary * step_max);
    if (!std::isfinite(alpha) || alpha < 1e-12) {
      sol.status = SolveStatus::numerical_failure;
      sol.iterations = iter;
      return sol;
    }

    x += alpha * dx;
    y += alpha * dy;
    z += alpha * dz;
    tau += alpha * dtau;
    kappa += alpha * dkappa;
    (void)lam_g;
  }

  SdpSolution s2 = assemble_solution(prog, L, x / tau, y / tau, z / tau);
  s2.trace = sol.trace;
  s2.objective = prog.c.dot(x) / tau;
  s2.status = SolveStatus::max_iter;
  s2.iterations = settings.max_iterations;
  if (!s2.trace.empty()) {
    s2.primal_residual = s2.trace.back().primal_residual;
    s2.dual_residual = s2.trace.back().dual_residual;
    s2.rel_gap = s2.trace.back().gap;
  }
  return s2;
}

class EmbeddedBackend : public ConicBackend {
 public:
  SdpSolution solve(const ConicProgram& prog,
                    const SolverSettings& settings) override {
    return ctsdr::solve(prog, settings);
  }
  std::string name() const override { return "embedded"; }
};

std::map<std::string, std::unique_ptr<ConicBackend>>& registry() {
  static std::map<std::string, std::unique_ptr<ConicBackend>> reg = [] {
    std::map<std::string, std::unique_ptr<ConicBackend>> r;
    r["embedded"] = std::make_unique<EmbeddedBackend>();
    return r;
  }();
  return reg;
}

/// Ruiz equilibration. Row scales are free; column scales are uniform
/// within each PSD block (a congruence by a scalar preserves the cone)
/// and per-coordinate on the nonnegative part. b and c are normalized
/// by their scaled sup-norms.
struct Equilibration {
  Eigen::VectorXd row, col;
  double sb = 1.0, sc = 1.0;
};

ConicProgram equilibrate(const ConicProgram& prog, Equilibration& eq) {
  const int m = prog.num_rows(), n = prog.dim();
  const Layout L(prog);
  eq.row = Eigen::VectorXd::Ones(m);
  eq.col = Eigen::VectorXd::Ones(n);
  Eigen::SparseMatrix<double, Eigen::RowMajor> A = prog.A;

  std::vector<int> group(n);  // column -> scaling group
  int g = 0;
  for (size_t j = 0; j < L.sides.size(); ++j, ++g)
    for (int k = 0; k < ConicProgram::svec_dim(L.sides[j]); ++k)
      group[L.offsets[j] + k] = g;
  for (int k = 0; k < L.nn_dim; ++k) group[L.nn_off + k] = g++;
  const int ngroups = static_cast<int>(L.sides.size()) + L.nn_dim;

  for (int pass = 0; pass < 10; ++pass) {
    Eigen::VectorXd rmax = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd gmax = Eigen::VectorXd::Zero(ngroups);
    for (int i = 0; i < m; ++i)
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(A, i);
           it; ++it) {
        const double a = std::abs(it.value());
        rmax[i] = std::max(rmax[i], a);
        gmax[group[it.col()]] = std::max(gmax[group[it.col()]], a);
      }
    Eigen::VectorXd dr(m), dc(n);
    for (int i = 0; i < m; ++i)
      dr[i] = rmax[i] > 0.0 ? 1.0 / std::sqrt(rmax[i]) : 1.0;
    for (int j2 = 0; j2 < n; ++j2) {
      const double gm = gmax[group[j2]];
      dc[j2] = gm > 0.0 ? 1.0 / std::sqrt(gm) : 1.0;
    }
    for (int i = 0; i < m; ++i)
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(A, i);
           it; ++it)
        it.valueRef() *= dr[i] * dc[it.col()];
    eq.row.array() *= dr.array();
    eq.col.array() *= dc.array();
  }

  ConicProgram scaled;
  scaled.psd_sides = prog.psd_sides;
  scaled.nonneg_dim = prog.nonneg_dim;
  scaled.A = A;
  scaled.b = eq.row.cwiseProduct(prog.b);
  scaled.c = eq.col.cwiseProduct(prog.c);
  eq.sb = std::max(1.0, scaled.b.size() ? scaled.b.cwiseAbs().maxCoeff() : 0.0);
  eq.sc = std::max(1.0, scaled.c.size() ? scaled.c.cwiseAbs().maxCoeff() : 0.0);
  scaled.b /= eq.sb;
  scaled.c /= eq.sc;
  return scaled;
}

}  // namespace

SdpSolution solve(const ConicProgram& prog, const SolverSettings& settings) {
  if (prog.num_rows() == 0) {
    // Unconstrained over the cone: optimum at zero iff c is in the dual cone.
    Layout L(prog);
    SdpSolution sol = assemble_solution(prog, L, Eigen::VectorXd::Zero(L.n),
                                        Eigen::VectorXd(0),
                                        Eigen::VectorXd::Zero(L.n));
    for (size_t j = 0; j < L.sides.size(); ++j) {
      Eigen::MatrixXd C = svec_to_sym(
          prog.c.segment(L.offsets[j], ConicProgram::svec_dim(L.sides[j])),
          L.sides[j]);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C, Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() < -1e-12) {
        sol.status = SolveStatus::unbounded;
        return sol;
      }
      sol.blocks[j].setZero();
    }
    if (L.nn_dim > 0 && prog.c.tail(L.nn_dim).minCoeff() < -1e-12) {
      sol.status = SolveStatus::unbounded;
      return sol;
    }
    sol.z = prog.c;
    sol.objective = 0.0;
    sol.status = SolveStatus::optimal;
    return sol;
  }

  if (settings.presolve && prog.num_rows() <= settings.presolve_row_limit) {
    PresolveResult pr = presolve(prog);
    if (static_cast<int>(pr.kept_rows.size()) < prog.num_rows()) {
      SolverSettings inner = settings;
      inner.presolve = false;
      SdpSolution sol = solve(pr.reduced, inner);
      if (sol.y.size() == static_cast<Eigen::Index>(pr.kept_rows.size()))
        sol.y = pr.restore_duals(sol.y);
      return sol;
    }
  }

  Equilibration eq;
  ConicProgram scaled = equilibrate(prog, eq);
  EmbeddedSolver solver(scaled, settings);
  SdpSolution sol = solver.run();

  // Undo the scaling: x = sb E xs, y = sc D ys, z = sc E^{-1} zs.
  const Layout L(prog);
  for (size_t j = 0; j < L.sides.size(); ++j)
    if (j < sol.blocks.size())
      sol.blocks[j] *= eq.sb * eq.col[L.offsets[j]];
  if (L.nn_dim > 0 && sol.slacks.size() == L.nn_dim)
    sol.slacks.array() *= eq.sb * eq.col.segment(L.nn_off, L.nn_dim).array();
  if (sol.y.size() == prog.num_rows())
    sol.y.array() *= eq.sc * eq.row.array();
  if (sol.z.size() == L.n)
    sol.z.array() *= eq.sc / eq.col.array();

  if (sol.status == SolveStatus::optimal || sol.status == SolveStatus::max_iter) {
    Residuals r = residuals(prog, sol);
    sol.primal_residual =
        r.primal / (1.0 + (prog.b.size() ? prog.b.cwiseAbs().maxCoeff() : 0.0));
    sol.dual_residual =
        r.dual / (1.0 + (prog.c.size() ? prog.c.cwiseAbs().maxCoeff() : 0.0));
    sol.rel_gap = r.gap;
    Eigen::VectorXd x(L.n);
    for (size_t j = 0; j < L.sides.size(); ++j)
      x.segment(L.offsets[j], ConicProgram::svec_dim(L.sides[j])) =
          sym_to_svec(sol.blocks[j]);
    if (L.nn_dim > 0) x.tail(L.nn_dim) = sol.slacks;
    sol.objective = prog.c.dot(x);
  }
  return sol;
}

Residuals residuals(const ConicProgram& prog, const SdpSolution& sol) {
  Layout L(prog);
  Eigen::VectorXd x(L.n);
  for (size_t j = 0; j < L.sides.size(); ++j)
    x.segment(L.offsets[j], ConicProgram::svec_dim(L.sides[j])) =
        sym_to_svec(sol.blocks[j]);
  if (L.nn_dim > 0) x.tail(L.nn_dim) = sol.slacks;

  Residuals r{0.0, 0.0, 0.0};
  if (prog.num_rows() > 0)
    r.primal = (prog.A * x - prog.b).cwiseAbs().maxCoeff();
  Eigen::VectorXd stat = prog.c - sol.z;
  if (prog.num_rows() > 0) stat -= prog.A.transpose() * sol.y;
  if (stat.size() > 0) r.dual = stat.cwiseAbs().maxCoeff();
  double cx = prog.c.dot(x);
  double by = prog.num_rows() > 0 ? prog.b.dot(sol.y) : 0.0;
  r.gap = std::abs(cx - by) / (1.0 + std::abs(cx));
  return r;
}

PresolveResult presolve(const ConicProgram& prog, double threshold) {
  const int m = prog.num_rows();
  PresolveResult out;
  out.original_rows = m;
  if (m == 0) {
    out.reduced = prog;
    return out;
  }

  // Rank-revealing Cholesky of A A' in natural row order: a row whose
  // pivot collapses below the threshold after projecting out the rows
  // kept so far is numerically dependent and dropped.
  Eigen::SparseMatrix<double> G_sparse =
      (prog.A * Eigen::SparseMatrix<double>(prog.A.transpose())).pruned();
  Eigen::MatrixXd G = Eigen::MatrixXd(G_sparse);
  const double thr = threshold * std::max(1.0, G.diagonal().maxCoeff());

  for (int k = 0; k < m; ++k) {
    const double d = G(k, k);
    if (d < thr) continue;  // dependent row, never eliminated
    out.kept_rows.push_back(k);
    if (k + 1 == m) break;
    const int s = m - k - 1;
    Eigen::VectorXd col = G.col(k).tail(s);
    G.bottomRightCorner(s, s).selfadjointView<Eigen::Lower>().rankUpdate(
        col, -1.0 / d);
  }

  ConicProgram red;
  red.psd_sides = prog.psd_sides;
  red.nonneg_dim = prog.nonneg_dim;
  red.c = prog.c;
  const int mk = static_cast<int>(out.kept_rows.size());
  red.b.resize(mk);
  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < mk; ++i) {
    const int row = out.kept_rows[i];
    red.b[i] = prog.b[row];
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(
             prog.A, row);
         it; ++it)
      trips.emplace_back(i, static_cast<int>(it.col()), it.value());
  }
  red.A.resize(mk, prog.dim());
  red.A.setFromTriplets(trips.begin(), trips.end());
  out.reduced = red;
  return out;
}

Eigen::VectorXd PresolveResult::restore_duals(
    const Eigen::VectorXd& reduced_y) const {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(original_rows);
  for (size_t i = 0; i < kept_rows.size(); ++i) y[kept_rows[i]] = reduced_y[i];
  return y;
}

ConicBackend& backend(const std::string& name) {
  auto it = registry().find(name);
  if (it == registry().end())
    throw std::invalid_argument("unknown conic backend: " + name);
  return *it->second;
}

void register_backend(std::unique_ptr<ConicBackend> b) {
  std::string n = b->name();
  registry()[n] = std::move(b);
}

std::vector<std::string> backend_names() {
  std::vector<std::string> names;
  for (const auto& [n, _] : registry()) names.push_back(n);
  return names;
}

}  // namespace ctsdr
