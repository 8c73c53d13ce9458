#include "ctsdr/refine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <vector>

namespace ctsdr {

namespace {

/// Flat variable layout of the bilinear NLP: states, controls, thetas.
struct Layout {
  const TranscribedNlp& nlp;
  int S, nx, nu;
  std::vector<int> s_off, c_off;
  int t_off = 0, dim = 0;

  explicit Layout(const TranscribedNlp& n)
      : nlp(n), S(n.grid.num_segments()), nx(n.nx()), nu(n.nu()) {
    int at = 0;
    for (int i = 0; i < S; ++i) {
      s_off.push_back(at);
      at += (n.grid.segment_counts[i] + 1) * nx;
    }
    for (int i = 0; i < S; ++i) {
      c_off.push_back(at);
      at += n.grid.segment_counts[i] * nu;
    }
    t_off = at;
    dim = at + S;
  }

  int x(int i, int k, int j) const { return s_off[i] + k * nx + j; }
  int u(int i, int k, int j) const { return c_off[i] + k * nu + j; }
  int th(int i) const { return t_off + i; }

  Eigen::VectorXd pack(const NlpPoint& p) const {
    Eigen::VectorXd z(dim);
    for (int i = 0; i < S; ++i) {
      for (int k = 0; k <= nlp.grid.segment_counts[i]; ++k)
        for (int j = 0; j < nx; ++j) z[x(i, k, j)] = p.states[i][k][j];
      for (int k = 0; k < nlp.grid.segment_counts[i]; ++k)
        for (int j = 0; j < nu; ++j) z[u(i, k, j)] = p.controls[i][k][j];
      z[th(i)] = p.thetas[i];
    }
    return z;
  }

  NlpPoint unpack(const Eigen::VectorXd& z) const {
    NlpPoint p = make_point(nlp);
    for (int i = 0; i < S; ++i) {
      for (int k = 0; k <= nlp.grid.segment_counts[i]; ++k)
        for (int j = 0; j < nx; ++j) p.states[i][k][j] = z[x(i, k, j)];
      for (int k = 0; k < nlp.grid.segment_counts[i]; ++k)
        for (int j = 0; j < nu; ++j) p.controls[i][k][j] = z[u(i, k, j)];
      p.thetas[i] = z[th(i)];
    }
    return p;
  }
};

struct EqSystem {
  Eigen::VectorXd c;
  Eigen::MatrixXd J;
};

int equality_rows(const Layout& L) {
  int m = L.nlp.grid.total_intervals() * L.nx + (L.S - 1) * L.nx + 2 * L.nx;
  for (const auto& ctc : L.nlp.problem.ctcs)
    m += static_cast<int>(ctc.target.size());
  return m;
}

EqSystem eval_equalities(const Layout& L, const Eigen::VectorXd& z) {
  const auto& nlp = L.nlp;
  const Eigen::MatrixXd& A = nlp.problem.dynamics.A;
  const Eigen::MatrixXd& B = nlp.problem.dynamics.B;
  EqSystem e;
  const int m = equality_rows(L);
  e.c = Eigen::VectorXd::Zero(m);
  e.J = Eigen::MatrixXd::Zero(m, L.dim);
  int ro = 0;
  for (int i = 0; i < L.S; ++i) {
    const double th = z[L.th(i)];
    for (int k = 0; k < nlp.grid.segment_counts[i]; ++k) {
      Eigen::VectorXd xk(L.nx), uk(L.nu);
      for (int j = 0; j < L.nx; ++j) xk[j] = z[L.x(i, k, j)];
      for (int j = 0; j < L.nu; ++j) uk[j] = z[L.u(i, k, j)];
      Eigen::VectorXd rate = A * xk + B * uk;
      for (int j = 0; j < L.nx; ++j) {
        e.c[ro + j] = z[L.x(i, k + 1, j)] - xk[j] - th * rate[j];
        e.J(ro + j, L.x(i, k + 1, j)) = 1.0;
        e.J(ro + j, L.x(i, k, j)) -= 1.0;
        for (int c2 = 0; c2 < L.nx; ++c2)
          e.J(ro + j, L.x(i, k, c2)) -= th * A(j, c2);
        for (int c2 = 0; c2 < L.nu; ++c2)
          e.J(ro + j, L.u(i, k, c2)) -= th * B(j, c2);
        e.J(ro + j, L.th(i)) = -rate[j];
      }
      ro += L.nx;
    }
  }
  for (int i = 0; i + 1 < L.S; ++i) {
    const int N = nlp.grid.segment_counts[i];
    for (int j = 0; j < L.nx; ++j) {
      e.c[ro] = z[L.x(i, N, j)] - z[L.x(i + 1, 0, j)];
      e.J(ro, L.x(i, N, j)) = 1.0;
      e.J(ro, L.x(i + 1, 0, j)) = -1.0;
      ++ro;
    }
  }
  for (int j = 0; j < L.nx; ++j) {
    e.c[ro] = z[L.x(0, 0, j)] - nlp.problem.x0[j];
    e.J(ro, L.x(0, 0, j)) = 1.0;
    ++ro;
  }
  const int NS = nlp.grid.segment_counts[L.S - 1];
  for (int j = 0; j < L.nx; ++j) {
    e.c[ro] = z[L.x(L.S - 1, NS, j)] - nlp.problem.xf[j];
    e.J(ro, L.x(L.S - 1, NS, j)) = 1.0;
    ++ro;
  }
  for (int l = 0; l < nlp.problem.num_ctcs(); ++l) {
    const auto& ctc = nlp.problem.ctcs[l];
    const int N = nlp.grid.segment_counts[l];
    for (int p = 0; p < ctc.target.size(); ++p) {
      double v = -ctc.target[p];
      for (int j = 0; j < L.nx; ++j) {
        v += ctc.selector(p, j) * z[L.x(l, N, j)];
        e.J(ro, L.x(l, N, j)) = ctc.selector(p, j);
      }
      e.c[ro] = v;
      ++ro;
    }
  }
  return e;
}

/// Constant linear inequalities g(z) = J z + g0 <= 0.
struct IneqSystem {
  Eigen::MatrixXd J;
  Eigen::VectorXd g0;
};

IneqSystem build_inequalities(const Layout& L) {
  const auto& nlp = L.nlp;
  std::vector<std::pair<Eigen::RowVectorXd, double>> rows;
  auto bound = [&](int col, double lo, double hi) {
    if (std::isfinite(lo)) {
      Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(L.dim);
      r[col] = -1.0;
      rows.emplace_back(r, lo);
    }
    if (std::isfinite(hi)) {
      Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(L.dim);
      r[col] = 1.0;
      rows.emplace_back(r, -hi);
    }
  };
  for (int i = 0; i < L.S; ++i) {
    for (int k = 0; k <= nlp.grid.segment_counts[i]; ++k)
      for (int j = 0; j < L.nx; ++j)
        bound(L.x(i, k, j), nlp.problem.bounds.x_min[j],
              nlp.problem.bounds.x_max[j]);
    for (int k = 0; k < nlp.grid.segment_counts[i]; ++k)
      for (int j = 0; j < L.nu; ++j)
        bound(L.u(i, k, j), nlp.problem.bounds.u_min[j],
              nlp.problem.bounds.u_max[j]);
    bound(L.th(i), nlp.options.theta_floor, nlp.options.theta_max);
  }
  for (int l = 0; l < nlp.problem.num_ctcs(); ++l) {
    Eigen::RowVectorXd lo = Eigen::RowVectorXd::Zero(L.dim);
    for (int s = 0; s <= l; ++s)
      lo[L.th(s)] = -static_cast<double>(nlp.grid.segment_counts[s]);
    rows.emplace_back(lo, nlp.problem.ctcs[l].tau_min);
    rows.emplace_back(-lo, -nlp.problem.ctcs[l].tau_max);
  }
  IneqSystem out;
  out.J.resize(static_cast<int>(rows.size()), L.dim);
  out.g0.resize(static_cast<int>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    out.J.row(static_cast<int>(i)) = rows[i].first;
    out.g0[static_cast<int>(i)] = rows[i].second;
  }
  return out;
}

struct ObjectiveEval {
  double f = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

ObjectiveEval eval_objective(const Layout& L, const Eigen::VectorXd& z) {
  const auto& nlp = L.nlp;
  const Eigen::MatrixXd& Q = nlp.problem.cost.Q_x;
  const Eigen::MatrixXd& R = nlp.problem.cost.R_u;
  ObjectiveEval o;
  o.grad = Eigen::VectorXd::Zero(L.dim);
  o.hess = Eigen::MatrixXd::Zero(L.dim, L.dim);
  for (int i = 0; i < L.S; ++i) {
    const int N = nlp.grid.segment_counts[i];
    const double th = z[L.th(i)];
    o.f += nlp.problem.cost.w_t * N * th;
    o.grad[L.th(i)] += nlp.problem.cost.w_t * N;
    for (int k = 0; k < N; ++k) {
      Eigen::VectorXd xk(L.nx), uk(L.nu);
      for (int j = 0; j < L.nx; ++j) xk[j] = z[L.x(i, k, j)];
      for (int j = 0; j < L.nu; ++j) uk[j] = z[L.u(i, k, j)];
      const Eigen::VectorXd Qx = Q * xk, Ru = R * uk;
      o.f += th * (xk.dot(Qx) + uk.dot(Ru));
      o.grad[L.th(i)] += xk.dot(Qx) + uk.dot(Ru);
      for (int j = 0; j < L.nx; ++j) {
        o.grad[L.x(i, k, j)] += 2.0 * th * Qx[j];
        o.hess(L.th(i), L.x(i, k, j)) += 2.0 * Qx[j];
        o.hess(L.x(i, k, j), L.th(i)) += 2.0 * Qx[j];
        for (int c = 0; c < L.nx; ++c)
          o.hess(L.x(i, k, j), L.x(i, k, c)) += 2.0 * th * Q(j, c);
      }
      for (int j = 0; j < L.nu; ++j) {
        o.grad[L.u(i, k, j)] += 2.0 * th * Ru[j];
        o.hess(L.th(i), L.u(i, k, j)) += 2.0 * Ru[j];
        o.hess(L.u(i, k, j), L.th(i)) += 2.0 * Ru[j];
        for (int c = 0; c < L.nu; ++c)
          o.hess(L.u(i, k, j), L.u(i, k, c)) += 2.0 * th * R(j, c);
      }
    }
  }
  return o;
}

/// Adds the dynamics' bilinear curvature weighted by multipliers.
void add_constraint_curvature(const Layout& L, const Eigen::VectorXd& y,
                              Eigen::MatrixXd& H) {
  const Eigen::MatrixXd& A = L.nlp.problem.dynamics.A;
  const Eigen::MatrixXd& B = L.nlp.problem.dynamics.B;
  int ro = 0;
  for (int i = 0; i < L.S; ++i)
    for (int k = 0; k < L.nlp.grid.segment_counts[i]; ++k) {
      for (int c = 0; c < L.nx; ++c) {
        double v = 0.0;
        for (int j = 0; j < L.nx; ++j) v -= y[ro + j] * A(j, c);
        H(L.th(i), L.x(i, k, c)) += v;
        H(L.x(i, k, c), L.th(i)) += v;
      }
      for (int c = 0; c < L.nu; ++c) {
        double v = 0.0;
        for (int j = 0; j < L.nx; ++j) v -= y[ro + j] * B(j, c);
        H(L.th(i), L.u(i, k, c)) += v;
        H(L.u(i, k, c), L.th(i)) += v;
      }
      ro += L.nx;
    }
}

Eigen::MatrixXd clip_psd(const Eigen::MatrixXd& H, double floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      0.5 * (H + H.transpose()));
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double merit(const Layout& L, const IneqSystem& gi, const Eigen::VectorXd& z,
             double nu) {
  const double f = evaluate(L.nlp, L.unpack(z)).cost;
  EqSystem e = eval_equalities(L, z);
  Eigen::VectorXd g = gi.J * z + gi.g0;
  return f + nu * (e.c.cwiseAbs().sum() + g.cwiseMax(0.0).sum());
}

TrajectorySolution package(const TranscribedNlp& nlp, const NlpPoint& p,
                           const std::string& source) {
  TrajectorySolution t;
  EvalResult ev = evaluate(nlp, p);
  t.point = p;
  t.cost = ev.cost;
  t.feasibility_residual = ev.max_residual();
  t.source = source;
  const int M = nlp.problem.num_ctcs();
  t.crossing_times.resize(M);
  for (int l = 0; l < M; ++l)
    t.crossing_times[l] = crossing_time(p.thetas, nlp.grid, l + 1);
  return t;
}

}  // namespace

RefineResult refine(const TranscribedNlp& nlp, const NlpPoint& init,
                    const SqpSettings& settings) {
  Layout L(nlp);
  Eigen::VectorXd z = L.pack(init);
  for (int i = 0; i < L.S; ++i)
    z[L.th(i)] = std::clamp(z[L.th(i)], nlp.options.theta_floor,
                            nlp.options.theta_max);

  const IneqSystem gi = build_inequalities(L);
  const int mE = equality_rows(L);
  const int mI = static_cast<int>(gi.g0.size());
  const int nz = L.dim;

  double nu = settings.penalty_init;
  double Delta = settings.tr_init;
  Eigen::VectorXd y_last = Eigen::VectorXd::Zero(mE);

  RefineResult out;
  Eigen::VectorXd z_best = z;
  double best_cost = std::numeric_limits<double>::infinity();
  bool have_best = false;

  QpSettings qps;
  qps.tol = 1e-10;
  qps.max_iterations = 200;

  for (int iter = 0; iter < settings.max_iter; ++iter) {
    out.iterations = iter + 1;
    ObjectiveEval o = eval_objective(L, z);
    EqSystem e = eval_equalities(L, z);
    Eigen::VectorXd g = gi.J * z + gi.g0;

    Eigen::MatrixXd H = o.hess;
    add_constraint_curvature(L, y_last, H);
    H = clip_psd(H, 1e-8);

    // Subproblem variables: [d, t+, t-, elastic].
    const int nvar = nz + 2 * mE + mI;
    QpProblem qp;
    qp.P = Eigen::MatrixXd::Zero(nvar, nvar);
    qp.P.topLeftCorner(nz, nz) = H;
    qp.q = Eigen::VectorXd::Constant(nvar, nu);
    qp.q.head(nz) = o.grad;
    qp.E = Eigen::MatrixXd::Zero(mE, nvar);
    qp.E.leftCols(nz) = e.J;
    qp.E.block(0, nz, mE, mE) = -Eigen::MatrixXd::Identity(mE, mE);
    qp.E.block(0, nz + mE, mE, mE) = Eigen::MatrixXd::Identity(mE, mE);
    qp.f = -e.c;
    const int mc = mI + 2 * nz + 2 * mE + mI;
    qp.C = Eigen::MatrixXd::Zero(mc, nvar);
    qp.u = Eigen::VectorXd::Zero(mc);
    qp.C.topLeftCorner(mI, nz) = gi.J;
    qp.C.block(0, nz + 2 * mE, mI, mI) = -Eigen::MatrixXd::Identity(mI, mI);
    qp.u.head(mI) = -g;
    qp.C.block(mI, 0, nz, nz) = Eigen::MatrixXd::Identity(nz, nz);
    qp.u.segment(mI, nz).setConstant(Delta);
    qp.C.block(mI + nz, 0, nz, nz) = -Eigen::MatrixXd::Identity(nz, nz);
    qp.u.segment(mI + nz, nz).setConstant(Delta);
    qp.C.block(mI + 2 * nz, nz, 2 * mE + mI, 2 * mE + mI) =
        -Eigen::MatrixXd::Identity(2 * mE + mI, 2 * mE + mI);

    QpSolution sub = solve_qp(qp, qps);
    if (sub.status == QpStatus::numerical_failure) {
      out.status = RefineStatus::restoration_failure;
      break;
    }
    Eigen::VectorXd d = sub.d.head(nz);
    Eigen::VectorXd y = sub.y;
    Eigen::VectorXd lam = sub.lambda.head(mI);

    nu = std::max(nu, 1.5 * std::max(mE ? y.cwiseAbs().maxCoeff() : 0.0,
                                     mI ? lam.cwiseAbs().maxCoeff() : 0.0) +
                          1.0);

    // KKT residual at the current iterate with the QP multipliers.
    Eigen::VectorXd stat = o.grad + e.J.transpose() * y + gi.J.transpose() * lam;
    double comp = 0.0;
    for (int i = 0; i < mI; ++i) comp = std::max(comp, std::abs(lam[i] * g[i]));
    const double feas =
        std::max(mE ? e.c.cwiseAbs().maxCoeff() : 0.0,
                 mI ? g.cwiseMax(0.0).maxCoeff() : 0.0);
    out.kkt_residual = std::max(stat.cwiseAbs().maxCoeff(), comp);
    if (out.kkt_residual <= settings.kkt_tol && feas <= 1e-9) {
      out.status = RefineStatus::converged;
      break;
    }

    const double phi0 = o.f + nu * (e.c.cwiseAbs().sum() + g.cwiseMax(0.0).sum());
    const double model =
        o.f + o.grad.dot(d) + 0.5 * d.dot(H * d) +
        nu * ((e.c + e.J * d).cwiseAbs().sum() +
              (g + gi.J * d).cwiseMax(0.0).sum());
    const double pred = phi0 - model;

    if (pred <= 1e-11 * (1.0 + std::abs(phi0))) {
      // The model cannot decrease the merit beyond subproblem accuracy:
      // the iterate is stationary for the penalty function.
      out.status = feas <= settings.feas_tol ? RefineStatus::converged
                                             : RefineStatus::restoration_failure;
      break;
    }

    Eigen::VectorXd trial = z + d;
    const double ared = phi0 - merit(L, gi, trial, nu);
    if (ared >= 0.1 * pred) {
      z = trial;
      y_last = y;
      if (ared >= 0.9 * pred || d.cwiseAbs().maxCoeff() >= 0.9 * Delta)
        Delta = std::min(settings.tr_max, 2.0 * Delta);
      NlpPoint p = L.unpack(z);
      EvalResult ev = evaluate(nlp, p);
      if (ev.max_residual() <= settings.feas_tol && ev.cost < best_cost) {
        best_cost = ev.cost;
        z_best = z;
        have_best = true;
      }
    } else {
      Delta *= 0.25;
      if (Delta < settings.tr_min) {
        out.status = RefineStatus::restoration_failure;
        break;
      }
    }
  }

  Eigen::VectorXd z_out = z;
  if (out.status != RefineStatus::converged && have_best) z_out = z_best;
  {
    NlpPoint pz = L.unpack(z);
    EvalResult evz = evaluate(nlp, pz);
    if (out.status == RefineStatus::converged &&
        evz.max_residual() <= settings.feas_tol)
      z_out = z;
    else if (have_best && best_cost <= evz.cost)
      z_out = z_best;
  }
  out.trajectory = package(nlp, L.unpack(z_out), "refined");
  return out;
}

QpProblem fixed_theta_qp(const TranscribedNlp& nlp,
                         const Eigen::VectorXd& thetas) {
  Layout L(nlp);
  const int nz = L.t_off;  // states and controls only
  const Eigen::MatrixXd& A = nlp.problem.dynamics.A;
  const Eigen::MatrixXd& B = nlp.problem.dynamics.B;
  const Eigen::MatrixXd& Q = nlp.problem.cost.Q_x;
  const Eigen::MatrixXd& R = nlp.problem.cost.R_u;

  QpProblem qp;
  qp.P = Eigen::MatrixXd::Zero(nz, nz);
  qp.q = Eigen::VectorXd::Zero(nz);
  const int mE = equality_rows(L);
  qp.E = Eigen::MatrixXd::Zero(mE, nz);
  qp.f = Eigen::VectorXd::Zero(mE);

  int ro = 0;
  for (int i = 0; i < L.S; ++i) {
    const double th = thetas[i];
    for (int k = 0; k < nlp.grid.segment_counts[i]; ++k) {
      for (int j = 0; j < L.nx; ++j) {
        qp.E(ro + j, L.x(i, k + 1, j)) = 1.0;
        qp.E(ro + j, L.x(i, k, j)) -= 1.0;
        for (int c = 0; c < L.nx; ++c)
          qp.E(ro + j, L.x(i, k, c)) -= th * A(j, c);
        for (int c = 0; c < L.nu; ++c)
          qp.E(ro + j, L.u(i, k, c)) -= th * B(j, c);
      }
      for (int j = 0; j < L.nx; ++j)
        for (int c = 0; c < L.nx; ++c)
          qp.P(L.x(i, k, j), L.x(i, k, c)) += 2.0 * th * Q(j, c);
      for (int j = 0; j < L.nu; ++j)
        for (int c = 0; c < L.nu; ++c)
          qp.P(L.u(i, k, j), L.u(i, k, c)) += 2.0 * th * R(j, c);
      ro += L.nx;
    }
  }
  for (int i = 0; i + 1 < L.S; ++i) {
    const int N = nlp.grid.segment_counts[i];
    for (int j = 0; j < L.nx; ++j) {
      qp.E(ro, L.x(i, N, j)) = 1.0;
      qp.E(ro, L.x(i + 1, 0, j)) = -1.0;
      ++ro;
    }
  }
  for (int j = 0; j < L.nx; ++j) {
    qp.E(ro, L.x(0, 0, j)) = 1.0;
    qp.f[ro] = nlp.problem.x0[j];
    ++ro;
  }
  const int NS = nlp.grid.segment_counts[L.S - 1];
  for (int j = 0; j < L.nx; ++j) {
    qp.E(ro, L.x(L.S - 1, NS, j)) = 1.0;
    qp.f[ro] = nlp.problem.xf[j];
    ++ro;
  }
  for (int l = 0; l < nlp.problem.num_ctcs(); ++l) {
    const auto& ctc = nlp.problem.ctcs[l];
    const int N = nlp.grid.segment_counts[l];
    for (int p = 0; p < ctc.target.size(); ++p) {
      for (int j = 0; j < L.nx; ++j)
        qp.E(ro, L.x(l, N, j)) = ctc.selector(p, j);
      qp.f[ro] = ctc.target[p];
      ++ro;
    }
  }

  std::vector<std::pair<Eigen::RowVectorXd, double>> rows;
  auto bound = [&](int col, double lo, double hi) {
    if (std::isfinite(hi)) {
      Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(nz);
      r[col] = 1.0;
      rows.emplace_back(r, hi);
    }
    if (std::isfinite(lo)) {
      Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(nz);
      r[col] = -1.0;
      rows.emplace_back(r, -lo);
    }
  };
  for (int i = 0; i < L.S; ++i) {
    for (int k = 0; k <= nlp.grid.segment_counts[i]; ++k)
      for (int j = 0; j < L.nx; ++j)
        bound(L.x(i, k, j), nlp.problem.bounds.x_min[j],
              nlp.problem.bounds.x_max[j]);
    for (int k = 0; k < nlp.grid.segment_counts[i]; ++k)
      for (int j = 0; j < L.nu; ++j)
        bound(L.u(i, k, j), nlp.problem.bounds.u_min[j],
              nlp.problem.bounds.u_max[j]);
  }
  qp.C.resize(static_cast<int>(rows.size()), nz);
  qp.u.resize(static_cast<int>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    qp.C.row(static_cast<int>(i)) = rows[i].first;
    qp.u[static_cast<int>(i)] = rows[i].second;
  }
  return qp;
}

NlpPoint fixed_theta_point(const TranscribedNlp& nlp,
                           const Eigen::VectorXd& thetas,
                           const Eigen::VectorXd& vars) {
  Layout L(nlp);
  Eigen::VectorXd z(L.dim);
  z.head(L.t_off) = vars;
  for (int i = 0; i < L.S; ++i) z[L.th(i)] = thetas[i];
  return L.unpack(z);
}

TrajectorySolution solve_baseline(const OcpProblem& problem,
                                  const ShootingGrid& grid,
                                  const BaselineSpec& spec,
                                  const TranscriptionOptions& topt) {
  TranscribedNlp nlp = transcribe(problem, grid, topt);
  const int M = problem.num_ctcs();
  const int S = grid.num_segments();

  Eigen::VectorXd tau = spec.tau_hat;
  if (tau.size() == 0) {
    tau.resize(M);
    for (int l = 0; l < M; ++l)
      tau[l] = 0.5 * (problem.ctcs[l].tau_min + problem.ctcs[l].tau_max);
  }
  if (tau.size() != M)
    throw ProblemError("solve_baseline: tau_hat size mismatch");
  double prev = 0.0;
  for (int l = 0; l < M; ++l) {
    if (tau[l] < problem.ctcs[l].tau_min - 1e-12 ||
        tau[l] > problem.ctcs[l].tau_max + 1e-12)
      throw ProblemError("solve_baseline: tau_hat outside window");
    if (tau[l] <= prev)
      throw ProblemError("solve_baseline: tau_hat not strictly increasing");
    prev = tau[l];
  }

  Eigen::VectorXd thetas(S);
  prev = 0.0;
  for (int l = 0; l < M; ++l) {
    thetas[l] = (tau[l] - prev) / grid.segment_counts[l];
    prev = tau[l];
    if (thetas[l] < topt.theta_floor - 1e-12 || thetas[l] > topt.theta_max + 1e-12)
      throw ProblemError("solve_baseline: anchored theta outside box");
  }

  struct Candidate {
    double theta = 0.0, cost = 0.0;
    Eigen::VectorXd vars;
    bool feasible = false;
  };
  auto try_theta = [&](double th_last) {
    Candidate c;
    c.theta = th_last;
    thetas[S - 1] = th_last;
    QpProblem qp = fixed_theta_qp(nlp, thetas);
    ElasticQpSolution sol = solve_qp_elastic(qp, 1e6);
    if (sol.inner.status == QpStatus::numerical_failure) return c;
    if (sol.elastic_mass > 1e-7) return c;
    // Re-solve without elastics for an exactly feasible point.
    QpSolution exact = solve_qp(qp);
    if (exact.status != QpStatus::optimal) return c;
    c.vars = exact.d;
    NlpPoint p = fixed_theta_point(nlp, thetas, c.vars);
    EvalResult ev = evaluate(nlp, p);
    if (ev.max_residual() > nlp.options.feasibility_tol) return c;
    c.cost = ev.cost;
    c.feasible = true;
    return c;
  };

  const double lo0 = topt.theta_floor, hi0 = topt.theta_max;
  double lo = lo0, hi = hi0;
  Candidate best;
  bool log_spaced = true;
  for (int round = 0; round <= spec.zoom_rounds; ++round) {
    double best_theta = best.feasible ? best.theta : 0.0;
    for (int s = 0; s < spec.sweep_points; ++s) {
      const double a = spec.sweep_points == 1
                           ? 0.0
                           : static_cast<double>(s) / (spec.sweep_points - 1);
      const double th = log_spaced ? lo * std::pow(hi / lo, a)
                                   : lo + a * (hi - lo);
      Candidate c = try_theta(th);
      if (c.feasible &&
          (!best.feasible || c.cost < best.cost - 1e-12 ||
           (std::abs(c.cost - best.cost) <= 1e-12 && c.theta < best.theta)))
        best = c;
    }
    if (!best.feasible) break;
    if (best.theta != best_theta || round == 0) {
      const double span = log_spaced ? best.theta * (std::pow(hi / lo, 1.0 / (spec.sweep_points - 1)) - 1.0)
                                     : (hi - lo) / (spec.sweep_points - 1);
      lo = std::max(lo0, best.theta - span);
      hi = std::min(hi0, best.theta + span);
      log_spaced = false;
    }
  }
  if (!best.feasible)
    throw ProblemError("solve_baseline: no feasible candidate in sweep");

  thetas[S - 1] = best.theta;
  NlpPoint p = fixed_theta_point(nlp, thetas, best.vars);
  return package(nlp, p, "baseline");
}

PipelineResult solve_pipeline(const OcpProblem& problem,
                              const ShootingGrid& grid,
                              const PipelineOptions& options) {
  using clock = std::chrono::steady_clock;
  auto ms = [](clock::time_point a, clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
  };

  PipelineResult out;
  TranscribedNlp nlp = transcribe(problem, grid);

  auto t0 = clock::now();
  LiftedSdp sdp = assemble(nlp, options.assemble);
  StandardForm sf = standard_form(sdp);
  auto t1 = clock::now();
  out.assemble_ms = ms(t0, t1);

  SdpSolution sol = solve(sf.program, options.solver);
  auto t2 = clock::now();
  out.solve_ms = ms(t1, t2);
  out.sdp_status = sol.status;
  out.sdp_iterations = sol.iterations;
  if (sol.status != SolveStatus::optimal &&
      sol.status != SolveStatus::max_iter) {
    out.J_cvx = sol.objective;
    return out;
  }
  out.J_cvx = sol.objective + sdp.objective_constant;

  out.extraction = extract(sol, sdp, nlp);
  out.report = tightness(sol, sdp);
  out.report.J_cvx = out.J_cvx;
  auto t3 = clock::now();
  out.extract_ms = ms(t2, t3);

  RefineResult ref = refine(nlp, out.extraction.trajectory.point, options.sqp);
  auto t4 = clock::now();
  out.refine_ms = ms(t3, t4);
  out.refined = ref.trajectory;
  out.refine_status = ref.status;
  out.J_rcvx = ref.trajectory.cost;
  out.report.J_rcvx = out.J_rcvx;
  if (out.J_rcvx > 0.0)
    out.report.sigma_rel = relaxation_gap(out.J_cvx, out.J_rcvx);
  return out;
}

}  // namespace ctsdr
