#include "ctsdr/qp.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <vector>

namespace ctsdr {

QpSolution solve_qp(const QpProblem& qp, const QpSettings& settings) {
  const int n = qp.num_vars();
  const int me = static_cast<int>(qp.f.size());
  const int mi = static_cast<int>(qp.u.size());
  const double reg = settings.regularization;

  QpSolution sol;
  sol.d = Eigen::VectorXd::Zero(n);
  sol.y = Eigen::VectorXd::Zero(me);
  sol.lambda = Eigen::VectorXd::Ones(mi);
  sol.s = Eigen::VectorXd::Ones(mi);
  if (mi > 0)
    sol.s = (qp.u - qp.C * sol.d).cwiseMax(1.0);

  const double scale =
      1.0 + std::max({qp.q.size() ? qp.q.cwiseAbs().maxCoeff() : 0.0,
                      me ? qp.f.cwiseAbs().maxCoeff() : 0.0,
                      mi ? qp.u.cwiseAbs().maxCoeff() : 0.0});

  // Sparse KKT system; only the slack/multiplier diagonal changes per
  // iteration, so the symbolic analysis is done once.
  const int dim = n + me + mi;
  std::vector<Eigen::Triplet<double>> base;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (qp.P(i, j) != 0.0) base.emplace_back(i, j, qp.P(i, j));
  for (int i = 0; i < n; ++i) base.emplace_back(i, i, reg);
  for (int i = 0; i < me; ++i) {
    for (int j = 0; j < n; ++j)
      if (qp.E(i, j) != 0.0) {
        base.emplace_back(n + i, j, qp.E(i, j));
        base.emplace_back(j, n + i, qp.E(i, j));
      }
    base.emplace_back(n + i, n + i, -reg);
  }
  for (int i = 0; i < mi; ++i)
    for (int j = 0; j < n; ++j)
      if (qp.C(i, j) != 0.0) {
        base.emplace_back(n + me + i, j, qp.C(i, j));
        base.emplace_back(j, n + me + i, qp.C(i, j));
      }
  Eigen::SparseMatrix<double> kkt(dim, dim);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  bool analyzed = false;
  Eigen::VectorXd rhs(dim), step(dim);

  for (int iter = 0; iter < settings.max_iterations; ++iter) {
    Eigen::VectorXd rq = qp.P * sol.d + qp.q;
    if (me) rq += qp.E.transpose() * sol.y;
    if (mi) rq += qp.C.transpose() * sol.lambda;
    Eigen::VectorXd re = me ? Eigen::VectorXd(qp.E * sol.d - qp.f)
                            : Eigen::VectorXd(0);
    Eigen::VectorXd rc = mi ? Eigen::VectorXd(qp.C * sol.d + sol.s - qp.u)
                            : Eigen::VectorXd(0);
    double mu = mi ? sol.s.dot(sol.lambda) / mi : 0.0;

    double worst = rq.cwiseAbs().maxCoeff();
    if (me) worst = std::max(worst, re.cwiseAbs().maxCoeff());
    if (mi) worst = std::max(worst, rc.cwiseAbs().maxCoeff());
    if (worst / scale <= settings.tol && mu <= settings.tol) {
      sol.status = QpStatus::optimal;
      sol.objective = 0.5 * sol.d.dot(qp.P * sol.d) + qp.q.dot(sol.d);
      sol.iterations = iter;
      return sol;
    }

    std::vector<Eigen::Triplet<double>> trips = base;
    for (int i = 0; i < mi; ++i)
      trips.emplace_back(n + me + i, n + me + i,
                         -sol.s[i] / sol.lambda[i] - reg);
    kkt.setFromTriplets(trips.begin(), trips.end());
    if (!analyzed) {
      lu.analyzePattern(kkt);
      analyzed = true;
    }
    lu.factorize(kkt);
    if (lu.info() != Eigen::Success) {
      sol.status = QpStatus::numerical_failure;
      sol.iterations = iter;
      return sol;
    }

    auto direction = [&](const Eigen::VectorXd& rs, Eigen::VectorXd& dd,
                         Eigen::VectorXd& dy, Eigen::VectorXd& dl,
                         Eigen::VectorXd& ds) {
      rhs.head(n) = -rq;
      if (me) rhs.segment(n, me) = -re;
      if (mi)
        rhs.tail(mi) = -rc + rs.cwiseQuotient(sol.lambda);
      step = lu.solve(rhs);
      dd = step.head(n);
      dy = step.segment(n, me);
      dl = step.tail(mi);
      if (mi)
        ds = -(rs + sol.s.cwiseProduct(dl)).cwiseQuotient(sol.lambda);
      else
        ds.resize(0);
    };

    auto max_step = [](const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
      double a = 1.0;
      for (int i = 0; i < v.size(); ++i)
        if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
      return a;
    };

    // Predictor.
    Eigen::VectorXd dd, dy, dl, ds;
    Eigen::VectorXd rs_aff =
        mi ? Eigen::VectorXd(sol.s.cwiseProduct(sol.lambda))
           : Eigen::VectorXd(0);
    direction(rs_aff, dd, dy, dl, ds);
    if (!dd.allFinite()) {
      sol.status = QpStatus::numerical_failure;
      sol.iterations = iter;
      return sol;
    }

    double sigma = 0.0;
    Eigen::VectorXd rs = rs_aff;
    if (mi) {
      double ap = max_step(sol.s, ds);
      double ad = max_step(sol.lambda, dl);
      double mu_aff = (sol.s + ap * ds).dot(sol.lambda + ad * dl) / mi;
      sigma = std::pow(std::clamp(mu_aff / std::max(mu, 1e-300), 0.0, 1.0), 3.0);
      rs = rs_aff + ds.cwiseProduct(dl) -
           Eigen::VectorXd::Constant(mi, sigma * mu);
    }

    // Corrector.
    direction(rs, dd, dy, dl, ds);
    double ap = 1.0, ad = 1.0;
    if (mi) {
      ap = std::min(1.0, 0.995 * max_step(sol.s, ds));
      ad = std::min(1.0, 0.995 * max_step(sol.lambda, dl));
    }
    sol.d += ap * dd;
    sol.y += ad * dy;
    if (mi) {
      sol.s += ap * ds;
      sol.lambda += ad * dl;
    }
  }

  sol.status = QpStatus::max_iter;
  sol.objective = 0.5 * sol.d.dot(qp.P * sol.d) + qp.q.dot(sol.d);
  sol.iterations = settings.max_iterations;
  return sol;
}

ElasticQpSolution solve_qp_elastic(const QpProblem& qp, double rho,
                                   const QpSettings& settings) {
  const int n = qp.num_vars();
  const int me = static_cast<int>(qp.f.size());
  const int mi = static_cast<int>(qp.u.size());
  const int ne = n + 2 * me + mi;  // d, t+, t-, e

  QpProblem aug;
  aug.P = Eigen::MatrixXd::Zero(ne, ne);
  aug.P.topLeftCorner(n, n) = qp.P;
  aug.q = Eigen::VectorXd::Constant(ne, rho);
  aug.q.head(n) = qp.q;

  // E d + t+ - t- = f
  aug.E = Eigen::MatrixXd::Zero(me, ne);
  aug.E.leftCols(n) = qp.E;
  aug.E.block(0, n, me, me) = Eigen::MatrixXd::Identity(me, me);
  aug.E.block(0, n + me, me, me) = -Eigen::MatrixXd::Identity(me, me);
  aug.f = qp.f;

  // C d - e <= u, plus nonnegativity of all elastics.
  const int mia = mi + 2 * me + mi;
  aug.C = Eigen::MatrixXd::Zero(mia, ne);
  aug.u = Eigen::VectorXd::Zero(mia);
  aug.C.topLeftCorner(mi, n) = qp.C;
  aug.C.block(0, n + 2 * me, mi, mi) = -Eigen::MatrixXd::Identity(mi, mi);
  aug.u.head(mi) = qp.u;
  aug.C.block(mi, n, 2 * me + mi, 2 * me + mi) =
      -Eigen::MatrixXd::Identity(2 * me + mi, 2 * me + mi);

  ElasticQpSolution out;
  out.inner = solve_qp(aug, settings);
  out.d = out.inner.d.head(n);
  out.elastic_mass = out.inner.d.tail(2 * me + mi).cwiseMax(0.0).sum();
  out.objective = 0.5 * out.d.dot(qp.P * out.d) + qp.q.dot(out.d);
  return out;
}

}  // namespace ctsdr
