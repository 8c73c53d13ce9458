#include "ctsdr/transcription.hpp"

#include <cmath>

namespace ctsdr {

int ShootingGrid::total_intervals() const {
  int n = 0;
  for (int c : segment_counts) n += c;
  return n;
}

int ShootingGrid::segment_begin(int i) const {
  int n = 0;
  for (int l = 0; l < i; ++l) n += segment_counts[l];
  return n;
}

double EvalResult::max_residual() const {
  double m = 0.0;
  for (const auto& [name, r] : residuals) {
    if (r.size() > 0) m = std::max(m, r.cwiseAbs().maxCoeff());
  }
  return m;
}

TranscribedNlp transcribe(const OcpProblem& problem, const ShootingGrid& grid,
                          const TranscriptionOptions& options) {
  if (grid.num_segments() != problem.num_ctcs() + 1)
    throw ProblemError("grid must have M+1 segments");
  for (int c : grid.segment_counts)
    if (c < 1) throw ProblemError("every segment needs at least one interval");

  TranscribedNlp nlp;
  nlp.problem = validate(problem);
  nlp.grid = grid;
  nlp.options = options;

  // The time windows are open intervals; the transcription works with a
  // closed feasible set shrunk by a small margin so returned crossing
  // times are strictly inside the stated windows even when a bound is
  // active.
  for (auto& ctc : nlp.problem.ctcs) {
    const double m =
        std::min(options.window_margin, 0.25 * (ctc.tau_max - ctc.tau_min));
    ctc.tau_min += m;
    ctc.tau_max -= m;
  }

  const int nx = nlp.nx(), nu = nlp.nu(), d = nlp.wdim();
  // F w = x_{k+1} - x_k,  K (theta w) = theta (A x_k + B u_k).
  nlp.interval.F = Eigen::MatrixXd::Zero(nx, d);
  nlp.interval.F.leftCols(nx) = -Eigen::MatrixXd::Identity(nx, nx);
  nlp.interval.F.middleCols(nx, nx) = Eigen::MatrixXd::Identity(nx, nx);
  nlp.interval.K = Eigen::MatrixXd::Zero(nx, d);
  nlp.interval.K.leftCols(nx) = problem.dynamics.A;
  nlp.interval.K.rightCols(nu) = problem.dynamics.B;

  // Finite box rows G w - g >= 0 over (x_k, x_{k+1}, u_k).
  std::vector<std::pair<Eigen::RowVectorXd, double>> rows;
  auto add_box = [&](int col, double lo, double hi) {
    if (std::isfinite(lo)) {
      Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(d);
      r[col] = 1.0;
      rows.emplace_back(r, lo);
    }
    if (std::isfinite(hi)) {
      Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(d);
      r[col] = -1.0;
      rows.emplace_back(r, -hi);
    }
  };
  for (int j = 0; j < nx; ++j) {
    add_box(j, problem.bounds.x_min[j], problem.bounds.x_max[j]);
    add_box(nx + j, problem.bounds.x_min[j], problem.bounds.x_max[j]);
  }
  for (int j = 0; j < nu; ++j)
    add_box(2 * nx + j, problem.bounds.u_min[j], problem.bounds.u_max[j]);
  nlp.boxes.G.resize(static_cast<int>(rows.size()), d);
  nlp.boxes.g.resize(static_cast<int>(rows.size()));
  for (int r = 0; r < nlp.boxes.G.rows(); ++r) {
    nlp.boxes.G.row(r) = rows[r].first;
    nlp.boxes.g[r] = rows[r].second;
  }
  return nlp;
}

Eigen::VectorXd euler_step(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                           double theta, const LtiDynamics& dyn) {
  return x + theta * (dyn.A * x + dyn.B * u);
}

double stage_cost(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                  double theta, const CostWeights& cost) {
  return theta * (x.dot(cost.Q_x * x) + u.dot(cost.R_u * u));
}

double crossing_time(const Eigen::VectorXd& thetas, const ShootingGrid& grid,
                     int i) {
  if (i < 1 || i > grid.num_segments())
    throw std::out_of_range("crossing_time: segment index out of range");
  double t = 0.0;
  for (int l = 0; l < i; ++l) t += grid.segment_counts[l] * thetas[l];
  return t;
}

NlpPoint make_point(const TranscribedNlp& nlp) {
  NlpPoint p;
  const int S = nlp.grid.num_segments();
  p.states.resize(S);
  p.controls.resize(S);
  for (int i = 0; i < S; ++i) {
    const int N = nlp.grid.segment_counts[i];
    p.states[i].assign(N + 1, Eigen::VectorXd::Zero(nlp.nx()));
    p.controls[i].assign(N, Eigen::VectorXd::Zero(nlp.nu()));
  }
  p.thetas = Eigen::VectorXd::Zero(S);
  return p;
}

NlpPoint simulate(const TranscribedNlp& nlp,
                  const std::vector<std::vector<Eigen::VectorXd>>& controls,
                  const Eigen::VectorXd& thetas) {
  NlpPoint p = make_point(nlp);
  p.controls = controls;
  p.thetas = thetas;
  Eigen::VectorXd x = nlp.problem.x0;
  for (int i = 0; i < nlp.grid.num_segments(); ++i) {
    p.states[i][0] = x;
    for (int k = 0; k < nlp.grid.segment_counts[i]; ++k) {
      x = euler_step(x, controls[i][k], thetas[i], nlp.problem.dynamics);
      p.states[i][k + 1] = x;
    }
  }
  return p;
}

EvalResult evaluate(const TranscribedNlp& nlp, const NlpPoint& point) {
  const int S = nlp.grid.num_segments();
  if (static_cast<int>(point.states.size()) != S ||
      static_cast<int>(point.controls.size()) != S ||
      point.thetas.size() != S)
    throw ProblemError("evaluate: point dimensions do not match grid");
  for (int i = 0; i < S; ++i) {
    const int N = nlp.grid.segment_counts[i];
    if (static_cast<int>(point.states[i].size()) != N + 1 ||
        static_cast<int>(point.controls[i].size()) != N)
      throw ProblemError("evaluate: point dimensions do not match grid");
  }

  EvalResult out;
  const auto& prob = nlp.problem;

  // Cost.
  for (int i = 0; i < S; ++i) {
    out.cost += prob.cost.w_t * nlp.grid.segment_counts[i] * point.thetas[i];
    for (int k = 0; k < nlp.grid.segment_counts[i]; ++k)
      out.cost += stage_cost(point.states[i][k], point.controls[i][k],
                             point.thetas[i], prob.cost);
  }

  auto& res = out.residuals;
  res["boundary"] = Eigen::VectorXd(2 * nlp.nx());
  res["boundary"].head(nlp.nx()) = point.states[0][0] - prob.x0;
  res["boundary"].tail(nlp.nx()) =
      point.states[S - 1][nlp.grid.segment_counts[S - 1]] - prob.xf;

  Eigen::VectorXd dyn(nlp.nx() * nlp.grid.total_intervals());
  int at = 0;
  for (int i = 0; i < S; ++i)
    for (int k = 0; k < nlp.grid.segment_counts[i]; ++k) {
      dyn.segment(at, nlp.nx()) =
          point.states[i][k + 1] - euler_step(point.states[i][k],
                                              point.controls[i][k],
                                              point.thetas[i], prob.dynamics);
      at += nlp.nx();
    }
  res["dynamics"] = dyn;

  if (S > 1) {
    Eigen::VectorXd match(nlp.nx() * (S - 1));
    for (int i = 0; i + 1 < S; ++i)
      match.segment(i * nlp.nx(), nlp.nx()) =
          point.states[i][nlp.grid.segment_counts[i]] - point.states[i + 1][0];
    res["continuity"] = match;
  }

  // Characteristic-time equalities at segment-end nodes.
  int psi_rows = 0;
  for (const auto& c : prob.ctcs) psi_rows += static_cast<int>(c.target.size());
  Eigen::VectorXd psi(psi_rows);
  at = 0;
  for (int l = 0; l < prob.num_ctcs(); ++l) {
    const auto& c = prob.ctcs[l];
    psi.segment(at, c.target.size()) =
        c.selector * point.states[l][nlp.grid.segment_counts[l]] - c.target;
    at += static_cast<int>(c.target.size());
  }
  res["psi"] = psi;

  // Box violations (violation magnitude, 0 when satisfied).
  std::vector<double> box;
  auto viol = [&](double v, double lo, double hi) {
    double r = 0.0;
    if (std::isfinite(lo)) r = std::max(r, lo - v);
    if (std::isfinite(hi)) r = std::max(r, v - hi);
    box.push_back(r);
  };
  for (int i = 0; i < S; ++i) {
    for (int k = 0; k <= nlp.grid.segment_counts[i]; ++k)
      for (int j = 0; j < nlp.nx(); ++j)
        viol(point.states[i][k][j], prob.bounds.x_min[j], prob.bounds.x_max[j]);
    for (int k = 0; k < nlp.grid.segment_counts[i]; ++k)
      for (int j = 0; j < nlp.nu(); ++j)
        viol(point.controls[i][k][j], prob.bounds.u_min[j], prob.bounds.u_max[j]);
  }
  res["box"] = Eigen::Map<Eigen::VectorXd>(box.data(), box.size());

  Eigen::VectorXd th(2 * S);
  for (int i = 0; i < S; ++i) {
    th[2 * i] = std::max(0.0, nlp.options.theta_floor - point.thetas[i]);
    th[2 * i + 1] = std::max(0.0, point.thetas[i] - nlp.options.theta_max);
  }
  res["theta"] = th;

  Eigen::VectorXd win(2 * prob.num_ctcs());
  for (int l = 0; l < prob.num_ctcs(); ++l) {
    double tau = crossing_time(point.thetas, nlp.grid, l + 1);
    win[2 * l] = std::max(0.0, prob.ctcs[l].tau_min - tau);
    win[2 * l + 1] = std::max(0.0, tau - prob.ctcs[l].tau_max);
  }
  res["window"] = win;

  return out;
}

}  // namespace ctsdr
