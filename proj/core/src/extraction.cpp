#include "ctsdr/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace ctsdr {

ExtractionResult extract(const SdpSolution& solution, const LiftedSdp& sdp,
                         const TranscribedNlp& nlp) {
  if (solution.status != SolveStatus::optimal &&
      solution.status != SolveStatus::max_iter)
    throw ProblemError("extract: relaxation not solved");
  if (solution.blocks.size() != sdp.blocks.size())
    throw ProblemError("extract: block count mismatch");

  const LiftIndex& ix = sdp.index;
  const int nx = ix.n_x, nu = ix.n_u;
  const int S = sdp.grid.num_segments();

  ExtractionResult out;
  for (const auto& Y : solution.blocks)
    out.normalization_error =
        std::max(out.normalization_error,
                 std::abs(Y(LiftIndex::INV, LiftIndex::ONE) - 1.0));
  out.used_inv_row = out.normalization_error > 1e-4;
  if (out.normalization_error > 0.5)
    throw ProblemError("extract: normalization entry broken");

  NlpPoint p = make_point(nlp);
  for (int i = 0; i < S; ++i)
    p.thetas[i] = std::max(nlp.options.theta_floor,
                           solution.blocks[sdp.block_of(i, 0)](
                               LiftIndex::ONE, LiftIndex::ONE));

  auto read_w = [&](int b, double theta, int j) {
    const Eigen::MatrixXd& Y = solution.blocks[b];
    return out.used_inv_row ? theta * Y(LiftIndex::INV, ix.W(j))
                            : Y(LiftIndex::ONE, ix.W(j));
  };
  for (int i = 0; i < S; ++i) {
    const int N = sdp.grid.segment_counts[i];
    for (int k = 0; k < N; ++k) {
      const int b = sdp.block_of(i, k);
      for (int j = 0; j < nx; ++j)
        p.states[i][k][j] = read_w(b, p.thetas[i], j);
      for (int j = 0; j < nu; ++j)
        p.controls[i][k][j] = read_w(b, p.thetas[i], 2 * nx + j);
    }
    const int bl = sdp.block_of(i, N - 1);
    for (int j = 0; j < nx; ++j)
      p.states[i][N][j] = read_w(bl, p.thetas[i], nx + j);
  }

  EvalResult ev = evaluate(nlp, p);
  out.trajectory.point = std::move(p);
  out.trajectory.cost = ev.cost;
  out.trajectory.feasibility_residual = ev.max_residual();
  out.trajectory.source = "SDR-extracted";
  const int M = nlp.problem.num_ctcs();
  out.trajectory.crossing_times.resize(M);
  for (int l = 0; l < M; ++l)
    out.trajectory.crossing_times[l] =
        crossing_time(out.trajectory.point.thetas, sdp.grid, l + 1);
  return out;
}

double rank1_gap(const Eigen::MatrixXd& block, double theta) {
  Eigen::MatrixXd Y = 0.5 * theta * (block + block.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Y, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& ev = es.eigenvalues();  // ascending
  const int n = static_cast<int>(ev.size());
  const double lam1 = ev[n - 1];
  if (lam1 <= 0.0) return 0.0;
  if (ev[0] < -1e-8 * lam1)
    throw ProblemError("rank1_gap: block is not positive semidefinite");
  if (n < 2) return 0.0;
  return std::max(0.0, ev[n - 2]) / lam1;
}

double relaxation_gap(double J_cvx, double J_rcvx) {
  if (J_rcvx <= 0.0)
    throw ProblemError("relaxation_gap: nonpositive denominator");
  return (J_rcvx - J_cvx) / J_rcvx;
}

double optimality_delta(double J_base, double J_rcvx) {
  if (J_rcvx <= 0.0)
    throw ProblemError("optimality_delta: nonpositive denominator");
  return (J_base - J_rcvx) / J_rcvx;
}

TightnessReport tightness(const SdpSolution& solution, const LiftedSdp& sdp) {
  TightnessReport rep;
  for (size_t b = 0; b < solution.blocks.size(); ++b) {
    const double theta = solution.blocks[sdp.block_of(sdp.blocks[b].segment, 0)](
        LiftIndex::ONE, LiftIndex::ONE);
    rep.block_gaps.push_back(rank1_gap(solution.blocks[b], theta));
  }
  for (double g : rep.block_gaps) {
    rep.max_gap = std::max(rep.max_gap, g);
    rep.mean_gap += g;
  }
  if (!rep.block_gaps.empty()) rep.mean_gap /= rep.block_gaps.size();
  rep.J_cvx = solution.objective;
  return rep;
}

std::string TightnessReport::to_kv() const {
  char buf[96];
  std::string s;
  auto put = [&](const char* key, double v) {
    std::snprintf(buf, sizeof(buf), "%s=%.17g\n", key, v);
    s += buf;
  };
  put("J_cvx", J_cvx);
  put("J_rcvx", J_rcvx);
  if (has_baseline) put("J_base", J_base);
  put("sigma_rel", sigma_rel);
  if (has_baseline) put("delta_opt", delta_opt);
  put("max_gap", max_gap);
  put("mean_gap", mean_gap);
  for (size_t i = 0; i < block_gaps.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "gap_%zu=%.17g\n", i, block_gaps[i]);
    s += buf;
  }
  return s;
}

StandardSdr standard_sdr(const TranscribedNlp& nlp, int side_cap) {
  const int nx = nlp.nx(), nu = nlp.nu();
  const int S = nlp.grid.num_segments();
  const auto& N = nlp.grid.segment_counts;

  // Column layout of the monolithic lifted vector:
  // [1 | theta_1..theta_S | all node states and controls | theta-products].
  std::vector<int> state_off(S), control_off(S), seg_of_var;
  int nv = 0;
  for (int i = 0; i < S; ++i) {
    state_off[i] = nv;
    nv += (N[i] + 1) * nx;
    for (int k = 0; k < (N[i] + 1) * nx; ++k) seg_of_var.push_back(i);
  }
  for (int i = 0; i < S; ++i) {
    control_off[i] = nv;
    nv += N[i] * nu;
    for (int k = 0; k < N[i] * nu; ++k) seg_of_var.push_back(i);
  }
  const int base = 1 + S;
  const int side = 1 + S + 2 * nv;
  if (side > side_cap)
    throw ProblemError("standard_sdr: monolithic side exceeds cap");

  auto theta_col = [&](int i) { return 1 + i; };
  auto xvar = [&](int i, int k, int j) { return state_off[i] + k * nx + j; };
  auto uvar = [&](int i, int k, int j) { return control_off[i] + k * nu + j; };
  auto col = [&](int v) { return base + v; };
  auto pcol = [&](int v) { return base + nv + v; };

  ConicProgramBuilder B;
  B.add_psd_block(side);
  auto ent = [&](int row, int a, int b, double v) {
    if (v != 0.0) B.row_entry(row, 0, std::min(a, b), std::max(a, b), v);
  };
  auto ge = [&](double rhs) {  // converts >= rhs rows to equalities
    int row = B.new_row(rhs);
    int s = B.add_nonneg(1);
    B.row_nonneg(row, s, -1.0);
    return row;
  };

  // Normalization and product definitions.
  {
    int row = B.new_row(1.0);
    ent(row, 0, 0, 1.0);
  }
  for (int v = 0; v < nv; ++v) {
    int row = B.new_row(0.0);
    ent(row, 0, pcol(v), 1.0);
    ent(row, theta_col(seg_of_var[v]), col(v), -1.0);
  }

  // theta-product coupling: theta_floor v^2 <= theta v^2 <= theta_max v^2.
  for (int v = 0; v < nv; ++v) {
    int row = ge(0.0);
    ent(row, pcol(v), col(v), 1.0);
    ent(row, col(v), col(v), -nlp.options.theta_floor);
    row = ge(0.0);
    ent(row, col(v), col(v), nlp.options.theta_max);
    ent(row, pcol(v), col(v), -1.0);
  }

  const Eigen::MatrixXd& A = nlp.problem.dynamics.A;
  const Eigen::MatrixXd& Bd = nlp.problem.dynamics.B;

  std::set<std::pair<int, int>> tied;
  for (int i = 0; i < S; ++i) {
    for (int k = 0; k < N[i]; ++k) {
      std::vector<int> wv;  // interval variables in var-space
      for (int j = 0; j < nx; ++j) wv.push_back(xvar(i, k, j));
      for (int j = 0; j < nx; ++j) wv.push_back(xvar(i, k + 1, j));
      for (int j = 0; j < nu; ++j) wv.push_back(uvar(i, k, j));

      // Canonical product-pair ties within the interval.
      for (size_t a = 0; a < wv.size(); ++a)
        for (size_t b = a + 1; b < wv.size(); ++b) {
          auto key = std::minmax(wv[a], wv[b]);
          if (!tied.insert(key).second) continue;
          int row = B.new_row(0.0);
          ent(row, pcol(wv[a]), col(wv[b]), 1.0);
          ent(row, col(wv[a]), pcol(wv[b]), -1.0);
        }

      // Dynamics rows and their images multiplied by interval variables.
      for (int j = 0; j < nx; ++j) {
        int row = B.new_row(0.0);
        ent(row, 0, col(xvar(i, k + 1, j)), 1.0);
        ent(row, 0, col(xvar(i, k, j)), -1.0);
        for (int c = 0; c < nx; ++c)
          ent(row, 0, pcol(xvar(i, k, c)), -A(j, c));
        for (int c = 0; c < nu; ++c)
          ent(row, 0, pcol(uvar(i, k, c)), -Bd(j, c));
        for (int vp : wv) {
          int r2 = B.new_row(0.0);
          ent(r2, col(xvar(i, k + 1, j)), col(vp), 1.0);
          ent(r2, col(xvar(i, k, j)), col(vp), -1.0);
          for (int c = 0; c < nx; ++c)
            ent(r2, pcol(xvar(i, k, c)), col(vp), -A(j, c));
          for (int c = 0; c < nu; ++c)
            ent(r2, pcol(uvar(i, k, c)), col(vp), -Bd(j, c));
        }
      }
    }
  }

  // Boxes at the linear and theta-multiplied levels.
  auto box = [&](int v, double lo, double hi, int seg) {
    if (std::isfinite(lo)) {
      int row = ge(lo);
      ent(row, 0, col(v), 1.0);
      row = ge(0.0);
      ent(row, 0, pcol(v), 1.0);
      ent(row, 0, theta_col(seg), -lo);
    }
    if (std::isfinite(hi)) {
      int row = ge(-hi);
      ent(row, 0, col(v), -1.0);
      row = ge(0.0);
      ent(row, 0, pcol(v), -1.0);
      ent(row, 0, theta_col(seg), hi);
    }
  };
  for (int i = 0; i < S; ++i) {
    for (int k = 0; k <= N[i]; ++k)
      for (int j = 0; j < nx; ++j)
        box(xvar(i, k, j), nlp.problem.bounds.x_min[j],
            nlp.problem.bounds.x_max[j], i);
    for (int k = 0; k < N[i]; ++k)
      for (int j = 0; j < nu; ++j)
        box(uvar(i, k, j), nlp.problem.bounds.u_min[j],
            nlp.problem.bounds.u_max[j], i);
  }

  // Duration boxes, linear and on the theta-squared diagonal.
  for (int i = 0; i < S; ++i) {
    int row = ge(nlp.options.theta_floor);
    ent(row, 0, theta_col(i), 1.0);
    row = ge(-nlp.options.theta_max);
    ent(row, 0, theta_col(i), -1.0);
    row = ge(0.0);
    ent(row, theta_col(i), theta_col(i), 1.0);
    ent(row, 0, theta_col(i), -nlp.options.theta_floor);
    row = ge(0.0);
    ent(row, 0, theta_col(i), nlp.options.theta_max);
    ent(row, theta_col(i), theta_col(i), -1.0);
  }

  // Inter-segment continuity at the linear level.
  for (int i = 0; i + 1 < S; ++i)
    for (int j = 0; j < nx; ++j) {
      int row = B.new_row(0.0);
      ent(row, 0, col(xvar(i, N[i], j)), 1.0);
      ent(row, 0, col(xvar(i + 1, 0, j)), -1.0);
    }

  // Boundary conditions and selector equalities, with theta- and
  // variable-multiplied images over the containing interval.
  auto anchor = [&](int seg, int node, const Eigen::MatrixXd& Hm,
                    const Eigen::VectorXd& h) {
    const int kint = std::max(0, std::min(node, N[seg] - 1));
    std::vector<int> wv;
    for (int j = 0; j < nx; ++j) wv.push_back(xvar(seg, kint, j));
    for (int j = 0; j < nx; ++j) wv.push_back(xvar(seg, kint + 1, j));
    for (int j = 0; j < nu; ++j) wv.push_back(uvar(seg, kint, j));
    for (int p = 0; p < Hm.rows(); ++p) {
      int row = B.new_row(h[p]);
      for (int j = 0; j < nx; ++j)
        ent(row, 0, col(xvar(seg, node, j)), Hm(p, j));
      row = B.new_row(0.0);
      for (int j = 0; j < nx; ++j)
        ent(row, 0, pcol(xvar(seg, node, j)), Hm(p, j));
      ent(row, 0, theta_col(seg), -h[p]);
      for (int vp : wv) {
        row = B.new_row(0.0);
        for (int j = 0; j < nx; ++j)
          ent(row, col(xvar(seg, node, j)), col(vp), Hm(p, j));
        ent(row, 0, col(vp), -h[p]);
      }
    }
  };
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(nx, nx);
  anchor(0, 0, eye, nlp.problem.x0);
  anchor(S - 1, N[S - 1], eye, nlp.problem.xf);
  for (int l = 0; l < nlp.problem.num_ctcs(); ++l)
    anchor(l, N[l], nlp.problem.ctcs[l].selector, nlp.problem.ctcs[l].target);

  // Crossing-time windows.
  for (int l = 0; l < nlp.problem.num_ctcs(); ++l) {
    int row = ge(nlp.problem.ctcs[l].tau_min);
    for (int s = 0; s <= l; ++s) ent(row, 0, theta_col(s), N[s]);
    row = ge(-nlp.problem.ctcs[l].tau_max);
    for (int s = 0; s <= l; ++s) ent(row, 0, theta_col(s), -N[s]);
  }

  // Objective.
  for (int i = 0; i < S; ++i)
    B.objective_entry(0, 0, theta_col(i), nlp.problem.cost.w_t * N[i]);
  const Eigen::MatrixXd& Q = nlp.problem.cost.Q_x;
  const Eigen::MatrixXd& R = nlp.problem.cost.R_u;
  for (int i = 0; i < S; ++i)
    for (int k = 0; k < N[i]; ++k) {
      for (int j = 0; j < nx; ++j)
        for (int l = 0; l < nx; ++l)
          if (Q(j, l) != 0.0) {
            int a = pcol(xvar(i, k, j)), b = col(xvar(i, k, l));
            B.objective_entry(0, std::min(a, b), std::max(a, b), Q(j, l));
          }
      for (int j = 0; j < nu; ++j)
        for (int l = 0; l < nu; ++l)
          if (R(j, l) != 0.0) {
            int a = pcol(uvar(i, k, j)), b = col(uvar(i, k, l));
            B.objective_entry(0, std::min(a, b), std::max(a, b), R(j, l));
          }
    }

  StandardSdr out;
  out.program = B.build();
  out.side = side;
  return out;
}

}  // namespace ctsdr
