#include "ctsdr/lifting.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace ctsdr {

LiftIndex lift_index(int n_x, int n_u) {
  if (n_x < 1 || n_u < 1)
    throw ProblemError("lift_index: dimensions must be positive");
  return LiftIndex{n_x, n_u};
}

int LiftedSdp::block_of(int segment, int interval) const {
  return grid.segment_begin(segment) + interval;
}

std::map<std::string, int> LiftedSdp::family_counts() const {
  std::map<std::string, int> counts;
  for (const auto& c : equalities) ++counts[c.family];
  for (const auto& c : inequalities) ++counts[c.family];
  return counts;
}

LiftedSdp assemble(const TranscribedNlp& nlp, const AssembleOptions& options) {
  LiftedSdp sdp;
  sdp.index = lift_index(nlp.nx(), nlp.nu());
  sdp.grid = nlp.grid;
  sdp.options = nlp.options;
  const LiftIndex& ix = sdp.index;
  const int nx = nlp.nx(), nu = nlp.nu(), d = ix.d();
  const int S = nlp.grid.num_segments();

  for (int i = 0; i < S; ++i)
    for (int k = 0; k < nlp.grid.segment_counts[i]; ++k)
      sdp.blocks.push_back(LiftedBlock{i, k, ix});
  const int nb = static_cast<int>(sdp.blocks.size());

  auto eq = [&](const std::string& family) -> LinearConstraint& {
    sdp.equalities.push_back({{}, 0.0, family});
    return sdp.equalities.back();
  };
  auto ge = [&](const std::string& family) -> LinearConstraint& {
    sdp.inequalities.push_back({{}, 0.0, family});
    return sdp.inequalities.back();
  };
  auto term = [](LinearConstraint& c, int b, LiftedBlock::Entry e, double v) {
    if (v != 0.0) c.terms.push_back({b, e.first, e.second, v});
  };

  const Eigen::MatrixXd& F = nlp.interval.F;
  const Eigen::MatrixXd& K = nlp.interval.K;
  const Eigen::MatrixXd& G = nlp.boxes.G;
  const Eigen::VectorXd& g = nlp.boxes.g;
  const double th_floor = nlp.options.theta_floor;
  const double th_max = nlp.options.theta_max;

  // Window-implied duration bounds per segment: N_l theta_l is the gap
  // between consecutive crossing times, so the windows confine each
  // anchored segment's theta to an interval much tighter than the
  // global box. These bounds sharpen the theta rows and feed the
  // bound-times-box product family below.
  std::vector<double> th_lo(S, th_floor), th_hi(S, th_max);
  {
    double prev_min = 0.0, prev_max = 0.0;
    for (int l = 0; l < nlp.problem.num_ctcs(); ++l) {
      const auto& ctc = nlp.problem.ctcs[l];
      const double N = nlp.grid.segment_counts[l];
      th_lo[l] = std::max(th_floor, (ctc.tau_min - prev_max) / N);
      th_hi[l] = std::min(th_max, (ctc.tau_max - prev_min) / N);
      prev_min = ctc.tau_min;
      prev_max = ctc.tau_max;
    }
  }

  for (int b = 0; b < nb; ++b) {
    const LiftedBlock& B = sdp.blocks[b];

    {
      auto& c = eq("normalization");
      term(c, b, B.unit(), 1.0);
      c.rhs = 1.0;
    }
    // Duplicate-monomial ties inside one block: (INV, TH_j) also holds
    // w_j, and ww appears at both (W_j, TH_l) and (W_l, TH_j).
    for (int j = 0; j < d; ++j) {
      auto& c = eq("tie_w");
      c.terms.push_back({b, LiftIndex::INV, ix.TH(j), 1.0});
      term(c, b, B.w(j), -1.0);
    }
    if (!options.pruned) {
      for (int j = 0; j < d; ++j)
        for (int l = j + 1; l < d; ++l) {
          auto& c = eq("tie_ww");
          c.terms.push_back({b, ix.W(j), ix.TH(l), 1.0});
          c.terms.push_back({b, ix.W(l), ix.TH(j), -1.0});
        }
    }

    // Lifted dynamics families: F w = K theta w and its theta-scaled
    // and w-multiplied images.
    for (int p = 0; p < nx; ++p) {
      {
        auto& c = eq("dyn_w");
        for (int j = 0; j < d; ++j) {
          term(c, b, B.w(j), F(p, j));
          term(c, b, B.theta_w(j), -K(p, j));
        }
      }
      {
        auto& c = eq("dyn_w_over_theta");
        for (int j = 0; j < d; ++j) {
          term(c, b, B.w_over_theta(j), F(p, j));
          term(c, b, B.w(j), -K(p, j));
        }
      }
      if (!options.pruned) {
        for (int l = 0; l < d; ++l) {
          {
            auto& c = eq("dyn_ww");
            for (int j = 0; j < d; ++j) {
              term(c, b, B.ww(j, l), F(p, j));
              term(c, b, B.theta_ww(j, l), -K(p, j));
            }
          }
          {
            auto& c = eq("dyn_ww_over_theta");
            for (int j = 0; j < d; ++j) {
              term(c, b, B.ww_over_theta(j, l), F(p, j));
              term(c, b, B.ww(j, l), -K(p, j));
            }
          }
        }
      }
    }

    // Box inequalities G w >= g at the three lifted levels.
    for (int p = 0; p < G.rows(); ++p) {
      {
        auto& c = ge("box_w");
        for (int j = 0; j < d; ++j) term(c, b, B.w(j), G(p, j));
        c.rhs = g[p];
      }
      {
        auto& c = ge("box_theta_w");
        for (int j = 0; j < d; ++j) term(c, b, B.theta_w(j), G(p, j));
        term(c, b, B.theta(), -g[p]);
      }
      {
        auto& c = ge("box_w_over_theta");
        for (int j = 0; j < d; ++j) term(c, b, B.w_over_theta(j), G(p, j));
        term(c, b, B.inv_theta(), -g[p]);
      }
    }

    // Pairwise products of box rows, (G_p w - g_p)(G_q w - g_q) >= 0,
    // lifted at the three matrix levels. These RLT rows couple the w,
    // theta*w and theta entries of one block and close the gap left by
    // the vector-level boxes, which bound each level independently.
    if (!options.pruned) {
      for (int p = 0; p < G.rows(); ++p)
        for (int q = p; q < G.rows(); ++q) {
          {
            auto& c = ge("box_box_ww");
            for (int j = 0; j < d; ++j)
              for (int l = 0; l < d; ++l) {
                const double cf = G(p, j) * G(q, l);
                if (cf != 0.0) term(c, b, B.ww(j, l), cf);
              }
            for (int l = 0; l < d; ++l) {
              if (G(q, l) != 0.0) term(c, b, B.w(l), -g[p] * G(q, l));
              if (G(p, l) != 0.0) term(c, b, B.w(l), -g[q] * G(p, l));
            }
            c.rhs = -g[p] * g[q];
          }
          {
            auto& c = ge("box_box_theta_ww");
            for (int j = 0; j < d; ++j)
              for (int l = 0; l < d; ++l) {
                const double cf = G(p, j) * G(q, l);
                if (cf != 0.0) term(c, b, B.theta_ww(j, l), cf);
              }
            for (int l = 0; l < d; ++l) {
              if (G(q, l) != 0.0) term(c, b, B.theta_w(l), -g[p] * G(q, l));
              if (G(p, l) != 0.0) term(c, b, B.theta_w(l), -g[q] * G(p, l));
            }
            term(c, b, B.theta(), g[p] * g[q]);
          }
          {
            auto& c = ge("box_box_ww_over_theta");
            for (int j = 0; j < d; ++j)
              for (int l = 0; l < d; ++l) {
                const double cf = G(p, j) * G(q, l);
                if (cf != 0.0) term(c, b, B.ww_over_theta(j, l), cf);
              }
            for (int l = 0; l < d; ++l) {
              if (G(q, l) != 0.0) term(c, b, B.w_over_theta(l), -g[p] * G(q, l));
              if (G(p, l) != 0.0) term(c, b, B.w_over_theta(l), -g[q] * G(p, l));
            }
            term(c, b, B.inv_theta(), g[p] * g[q]);
          }
        }
    }

    // Duration box on both the theta and 1/theta entries, using the
    // window-implied per-segment bounds.
    const double lo = th_lo[B.segment], hi = th_hi[B.segment];
    {
      auto& c = ge("theta_box");
      term(c, b, B.theta(), 1.0);
      c.rhs = lo;
    }
    {
      auto& c = ge("theta_box");
      term(c, b, B.theta(), -1.0);
      c.rhs = -hi;
    }
    {
      auto& c = ge("theta_box");
      term(c, b, B.inv_theta(), 1.0);
      c.rhs = 1.0 / hi;
    }
    {
      auto& c = ge("theta_box");
      term(c, b, B.inv_theta(), -1.0);
      c.rhs = -1.0 / lo;
    }

    // Products of the duration bounds with the box rows, e.g.
    // (theta - lo)(G_p w - g_p) >= 0. These live entirely in the vector
    // part of the block (theta, w, theta*w, w/theta entries) and pin the
    // theta*w and w/theta levels against the window-implied duration
    // range. Only the sides that sharpen the global box are emitted.
    {
      const bool lo_active = lo > th_floor, hi_active = hi < th_max;
      for (int p = 0; p < G.rows(); ++p) {
        if (lo_active) {
          {
            auto& c = ge("theta_box_box");  // (theta - lo)(G_p w - g_p)
            for (int j = 0; j < d; ++j) {
              term(c, b, B.theta_w(j), G(p, j));
              term(c, b, B.w(j), -lo * G(p, j));
            }
            term(c, b, B.theta(), -g[p]);
            c.rhs = -lo * g[p];
          }
          {
            auto& c = ge("theta_box_box");  // (1/lo - 1/theta)(G_p w - g_p)
            for (int j = 0; j < d; ++j) {
              term(c, b, B.w(j), G(p, j) / lo);
              term(c, b, B.w_over_theta(j), -G(p, j));
            }
            term(c, b, B.inv_theta(), g[p]);
            c.rhs = g[p] / lo;
          }
        }
        if (hi_active) {
          {
            auto& c = ge("theta_box_box");  // (hi - theta)(G_p w - g_p)
            for (int j = 0; j < d; ++j) {
              term(c, b, B.w(j), hi * G(p, j));
              term(c, b, B.theta_w(j), -G(p, j));
            }
            term(c, b, B.theta(), g[p]);
            c.rhs = hi * g[p];
          }
          {
            auto& c = ge("theta_box_box");  // (1/theta - 1/hi)(G_p w - g_p)
            for (int j = 0; j < d; ++j) {
              term(c, b, B.w_over_theta(j), G(p, j));
              term(c, b, B.w(j), -G(p, j) / hi);
            }
            term(c, b, B.inv_theta(), -g[p]);
            c.rhs = -g[p] / hi;
          }
        }
      }
    }
  }

  // Intra-segment continuity between consecutive intervals: the i_a
  // slice of block k matches the i_b slice of block k+1 at every
  // monomial level, and both blocks carry the same theta.
  for (int i = 0; i < S; ++i) {
    for (int k = 0; k + 1 < nlp.grid.segment_counts[i]; ++k) {
      const int ba = sdp.block_of(i, k), bb = sdp.block_of(i, k + 1);
      const LiftedBlock& A = sdp.blocks[ba];
      const LiftedBlock& B = sdp.blocks[bb];
      for (int j = 0; j < nx; ++j) {
        {
          auto& c = eq("intra_w");
          term(c, ba, A.w(nx + j), 1.0);
          term(c, bb, B.w(j), -1.0);
        }
        {
          auto& c = eq("intra_theta_w");
          term(c, ba, A.theta_w(nx + j), 1.0);
          term(c, bb, B.theta_w(j), -1.0);
        }
        {
          auto& c = eq("intra_w_over_theta");
          term(c, ba, A.w_over_theta(nx + j), 1.0);
          term(c, bb, B.w_over_theta(j), -1.0);
        }
      }
      {
        auto& c = eq("intra_theta");
        term(c, ba, A.theta(), 1.0);
        term(c, bb, B.theta(), -1.0);
      }
      {
        auto& c = eq("intra_theta");
        term(c, ba, A.inv_theta(), 1.0);
        term(c, bb, B.inv_theta(), -1.0);
      }
      if (!options.pruned) {
        for (int j = 0; j < nx; ++j)
          for (int l = j; l < nx; ++l) {
            {
              auto& c = eq("intra_ww");
              term(c, ba, A.ww(nx + j, nx + l), 1.0);
              term(c, bb, B.ww(j, l), -1.0);
            }
            {
              auto& c = eq("intra_theta_ww");
              term(c, ba, A.theta_ww(nx + j, nx + l), 1.0);
              term(c, bb, B.theta_ww(j, l), -1.0);
            }
            {
              auto& c = eq("intra_ww_over_theta");
              term(c, ba, A.ww_over_theta(nx + j, nx + l), 1.0);
              term(c, bb, B.ww_over_theta(j, l), -1.0);
            }
          }
      }
    }
  }

  // Inter-segment continuity: theta changes across the boundary, so
  // only the theta-free monomial levels can be tied.
  for (int i = 0; i + 1 < S; ++i) {
    const int bl = sdp.block_of(i, nlp.grid.segment_counts[i] - 1);
    const int bf = sdp.block_of(i + 1, 0);
    const LiftedBlock& A = sdp.blocks[bl];
    const LiftedBlock& B = sdp.blocks[bf];
    for (int j = 0; j < nx; ++j) {
      auto& c = eq("inter_w");
      term(c, bl, A.w(nx + j), 1.0);
      term(c, bf, B.w(j), -1.0);
    }
    if (!options.pruned) {
      for (int j = 0; j < nx; ++j)
        for (int l = j; l < nx; ++l) {
          auto& c = eq("inter_ww");
          term(c, bl, A.ww(nx + j, nx + l), 1.0);
          term(c, bf, B.ww(j, l), -1.0);
        }
    }
  }

  // Selector equalities Hm x(slice) = h at all six lifted levels.
  auto add_selector = [&](int b, int slice, const Eigen::MatrixXd& Hm,
                          const Eigen::VectorXd& h, const std::string& prefix) {
    const LiftedBlock& B = sdp.blocks[b];
    for (int p = 0; p < Hm.rows(); ++p) {
      {
        auto& c = eq(prefix + "_w");
        for (int j = 0; j < nx; ++j) term(c, b, B.w(slice + j), Hm(p, j));
        c.rhs = h[p];
      }
      {
        auto& c = eq(prefix + "_theta_w");
        for (int j = 0; j < nx; ++j) term(c, b, B.theta_w(slice + j), Hm(p, j));
        term(c, b, B.theta(), -h[p]);
      }
      {
        auto& c = eq(prefix + "_w_over_theta");
        for (int j = 0; j < nx; ++j)
          term(c, b, B.w_over_theta(slice + j), Hm(p, j));
        term(c, b, B.inv_theta(), -h[p]);
      }
      if (!options.pruned) {
        for (int l = 0; l < d; ++l) {
          {
            auto& c = eq(prefix + "_ww");
            for (int j = 0; j < nx; ++j)
              term(c, b, B.ww(slice + j, l), Hm(p, j));
            term(c, b, B.w(l), -h[p]);
          }
          {
            auto& c = eq(prefix + "_theta_ww");
            for (int j = 0; j < nx; ++j)
              term(c, b, B.theta_ww(slice + j, l), Hm(p, j));
            term(c, b, B.theta_w(l), -h[p]);
          }
          {
            auto& c = eq(prefix + "_ww_over_theta");
            for (int j = 0; j < nx; ++j)
              term(c, b, B.ww_over_theta(slice + j, l), Hm(p, j));
            term(c, b, B.w_over_theta(l), -h[p]);
          }
        }
      }
    }
  };

  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(nx, nx);
  add_selector(0, 0, eye, nlp.problem.x0, "bc0");
  add_selector(nb - 1, nx, eye, nlp.problem.xf, "bcf");
  for (int l = 0; l < nlp.problem.num_ctcs(); ++l) {
    const auto& ctc = nlp.problem.ctcs[l];
    add_selector(sdp.block_of(l, nlp.grid.segment_counts[l] - 1), nx,
                 ctc.selector, ctc.target, "psi");
    // Mirror the anchor onto the i_b slice of the next segment's first
    // block. Redundant at rank one (state continuity), but it pins the
    // theta-scaled levels of the next segment, whose own duration
    // differs from the one the i_a-side anchor is scaled by.
    add_selector(sdp.block_of(l + 1, 0), 0, ctc.selector, ctc.target, "psi");
  }

  // Time windows on the accumulated crossing times, read from the
  // theta entry of each segment's first block.
  for (int l = 0; l < nlp.problem.num_ctcs(); ++l) {
    const auto& ctc = nlp.problem.ctcs[l];
    auto& lo = ge("window");
    for (int s = 0; s <= l; ++s)
      term(lo, sdp.block_of(s, 0), sdp.blocks[sdp.block_of(s, 0)].theta(),
           nlp.grid.segment_counts[s]);
    lo.rhs = ctc.tau_min;
    auto& hi = ge("window");
    for (int s = 0; s <= l; ++s)
      term(hi, sdp.block_of(s, 0), sdp.blocks[sdp.block_of(s, 0)].theta(),
           -static_cast<double>(nlp.grid.segment_counts[s]));
    hi.rhs = -ctc.tau_max;
  }

  // Objective: time weight on each segment's theta entry plus the
  // lifted stage costs on the theta-ww entries.
  for (int i = 0; i < S; ++i) {
    const int b = sdp.block_of(i, 0);
    const double coeff = nlp.problem.cost.w_t * nlp.grid.segment_counts[i];
    if (coeff != 0.0) {
      auto e = sdp.blocks[b].theta();
      sdp.objective.push_back({b, e.first, e.second, coeff});
    }
  }
  const Eigen::MatrixXd& Q = nlp.problem.cost.Q_x;
  const Eigen::MatrixXd& R = nlp.problem.cost.R_u;
  for (int b = 0; b < nb; ++b) {
    const LiftedBlock& B = sdp.blocks[b];
    for (int j = 0; j < nx; ++j)
      for (int l = j; l < nx; ++l) {
        const double coeff = (j == l) ? Q(j, j) : 2.0 * Q(j, l);
        if (coeff != 0.0) {
          auto e = B.theta_ww(j, l);
          sdp.objective.push_back({b, e.first, e.second, coeff});
        }
      }
    for (int j = 0; j < nu; ++j)
      for (int l = j; l < nu; ++l) {
        const double coeff = (j == l) ? R(j, j) : 2.0 * R(j, l);
        if (coeff != 0.0) {
          auto e = B.theta_ww(2 * nx + j, 2 * nx + l);
          sdp.objective.push_back({b, e.first, e.second, coeff});
        }
      }
  }
  return sdp;
}

StandardForm standard_form(const LiftedSdp& sdp) {
  ConicProgramBuilder builder;
  for (size_t i = 0; i < sdp.blocks.size(); ++i)
    builder.add_psd_block(sdp.index.r());
  StandardForm out;
  out.slack_count = static_cast<int>(sdp.inequalities.size());
  if (out.slack_count > 0) builder.add_nonneg(out.slack_count);

  for (const auto& t : sdp.objective)
    builder.objective_entry(t.block, t.p, t.q, t.coeff);
  builder.set_objective_constant(sdp.objective_constant);

  for (const auto& c : sdp.equalities) {
    const int row = builder.new_row(c.rhs);
    for (const auto& t : c.terms) builder.row_entry(row, t.block, t.p, t.q, t.coeff);
  }
  for (size_t i = 0; i < sdp.inequalities.size(); ++i) {
    const auto& c = sdp.inequalities[i];
    const int row = builder.new_row(c.rhs);
    for (const auto& t : c.terms) builder.row_entry(row, t.block, t.p, t.q, t.coeff);
    builder.row_nonneg(row, static_cast<int>(i), -1.0);
  }
  out.program = builder.build();
  return out;
}

std::vector<Eigen::MatrixXd> lift_point(const NlpPoint& point,
                                        const ShootingGrid& grid,
                                        const LiftIndex& index,
                                        double theta_floor) {
  const int nx = index.n_x, nu = index.n_u, d = index.d();
  std::vector<Eigen::MatrixXd> blocks;
  for (int i = 0; i < grid.num_segments(); ++i) {
    const double theta = point.thetas[i];
    if (theta < theta_floor)
      throw ProblemError("lift_point: theta below floor");
    for (int k = 0; k < grid.segment_counts[i]; ++k) {
      Eigen::VectorXd y(index.r());
      y[LiftIndex::INV] = 1.0;
      y[LiftIndex::ONE] = theta;
      y.segment(2, nx) = point.states[i][k];
      y.segment(2 + nx, nx) = point.states[i][k + 1];
      y.segment(2 + 2 * nx, nu) = point.controls[i][k];
      y.segment(2 + d, d) = theta * y.segment(2, d);
      blocks.push_back(y * y.transpose() / theta);
    }
  }
  return blocks;
}

double eval_terms(const std::vector<LinearTerm>& terms,
                  const std::vector<Eigen::MatrixXd>& blocks) {
  double v = 0.0;
  for (const auto& t : terms) v += t.coeff * blocks[t.block](t.p, t.q);
  return v;
}

LiftedEval evaluate_lifted(const LiftedSdp& sdp,
                           const std::vector<Eigen::MatrixXd>& blocks) {
  LiftedEval out;
  out.objective = sdp.objective_constant + eval_terms(sdp.objective, blocks);
  for (const auto& c : sdp.equalities)
    out.max_equality_violation = std::max(
        out.max_equality_violation, std::abs(eval_terms(c.terms, blocks) - c.rhs));
  for (const auto& c : sdp.inequalities)
    out.max_inequality_violation =
        std::max(out.max_inequality_violation,
                 std::max(0.0, c.rhs - eval_terms(c.terms, blocks)));
  return out;
}

void dump_sdp(const LiftedSdp& sdp, std::ostream& os) {
  os << "blocks " << sdp.blocks.size() << "\n";
  os << "sides";
  for (size_t i = 0; i < sdp.blocks.size(); ++i) os << " " << sdp.index.r();
  os << "\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  os << "objective_constant " << num(sdp.objective_constant) << "\n";
  for (const auto& t : sdp.objective)
    os << "obj " << t.block << " " << t.p << " " << t.q << " " << num(t.coeff)
       << "\n";
  int id = 0;
  auto emit = [&](const LinearConstraint& c, const char* sense) {
    os << sense << " " << id << " " << num(c.rhs) << " " << c.family << "\n";
    for (const auto& t : c.terms)
      os << "c " << id << " " << t.block << " " << t.p << " " << t.q << " "
         << num(t.coeff) << "\n";
    ++id;
  };
  for (const auto& c : sdp.equalities) emit(c, "eq");
  for (const auto& c : sdp.inequalities) emit(c, "ge");
}

}  // namespace ctsdr
