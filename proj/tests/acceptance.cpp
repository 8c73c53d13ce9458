// End-to-end acceptance run: ten pinned criteria, one line each.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ctsdr/io.hpp"
#include "ctsdr/refine.hpp"

using namespace ctsdr;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("criterion %2d %-28s %s  (%s)\n", id, name.c_str(),
              ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return std::string(buf);
}

double wall_ms(const std::function<void()>& fn) {
  auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

struct SweepRow {
  double v0, J_cvx, J_rcvx, J_base, sigma_rel, delta_opt;
};

}  // namespace

int main() {
  // ---- 1: metric identities on a solved instance (0.01 % slack) ----
  try {
    OcpProblem p = double_integrator_benchmark(0.5);
    ShootingGrid grid{{5, 5}};
    TranscribedNlp nlp = transcribe(p, grid);
    LiftedSdp sdp = assemble(nlp);
    SdpSolution sol = solve(standard_form(sdp).program);
    ExtractionResult ex = extract(sol, sdp, nlp);
    RefineResult ref = refine(nlp, ex.trajectory.point);
    TrajectorySolution base = solve_baseline(p, grid);
    TightnessReport rep = tightness(sol, sdp);

    double J_cvx = rep.J_cvx;
    double J_rcvx = ref.trajectory.cost;
    double tol = 1e-4;
    bool ok = sol.status == SolveStatus::optimal &&
              ref.status == RefineStatus::converged;
    double sig = relaxation_gap(J_cvx, J_rcvx);
    double del = optimality_delta(base.cost, J_rcvx);
    ok = ok && std::abs(sig - (J_rcvx - J_cvx) / J_rcvx) <= tol;
    ok = ok && std::abs(del - (base.cost - J_rcvx) / J_rcvx) <= tol;
    double mx = 0.0, mean = 0.0;
    for (size_t i = 0; i < rep.block_gaps.size(); ++i) {
      mx = std::max(mx, rep.block_gaps[i]);
      mean += rep.block_gaps[i];
    }
    mean /= static_cast<double>(rep.block_gaps.size());
    ok = ok && std::abs(rep.max_gap - mx) <= tol * (1 + mx);
    ok = ok && std::abs(rep.mean_gap - mean) <= tol * (1 + mean);
    ok = ok && std::abs(rep.J_cvx - (sol.objective + sdp.objective_constant)) <=
                   tol * (1 + std::abs(rep.J_cvx));
    report(1, "metric identities", ok,
           fmt("J_cvx=%.6f J_rcvx=%.6f sigma=%.3e delta=%.3e", J_cvx, J_rcvx,
               sig, del));
  } catch (const std::exception& e) {
    report(1, "metric identities", false, e.what());
  }

  // ---- 2: lifted containment of sampled feasible points ----
  try {
    OcpProblem p = double_integrator_benchmark(0.5);
    ShootingGrid grid{{5, 5}};
    TranscribedNlp nlp = transcribe(p, grid);
    LiftedSdp sdp = assemble(nlp);
    const double lo_tau = nlp.problem.ctcs[0].tau_min;
    const double hi_tau = nlp.problem.ctcs[0].tau_max;

    std::mt19937 rng(17);
    std::uniform_real_distribution<double> utau(lo_tau, hi_tau);
    std::uniform_real_distribution<double> uth(0.06, 0.40);
    std::uniform_real_distribution<double> umix(0.0, 1.0);
    std::uniform_real_distribution<double> utilt(-0.1, 0.1);

    int lifted = 0;
    double worst_eq = 0.0, worst_ineq = 0.0, worst_obj = 0.0;
    for (int draw = 0; draw < 400 && lifted < 200; ++draw) {
      Eigen::VectorXd th(2);
      th << utau(rng) / 5.0, uth(rng);
      QpProblem qp = fixed_theta_qp(nlp, th);
      QpSolution a = solve_qp(qp);
      if (a.status != QpStatus::optimal) continue;
      // A second optimum of a tilted objective: a distinct feasible
      // point of the same convex set, plus a strict convex combination.
      QpProblem tilted = qp;
      for (int j = 0; j < tilted.q.size(); ++j) tilted.q[j] += utilt(rng);
      QpSolution b = solve_qp(tilted);
      std::vector<Eigen::VectorXd> cands = {a.d};
      if (b.status == QpStatus::optimal) {
        cands.push_back(b.d);
        double al = umix(rng);
        cands.push_back(al * a.d + (1 - al) * b.d);
      }
      for (const Eigen::VectorXd& d : cands) {
        NlpPoint pt = fixed_theta_point(nlp, th, d);
        EvalResult ev = evaluate(nlp, pt);
        if (!ev.feasible(1e-7)) continue;
        std::vector<Eigen::MatrixXd> blocks = lift_point(pt, grid, sdp.index);
        LiftedEval le = evaluate_lifted(sdp, blocks);
        worst_eq = std::max(worst_eq, le.max_equality_violation);
        worst_ineq = std::max(worst_ineq, le.max_inequality_violation);
        worst_obj = std::max(
            worst_obj, std::abs(le.objective - ev.cost) / (1 + std::abs(ev.cost)));
        ++lifted;
      }
    }
    bool ok = lifted >= 200 && worst_eq <= 1e-8 && worst_ineq <= 1e-8 &&
              worst_obj <= 1e-8;
    report(2, "lifted containment", ok,
           fmt("samples=%d eq=%.2e ineq=%.2e obj=%.2e", lifted, worst_eq,
               worst_ineq, worst_obj));
  } catch (const std::exception& e) {
    report(2, "lifted containment", false, e.what());
  }

  // ---- 3: relaxation bound against a brute-force duration scan ----
  try {
    OcpProblem p = double_integrator_benchmark(0.0);
    ShootingGrid grid{{4, 4}};
    TranscribedNlp nlp = transcribe(p, grid);

    double best = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= 200; ++i) {
      double th1 = 0.005 * i;
      double tau = 4.0 * th1;
      if (tau < nlp.problem.ctcs[0].tau_min || tau > nlp.problem.ctcs[0].tau_max)
        continue;
      for (int j = 1; j <= 200; ++j) {
        Eigen::VectorXd th(2);
        th << th1, 0.005 * j;
        QpSolution s = solve_qp(fixed_theta_qp(nlp, th));
        if (s.status != QpStatus::optimal) continue;
        EvalResult ev = evaluate(nlp, fixed_theta_point(nlp, th, s.d));
        if (ev.feasible(1e-5)) best = std::min(best, ev.cost);
      }
    }

    LiftedSdp sdp = assemble(nlp);
    SdpSolution sol = solve(standard_form(sdp).program);
    double J_cvx = sol.objective + sdp.objective_constant;
    bool ok = sol.status == SolveStatus::optimal &&
              std::abs(best - 2.8444458175) <= 1e-6 && J_cvx <= best + 1e-6;
    report(3, "bound below duration scan", ok,
           fmt("scan=%.8f J_cvx=%.8f", best, J_cvx));
  } catch (const std::exception& e) {
    report(3, "bound below duration scan", false, e.what());
  }

  // ---- 4 and 5: initial-speed sweep, tightness and baseline margin ----
  std::vector<SweepRow> rows;
  try {
    for (double v0 : {0.0, 0.2, 0.3, 0.5, 0.7, 0.9, 1.0}) {
      OcpProblem p = double_integrator_benchmark(v0);
      ShootingGrid grid{{10, 10}};
      PipelineResult r = solve_pipeline(p, grid);
      TrajectorySolution base = solve_baseline(p, grid);
      if (r.sdp_status != SolveStatus::optimal ||
          r.refine_status != RefineStatus::converged)
        throw ProblemError(fmt("sweep v0=%.1f did not converge", v0));
      rows.push_back({v0, r.J_cvx, r.J_rcvx, base.cost,
                      relaxation_gap(r.J_cvx, r.J_rcvx),
                      optimality_delta(base.cost, r.J_rcvx)});
    }
    bool ok = rows.size() == 7;
    double worst = -1.0;
    for (const SweepRow& r : rows) {
      double cap = (r.v0 >= 0.9) ? 0.05 : 0.01;
      ok = ok && r.sigma_rel <= cap && r.sigma_rel >= -1e-3;
      worst = std::max(worst, std::abs(r.sigma_rel));
    }
    report(4, "sweep relaxation gap", ok, fmt("max |sigma_rel|=%.3e", worst));
  } catch (const std::exception& e) {
    report(4, "sweep relaxation gap", false, e.what());
  }
  try {
    bool ok = rows.size() == 7;
    int strict = 0;
    double lo = std::numeric_limits<double>::infinity();
    for (const SweepRow& r : rows) {
      ok = ok && r.delta_opt >= 0.0;
      if (r.delta_opt >= 0.01) ++strict;
      lo = std::min(lo, r.delta_opt);
    }
    ok = ok && 2 * strict >= static_cast<int>(rows.size());
    report(5, "baseline optimality delta", ok,
           fmt("min delta=%.3e, >=1%% on %d/7", lo, strict));
  } catch (const std::exception& e) {
    report(5, "baseline optimality delta", false, e.what());
  }

  // ---- 6: binding window bounds are attained ----
  try {
    ShootingGrid grid{{5, 5}};
    PipelineResult lo =
        solve_pipeline(double_integrator_benchmark(0.5, {1.7, 2.0}), grid);
    PipelineResult hi =
        solve_pipeline(double_integrator_benchmark(0.5, {0.5, 0.8}), grid);
    bool ok = lo.sdp_status == SolveStatus::optimal &&
              hi.sdp_status == SolveStatus::optimal &&
              lo.refine_status == RefineStatus::converged &&
              hi.refine_status == RefineStatus::converged;
    double tau_lo = ok ? lo.refined.crossing_times[0] : -1.0;
    double tau_hi = ok ? hi.refined.crossing_times[0] : -1.0;
    ok = ok && std::abs(tau_lo - 1.7) <= 1.1e-6 && std::abs(tau_hi - 0.8) <= 1.1e-6;
    report(6, "binding window bounds", ok,
           fmt("tau(low-binding)=%.7f tau(high-binding)=%.7f", tau_lo, tau_hi));
  } catch (const std::exception& e) {
    report(6, "binding window bounds", false, e.what());
  }

  // ---- 7: block-structured relaxation beats the monolithic one 5x ----
  try {
    OcpProblem p = double_integrator_benchmark(0.5);
    ShootingGrid grid{{20, 20}};
    TranscribedNlp nlp = transcribe(p, grid);
    SolverSettings st;
    st.eps_primal = st.eps_dual = st.eps_gap = 1e-6;

    ConicProgram fast = standard_form(assemble(nlp)).program;
    ConicProgram mono = standard_sdr(nlp).program;
    SdpSolution fast_sol, mono_sol;
    double fast_ms = wall_ms([&] { fast_sol = solve(fast, st); });
    double mono_ms = wall_ms([&] { mono_sol = solve(mono, st); });
    bool ok = fast_sol.status == SolveStatus::optimal &&
              mono_sol.status == SolveStatus::optimal &&
              5.0 * fast_ms <= mono_ms;
    report(7, "5x faster than monolithic", ok,
           fmt("fast=%.0fms monolithic=%.0fms ratio=%.1f", fast_ms, mono_ms,
               mono_ms / fast_ms));
  } catch (const std::exception& e) {
    report(7, "5x faster than monolithic", false, e.what());
  }

  // ---- 8: waypoint scenarios, open windows and active last window ----
  PipelineResult wp_result[2];
  bool wp_ok[2] = {false, false};
  try {
    bool ok = true;
    std::string detail;
    for (int sc : {1, 2}) {
      OcpProblem p = waypoint_problem(sc);
      ShootingGrid grid{{10, 10, 10, 10, 10}};
      PipelineOptions opt;
      opt.assemble.pruned = true;
      PipelineResult r = solve_pipeline(p, grid, opt);
      wp_result[sc - 1] = r;
      bool this_ok = r.sdp_status == SolveStatus::optimal &&
                     r.refine_status == RefineStatus::converged &&
                     r.refined.crossing_times.size() == 4;
      if (this_ok) {
        for (int l = 0; l < 4; ++l) {
          double tau = r.refined.crossing_times[l];
          this_ok = this_ok && tau > p.ctcs[l].tau_min && tau < p.ctcs[l].tau_max;
        }
        this_ok = this_ok &&
                  std::abs(r.refined.crossing_times[3] - p.ctcs[3].tau_min) <= 0.05;
        detail += fmt("sc%d tau4=%.6f/%.1f ", sc,
                      r.refined.crossing_times[3], p.ctcs[3].tau_min);
      } else {
        detail += fmt("sc%d failed ", sc);
      }
      wp_ok[sc - 1] = this_ok;
      ok = ok && this_ok;
    }
    report(8, "waypoint scenarios", ok, detail);
  } catch (const std::exception& e) {
    report(8, "waypoint scenarios", false, e.what());
  }

  // ---- 9: solver certificates on analytic programs ----
  try {
    SolverSettings tight;
    tight.eps_primal = tight.eps_dual = tight.eps_gap = 1e-10;

    ConicProgramBuilder b1;
    int blk = b1.add_psd_block(1);
    b1.objective_entry(blk, 0, 0, 1.0);
    b1.row_entry(b1.new_row(3.0), blk, 0, 0, 1.0);
    SdpSolution s1 = solve(b1.build(), tight);

    ConicProgramBuilder b2;
    blk = b2.add_psd_block(2);
    b2.objective_entry(blk, 0, 0, 1.0);
    b2.objective_entry(blk, 1, 1, 1.0);
    b2.row_entry(b2.new_row(1.0), blk, 0, 1, 1.0);
    SdpSolution s2 = solve(b2.build(), tight);

    bool ok = s1.status == SolveStatus::optimal &&
              s2.status == SolveStatus::optimal &&
              std::abs(s1.objective - 3.0) <= 1e-8 &&
              std::abs(s2.objective - 2.0) <= 1e-8;
    for (const SdpSolution* s : {&s1, &s2})
      for (const IterateRecord& it : s->trace)
        ok = ok && it.dual_objective <=
                       it.primal_objective +
                           1e-6 * (1.0 + std::abs(it.primal_objective));

    ConicProgramBuilder b3;
    blk = b3.add_psd_block(1);
    b3.objective_entry(blk, 0, 0, 1.0);
    b3.row_entry(b3.new_row(-1.0), blk, 0, 0, 1.0);
    ok = ok && solve(b3.build()).status == SolveStatus::infeasible;

    report(9, "analytic solver checks", ok,
           fmt("pin err=%.1e trace err=%.1e", std::abs(s1.objective - 3.0),
               std::abs(s2.objective - 2.0)));
  } catch (const std::exception& e) {
    report(9, "analytic solver checks", false, e.what());
  }

  // ---- 10: refined trajectories stitch and export cleanly ----
  try {
    OcpProblem p = double_integrator_benchmark(0.5);
    ShootingGrid grid{{5, 5}};
    TranscribedNlp nlp = transcribe(p, grid);
    PipelineResult r = solve_pipeline(p, grid);

    bool ok = r.refine_status == RefineStatus::converged;
    double cont = evaluate(nlp, r.refined.point)
                      .residuals.at("continuity")
                      .cwiseAbs()
                      .maxCoeff();
    ok = ok && cont <= 1e-6;

    double wp_cont = -1.0;
    if (wp_ok[0]) {
      TranscribedNlp wnlp =
          transcribe(waypoint_problem(1), ShootingGrid{{10, 10, 10, 10, 10}});
      wp_cont = evaluate(wnlp, wp_result[0].refined.point)
                    .residuals.at("continuity")
                    .cwiseAbs()
                    .maxCoeff();
      ok = ok && wp_cont <= 1e-6;
    } else {
      ok = false;
    }

    std::stringstream csv;
    write_trajectory_csv(r.refined, grid, csv);
    std::string line;
    std::getline(csv, line);  // header
    double prev = -1.0;
    int rows_read = 0;
    bool increasing = true;
    while (std::getline(csv, line)) {
      double t = std::stod(line.substr(0, line.find(',')));
      increasing = increasing && t > prev;
      prev = t;
      ++rows_read;
    }
    ok = ok && increasing && rows_read == 11;
    report(10, "continuity and export", ok,
           fmt("cont=%.2e wp_cont=%.2e csv_rows=%d increasing=%d", cont,
               wp_cont, rows_read, static_cast<int>(increasing)));
  } catch (const std::exception& e) {
    report(10, "continuity and export", false, e.what());
  }

  std::printf("%s (%d criterion failure%s)\n",
              failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED",
              failures, failures == 1 ? "" : "s");
  return failures == 0 ? 0 : 1;
}
