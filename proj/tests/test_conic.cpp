#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "ctsdr/conic.hpp"
#include "doctest.h"

using namespace ctsdr;

TEST_CASE("svec round-trip and inner product") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> un(-2.0, 2.0);
  auto random_sym = [&](int n) {
    Eigen::MatrixXd M = Eigen::MatrixXd::NullaryExpr(
        n, n, [&](Eigen::Index, Eigen::Index) { return un(rng); });
    return Eigen::MatrixXd((M + M.transpose()) / 2);
  };
  Eigen::MatrixXd A = random_sym(5), B = random_sym(5);
  CHECK(svec_to_sym(sym_to_svec(A), 5).isApprox(A, 1e-14));
  CHECK(sym_to_svec(A).dot(sym_to_svec(B)) ==
        doctest::Approx((A * B).trace()).epsilon(1e-12));
  CHECK(svec_index(0, 0) == 0);
  CHECK(svec_index(0, 1) == 1);
  CHECK(svec_index(1, 1) == 2);
}

TEST_CASE("pinned scalar block") {
  ConicProgramBuilder b;
  int blk = b.add_psd_block(1);
  b.objective_entry(blk, 0, 0, 1.0);
  int row = b.new_row(3.0);
  b.row_entry(row, blk, 0, 0, 1.0);
  SdpSolution sol = solve(b.build());
  REQUIRE(sol.status == SolveStatus::optimal);
  CHECK(sol.objective == doctest::Approx(3.0).epsilon(1e-8));
  CHECK(sol.blocks[0](0, 0) == doctest::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("trace minimization with fixed off-diagonal") {
  // min tr X s.t. X_{01} = 1, X psd: optimum 2 at the all-ones matrix.
  ConicProgramBuilder b;
  int blk = b.add_psd_block(2);
  b.objective_entry(blk, 0, 0, 1.0);
  b.objective_entry(blk, 1, 1, 1.0);
  int row = b.new_row(1.0);
  b.row_entry(row, blk, 0, 1, 1.0);
  ConicProgram prog = b.build();
  SdpSolution sol = solve(prog);
  REQUIRE(sol.status == SolveStatus::optimal);
  CHECK(sol.objective == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(sol.blocks[0].isApprox(Eigen::MatrixXd::Ones(2, 2), 1e-6));

  Residuals r = residuals(prog, sol);
  CHECK(r.primal <= 1e-7);
  CHECK(r.dual <= 1e-7);
  CHECK(r.gap <= 1e-7);

  // Weak duality along the whole iterate trace.
  for (const IterateRecord& it : sol.trace)
    CHECK(it.dual_objective <=
          it.primal_objective + 1e-6 * (1.0 + std::abs(it.primal_objective)));
}

TEST_CASE("primal infeasibility is certified") {
  // X_{00} = -1 cannot hold for a psd block.
  ConicProgramBuilder b;
  int blk = b.add_psd_block(1);
  b.objective_entry(blk, 0, 0, 1.0);
  int row = b.new_row(-1.0);
  b.row_entry(row, blk, 0, 0, 1.0);
  SdpSolution sol = solve(b.build());
  CHECK(sol.status == SolveStatus::infeasible);
}

TEST_CASE("nonnegative part and duplicate-row presolve") {
  // min x0 + 2 x1 s.t. x0 + x1 = 1 (stated twice), x >= 0.
  ConicProgramBuilder b;
  int first = b.add_nonneg(2);
  b.objective_nonneg(first, 1.0);
  b.objective_nonneg(first + 1, 2.0);
  for (int dup = 0; dup < 2; ++dup) {
    int row = b.new_row(1.0);
    b.row_nonneg(row, first, 1.0);
    b.row_nonneg(row, first + 1, 1.0);
  }
  ConicProgram prog = b.build();
  CHECK(prog.num_rows() == 2);

  PresolveResult pre = presolve(prog);
  CHECK(pre.reduced.num_rows() == 1);
  CHECK(pre.original_rows == 2);

  SdpSolution sol = solve(prog);
  REQUIRE(sol.status == SolveStatus::optimal);
  CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(sol.slacks[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(sol.slacks[1] == doctest::Approx(0.0).epsilon(1e-7));
  CHECK(sol.y.size() == 2);  // duals restored to full row space

  Eigen::VectorXd restored = pre.restore_duals(Eigen::VectorXd::Constant(1, 5.0));
  CHECK(restored.size() == 2);
  CHECK(restored.cwiseAbs().sum() == 5.0);
}

TEST_CASE("objective sensitivity to the right-hand side") {
  auto solve_rhs = [](double rhs) {
    ConicProgramBuilder b;
    int blk = b.add_psd_block(2);
    b.objective_entry(blk, 0, 0, 1.0);
    b.objective_entry(blk, 1, 1, 1.0);
    int row = b.new_row(rhs);
    b.row_entry(row, blk, 0, 1, 1.0);
    return solve(b.build()).objective;
  };
  // min tr X with X_{01} = t has value 2 t.
  CHECK(solve_rhs(1.001) - solve_rhs(1.0) == doctest::Approx(0.002).epsilon(1e-3));
}

TEST_CASE("backend registry") {
  std::vector<std::string> names = backend_names();
  CHECK(std::find(names.begin(), names.end(), "embedded") != names.end());
  CHECK(backend().name() == "embedded");
  CHECK_THROWS_AS(backend("no-such-backend"), std::invalid_argument);

  ConicProgramBuilder b;
  int blk = b.add_psd_block(1);
  b.objective_entry(blk, 0, 0, 1.0);
  int row = b.new_row(2.0);
  b.row_entry(row, blk, 0, 0, 1.0);
  SdpSolution sol = backend().solve(b.build(), SolverSettings{});
  CHECK(sol.objective == doctest::Approx(2.0).epsilon(1e-8));
}
