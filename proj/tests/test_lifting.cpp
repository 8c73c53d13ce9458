#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>
#include <sstream>

#include "ctsdr/lifting.hpp"
#include "doctest.h"

using namespace ctsdr;

TEST_CASE("lift index layout") {
  CHECK(lift_index(2, 1).r() == 12);
  CHECK(lift_index(6, 3).r() == 32);
  CHECK(lift_index(1, 1).r() == 8);

  LiftIndex ix = lift_index(2, 1);
  CHECK(ix.d() == 5);
  CHECK(LiftIndex::INV == 0);
  CHECK(LiftIndex::ONE == 1);
  CHECK(ix.W(0) == 2);
  CHECK(ix.W(4) == 6);
  CHECK(ix.TH(0) == 7);
  CHECK(ix.i_b(0) == 2);   // x_k slice
  CHECK(ix.i_a(0) == 4);   // x_{k+1} slice
}

TEST_CASE("lift_point entries match the scaled outer product") {
  OcpProblem p = double_integrator_benchmark(0.5);
  ShootingGrid g{{1, 1}};
  TranscribedNlp nlp = transcribe(p, g);
  LiftIndex ix = lift_index(2, 1);

  NlpPoint pt = make_point(nlp);
  pt.thetas << 0.5, 0.5;
  // w = (x_k, x_{k+1}, u_k) = e_1 on the first interval.
  pt.states[0][0] << 1.0, 0.0;

  std::vector<Eigen::MatrixXd> blocks = lift_point(pt, g, ix);
  REQUIRE(blocks.size() == 2);
  const Eigen::MatrixXd& Y = blocks[0];
  LiftedBlock b;
  b.index = ix;
  auto at = [&](LiftedBlock::Entry e) { return Y(e.first, e.second); };
  CHECK(at(b.inv_theta()) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(at(b.unit()) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(at(b.theta()) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(at(b.w(0)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(at(b.w_over_theta(0)) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(at(b.ww_over_theta(0, 0)) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(at(b.theta_w(0)) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(at(b.theta_ww(0, 0)) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(at(b.ww(0, 0)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(at(b.w(1)) == 0.0);

  // Symmetry and PSD-ness of the lifted block.
  CHECK((Y - Y.transpose()).cwiseAbs().maxCoeff() == 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Y);
  CHECK(es.eigenvalues().minCoeff() >= -1e-12);

  pt.thetas << 1e-5, 0.5;  // below the floor
  CHECK_THROWS_AS(lift_point(pt, g, ix), ProblemError);
}

TEST_CASE("assemble row counts on the reference grid") {
  OcpProblem p = double_integrator_benchmark(0.5);
  TranscribedNlp nlp = transcribe(p, ShootingGrid{{2, 2}});

  LiftedSdp sdp = assemble(nlp);
  REQUIRE(sdp.blocks.size() == 4);
  CHECK(sdp.block_of(0, 0) == 0);
  CHECK(sdp.block_of(1, 1) == 3);
  CHECK(static_cast<int>(sdp.equalities.size()) == 307);
  CHECK(static_cast<int>(sdp.inequalities.size()) == 390);

  std::map<std::string, int> fam = sdp.family_counts();
  CHECK(fam.at("normalization") == 4);
  CHECK(fam.at("tie_w") == 20);
  CHECK(fam.at("tie_ww") == 40);
  CHECK(fam.at("dyn_w") == 8);
  CHECK(fam.at("dyn_ww") == 40);
  CHECK(fam.at("theta_box") == 16);
  CHECK(fam.at("theta_box_box") == 48);
  CHECK(fam.at("box_box_ww") == 84);
  CHECK(fam.at("box_box_theta_ww") == 84);
  CHECK(fam.at("box_box_ww_over_theta") == 84);
  CHECK(fam.at("window") == 2);
  CHECK(fam.at("inter_w") == 2);
  CHECK(fam.at("inter_ww") == 3);

  StandardForm sf = standard_form(sdp);
  CHECK(sf.program.num_rows() == 697);
  CHECK(sf.program.dim() == 702);
  CHECK(sf.program.nonneg_dim == 390);
  CHECK(sf.slack_count == 390);
  CHECK(sf.program.psd_sides == std::vector<int>{12, 12, 12, 12});

  LiftedSdp pruned = assemble(nlp, AssembleOptions{true});
  CHECK(static_cast<int>(pruned.equalities.size()) == 76);
  CHECK(static_cast<int>(pruned.inequalities.size()) == 138);
}

TEST_CASE("lifted objective reproduces the stage cost") {
  OcpProblem p = double_integrator_benchmark(0.5);
  TranscribedNlp nlp = transcribe(p, ShootingGrid{{2, 3}});
  LiftedSdp sdp = assemble(nlp);

  std::mt19937 rng(7);
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    NlpPoint pt = make_point(nlp);
    pt.thetas << 0.2 + 0.1 * trial, 0.35;
    for (auto& seg : pt.states)
      for (auto& x : seg) x = Eigen::VectorXd::NullaryExpr(2, [&](int) { return un(rng); });
    for (auto& seg : pt.controls)
      for (auto& u : seg) u = Eigen::VectorXd::NullaryExpr(1, [&](int) { return un(rng); });

    std::vector<Eigen::MatrixXd> blocks = lift_point(pt, nlp.grid, sdp.index);
    double lifted = eval_terms(sdp.objective, blocks) + sdp.objective_constant;
    // The objective identity holds for any point, feasible or not.
    CHECK(lifted == doctest::Approx(evaluate(nlp, pt).cost).epsilon(1e-12));
  }
}

TEST_CASE("sdp dump is self-describing") {
  OcpProblem p = double_integrator_benchmark(0.5);
  TranscribedNlp nlp = transcribe(p, ShootingGrid{{1, 1}});
  LiftedSdp sdp = assemble(nlp, AssembleOptions{true});
  std::stringstream ss;
  dump_sdp(sdp, ss);
  std::string text = ss.str();
  CHECK(text.rfind("blocks 2", 0) == 0);
  CHECK(text.find("sides 12 12") != std::string::npos);
  CHECK(text.find("objective_constant") != std::string::npos);
  CHECK(text.find("normalization") != std::string::npos);
}
