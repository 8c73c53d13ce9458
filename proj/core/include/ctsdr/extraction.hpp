#ifndef CTSDR_EXTRACTION_HPP
#define CTSDR_EXTRACTION_HPP

#include <string>
#include <vector>

#include "ctsdr/lifting.hpp"

namespace ctsdr {

/// A concrete trajectory with provenance and bookkeeping.
struct TrajectorySolution {
  NlpPoint point;
  double cost = 0.0;
  Eigen::VectorXd crossing_times;  // tau_l per characteristic time constraint
  double feasibility_residual = 0.0;
  std::string source;  // "SDR-extracted", "refined" or "baseline"
};

struct ExtractionResult {
  TrajectorySolution trajectory;
  bool used_inv_row = false;  // fallback row used when normalization drifted
  double normalization_error = 0.0;
};

/// Reads theta from each segment's first block, w from the (ONE, W) row
/// of every block (falling back to the theta-scaled (INV, W) row when
/// the (INV, ONE) normalization drifted beyond 1e-4) and stitches the
/// states; the cost is always recomputed by transcription evaluation.
ExtractionResult extract(const SdpSolution& solution, const LiftedSdp& sdp,
                         const TranscribedNlp& nlp);

/// lambda_2 / lambda_1 of theta * block; 0 means exact rank one.
double rank1_gap(const Eigen::MatrixXd& block, double theta);

/// sigma_rel = (J_rcvx - J_cvx) / J_rcvx; requires J_rcvx > 0.
double relaxation_gap(double J_cvx, double J_rcvx);

/// delta_opt = (J_base - J_rcvx) / J_rcvx; requires J_rcvx > 0.
double optimality_delta(double J_base, double J_rcvx);

struct TightnessReport {
  std::vector<double> block_gaps;
  double max_gap = 0.0, mean_gap = 0.0;
  double J_cvx = 0.0, J_rcvx = 0.0, J_base = 0.0;
  double sigma_rel = 0.0;
  double delta_opt = 0.0;
  bool has_baseline = false;

  std::string to_kv() const;  // flat key=value record, one pair per line
};

/// Per-block rank-1 gaps of a relaxation solution.
TightnessReport tightness(const SdpSolution& solution, const LiftedSdp& sdp);

/// Monolithic (standard) SDR over the full stacked decision vector,
/// used only for the timing comparison; refuses when the single block
/// side would exceed the cap.
struct StandardSdr {
  ConicProgram program;
  int side = 0;
};

StandardSdr standard_sdr(const TranscribedNlp& nlp, int side_cap = 600);

}  // namespace ctsdr

#endif
