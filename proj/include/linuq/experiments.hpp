#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "linuq/posterior_uq.hpp"
#include "linuq/problem_gen.hpp"

namespace linuq {

/// Harness configuration. The config file (JSON) overrides flag values;
/// everything is validated before any computation starts.
struct ExperimentConfig {
  std::string experiment = "fig2to5";  // fig1 | fig2to5 | solve | predict
  Index n = 200;
  Index trials = 20;
  std::string spectrum = "exponential:10";
  // stationary | linear | structured:<L>:<mult>
  std::string estimator = "stationary";
  // standardized_norm | bfgs_cg
  std::string prior = "standardized_norm";
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  // Steps between posterior evaluations in fig2to5 (fig2 data is per-step).
  Index eval_stride = 4;
  double residual_tol = 1e-10;
  double alpha_safety = 0.9;
  std::string omega_mode = "retrospective";  // or predictive / geometric

  void validate() const;
  /// Canonical key=value serialization used for the CSV config-hash stamp.
  std::string canonical() const;
  std::uint64_t hash() const;

  static ExperimentConfig load_json(const std::string& path,
                                    ExperimentConfig base);
  std::string to_json() const;
};

OmegaEstimator parse_estimator(const std::string& text, Index horizon);
OmegaMode parse_omega_mode(const std::string& text);

/// Mean curves over trials for the rank-2 rules and the exact posteriors
/// (B0 = I throughout). Rows are steps M = 1..N.
struct Fig1Result {
  std::vector<std::string> estimators;  // column order of mean_error
  Matrix mean_error;                    // N x estimators, ||B_M-B||/||B0-B||
  // Expected Frobenius error (same normalization) for the two exact
  // posteriors.
  Matrix mean_uncertainty;  // N x 2: W=I, W=B
};

Fig1Result run_fig1(const ExperimentConfig& config);

/// Calibration aggregates per spectrum: medians of |true error| / sd pooled
/// over elements, evaluated steps and trials.
struct CalibrationSummary {
  std::string spectrum;
  double sn_element_ratio = 0.0;    // H elements, matched estimator
  double bfgs_element_ratio = 0.0;  // H elements, BFGS/CG prior
  double sn_xtest_ratio = 0.0;      // x_test elements
  double bfgs_xtest_ratio = 0.0;
  double sn_band_median = 0.0;      // median sd at matched steps
  double bfgs_band_median = 0.0;
};

struct Fig2to5Result {
  std::vector<CalibrationSummary> per_spectrum;
  double pooled_bfgs_xtest_ratio = 0.0;
  double pooled_sn_element_ratio = 0.0;
};

Fig2to5Result run_fig2to5(const ExperimentConfig& config);

struct SolveReport {
  Vector solution;
  double residual_norm = 0.0;
  double expected_error = 0.0;
  Index steps = 0;
  bool converged = false;
  std::string model_path;
};

SolveReport run_solve(const ExperimentConfig& config,
                      const std::string& matrix_path,
                      const std::string& rhs_path, std::ostream& out);

void run_predict(const std::string& model_path, const std::string& b_test_path,
                 std::ostream& out);

}  // namespace linuq
