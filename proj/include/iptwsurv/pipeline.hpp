#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "iptwsurv/bootstrap.hpp"
#include "iptwsurv/core.hpp"
#include "iptwsurv/estimands.hpp"

namespace iptwsurv {

enum class EstimatorKind { cox, ctv_lt, ctv_pwc, aft_gg, aft_wbl_ls, pseudo, wtd_km };

/// All estimators in report order, and their labels.
const std::vector<EstimatorKind>& all_estimators();
const char* to_string(EstimatorKind kind);
EstimatorKind parse_estimator(const std::string& label);

struct AnalysisConfig {
  std::vector<EstimatorKind> estimators = all_estimators();
  std::vector<double> eval_times{2.0, 5.0, 10.0};
  double horizon = 10.0;
  // Pseudo-observation means with weights scaled to average one within each arm;
  // otherwise the raw weights are averaged over the arm size.
  bool center_weights = true;
  double positivity_epsilon = 1e-6;
  double ctv_grid_step = 1.0 / 12.0;
  std::vector<double> ctv_cutpoints{2.0, 5.0};
  double pseudo_step = 1.0 / 12.0;
  double aft_curve_step = 0.005;
  BootstrapSpec bootstrap;

  void validate() const;
  std::vector<std::string> estimand_names() const;
};

/// Propensity fit on all covariate columns and IPTW weights.
WeightedSample weight_cohort(const Cohort& cohort, const AnalysisConfig& config);

/// Marginal curves of one estimator on [0, horizon]. `gengamma_start` warm-starts the
/// generalized gamma fit (bootstrap replicates start from the original-sample fit).
CurvePair estimate_curves(const WeightedSample& sample, EstimatorKind kind,
                          const AnalysisConfig& config,
                          const Eigen::VectorXd& gengamma_start = Eigen::VectorXd());

EstimandReport estimate(const WeightedSample& sample, EstimatorKind kind, const AnalysisConfig& config,
                        const Eigen::VectorXd& gengamma_start = Eigen::VectorXd());

/// Generalized gamma parameters on `sample`, for warm starts; empty on failure.
Eigen::VectorXd gengamma_start_values(const WeightedSample& sample);

/// Per-estimator estimand vectors on one cohort with a single shared propensity fit.
/// An estimator that throws becomes a failed block; a propensity failure propagates.
/// `seconds`, when given, receives the wall time of each estimator.
std::vector<BlockResult> estimate_all(const Cohort& cohort, const AnalysisConfig& config,
                                      const Eigen::VectorXd& gengamma_start = Eigen::VectorXd(),
                                      std::vector<double>* seconds = nullptr);

struct EstimatorResult {
  EstimatorKind kind;
  std::optional<EstimandReport> report;  // absent when the original-sample fit failed
  std::string error;
  BootstrapResult bootstrap;
  bool degenerate = false;  // too many failed bootstrap replicates; no intervals
  double seconds_per_iteration = 0.0;
};

struct AnalysisResult {
  AnalysisConfig config;
  Index n = 0, n_treated = 0;
  Eigen::VectorXd propensity_coefficients;
  Eigen::VectorXd smd_before, smd_after;
  std::vector<EstimatorResult> estimators;
  std::vector<std::string> warnings;
};

/// Applied-mode analysis: point estimates on the original cohort and percentile
/// bootstrap intervals that refit the propensity model in every replicate.
AnalysisResult analyze_cohort(const Cohort& cohort, const AnalysisConfig& config);

}  // namespace iptwsurv
