#pragma once

#include <Eigen/Dense>

#include "iptwsurv/core.hpp"

namespace iptwsurv {

struct LogisticFit {
  Eigen::VectorXd coefficients;  // intercept first
  bool converged = false;
  int iterations = 0;
  double log_likelihood = 0.0;
};

struct LogisticOptions {
  int max_iterations = 100;
  double gradient_tolerance = 1e-8;
  // Propensities saturate numerically past this magnitude; treated as separation.
  double coefficient_bound = 30.0;
};

inline double logistic(double eta) {
  return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

/// Maximum-likelihood logistic regression of `outcome` on [1, covariates] by IRLS with
/// step halving. `start`, when non-empty, warm-starts the iteration.
///
/// Throws SingularDesign for a rank-deficient design (or an empty outcome class) and
/// NonConvergence on separation or iteration exhaustion.
LogisticFit fit_logistic(const Eigen::MatrixXd& covariates, const Eigen::VectorXi& outcome,
                         const LogisticOptions& options = {},
                         const Eigen::VectorXd& start = Eigen::VectorXd());

/// Log-likelihood of the logistic model at `coefficients` (intercept first).
double logistic_log_likelihood(const Eigen::MatrixXd& covariates, const Eigen::VectorXi& outcome,
                               const Eigen::VectorXd& coefficients);

/// Score vector X'(y - p) for the design [1, covariates].
Eigen::VectorXd logistic_gradient(const Eigen::MatrixXd& covariates,
                                  const Eigen::VectorXi& outcome,
                                  const Eigen::VectorXd& coefficients);

/// One unguarded Newton (IRLS) step from `coefficients`; used to check fixed points.
Eigen::VectorXd irls_step(const Eigen::MatrixXd& covariates, const Eigen::VectorXi& outcome,
                          const Eigen::VectorXd& coefficients);

Eigen::VectorXd predict_propensity(const LogisticFit& fit, const Eigen::MatrixXd& covariates);

/// IPTW weights Z/e + (1-Z)/(1-e). Throws PositivityViolation naming every subject whose
/// fitted propensity lies outside (epsilon, 1 - epsilon).
WeightedSample compute_iptw(const LogisticFit& fit, const Cohort& cohort,
                            double epsilon = 1e-6);
WeightedSample compute_iptw(const Cohort& cohort, const Eigen::VectorXd& propensity,
                            double epsilon = 1e-6);

/// Divides weights by their mean so they average exactly one.
Eigen::VectorXd center_weights(const Eigen::VectorXd& weights);
WeightedSample center_weights(const WeightedSample& sample);

/// Intercept b0 with mean_i logistic(b0 + x_i . coefficients) == target_mean, by
/// bracketed monotone root finding. Throws CalibrationError when unreachable.
double calibrate_intercept(const Eigen::VectorXd& coefficients, const Eigen::MatrixXd& covariates,
                           double target_mean);

/// Standardized mean differences of each covariate between arms, optionally weighted.
Eigen::VectorXd standardized_differences(const Cohort& cohort,
                                         const Eigen::VectorXd& weights = Eigen::VectorXd());

}  // namespace iptwsurv
