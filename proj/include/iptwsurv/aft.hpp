#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "iptwsurv/core.hpp"

namespace iptwsurv {

enum class AftFamily { weibull_ls, gengamma };

const char* to_string(AftFamily family);

/// Parameter vectors:
///   weibull_ls  (log lambda, gamma, beta, kappa) with
///               log T = (-log lambda + beta Z + eps) / (gamma + kappa Z), eps standard
///               minimum-Gumbel, so H_z(t) = lambda exp(-beta z) t^(gamma + kappa z);
///   gengamma    (mu, log sigma, Q, beta) with log T = mu + beta Z + sigma w and w the
///               standardized generalized gamma error with shape Q.
struct AftFit {
  AftFamily family = AftFamily::weibull_ls;
  Eigen::VectorXd params;
  std::vector<std::string> names;
  double log_likelihood = 0.0;
  bool converged = false;
  int iterations = 0;
  Eigen::VectorXd gradient;  // of the weighted log-likelihood, internal parameterization
  double follow_up = 0.0;
};

/// Weighted Weibull MLE for one arm; H(t) = lambda t^gamma.
struct WeibullArm {
  double log_lambda = 0.0;
  double gamma = 1.0;
  double log_likelihood = 0.0;
  double gradient = 0.0;  // d loglik / d log gamma at the profile maximum
  int iterations = 0;
};

/// Profile Newton iteration on the shape with lambda = D / sum w t^gamma in closed form.
/// Throws SingularDesign without events and NonConvergence when the shape diverges.
WeibullArm fit_weibull_arm(const Eigen::VectorXd& time, const Eigen::VectorXi& event,
                           const Eigen::VectorXd& weights);

/// Weibull with treatment-varying shape. Arm-specific (lambda_z, gamma_z) saturate the
/// four parameters, so the joint MLE is the pair of per-arm MLEs.
AftFit fit_weibull_ls(const WeightedSample& sample);

/// Hazard-scale coefficients of the same model written as
/// h(t|Z) = h0(t) exp(beta1 Z + kappa Z log t): returns (beta1, kappa).
Eigen::Vector2d weibull_hazard_coefficients(const AftFit& fit);

struct GengammaOptions {
  double gradient_tolerance = 1e-6;
  int max_iterations = 200;
  int restarts = 3;
  std::uint64_t seed = 20240901;
  // Fix Q at this value and maximize over the other three parameters.
  std::optional<double> fixed_q;
  // Warm start (mu, log sigma, Q, beta); otherwise started from the Weibull fit at Q = 1.
  Eigen::VectorXd start;
};

AftFit fit_gengamma(const WeightedSample& sample, const GengammaOptions& options = {});

/// Weighted log-likelihood of the generalized gamma model and its gradient with
/// respect to (mu, log sigma, Q, beta).
double gengamma_log_likelihood(const WeightedSample& sample, const Eigen::Vector4d& params,
                               Eigen::VectorXd* gradient = nullptr);

/// Standardized error: log density, survival, and the derivatives used by the fit.
/// Inside |Q| < 1e-5 the survival uses the log-normal limit plus its first-order
/// correction in Q.
double gengamma_log_density_w(double w, double q);
double gengamma_survival_w(double w, double q);

/// Model survival S_z(t) (t > 0) and its step-curve sampling on `grid`.
double aft_survival(const AftFit& fit, int z, double t);
StepCurve aft_survival_curve(const AftFit& fit, int z, const Eigen::VectorXd& grid);

}  // namespace iptwsurv
