#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

#include "iptwsurv/core.hpp"

namespace iptwsurv {

/// Treatment effect forms for h(t|Z) = h0(t) exp(beta Z + f(Z, t)):
///   standard  f = 0
///   log_time  f = kappa Z log(t)
///   piecewise f = kappa_k Z on the k-th interval after the cutpoints
enum class CoxVariant { standard, log_time, piecewise };

const char* to_string(CoxVariant variant);

struct CoxOptions {
  CoxVariant variant = CoxVariant::standard;
  // log_time: episodes split on this grid; log(t) is taken at the stop of the grid cell,
  // so every subject at risk at an event time shares the same covariate value.
  double grid_step = 1.0 / 12.0;
  // log_time: split at every distinct event time instead of the grid (exact log t).
  bool split_at_failures = false;
  // piecewise: strictly increasing change points (years).
  std::vector<double> cutpoints{2.0, 5.0};

  int max_iterations = 50;
  double gradient_tolerance = 1e-8;
  double coefficient_bound = 30.0;
};

/// Number of coefficients: 1 (standard), 2 (log_time), 1 + cutpoints (piecewise).
Index cox_dimension(const CoxOptions& options);

/// Covariate vector of a treated subject at event time t; controls have all zeros.
Eigen::VectorXd treated_design(const CoxOptions& options, double t);

/// One counting-process interval (start, stop] of a subject.
struct EpisodeRow {
  std::int64_t id = 0;
  double start = 0.0;
  double stop = 0.0;
  int event = 0;
  int treatment = 0;
  double weight = 1.0;
  double log_time = 0.0;  // log of the grid-cell stop (log_time variant)
  int period = 0;         // number of cutpoints <= start (piecewise variant)
};

struct EpisodeTable {
  CoxOptions options;
  std::vector<EpisodeRow> rows;
  std::vector<std::string> warnings;
  double follow_up = 0.0;
};

/// Counting-process rows whose time-varying covariates are constant on each interval.
/// Subjects with zero follow-up carry no risk time and are dropped with a warning.
EpisodeTable split_episodes(const WeightedSample& sample, const CoxOptions& options);

/// Covariate vector of one episode row.
Eigen::VectorXd episode_design(const EpisodeRow& row, const CoxOptions& options);

/// Jump times and values of a non-decreasing cumulative hazard with H(0) = 0.
struct CumulativeHazard {
  Eigen::VectorXd times;
  Eigen::VectorXd values;
};

struct CoxFit {
  CoxOptions options;
  Eigen::VectorXd beta;  // beta, then kappa (log_time) or kappa_1..kappa_m (piecewise)
  CumulativeHazard baseline;
  bool converged = false;
  int iterations = 0;
  double log_partial_likelihood = 0.0;
  double follow_up = 0.0;
};

/// Weighted Breslow partial likelihood maximized by Newton-Raphson on the episode rows.
/// The baseline hazard is attached before returning.
/// Throws NonConvergence on a monotone likelihood (|coefficient| > bound).
CoxFit fit_weighted_cox(const EpisodeTable& table);

/// Same estimator computed from per-event-time arm totals without materializing the
/// episode rows. Identical to splitting and fitting, at O(n log n) cost.
CoxFit fit_weighted_cox(const WeightedSample& sample, const CoxOptions& options);

/// Weighted Breslow increments dH0(t_j) = d_j / sum_{R(t_j)} w_i exp(lp_i(t_j)).
CumulativeHazard breslow_baseline(const CoxFit& fit, const EpisodeTable& table);

/// Weighted log partial likelihood of the rows at `beta`.
double cox_log_partial_likelihood(const EpisodeTable& table, const Eigen::VectorXd& beta);

/// Marginal curves S_z(t) = exp(-sum_{t_j <= t} exp(z x(t_j)' beta) dH0(t_j)):
/// first control, then treated.
std::pair<StepCurve, StepCurve> cox_marginal_curves(const CoxFit& fit);

}  // namespace iptwsurv
