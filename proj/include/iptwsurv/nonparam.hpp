#pragma once

#include <Eigen/Dense>

#include "iptwsurv/core.hpp"

namespace iptwsurv {

/// Weighted product-limit estimate over the distinct event times:
/// S(t) = prod_{t_j <= t} (1 - d_j / n_j) with d_j the weighted deaths at t_j and n_j the
/// weight of subjects with time >= t_j. Deaths precede censorings at tied times. The
/// curve's follow-up is the largest observed time.
StepCurve weighted_km(const Eigen::VectorXd& time, const Eigen::VectorXi& event,
                      const Eigen::VectorXd& weights);

/// Weighted KM of one treatment arm.
StepCurve weighted_km(const WeightedSample& sample, int arm);

/// Evaluation grid step, step*2, ..., ending exactly at `horizon`.
Eigen::VectorXd regular_grid(double horizon, double step = 1.0 / 12.0);

/// Jackknife pseudo-observations of the (unweighted) KM survival at each grid time:
/// values(i, k) = n S(grid_k) - (n - 1) S^{-i}(grid_k).
struct PseudoObservationSet {
  Eigen::VectorXd grid;
  Eigen::MatrixXd values;  // subjects x grid
  double last_time = 0.0;  // largest observed time in the arm
  Index extrapolated = 0;  // grid points past last_time, where KM is held constant
};

/// Incremental O(n log n + n G) leave-one-out computation. Requires n >= 2.
PseudoObservationSet pseudo_observations(const Cohort& arm, const Eigen::VectorXd& grid);

struct PseudoSurvival {
  StepCurve curve;
  Index clamped = 0;                // grid values pulled back into [0, 1]
  int monotonicity_violations = 0;  // increases left in place, not repaired
  double max_violation = 0.0;
  Index extrapolated = 0;
};

/// Weighted mean of pseudo-observations at each grid time, (1/n) sum_i w_i theta_i(t).
/// The weights must be centered (mean 1 within 1e-9); otherwise ContractError.
PseudoSurvival pseudo_survival(const PseudoObservationSet& pseudo, const Eigen::VectorXd& weights);

/// Same average with an explicit normalizer instead of the centering contract:
/// (1/normalizer) sum_i w_i theta_i(t). Used when centering is switched off.
PseudoSurvival pseudo_survival_unnormalized(const PseudoObservationSet& pseudo,
                                            const Eigen::VectorXd& weights, double normalizer);

}  // namespace iptwsurv
