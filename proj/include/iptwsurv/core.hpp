#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iptwsurv/error.hpp"

namespace iptwsurv {

using Index = Eigen::Index;

/// One subject: design-matrix row, treatment Z, observed time (years) and event flag.
struct SubjectRecord {
  std::int64_t id = 0;
  Eigen::VectorXd covariates;
  int treatment = 0;
  double time = 0.0;
  int event = 0;
};

/// Column-oriented cohort of subjects. All SubjectRecord invariants are checked on
/// construction, so a Cohort that exists is valid.
class Cohort {
 public:
  Cohort() = default;
  Cohort(std::vector<std::int64_t> ids, Eigen::MatrixXd covariates, Eigen::VectorXi treatment,
         Eigen::VectorXd time, Eigen::VectorXi event);

  static Cohort from_records(std::span<const SubjectRecord> records);

  Index size() const { return time_.size(); }
  Index n_covariates() const { return covariates_.cols(); }
  bool empty() const { return size() == 0; }

  const std::vector<std::int64_t>& ids() const { return ids_; }
  const Eigen::MatrixXd& covariates() const { return covariates_; }
  const Eigen::VectorXi& treatment() const { return treatment_; }
  const Eigen::VectorXd& time() const { return time_; }
  const Eigen::VectorXi& event() const { return event_; }

  SubjectRecord record(Index i) const;
  std::vector<SubjectRecord> records() const;

  /// Rows in the given order; indices may repeat (bootstrap resamples).
  Cohort subset(std::span<const Index> rows) const;
  /// Subjects with treatment == z, in original order.
  Cohort arm(int z) const;
  std::vector<Index> arm_rows(int z) const;
  Index count_arm(int z) const;
  double max_time() const;

 private:
  std::vector<std::int64_t> ids_;
  Eigen::MatrixXd covariates_;
  Eigen::VectorXi treatment_;
  Eigen::VectorXd time_;
  Eigen::VectorXi event_;
};

/// A cohort with IPTW weights (and the propensities they came from, when known).
class WeightedSample {
 public:
  WeightedSample() = default;
  /// `propensity` may be empty when weights were supplied directly.
  WeightedSample(Cohort cohort, Eigen::VectorXd weights, Eigen::VectorXd propensity = {});

  /// Unit weights; convenient for unweighted estimation through the weighted code paths.
  static WeightedSample unweighted(Cohort cohort);

  const Cohort& cohort() const { return cohort_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  const Eigen::VectorXd& propensity() const { return propensity_; }
  Index size() const { return cohort_.size(); }

  WeightedSample arm(int z) const;
  WeightedSample with_weights(Eigen::VectorXd weights) const;

 private:
  Cohort cohort_;
  Eigen::VectorXd weights_;
  Eigen::VectorXd propensity_;
};

/// Right-continuous step survival function S(t), stored at its jump times.
///
/// S(t) = anchor for t < times[0]; S(t) = surv[k] for times[k] <= t < times[k+1].
/// `follow_up` is the largest time at which the curve is supported by data; it is at
/// least the last jump time.
template <class Scalar>
class BasicStepCurve {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  /// `report` keeps a non-monotone curve and records it; only pseudo-observation
  /// curves use it. Everything else must be non-increasing.
  enum class Monotonicity { enforce, report };

  BasicStepCurve() : BasicStepCurve(Vector(), Vector()) {}

  BasicStepCurve(Vector times, Vector surv, Scalar anchor = Scalar(1),
                 std::optional<Scalar> follow_up = std::nullopt,
                 Monotonicity policy = Monotonicity::enforce)
      : times_(std::move(times)), surv_(std::move(surv)), anchor_(anchor) {
    if (times_.size() != surv_.size()) {
      throw InvalidArgument("step curve: times and surv differ in length");
    }
    if (!(anchor_ >= Scalar(0) && anchor_ <= Scalar(1))) {
      throw InvalidArgument("step curve: anchor outside [0, 1]");
    }
    for (Index k = 0; k < times_.size(); ++k) {
      if (!std::isfinite(times_[k]) || times_[k] < Scalar(0)) {
        throw InvalidArgument("step curve: times must be finite and >= 0");
      }
      if (k > 0 && !(times_[k] > times_[k - 1])) {
        throw InvalidArgument("step curve: times must be strictly increasing");
      }
      if (!(surv_[k] >= Scalar(0) && surv_[k] <= Scalar(1))) {
        throw InvalidArgument("step curve: survival value outside [0, 1]");
      }
      const Scalar previous = k == 0 ? anchor_ : surv_[k - 1];
      if (surv_[k] > previous) {
        if (policy == Monotonicity::enforce) {
          throw InvalidArgument("step curve: survival values must be non-increasing");
        }
        ++violations_;
      }
    }
    const Scalar last = times_.size() > 0 ? times_[times_.size() - 1] : Scalar(0);
    follow_up_ = follow_up.value_or(last);
    if (!(follow_up_ >= last) || !std::isfinite(follow_up_)) {
      throw InvalidArgument("step curve: follow-up precedes the last step");
    }
  }

  const Vector& times() const { return times_; }
  const Vector& surv() const { return surv_; }
  Scalar anchor() const { return anchor_; }
  Scalar follow_up() const { return follow_up_; }
  Index size() const { return times_.size(); }
  bool is_monotone() const { return violations_ == 0; }
  int monotonicity_violations() const { return violations_; }

  Scalar operator()(Scalar t) const {
    if (!std::isfinite(t)) throw InvalidArgument("step curve: evaluation time is not finite");
    if (t < Scalar(0)) throw InvalidArgument("step curve: evaluation time is negative");
    const auto* first = times_.data();
    const auto* last = first + times_.size();
    const auto k = std::upper_bound(first, last, t) - first;
    return k == 0 ? anchor_ : surv_[k - 1];
  }

 private:
  Vector times_;
  Vector surv_;
  Scalar anchor_;
  Scalar follow_up_{0};
  int violations_ = 0;
};

using StepCurve = BasicStepCurve<double>;

template <class Scalar>
Scalar evaluate_curve(const BasicStepCurve<Scalar>& curve, Scalar t) {
  return curve(t);
}

/// Samples a smooth survival function on a grid into a step curve (value at each grid
/// point holds until the next one).
template <class Scalar, class F>
BasicStepCurve<Scalar> sample_curve(const F& survival,
                                    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& grid) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> values(grid.size());
  Scalar running = Scalar(1);
  for (Index k = 0; k < grid.size(); ++k) {
    // Clip rounding noise so the sampled curve is exactly non-increasing.
    running = std::min(running, std::clamp(Scalar(survival(grid[k])), Scalar(0), Scalar(1)));
    values[k] = running;
  }
  return BasicStepCurve<Scalar>(grid, values);
}

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
};

struct Estimate {
  double value = 0.0;
  std::optional<ConfidenceInterval> ci;
};

/// Treatment-effect summary for one estimator: survival differences at the evaluation
/// times, median-survival difference (absent when either arm never reaches 0.5) and
/// restricted-mean-survival difference up to `horizon`.
struct EstimandReport {
  std::string estimator;
  double horizon = 0.0;
  std::map<double, Estimate> delta_surv_at;
  std::optional<Estimate> delta_median;
  std::string median_note;
  Estimate delta_rms;
  std::vector<std::string> notes;
};

/// Estimand order used whenever a report is flattened: survival differences by
/// ascending time, then median, then RMS.
std::vector<std::string> estimand_labels(std::span<const double> eval_times);

/// Flattens the point estimates; an absent median becomes NaN.
Eigen::VectorXd estimand_vector(const EstimandReport& report);

}  // namespace iptwsurv
