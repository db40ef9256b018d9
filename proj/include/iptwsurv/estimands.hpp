#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iptwsurv/core.hpp"

namespace iptwsurv {

/// Marginal survival curves for control (Z=0) and treated (Z=1), restricted to
/// [0, horizon]. The horizon may not exceed either curve's follow-up.
template <class Scalar>
struct BasicCurvePair {
  BasicStepCurve<Scalar> control;
  BasicStepCurve<Scalar> treated;
  Scalar horizon;

  BasicCurvePair(BasicStepCurve<Scalar> control_curve, BasicStepCurve<Scalar> treated_curve,
                 Scalar horizon_)
      : control(std::move(control_curve)), treated(std::move(treated_curve)), horizon(horizon_) {
    if (!(horizon > Scalar(0)) || !std::isfinite(horizon)) {
      throw InvalidArgument("curve pair: horizon must be positive and finite");
    }
    if (horizon > control.follow_up() || horizon > treated.follow_up()) {
      throw OutOfRange("curve pair: horizon exceeds follow-up of an arm");
    }
  }
};

using CurvePair = BasicCurvePair<double>;

template <class Scalar>
Scalar delta_surv_at(const BasicCurvePair<Scalar>& pair, Scalar t) {
  if (!(t >= Scalar(0)) || t > pair.horizon) {
    throw OutOfRange("delta_surv_at: time outside [0, horizon]");
  }
  return pair.treated(t) - pair.control(t);
}

/// Smallest time with S(t) <= 0.5; absent when the curve stays above 0.5.
template <class Scalar>
std::optional<Scalar> median_survival(const BasicStepCurve<Scalar>& curve) {
  if (curve.anchor() <= Scalar(0.5)) return Scalar(0);
  for (Index k = 0; k < curve.size(); ++k) {
    if (curve.surv()[k] <= Scalar(0.5)) return curve.times()[k];
  }
  return std::nullopt;
}

/// Exact area under the step function on [0, horizon].
template <class Scalar>
Scalar rms(const BasicStepCurve<Scalar>& curve, Scalar horizon) {
  if (!(horizon >= Scalar(0))) throw OutOfRange("rms: negative horizon");
  if (horizon > curve.follow_up()) throw OutOfRange("rms: horizon beyond follow-up");
  Scalar area = Scalar(0);
  Scalar left = Scalar(0);
  Scalar level = curve.anchor();
  for (Index k = 0; k < curve.size() && curve.times()[k] < horizon; ++k) {
    area += level * (curve.times()[k] - left);
    left = curve.times()[k];
    level = curve.surv()[k];
  }
  area += level * (horizon - left);
  return area;
}

/// Point estimates of the survival differences at `eval_times`, the median difference
/// and the RMS difference at the pair's horizon.
template <class Scalar>
EstimandReport ate_report(const BasicCurvePair<Scalar>& pair, std::span<const Scalar> eval_times,
                          std::string estimator = {}) {
  EstimandReport report;
  report.estimator = std::move(estimator);
  report.horizon = static_cast<double>(pair.horizon);
  for (Scalar t : eval_times) {
    report.delta_surv_at[static_cast<double>(t)] =
        Estimate{static_cast<double>(delta_surv_at(pair, t)), std::nullopt};
  }
  const auto m1 = median_survival(pair.treated);
  const auto m0 = median_survival(pair.control);
  if (m1 && m0) {
    report.delta_median = Estimate{static_cast<double>(*m1 - *m0), std::nullopt};
  } else {
    report.median_note = !m1 && !m0 ? "not estimable: neither arm reaches S=0.5"
                         : !m1      ? "not estimable: treated arm never reaches S=0.5"
                                    : "not estimable: control arm never reaches S=0.5";
  }
  report.delta_rms = Estimate{
      static_cast<double>(rms(pair.treated, pair.horizon) - rms(pair.control, pair.horizon)),
      std::nullopt};
  return report;
}

}  // namespace iptwsurv
