#include "iptwsurv/nonparam.hpp"

#include <numeric>

namespace iptwsurv {
namespace {

std::vector<Index> order_by_time(const Eigen::VectorXd& time) {
  std::vector<Index> order(static_cast<std::size_t>(time.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return time[a] < time[b]; });
  return order;
}

// Running product kept as (number of zero factors, log of the non-zero factors) so that
// sub-range products are exact ratios and zeros survive division.
struct LogProduct {
  std::vector<int> zeros{0};
  std::vector<double> logs{0.0};

  void push(double factor) {
    if (factor <= 0.0) {
      zeros.push_back(zeros.back() + 1);
      logs.push_back(logs.back());
    } else {
      zeros.push_back(zeros.back());
      logs.push_back(logs.back() + std::log(factor));
    }
  }
  // Product of factors (from, to], 0 <= from <= to.
  double range(std::size_t from, std::size_t to) const {
    if (zeros[to] != zeros[from]) return 0.0;
    return std::exp(logs[to] - logs[from]);
  }
};

PseudoSurvival average(const PseudoObservationSet& pseudo, const Eigen::VectorXd& weights,
                       double normalizer) {
  if (weights.size() != pseudo.values.rows()) {
    throw InvalidArgument("pseudo_survival: weights not aligned with pseudo-observations");
  }
  const Eigen::VectorXd raw = (pseudo.values.transpose() * weights) / normalizer;
  PseudoSurvival out;
  Eigen::VectorXd clamped(raw.size());
  double previous = 1.0;
  for (Index k = 0; k < raw.size(); ++k) {
    double v = raw[k];
    if (v < 0.0 || v > 1.0) {
      v = std::clamp(v, 0.0, 1.0);
      ++out.clamped;
    }
    if (v > previous) out.max_violation = std::max(out.max_violation, v - previous);
    clamped[k] = v;
    previous = v;
  }
  out.extrapolated = pseudo.extrapolated;
  out.curve = StepCurve(pseudo.grid, clamped, 1.0,
                        pseudo.grid.size() > 0 ? pseudo.grid[pseudo.grid.size() - 1] : 0.0,
                        StepCurve::Monotonicity::report);
  out.monotonicity_violations = out.curve.monotonicity_violations();
  return out;
}

}  // namespace

StepCurve weighted_km(const Eigen::VectorXd& time, const Eigen::VectorXi& event,
                      const Eigen::VectorXd& weights) {
  const Index n = time.size();
  if (event.size() != n || weights.size() != n) {
    throw InvalidArgument("weighted_km: inputs differ in length");
  }
  if (n == 0) throw InvalidArgument("weighted_km: empty sample");
  const auto order = order_by_time(time);

  // Group boundaries of tied times, and at-risk weight by suffix sums.
  std::vector<std::size_t> starts;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (k == 0 || time[order[k]] != time[order[k - 1]]) starts.push_back(k);
  }
  std::vector<double> group_weight(starts.size(), 0.0), group_deaths(starts.size(), 0.0);
  for (std::size_t g = 0; g < starts.size(); ++g) {
    const std::size_t end = g + 1 < starts.size() ? starts[g + 1] : order.size();
    for (std::size_t k = starts[g]; k < end; ++k) {
      group_weight[g] += weights[order[k]];
      if (event[order[k]] == 1) group_deaths[g] += weights[order[k]];
    }
  }
  std::vector<double> at_risk(starts.size());
  double suffix = 0.0;
  for (std::size_t g = starts.size(); g-- > 0;) {
    suffix += group_weight[g];
    at_risk[g] = suffix;
  }

  std::vector<double> times, surv;
  double s = 1.0;
  for (std::size_t g = 0; g < starts.size(); ++g) {
    if (group_deaths[g] <= 0.0) continue;
    const bool last_group = g + 1 == starts.size();
    const double factor =
        last_group && group_deaths[g] == group_weight[g] ? 0.0
                                                          : 1.0 - group_deaths[g] / at_risk[g];
    s *= std::max(factor, 0.0);
    times.push_back(time[order[starts[g]]]);
    surv.push_back(s);
  }
  return StepCurve(Eigen::Map<Eigen::VectorXd>(times.data(), static_cast<Index>(times.size())),
                   Eigen::Map<Eigen::VectorXd>(surv.data(), static_cast<Index>(surv.size())), 1.0,
                   time.maxCoeff());
}

StepCurve weighted_km(const WeightedSample& sample, int arm) {
  const auto rows = sample.cohort().arm_rows(arm);
  if (rows.empty()) throw InvalidArgument("weighted_km: arm " + std::to_string(arm) + " is empty");
  const auto m = static_cast<Index>(rows.size());
  Eigen::VectorXd t(m), w(m);
  Eigen::VectorXi d(m);
  for (Index k = 0; k < m; ++k) {
    const Index i = rows[static_cast<std::size_t>(k)];
    t[k] = sample.cohort().time()[i];
    d[k] = sample.cohort().event()[i];
    w[k] = sample.weights()[i];
  }
  return weighted_km(t, d, w);
}

Eigen::VectorXd regular_grid(double horizon, double step) {
  if (!(horizon > 0.0) || !(step > 0.0)) {
    throw InvalidArgument("regular_grid: horizon and step must be positive");
  }
  std::vector<double> points;
  for (Index k = 1;; ++k) {
    const double t = static_cast<double>(k) * step;
    if (t >= horizon - 1e-9 * step) break;
    points.push_back(t);
  }
  points.push_back(horizon);
  return Eigen::Map<Eigen::VectorXd>(points.data(), static_cast<Index>(points.size()));
}

PseudoObservationSet pseudo_observations(const Cohort& arm, const Eigen::VectorXd& grid) {
  const Index n = arm.size();
  if (n < 2) throw InvalidArgument("pseudo_observations: need at least two subjects");
  for (Index k = 0; k < grid.size(); ++k) {
    if (!std::isfinite(grid[k]) || grid[k] < 0.0 || (k > 0 && !(grid[k] > grid[k - 1]))) {
      throw InvalidArgument("pseudo_observations: grid must be finite, >= 0 and increasing");
    }
  }
  const Eigen::VectorXd& time = arm.time();
  const Eigen::VectorXi& event = arm.event();
  const auto order = order_by_time(time);

  // Distinct event times with death and at-risk counts.
  std::vector<double> event_times;
  std::vector<double> deaths, at_risk;
  for (std::size_t k = 0; k < order.size();) {
    const double t = time[order[k]];
    std::size_t end = k;
    double d = 0.0;
    while (end < order.size() && time[order[end]] == t) {
      d += event[order[end]];
      ++end;
    }
    if (d > 0.0) {
      event_times.push_back(t);
      deaths.push_back(d);
      at_risk.push_back(static_cast<double>(order.size() - k));
    }
    k = end;
  }

  // full: factors of the complete-sample KM; reduced: factors with one fewer at risk,
  // which is what every event time before T_i sees once subject i is removed.
  LogProduct full, reduced;
  for (std::size_t j = 0; j < event_times.size(); ++j) {
    full.push(1.0 - deaths[j] / at_risk[j]);
    reduced.push(at_risk[j] >= 2.0 ? 1.0 - deaths[j] / (at_risk[j] - 1.0) : 1.0);
  }
  const auto count_upto = [&](double t) {  // number of event times <= t
    return static_cast<std::size_t>(
        std::upper_bound(event_times.begin(), event_times.end(), t) - event_times.begin());
  };

  PseudoObservationSet out;
  out.grid = grid;
  out.last_time = time.maxCoeff();
  out.values.resize(n, grid.size());
  std::vector<std::size_t> grid_count(static_cast<std::size_t>(grid.size()));
  Eigen::VectorXd km(grid.size());
  for (Index k = 0; k < grid.size(); ++k) {
    grid_count[static_cast<std::size_t>(k)] = count_upto(grid[k]);
    km[k] = full.range(0, grid_count[static_cast<std::size_t>(k)]);
    if (grid[k] > out.last_time) ++out.extrapolated;
  }

  const double nd = static_cast<double>(n);
  for (Index i = 0; i < n; ++i) {
    const double ti = time[i];
    const auto before = static_cast<std::size_t>(
        std::lower_bound(event_times.begin(), event_times.end(), ti) - event_times.begin());
    const bool at_event_time = before < event_times.size() && event_times[before] == ti;
    // Leave-one-out factor at T_i itself.
    double own = 1.0;
    if (at_event_time) {
      const double remaining = at_risk[before] - 1.0;
      const double d = deaths[before] - event[i];
      own = remaining > 0.0 ? 1.0 - d / remaining : 1.0;
    }
    const std::size_t through = at_event_time ? before + 1 : before;
    const double upto_ti = reduced.range(0, before) * std::max(own, 0.0);
    for (Index k = 0; k < grid.size(); ++k) {
      const std::size_t m = grid_count[static_cast<std::size_t>(k)];
      const double loo = grid[k] < ti ? reduced.range(0, m) : upto_ti * full.range(through, m);
      out.values(i, k) = nd * km[k] - (nd - 1.0) * loo;
    }
  }
  return out;
}

PseudoSurvival pseudo_survival(const PseudoObservationSet& pseudo,
                               const Eigen::VectorXd& weights) {
  if (weights.size() == 0 || std::abs(weights.mean() - 1.0) > 1e-9) {
    throw ContractError("pseudo_survival: weights must be centered to mean 1");
  }
  return average(pseudo, weights, static_cast<double>(weights.size()));
}

PseudoSurvival pseudo_survival_unnormalized(const PseudoObservationSet& pseudo,
                                            const Eigen::VectorXd& weights, double normalizer) {
  if (!(normalizer > 0.0)) throw InvalidArgument("pseudo_survival: normalizer must be positive");
  return average(pseudo, weights, normalizer);
}

}  // namespace iptwsurv
