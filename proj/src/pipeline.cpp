#include "iptwsurv/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <mutex>

#include "iptwsurv/aft.hpp"
#include "iptwsurv/cox.hpp"
#include "iptwsurv/nonparam.hpp"
#include "iptwsurv/propensity.hpp"

namespace iptwsurv {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

StepCurve pseudo_curve(const WeightedSample& arm, const AnalysisConfig& config) {
  const auto grid = regular_grid(config.horizon, config.pseudo_step);
  const auto pseudo = pseudo_observations(arm.cohort(), grid);
  if (config.center_weights) return pseudo_survival(pseudo, center_weights(arm.weights())).curve;
  return pseudo_survival_unnormalized(pseudo, arm.weights(), static_cast<double>(arm.size())).curve;
}

void attach_intervals(EstimandReport& report, const BootstrapResult& boot) {
  Index k = 0;
  for (auto& [t, estimate] : report.delta_surv_at) estimate.ci = boot.ci[static_cast<std::size_t>(k++)];
  if (report.delta_median) report.delta_median->ci = boot.ci[static_cast<std::size_t>(k)];
  ++k;
  report.delta_rms.ci = boot.ci[static_cast<std::size_t>(k)];
}

}  // namespace

const std::vector<EstimatorKind>& all_estimators() {
  static const std::vector<EstimatorKind> kinds{
      EstimatorKind::cox,        EstimatorKind::ctv_lt, EstimatorKind::ctv_pwc, EstimatorKind::aft_gg,
      EstimatorKind::aft_wbl_ls, EstimatorKind::pseudo, EstimatorKind::wtd_km};
  return kinds;
}

const char* to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::cox: return "cox";
    case EstimatorKind::ctv_lt: return "ctv_lt";
    case EstimatorKind::ctv_pwc: return "ctv_pwc";
    case EstimatorKind::aft_gg: return "aft_gg";
    case EstimatorKind::aft_wbl_ls: return "aft_wbl_ls";
    case EstimatorKind::pseudo: return "pseudo";
    case EstimatorKind::wtd_km: return "wtd_km";
  }
  return "?";
}

EstimatorKind parse_estimator(const std::string& label) {
  for (auto kind : all_estimators()) {
    if (label == to_string(kind)) return kind;
  }
  throw ConfigError("unknown estimator '" + label +
                    "' (expected cox, ctv_lt, ctv_pwc, aft_gg, aft_wbl_ls, pseudo, wtd_km)");
}

void AnalysisConfig::validate() const {
  if (estimators.empty()) throw ConfigError("no estimators selected");
  for (std::size_t i = 0; i < estimators.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (estimators[i] == estimators[j]) {
        throw ConfigError(std::string("estimator listed twice: ") + to_string(estimators[i]));
      }
    }
  }
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("horizon must be positive");
  for (std::size_t k = 0; k < eval_times.size(); ++k) {
    if (!(eval_times[k] > 0.0) || eval_times[k] > horizon) {
      throw ConfigError("evaluation times must lie in (0, horizon]");
    }
    if (k > 0 && !(eval_times[k] > eval_times[k - 1])) {
      throw ConfigError("evaluation times must be strictly increasing");
    }
  }
  if (!(ctv_grid_step > 0.0) || !(pseudo_step > 0.0) || !(aft_curve_step > 0.0)) {
    throw ConfigError("grid steps must be positive");
  }
  if (!(positivity_epsilon > 0.0 && positivity_epsilon < 0.5)) {
    throw ConfigError("positivity epsilon outside (0, 0.5)");
  }
  bootstrap.validate();
}

std::vector<std::string> AnalysisConfig::estimand_names() const { return estimand_labels(eval_times); }

WeightedSample weight_cohort(const Cohort& cohort, const AnalysisConfig& config) {
  const auto fit = fit_logistic(cohort.covariates(), cohort.treatment());
  return compute_iptw(fit, cohort, config.positivity_epsilon);
}

CurvePair estimate_curves(const WeightedSample& sample, EstimatorKind kind, const AnalysisConfig& config,
                          const Eigen::VectorXd& gengamma_start) {
  if (config.horizon > sample.cohort().max_time()) {
    throw OutOfRange("horizon exceeds the largest observed time");
  }
  const auto cox = [&](CoxOptions options) {
    const auto fit = fit_weighted_cox(sample, options);
    auto [c0, c1] = cox_marginal_curves(fit);
    return CurvePair(std::move(c0), std::move(c1), config.horizon);
  };
  const auto aft = [&](const AftFit& fit) {
    const auto grid = regular_grid(config.horizon, config.aft_curve_step);
    return CurvePair(aft_survival_curve(fit, 0, grid), aft_survival_curve(fit, 1, grid), config.horizon);
  };
  switch (kind) {
    case EstimatorKind::cox:
      return cox({});
    case EstimatorKind::ctv_lt: {
      CoxOptions o;
      o.variant = CoxVariant::log_time;
      o.grid_step = config.ctv_grid_step;
      return cox(o);
    }
    case EstimatorKind::ctv_pwc: {
      CoxOptions o;
      o.variant = CoxVariant::piecewise;
      o.cutpoints = config.ctv_cutpoints;
      return cox(o);
    }
    case EstimatorKind::aft_gg: {
      GengammaOptions o;
      o.start = gengamma_start;
      return aft(fit_gengamma(sample, o));
    }
    case EstimatorKind::aft_wbl_ls:
      return aft(fit_weibull_ls(sample));
    case EstimatorKind::pseudo:
      return CurvePair(pseudo_curve(sample.arm(0), config), pseudo_curve(sample.arm(1), config),
                       config.horizon);
    case EstimatorKind::wtd_km:
      return CurvePair(weighted_km(sample, 0), weighted_km(sample, 1), config.horizon);
  }
  throw InvalidArgument("unknown estimator");
}

EstimandReport estimate(const WeightedSample& sample, EstimatorKind kind, const AnalysisConfig& config,
                        const Eigen::VectorXd& gengamma_start) {
  const auto pair = estimate_curves(sample, kind, config, gengamma_start);
  auto report = ate_report<double>(pair, config.eval_times, to_string(kind));
  if (kind == EstimatorKind::pseudo && config.center_weights) report.notes.push_back("*centered weights");
  return report;
}

Eigen::VectorXd gengamma_start_values(const WeightedSample& sample) {
  try {
    return fit_gengamma(sample).params;
  } catch (const EstimationError&) {
    return {};
  }
}

std::vector<BlockResult> estimate_all(const Cohort& cohort, const AnalysisConfig& config,
                                      const Eigen::VectorXd& gengamma_start, std::vector<double>* seconds) {
  const auto sample = weight_cohort(cohort, config);
  std::vector<BlockResult> blocks;
  if (seconds) seconds->assign(config.estimators.size(), 0.0);
  for (std::size_t j = 0; j < config.estimators.size(); ++j) {
    const auto start = Clock::now();
    BlockResult block;
    try {
      block.values = estimand_vector(estimate(sample, config.estimators[j], config, gengamma_start));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      block = {Eigen::VectorXd(), true, e.what()};
    }
    if (seconds) (*seconds)[j] = seconds_since(start);
    blocks.push_back(std::move(block));
  }
  return blocks;
}

AnalysisResult analyze_cohort(const Cohort& cohort, const AnalysisConfig& config) {
  config.validate();
  AnalysisResult result;
  result.config = config;
  result.n = cohort.size();
  result.n_treated = cohort.count_arm(1);
  const auto fit = fit_logistic(cohort.covariates(), cohort.treatment());
  const auto sample = compute_iptw(fit, cohort, config.positivity_epsilon);
  result.propensity_coefficients = fit.coefficients;
  if (cohort.n_covariates() > 0) {
    result.smd_before = standardized_differences(cohort);
    result.smd_after = standardized_differences(cohort, sample.weights());
  }
  if (sample.weights().maxCoeff() > 20.0) {
    result.warnings.push_back("largest IPTW weight is " + std::to_string(sample.weights().maxCoeff()));
  }

  const bool use_gg = std::find(config.estimators.begin(), config.estimators.end(), EstimatorKind::aft_gg) !=
                      config.estimators.end();
  const Eigen::VectorXd start = use_gg ? gengamma_start_values(sample) : Eigen::VectorXd();

  for (auto kind : config.estimators) {
    EstimatorResult r{kind, std::nullopt, {}, {}, false, 0.0};
    try {
      r.report = estimate(sample, kind, config, start);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      r.error = e.what();
    }
    result.estimators.push_back(std::move(r));
  }

  auto spec = config.bootstrap;
  spec.strict = false;
  const std::size_t J = config.estimators.size();
  std::vector<double> total_seconds(J, 0.0);
  std::mutex timing_mutex;
  const MultiPipeline pipeline = [&](const Cohort& resample) {
    std::vector<double> seconds;
    auto blocks = estimate_all(resample, config, start, &seconds);
    std::lock_guard<std::mutex> lock(timing_mutex);
    for (std::size_t j = 0; j < J; ++j) total_seconds[j] += seconds[j];
    return blocks;
  };
  auto boots = bootstrap_blocks(cohort, pipeline, J, spec);
  for (std::size_t j = 0; j < J; ++j) {
    auto& r = result.estimators[j];
    r.bootstrap = std::move(boots[j]);
    r.degenerate = r.bootstrap.degenerate;
    r.seconds_per_iteration = total_seconds[j] / spec.iterations;
    if (r.report && !r.degenerate && r.bootstrap.ci.size() == config.eval_times.size() + 2) {
      attach_intervals(*r.report, r.bootstrap);
    }
  }
  return result;
}

}  // namespace iptwsurv
