#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iptwsurv/core.hpp"

namespace iptwsurv {

/// Marginal of one latent copula coordinate.
///   continuous: mean + sd * latent
///   binary:     1 when the latent exceeds the (1 - p) quantile; probs = {1 - p, p}
///   ordinal:    level k when the latent falls in the k-th probability band; emitted as
///               dummies for levels 1..K-1
struct Marginal {
  enum class Kind { continuous, binary, ordinal };
  std::string name;
  Kind kind = Kind::binary;
  double mean = 0.0;
  double sd = 1.0;
  std::vector<double> probs;
  std::vector<std::string> columns;  // design-matrix columns this marginal produces
};

struct CovariateModel {
  std::vector<Marginal> marginals;
  Eigen::MatrixXd correlation;  // latent correlation, one row per marginal

  std::vector<std::string> column_names() const;
  Index width() const;
  void validate() const;

  /// Shipped default: age (centered years) and binary/ordinal clinical, demographic
  /// and facility variables with moderate latent correlations. Columns match the
  /// coefficient table rows.
  static CovariateModel default_model();
};

struct CovariateDraw {
  Eigen::MatrixXd x;
  std::vector<std::string> warnings;
};

/// Nearest correlation matrix by eigenvalue clipping and rescaling to unit diagonal.
Eigen::MatrixXd nearest_correlation(const Eigen::MatrixXd& matrix, double floor = 1e-8);

/// Gaussian-copula draw of n rows. A correlation matrix that is not positive
/// semi-definite is repaired with a warning, or rejected (ConfigError) when `strict`.
CovariateDraw gen_covariates(const CovariateModel& model, Index n, std::uint64_t seed,
                             bool strict = false);

/// Z_i ~ Bernoulli(logistic(intercept + x_i . coefficients)).
Eigen::VectorXi assign_treatment(const Eigen::MatrixXd& x, const Eigen::VectorXd& coefficients,
                                 double intercept, std::uint64_t seed);

/// Time-varying part f(Z, t) of the log hazard for a treated subject (zero for controls).
struct TreatmentEffect {
  enum class Form { none, log_time, piecewise, custom };
  Form form = Form::none;
  double kappa = 0.0;  // log_time: kappa log t; piecewise: kappa once t >= cut
  double cut = 0.0;
  std::function<double(double)> custom;  // f(1, t) for the custom form

  double operator()(int z, double t) const;
};

const char* to_string(TreatmentEffect::Form form);

struct Censoring {
  enum class Kind { administrative, uniform, none };
  Kind kind = Kind::administrative;
  double tau = 10.0;
  double a = 0.0;
  double b = 20.0;
};

/// h(t | Z, x) = gamma lambda t^(gamma - 1) exp(beta1 Z + f(Z, t) + x psi).
struct ScenarioSpec {
  std::string name = "custom";
  Index n_total = 5000;
  double beta1 = 0.0;
  TreatmentEffect effect;
  double lambda = 0.1;
  double gamma = 1.2;
  CovariateModel covariates;
  Eigen::VectorXd treatment_coeffs;
  // Reference intercept of the assignment model; replaced by calibration when on.
  double treatment_intercept = 0.0;
  bool calibrate_intercept = true;
  double target_treat_prob = 0.5;
  Eigen::VectorXd survival_coeffs;
  Censoring censoring;
  std::uint64_t covariate_seed = 20240901;

  void validate() const;
};

/// Cumulative hazard H(t | z, x) for linear predictor xb = x . psi (closed forms for the
/// built-in effect forms, quadrature for custom).
double cumulative_hazard(const ScenarioSpec& spec, double xb, int z, double t);

enum class Inversion { closed_form, numeric };

/// Event times solving H(T) = -log U for the given uniforms. `numeric` integrates the
/// hazard and root-finds to |H(T) + log U| <= 1e-10 whatever the effect form.
Eigen::VectorXd invert_survival(const Eigen::MatrixXd& x, const Eigen::VectorXi& z,
                                const ScenarioSpec& spec, const Eigen::VectorXd& uniforms,
                                Inversion method = Inversion::closed_form);

/// Uniforms from the survival stream of `seed`, then invert_survival.
Eigen::VectorXd draw_survival(const Eigen::MatrixXd& x, const Eigen::VectorXi& z,
                              const ScenarioSpec& spec, std::uint64_t seed,
                              Inversion method = Inversion::closed_form);

struct ObservedTimes {
  Eigen::VectorXd time;
  Eigen::VectorXi event;
};

ObservedTimes apply_censoring(const Eigen::VectorXd& times, const Censoring& scheme,
                              std::uint64_t seed);

/// Marginal survival (1/n) sum_i exp(-H(t | z, x_i)).
double marginal_survival(const ScenarioSpec& spec, const Eigen::VectorXd& xb, int z, double t);

struct TruthReport {
  std::vector<double> eval_times;
  double horizon = 0.0;
  Eigen::VectorXd surv0, surv1;  // marginal survival at eval_times
  std::optional<double> median0, median1;
  double rms0 = 0.0, rms1 = 0.0;

  std::optional<double> delta_median() const;
  /// Same layout as estimand_vector: survival differences, median, RMS (NaN = absent).
  Eigen::VectorXd vector() const;
};

/// Analytic ATE truths from the covariate matrix: medians root-found on the smooth
/// marginals (absent beyond the horizon), RMS by adaptive quadrature.
TruthReport true_estimands(const Eigen::MatrixXd& x, const ScenarioSpec& spec,
                           const std::vector<double>& eval_times, double horizon);

/// Named scenarios: base, pwc, modest_nph, modest_te, small_ss.
std::map<std::string, ScenarioSpec> scenario_registry();
/// Registry lookup that also knows the null scenario (no treatment effect).
ScenarioSpec named_scenario(const std::string& name);
std::vector<std::string> scenario_names();

/// Two-column coefficient table: name,treatment,survival. An "Intercept" row sets the
/// reference assignment intercept; its survival entry is ignored. Rows must follow the
/// covariate model's column order.
struct CoefficientTable {
  std::vector<std::string> names;
  Eigen::VectorXd treatment;
  Eigen::VectorXd survival;
  std::optional<double> intercept;
};

CoefficientTable load_coefficients_csv(const std::filesystem::path& path);
CoefficientTable default_coefficients();

/// JSON scenario config; see README for the schema. Relative coefficient paths resolve
/// against the config file's directory.
ScenarioSpec load_scenario_json(const std::filesystem::path& path);

/// One simulated replicate over fixed covariates: assignment, survival, censoring.
struct SimulatedCohort {
  Cohort cohort;
  Eigen::VectorXd event_time;  // uncensored time under the assigned arm
};

SimulatedCohort simulate_cohort(const ScenarioSpec& spec, const Eigen::MatrixXd& x,
                                double intercept, std::uint64_t seed);

/// Assignment intercept used for `x`: calibrated to target_treat_prob or the reference.
double scenario_intercept(const ScenarioSpec& spec, const Eigen::MatrixXd& x);

}  // namespace iptwsurv
