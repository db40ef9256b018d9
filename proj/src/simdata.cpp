#include "iptwsurv/simdata.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/random/normal_distribution.hpp>

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "iptwsurv/io.hpp"
#include "iptwsurv/propensity.hpp"
#include "iptwsurv/rng.hpp"

namespace iptwsurv {
namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

std::vector<double> latent_thresholds(const std::vector<double>& probs) {
  const boost::math::normal standard;
  std::vector<double> cuts;
  double cumulative = 0.0;
  for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
    cumulative += probs[k];
    cuts.push_back(boost::math::quantile(standard, std::clamp(cumulative, 1e-300, 1.0 - 1e-16)));
  }
  return cuts;
}

double config_number(const std::string& field, const std::string& where) {
  const auto v = parse_number(field);
  if (!v) throw ConfigError(where + " '" + field + "' is not a number");
  return *v;
}

std::string strip_spaces(std::string s) {
  std::erase_if(s, [](unsigned char c) { return std::isspace(c); });
  return s;
}

// Smooth integral of g on [a, b], split at interior break points.
template <class F>
double integrate(const F& g, double a, double b, std::vector<double> breaks = {}) {
  double total = 0.0;
  double left = a;
  breaks.push_back(b);
  for (double right : breaks) {
    right = std::min(right, b);
    if (right > left) {
      total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, left, right, 15,
                                                                             1e-13);
      left = right;
    }
  }
  return total;
}

// Cumulative hazard at x = 0 (covariates factor out as exp(x psi)).
double base_hazard(const ScenarioSpec& spec, int z, double t) {
  if (t <= 0.0) return 0.0;
  const double scale = spec.lambda * std::exp(spec.beta1 * z);
  const auto& f = spec.effect;
  switch (f.form) {
    case TreatmentEffect::Form::none:
      return scale * std::pow(t, spec.gamma);
    case TreatmentEffect::Form::log_time: {
      const double shape = spec.gamma + f.kappa * z;
      return scale * spec.gamma / shape * std::pow(t, shape);
    }
    case TreatmentEffect::Form::piecewise:
      if (z == 0 || t < f.cut) return scale * std::pow(t, spec.gamma);
      return scale * (std::pow(f.cut, spec.gamma) +
                      std::exp(f.kappa) * (std::pow(t, spec.gamma) - std::pow(f.cut, spec.gamma)));
    case TreatmentEffect::Form::custom:
      break;
  }
  // Substituting v = u^gamma turns gamma u^(gamma - 1) du into dv.
  const auto g = [&](double v) { return std::exp(f(z, std::pow(v, 1.0 / spec.gamma))); };
  return scale * integrate(g, 0.0, std::pow(t, spec.gamma));
}

// The same cumulative hazard by quadrature of the hazard whatever the form.
double numeric_base_hazard(const ScenarioSpec& spec, int z, double t) {
  if (t <= 0.0) return 0.0;
  const double scale = spec.lambda * std::exp(spec.beta1 * z);
  const auto g = [&](double v) { return std::exp(spec.effect(z, std::pow(v, 1.0 / spec.gamma))); };
  std::vector<double> breaks;
  if (spec.effect.form == TreatmentEffect::Form::piecewise) {
    breaks.push_back(std::pow(spec.effect.cut, spec.gamma));
  }
  return scale * integrate(g, 0.0, std::pow(t, spec.gamma), breaks);
}

double closed_form_time(const ScenarioSpec& spec, double xb, int z, double target) {
  const double scale = spec.lambda * std::exp(spec.beta1 * z + xb);
  const auto& f = spec.effect;
  switch (f.form) {
    case TreatmentEffect::Form::none:
      return std::pow(target / scale, 1.0 / spec.gamma);
    case TreatmentEffect::Form::log_time: {
      const double shape = spec.gamma + f.kappa * z;
      return std::pow(shape * target / (spec.gamma * scale), 1.0 / shape);
    }
    case TreatmentEffect::Form::piecewise: {
      const double e = target / scale;
      const double c = std::pow(f.cut, spec.gamma);
      if (z == 0 || e < c) return std::pow(e, 1.0 / spec.gamma);
      return std::pow(c + (e - c) * std::exp(-f.kappa), 1.0 / spec.gamma);
    }
    case TreatmentEffect::Form::custom:
      break;
  }
  return nan;
}

// Root of H(t) = target for increasing H with H(0) = 0.
template <class H>
double invert_hazard(const H& hazard, double target) {
  double hi = 1.0;
  while (hazard(hi) < target) {
    hi *= 2.0;
    if (hi > 1e12) throw InvalidArgument("draw_survival: cumulative hazard does not diverge");
  }
  double lo = hi / 2.0;
  if (hazard(lo) > target) lo = 0.0;
  boost::uintmax_t iterations = 300;
  const auto root = boost::math::tools::toms748_solve(
      [&](double t) { return hazard(t) - target; }, lo, hi, boost::math::tools::eps_tolerance<double>(52),
      iterations);
  return 0.5 * (root.first + root.second);
}

Marginal binary(const std::string& name, double p) {
  return {name, Marginal::Kind::binary, 0.0, 1.0, {1.0 - p, p}, {name}};
}

Marginal ordinal(const std::string& name, std::vector<double> probs) {
  Marginal m{name, Marginal::Kind::ordinal, 0.0, 1.0, std::move(probs), {}};
  for (std::size_t k = 1; k < m.probs.size(); ++k) m.columns.push_back(name + std::to_string(k));
  return m;
}

}  // namespace

// ---------------------------------------------------------------- covariate model

std::vector<std::string> CovariateModel::column_names() const {
  std::vector<std::string> names;
  for (const auto& m : marginals) names.insert(names.end(), m.columns.begin(), m.columns.end());
  return names;
}

Index CovariateModel::width() const { return static_cast<Index>(column_names().size()); }

void CovariateModel::validate() const {
  const auto k = static_cast<Index>(marginals.size());
  if (correlation.rows() != k || correlation.cols() != k) {
    throw ConfigError("covariate model: correlation must be " + std::to_string(k) + " x " +
                      std::to_string(k));
  }
  if (!correlation.isApprox(correlation.transpose(), 1e-12)) {
    throw ConfigError("covariate model: correlation is not symmetric");
  }
  for (Index i = 0; i < k; ++i) {
    if (std::abs(correlation(i, i) - 1.0) > 1e-12) {
      throw ConfigError("covariate model: correlation diagonal must be 1");
    }
  }
  for (const auto& m : marginals) {
    const std::string where = "covariate model: marginal '" + m.name + "'";
    switch (m.kind) {
      case Marginal::Kind::continuous:
        if (!(m.sd > 0.0) || !std::isfinite(m.mean)) throw ConfigError(where + " needs sd > 0");
        if (m.columns.size() != 1) throw ConfigError(where + " produces exactly one column");
        break;
      case Marginal::Kind::binary:
      case Marginal::Kind::ordinal: {
        if (m.probs.size() < 2) throw ConfigError(where + " needs at least two levels");
        double total = 0.0;
        for (double p : m.probs) {
          if (!(p > 0.0 && p < 1.0)) throw ConfigError(where + " has a probability outside (0, 1)");
          total += p;
        }
        if (std::abs(total - 1.0) > 1e-9) throw ConfigError(where + " probabilities must sum to 1");
        if (m.columns.size() != m.probs.size() - 1) {
          throw ConfigError(where + " needs one column per non-reference level");
        }
        break;
      }
    }
  }
}

CovariateModel CovariateModel::default_model() {
  CovariateModel model;
  model.marginals = {
      {"age", Marginal::Kind::continuous, 0.0, 10.0, {}, {"age"}},
      ordinal("charlson", {0.72, 0.20, 0.08}),
      binary("male", 0.60),
      binary("low.stage", 0.70),
      binary("high.grade", 0.30),
      binary("histology", 0.75),
      binary("white", 0.85),
      binary("hispanic", 0.07),
      ordinal("facility", {0.10, 0.30, 0.40, 0.20}),
      ordinal("income", {0.15, 0.20, 0.25, 0.40}),
      ordinal("education", {0.15, 0.25, 0.30, 0.30}),
      ordinal("insurance", {0.25, 0.60, 0.15}),
  };
  model.marginals[1].columns = {"charlson1", "charlson2+"};
  enum { age, charlson, male, stage, grade, histology, white, hispanic, facility, income, education, insurance };
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(12, 12);
  const auto set = [&](int i, int j, double v) { r(i, j) = r(j, i) = v; };
  set(age, charlson, 0.30);
  set(age, insurance, 0.20);
  set(male, histology, 0.10);
  set(stage, grade, -0.30);
  set(grade, histology, -0.20);
  set(white, hispanic, -0.20);
  set(white, income, 0.20);
  set(hispanic, education, -0.15);
  set(facility, income, 0.10);
  set(facility, education, 0.10);
  set(income, education, 0.50);
  set(income, insurance, 0.30);
  set(education, insurance, 0.25);
  model.correlation = r;
  return model;
}

Eigen::MatrixXd nearest_correlation(const Eigen::MatrixXd& matrix, double floor) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (matrix + matrix.transpose()));
  const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(floor);
  Eigen::MatrixXd repaired = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
  const Eigen::VectorXd scale = repaired.diagonal().cwiseSqrt().cwiseInverse();
  repaired = scale.asDiagonal() * repaired * scale.asDiagonal();
  repaired.diagonal().setOnes();
  return repaired;
}

CovariateDraw gen_covariates(const CovariateModel& model, Index n, std::uint64_t seed, bool strict) {
  model.validate();
  if (n < 0) throw InvalidArgument("gen_covariates: negative n");
  CovariateDraw out;
  Eigen::MatrixXd r = model.correlation;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r, Eigen::EigenvaluesOnly);
  if (r.rows() > 0 && eig.eigenvalues().minCoeff() < -1e-12) {
    if (strict) throw ConfigError("gen_covariates: correlation matrix is not positive semi-definite");
    r = nearest_correlation(r);
    out.warnings.push_back("gen_covariates: correlation matrix was not positive semi-definite; "
                           "replaced by its nearest correlation matrix");
  }
  // LDLT tolerates exactly singular (semi-definite) correlation.
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(r);
  const Eigen::MatrixXd factor =
      ldlt.transpositionsP().transpose() *
      Eigen::MatrixXd(ldlt.matrixL()) *
      ldlt.vectorD().cwiseMax(0.0).cwiseSqrt().asDiagonal();

  const auto k = static_cast<Index>(model.marginals.size());
  std::vector<std::vector<double>> cuts;
  for (const auto& m : model.marginals) cuts.push_back(latent_thresholds(m.probs));

  Engine engine(derive_seed(seed, stream_covariates, 0));
  boost::random::normal_distribution<double> normal;
  out.x = Eigen::MatrixXd::Zero(n, model.width());
  Eigen::VectorXd e(k);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < k; ++j) e[j] = normal(engine);
    const Eigen::VectorXd latent = factor * e;
    Index column = 0;
    for (Index j = 0; j < k; ++j) {
      const auto& m = model.marginals[static_cast<std::size_t>(j)];
      if (m.kind == Marginal::Kind::continuous) {
        out.x(i, column++) = m.mean + m.sd * latent[j];
        continue;
      }
      const auto& c = cuts[static_cast<std::size_t>(j)];
      const auto level = std::upper_bound(c.begin(), c.end(), latent[j]) - c.begin();
      if (level > 0) out.x(i, column + level - 1) = 1.0;
      column += static_cast<Index>(c.size());
    }
  }
  return out;
}

Eigen::VectorXi assign_treatment(const Eigen::MatrixXd& x, const Eigen::VectorXd& coefficients,
                                 double intercept, std::uint64_t seed) {
  if (coefficients.size() != x.cols()) {
    throw InvalidArgument("assign_treatment: coefficient length does not match covariates");
  }
  Engine engine(derive_seed(seed, stream_treatment, 0));
  const Eigen::VectorXd eta = (x * coefficients).array() + intercept;
  Eigen::VectorXi z(x.rows());
  for (Index i = 0; i < x.rows(); ++i) z[i] = uniform_open(engine) < logistic(eta[i]) ? 1 : 0;
  return z;
}

// ---------------------------------------------------------------- survival model

double TreatmentEffect::operator()(int z, double t) const {
  if (z == 0) return 0.0;
  switch (form) {
    case Form::none: return 0.0;
    case Form::log_time: return kappa * std::log(t);
    case Form::piecewise: return t >= cut ? kappa : 0.0;
    case Form::custom: return custom(t);
  }
  return 0.0;
}

const char* to_string(TreatmentEffect::Form form) {
  switch (form) {
    case TreatmentEffect::Form::none: return "none";
    case TreatmentEffect::Form::log_time: return "log_time";
    case TreatmentEffect::Form::piecewise: return "piecewise";
    case TreatmentEffect::Form::custom: return "custom";
  }
  return "?";
}

void ScenarioSpec::validate() const {
  const std::string where = "scenario '" + name + "': ";
  if (n_total < 2) throw ConfigError(where + "n_total must be at least 2");
  if (!(lambda > 0.0) || !(gamma > 0.0)) throw ConfigError(where + "lambda and gamma must be positive");
  if (effect.form == TreatmentEffect::Form::log_time && !(gamma + effect.kappa > 0.0)) {
    throw ConfigError(where + "invalid hazard: gamma + kappa must be positive");
  }
  if (effect.form == TreatmentEffect::Form::piecewise && !(effect.cut > 0.0)) {
    throw ConfigError(where + "piecewise effect needs a positive cut");
  }
  if (effect.form == TreatmentEffect::Form::custom && !effect.custom) {
    throw ConfigError(where + "custom effect without a function");
  }
  if (!(target_treat_prob > 0.0 && target_treat_prob < 1.0)) {
    throw ConfigError(where + "target_treat_prob outside (0, 1)");
  }
  covariates.validate();
  const Index p = covariates.width();
  if (treatment_coeffs.size() != p || survival_coeffs.size() != p) {
    throw ConfigError(where + "coefficient vectors must match the " + std::to_string(p) +
                      " covariate columns");
  }
  switch (censoring.kind) {
    case Censoring::Kind::administrative:
      if (!(censoring.tau > 0.0)) throw ConfigError(where + "censoring tau must be positive");
      break;
    case Censoring::Kind::uniform:
      if (!(censoring.a >= 0.0 && censoring.b > censoring.a)) {
        throw ConfigError(where + "uniform censoring needs 0 <= a < b");
      }
      break;
    case Censoring::Kind::none:
      break;
  }
}

double cumulative_hazard(const ScenarioSpec& spec, double xb, int z, double t) {
  return std::exp(xb) * base_hazard(spec, z, t);
}

Eigen::VectorXd invert_survival(const Eigen::MatrixXd& x, const Eigen::VectorXi& z,
                                const ScenarioSpec& spec, const Eigen::VectorXd& uniforms,
                                Inversion method) {
  spec.validate();
  if (x.rows() != z.size() || uniforms.size() != z.size() || x.cols() != spec.survival_coeffs.size()) {
    throw InvalidArgument("draw_survival: dimension mismatch");
  }
  const Eigen::VectorXd xb = x * spec.survival_coeffs;
  const bool closed = method == Inversion::closed_form && spec.effect.form != TreatmentEffect::Form::custom;
  Eigen::VectorXd t(z.size());
  for (Index i = 0; i < z.size(); ++i) {
    const double u = uniforms[i];
    if (!(u > 0.0 && u < 1.0)) throw InvalidArgument("draw_survival: uniform outside (0, 1)");
    const double target = -std::log(u);
    if (closed) {
      t[i] = closed_form_time(spec, xb[i], z[i], target);
    } else {
      const double scale = std::exp(xb[i]);
      t[i] = invert_hazard([&](double s) { return scale * numeric_base_hazard(spec, z[i], s); }, target);
    }
  }
  return t;
}

Eigen::VectorXd draw_survival(const Eigen::MatrixXd& x, const Eigen::VectorXi& z,
                              const ScenarioSpec& spec, std::uint64_t seed, Inversion method) {
  Engine engine(derive_seed(seed, stream_survival, 0));
  Eigen::VectorXd u(z.size());
  for (Index i = 0; i < u.size(); ++i) u[i] = uniform_open(engine);
  return invert_survival(x, z, spec, u, method);
}

ObservedTimes apply_censoring(const Eigen::VectorXd& times, const Censoring& scheme,
                              std::uint64_t seed) {
  ObservedTimes out{times, Eigen::VectorXi::Ones(times.size())};
  Engine engine(derive_seed(seed, stream_censoring, 0));
  for (Index i = 0; i < times.size(); ++i) {
    double c = std::numeric_limits<double>::infinity();
    if (scheme.kind == Censoring::Kind::administrative) c = scheme.tau;
    if (scheme.kind == Censoring::Kind::uniform) c = scheme.a + (scheme.b - scheme.a) * uniform_open(engine);
    if (times[i] > c) {
      out.time[i] = c;
      out.event[i] = 0;
    }
  }
  return out;
}

// ---------------------------------------------------------------- truth

double marginal_survival(const ScenarioSpec& spec, const Eigen::VectorXd& xb, int z, double t) {
  const double h = base_hazard(spec, z, t);
  return (-h * xb.array().exp()).exp().mean();
}

std::optional<double> TruthReport::delta_median() const {
  if (!median0 || !median1) return std::nullopt;
  return *median1 - *median0;
}

Eigen::VectorXd TruthReport::vector() const {
  const auto k = static_cast<Index>(eval_times.size());
  Eigen::VectorXd v(k + 2);
  v.head(k) = surv1 - surv0;
  v[k] = delta_median().value_or(nan);
  v[k + 1] = rms1 - rms0;
  return v;
}

TruthReport true_estimands(const Eigen::MatrixXd& x, const ScenarioSpec& spec,
                           const std::vector<double>& eval_times, double horizon) {
  spec.validate();
  if (x.cols() != spec.survival_coeffs.size() || x.rows() == 0) {
    throw InvalidArgument("true_estimands: covariate matrix does not match the scenario");
  }
  if (!(horizon > 0.0)) throw InvalidArgument("true_estimands: horizon must be positive");
  TruthReport truth;
  truth.eval_times = eval_times;
  truth.horizon = horizon;
  // Summing exp terms in sorted order makes the result independent of row order.
  Eigen::VectorXd xb = x * spec.survival_coeffs;
  std::sort(xb.begin(), xb.end());
  const auto k = static_cast<Index>(eval_times.size());
  truth.surv0.resize(k);
  truth.surv1.resize(k);
  for (Index j = 0; j < k; ++j) {
    const double t = eval_times[static_cast<std::size_t>(j)];
    if (!(t >= 0.0) || t > horizon) throw OutOfRange("true_estimands: evaluation time outside [0, horizon]");
    truth.surv0[j] = marginal_survival(spec, xb, 0, t);
    truth.surv1[j] = marginal_survival(spec, xb, 1, t);
  }
  std::vector<double> breaks;
  if (spec.effect.form == TreatmentEffect::Form::piecewise) breaks.push_back(spec.effect.cut);
  for (int z : {0, 1}) {
    const auto s = [&](double t) { return marginal_survival(spec, xb, z, t); };
    std::optional<double> median;
    if (s(horizon) <= 0.5) {
      boost::uintmax_t iterations = 300;
      const auto root = boost::math::tools::toms748_solve(
          [&](double t) { return s(t) - 0.5; }, 0.0, horizon,
          boost::math::tools::eps_tolerance<double>(50), iterations);
      median = 0.5 * (root.first + root.second);
    }
    const double area = integrate(s, 0.0, horizon, breaks);
    (z == 0 ? truth.median0 : truth.median1) = median;
    (z == 0 ? truth.rms0 : truth.rms1) = area;
  }
  return truth;
}

// ---------------------------------------------------------------- registry and configs

CoefficientTable default_coefficients() {
  CoefficientTable table;
  table.names = CovariateModel::default_model().column_names();
  table.treatment.resize(20);
  table.treatment << 0.03, 0.15, 0.35, 0.15, -0.8, 0.4, 0.3, -0.4, -0.1, -0.15, -0.2, -0.25, -0.15,
      -0.25, -0.3, -0.2, -0.25, -0.3, -0.3, -0.35;
  table.survival.resize(20);
  table.survival << 0.04, 0.3, 0.8, 0.3, -0.4, 0.2, 0.2, -0.1, -0.2, 0.0, 0.0, 0.0, -0.1, -0.1, -0.2,
      -0.3, -0.2, -0.15, -0.1, -0.2;
  table.intercept = 0.529;
  return table;
}

std::map<std::string, ScenarioSpec> scenario_registry() {
  ScenarioSpec base;
  base.name = "base";
  base.n_total = 5000;
  base.beta1 = -0.69;
  base.effect.form = TreatmentEffect::Form::log_time;
  base.effect.kappa = 0.25;
  base.covariates = CovariateModel::default_model();
  const auto coefficients = default_coefficients();
  base.treatment_coeffs = coefficients.treatment;
  base.survival_coeffs = coefficients.survival;
  base.treatment_intercept = *coefficients.intercept;

  std::map<std::string, ScenarioSpec> registry;
  registry["base"] = base;

  ScenarioSpec pwc = base;
  pwc.name = "pwc";
  pwc.beta1 = 0.0;
  pwc.effect = {TreatmentEffect::Form::piecewise, -0.25, 2.0, {}};
  registry["pwc"] = pwc;

  ScenarioSpec nph = base;
  nph.name = "modest_nph";
  nph.effect.kappa = 0.125;
  registry["modest_nph"] = nph;

  ScenarioSpec te = base;
  te.name = "modest_te";
  te.beta1 = -0.41;
  registry["modest_te"] = te;

  ScenarioSpec small = base;
  small.name = "small_ss";
  small.n_total = 1000;
  registry["small_ss"] = small;
  return registry;
}

ScenarioSpec named_scenario(const std::string& name) {
  auto registry = scenario_registry();
  if (name == "null") {
    ScenarioSpec null = registry.at("base");
    null.name = "null";
    null.beta1 = 0.0;
    null.effect = {};
    return null;
  }
  const auto it = registry.find(name);
  if (it == registry.end()) throw ConfigError("unknown scenario '" + name + "'");
  return it->second;
}

std::vector<std::string> scenario_names() {
  return {"base", "pwc", "modest_nph", "modest_te", "small_ss", "null"};
}

CoefficientTable load_coefficients_csv(const std::filesystem::path& path) {
  const auto rows = read_csv_rows(path);
  if (rows.empty()) throw ConfigError(path.string() + ": empty coefficient table");
  const auto& header = rows.front();
  if (header.size() != 3 || strip_spaces(header[0]) != "name" || strip_spaces(header[1]) != "treatment" ||
      strip_spaces(header[2]) != "survival") {
    throw ConfigError(path.string() + ": header must be name,treatment,survival");
  }
  CoefficientTable table;
  std::vector<double> trt, surv;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = path.string() + ":" + std::to_string(r + 1) + ": ";
    if (row.size() != 3) throw ConfigError(where + "expected 3 fields");
    const std::string name = strip_spaces(row[0]);
    if (name == "Intercept" || name == "intercept") {
      table.intercept = config_number(row[1], where + "treatment");
      continue;
    }
    table.names.push_back(name);
    trt.push_back(config_number(row[1], where + "treatment"));
    surv.push_back(config_number(row[2], where + "survival"));
  }
  table.treatment = Eigen::Map<Eigen::VectorXd>(trt.data(), static_cast<Index>(trt.size()));
  table.survival = Eigen::Map<Eigen::VectorXd>(surv.data(), static_cast<Index>(surv.size()));
  return table;
}

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

CovariateModel parse_covariates(const json& j) {
  check_keys(j, {"marginals", "correlation"}, "covariates");
  CovariateModel model;
  for (const auto& m : j.at("marginals")) {
    check_keys(m, {"name", "kind", "mean", "sd", "p", "probs", "columns"}, "covariates.marginals");
    const auto name = m.at("name").get<std::string>();
    const auto kind = m.at("kind").get<std::string>();
    Marginal marginal;
    if (kind == "continuous") {
      marginal = {name, Marginal::Kind::continuous, m.value("mean", 0.0), m.value("sd", 1.0), {}, {name}};
    } else if (kind == "binary") {
      marginal = binary(name, m.at("p").get<double>());
    } else if (kind == "ordinal") {
      marginal = ordinal(name, m.at("probs").get<std::vector<double>>());
    } else {
      throw ConfigError("covariates: unknown marginal kind '" + kind + "'");
    }
    if (m.contains("columns")) marginal.columns = m.at("columns").get<std::vector<std::string>>();
    model.marginals.push_back(std::move(marginal));
  }
  const auto rows = j.at("correlation").get<std::vector<std::vector<double>>>();
  model.correlation.resize(static_cast<Index>(rows.size()), static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.size()) throw ConfigError("covariates: correlation must be square");
    for (std::size_t c = 0; c < rows.size(); ++c) {
      model.correlation(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    }
  }
  return model;
}

}  // namespace

ScenarioSpec load_scenario_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario config " + path.string());
  json j;
  try {
    j = json::parse(in);
    check_keys(j, {"name", "extends", "n_total", "beta1", "effect", "baseline", "censoring",
                   "target_treat_prob", "calibrate_intercept", "treatment_intercept",
                   "coefficients", "covariates", "covariate_seed"},
               path.string());
    ScenarioSpec spec = named_scenario(j.value("extends", std::string("base")));
    spec.name = j.value("name", path.stem().string());
    spec.n_total = j.value("n_total", spec.n_total);
    spec.beta1 = j.value("beta1", spec.beta1);
    if (j.contains("effect")) {
      const auto& e = j.at("effect");
      check_keys(e, {"form", "kappa", "cut"}, "effect");
      const auto form = e.at("form").get<std::string>();
      if (form == "none") spec.effect = {};
      else if (form == "log_time") spec.effect = {TreatmentEffect::Form::log_time, e.at("kappa").get<double>(), 0.0, {}};
      else if (form == "piecewise")
        spec.effect = {TreatmentEffect::Form::piecewise, e.at("kappa").get<double>(), e.at("cut").get<double>(), {}};
      else throw ConfigError("effect: unknown form '" + form + "'");
    }
    if (j.contains("baseline")) {
      const auto& b = j.at("baseline");
      check_keys(b, {"lambda", "gamma"}, "baseline");
      spec.lambda = b.value("lambda", spec.lambda);
      spec.gamma = b.value("gamma", spec.gamma);
    }
    if (j.contains("censoring")) {
      const auto& c = j.at("censoring");
      check_keys(c, {"kind", "tau", "a", "b"}, "censoring");
      const auto kind = c.at("kind").get<std::string>();
      if (kind == "administrative") spec.censoring = {Censoring::Kind::administrative, c.value("tau", 10.0), 0.0, 0.0};
      else if (kind == "uniform") spec.censoring = {Censoring::Kind::uniform, 0.0, c.at("a").get<double>(), c.at("b").get<double>()};
      else if (kind == "none") spec.censoring = {Censoring::Kind::none, 0.0, 0.0, 0.0};
      else throw ConfigError("censoring: unknown kind '" + kind + "'");
    }
    spec.target_treat_prob = j.value("target_treat_prob", spec.target_treat_prob);
    spec.calibrate_intercept = j.value("calibrate_intercept", spec.calibrate_intercept);
    spec.treatment_intercept = j.value("treatment_intercept", spec.treatment_intercept);
    spec.covariate_seed = j.value("covariate_seed", spec.covariate_seed);
    if (j.contains("covariates")) spec.covariates = parse_covariates(j.at("covariates"));
    if (j.contains("coefficients")) {
      auto file = std::filesystem::path(j.at("coefficients").get<std::string>());
      if (file.is_relative()) file = path.parent_path() / file;
      const auto table = load_coefficients_csv(file);
      const auto expected = spec.covariates.column_names();
      if (table.names.size() != expected.size()) {
        throw ConfigError(file.string() + ": " + std::to_string(table.names.size()) +
                          " coefficient rows for " + std::to_string(expected.size()) + " covariate columns");
      }
      for (std::size_t k = 0; k < expected.size(); ++k) {
        if (table.names[k] != strip_spaces(expected[k])) {
          throw ConfigError(file.string() + ": row '" + table.names[k] + "' where '" + expected[k] +
                            "' was expected");
        }
      }
      spec.treatment_coeffs = table.treatment;
      spec.survival_coeffs = table.survival;
      if (table.intercept) spec.treatment_intercept = *table.intercept;
    }
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

double scenario_intercept(const ScenarioSpec& spec, const Eigen::MatrixXd& x) {
  if (!spec.calibrate_intercept) return spec.treatment_intercept;
  return calibrate_intercept(spec.treatment_coeffs, x, spec.target_treat_prob);
}

SimulatedCohort simulate_cohort(const ScenarioSpec& spec, const Eigen::MatrixXd& x, double intercept,
                                std::uint64_t seed) {
  const Eigen::VectorXi z = assign_treatment(x, spec.treatment_coeffs, intercept, seed);
  const Eigen::VectorXd t = draw_survival(x, z, spec, seed);
  const auto observed = apply_censoring(t, spec.censoring, seed);
  std::vector<std::int64_t> ids(static_cast<std::size_t>(x.rows()));
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int64_t>(i + 1);
  return {Cohort(std::move(ids), x, z, observed.time, observed.event), t};
}

}  // namespace iptwsurv
