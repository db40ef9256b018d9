#include "iptwsurv/propensity.hpp"

#include <boost/math/tools/roots.hpp>

#include <sstream>

namespace iptwsurv {
namespace {

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& covariates) {
  Eigen::MatrixXd design(covariates.rows(), covariates.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(covariates.cols()) = covariates;
  return design;
}

// log(1 + exp(eta)) without overflow.
double softplus(double eta) { return std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta))); }

double log_likelihood(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = design * beta;
  double ll = 0.0;
  for (Index i = 0; i < eta.size(); ++i) ll += y[i] * eta[i] - softplus(eta[i]);
  return ll;
}

struct Derivatives {
  Eigen::VectorXd gradient;
  Eigen::MatrixXd information;
};

Derivatives derivatives(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = design * beta;
  Eigen::VectorXd p(eta.size()), w(eta.size());
  for (Index i = 0; i < eta.size(); ++i) {
    p[i] = logistic(eta[i]);
    w[i] = p[i] * (1.0 - p[i]);
  }
  const Eigen::MatrixXd root = design.array().colwise() * w.array().sqrt();
  Eigen::MatrixXd information = Eigen::MatrixXd::Zero(design.cols(), design.cols());
  information.selfadjointView<Eigen::Lower>().rankUpdate(root.transpose());
  information.triangularView<Eigen::StrictlyUpper>() = information.transpose();
  return {design.transpose() * (y - p), information};
}

}  // namespace

double logistic_log_likelihood(const Eigen::MatrixXd& covariates, const Eigen::VectorXi& outcome,
                               const Eigen::VectorXd& coefficients) {
  return log_likelihood(with_intercept(covariates), outcome.cast<double>(), coefficients);
}

Eigen::VectorXd logistic_gradient(const Eigen::MatrixXd& covariates,
                                  const Eigen::VectorXi& outcome,
                                  const Eigen::VectorXd& coefficients) {
  return derivatives(with_intercept(covariates), outcome.cast<double>(), coefficients).gradient;
}

Eigen::VectorXd irls_step(const Eigen::MatrixXd& covariates, const Eigen::VectorXi& outcome,
                          const Eigen::VectorXd& coefficients) {
  const auto d = derivatives(with_intercept(covariates), outcome.cast<double>(), coefficients);
  return coefficients + d.information.ldlt().solve(d.gradient);
}

LogisticFit fit_logistic(const Eigen::MatrixXd& covariates, const Eigen::VectorXi& outcome,
                         const LogisticOptions& options, const Eigen::VectorXd& start) {
  if (covariates.rows() != outcome.size()) {
    throw InvalidArgument("fit_logistic: covariates and outcome differ in length");
  }
  const Index successes = outcome.sum();
  if (successes == 0 || successes == outcome.size()) {
    throw SingularDesign("fit_logistic: outcome has a single class");
  }
  const Eigen::MatrixXd design = with_intercept(covariates);
  {
    // Rank from the spectrum of the Gram matrix with columns scaled to unit norm.
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(design.cols(), design.cols());
    gram.selfadjointView<Eigen::Lower>().rankUpdate(design.transpose());
    const Eigen::VectorXd norms = gram.diagonal().cwiseSqrt();
    if ((norms.array() == 0.0).any()) throw SingularDesign("fit_logistic: design has an all-zero column");
    gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
    const Eigen::MatrixXd scaled =
        norms.cwiseInverse().asDiagonal() * gram * norms.cwiseInverse().asDiagonal();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled, Eigen::EigenvaluesOnly);
    const double tol = 1e-10 * eig.eigenvalues().maxCoeff();
    const auto rank = (eig.eigenvalues().array() > tol).count();
    if (rank < design.cols()) {
      throw SingularDesign("fit_logistic: design matrix is rank deficient (rank " + std::to_string(rank) +
                           " of " + std::to_string(design.cols()) + ")");
    }
  }
  const Eigen::VectorXd y = outcome.cast<double>();

  LogisticFit fit;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(design.cols());
  if (start.size() == design.cols() && start.allFinite()) {
    beta = start;
  } else {
    const double mean = static_cast<double>(successes) / static_cast<double>(outcome.size());
    beta[0] = std::log(mean / (1.0 - mean));
  }
  double ll = log_likelihood(design, y, beta);

  for (int iter = 0; iter <= options.max_iterations; ++iter) {
    const auto d = derivatives(design, y, beta);
    if (d.gradient.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance) {
      fit.coefficients = beta;
      fit.converged = true;
      fit.iterations = iter;
      fit.log_likelihood = ll;
      return fit;
    }
    if (iter == options.max_iterations) break;
    const auto ldlt = d.information.ldlt();
    if (ldlt.info() != Eigen::Success) throw SingularDesign("fit_logistic: singular information");
    const Eigen::VectorXd step = ldlt.solve(d.gradient);

    double scale = 1.0;
    Eigen::VectorXd trial = beta + step;
    double trial_ll = log_likelihood(design, y, trial);
    for (int halving = 0; halving < 40 && !(trial_ll >= ll - 1e-12 * std::abs(ll)); ++halving) {
      scale *= 0.5;
      trial = beta + scale * step;
      trial_ll = log_likelihood(design, y, trial);
    }
    beta = trial;
    ll = trial_ll;
    if (beta.lpNorm<Eigen::Infinity>() > options.coefficient_bound) {
      throw NonConvergence("fit_logistic: coefficient exceeded bound (separation)");
    }
  }
  throw NonConvergence("fit_logistic: no convergence within " +
                       std::to_string(options.max_iterations) + " iterations");
}

Eigen::VectorXd predict_propensity(const LogisticFit& fit, const Eigen::MatrixXd& covariates) {
  if (fit.coefficients.size() != covariates.cols() + 1) {
    throw InvalidArgument("predict_propensity: coefficient length mismatch");
  }
  const Eigen::VectorXd eta =
      (covariates * fit.coefficients.tail(covariates.cols())).array() + fit.coefficients[0];
  return eta.unaryExpr([](double v) { return logistic(v); });
}

WeightedSample compute_iptw(const Cohort& cohort, const Eigen::VectorXd& propensity,
                            double epsilon) {
  if (propensity.size() != cohort.size()) {
    throw InvalidArgument("compute_iptw: propensities not aligned with cohort");
  }
  std::vector<std::int64_t> offending;
  Eigen::VectorXd w(cohort.size());
  for (Index i = 0; i < cohort.size(); ++i) {
    const double e = propensity[i];
    if (!(e > epsilon && e < 1.0 - epsilon)) {
      offending.push_back(cohort.ids()[static_cast<std::size_t>(i)]);
      continue;
    }
    const double z = cohort.treatment()[i];
    w[i] = z / e + (1.0 - z) / (1.0 - e);
  }
  if (!offending.empty()) {
    std::ostringstream msg;
    msg << "positivity violation: " << offending.size() << " subject(s) with propensity outside ("
        << epsilon << ", " << 1.0 - epsilon << "), ids:";
    for (std::size_t k = 0; k < std::min<std::size_t>(offending.size(), 20); ++k) {
      msg << ' ' << offending[k];
    }
    if (offending.size() > 20) msg << " ...";
    throw PositivityViolation(msg.str(), std::move(offending));
  }
  return WeightedSample(cohort, std::move(w), propensity);
}

WeightedSample compute_iptw(const LogisticFit& fit, const Cohort& cohort, double epsilon) {
  return compute_iptw(cohort, predict_propensity(fit, cohort.covariates()), epsilon);
}

Eigen::VectorXd center_weights(const Eigen::VectorXd& weights) {
  if (weights.size() == 0) throw InvalidArgument("center_weights: empty weight vector");
  if ((weights.array() <= 0.0).any() || !weights.allFinite()) {
    throw InvalidArgument("center_weights: weights must be positive and finite");
  }
  Eigen::VectorXd out = weights / weights.mean();
  // One correction pass removes the rounding left by the first division.
  out /= out.mean();
  return out;
}

WeightedSample center_weights(const WeightedSample& sample) {
  return sample.with_weights(center_weights(sample.weights()));
}

double calibrate_intercept(const Eigen::VectorXd& coefficients, const Eigen::MatrixXd& covariates,
                           double target_mean) {
  if (!(target_mean > 0.0 && target_mean < 1.0)) {
    throw InvalidArgument("calibrate_intercept: target must lie in (0, 1)");
  }
  if (coefficients.size() != covariates.cols()) {
    throw InvalidArgument("calibrate_intercept: coefficient length mismatch");
  }
  if (covariates.rows() == 0) throw InvalidArgument("calibrate_intercept: no rows");
  const Eigen::VectorXd lp = covariates * coefficients;
  const auto excess = [&](double b0) {
    double s = 0.0;
    for (Index i = 0; i < lp.size(); ++i) s += logistic(b0 + lp[i]);
    return s / static_cast<double>(lp.size()) - target_mean;
  };

  double lo = -1.0, hi = 1.0;
  constexpr double limit = 1e3;
  while (excess(lo) > 0.0) {
    lo *= 2.0;
    if (lo < -limit) throw CalibrationError("calibrate_intercept: target unreachable (too low)");
  }
  while (excess(hi) < 0.0) {
    hi *= 2.0;
    if (hi > limit) throw CalibrationError("calibrate_intercept: target unreachable (too high)");
  }
  std::uintmax_t max_iter = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(
      excess, lo, hi, boost::math::tools::eps_tolerance<double>(52), max_iter);
  const double root = 0.5 * (a + b);
  if (std::abs(excess(root)) > 1e-8) {
    throw CalibrationError("calibrate_intercept: root finder did not reach tolerance");
  }
  return root;
}

Eigen::VectorXd standardized_differences(const Cohort& cohort, const Eigen::VectorXd& weights) {
  const Eigen::VectorXd w =
      weights.size() == cohort.size() ? weights : Eigen::VectorXd::Ones(cohort.size());
  const Index p = cohort.n_covariates();
  Eigen::VectorXd out(p);
  for (Index j = 0; j < p; ++j) {
    double sw[2] = {0, 0}, m[2] = {0, 0}, v[2] = {0, 0};
    for (Index i = 0; i < cohort.size(); ++i) {
      const int z = cohort.treatment()[i];
      sw[z] += w[i];
      m[z] += w[i] * cohort.covariates()(i, j);
    }
    for (int z = 0; z < 2; ++z) m[z] /= sw[z];
    for (Index i = 0; i < cohort.size(); ++i) {
      const int z = cohort.treatment()[i];
      const double dev = cohort.covariates()(i, j) - m[z];
      v[z] += w[i] * dev * dev;
    }
    for (int z = 0; z < 2; ++z) v[z] /= sw[z];
    const double pooled = std::sqrt(0.5 * (v[0] + v[1]));
    out[j] = pooled > 0.0 ? (m[1] - m[0]) / pooled : 0.0;
  }
  return out;
}

}  // namespace iptwsurv
