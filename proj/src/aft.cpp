#include "iptwsurv/aft.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <numeric>
#include <random>
#include <sstream>

#include "iptwsurv/optim.hpp"

namespace iptwsurv {
namespace {

namespace bm = boost::math;
using Policy = bm::policies::policy<bm::policies::domain_error<bm::policies::ignore_error>,
                                    bm::policies::overflow_error<bm::policies::ignore_error>,
                                    bm::policies::evaluation_error<bm::policies::ignore_error>>;

constexpr double half_log_2pi = 0.91893853320467274178;
constexpr double lognormal_band = 1e-5;
constexpr double series_band = 0.1;  // |Q| below which k = 1/Q^2 > 100

// Stirling remainder delta(k) = lgamma(k) - (k - 1/2) log k + k - log(2 pi)/2, written
// in Q for the asymptotic series so that Q = 0 is an ordinary point.
double stirling_delta(double q) {
  if (std::abs(q) < series_band) {
    const double q2 = q * q, q6 = q2 * q2 * q2;
    return q2 / 12.0 - q6 / 360.0 + q6 * q2 * q2 / 1260.0 - q6 * q6 * q2 / 1680.0;
  }
  const double k = 1.0 / (q * q);
  return std::lgamma(k) - (k - 0.5) * std::log(k) + k - half_log_2pi;
}

// 2 delta'(k) / Q^3, the Q-derivative of -delta(1/Q^2).
double stirling_delta_q_term(double q) {
  if (std::abs(q) < series_band) {
    const double q4 = q * q * q * q;
    return q * (-1.0 / 6.0 + q4 / 60.0 - q4 * q4 / 126.0 + q4 * q4 * q4 / 120.0);
  }
  const double k = 1.0 / (q * q);
  const double dprime = bm::digamma(k, Policy()) - std::log(k) + 0.5 / k;
  return 2.0 * dprime / (q * q * q);
}

// E2(x) = (e^x - 1 - x) / x^2 and its derivative.
double e2(double x) {
  if (std::abs(x) < 0.1) {
    double term = 0.5, sum = 0.5;
    for (int n = 1; n < 12; ++n) {
      term *= x / (n + 2);
      sum += term;
    }
    return sum;
  }
  return (std::expm1(x) - x) / (x * x);
}

double e2_prime(double x) {
  if (std::abs(x) < 0.1) {
    // sum_{n>=1} n x^(n-1) / (n+2)!
    double fact = 6.0, power = 1.0, sum = 0.0;
    for (int n = 1; n < 12; ++n) {
      sum += n * power / fact;
      power *= x;
      fact *= n + 3;
    }
    return sum;
  }
  return std::expm1(x) / (x * x) - 2.0 * (std::expm1(x) - x) / (x * x * x);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
double normal_pdf(double x) { return std::exp(-0.5 * x * x - half_log_2pi); }

double dlogf_dw(double w, double q) {
  const double x = q * w;
  if (std::abs(x) < 1e-8) return -w * (1.0 + 0.5 * x);
  return -std::expm1(x) / q;
}

double dlogf_dq(double w, double q) {
  return stirling_delta_q_term(q) - w * w * w * e2_prime(q * w);
}

double log_survival_w(double w, double q) {
  const double s = gengamma_survival_w(w, q);
  return std::log(std::max(s, 1e-300));
}

// Weighted observations collapsed over identical (z, log t, event).
struct GgData {
  std::vector<double> log_t, z, w;
  std::vector<int> event;
};

GgData aggregate(const WeightedSample& sample) {
  const Cohort& c = sample.cohort();
  std::vector<Index> order(static_cast<std::size_t>(c.size()));
  std::iota(order.begin(), order.end(), Index{0});
  const auto key = [&](Index i) {
    return std::make_tuple(c.treatment()[i], c.event()[i], c.time()[i]);
  };
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return key(a) < key(b); });
  GgData d;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Index i = order[k];
    if (!(c.time()[i] > 0.0)) throw InvalidArgument("aft: survival times must be positive");
    if (k > 0 && key(i) == key(order[k - 1])) {
      d.w.back() += sample.weights()[i];
      continue;
    }
    d.log_t.push_back(std::log(c.time()[i]));
    d.z.push_back(c.treatment()[i]);
    d.event.push_back(c.event()[i]);
    d.w.push_back(sample.weights()[i]);
  }
  return d;
}

double gg_loglik(const GgData& d, const Eigen::Vector4d& p, Eigen::VectorXd* gradient) {
  const double mu = p[0], log_sigma = p[1], q = p[2], beta = p[3];
  const double sigma = std::exp(log_sigma);
  double ll = 0.0;
  Eigen::Vector4d g = Eigen::Vector4d::Zero();
  const double delta = stirling_delta(q);
  for (std::size_t i = 0; i < d.w.size(); ++i) {
    const double w = (d.log_t[i] - mu - beta * d.z[i]) / sigma;
    const double weight = d.w[i];
    double dw = 0.0, dq = 0.0;
    if (d.event[i] == 1) {
      ll += weight * (-half_log_2pi - delta - w * w * e2(q * w) - log_sigma - d.log_t[i]);
      if (!gradient) continue;
      dw = dlogf_dw(w, q);
      dq = dlogf_dq(w, q);
      g[1] -= weight;
    } else {
      const double log_s = log_survival_w(w, q);
      ll += weight * log_s;
      if (!gradient) continue;
      const double log_f = gengamma_log_density_w(w, q);
      dw = -std::exp(log_f - log_s);
      constexpr double h = 1e-3;
      dq = (-log_survival_w(w, q + 2 * h) + 8.0 * log_survival_w(w, q + h) -
            8.0 * log_survival_w(w, q - h) + log_survival_w(w, q - 2 * h)) /
           (12.0 * h);
    }
    g[0] += weight * dw * (-1.0 / sigma);
    g[1] += weight * dw * (-w);
    g[2] += weight * dq;
    g[3] += weight * dw * (-d.z[i] / sigma);
  }
  if (gradient) *gradient = g;
  return ll;
}

void require_events_per_arm(const WeightedSample& sample) {
  for (int z = 0; z < 2; ++z) {
    bool any = false;
    for (Index i = 0; i < sample.size() && !any; ++i) {
      any = sample.cohort().treatment()[i] == z && sample.cohort().event()[i] == 1;
    }
    if (!any) {
      throw SingularDesign("aft: arm " + std::to_string(z) + " has no events");
    }
  }
}

}  // namespace

const char* to_string(AftFamily family) {
  return family == AftFamily::weibull_ls ? "weibull_ls" : "gengamma";
}

double gengamma_log_density_w(double w, double q) {
  return -half_log_2pi - stirling_delta(q) - w * w * e2(q * w);
}

double gengamma_survival_w(double w, double q) {
  if (std::abs(q) < lognormal_band) {
    const double s = normal_cdf(-w) - q * normal_pdf(w) * (w * w + 2.0) / 6.0;
    return std::clamp(s, 0.0, 1.0);
  }
  const double k = 1.0 / (q * q);
  const double x = k * std::exp(q * w);
  if (!std::isfinite(x)) return q > 0.0 ? 0.0 : 1.0;
  const double s = q > 0.0 ? bm::gamma_q(k, x, Policy()) : bm::gamma_p(k, x, Policy());
  return std::isfinite(s) ? std::clamp(s, 0.0, 1.0) : (w > 0.0 ? 0.0 : 1.0);
}

WeibullArm fit_weibull_arm(const Eigen::VectorXd& time, const Eigen::VectorXi& event,
                           const Eigen::VectorXd& weights) {
  const Index n = time.size();
  if (event.size() != n || weights.size() != n) {
    throw InvalidArgument("fit_weibull_arm: inputs differ in length");
  }
  double D = 0.0, L1 = 0.0, m = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd lt(n);
  for (Index i = 0; i < n; ++i) {
    if (!(time[i] > 0.0)) throw InvalidArgument("aft: survival times must be positive");
    lt[i] = std::log(time[i]);
    m = std::max(m, lt[i]);
    if (event[i] == 1) {
      D += weights[i];
      L1 += weights[i] * lt[i];
    }
  }
  if (!(D > 0.0)) throw SingularDesign("fit_weibull_arm: no events");

  // Sums of w t^gamma (log t)^r scaled by exp(-gamma m) to avoid overflow.
  struct Sums {
    double s0, s1, s2;
  };
  const auto sums = [&](double gamma) {
    Sums s{0, 0, 0};
    for (Index i = 0; i < n; ++i) {
      const double v = weights[i] * std::exp(gamma * (lt[i] - m));
      s.s0 += v;
      s.s1 += v * lt[i];
      s.s2 += v * lt[i] * lt[i];
    }
    return s;
  };
  double gamma = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
  WeibullArm out;
  for (int iter = 0; iter < 200; ++iter) {
    const Sums s = sums(gamma);
    const double mean = s.s1 / s.s0;
    const double g = D / gamma + L1 - D * mean;
    const double h = -D / (gamma * gamma) - D * std::max(s.s2 / s.s0 - mean * mean, 0.0);
    out.iterations = iter;
    out.gradient = gamma * g;
    if (std::abs(out.gradient) <= 1e-9 * std::max(1.0, D)) {
      out.gamma = gamma;
      out.log_lambda = std::log(D) - std::log(s.s0) - gamma * m;
      out.log_likelihood = D * out.log_lambda + D * std::log(gamma) + (gamma - 1.0) * L1 - D;
      return out;
    }
    if (g > 0.0) lo = gamma; else hi = gamma;
    double next = gamma - g / h;
    if (!(next > lo && next < hi)) next = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * gamma;
    if (next > 1e3) throw NonConvergence("fit_weibull_arm: shape diverges");
    gamma = next;
  }
  throw NonConvergence("fit_weibull_arm: no convergence");
}

AftFit fit_weibull_ls(const WeightedSample& sample) {
  require_events_per_arm(sample);
  WeibullArm arm[2];
  for (int z = 0; z < 2; ++z) {
    const WeightedSample s = sample.arm(z);
    arm[z] = fit_weibull_arm(s.cohort().time(), s.cohort().event(), s.weights());
  }
  AftFit fit;
  fit.family = AftFamily::weibull_ls;
  fit.names = {"log_lambda", "gamma", "beta", "kappa"};
  fit.params.resize(4);
  // lambda_z = lambda exp(-beta z), gamma_z = gamma + kappa z.
  fit.params << arm[0].log_lambda, arm[0].gamma, arm[0].log_lambda - arm[1].log_lambda,
      arm[1].gamma - arm[0].gamma;
  fit.log_likelihood = arm[0].log_likelihood + arm[1].log_likelihood;
  fit.gradient = Eigen::Vector4d(0.0, arm[0].gradient, 0.0, arm[1].gradient);
  fit.converged = true;
  fit.iterations = arm[0].iterations + arm[1].iterations;
  fit.follow_up = sample.cohort().max_time();
  return fit;
}

Eigen::Vector2d weibull_hazard_coefficients(const AftFit& fit) {
  if (fit.family != AftFamily::weibull_ls) {
    throw InvalidArgument("weibull_hazard_coefficients: not a Weibull location-scale fit");
  }
  const double gamma = fit.params[1], beta = fit.params[2], kappa = fit.params[3];
  // h_z(t) = lambda_z gamma_z t^(gamma_z - 1); the log ratio is
  // log(lambda_1 gamma_1 / (lambda_0 gamma_0)) + kappa log t.
  return {-beta + std::log((gamma + kappa) / gamma), kappa};
}

double gengamma_log_likelihood(const WeightedSample& sample, const Eigen::Vector4d& params,
                               Eigen::VectorXd* gradient) {
  return gg_loglik(aggregate(sample), params, gradient);
}

AftFit fit_gengamma(const WeightedSample& sample, const GengammaOptions& options) {
  require_events_per_arm(sample);
  const GgData data = aggregate(sample);

  Eigen::Vector4d start;
  if (options.start.size() == 4 && options.start.allFinite()) {
    start = options.start;
  } else {
    const AftFit wbl = fit_weibull_ls(sample);
    const double log_lambda0 = wbl.params[0], g0 = wbl.params[1];
    const double log_lambda1 = log_lambda0 - wbl.params[2], g1 = g0 + wbl.params[3];
    // At Q = 1 the error is minimum-Gumbel: mu = -log(lambda)/gamma, sigma = 1/gamma.
    const double mu0 = -log_lambda0 / g0, mu1 = -log_lambda1 / g1;
    start << mu0, -std::log(0.5 * (g0 + g1)), 1.0, mu1 - mu0;
  }
  if (options.fixed_q) start[2] = *options.fixed_q;

  const bool free_q = !options.fixed_q.has_value();
  const auto expand = [&](const Eigen::VectorXd& x) {
    Eigen::Vector4d p;
    if (free_q) p = x;
    else p << x[0], x[1], *options.fixed_q, x[2];
    return p;
  };
  const auto shrink = [&](const Eigen::Vector4d& p) {
    Eigen::VectorXd x(free_q ? 4 : 3);
    if (free_q) x = p;
    else x << p[0], p[1], p[3];
    return x;
  };
  const Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    Eigen::VectorXd g4;
    const double ll = gg_loglik(data, expand(x), &g4);
    grad = free_q ? g4 : Eigen::VectorXd(Eigen::Vector3d(g4[0], g4[1], g4[3]));
    return ll;
  };

  BfgsOptions bo;
  bo.gradient_tolerance = options.gradient_tolerance;
  bo.max_iterations = options.max_iterations;
  BfgsResult best = bfgs_maximize(objective, shrink(start), bo);
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> jitter(0.0, 0.3);
  for (int r = 0; r < options.restarts && !best.converged; ++r) {
    Eigen::VectorXd x = best.x;
    for (auto& v : x) v += jitter(rng);
    BfgsResult trial = bfgs_maximize(objective, x, bo);
    if ((trial.converged && !best.converged) ||
        (trial.converged == best.converged && trial.value > best.value)) {
      best = std::move(trial);
    }
  }
  if (!best.converged) {
    std::ostringstream msg;
    msg << "fit_gengamma: no convergence after " << options.restarts
        << " restarts; best iterate " << expand(best.x).transpose() << " loglik " << best.value
        << " |grad| " << best.gradient.lpNorm<Eigen::Infinity>();
    throw NonConvergence(msg.str());
  }
  AftFit fit;
  fit.family = AftFamily::gengamma;
  fit.names = {"mu", "log_sigma", "Q", "beta"};
  fit.params = expand(best.x);
  fit.log_likelihood = best.value;
  fit.gradient = best.gradient;
  fit.converged = true;
  fit.iterations = best.iterations;
  fit.follow_up = sample.cohort().max_time();
  return fit;
}

double aft_survival(const AftFit& fit, int z, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidArgument("aft_survival: bad time");
  if (t == 0.0) return 1.0;
  if (fit.family == AftFamily::weibull_ls) {
    const double log_lambda = fit.params[0] - fit.params[2] * z;
    const double shape = fit.params[1] + fit.params[3] * z;
    return std::exp(-std::exp(log_lambda + shape * std::log(t)));
  }
  const double w = (std::log(t) - fit.params[0] - fit.params[3] * z) / std::exp(fit.params[1]);
  return gengamma_survival_w(w, fit.params[2]);
}

StepCurve aft_survival_curve(const AftFit& fit, int z, const Eigen::VectorXd& grid) {
  if (z != 0 && z != 1) throw InvalidArgument("aft_survival_curve: arm must be 0 or 1");
  return sample_curve<double>([&](double t) { return aft_survival(fit, z, t); }, grid);
}

}  // namespace iptwsurv
