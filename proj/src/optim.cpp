#include "iptwsurv/optim.hpp"

#include <cmath>

namespace iptwsurv {

Eigen::MatrixXd numeric_hessian(const Objective& f, const Eigen::VectorXd& x, double step) {
  const Eigen::Index p = x.size();
  Eigen::MatrixXd h(p, p);
  Eigen::VectorXd gp(p), gm(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    const double d = step * std::max(1.0, std::abs(x[k]));
    Eigen::VectorXd xp = x, xm = x;
    xp[k] += d;
    xm[k] -= d;
    f(xp, gp);
    f(xm, gm);
    h.col(k) = (gp - gm) / (2.0 * d);
  }
  return 0.5 * (h + h.transpose());
}

BfgsResult bfgs_maximize(const Objective& f, Eigen::VectorXd x0, const BfgsOptions& options) {
  const Eigen::Index p = x0.size();
  BfgsResult out;
  Eigen::VectorXd g(p);
  double value = f(x0, g);
  ++out.evaluations;
  if (!std::isfinite(value) || !g.allFinite()) {
    out.x = x0;
    out.value = value;
    out.gradient = g;
    return out;
  }

  // Inverse of the negative Hessian (ascent metric).
  const auto identity_metric = [&]() -> Eigen::MatrixXd {
    return Eigen::MatrixXd::Identity(p, p) / std::max(1.0, g.lpNorm<Eigen::Infinity>());
  };
  Eigen::MatrixXd metric = identity_metric();
  if (options.hessian_start) {
    const Eigen::MatrixXd neg = -numeric_hessian(f, x0, options.hessian_step);
    out.evaluations += static_cast<int>(2 * p);
    Eigen::LLT<Eigen::MatrixXd> llt(neg);
    if (llt.info() == Eigen::Success && neg.allFinite()) {
      metric = llt.solve(Eigen::MatrixXd::Identity(p, p));
    }
  }

  Eigen::VectorXd x = std::move(x0);
  out.trace.push_back(value);
  Eigen::VectorXd g_new(p);
  bool reset = false;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    out.iterations = iter;
    if (g.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance) {
      out.converged = true;
      break;
    }
    Eigen::VectorXd direction = metric * g;
    double slope = g.dot(direction);
    if (!(slope > 0.0)) {
      metric = identity_metric();
      direction = metric * g;
      slope = g.dot(direction);
    }
    double alpha = 1.0, trial_value = 0.0;
    Eigen::VectorXd trial;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      trial = x + alpha * direction;
      trial_value = f(trial, g_new);
      ++out.evaluations;
      if (std::isfinite(trial_value) && g_new.allFinite() &&
          trial_value >= value + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted || alpha < 1e-3) {
      // Near the optimum the Armijo gain falls below the rounding noise of the objective
      // and the line search stalls. A Newton step on a fresh Hessian is then accepted on a
      // gradient decrease with the objective unchanged up to that noise.
      Eigen::VectorXd polished(p), g_polished(p);
      const Eigen::MatrixXd neg = -numeric_hessian(f, x, options.hessian_step);
      out.evaluations += static_cast<int>(2 * p);
      const Eigen::LLT<Eigen::MatrixXd> llt(neg);
      if (llt.info() == Eigen::Success && neg.allFinite()) {
        polished = x + llt.solve(g);
        const double polished_value = f(polished, g_polished);
        ++out.evaluations;
        const double noise = 1e-13 * (1.0 + std::abs(value));
        if (std::isfinite(polished_value) && g_polished.allFinite() &&
            polished_value >= value - noise &&
            g_polished.lpNorm<Eigen::Infinity>() < g.lpNorm<Eigen::Infinity>()) {
          metric = llt.solve(Eigen::MatrixXd::Identity(p, p));
          x = std::move(polished);
          g = g_polished;
          value = polished_value;
          out.trace.push_back(value);
          out.iterations = iter + 1;
          reset = false;
          continue;
        }
      }
    }
    if (!accepted) {
      // Retry once along the gradient before giving up.
      if (reset) break;
      reset = true;
      metric = identity_metric();
      continue;
    }
    reset = false;
    const Eigen::VectorXd s = trial - x;
    const Eigen::VectorXd y = g - g_new;  // curvature of -f
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(p, p);
      metric = (I - rho * s * y.transpose()) * metric * (I - rho * y * s.transpose()) +
               rho * s * s.transpose();
    }
    x = std::move(trial);
    g = g_new;
    value = trial_value;
    out.trace.push_back(value);
    out.iterations = iter + 1;
  }
  if (g.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance) out.converged = true;
  out.x = std::move(x);
  out.gradient = g;
  out.value = value;
  return out;
}

}  // namespace iptwsurv
