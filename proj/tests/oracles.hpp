#pragma once

// Independent reference computations used only by the tests. They follow the textbook
// definitions directly (quadratic loops, brute-force grids) and share no code with the
// library.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "iptwsurv/core.hpp"

namespace oracle {

// Product-limit estimate at t computed from scratch.
inline double km_at(const std::vector<double>& time, const std::vector<int>& event,
                    const std::vector<double>& weight, double t) {
  std::vector<double> distinct;
  for (std::size_t i = 0; i < time.size(); ++i) {
    if (event[i] == 1 && time[i] <= t) distinct.push_back(time[i]);
  }
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  double s = 1.0;
  for (double tj : distinct) {
    double d = 0.0, n = 0.0;
    for (std::size_t i = 0; i < time.size(); ++i) {
      if (time[i] >= tj) n += weight[i];
      if (time[i] == tj && event[i] == 1) d += weight[i];
    }
    s *= 1.0 - d / n;
  }
  return s;
}

inline double km_at(const std::vector<double>& time, const std::vector<int>& event, double t) {
  return km_at(time, event, std::vector<double>(time.size(), 1.0), t);
}

// Jackknife pseudo-observations by explicit leave-one-out recomputation.
inline Eigen::MatrixXd naive_pseudo(const std::vector<double>& time, const std::vector<int>& event,
                                    const std::vector<double>& grid) {
  const std::size_t n = time.size();
  Eigen::MatrixXd out(n, grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double full = km_at(time, event, grid[k]);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> t2;
      std::vector<int> e2;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        t2.push_back(time[j]);
        e2.push_back(event[j]);
      }
      out(i, k) = n * full - (n - 1.0) * km_at(t2, e2, grid[k]);
    }
  }
  return out;
}

// Breslow log partial likelihood from the definition: every subject carries the
// treatment-time covariate x(t) = z * design(t) at each event time.
inline double cox_pl(const std::vector<double>& time, const std::vector<int>& event,
                     const std::vector<int>& z, const std::vector<double>& w,
                     const std::function<Eigen::VectorXd(double)>& design,
                     const Eigen::VectorXd& beta) {
  double ll = 0.0;
  for (std::size_t i = 0; i < time.size(); ++i) {
    if (event[i] != 1) continue;
    const double t = time[i];
    const double lp_i = z[i] * design(t).dot(beta);
    double s0 = 0.0;
    for (std::size_t j = 0; j < time.size(); ++j) {
      if (time[j] >= t) s0 += w[j] * std::exp(z[j] * design(t).dot(beta));
    }
    ll += w[i] * (lp_i - std::log(s0));
  }
  return ll;
}

// Golden-section refinement after a coarse grid: maximizes a unimodal f on [lo, hi].
inline double argmax_1d(const std::function<double(double)>& f, double lo, double hi) {
  const int n = 400;
  double best = lo, fbest = f(lo);
  for (int k = 1; k <= n; ++k) {
    const double x = lo + (hi - lo) * k / n;
    const double fx = f(x);
    if (fx > fbest) {
      fbest = fx;
      best = x;
    }
  }
  double a = best - (hi - lo) / n, b = best + (hi - lo) / n;
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 200; ++it) {
    const double c = b - r * (b - a), d = a + r * (b - a);
    if (f(c) > f(d)) b = d; else a = c;
  }
  return 0.5 * (a + b);
}

// Simpson quadrature of f on [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 2000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int k = 1; k < n; ++k) s += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
  return s * h / 3.0;
}

}  // namespace oracle
