#pragma once

#include <Eigen/Dense>

#include <random>
#include <vector>

#include "iptwsurv/core.hpp"

namespace fixture {

inline iptwsurv::Cohort cohort(const std::vector<double>& time, const std::vector<int>& event,
                               const std::vector<int>& z,
                               Eigen::MatrixXd covariates = Eigen::MatrixXd()) {
  const auto n = static_cast<Eigen::Index>(time.size());
  std::vector<std::int64_t> ids(time.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int64_t>(i + 1);
  if (covariates.rows() != n) covariates = Eigen::MatrixXd::Zero(n, 0);
  return iptwsurv::Cohort(ids, covariates,
                          Eigen::Map<const Eigen::VectorXi>(z.data(), n),
                          Eigen::Map<const Eigen::VectorXd>(time.data(), n),
                          Eigen::Map<const Eigen::VectorXi>(event.data(), n));
}

inline iptwsurv::Cohort one_arm(const std::vector<double>& time, const std::vector<int>& event) {
  return cohort(time, event, std::vector<int>(time.size(), 0));
}

// Two-arm Weibull data with a treatment-varying shape and uniform censoring, plus one
// confounder that drives both treatment and hazard.
struct Draw {
  std::vector<double> time;
  std::vector<int> event, z;
  std::vector<double> x, w;
};

inline Draw random_two_arm(std::size_t n, std::uint64_t seed, double censor_max = 8.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Draw d;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = normal(rng);
    const double e = 1.0 / (1.0 + std::exp(-0.5 * x));
    const int z = unif(rng) < e ? 1 : 0;
    const double shape = 1.2 + 0.3 * z;
    const double rate = 0.15 * std::exp(0.4 * x - 0.5 * z);
    const double t = std::pow(-std::log(unif(rng)) / rate, 1.0 / shape);
    const double c = censor_max * unif(rng);
    // Round to a coarse grid so ties occur.
    const double obs = std::max(0.01, std::round(std::min(t, c) * 100.0) / 100.0);
    d.time.push_back(obs);
    d.event.push_back(t <= c ? 1 : 0);
    d.z.push_back(z);
    d.x.push_back(x);
    d.w.push_back(z / e + (1 - z) / (1.0 - e));
  }
  return d;
}

inline iptwsurv::WeightedSample weighted(const Draw& d) {
  const auto n = static_cast<Eigen::Index>(d.time.size());
  Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(d.x.data(), n);
  return iptwsurv::WeightedSample(cohort(d.time, d.event, d.z, x),
                                  Eigen::Map<const Eigen::VectorXd>(d.w.data(), n));
}

}  // namespace fixture
