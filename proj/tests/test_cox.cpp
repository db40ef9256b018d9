#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "iptwsurv/cox.hpp"
#include "iptwsurv/propensity.hpp"
#include "oracles.hpp"

using namespace iptwsurv;

namespace {
CoxOptions variant(CoxVariant v) {
  CoxOptions o;
  o.variant = v;
  return o;
}
const CoxVariant all_variants[] = {CoxVariant::standard, CoxVariant::log_time, CoxVariant::piecewise};
}  // namespace

TEST_CASE("episode splitting") {
  const auto one = WeightedSample::unweighted(fixture::cohort({0.05}, {1}, {1}));
  const auto lt = split_episodes(one, variant(CoxVariant::log_time));
  REQUIRE(lt.rows.size() == 1);
  CHECK(lt.rows[0].start == 0.0);
  CHECK(lt.rows[0].stop == 0.05);

  auto pw = variant(CoxVariant::piecewise);
  pw.cutpoints = {2.0};
  const auto s = split_episodes(WeightedSample::unweighted(fixture::cohort({2.5}, {1}, {1})), pw);
  REQUIRE(s.rows.size() == 2);
  CHECK(s.rows[0].stop == 2.0);
  CHECK(s.rows[0].event == 0);
  CHECK(s.rows[1].start == 2.0);
  CHECK(s.rows[1].event == 1);
  CHECK(s.rows[1].period == 1);

  // n=3 enumeration: monthly grid rows are ceil(12 T) each.
  const auto three = WeightedSample::unweighted(fixture::cohort({0.5, 1.0, 2.26}, {1, 0, 1}, {0, 1, 1}));
  const auto t3 = split_episodes(three, variant(CoxVariant::log_time));
  CHECK(t3.rows.size() == 6 + 12 + 28);
  int events = 0;
  for (const auto& r : t3.rows) events += r.event;
  CHECK(events == 2);
  const auto p3 = split_episodes(three, variant(CoxVariant::piecewise));
  CHECK(p3.rows.size() == 1 + 1 + 2);

  // Rows of each subject partition (0, T].
  const auto d = fixture::random_two_arm(50, 9);
  for (auto v : all_variants) {
    const auto table = split_episodes(fixture::weighted(d), variant(v));
    std::map<std::int64_t, double> covered, last;
    for (const auto& r : table.rows) {
      CHECK(r.start < r.stop);
      CHECK(r.start == (last.count(r.id) ? last[r.id] : 0.0));
      last[r.id] = r.stop;
      covered[r.id] += r.stop - r.start;
    }
    for (std::size_t i = 0; i < d.time.size(); ++i) {
      CHECK(last[static_cast<std::int64_t>(i + 1)] == d.time[i]);
    }
  }

  auto far = variant(CoxVariant::piecewise);
  far.cutpoints = {2.0, 50.0};
  CHECK(split_episodes(fixture::weighted(d), far).warnings.size() == 1);
  far.cutpoints = {5.0, 2.0};
  CHECK_THROWS_AS(split_episodes(fixture::weighted(d), far), InvalidArgument);
}

TEST_CASE("symmetric groups give a null effect") {
  const auto c = fixture::cohort({1, 2, 3, 4, 1, 2, 3, 4}, {1, 0, 1, 1, 1, 0, 1, 1},
                                 {0, 0, 0, 0, 1, 1, 1, 1});
  const auto fit = fit_weighted_cox(split_episodes(WeightedSample::unweighted(c), variant(CoxVariant::standard)));
  CHECK(std::abs(fit.beta[0]) <= 1e-8);
  const auto [s0, s1] = cox_marginal_curves(fit);
  CHECK((s0.surv() - s1.surv()).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("standard cox matches a one-dimensional search of the partial likelihood") {
  const std::vector<double> t{0.5, 1.2, 2.0, 3.1, 0.8, 1.9, 2.4, 4.0};
  const std::vector<int> e(8, 1), z{0, 0, 0, 0, 1, 1, 1, 1};
  const std::vector<double> w(8, 1.0);
  const auto fit = fit_weighted_cox(
      split_episodes(WeightedSample::unweighted(fixture::cohort(t, e, z)), variant(CoxVariant::standard)));
  const auto pl = [&](double b) {
    return oracle::cox_pl(t, e, z, w, [](double) { return Eigen::VectorXd::Ones(1); },
                          Eigen::VectorXd::Constant(1, b));
  };
  CHECK(fit.beta[0] == doctest::Approx(oracle::argmax_1d(pl, -5.0, 5.0)).epsilon(1e-4));
  CHECK(fit.log_partial_likelihood == doctest::Approx(pl(fit.beta[0])));
}

TEST_CASE("partial likelihood agrees with the definition for every variant") {
  const auto d = fixture::random_two_arm(60, 13);
  const auto ws = fixture::weighted(d);
  for (auto v : all_variants) {
    for (bool per_failure : {false, true}) {
      auto o = variant(v);
      o.split_at_failures = per_failure;
      const auto table = split_episodes(ws, o);
      Eigen::VectorXd beta = Eigen::VectorXd::LinSpaced(cox_dimension(o), -0.4, 0.3);
      const double expect = oracle::cox_pl(d.time, d.event, d.z, d.w,
                                           [&](double t) { return treated_design(o, t); }, beta);
      CHECK(cox_log_partial_likelihood(table, beta) == doctest::Approx(expect).epsilon(1e-11));
    }
  }
}

TEST_CASE("row and aggregated routes agree") {
  const auto d = fixture::random_two_arm(400, 21);
  const auto ws = fixture::weighted(d);
  for (auto v : all_variants) {
    const auto o = variant(v);
    const auto a = fit_weighted_cox(split_episodes(ws, o));
    const auto b = fit_weighted_cox(ws, o);
    CHECK((a.beta - b.beta).lpNorm<Eigen::Infinity>() <= 1e-10);
    REQUIRE(a.baseline.times.size() == b.baseline.times.size());
    CHECK((a.baseline.times - b.baseline.times).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((a.baseline.values - b.baseline.values).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
  auto exact = variant(CoxVariant::log_time);
  exact.split_at_failures = true;
  const auto small = fixture::weighted(fixture::random_two_arm(120, 22));
  const auto a = fit_weighted_cox(split_episodes(small, exact));
  const auto b = fit_weighted_cox(small, exact);
  CHECK((a.beta - b.beta).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("argmax invariance to weight scaling") {
  const auto ws = fixture::weighted(fixture::random_two_arm(300, 8));
  for (auto v : all_variants) {
    const auto a = fit_weighted_cox(ws, variant(v));
    const auto b = fit_weighted_cox(ws.with_weights(3.0 * ws.weights()), variant(v));
    CHECK((a.beta - b.beta).lpNorm<Eigen::Infinity>() <= 1e-8);
  }
}

TEST_CASE("randomized weights equal the unweighted fit") {
  const auto c = fixture::weighted(fixture::random_two_arm(300, 12)).cohort();
  const auto ws = compute_iptw(c, Eigen::VectorXd::Constant(c.size(), 0.5));
  const auto a = fit_weighted_cox(ws, variant(CoxVariant::standard));
  const auto b = fit_weighted_cox(WeightedSample::unweighted(c), variant(CoxVariant::standard));
  CHECK(std::abs(a.beta[0] - b.beta[0]) <= 1e-10);
}

TEST_CASE("breslow baseline") {
  // Null fit with unit weights reduces to Nelson-Aalen.
  const auto c = fixture::cohort({1, 2, 2, 3, 1, 2, 2, 3}, {1, 1, 0, 1, 1, 1, 0, 1},
                                 {0, 0, 0, 0, 1, 1, 1, 1});
  const auto table = split_episodes(WeightedSample::unweighted(c), variant(CoxVariant::standard));
  const auto fit = fit_weighted_cox(table);
  REQUIRE(fit.baseline.times.size() == 3);
  CHECK(fit.baseline.values[0] == doctest::Approx(2.0 / 8.0));
  CHECK(fit.baseline.values[1] == doctest::Approx(2.0 / 8.0 + 2.0 / 6.0));
  CHECK(fit.baseline.values[2] == doctest::Approx(2.0 / 8.0 + 2.0 / 6.0 + 2.0 / 2.0));

  // Single event at t=1 among n at risk.
  const auto single = fixture::cohort({1, 2, 3, 4, 5}, {1, 0, 0, 0, 0}, {0, 1, 0, 1, 0});
  const auto st = split_episodes(WeightedSample::unweighted(single), variant(CoxVariant::standard));
  CoxFit null;
  null.options = st.options;
  null.beta = Eigen::VectorXd::Zero(1);
  CHECK(breslow_baseline(null, st).values[0] == doctest::Approx(0.2));

  // Weighted 4-subject hand computation at beta = 0.5.
  const auto four = fixture::cohort({1, 2, 3, 4}, {1, 1, 0, 1}, {0, 1, 1, 0});
  Eigen::VectorXd w(4);
  w << 1.5, 0.5, 2.0, 1.0;
  const auto ft = split_episodes(WeightedSample(four, w), variant(CoxVariant::standard));
  CoxFit given;
  given.options = ft.options;
  given.beta = Eigen::VectorXd::Constant(1, 0.5);
  const double e = std::exp(0.5);
  const auto h = breslow_baseline(given, ft);
  const double d1 = 1.5 / (1.5 + 0.5 * e + 2.0 * e + 1.0);
  const double d2 = 0.5 / (0.5 * e + 2.0 * e + 1.0);
  const double d4 = 1.0 / 1.0;
  CHECK(h.values[0] == doctest::Approx(d1));
  CHECK(h.values[1] == doctest::Approx(d1 + d2));
  CHECK(h.values[2] == doctest::Approx(d1 + d2 + d4));
}

TEST_CASE("marginal curves") {
  const auto ws = fixture::weighted(fixture::random_two_arm(500, 77));
  const auto fit = fit_weighted_cox(ws, variant(CoxVariant::standard));
  const auto [s0, s1] = cox_marginal_curves(fit);
  const double hr = std::exp(fit.beta[0]);
  for (Index k = 0; k < s0.size(); ++k) {
    CHECK(s1.surv()[k] == doctest::Approx(std::pow(s0.surv()[k], hr)).epsilon(1e-12));
  }
  CHECK(s0(0.0) == 1.0);
  CHECK(s0.is_monotone());

  // log-time curves against quadrature of the hazard exp(beta + kappa log c(t)) dH0.
  auto o = variant(CoxVariant::log_time);
  const auto lt = fit_weighted_cox(ws, o);
  const auto [l0, l1] = cox_marginal_curves(lt);
  for (double t : {0.5, 1.7, 3.0, 6.2}) {
    double cum = 0.0;
    for (Index j = 0; j < lt.baseline.times.size() && lt.baseline.times[j] <= t; ++j) {
      const double dh = lt.baseline.values[j] - (j ? lt.baseline.values[j - 1] : 0.0);
      const double c = std::ceil(lt.baseline.times[j] * 12.0 - 1e-9) / 12.0;
      cum += std::exp(lt.beta[0] + lt.beta[1] * std::log(c)) * dh;
    }
    CHECK(l1(t) == doctest::Approx(std::exp(-cum)).epsilon(1e-10));
  }
}

TEST_CASE("monotone likelihood is reported") {
  const auto c = fixture::cohort({1, 2, 3, 4, 5, 6}, {1, 1, 1, 0, 0, 0}, {1, 1, 1, 0, 0, 0});
  CHECK_THROWS_AS(fit_weighted_cox(WeightedSample::unweighted(c), variant(CoxVariant::standard)),
                  NonConvergence);
}
