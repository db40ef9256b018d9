#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "iptwsurv/core.hpp"

using namespace iptwsurv;

namespace {
StepCurve two_step() {
  Eigen::VectorXd t(2), s(2);
  t << 1.0, 2.0;
  s << 0.8, 0.5;
  return StepCurve(t, s);
}
}  // namespace

TEST_CASE("step curve evaluation is right-continuous") {
  const auto c = two_step();
  CHECK(evaluate_curve(c, 1.5) == 0.8);
  CHECK(evaluate_curve(c, 0.5) == 1.0);
  CHECK(evaluate_curve(c, 2.0) == 0.5);
  CHECK(evaluate_curve(c, 1.0) == 0.8);
  CHECK(evaluate_curve(c, 100.0) == 0.5);
  CHECK_THROWS_AS(evaluate_curve(c, std::numeric_limits<double>::quiet_NaN()), InvalidArgument);
  CHECK_THROWS_AS(evaluate_curve(c, std::numeric_limits<double>::infinity()), InvalidArgument);
}

TEST_CASE("step curve rejects non-monotone values instead of repairing them") {
  Eigen::VectorXd t(3), s(3);
  t << 1, 2, 3;
  s << 0.8, 0.9, 0.5;
  CHECK_THROWS_AS(StepCurve(t, s), InvalidArgument);
  const StepCurve reported(t, s, 1.0, std::nullopt, StepCurve::Monotonicity::report);
  CHECK(reported.monotonicity_violations() == 1);
  CHECK(reported(2.0) == 0.9);

  Eigen::VectorXd bad_t(2), ok_s(2);
  bad_t << 2, 1;
  ok_s << 0.9, 0.8;
  CHECK_THROWS_AS(StepCurve(bad_t, ok_s), InvalidArgument);
}

TEST_CASE("evaluation is non-increasing on random curves") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    const int m = 1 + static_cast<int>(u(rng) * 20);
    Eigen::VectorXd t(m), s(m);
    double time = 0.0, level = 1.0;
    for (int k = 0; k < m; ++k) {
      time += 0.01 + u(rng);
      level *= u(rng);
      t[k] = time;
      s[k] = level;
    }
    const StepCurve c(t, s);
    double prev = 1.0;
    for (double x = 0.0; x < time + 1.0; x += 0.037) {
      const double v = c(x);
      CHECK(v <= prev);
      prev = v;
    }
  }
}

TEST_CASE("cohort validation names the offending subject") {
  try {
    fixture::cohort({1.0, -2.0}, {1, 0}, {0, 1});
    FAIL("expected an error");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
  CHECK_THROWS_AS(fixture::cohort({1.0, 2.0}, {1, 2}, {0, 1}), InvalidArgument);
  CHECK_THROWS_AS(fixture::cohort({1.0, 2.0}, {1, 0}, {0, 3}), InvalidArgument);
  CHECK_THROWS_AS(fixture::cohort({1.0, std::nan("")}, {1, 0}, {0, 1}), InvalidArgument);
}

TEST_CASE("records round trip and subsets repeat rows") {
  const auto c = fixture::cohort({1.0, 2.0, 3.0}, {1, 0, 1}, {0, 1, 1});
  const auto back = Cohort::from_records(c.records());
  CHECK(back.time() == c.time());
  CHECK(back.ids() == c.ids());
  const std::vector<Index> rows{2, 2, 0};
  const auto s = c.subset(rows);
  CHECK(s.size() == 3);
  CHECK(s.ids()[0] == 3);
  CHECK(s.ids()[1] == 3);
  CHECK(c.arm(1).size() == 2);
  CHECK(c.count_arm(0) == 1);
}

TEST_CASE("weighted sample rejects non-positive weights") {
  const auto c = fixture::cohort({1.0, 2.0}, {1, 0}, {0, 1});
  Eigen::VectorXd w(2);
  w << 1.0, 0.0;
  CHECK_THROWS_AS(WeightedSample(c, w), InvalidArgument);
  w << 1.0, 2.0;
  CHECK(WeightedSample(c, w).arm(1).weights()[0] == 2.0);
}

TEST_CASE("estimand labels and flattening") {
  const std::vector<double> times{2, 5, 10};
  const auto labels = estimand_labels(times);
  REQUIRE(labels.size() == 5);
  CHECK(labels[0] == "surv@2");
  CHECK(labels[3] == "median");
  CHECK(labels[4] == "rms");
  EstimandReport r;
  for (double t : times) r.delta_surv_at[t] = Estimate{t / 10.0, std::nullopt};
  r.delta_rms = Estimate{0.3, std::nullopt};
  const auto v = estimand_vector(r);
  CHECK(std::isnan(v[3]));
  CHECK(v[4] == 0.3);
}
