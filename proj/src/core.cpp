#include "iptwsurv/core.hpp"

#include <sstream>

namespace iptwsurv {

Cohort::Cohort(std::vector<std::int64_t> ids, Eigen::MatrixXd covariates,
               Eigen::VectorXi treatment, Eigen::VectorXd time, Eigen::VectorXi event)
    : ids_(std::move(ids)),
      covariates_(std::move(covariates)),
      treatment_(std::move(treatment)),
      time_(std::move(time)),
      event_(std::move(event)) {
  const auto n = time_.size();
  if (static_cast<Index>(ids_.size()) != n || covariates_.rows() != n ||
      treatment_.size() != n || event_.size() != n) {
    throw InvalidArgument("cohort: column lengths disagree");
  }
  for (Index i = 0; i < n; ++i) {
    if (!std::isfinite(time_[i]) || time_[i] < 0.0) {
      std::ostringstream msg;
      msg << "cohort: subject " << ids_[i] << " has invalid time " << time_[i];
      throw InvalidArgument(msg.str());
    }
    if (treatment_[i] != 0 && treatment_[i] != 1) {
      throw InvalidArgument("cohort: treatment must be 0 or 1 (subject " +
                            std::to_string(ids_[i]) + ")");
    }
    if (event_[i] != 0 && event_[i] != 1) {
      throw InvalidArgument("cohort: event must be 0 or 1 (subject " + std::to_string(ids_[i]) +
                            ")");
    }
  }
  if (!covariates_.allFinite()) throw InvalidArgument("cohort: non-finite covariate value");
}

Cohort Cohort::from_records(std::span<const SubjectRecord> records) {
  const auto n = static_cast<Index>(records.size());
  const Index p = n > 0 ? records.front().covariates.size() : 0;
  std::vector<std::int64_t> ids(records.size());
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXi z(n), d(n);
  Eigen::VectorXd t(n);
  for (Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    if (r.covariates.size() != p) {
      throw InvalidArgument("cohort: covariate vector length differs between records");
    }
    ids[static_cast<std::size_t>(i)] = r.id;
    x.row(i) = r.covariates.transpose();
    z[i] = r.treatment;
    t[i] = r.time;
    d[i] = r.event;
  }
  return Cohort(std::move(ids), std::move(x), std::move(z), std::move(t), std::move(d));
}

SubjectRecord Cohort::record(Index i) const {
  return SubjectRecord{ids_[static_cast<std::size_t>(i)], covariates_.row(i).transpose(),
                       treatment_[i], time_[i], event_[i]};
}

std::vector<SubjectRecord> Cohort::records() const {
  std::vector<SubjectRecord> out;
  out.reserve(static_cast<std::size_t>(size()));
  for (Index i = 0; i < size(); ++i) out.push_back(record(i));
  return out;
}

Cohort Cohort::subset(std::span<const Index> rows) const {
  const auto m = static_cast<Index>(rows.size());
  std::vector<std::int64_t> ids(rows.size());
  Eigen::MatrixXd x(m, n_covariates());
  Eigen::VectorXi z(m), d(m);
  Eigen::VectorXd t(m);
  for (Index k = 0; k < m; ++k) {
    const Index i = rows[static_cast<std::size_t>(k)];
    if (i < 0 || i >= size()) throw InvalidArgument("cohort: subset row out of range");
    ids[static_cast<std::size_t>(k)] = ids_[static_cast<std::size_t>(i)];
    x.row(k) = covariates_.row(i);
    z[k] = treatment_[i];
    t[k] = time_[i];
    d[k] = event_[i];
  }
  Cohort out;
  out.ids_ = std::move(ids);
  out.covariates_ = std::move(x);
  out.treatment_ = std::move(z);
  out.time_ = std::move(t);
  out.event_ = std::move(d);
  return out;
}

std::vector<Index> Cohort::arm_rows(int z) const {
  std::vector<Index> rows;
  for (Index i = 0; i < size(); ++i) {
    if (treatment_[i] == z) rows.push_back(i);
  }
  return rows;
}

Cohort Cohort::arm(int z) const { return subset(arm_rows(z)); }

Index Cohort::count_arm(int z) const { return (treatment_.array() == z).count(); }

double Cohort::max_time() const { return size() > 0 ? time_.maxCoeff() : 0.0; }

WeightedSample::WeightedSample(Cohort cohort, Eigen::VectorXd weights,
                               Eigen::VectorXd propensity)
    : cohort_(std::move(cohort)), weights_(std::move(weights)), propensity_(std::move(propensity)) {
  if (weights_.size() != cohort_.size()) {
    throw InvalidArgument("weighted sample: weights not aligned with cohort");
  }
  if (propensity_.size() != 0 && propensity_.size() != cohort_.size()) {
    throw InvalidArgument("weighted sample: propensities not aligned with cohort");
  }
  for (Index i = 0; i < weights_.size(); ++i) {
    if (!std::isfinite(weights_[i]) || !(weights_[i] > 0.0)) {
      throw InvalidArgument("weighted sample: weights must be positive and finite");
    }
  }
  for (Index i = 0; i < propensity_.size(); ++i) {
    if (!(propensity_[i] > 0.0 && propensity_[i] < 1.0)) {
      throw InvalidArgument("weighted sample: propensity outside (0, 1)");
    }
  }
}

WeightedSample WeightedSample::unweighted(Cohort cohort) {
  Eigen::VectorXd w = Eigen::VectorXd::Ones(cohort.size());
  return WeightedSample(std::move(cohort), std::move(w));
}

WeightedSample WeightedSample::arm(int z) const {
  const auto rows = cohort_.arm_rows(z);
  Eigen::VectorXd w(static_cast<Index>(rows.size()));
  Eigen::VectorXd e(propensity_.size() > 0 ? static_cast<Index>(rows.size()) : 0);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    w[static_cast<Index>(k)] = weights_[rows[k]];
    if (e.size() > 0) e[static_cast<Index>(k)] = propensity_[rows[k]];
  }
  return WeightedSample(cohort_.subset(rows), std::move(w), std::move(e));
}

WeightedSample WeightedSample::with_weights(Eigen::VectorXd weights) const {
  return WeightedSample(cohort_, std::move(weights), propensity_);
}

std::vector<std::string> estimand_labels(std::span<const double> eval_times) {
  std::vector<double> sorted(eval_times.begin(), eval_times.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::string> labels;
  for (double t : sorted) {
    std::ostringstream s;
    s << "surv@" << t;
    labels.push_back(s.str());
  }
  labels.emplace_back("median");
  labels.emplace_back("rms");
  return labels;
}

Eigen::VectorXd estimand_vector(const EstimandReport& report) {
  Eigen::VectorXd v(static_cast<Index>(report.delta_surv_at.size()) + 2);
  Index k = 0;
  for (const auto& [t, est] : report.delta_surv_at) v[k++] = est.value;
  v[k++] = report.delta_median ? report.delta_median->value
                               : std::numeric_limits<double>::quiet_NaN();
  v[k] = report.delta_rms.value;
  return v;
}

}  // namespace iptwsurv
