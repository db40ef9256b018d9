#include "iptwsurv/cox.hpp"

#include <numeric>
#include <sstream>

namespace iptwsurv {
namespace {

// Upper edge of the grid cell (k-1)step < t <= k step.
double grid_cell_stop(double t, double step) {
  const double k = std::max(1.0, std::ceil(t / step - 1e-10));
  return k * step;
}

int count_cutpoints_below(const std::vector<double>& cutpoints, double t) {
  return static_cast<int>(std::lower_bound(cutpoints.begin(), cutpoints.end(), t) -
                          cutpoints.begin());
}

int count_cutpoints_upto(const std::vector<double>& cutpoints, double t) {
  return static_cast<int>(std::upper_bound(cutpoints.begin(), cutpoints.end(), t) -
                          cutpoints.begin());
}

void validate(const CoxOptions& options) {
  if (options.variant == CoxVariant::log_time && !options.split_at_failures &&
      !(options.grid_step > 0.0 && std::isfinite(options.grid_step))) {
    throw InvalidArgument("cox: grid_step must be positive");
  }
  if (options.variant == CoxVariant::piecewise) {
    if (options.cutpoints.empty()) throw InvalidArgument("cox: piecewise needs a cutpoint");
    for (std::size_t k = 0; k < options.cutpoints.size(); ++k) {
      const double c = options.cutpoints[k];
      if (!(c > 0.0) || !std::isfinite(c) || (k > 0 && !(c > options.cutpoints[k - 1]))) {
        throw InvalidArgument("cox: cutpoints must be positive and strictly increasing");
      }
    }
  }
}

struct Evaluation {
  double ll = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd information;
};

// Newton-Raphson with step halving. Coordinates with zero information at the start (no
// treated subject at risk in a period, say) carry no likelihood and stay at zero.
template <class Evaluate>
CoxFit newton(const Evaluate& evaluate, const CoxOptions& options) {
  const Index p = cox_dimension(options);
  CoxFit fit;
  fit.options = options;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Evaluation current = evaluate(beta);

  std::vector<Index> active;
  for (Index k = 0; k < p; ++k) {
    if (current.information(k, k) > 0.0) active.push_back(k);
  }
  if (active.empty()) throw SingularDesign("cox: no treated subject at risk at any event time");
  const auto m = static_cast<Index>(active.size());

  for (int iter = 0; iter <= options.max_iterations; ++iter) {
    Eigen::VectorXd g(m);
    Eigen::MatrixXd info(m, m);
    for (Index a = 0; a < m; ++a) {
      g[a] = current.gradient[active[a]];
      for (Index b = 0; b < m; ++b) info(a, b) = current.information(active[a], active[b]);
    }
    const auto ldlt = info.ldlt();
    const bool definite = ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0.0).all();
    const Eigen::VectorXd step = definite ? Eigen::VectorXd(ldlt.solve(g)) : Eigen::VectorXd();
    // A vanishing gradient with a Newton step that stays large is a coefficient running
    // off to infinity (monotone likelihood), not a maximum.
    if (g.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance && definite &&
        step.lpNorm<Eigen::Infinity>() <= 1e-4) {
      fit.beta = beta;
      fit.converged = true;
      fit.iterations = iter;
      fit.log_partial_likelihood = current.ll;
      return fit;
    }
    if (iter == options.max_iterations) break;
    if (!definite) throw SingularDesign("cox: information matrix is not positive definite");

    double scale = 1.0;
    Evaluation trial;
    Eigen::VectorXd candidate = beta;
    for (int halving = 0; halving < 40; ++halving) {
      for (Index a = 0; a < m; ++a) candidate[active[a]] = beta[active[a]] + scale * step[a];
      trial = evaluate(candidate);
      if (std::isfinite(trial.ll) && trial.ll >= current.ll - 1e-12 * std::abs(current.ll)) break;
      scale *= 0.5;
    }
    beta = candidate;
    current = std::move(trial);
    if (beta.lpNorm<Eigen::Infinity>() > options.coefficient_bound) {
      std::ostringstream msg;
      msg << "cox: coefficient exceeded " << options.coefficient_bound
          << " (monotone likelihood), beta = " << beta.transpose();
      throw NonConvergence(msg.str());
    }
  }
  throw NonConvergence("cox: no convergence within " + std::to_string(options.max_iterations) +
                       " iterations");
}

// Risk-set machinery over episode rows, shared by the fit and the Breslow estimator.
struct RowSweep {
  Eigen::MatrixXd design;  // rows x p
  Eigen::VectorXd weight, start, stop;
  std::vector<Index> by_stop, by_start;  // descending
  std::vector<double> event_times;       // descending
  std::vector<double> deaths;            // weighted deaths per event time
  Eigen::MatrixXd death_design;          // p x J: sum over deaths of w x

  RowSweep(const EpisodeTable& table) {
    const auto& rows = table.rows;
    const Index r = static_cast<Index>(rows.size());
    const Index p = cox_dimension(table.options);
    design.resize(r, p);
    weight.resize(r);
    start.resize(r);
    stop.resize(r);
    for (Index i = 0; i < r; ++i) {
      const auto& row = rows[static_cast<std::size_t>(i)];
      design.row(i) = episode_design(row, table.options).transpose();
      weight[i] = row.weight;
      start[i] = row.start;
      stop[i] = row.stop;
      if (row.event == 1) event_times.push_back(row.stop);
    }
    std::sort(event_times.begin(), event_times.end(), std::greater<>());
    event_times.erase(std::unique(event_times.begin(), event_times.end()), event_times.end());
    if (event_times.empty()) throw InvalidArgument("cox: no events");

    by_stop.resize(static_cast<std::size_t>(r));
    std::iota(by_stop.begin(), by_stop.end(), Index{0});
    by_start = by_stop;
    std::sort(by_stop.begin(), by_stop.end(), [&](Index a, Index b) { return stop[a] > stop[b]; });
    std::sort(by_start.begin(), by_start.end(),
              [&](Index a, Index b) { return start[a] > start[b]; });

    const auto j_of = [&](double t) {
      return static_cast<Index>(std::lower_bound(event_times.begin(), event_times.end(), t,
                                                 std::greater<>()) -
                                event_times.begin());
    };
    deaths.assign(event_times.size(), 0.0);
    death_design = Eigen::MatrixXd::Zero(p, static_cast<Index>(event_times.size()));
    for (Index i = 0; i < r; ++i) {
      if (rows[static_cast<std::size_t>(i)].event != 1) continue;
      const Index j = j_of(stop[i]);
      deaths[static_cast<std::size_t>(j)] += weight[i];
      death_design.col(j) += weight[i] * design.row(i).transpose();
    }
  }

  // Calls visit(j, s0, s1, s2) for each event time, descending, with the weighted
  // risk-set sums of exp(lp), x exp(lp) and x x' exp(lp).
  template <class Visit>
  void sweep(const Eigen::VectorXd& beta, bool second_order, const Visit& visit) const {
    const Index p = design.cols();
    const Eigen::VectorXd risk = (design * beta).array().exp().matrix().cwiseProduct(weight);
    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
    std::size_t in = 0, out = 0;
    const auto update = [&](Index i, double sign) {
      const double v = sign * risk[i];
      s0 += v;
      const auto x = design.row(i).transpose();
      s1 += v * x;
      if (second_order) s2.noalias() += v * x * x.transpose();
    };
    for (std::size_t j = 0; j < event_times.size(); ++j) {
      const double t = event_times[j];
      while (in < by_stop.size() && stop[by_stop[in]] >= t) update(by_stop[in++], 1.0);
      while (out < by_start.size() && start[by_start[out]] >= t) update(by_start[out++], -1.0);
      visit(static_cast<Index>(j), s0, s1, s2);
    }
  }

  Evaluation evaluate(const Eigen::VectorXd& beta) const {
    const Index p = design.cols();
    Evaluation e;
    e.gradient = Eigen::VectorXd::Zero(p);
    e.information = Eigen::MatrixXd::Zero(p, p);
    sweep(beta, true, [&](Index j, double s0, const Eigen::VectorXd& s1,
                          const Eigen::MatrixXd& s2) {
      const double d = deaths[static_cast<std::size_t>(j)];
      const Eigen::VectorXd mean = s1 / s0;
      e.ll += death_design.col(j).dot(beta) - d * std::log(s0);
      e.gradient += death_design.col(j) - d * mean;
      e.information += d * (s2 / s0 - mean * mean.transpose());
    });
    return e;
  }

  double log_likelihood(const Eigen::VectorXd& beta) const {
    double ll = 0.0;
    sweep(beta, false, [&](Index j, double s0, const Eigen::VectorXd&, const Eigen::MatrixXd&) {
      ll += death_design.col(j).dot(beta) - deaths[static_cast<std::size_t>(j)] * std::log(s0);
    });
    return ll;
  }
};

// Per-event-time arm totals: weighted at-risk n0, n1 and deaths d0, d1.
struct ArmTotals {
  std::vector<double> times, n0, n1, d0, d1;
};

ArmTotals arm_totals(const WeightedSample& sample) {
  const Cohort& c = sample.cohort();
  std::vector<Index> order(static_cast<std::size_t>(c.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return c.time()[a] > c.time()[b]; });
  ArmTotals out;
  double risk[2] = {0.0, 0.0};
  for (std::size_t k = 0; k < order.size();) {
    const double t = c.time()[order[k]];
    double dead[2] = {0.0, 0.0};
    for (; k < order.size() && c.time()[order[k]] == t; ++k) {
      const Index i = order[k];
      const int z = c.treatment()[i];
      risk[z] += sample.weights()[i];
      if (c.event()[i] == 1) dead[z] += sample.weights()[i];
    }
    if (dead[0] + dead[1] > 0.0 && t > 0.0) {
      out.times.push_back(t);
      out.n0.push_back(risk[0]);
      out.n1.push_back(risk[1]);
      out.d0.push_back(dead[0]);
      out.d1.push_back(dead[1]);
    }
  }
  for (auto* v : {&out.times, &out.n0, &out.n1, &out.d0, &out.d1}) std::reverse(v->begin(), v->end());
  return out;
}

CumulativeHazard cumulate(std::vector<double> times, const std::vector<double>& increments) {
  CumulativeHazard h;
  h.times = Eigen::Map<Eigen::VectorXd>(times.data(), static_cast<Index>(times.size()));
  h.values.resize(h.times.size());
  double total = 0.0;
  for (Index j = 0; j < h.values.size(); ++j) {
    total += increments[static_cast<std::size_t>(j)];
    h.values[j] = total;
  }
  return h;
}

}  // namespace

const char* to_string(CoxVariant variant) {
  switch (variant) {
    case CoxVariant::standard: return "standard";
    case CoxVariant::log_time: return "log_time";
    case CoxVariant::piecewise: return "piecewise";
  }
  return "unknown";
}

Index cox_dimension(const CoxOptions& options) {
  switch (options.variant) {
    case CoxVariant::standard: return 1;
    case CoxVariant::log_time: return 2;
    case CoxVariant::piecewise: return 1 + static_cast<Index>(options.cutpoints.size());
  }
  return 1;
}

Eigen::VectorXd treated_design(const CoxOptions& options, double t) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(cox_dimension(options));
  x[0] = 1.0;
  if (options.variant == CoxVariant::log_time) {
    x[1] = std::log(options.split_at_failures ? t : grid_cell_stop(t, options.grid_step));
  } else if (options.variant == CoxVariant::piecewise) {
    const int period = count_cutpoints_below(options.cutpoints, t);
    if (period > 0) x[period] = 1.0;
  }
  return x;
}

Eigen::VectorXd episode_design(const EpisodeRow& row, const CoxOptions& options) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(cox_dimension(options));
  if (row.treatment == 0) return x;
  x[0] = 1.0;
  if (options.variant == CoxVariant::log_time) {
    x[1] = row.log_time;
  } else if (options.variant == CoxVariant::piecewise && row.period > 0) {
    x[row.period] = 1.0;
  }
  return x;
}

EpisodeTable split_episodes(const WeightedSample& sample, const CoxOptions& options) {
  validate(options);
  const Cohort& c = sample.cohort();
  EpisodeTable table;
  table.options = options;
  table.follow_up = c.empty() ? 0.0 : c.max_time();

  std::vector<double> splits;  // candidate split points, increasing
  if (options.variant == CoxVariant::piecewise) {
    splits = options.cutpoints;
    for (double cut : options.cutpoints) {
      if (cut >= table.follow_up) {
        std::ostringstream msg;
        msg << "cutpoint " << cut << " is beyond the maximum follow-up " << table.follow_up;
        table.warnings.push_back(msg.str());
      }
    }
  } else if (options.variant == CoxVariant::log_time && options.split_at_failures) {
    for (Index i = 0; i < c.size(); ++i) {
      if (c.event()[i] == 1) splits.push_back(c.time()[i]);
    }
    std::sort(splits.begin(), splits.end());
    splits.erase(std::unique(splits.begin(), splits.end()), splits.end());
  }
  const bool on_grid = options.variant == CoxVariant::log_time && !options.split_at_failures;

  Index dropped = 0;
  for (Index i = 0; i < c.size(); ++i) {
    const double ti = c.time()[i];
    if (!(ti > 0.0)) {
      ++dropped;
      continue;
    }
    EpisodeRow row;
    row.id = c.ids()[static_cast<std::size_t>(i)];
    row.treatment = c.treatment()[i];
    row.weight = sample.weights()[i];
    const auto emit = [&](double a, double b, bool last) {
      row.start = a;
      row.stop = b;
      row.event = last ? c.event()[i] : 0;
      if (options.variant == CoxVariant::log_time) {
        row.log_time = std::log(on_grid ? grid_cell_stop(b, options.grid_step) : b);
      } else if (options.variant == CoxVariant::piecewise) {
        row.period = count_cutpoints_upto(options.cutpoints, a);
      }
      table.rows.push_back(row);
    };
    double a = 0.0;
    if (on_grid) {
      for (Index k = 1;; ++k) {
        const double g = static_cast<double>(k) * options.grid_step;
        if (g >= ti || grid_cell_stop(ti, options.grid_step) <= g) break;
        emit(a, g, false);
        a = g;
      }
    } else if (options.variant != CoxVariant::standard) {
      for (double s : splits) {
        if (s <= a) continue;
        if (s >= ti) break;
        emit(a, s, false);
        a = s;
      }
    }
    emit(a, ti, true);
  }
  if (dropped > 0) {
    table.warnings.push_back(std::to_string(dropped) + " subject(s) with zero follow-up dropped");
  }
  return table;
}

double cox_log_partial_likelihood(const EpisodeTable& table, const Eigen::VectorXd& beta) {
  if (beta.size() != cox_dimension(table.options)) {
    throw InvalidArgument("cox: coefficient length mismatch");
  }
  return RowSweep(table).log_likelihood(beta);
}

CoxFit fit_weighted_cox(const EpisodeTable& table) {
  validate(table.options);
  const RowSweep rows(table);
  CoxFit fit = newton([&](const Eigen::VectorXd& beta) { return rows.evaluate(beta); },
                      table.options);
  fit.follow_up = table.follow_up;
  fit.baseline = breslow_baseline(fit, table);
  return fit;
}

CoxFit fit_weighted_cox(const WeightedSample& sample, const CoxOptions& options) {
  validate(options);
  const ArmTotals totals = arm_totals(sample);
  const auto J = static_cast<Index>(totals.times.size());
  if (J == 0) throw InvalidArgument("cox: no events");
  const Index p = cox_dimension(options);
  Eigen::MatrixXd x(p, J);
  for (Index j = 0; j < J; ++j) x.col(j) = treated_design(options, totals.times[static_cast<std::size_t>(j)]);

  // With treatment the only regressor, every control contributes exp(0) and every treated
  // subject at risk at t_j shares exp(x_j' beta), so the risk-set sums collapse to
  // n0 + n1 exp(eta_j).
  const auto evaluate = [&](const Eigen::VectorXd& beta) {
    Evaluation e;
    e.gradient = Eigen::VectorXd::Zero(p);
    e.information = Eigen::MatrixXd::Zero(p, p);
    for (Index j = 0; j < J; ++j) {
      const auto k = static_cast<std::size_t>(j);
      const double eta = x.col(j).dot(beta);
      const double treated = totals.n1[k] * std::exp(eta);
      const double s0 = totals.n0[k] + treated;
      const double d = totals.d0[k] + totals.d1[k];
      const double pi = treated / s0;
      e.ll += totals.d1[k] * eta - d * std::log(s0);
      e.gradient += (totals.d1[k] - d * pi) * x.col(j);
      e.information.noalias() += d * pi * (1.0 - pi) * x.col(j) * x.col(j).transpose();
    }
    return e;
  };
  CoxFit fit = newton(evaluate, options);
  fit.follow_up = sample.cohort().max_time();

  std::vector<double> increments(static_cast<std::size_t>(J));
  for (Index j = 0; j < J; ++j) {
    const auto k = static_cast<std::size_t>(j);
    const double s0 = totals.n0[k] + totals.n1[k] * std::exp(x.col(j).dot(fit.beta));
    increments[k] = (totals.d0[k] + totals.d1[k]) / s0;
  }
  fit.baseline = cumulate(totals.times, increments);
  return fit;
}

CumulativeHazard breslow_baseline(const CoxFit& fit, const EpisodeTable& table) {
  if (fit.beta.size() != cox_dimension(table.options)) {
    throw InvalidArgument("breslow_baseline: coefficient length mismatch");
  }
  const RowSweep rows(table);
  const std::size_t J = rows.event_times.size();
  std::vector<double> increments(J);
  rows.sweep(fit.beta, false,
             [&](Index j, double s0, const Eigen::VectorXd&, const Eigen::MatrixXd&) {
               // Event times run descending in the sweep; store ascending.
               increments[J - 1 - static_cast<std::size_t>(j)] =
                   rows.deaths[static_cast<std::size_t>(j)] / s0;
             });
  std::vector<double> times(rows.event_times.rbegin(), rows.event_times.rend());
  return cumulate(std::move(times), increments);
}

std::pair<StepCurve, StepCurve> cox_marginal_curves(const CoxFit& fit) {
  const auto& h = fit.baseline;
  const Index J = h.times.size();
  Eigen::VectorXd s0(J), s1(J);
  double c0 = 0.0, c1 = 0.0, previous = 0.0;
  for (Index j = 0; j < J; ++j) {
    const double dh = h.values[j] - previous;
    previous = h.values[j];
    c0 += dh;
    c1 += std::exp(treated_design(fit.options, h.times[j]).dot(fit.beta)) * dh;
    s0[j] = std::exp(-c0);
    s1[j] = std::exp(-c1);
  }
  const double follow_up = std::max(fit.follow_up, J > 0 ? h.times[J - 1] : 0.0);
  return {StepCurve(h.times, s0, 1.0, follow_up), StepCurve(h.times, s1, 1.0, follow_up)};
}

}  // namespace iptwsurv
