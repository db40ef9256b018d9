#include "iptwsurv/harness.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>

#include "iptwsurv/io.hpp"
#include "iptwsurv/rng.hpp"

namespace iptwsurv {
namespace {

using ordered_json = nlohmann::ordered_json;
constexpr double nan = std::numeric_limits<double>::quiet_NaN();
constexpr const char* version = "1.0.0";

// Outcome of one estimator on one replicate.
struct Cell {
  Eigen::VectorXd estimate;  // NaN entries: failed or undefined
  Eigen::VectorXd se;
  std::vector<ConfidenceInterval> ci;
  bool failed = false;
  bool degenerate = false;
  int boot_failures = 0;
  double seconds = 0.0;
  int iterations = 0;
};

ordered_json number(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

ordered_json scenario_json(const ScenarioSpec& s) {
  ordered_json j;
  j["name"] = s.name;
  j["n_total"] = s.n_total;
  j["beta1"] = s.beta1;
  j["effect"] = {{"form", to_string(s.effect.form)}, {"kappa", s.effect.kappa}, {"cut", s.effect.cut}};
  j["baseline"] = {{"lambda", s.lambda}, {"gamma", s.gamma}};
  switch (s.censoring.kind) {
    case Censoring::Kind::administrative:
      j["censoring"] = {{"kind", "administrative"}, {"tau", s.censoring.tau}};
      break;
    case Censoring::Kind::uniform:
      j["censoring"] = {{"kind", "uniform"}, {"a", s.censoring.a}, {"b", s.censoring.b}};
      break;
    case Censoring::Kind::none:
      j["censoring"] = {{"kind", "none"}};
      break;
  }
  j["target_treat_prob"] = s.target_treat_prob;
  j["calibrate_intercept"] = s.calibrate_intercept;
  j["treatment_intercept"] = s.treatment_intercept;
  j["covariate_seed"] = s.covariate_seed;
  ordered_json coefficients = ordered_json::array();
  const auto names = s.covariates.column_names();
  for (std::size_t k = 0; k < names.size(); ++k) {
    coefficients.push_back({{"name", names[k]},
                            {"treatment", s.treatment_coeffs[static_cast<Index>(k)]},
                            {"survival", s.survival_coeffs[static_cast<Index>(k)]}});
  }
  j["coefficients"] = coefficients;
  return j;
}

ordered_json analysis_json(const AnalysisConfig& a) {
  ordered_json j;
  ordered_json estimators = ordered_json::array();
  for (auto k : a.estimators) estimators.push_back(to_string(k));
  j["estimators"] = estimators;
  j["eval_times"] = a.eval_times;
  j["horizon"] = a.horizon;
  j["center_weights"] = a.center_weights;
  j["positivity_epsilon"] = a.positivity_epsilon;
  j["ctv_grid_step"] = a.ctv_grid_step;
  j["ctv_cutpoints"] = a.ctv_cutpoints;
  j["pseudo_step"] = a.pseudo_step;
  j["aft_curve_step"] = a.aft_curve_step;
  j["bootstrap"] = {{"iterations", a.bootstrap.iterations},
                    {"seed", a.bootstrap.seed},
                    {"ci_level", a.bootstrap.ci_level},
                    {"method", "percentile"},
                    {"max_failure_fraction", a.bootstrap.max_failure_fraction}};
  return j;
}

ordered_json truth_json(const TruthReport& t, const std::vector<std::string>& labels) {
  ordered_json j;
  const auto v = t.vector();
  for (std::size_t k = 0; k < labels.size(); ++k) j[labels[k]] = number(v[static_cast<Index>(k)]);
  ordered_json arms;
  for (int z : {0, 1}) {
    ordered_json a;
    const auto& surv = z == 0 ? t.surv0 : t.surv1;
    for (std::size_t k = 0; k < t.eval_times.size(); ++k) {
      a["surv@" + format_number(t.eval_times[k])] = surv[static_cast<Index>(k)];
    }
    const auto& median = z == 0 ? t.median0 : t.median1;
    a["median"] = median ? ordered_json(*median) : ordered_json(nullptr);
    a["rms"] = z == 0 ? t.rms0 : t.rms1;
    arms[z == 0 ? "control" : "treated"] = a;
  }
  j["arms"] = arms;
  return j;
}

ordered_json versions_json() {
  return {{"iptwsurv", version},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", std::to_string(BOOST_VERSION / 100000) + "." + std::to_string(BOOST_VERSION / 100 % 1000) +
                        "." + std::to_string(BOOST_VERSION % 100)},
          {"compiler", __VERSION__}};
}

void write_json(const std::filesystem::path& path, const ordered_json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

std::string csv_field(const std::string& s) { return s; }
std::string csv_field(double v) { return format_number(v); }
std::string csv_field(int v) { return std::to_string(v); }
std::string csv_field(long v) { return std::to_string(v); }

template <class... T>
void csv_row(std::ostream& out, const T&... fields) {
  bool first = true;
  ((out << (first ? "" : ",") << csv_field(fields), first = false), ...);
  out << '\n';
}

Cell run_cell_point(const WeightedSample& sample, EstimatorKind kind, const AnalysisConfig& config,
                    const Eigen::VectorXd& start, Index K) {
  Cell cell;
  try {
    cell.estimate = estimand_vector(estimate(sample, kind, config, start));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error&) {
    cell.failed = true;
    cell.estimate = Eigen::VectorXd::Constant(K, nan);
  }
  return cell;
}

std::vector<Cell> run_replicate(const ScenarioSpec& spec, const Eigen::MatrixXd& x, double intercept,
                                const RunConfig& config, std::uint64_t r, int boot_threads) {
  const auto& analysis = config.analysis;
  const std::size_t J = analysis.estimators.size();
  const auto K = static_cast<Index>(analysis.eval_times.size() + 2);
  const auto sim = simulate_cohort(spec, x, intercept, derive_seed(config.seed, stream_replicate, r));

  std::vector<Cell> cells(J);
  WeightedSample sample;
  try {
    sample = weight_cohort(sim.cohort, analysis);
  } catch (const EstimationError&) {
    for (auto& c : cells) c = {Eigen::VectorXd::Constant(K, nan), {}, {}, true, false, 0, 0.0, 0};
    return cells;
  } catch (const DataError&) {
    for (auto& c : cells) c = {Eigen::VectorXd::Constant(K, nan), {}, {}, true, false, 0, 0.0, 0};
    return cells;
  }
  const bool use_gg = std::find(analysis.estimators.begin(), analysis.estimators.end(), EstimatorKind::aft_gg) !=
                      analysis.estimators.end();
  const Eigen::VectorXd start = use_gg ? gengamma_start_values(sample) : Eigen::VectorXd();
  for (std::size_t j = 0; j < J; ++j) cells[j] = run_cell_point(sample, analysis.estimators[j], analysis, start, K);

  auto boot = analysis.bootstrap;
  boot.seed = derive_seed(config.seed, stream_bootstrap, r);
  boot.threads = boot_threads;
  boot.strict = false;
  std::vector<double> seconds(J, 0.0);
  std::mutex timing_mutex;
  const MultiPipeline pipeline = [&](const Cohort& resample) {
    std::vector<double> s;
    auto blocks = estimate_all(resample, analysis, start, &s);
    std::lock_guard<std::mutex> lock(timing_mutex);
    for (std::size_t j = 0; j < J; ++j) seconds[j] += s[j];
    return blocks;
  };
  auto results = bootstrap_blocks(sim.cohort, pipeline, J, boot);
  for (std::size_t j = 0; j < J; ++j) {
    auto& c = cells[j];
    auto& b = results[j];
    c.degenerate = b.degenerate;
    c.boot_failures = b.n_failed;
    c.seconds = seconds[j];
    c.iterations = boot.iterations;
    if (b.se.size() == K) {
      c.se = b.se;
      c.ci = b.ci;
    } else {
      c.se = Eigen::VectorXd::Constant(K, nan);
      c.ci.assign(static_cast<std::size_t>(K), {nan, nan});
    }
  }
  return cells;
}

MetricRow aggregate(const std::vector<std::vector<Cell>>& cells, std::size_t j, Index k, double truth) {
  MetricRow row;
  row.truth = truth;
  row.n_replicates = static_cast<int>(cells.size());
  double sum = 0.0, sum_err = 0.0, sum_se = 0.0;
  int n_se = 0, covered = 0;
  std::vector<double> estimates, errors;
  for (const auto& replicate : cells) {
    const auto& c = replicate[j];
    row.boot_failures += c.boot_failures;
    if (c.failed || c.degenerate) ++row.n_failed;
    if (c.failed) continue;
    const double e = c.estimate[k];
    if (std::isnan(e)) {
      ++row.n_undefined;
      continue;
    }
    estimates.push_back(e);
    sum += e;
    if (!std::isnan(truth)) {
      errors.push_back(e - truth);
      sum_err += e - truth;
    }
    if (!c.degenerate && c.se.size() > k && std::isfinite(c.se[k])) {
      sum_se += c.se[k];
      ++n_se;
    }
    const auto& ci = c.ci.size() > static_cast<std::size_t>(k) ? c.ci[static_cast<std::size_t>(k)]
                                                               : ConfidenceInterval{nan, nan};
    if (!c.degenerate && !std::isnan(truth) && !std::isnan(ci.lower) && !std::isnan(ci.upper)) {
      ++row.n_covered;
      covered += ci.lower <= truth && truth <= ci.upper;
    }
  }
  row.n_estimated = static_cast<int>(estimates.size());
  const auto sd = [](const std::vector<double>& v, double mean) {
    if (v.size() < 2) return nan;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
  };
  row.mean_estimate = estimates.empty() ? nan : sum / static_cast<double>(estimates.size());
  row.empirical_sd = sd(estimates, row.mean_estimate);
  row.bias = errors.empty() ? nan : sum_err / static_cast<double>(errors.size());
  row.bias_mcse = errors.size() < 2 ? nan : sd(errors, row.bias) / std::sqrt(static_cast<double>(errors.size()));
  row.mean_se = n_se == 0 ? nan : sum_se / n_se;
  row.coverage = row.n_covered == 0 ? nan : static_cast<double>(covered) / row.n_covered;
  return row;
}

}  // namespace

void RunConfig::validate() const {
  if (scenarios.empty()) throw ConfigError("no scenario selected");
  if (replicates < 1) throw ConfigError("replicates must be positive");
  if (threads < 1) throw ConfigError("threads must be positive");
  analysis.validate();
}

ScenarioSpec resolve_scenario(const std::string& name_or_path) {
  const auto names = scenario_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) return named_scenario(name_or_path);
  if (std::filesystem::exists(name_or_path)) return load_scenario_json(name_or_path);
  throw ConfigError("'" + name_or_path + "' is neither a scenario name nor a config file");
}

SimulationResult run_scenario(const ScenarioSpec& spec, const RunConfig& config, const std::string& source) {
  config.validate();
  spec.validate();
  const auto& analysis = config.analysis;
  SimulationResult result;
  result.config = config;
  ScenarioRun run;
  run.spec = spec;
  run.source = source.empty() ? spec.name : source;
  auto draw = gen_covariates(spec.covariates, spec.n_total, spec.covariate_seed);
  run.warnings = std::move(draw.warnings);
  const Eigen::MatrixXd& x = draw.x;
  run.intercept = scenario_intercept(spec, x);
  run.truth = true_estimands(x, spec, analysis.eval_times, analysis.horizon);
  if (spec.censoring.kind == Censoring::Kind::administrative && spec.censoring.tau < analysis.horizon) {
    throw ConfigError("scenario '" + spec.name + "': horizon exceeds the administrative censoring time");
  }
  {
    const auto probe = simulate_cohort(spec, x, run.intercept, derive_seed(config.seed, stream_replicate, 0));
    for (int z : {0, 1}) {
      const auto arm = probe.cohort.arm(z);
      if (arm.empty() || arm.event().sum() == 0) {
        throw DataError("scenario '" + spec.name + "' is infeasible: an arm has no events");
      }
    }
  }

  const auto R = static_cast<std::size_t>(config.replicates);
  // Parallel over replicates when there are several; otherwise over bootstrap draws.
  const bool outer = config.threads > 1 && R > 1;
  std::vector<std::vector<Cell>> cells(R);
  parallel_for(R, outer ? config.threads : 1, [&](std::size_t r) {
    cells[r] = run_replicate(spec, x, run.intercept, config, r, outer ? 1 : config.threads);
  });

  const auto labels = analysis.estimand_names();
  const auto truth = run.truth.vector();
  for (std::size_t j = 0; j < analysis.estimators.size(); ++j) {
    for (std::size_t k = 0; k < labels.size(); ++k) {
      auto row = aggregate(cells, j, static_cast<Index>(k), truth[static_cast<Index>(k)]);
      row.scenario = spec.name;
      row.estimator = to_string(analysis.estimators[j]);
      row.estimand = labels[k];
      result.metrics.rows.push_back(std::move(row));
    }
    double seconds = 0.0;
    long fits = 0;
    for (const auto& replicate : cells) {
      seconds += replicate[j].seconds;
      fits += replicate[j].iterations;
    }
    result.timing.push_back({spec.name, to_string(analysis.estimators[j]), fits > 0 ? seconds / fits : nan});
  }
  result.scenarios.push_back(std::move(run));
  return result;
}

SimulationResult run_simulation(const RunConfig& config) {
  config.validate();
  SimulationResult all;
  all.config = config;
  for (const auto& source : config.scenarios) {
    auto one = run_scenario(resolve_scenario(source), config, source);
    for (auto& s : one.scenarios) all.scenarios.push_back(std::move(s));
    for (auto& r : one.metrics.rows) all.metrics.rows.push_back(std::move(r));
    for (auto& t : one.timing) all.timing.push_back(std::move(t));
  }
  return all;
}

void emit_reports(const SimulationResult& result, const std::filesystem::path& outdir,
                  const std::vector<std::string>& command_line) {
  const auto& rows = result.metrics.rows;
  {
    auto out = open_output(outdir / "metrics.csv");
    csv_row(out, std::string("scenario"), std::string("estimator"), std::string("estimand"), std::string("truth"),
            std::string("mean_estimate"), std::string("bias"), std::string("bias_mcse"),
            std::string("empirical_sd"), std::string("mean_se"), std::string("coverage"),
            std::string("n_replicates"), std::string("n_estimated"), std::string("n_covered"),
            std::string("n_failed"), std::string("n_undefined"), std::string("boot_failures"));
    for (const auto& r : rows) {
      csv_row(out, r.scenario, r.estimator, r.estimand, r.truth, r.mean_estimate, r.bias, r.bias_mcse,
              r.empirical_sd, r.mean_se, r.coverage, r.n_replicates, r.n_estimated, r.n_covered, r.n_failed,
              r.n_undefined, r.boot_failures);
    }
  }
  {
    auto bias = open_output(outdir / "bias_long.csv");
    auto se = open_output(outdir / "se_long.csv");
    auto coverage = open_output(outdir / "coverage_long.csv");
    csv_row(bias, std::string("scenario"), std::string("estimator"), std::string("estimand"), std::string("bias"),
            std::string("abs_bias"), std::string("bias_mcse"), std::string("n"));
    csv_row(se, std::string("scenario"), std::string("estimator"), std::string("estimand"), std::string("mean_se"),
            std::string("empirical_sd"), std::string("n"));
    csv_row(coverage, std::string("scenario"), std::string("estimator"), std::string("estimand"),
            std::string("coverage"), std::string("n"));
    for (const auto& r : rows) {
      csv_row(bias, r.scenario, r.estimator, r.estimand, r.bias, std::abs(r.bias), r.bias_mcse, r.n_estimated);
      csv_row(se, r.scenario, r.estimator, r.estimand, r.mean_se, r.empirical_sd, r.n_estimated);
      csv_row(coverage, r.scenario, r.estimator, r.estimand, r.coverage, r.n_covered);
    }
  }
  {
    auto out = open_output(outdir / "timing.csv");
    csv_row(out, std::string("scenario"), std::string("estimator"), std::string("seconds_per_fit"));
    for (const auto& t : result.timing) csv_row(out, t.scenario, t.estimator, t.seconds_per_fit);
  }

  const auto labels = result.config.analysis.estimand_names();
  ordered_json metrics;
  for (const auto& s : result.scenarios) {
    ordered_json scenario;
    scenario["truth"] = truth_json(s.truth, labels);
    ordered_json estimators;
    for (const auto& r : rows) {
      if (r.scenario != s.spec.name) continue;
      estimators[r.estimator][r.estimand] = {
          {"truth", number(r.truth)},         {"mean_estimate", number(r.mean_estimate)},
          {"bias", number(r.bias)},           {"bias_mcse", number(r.bias_mcse)},
          {"empirical_sd", number(r.empirical_sd)}, {"mean_se", number(r.mean_se)},
          {"coverage", number(r.coverage)},   {"n_replicates", r.n_replicates},
          {"n_estimated", r.n_estimated},     {"n_covered", r.n_covered},
          {"n_failed", r.n_failed},           {"n_undefined", r.n_undefined},
          {"boot_failures", r.boot_failures}};
    }
    scenario["estimators"] = estimators;
    metrics[s.spec.name] = scenario;
  }
  write_json(outdir / "metrics.json", metrics);

  ordered_json manifest;
  manifest["program"] = "iptwsurv";
  manifest["versions"] = versions_json();
  manifest["command_line"] = command_line;
  manifest["seed"] = result.config.seed;
  manifest["replicates"] = result.config.replicates;
  manifest["scenarios"] = result.config.scenarios;
  manifest["analysis"] = analysis_json(result.config.analysis);
  manifest["threads"] = result.config.threads;
  manifest["note"] = "threads does not change any emitted number; timing.csv is machine-dependent";
  ordered_json resolved = ordered_json::array();
  for (const auto& s : result.scenarios) {
    ordered_json j = scenario_json(s.spec);
    j["source"] = s.source;
    j["calibrated_intercept"] = s.intercept;
    j["warnings"] = s.warnings;
    j["assumptions"] = {"baseline lambda and gamma are not given by the source model; defaults are chosen",
                        "censoring scheme is an assumption (default administrative at 10 years)",
                        "covariate joint distribution is a documented default, not the original data"};
    resolved.push_back(j);
  }
  manifest["resolved_scenarios"] = resolved;
  write_json(outdir / "manifest.json", manifest);
}

RunConfig load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    RunConfig c;
    c.seed = j.at("seed").get<std::uint64_t>();
    c.replicates = j.at("replicates").get<int>();
    c.scenarios = j.at("scenarios").get<std::vector<std::string>>();
    c.threads = j.value("threads", 1);
    const auto& a = j.at("analysis");
    c.analysis.estimators.clear();
    for (const auto& e : a.at("estimators")) c.analysis.estimators.push_back(parse_estimator(e.get<std::string>()));
    c.analysis.eval_times = a.at("eval_times").get<std::vector<double>>();
    c.analysis.horizon = a.at("horizon").get<double>();
    c.analysis.center_weights = a.at("center_weights").get<bool>();
    c.analysis.positivity_epsilon = a.at("positivity_epsilon").get<double>();
    c.analysis.ctv_grid_step = a.at("ctv_grid_step").get<double>();
    c.analysis.ctv_cutpoints = a.at("ctv_cutpoints").get<std::vector<double>>();
    c.analysis.pseudo_step = a.at("pseudo_step").get<double>();
    c.analysis.aft_curve_step = a.at("aft_curve_step").get<double>();
    const auto& b = a.at("bootstrap");
    c.analysis.bootstrap.iterations = b.at("iterations").get<int>();
    c.analysis.bootstrap.seed = b.at("seed").get<std::uint64_t>();
    c.analysis.bootstrap.ci_level = b.at("ci_level").get<double>();
    c.analysis.bootstrap.max_failure_fraction = b.at("max_failure_fraction").get<double>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void emit_analysis(const AnalysisResult& result, const std::filesystem::path& outdir,
                   const std::vector<std::string>& covariate_names,
                   const std::vector<std::string>& command_line) {
  const auto labels = result.config.estimand_names();
  {
    auto out = open_output(outdir / "report.csv");
    out << "estimator";
    for (const auto& l : labels) out << ',' << l << ',' << l << "_lcl," << l << "_ucl";
    out << ",boot_iterations,boot_failed,note\n";
    for (const auto& e : result.estimators) {
      out << to_string(e.kind);
      const auto values = e.report ? estimand_vector(*e.report) : Eigen::VectorXd::Constant(
                                                                      static_cast<Index>(labels.size()), nan);
      for (std::size_t k = 0; k < labels.size(); ++k) {
        const bool has_ci = e.report && !e.degenerate && e.bootstrap.ci.size() == labels.size() &&
                            !std::isnan(values[static_cast<Index>(k)]);
        const auto ci = has_ci ? e.bootstrap.ci[k] : ConfidenceInterval{nan, nan};
        out << ',' << format_number(values[static_cast<Index>(k)]) << ',' << format_number(ci.lower) << ','
            << format_number(ci.upper);
      }
      std::string note;
      const auto add = [&](const std::string& s) { note += (note.empty() ? "" : "; ") + s; };
      if (!e.report) add("failed: " + e.error);
      if (e.report) {
        for (const auto& n : e.report->notes) add(n);
        if (!e.report->median_note.empty()) add("median " + e.report->median_note);
      }
      if (e.degenerate) add("bootstrap degenerate: intervals withheld");
      std::erase(note, ',');
      out << ',' << result.config.bootstrap.iterations << ',' << e.bootstrap.n_failed << ',' << note << '\n';
    }
  }
  ordered_json j;
  j["program"] = "iptwsurv";
  j["versions"] = versions_json();
  j["command_line"] = command_line;
  j["analysis"] = analysis_json(result.config);
  j["n"] = result.n;
  j["n_treated"] = result.n_treated;
  ordered_json prop;
  prop["coefficients"] = std::vector<double>(result.propensity_coefficients.begin(),
                                             result.propensity_coefficients.end());
  prop["covariates"] = covariate_names;
  prop["smd_before"] = std::vector<double>(result.smd_before.begin(), result.smd_before.end());
  prop["smd_after"] = std::vector<double>(result.smd_after.begin(), result.smd_after.end());
  j["propensity"] = prop;
  j["warnings"] = result.warnings;
  ordered_json estimators = ordered_json::array();
  for (const auto& e : result.estimators) {
    ordered_json r;
    r["estimator"] = to_string(e.kind);
    if (!e.report) r["error"] = e.error;
    const auto values = e.report ? estimand_vector(*e.report)
                                 : Eigen::VectorXd::Constant(static_cast<Index>(labels.size()), nan);
    ordered_json est;
    for (std::size_t k = 0; k < labels.size(); ++k) {
      const bool has_ci = e.report && !e.degenerate && e.bootstrap.ci.size() == labels.size() &&
                          !std::isnan(values[static_cast<Index>(k)]);
      est[labels[k]] = {{"estimate", number(values[static_cast<Index>(k)])},
                        {"lcl", has_ci ? number(e.bootstrap.ci[k].lower) : ordered_json(nullptr)},
                        {"ucl", has_ci ? number(e.bootstrap.ci[k].upper) : ordered_json(nullptr)},
                        {"se", e.bootstrap.se.size() == static_cast<Index>(labels.size())
                                   ? number(e.bootstrap.se[static_cast<Index>(k)])
                                   : ordered_json(nullptr)}};
    }
    r["estimands"] = est;
    if (e.report) {
      r["notes"] = e.report->notes;
      r["median_note"] = e.report->median_note;
    }
    r["bootstrap"] = {{"iterations", result.config.bootstrap.iterations},
                      {"failed", e.bootstrap.n_failed},
                      {"undefined", e.bootstrap.n_undefined},
                      {"degenerate", e.degenerate},
                      {"first_errors", e.bootstrap.failure_messages}};
    estimators.push_back(r);
  }
  j["estimators"] = estimators;
  write_json(outdir / "report.json", j);
  auto timing = open_output(outdir / "timing.csv");
  csv_row(timing, std::string("estimator"), std::string("seconds_per_fit"));
  for (const auto& e : result.estimators) csv_row(timing, std::string(to_string(e.kind)), e.seconds_per_iteration);
}

}  // namespace iptwsurv
