#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "iptwsurv/pipeline.hpp"
#include "iptwsurv/simdata.hpp"

namespace iptwsurv {

struct RunConfig {
  std::vector<std::string> scenarios{"base"};  // registry names or JSON config paths
  int replicates = 1000;
  std::uint64_t seed = 20240901;
  int threads = 1;
  AnalysisConfig analysis;  // bootstrap seed is derived per replicate from `seed`

  void validate() const;
};

/// Performance of one estimator for one estimand across replicates.
struct MetricRow {
  std::string scenario, estimator, estimand;
  double truth = 0.0;          // NaN when the true value does not exist
  double mean_estimate = 0.0;  // over replicates with a point estimate
  double bias = 0.0;           // mean(estimate - truth)
  double bias_mcse = 0.0;      // Monte Carlo SE of the bias
  double empirical_sd = 0.0;   // SD of the point estimates
  double mean_se = 0.0;        // mean bootstrap SE
  double coverage = 0.0;       // fraction of percentile CIs containing the truth
  int n_replicates = 0;
  int n_estimated = 0;  // replicates with a point estimate
  int n_covered = 0;    // replicates eligible for coverage (estimate, truth and CI exist)
  int n_failed = 0;     // estimator failure or degenerate bootstrap
  int n_undefined = 0;  // estimator ran but the estimand did not exist (median)
  long boot_failures = 0;  // failed bootstrap replicates summed over replicates
};

struct MetricsTable {
  std::vector<MetricRow> rows;
};

struct TimingRow {
  std::string scenario, estimator;
  double seconds_per_fit = 0.0;  // mean over bootstrap iterations and replicates
};

struct ScenarioRun {
  ScenarioSpec spec;
  std::string source;  // registry name or config path
  double intercept = 0.0;
  TruthReport truth;
  std::vector<std::string> warnings;
};

struct SimulationResult {
  RunConfig config;
  std::vector<ScenarioRun> scenarios;
  MetricsTable metrics;
  std::vector<TimingRow> timing;
};

/// A registry name ("base", "null", ...) or a path to a JSON scenario config.
ScenarioSpec resolve_scenario(const std::string& name_or_path);

/// Replicate loop for one scenario: simulate, weight, estimate, bootstrap, aggregate
/// against the analytic truth. Replicate r uses derive_seed(seed, stream_replicate, r)
/// for the cohort and derive_seed(seed, stream_bootstrap, r) for its resamples.
SimulationResult run_scenario(const ScenarioSpec& spec, const RunConfig& config,
                              const std::string& source = {});

/// All scenarios of the config, in order, concatenated into one table.
SimulationResult run_simulation(const RunConfig& config);

/// metrics.csv, metrics.json, bias_long.csv, se_long.csv, coverage_long.csv,
/// manifest.json and timing.csv (the only file with machine-dependent values).
void emit_reports(const SimulationResult& result, const std::filesystem::path& outdir,
                  const std::vector<std::string>& command_line = {});

/// report.csv and report.json for an applied analysis.
void emit_analysis(const AnalysisResult& result, const std::filesystem::path& outdir,
                   const std::vector<std::string>& covariate_names,
                   const std::vector<std::string>& command_line = {});

/// RunConfig stored in a manifest, for reruns.
RunConfig load_manifest(const std::filesystem::path& path);

}  // namespace iptwsurv
