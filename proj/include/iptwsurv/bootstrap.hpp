#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "iptwsurv/core.hpp"

namespace iptwsurv {

struct BootstrapSpec {
  int iterations = 500;
  std::uint64_t seed = 1;
  double ci_level = 0.95;
  int threads = 1;
  // More failed replicates than this fraction raises BootstrapDegeneracy.
  double max_failure_fraction = 0.2;
  // Throw BootstrapDegeneracy on excess failure; otherwise flag the result.
  bool strict = true;

  void validate() const;
};

/// Replicate output of one estimator: estimand values (NaN = absent) or a failure.
struct BlockResult {
  Eigen::VectorXd values;
  bool failed = false;
  std::string error;
};

struct BootstrapResult {
  Eigen::MatrixXd replicates;  // iterations x estimands; NaN where absent or failed
  Eigen::VectorXd se;          // over defined replicates; NaN with fewer than two
  std::vector<ConfidenceInterval> ci;  // percentile; NaN bounds when nothing is defined
  std::vector<int> n_defined;          // per estimand
  int n_failed = 0;                    // replicates where the estimator itself failed
  std::vector<int> n_undefined;        // per estimand, among non-failed replicates
  std::vector<std::string> failure_messages;  // first few, for diagnostics
  bool degenerate = false;  // failures exceeded the allowed fraction
};

/// Order-statistic percentile interval: the ceil(q B)-th smallest value for q at each tail.
ConfidenceInterval percentile_interval(std::vector<double> values, double ci_level);

/// Summarizes replicate rows into SE, percentile CIs and failure counts.
BootstrapResult summarize_replicates(Eigen::MatrixXd replicates, std::vector<bool> failed,
                                     std::vector<std::string> messages, double ci_level);

/// Pipeline over a resampled cohort returning one block per estimator. Blocks share the
/// resample (and anything the pipeline computes once, such as the propensity fit).
using MultiPipeline = std::function<std::vector<BlockResult>(const Cohort&)>;

/// Subject-level resampling with replacement. Replicate b draws its rows from a stream
/// seeded by derive_seed(spec.seed, stream_bootstrap, b), so results are bit-identical
/// for any thread count. A block failing too often throws BootstrapDegeneracy under
/// spec.strict and is flagged `degenerate` otherwise.
std::vector<BootstrapResult> bootstrap_blocks(const Cohort& cohort, const MultiPipeline& pipeline,
                                              std::size_t n_blocks, const BootstrapSpec& spec);

/// Single-estimator form. Library errors thrown by `pipeline` count as failed replicates.
using Pipeline = std::function<Eigen::VectorXd(const Cohort&)>;
BootstrapResult bootstrap_pipeline(const Cohort& cohort, const Pipeline& pipeline,
                                   const BootstrapSpec& spec);

/// Resampled row indices of replicate b.
std::vector<Index> bootstrap_rows(Index n, std::uint64_t seed, std::uint64_t replicate);

/// Runs body(i) for i in [0, count) on up to `threads` workers.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

}  // namespace iptwsurv
