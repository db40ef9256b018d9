#include "iptwsurv/bootstrap.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "iptwsurv/rng.hpp"

namespace iptwsurv {
namespace {
constexpr double nan = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t max_messages = 10;
}  // namespace

void BootstrapSpec::validate() const {
  if (iterations < 2) throw ConfigError("bootstrap: iterations must be at least 2");
  if (!(ci_level > 0.0 && ci_level < 1.0)) throw ConfigError("bootstrap: ci_level outside (0, 1)");
  if (threads < 1) throw ConfigError("bootstrap: threads must be positive");
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, count); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<Index> bootstrap_rows(Index n, std::uint64_t seed, std::uint64_t replicate) {
  Engine engine(derive_seed(seed, stream_bootstrap, replicate));
  std::vector<Index> rows(static_cast<std::size_t>(n));
  for (auto& r : rows) r = static_cast<Index>(uniform_index(engine, static_cast<std::uint64_t>(n)));
  return rows;
}

ConfidenceInterval percentile_interval(std::vector<double> values, double ci_level) {
  std::erase_if(values, [](double v) { return std::isnan(v); });
  if (values.empty()) return {nan, nan};
  std::sort(values.begin(), values.end());
  const double m = static_cast<double>(values.size());
  const auto order_stat = [&](double q) {
    // The ceil(q m)-th smallest, 1-based; the small offset absorbs q m rounding.
    const double k = std::clamp(std::ceil(q * m - 1e-9), 1.0, m);
    return values[static_cast<std::size_t>(k) - 1];
  };
  const double tail = 0.5 * (1.0 - ci_level);
  return {order_stat(tail), order_stat(1.0 - tail)};
}

BootstrapResult summarize_replicates(Eigen::MatrixXd replicates, std::vector<bool> failed,
                                     std::vector<std::string> messages, double ci_level) {
  BootstrapResult r;
  const Index K = replicates.cols();
  r.se = Eigen::VectorXd::Constant(K, nan);
  r.n_defined.assign(static_cast<std::size_t>(K), 0);
  r.n_undefined.assign(static_cast<std::size_t>(K), 0);
  for (bool f : failed) r.n_failed += f;
  for (Index k = 0; k < K; ++k) {
    std::vector<double> column;
    for (Index b = 0; b < replicates.rows(); ++b) {
      const double v = replicates(b, k);
      if (!std::isnan(v)) {
        column.push_back(v);
      } else if (!failed[static_cast<std::size_t>(b)]) {
        ++r.n_undefined[static_cast<std::size_t>(k)];
      }
    }
    const auto m = column.size();
    r.n_defined[static_cast<std::size_t>(k)] = static_cast<int>(m);
    if (m >= 2) {
      // Shifted by the first value so a constant column gives exactly zero.
      const double shift = column.front();
      double mean = 0.0;
      for (double v : column) mean += v - shift;
      mean /= static_cast<double>(m);
      double ss = 0.0;
      for (double v : column) ss += (v - shift - mean) * (v - shift - mean);
      r.se[k] = std::sqrt(ss / static_cast<double>(m - 1));
    }
    r.ci.push_back(percentile_interval(std::move(column), ci_level));
  }
  r.replicates = std::move(replicates);
  r.failure_messages = std::move(messages);
  return r;
}

std::vector<BootstrapResult> bootstrap_blocks(const Cohort& cohort, const MultiPipeline& pipeline,
                                              std::size_t n_blocks, const BootstrapSpec& spec) {
  spec.validate();
  if (cohort.empty()) throw InvalidArgument("bootstrap: empty cohort");
  const auto B = static_cast<std::size_t>(spec.iterations);
  std::vector<std::vector<BlockResult>> out(B);
  parallel_for(B, spec.threads, [&](std::size_t b) {
    const auto rows = bootstrap_rows(cohort.size(), spec.seed, b);
    const Cohort resample = cohort.subset(rows);
    std::vector<BlockResult> blocks;
    try {
      blocks = pipeline(resample);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      // A failure shared by every block (e.g. the propensity fit on this resample).
      blocks.assign(n_blocks, BlockResult{Eigen::VectorXd(), true, e.what()});
    }
    if (blocks.size() != n_blocks) throw InvalidArgument("bootstrap: pipeline block count mismatch");
    out[b] = std::move(blocks);
  });

  std::vector<BootstrapResult> results;
  for (std::size_t j = 0; j < n_blocks; ++j) {
    Index K = 0;
    for (std::size_t b = 0; b < B && K == 0; ++b) {
      if (!out[b][j].failed) K = out[b][j].values.size();
    }
    Eigen::MatrixXd reps = Eigen::MatrixXd::Constant(static_cast<Index>(B), K, nan);
    std::vector<bool> failed(B, false);
    std::vector<std::string> messages;
    for (std::size_t b = 0; b < B; ++b) {
      const auto& block = out[b][j];
      if (block.failed) {
        failed[b] = true;
        if (messages.size() < max_messages) messages.push_back(block.error);
        continue;
      }
      if (block.values.size() != K) throw InvalidArgument("bootstrap: estimand count changed");
      reps.row(static_cast<Index>(b)) = block.values.transpose();
    }
    auto summary = summarize_replicates(std::move(reps), std::move(failed), std::move(messages),
                                        spec.ci_level);
    summary.degenerate =
        static_cast<double>(summary.n_failed) > spec.max_failure_fraction * static_cast<double>(B);
    if (summary.degenerate && spec.strict) {
      throw BootstrapDegeneracy("bootstrap: " + std::to_string(summary.n_failed) + " of " +
                                std::to_string(B) + " replicates failed" +
                                (summary.failure_messages.empty()
                                     ? std::string()
                                     : "; first error: " + summary.failure_messages.front()));
    }
    results.push_back(std::move(summary));
  }
  return results;
}

BootstrapResult bootstrap_pipeline(const Cohort& cohort, const Pipeline& pipeline,
                                   const BootstrapSpec& spec) {
  const MultiPipeline wrapped = [&](const Cohort& c) {
    std::vector<BlockResult> blocks(1);
    try {
      blocks[0].values = pipeline(c);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      blocks[0] = BlockResult{Eigen::VectorXd(), true, e.what()};
    }
    return blocks;
  };
  return std::move(bootstrap_blocks(cohort, wrapped, 1, spec).front());
}

}  // namespace iptwsurv
