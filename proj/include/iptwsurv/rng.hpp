#pragma once

#include <boost/random/mersenne_twister.hpp>

#include <cstdint>

namespace iptwsurv {

using Engine = boost::random::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Independent stream seed for (master, stream, index): the same triple always yields
/// the same seed, whatever order work units run in.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index);
}

/// Uniform on the open interval (0, 1) from the top 53 bits.
inline double uniform_open(Engine& engine) {
  return (static_cast<double>(engine() >> 11) + 0.5) * 0x1.0p-53;
}

/// Uniform integer in [0, n) by the multiply-shift map.
inline std::uint64_t uniform_index(Engine& engine, std::uint64_t n) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(engine()) * n) >> 64);
}

// Stream tags for derive_seed.
enum Stream : std::uint64_t {
  stream_covariates = 1,
  stream_treatment = 2,
  stream_survival = 3,
  stream_censoring = 4,
  stream_bootstrap = 5,
  stream_replicate = 6,
};

}  // namespace iptwsurv
