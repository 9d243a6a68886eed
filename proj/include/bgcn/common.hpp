#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>

namespace bgcn {

// All dense numeric state is 64-bit float, row-major so that per-node rows are
// contiguous for the sparse-adjacency products.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input files, missing paths, checksum mismatches.
class IoError : public Error {
 public:
  using Error::Error;
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Labels for independent RNG streams. Every stochastic component draws from a
// stream derived from (master seed, label, indices...), never from a shared
// global generator, so results are independent of evaluation order and thread
// count.
enum class Stream : std::uint64_t {
  kInit = 1,      // weight initialization
  kDropout = 2,   // dropout masks during training
  kVi = 3,        // variational weight noise during training
  kXi = 4,        // copy-vector sampling, per (outer iteration, node)
  kGraph = 5,     // keep/copy coin flips when realizing a sampled graph
  kPredict = 6,   // dropout + weight noise during Monte-Carlo prediction
  kSplit = 7,     // train/val/test split shuffling
};

inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = master;
  splitmix64(h);
  for (std::uint64_t v : path) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    splitmix64(h);
  }
  std::uint64_t s = h;
  return splitmix64(s);
}

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                 std::initializer_list<std::uint64_t> path = {}) {
  std::uint64_t h = derive_seed(master, {static_cast<std::uint64_t>(stream)});
  for (std::uint64_t v : path) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    splitmix64(h);
  }
  std::uint64_t s = h;
  return splitmix64(s);
}

// Deterministic random stream with explicitly specified draw algorithms.
// std::uniform_real_distribution and friends are not pinned across standard
// library implementations, so the conversions are spelled out here; two runs
// with the same seed produce bit-identical sequences on any platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; draws exactly two uniforms per call and
  // caches nothing, so interleaving with other draw types stays reproducible.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log1p(-u1));
    return r * std::cos(2.0 * M_PI * u2);
  }

  // Uniform integer on [0, bound); bound must be >= 1. Rejection sampling, no
  // modulo bias.
  std::int64_t uniform_int(std::int64_t bound) {
    if (bound < 1) throw Error("uniform_int: bound must be positive");
    const auto b = static_cast<std::uint64_t>(bound);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % b;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return static_cast<std::int64_t>(x % b);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace bgcn
