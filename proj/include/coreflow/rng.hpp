#pragma once
// Deterministic, stream-splittable random number generation.
//
// Every stochastic routine in the library draws from an Rng constructed
// from a (seed, stream...) tuple via splitmix64 mixing, so results are
// independent of evaluation order and identical across platforms.  The
// standard library's distribution objects are implementation-defined, so
// uniform and normal variates are generated here from raw mt19937_64
// output (53-bit uniforms, Box-Muller normals).

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace coreflow {

/// splitmix64 finalizer: a cheap, well-mixed 64-bit hash used to derive
/// independent sub-stream seeds from (seed, stream indices).
std::uint64_t splitmix64(std::uint64_t x);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Derive a generator for a named sub-stream.  Mixing each index through
  /// splitmix64 keeps streams independent regardless of draw order.
  static Rng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                    std::uint64_t c = 0);

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller (no cached spare: one draw uses two
  /// uniforms, keeping the consumption pattern obvious and stream-stable).
  double normal();

  /// Vector of i.i.d. standard normals.
  Eigen::VectorXd normal_vector(int n);

  /// Index draw from a probability vector by CDF inversion.
  int categorical(const Eigen::VectorXd& probs);
  int categorical(const std::vector<double>& probs);

  /// Sample k distinct indices from [0, n) (partial Fisher-Yates).
  std::vector<int> sample_without_replacement(int n, int k);

 private:
  std::mt19937_64 engine_;
};

}  // namespace coreflow
