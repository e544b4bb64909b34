#pragma once

// Counter-derived random substreams. A stream is identified by the master
// seed, a purpose label ("instances", "perturb", "ksos/sample", ...) and a
// tuple of integer counters; it never depends on which thread consumes it.

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <string_view>

#include "perturbopt/common.hpp"

namespace perturbopt {

/// SplitMix64 as a standard uniform random bit generator. Cheap to seed, so
/// one engine per (instance, sample) pair is affordable.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

std::uint64_t mix64(std::uint64_t x);

std::uint64_t label_hash(std::string_view label);

std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                          std::initializer_list<std::uint64_t> counters = {});

/// A labeled substream with the draws the library needs.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}
  Stream(std::uint64_t master, std::string_view label,
         std::initializer_list<std::uint64_t> counters = {})
      : engine_(derive_seed(master, label, counters)) {}

  double uniform() { return unit_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit_(engine_); }
  double gaussian() { return normal_(engine_); }
  std::uint64_t bits() { return engine_(); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  /// Uniform point in the unit Euclidean ball of dimension d.
  Vector unit_ball(int d);
  /// Uniform point on the unit sphere of dimension d.
  Vector unit_sphere(int d);

  SplitMix64& engine() { return engine_; }

 private:
  SplitMix64 engine_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace perturbopt
