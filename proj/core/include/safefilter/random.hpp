#pragma once

#include <cstdint>
#include <random>

namespace safefilter {

/// Seeded random stream. Identical (seed, stream) pairs yield identical draw
/// sequences; distinct stream ids give independently seeded engines, so batch
/// work can be partitioned across streams without coupling the results.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  /// Independent stream derived from the same root seed.
  RandomSource fork(std::uint64_t stream) const { return RandomSource(seed_, stream); }

  double uniform01();                    // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double normal();                       // standard normal
  std::uint64_t uniform_index(std::uint64_t n);  // {0, ..., n-1}

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

}  // namespace safefilter
