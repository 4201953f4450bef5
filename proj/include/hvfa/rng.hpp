#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace hvfa {

// Seeded random stream. The engine is std::mt19937_64, whose output sequence
// is fixed by the C++ standard; real-valued draws are built from the top 53
// bits of each word instead of std::uniform_real_distribution, whose
// algorithm is implementation-defined. Same seed => same draws everywhere.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64/53bit";

  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform in the open interval (0, 1).
  double uniform_open01() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform in the open interval (lo, hi); returns lo when lo == hi.
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform_open01();
  }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    const auto k = static_cast<std::uint64_t>(uniform01() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace hvfa
