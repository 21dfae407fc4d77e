#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "unravel/common.hpp"

namespace unravel {

// Counter-based generator: output i of a stream is mix64(key + i*GOLDEN),
// where mix64 is the splitmix64 finalizer and the key is derived from
// (master_seed, stream_id). Any draw is a pure function of
// (master_seed, stream_id, counter), so trajectory streams are independent
// and reproducible regardless of scheduling.
class Rng {
 public:
  Rng(std::uint64_t master_seed, std::uint64_t stream_id)
      : key_(mix64(mix64(master_seed + kGolden) ^
                   mix64(stream_id * 0xD6E8FEB86659FD93ULL + kGolden))) {}

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGolden); }

  // Uniform in [0, 1) with 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; draws two uniforms per pair.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // (0,1] for the log argument.
    double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double t = 2.0 * kPi * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

  static std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Stream-id conventions used by the trajectory drivers: within a trajectory,
// step (layer) t draws circuit randomness from stream 2t and outcome
// randomness from stream 2t+1, both keyed by the trajectory seed.
inline std::uint64_t circuit_stream(std::uint64_t step) { return 2 * step; }
inline std::uint64_t outcome_stream(std::uint64_t step) {
  return 2 * step + 1;
}

// One 64-bit seed per trajectory, derived so that trajectory sets are
// reproducible and independent of execution order.
inline std::uint64_t trajectory_seed(std::uint64_t master_seed,
                                     std::uint64_t index) {
  return Rng(master_seed, index).next_u64();
}

// Shared categorical draw: given non-negative weights and one uniform
// variate, pick the first index whose cumulative weight exceeds u * total.
// Both simulation engines route outcome selection through this function so
// that matched seeds yield matched outcome sequences.
inline int pick_categorical(const std::vector<double>& w, double u) {
  double total = 0.0;
  for (double x : w) total += x;
  const double target = u * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    if (target < acc) return static_cast<int>(i);
  }
  return static_cast<int>(w.size()) - 1;
}

}  // namespace unravel
