#pragma once
// Counter-based deterministic RNG: stream (seed, index) is reproducible
// independent of threading, so Monte Carlo sums can be merged associatively.

#include <cstdint>

namespace susy::rng {

std::uint64_t splitmix64(std::uint64_t& state);

class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t index);

  std::uint64_t next_u64();
  double uniform();              // [0, 1)
  double uniform(double a, double b);
  double normal();               // Box-Muller, one value per call

 private:
  std::uint64_t s0_, s1_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace susy::rng
