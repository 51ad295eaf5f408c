#include "susy/rng.hpp"

#include <cmath>

namespace susy::rng {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Stream::Stream(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t st = seed ^ (0x9e3779b97f4a7c15ULL * (index + 1));
  s0_ = splitmix64(st);
  s1_ = splitmix64(st);
  if (s0_ == 0 && s1_ == 0) s1_ = 1;
}

std::uint64_t Stream::next_u64() {
  // xoroshiro128+
  std::uint64_t a = s0_, b = s1_;
  std::uint64_t r = a + b;
  b ^= a;
  s0_ = ((a << 55) | (a >> 9)) ^ b ^ (b << 14);
  s1_ = (b << 36) | (b >> 28);
  return r;
}

double Stream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Stream::uniform(double a, double b) { return a + (b - a) * uniform(); }

double Stream::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  while (u1 == 0.0) u1 = uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * M_PI * u2);
  have_spare_ = true;
  return r * std::cos(2.0 * M_PI * u2);
}

}  // namespace susy::rng
