#include "maskfix/rng.hpp"

#include <cmath>

namespace maskfix {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double Rng::uniform() {
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
  // Reject the tail of the 64-bit range that does not divide evenly into n.
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = gen_();
  } while (x >= limit);
  return x % n;
}

int Rng::below_int(int n) {
  return static_cast<int>(below(static_cast<std::uint64_t>(n)));
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1, u2;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  u2 = uniform();
  double radius = std::sqrt(-2.0 * std::log(u1));
  double angle = 2.0 * M_PI * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

double Rng::truncated_normal(double stddev, double cutoff) {
  double z;
  do {
    z = normal();
  } while (std::abs(z) > cutoff);
  return z * stddev;
}

Rng derive_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
               std::uint64_t c) {
  std::uint64_t s = mix64(seed);
  s = mix64(s ^ mix64(a + 0x1000000001ULL));
  s = mix64(s ^ mix64(b + 0x2000000002ULL));
  s = mix64(s ^ mix64(c + 0x3000000003ULL));
  return Rng(s);
}

}  // namespace maskfix
