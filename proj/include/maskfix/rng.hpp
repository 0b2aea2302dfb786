#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace maskfix {

// splitmix64 finalizer. Good enough to turn (seed, stream id...) tuples into
// uncorrelated engine seeds.
std::uint64_t mix64(std::uint64_t x);

// Deterministic random source. All transforms are hand-rolled on top of the
// raw mt19937_64 output stream because the std distribution adapters are
// implementation-defined and would break bit-exact reproducibility across
// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform double in [0, 1) with 53 random bits.
  double uniform();

  // Uniform integer in [0, n). n must be positive. Rejection sampling, so the
  // result is exactly uniform.
  std::uint64_t below(std::uint64_t n);

  int below_int(int n);

  // Standard normal via Box-Muller. The second variate of each pair is
  // cached, matching the draw-count accounting in tests.
  double normal();

  // Normal(0, stddev) conditioned on |z| <= cutoff * stddev, by rejection.
  double truncated_normal(double stddev, double cutoff = 2.0);

  // In-place Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Independent stream keyed by up to three ids. Used everywhere a step or an
// example needs its own reproducible randomness regardless of evaluation
// order: stream a = purpose tag, b/c = step or example indices.
Rng derive_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
               std::uint64_t c = 0);

// Purpose tags for derive_rng. Fixed forever: changing one silently changes
// every downstream random stream.
namespace stream {
inline constexpr std::uint64_t kOrderShuffle = 1;
inline constexpr std::uint64_t kCorruption = 2;
inline constexpr std::uint64_t kExample = 3;
inline constexpr std::uint64_t kDropout = 4;
inline constexpr std::uint64_t kBatch = 5;
inline constexpr std::uint64_t kInit = 6;
inline constexpr std::uint64_t kSample = 7;
inline constexpr std::uint64_t kDraw = 8;
inline constexpr std::uint64_t kEval = 9;
}  // namespace stream

}  // namespace maskfix
