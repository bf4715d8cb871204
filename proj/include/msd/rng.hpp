#pragma once

#include <cstdint>
#include <random>

namespace msd {

// Finalizer from splitmix64; bijective, good avalanche.
std::uint64_t mix64(std::uint64_t z) noexcept;

// Hashes (master, a, b, c) into a substream seed. Trials, collection draws and
// calibration runs each get their own coordinates so streams never collide.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                          std::uint64_t b = 0, std::uint64_t c = 0) noexcept;

// Stream purpose tags used as the first coordinate of derive_seed.
enum StreamPurpose : std::uint64_t {
  kStreamCollection = 1,
  kStreamTrial = 2,
  kStreamCalibration = 3,
  kStreamInstance = 4,
};

// mt19937_64 with self-contained uniform/gaussian draws. The distributions are
// implemented here (not via <random> adaptors) so identical seeds give
// bit-identical sequences on every standard library.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform01();

  // Standard normal via Box-Muller; the paired draw is cached.
  double gaussian();

  // Uniform integer on [0, bound); rejection sampling, no modulo bias.
  std::uint64_t uniform_below(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace msd
