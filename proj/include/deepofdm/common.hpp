#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace deepofdm {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;

inline constexpr double kPi = 3.14159265358979323846;
// Speed of light used for Doppler arithmetic (m/s).
inline constexpr double kSpeedOfLight = 3.0e8;

// Error categories. The CLI maps each category to its own exit code.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FramingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EstimatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// splitmix64 finalizer; used to derive independent seed streams.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for a worker item, independent of how items are scheduled.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
  std::uint64_t s = mix64(master);
  s = mix64(s ^ mix64(a + 0x1234567ULL));
  s = mix64(s ^ mix64(b + 0x89ABCDEULL));
  s = mix64(s ^ mix64(c + 0xF00DULL));
  return s;
}

using Rng = std::mt19937_64;

// Distribution helpers with fixed, implementation-independent arithmetic so
// that results do not depend on the standard library's distribution classes.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

inline double gaussian(Rng& rng) {
  // Box-Muller, one value per call.
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

/// Circularly symmetric complex Gaussian with E|z|^2 = var.
inline cplx complex_gaussian(Rng& rng, double var) {
  const double s = std::sqrt(var / 2.0);
  const double re = gaussian(rng);
  const double im = gaussian(rng);
  return {s * re, s * im};
}

inline int random_bit(Rng& rng) { return static_cast<int>(rng() >> 63); }

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

/// Keeps large activation buffers on the heap instead of returning them to the
/// kernel after every training step. Call once from main.
void tune_allocator();

}  // namespace deepofdm
