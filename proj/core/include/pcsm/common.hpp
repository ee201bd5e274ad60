#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pcsm {

// Error taxonomy. The CLI maps these onto exit codes (structural -> 2,
// format/parse -> 3, numeric -> 4).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape mismatches, bad indices, invalid configuration values.
struct StructuralError : Error {
  using Error::Error;
};

// Non-finite inputs or diverging computations.
struct NumericError : Error {
  using Error::Error;
};

// API calls out of order (e.g. backward before evaluate).
struct StateError : Error {
  using Error::Error;
};

// Bad file headers, version or shape mismatches in serialized artifacts.
struct FormatError : Error {
  using Error::Error;
};

// Malformed text input; message carries the offending line number.
struct ParseError : FormatError {
  using FormatError::FormatError;
};

// Deterministic random source. All draws are fully specified arithmetic on
// top of the standardised mt19937_64 stream, so identical seeds give
// identical sequences on every platform (std::uniform_*_distribution and
// std::shuffle are implementation-defined and must not be used here).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller; the spare value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double two_pi = 6.283185307179586476925286766559;
    spare_ = mag * std::sin(two_pi * u2);
    has_spare_ = true;
    return mag * std::cos(two_pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Uniform index in [0, n). The modulo bias of ~n/2^64 is irrelevant here.
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(gen_() % n);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_index(i)]);
    }
  }

  // splitmix64 mixing for deriving independent substreams from a base seed.
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL + b * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix(mix(a, b), c);
  }

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                           std::uint64_t d) {
    return mix(mix(a, b, c), d);
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Shortest decimal representation that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Writes `content` to `path` atomically: temp file in the same directory,
// then rename. On any failure the destination is left untouched.
void atomic_write_file(const std::filesystem::path& path,
                       std::string_view content);

}  // namespace pcsm
