#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace ica_lab {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Deterministic random stream.  Streams derived from the same root seed but
/// different labels/indices are independent for all practical purposes, and
/// every draw is reproducible byte-for-byte across runs and platforms (the
/// generator and the normal transform are both pinned here; nothing depends
/// on libstdc++'s distribution implementations).
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(detail::splitmix64(seed)) {}

  /// Substream of `root` identified by a label and an optional index.
  static RngStream substream(std::uint64_t root, std::string_view label,
                             std::uint64_t index = 0) {
    std::uint64_t h = detail::fnv1a(label);
    std::uint64_t mixed = detail::splitmix64(root ^ detail::splitmix64(h + index));
    return RngStream(mixed);
  }

  /// Uniform on (0, 1].
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * (1.0 - uniform()); }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) { return engine_() % n; }

  /// Standard normal via Box-Muller (spare value cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ica_lab
