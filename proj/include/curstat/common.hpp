#pragma once

// Shared plumbing: argument checks, deterministic RNG, seed derivation and
// locale-free number formatting.  Everything downstream assumes bit-for-bit
// reproducibility given a seed, so uniforms are generated from the raw
// mt19937_64 stream instead of std::uniform_real_distribution (whose output
// is implementation-defined).

#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <system_error>

namespace curstat {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Fixed 64-bit mixer (splitmix64 increment/finalizer).
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Stable per-(n, rep) stream seeds derived from one master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0) {
  return mix64(mix64(master ^ 0x243f6a8885a308d3ull) + mix64(a) + 3 * mix64(b));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // uniform on [0, 1) with 53 random bits; platform independent
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // integer in [0, m)
  std::uint64_t below(std::uint64_t m) { return gen_() % m; }

 private:
  std::mt19937_64 gen_;
};

// Shortest round-trip decimal text for a double (to_chars is locale-free).
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  if (s == "inf") return kInf;
  if (s == "-inf") return -kInf;
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc() && res.ptr == s.data() + s.size(),
          "not a number: '" + s + "'");
  return v;
}

}  // namespace curstat
