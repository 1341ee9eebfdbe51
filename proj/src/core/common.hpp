#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rp {

enum class ErrorCode {
  invalid_argument,
  io,
  parse,
  ranker,
  not_found,
  internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Failure reported by (or while talking to) a ranker. Keeps whatever the
/// ranker actually sent so callers can log it.
class RankerError : public Error {
 public:
  RankerError(const std::string& what, std::string raw_reply = {}, std::string doc_id = {})
      : Error(ErrorCode::ranker, what), raw_reply_(std::move(raw_reply)), doc_id_(std::move(doc_id)) {}

  const std::string& raw_reply() const noexcept { return raw_reply_; }
  const std::string& doc_id() const noexcept { return doc_id_; }

 private:
  std::string raw_reply_;
  std::string doc_id_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Child seed for a named sub-task. Stable across platforms and runs.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view label) {
  return splitmix64(base ^ fnv1a64(label));
}

/// Seeded generator with portable distributions. std::mt19937_64 output is
/// fixed by the standard; the std:: distributions are not, so the bounded
/// draws are done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  /// Uniform real in [0, 1).
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  /// Standard normal via Box-Muller (used by the fixture generator only).
  double normal() {
    double u1 = unit();
    while (u1 <= 0.0) u1 = unit();
    const double u2 = unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rp
