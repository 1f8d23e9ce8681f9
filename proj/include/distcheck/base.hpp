#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace distcheck {

/// All internal time is integer nanoseconds (virtual in deterministic mode,
/// monotonic-clock-relative in concurrent mode). Seconds appear only at the
/// configuration and reporting edges.
using Nanos = std::int64_t;

inline constexpr Nanos kNanosPerSecond = 1'000'000'000;

inline Nanos secs_to_nanos(double secs) {
  return static_cast<Nanos>(std::llround(secs * 1e9));
}

inline double nanos_to_secs(Nanos ns) {
  return static_cast<double>(ns) / 1e9;
}

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed canonical text given to decode().
struct DecodeError : Error {
  DecodeError(std::size_t at, const std::string& msg)
      : Error("decode error at " + std::to_string(at) + ": " + msg), pos(at) {}
  std::size_t pos;
};

/// Invalid pattern construction (e.g. repeated fresh variable).
struct PatternError : Error {
  using Error::Error;
};

/// Ill-formed property (unbound variable, type-confused comparison).
/// Distinct from a fail verdict.
struct FormulaError : Error {
  using Error::Error;
};

/// Scenario/flag validation failure; collects every problem found.
struct ConfigError : Error {
  explicit ConfigError(std::vector<std::string> problems_)
      : Error(join(problems_)), problems(std::move(problems_)) {}
  std::vector<std::string> problems;

 private:
  static std::string join(const std::vector<std::string>& ps) {
    std::string out = "invalid configuration:";
    for (const auto& p : ps) out += "\n  - " + p;
    return out;
  }
};

/// Small deterministic RNG. One instance per independent stream (scheduler,
/// fault layer, channel shuffling) so streams never perturb each other.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1).
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n <= 1 ? 0 : next() % n; }

  static std::uint64_t mix(std::uint64_t x) {
    SplitMix64 g(x);
    return g.next();
  }

 private:
  std::uint64_t state_;
};

}  // namespace distcheck
