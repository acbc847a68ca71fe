#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace equidist {

using cplx = std::complex<double>;

// ---- error types ----------------------------------------------------------

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ZeroVector : Error {
  explicit ZeroVector(const std::string& m = "zero vector") : Error(m) {}
};
struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& m = "dimension mismatch") : Error(m) {}
};
struct PointAtInfinity : Error {
  explicit PointAtInfinity(const std::string& m = "point at infinity in this chart") : Error(m) {}
};
struct DegenerateImage : Error {
  explicit DegenerateImage(const std::string& m = "map image degenerate") : Error(m) {}
};
struct SolverFailure : Error {
  explicit SolverFailure(const std::string& m = "solver failed") : Error(m) {}
};
struct DegenerateFiber : Error {
  explicit DegenerateFiber(const std::string& m = "fiber equation degenerate") : Error(m) {}
};
struct EliminationDegenerate : Error {
  explicit EliminationDegenerate(const std::string& m = "resultant elimination degenerate") : Error(m) {}
};
struct TreeTooLarge : Error {
  explicit TreeTooLarge(const std::string& m = "backward tree exceeds node budget") : Error(m) {}
};
struct ExceptionalStart : Error {
  explicit ExceptionalStart(const std::string& m = "start point is exceptional") : Error(m) {}
};
struct AmbiguousCount : Error {
  explicit AmbiguousCount(const std::string& m = "local degree trials disagree") : Error(m) {}
};
struct NotC1 : Error {
  explicit NotC1(const std::string& m = "observable has no gradient bound") : Error(m) {}
};
struct GridOverflow : Error {
  explicit GridOverflow(const std::string& m = "grid resolution too large") : Error(m) {}
};
struct ScheduleUnderflow : Error {
  explicit ScheduleUnderflow(const std::string& m = "regularization schedule underflow") : Error(m) {}
};
struct ValidationError : Error {
  explicit ValidationError(const std::string& m) : Error(m) {}
};
struct ParseError : Error {
  explicit ParseError(const std::string& m) : Error(m) {}
};

// ---- deterministic RNG -----------------------------------------------------
//
// Counter-based stream derivation: every task seeds its own engine from
// (global_seed, stream, substream), so results do not depend on scheduling.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0, std::uint64_t substream = 0) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    s ^= stream * 0xD1342543DE82EF95ULL + 0x2545F4914F6CDD1DULL;
    std::uint64_t b = splitmix64(s);
    s ^= substream * 0x9E3779B97F4A7C15ULL + 1;
    std::uint64_t c = splitmix64(s);
    state_[0] = a;
    state_[1] = b ^ 0x8000000000000000ULL;
    state_[2] = c;
    state_[3] = splitmix64(s);
    for (int i = 0; i < 8; ++i) next();
  }

  std::uint64_t next() {
    // xoshiro256++
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // uniform in [0,1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t below(std::uint64_t n) { return next() % n; }

  double normal() {
    // Box-Muller; one value per call keeps streams simple.
    double u1 = uniform();
    double u2 = uniform();
    u1 = std::max(u1, 1e-300);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  cplx complex_normal() { return cplx(normal(), normal()); }

  cplx unit_phase() {
    double t = 6.283185307179586 * uniform();
    return cplx(std::cos(t), std::sin(t));
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t state_[4];
};

inline double log_plus(double x) { return x > 1.0 ? std::log(x) : 0.0; }

}  // namespace equidist
