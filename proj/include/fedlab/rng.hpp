#pragma once

#include <cstdint>
#include <string>

namespace fedlab {

// Counter-based pseudo-random stream.  A stream is a pure function of its
// 64-bit key and an internal draw counter: the i-th output is
// mix64(key + (i+1)*GAMMA), the SplitMix64 construction.  Streams are plain
// values — copying one yields an independent replay, and two streams with
// different keys never share state, so per-(round, client) streams can be
// consumed in any order (or concurrently) without affecting each other.
class RngStream {
 public:
  RngStream() = default;
  explicit RngStream(std::uint64_t key) : key_(key) {}

  // Raw 64-bit draw; advances the counter by one.
  std::uint64_t next_u64();

  // Uniform on the open interval (0, 1).  Both endpoints are excluded so the
  // value is always safe under log() and tan() transforms.
  double open01();

  // Standard normal via Box-Muller.  Consumes exactly two raw draws per call
  // and never caches the spare, keeping the draw count predictable.
  double normal();

  // Gamma(shape, 1) via the Marsaglia-Tsang squeeze method.  Consumes a
  // variable number of raw draws (rejection), deterministically per stream.
  double gamma(double shape);

  // Student-t with nu > 0 degrees of freedom: Z / sqrt(V/nu), V ~ chi^2(nu).
  double student_t(double nu);

  // Cauchy with location x0 and scale gamma > 0.
  double cauchy(double x0, double gamma_scale);

  // Unbiased uniform integer in [0, m), m >= 1, by rejection.
  std::uint64_t uniform_below(std::uint64_t m);

  // Derives an independent child stream; distinct tags give distinct keys.
  RngStream fork(std::uint64_t tag) const;

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

// Derives the canonical stream for (global_seed, round, client).  The mapping
// is a fixed integer hash chain, identical on every platform and build.
RngStream derive_stream(std::uint64_t global_seed, std::uint64_t round,
                        std::uint64_t client);

// Per-client gradient-noise distribution.
struct NoiseSpec {
  enum class Kind { gaussian, student_t, cauchy };
  Kind kind = Kind::gaussian;
  // gaussian: a = sigma (>= 0).  student_t: a = nu (> 0).
  // cauchy: a = location x0, b = scale gamma (> 0).
  double a = 0.0;
  double b = 0.0;

  static NoiseSpec gaussian(double sigma);
  static NoiseSpec studentT(double nu);
  static NoiseSpec cauchyAt(double x0, double gamma_scale);
};

// Draws one noise value.  Validates the spec parameters and throws
// std::invalid_argument on a malformed spec (negative sigma, nu <= 0, ...).
double sample_noise(const NoiseSpec& spec, RngStream& stream);

// Human-readable form, e.g. "gaussian:0.1", "student_t:1.5", "cauchy:0:1".
std::string to_string(const NoiseSpec& spec);

}  // namespace fedlab
