#include "fedlab/rng.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

namespace fedlab {
namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

// 64-bit finalizer from SplitMix64 (Stafford variant 13).
std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ull;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebull;
  z ^= z >> 31;
  return z;
}

// Order-sensitive key combiner: feeding (a, b) and (b, a) land on different
// keys, as do different chain lengths.
std::uint64_t combine(std::uint64_t h, std::uint64_t v) {
  return mix64(h + kGolden + v);
}

}  // namespace

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double RngStream::open01() {
  // 53 significant bits, then centered half a ulp away from both endpoints.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  const double u1 = open01();
  const double u2 = open01();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

double RngStream::gamma(double shape) {
  if (!(shape > 0.0)) {
    throw std::invalid_argument("gamma shape must be positive");
  }
  if (shape < 1.0) {
    // Boost to shape+1 and scale back by U^(1/shape).
    const double g = gamma(shape + 1.0);
    const double u = open01();
    return g * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = open01();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double RngStream::student_t(double nu) {
  if (!(nu > 0.0)) {
    throw std::invalid_argument("student_t degrees of freedom must be positive");
  }
  const double z = normal();
  const double chi_sq = 2.0 * gamma(0.5 * nu);
  return z / std::sqrt(chi_sq / nu);
}

double RngStream::cauchy(double x0, double gamma_scale) {
  if (!(gamma_scale > 0.0)) {
    throw std::invalid_argument("cauchy scale must be positive");
  }
  const double u = open01();
  return x0 + gamma_scale * std::tan(std::numbers::pi * (u - 0.5));
}

std::uint64_t RngStream::uniform_below(std::uint64_t m) {
  if (m == 0) {
    throw std::invalid_argument("uniform_below needs a positive bound");
  }
  // Rejection above the largest multiple of m removes modulo bias.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % m);
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r < limit) return r % m;
  }
}

RngStream RngStream::fork(std::uint64_t tag) const {
  return RngStream(combine(combine(key_, 0x5c5c5c5c5c5c5c5cull), tag));
}

RngStream derive_stream(std::uint64_t global_seed, std::uint64_t round,
                        std::uint64_t client) {
  std::uint64_t h = mix64(global_seed + kGolden);
  h = combine(h, round);
  h = combine(h, client);
  return RngStream(h);
}

NoiseSpec NoiseSpec::gaussian(double sigma) { return {Kind::gaussian, sigma, 0.0}; }
NoiseSpec NoiseSpec::studentT(double nu) { return {Kind::student_t, nu, 0.0}; }
NoiseSpec NoiseSpec::cauchyAt(double x0, double gamma_scale) {
  return {Kind::cauchy, x0, gamma_scale};
}

double sample_noise(const NoiseSpec& spec, RngStream& stream) {
  switch (spec.kind) {
    case NoiseSpec::Kind::gaussian:
      if (spec.a < 0.0) {
        throw std::invalid_argument("gaussian sigma must be non-negative");
      }
      if (spec.a == 0.0) return 0.0;  // exact, no draw consumed
      return spec.a * stream.normal();
    case NoiseSpec::Kind::student_t:
      return stream.student_t(spec.a);
    case NoiseSpec::Kind::cauchy:
      return stream.cauchy(spec.a, spec.b);
  }
  throw std::invalid_argument("unknown noise kind");
}

std::string to_string(const NoiseSpec& spec) {
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  switch (spec.kind) {
    case NoiseSpec::Kind::gaussian: return "gaussian:" + num(spec.a);
    case NoiseSpec::Kind::student_t: return "student_t:" + num(spec.a);
    case NoiseSpec::Kind::cauchy: return "cauchy:" + num(spec.a) + ":" + num(spec.b);
  }
  return "?";
}

}  // namespace fedlab
