#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace sbd {

using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Raised when an algorithm leaves its numeric domain (overflow, divergence,
/// responsibility underflow). The message carries location context.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on malformed container files (bad magic, version, truncation).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Independent RNG stream for a (seed, stream-id) pair. Streams derived from
/// the same seed but different ids are decorrelated, so parallel chains can
/// each own one and produce identical output regardless of execution order.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  const std::uint64_t s = splitmix64(splitmix64(seed) ^ splitmix64(0xD1B54A32D192ED03ULL * (stream + 1)));
  return Rng(s);
}

inline Vec gaussian_vec(int n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

// Complex vectors travel through the real-valued diffusion machinery in a
// stacked block layout: [Re(z_0..z_{n-1}); Im(z_0..z_{n-1})].
inline Vec stack_complex(const CVec& z) {
  const Eigen::Index n = z.size();
  Vec v(2 * n);
  v.head(n) = z.real();
  v.tail(n) = z.imag();
  return v;
}

inline CVec unstack_complex(const Vec& v) {
  if (v.size() % 2 != 0) throw std::domain_error("unstack_complex: odd length");
  const Eigen::Index n = v.size() / 2;
  CVec z(n);
  z.real() = v.head(n);
  z.imag() = v.tail(n);
  return z;
}

inline void require_finite(const Vec& v, const std::string& what) {
  if (!v.allFinite()) throw NumericError(what + ": non-finite values");
}

}  // namespace sbd
