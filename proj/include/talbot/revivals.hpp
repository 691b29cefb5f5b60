#pragma once

// Rational-time quantization of the free evolution: at t = 2 pi p / q the
// free propagator is a combination of q translates with Gauss-sum weights.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "talbot/error.hpp"
#include "talbot/evolution.hpp"
#include "talbot/spectral_field.hpp"

namespace talbot {

/// t = 2 pi p / q with gcd(p, q) = 1 and q >= 1.
class RationalTime {
 public:
  RationalTime(long long p, long long q) {
    if (q == 0) throw PreconditionError("RationalTime: q must be nonzero");
    if (q < 0) {
      p = -p;
      q = -q;
    }
    const long long g = std::gcd(p, q);
    p_ = p / g;
    q_ = q / g;
  }

  /// t = pi a / b, reduced to 2 pi a / (2b).
  static RationalTime pi_fraction(long long a, long long b) { return RationalTime(a, 2 * b); }

  long long p() const { return p_; }
  long long q() const { return q_; }
  double value() const { return kTwoPi * static_cast<double>(p_) / static_cast<double>(q_); }

  friend bool operator==(const RationalTime&, const RationalTime&) = default;

 private:
  long long p_ = 0;
  long long q_ = 1;
};

namespace detail {
inline long long mod(long long a, long long q) { return ((a % q) + q) % q; }
}  // namespace detail

/// G(p, m, q) = sum_{l=0}^{q-1} exp(-2 pi i (p l^2 + m l) / q), phases reduced
/// exactly in integers mod q.
inline Complex gauss_sum(long long p, long long q, long long m) {
  if (q < 1) throw PreconditionError("gauss_sum: q must be positive");
  if (std::gcd(p, q) != 1) throw PreconditionError("gauss_sum: p and q must be coprime");
  Complex acc{};
  for (long long l = 0; l < q; ++l) {
    const long long r = detail::mod(detail::mod(p * detail::mod(l * l, q), q) + detail::mod(m * l, q), q);
    acc += std::polar(1.0, -kTwoPi * static_cast<double>(r) / static_cast<double>(q));
  }
  return acc;
}

inline std::vector<Complex> gauss_coefficients(const RationalTime& rt) {
  std::vector<Complex> g(static_cast<std::size_t>(rt.q()));
  for (long long m = 0; m < rt.q(); ++m) g[static_cast<std::size_t>(m)] = gauss_sum(rt.p(), rt.q(), m);
  return g;
}

/// (1/q) sum_m G(p, m, q) f(x - 2 pi m / q), built in coefficient space.
inline SpectralField rational_time_evolve(const SpectralField& f, const RationalTime& rt) {
  const auto G = gauss_coefficients(rt);
  const long long q = rt.q();
  // Mode k of the combination depends only on k mod q.
  std::vector<Complex> multiplier(static_cast<std::size_t>(q));
  for (long long r = 0; r < q; ++r) {
    Complex acc{};
    for (long long m = 0; m < q; ++m)
      acc += G[static_cast<std::size_t>(m)] *
             std::polar(1.0, -kTwoPi * static_cast<double>(detail::mod(r * m, q)) / static_cast<double>(q));
    multiplier[static_cast<std::size_t>(r)] = acc / static_cast<double>(q);
  }
  SpectralField out(f.truncation());
  for (int k = -f.truncation(); k <= f.truncation(); ++k)
    out.set(k, f[k] * multiplier[static_cast<std::size_t>(detail::mod(k, q))]);
  return out;
}

/// ||free_evolve(f, t) - rational_time_evolve(f, rt)||_{L^2} / ||f||_{L^2}
inline double revival_error(const SpectralField& f, double t, const RationalTime& rt) {
  const double norm = l2_norm(f);
  if (norm == 0.0) return 0.0;
  return l2_norm(free_evolve(f, t) - rational_time_evolve(f, rt)) / norm;
}

}  // namespace talbot
