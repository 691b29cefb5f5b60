#pragma once

// Gauss-Legendre rules and exact integration of exp(i theta u) against
// Legendre expansions on [-1, 1]:
//
//   int_{-1}^{1} exp(i theta u) P_n(u) du = 2 i^n j_n(theta)
//
// with j_n the spherical Bessel function. Smooth integrands are expanded in
// Legendre polynomials from their values at the Gauss nodes; the oscillatory
// factor is then integrated exactly, so the cost does not grow with theta.

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "talbot/error.hpp"

namespace talbot {

using Complex = std::complex<double>;

/// P_0..P_degree evaluated at x.
inline std::vector<double> legendre_values(int degree, double x) {
  std::vector<double> p(static_cast<std::size_t>(degree) + 1);
  p[0] = 1.0;
  if (degree >= 1) p[1] = x;
  for (int n = 1; n < degree; ++n)
    p[n + 1] = ((2.0 * n + 1.0) * x * p[n] - n * p[n - 1]) / (n + 1.0);
  return p;
}

struct GaussLegendre {
  std::vector<double> nodes;    // ascending, in (-1, 1)
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

inline GaussLegendre gauss_legendre(int n) {
  if (n < 1) throw PreconditionError("gauss_legendre: need at least one node");
  GaussLegendre rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 1; k < n; ++k) {
        const double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 1; k < n; ++k) {
      const double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
    rule.nodes[static_cast<std::size_t>(i)] = -x;
    rule.weights[static_cast<std::size_t>(n - 1 - i)] = w;
    rule.weights[static_cast<std::size_t>(i)] = w;
  }
  if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  return rule;
}

/// j_0(x)..j_nmax(x) for x >= 0.
inline std::vector<double> spherical_bessel(int nmax, double x) {
  std::vector<double> j(static_cast<std::size_t>(nmax) + 1, 0.0);
  if (x < 0.0) throw PreconditionError("spherical_bessel: negative argument");
  if (x <= 1.0) {
    // Power series; converges fast and is free of cancellation for x <= 1.
    double lead = 1.0;  // x^n / (2n+1)!!
    for (int n = 0; n <= nmax; ++n) {
      if (n > 0) lead *= x / (2.0 * n + 1.0);
      double term = lead, sum = lead;
      for (int m = 1; m < 40; ++m) {
        term *= -0.5 * x * x / (m * (2.0 * n + 2.0 * m + 1.0));
        sum += term;
        if (std::abs(term) < 1e-18 * std::abs(sum)) break;
      }
      j[n] = sum;
      if (lead == 0.0) break;
    }
    return j;
  }
  const double s = std::sin(x), c = std::cos(x);
  if (x >= nmax) {
    j[0] = s / x;
    if (nmax >= 1) j[1] = s / (x * x) - c / x;
    for (int n = 1; n < nmax; ++n) j[n + 1] = (2.0 * n + 1.0) / x * j[n] - j[n - 1];
    return j;
  }
  // Miller's downward recurrence, normalized against the closed forms of
  // j_0 and j_1 (whichever is larger, to stay away from their zeros).
  const int start = nmax + 20 + static_cast<int>(std::sqrt(40.0 * nmax));
  double jp1 = 0.0, jn = 1e-300;
  std::vector<double> tmp(static_cast<std::size_t>(start) + 1, 0.0);
  tmp[start] = jn;
  for (int n = start; n > 0; --n) {
    const double jm1 = (2.0 * n + 1.0) / x * jn - jp1;
    jp1 = jn;
    jn = jm1;
    tmp[n - 1] = jn;
    if (std::abs(jn) > 1e250) {
      for (int m = n - 1; m <= start; ++m) tmp[m] *= 1e-250;
      jn *= 1e-250;
      jp1 *= 1e-250;
    }
  }
  const double j0 = s / x, j1 = s / (x * x) - c / x;
  const double scale = std::abs(j0) >= std::abs(j1) ? j0 / tmp[0] : j1 / tmp[1];
  for (int n = 0; n <= nmax; ++n) j[n] = tmp[n] * scale;
  return j;
}

/// w[n] = int_{-1}^{1} exp(i theta u) P_n(u) du, n = 0..degree.
inline std::vector<Complex> fourier_legendre_weights(int degree, double theta) {
  const auto j = spherical_bessel(degree, std::abs(theta));
  std::vector<Complex> w(static_cast<std::size_t>(degree) + 1);
  Complex in(1.0, 0.0);
  const Complex unit = theta >= 0.0 ? Complex(0.0, 1.0) : Complex(0.0, -1.0);
  for (int n = 0; n <= degree; ++n) {
    w[n] = 2.0 * in * j[n];
    in *= unit;
  }
  return w;
}

/// Legendre expansion of the degree-(n-1) interpolant through values at the
/// nodes of an n-point Gauss rule (returns coefficients a_0..a_{n-1}).
class LegendreTransform {
 public:
  explicit LegendreTransform(int points) : rule_(gauss_legendre(points)) {
    const int n = points;
    table_.resize(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
      const auto p = legendre_values(n - 1, rule_.nodes[i]);
      for (int m = 0; m < n; ++m) table_[static_cast<std::size_t>(m) * n + i] = p[m];
    }
  }

  const GaussLegendre& rule() const { return rule_; }
  int points() const { return static_cast<int>(rule_.size()); }

  template <typename T>
  std::vector<T> coefficients(std::span<const T> values) const {
    const int n = points();
    std::vector<T> a(static_cast<std::size_t>(n), T{});
    for (int m = 0; m < n; ++m) {
      T acc{};
      for (int i = 0; i < n; ++i)
        acc += rule_.weights[i] * table_[static_cast<std::size_t>(m) * n + i] * values[i];
      a[m] = acc * (2.0 * m + 1.0) / 2.0;
    }
    return a;
  }

 private:
  GaussLegendre rule_;
  std::vector<double> table_;
};

}  // namespace talbot
