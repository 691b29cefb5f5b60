#pragma once

// Truncated Fourier representation of 2 pi-periodic functions and the
// transforms between it and uniform grids.
//
// Convention: f(x) = sum_{|k| <= N} c(k) exp(i k x), with
// c(k) = (1 / 2 pi) int_0^{2 pi} exp(-i k x) f(x) dx.

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "talbot/error.hpp"
#include "talbot/fft.hpp"

namespace talbot {

using Complex = std::complex<double>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Coefficients c(-N)..c(N) of a truncated Fourier series. Stored over the
/// full symmetric range; no Hermitian compression.
class SpectralField {
 public:
  SpectralField() : SpectralField(0) {}

  explicit SpectralField(int truncation)
      : truncation_(truncation), coeffs_(checked_size(truncation), Complex{}) {}

  SpectralField(int truncation, std::vector<Complex> coeffs)
      : truncation_(truncation), coeffs_(std::move(coeffs)) {
    if (coeffs_.size() != checked_size(truncation))
      throw PreconditionError("SpectralField: coefficient array must have length 2N+1");
  }

  static SpectralField single_mode(int truncation, int k, Complex amplitude = 1.0) {
    SpectralField f(truncation);
    f.set(k, amplitude);
    return f;
  }

  static SpectralField constant(int truncation, Complex value) {
    return single_mode(truncation, 0, value);
  }

  int truncation() const noexcept { return truncation_; }
  std::size_t size() const noexcept { return coeffs_.size(); }

  /// c(k); zero outside the stored range.
  Complex operator[](int k) const noexcept {
    return std::abs(k) <= truncation_ ? coeffs_[static_cast<std::size_t>(k + truncation_)]
                                      : Complex{};
  }

  void set(int k, Complex value) {
    if (std::abs(k) > truncation_) throw PreconditionError("SpectralField::set: |k| exceeds N");
    coeffs_[static_cast<std::size_t>(k + truncation_)] = value;
  }

  std::span<const Complex> coefficients() const noexcept { return coeffs_; }
  std::span<Complex> coefficients() noexcept { return coeffs_; }

  /// Zero-padded or truncated copy with truncation order n.
  SpectralField resized(int n) const {
    SpectralField out(n);
    const int m = std::min(n, truncation_);
    for (int k = -m; k <= m; ++k) out.coeffs_[static_cast<std::size_t>(k + n)] = (*this)[k];
    return out;
  }

  /// Hermitian symmetry c(-k) = conj(c(k)), relative to the largest coefficient.
  bool is_real_valued(double rel_tol = 1e-12) const {
    double scale = 0.0;
    for (const auto& c : coeffs_) scale = std::max(scale, std::abs(c));
    if (scale == 0.0) return true;
    for (int k = 0; k <= truncation_; ++k)
      if (std::abs((*this)[-k] - std::conj((*this)[k])) > rel_tol * scale) return false;
    return true;
  }

  SpectralField& operator+=(const SpectralField& other) {
    if (other.truncation_ > truncation_) *this = resized(other.truncation_);
    for (int k = -other.truncation_; k <= other.truncation_; ++k)
      coeffs_[static_cast<std::size_t>(k + truncation_)] += other[k];
    return *this;
  }

  SpectralField& operator-=(const SpectralField& other) {
    if (other.truncation_ > truncation_) *this = resized(other.truncation_);
    for (int k = -other.truncation_; k <= other.truncation_; ++k)
      coeffs_[static_cast<std::size_t>(k + truncation_)] -= other[k];
    return *this;
  }

  SpectralField& operator*=(Complex scale) {
    for (auto& c : coeffs_) c *= scale;
    return *this;
  }

  friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
  friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
  friend SpectralField operator*(Complex s, SpectralField a) { return a *= s; }
  friend SpectralField operator*(SpectralField a, Complex s) { return a *= s; }

  friend bool operator==(const SpectralField&, const SpectralField&) = default;

 private:
  static std::size_t checked_size(int truncation) {
    if (truncation < 0) throw PreconditionError("SpectralField: negative truncation");
    return 2 * static_cast<std::size_t>(truncation) + 1;
  }

  int truncation_;
  std::vector<Complex> coeffs_;
};

/// Uniform samples at x_m = 2 pi m / M, M a power of two.
template <typename T>
class BasicGridField {
 public:
  explicit BasicGridField(std::vector<T> values) : values_(std::move(values)) {
    if (values_.empty() || !std::has_single_bit(values_.size()))
      throw PreconditionError("GridField: sample count must be a power of two");
    for (const auto& v : values_)
      if (!std::isfinite(std::abs(v))) throw NumericError("GridField: non-finite sample");
  }

  std::size_t size() const noexcept { return values_.size(); }
  std::span<const T> values() const noexcept { return values_; }
  const T& operator[](std::size_t m) const { return values_[m]; }

  double spacing() const noexcept { return kTwoPi / static_cast<double>(values_.size()); }

 private:
  std::vector<T> values_;
};

using GridField = BasicGridField<Complex>;
using RealGridField = BasicGridField<double>;

inline RealGridField real_part(const GridField& g) {
  std::vector<double> v(g.size());
  std::transform(g.values().begin(), g.values().end(), v.begin(),
                 [](const Complex& z) { return z.real(); });
  return RealGridField(std::move(v));
}

inline RealGridField imag_part(const GridField& g) {
  std::vector<double> v(g.size());
  std::transform(g.values().begin(), g.values().end(), v.begin(),
                 [](const Complex& z) { return z.imag(); });
  return RealGridField(std::move(v));
}

inline RealGridField density(const GridField& g) {
  std::vector<double> v(g.size());
  std::transform(g.values().begin(), g.values().end(), v.begin(),
                 [](const Complex& z) { return std::norm(z); });
  return RealGridField(std::move(v));
}

namespace detail {

// Only requires 2N+1 <= M (no aliasing of the stored modes).
inline std::vector<Complex> synthesize_unchecked(const SpectralField& f, std::size_t M) {
  std::vector<Complex> bins(M, Complex{});
  const int n = f.truncation();
  const auto mm = static_cast<long long>(M);
  for (int k = -n; k <= n; ++k) {
    const auto idx = static_cast<std::size_t>(((k % mm) + mm) % mm);
    bins[idx] += f[k];
  }
  return fft_backward(bins);
}

inline SpectralField analyze_unchecked(std::span<const Complex> values, int truncation) {
  const auto bins = fft_forward(values);
  const auto mm = static_cast<long long>(values.size());
  const double inv = 1.0 / static_cast<double>(values.size());
  SpectralField f(truncation);
  for (int k = -truncation; k <= truncation; ++k)
    f.set(k, bins[static_cast<std::size_t>(((k % mm) + mm) % mm)] * inv);
  return f;
}

inline std::size_t next_power_of_two(std::size_t n) { return std::bit_ceil(std::max<std::size_t>(n, 1)); }

}  // namespace detail

/// values[m] = sum_k c(k) exp(i k 2 pi m / M). Requires M a power of two with
/// M >= 4N (spectral truncation N = M/4 is the finest allowed hierarchy).
inline GridField synthesize(const SpectralField& f, std::size_t M) {
  if (M == 0 || !std::has_single_bit(M))
    throw PreconditionError("synthesize: sample count must be a power of two");
  const auto n = static_cast<std::size_t>(f.truncation());
  if (M < 4 * n || M < 2 * n + 1)
    throw UndersamplingError("synthesize: M = " + std::to_string(M) + " undersamples N = " +
                             std::to_string(n) + " (need M >= 4N)");
  return GridField(detail::synthesize_unchecked(f, M));
}

/// Discrete Fourier coefficients |k| <= N of a grid field; needs 2N+1 <= M.
inline SpectralField analyze(const GridField& g, int truncation) {
  if (truncation < 0) throw PreconditionError("analyze: negative truncation");
  if (2 * static_cast<std::size_t>(truncation) + 1 > g.size())
    throw AliasingError("analyze: N = " + std::to_string(truncation) +
                        " aliases on M = " + std::to_string(g.size()) + " samples");
  return detail::analyze_unchecked(g.values(), truncation);
}

inline SpectralField analyze(const RealGridField& g, int truncation) {
  std::vector<Complex> v(g.values().begin(), g.values().end());
  return analyze(GridField(std::move(v)), truncation);
}

/// Pointwise product, truncated to max(N_f, N_g). Both factors are zero-padded
/// to a grid of at least 2(N_f + N_g) + 1 points, so the kept modes are exact.
inline SpectralField multiply(const SpectralField& f, const SpectralField& g) {
  const int out_n = std::max(f.truncation(), g.truncation());
  const int full = f.truncation() + g.truncation();
  const std::size_t M = detail::next_power_of_two(2 * static_cast<std::size_t>(full) + 1);
  auto a = detail::synthesize_unchecked(f, M);
  const auto b = detail::synthesize_unchecked(g, M);
  for (std::size_t m = 0; m < M; ++m) a[m] *= b[m];
  return detail::analyze_unchecked(a, out_n);
}

/// Index of the sharp dyadic Littlewood-Paley block owning wavenumber k:
/// block 0 owns |k| <= 1, block j >= 1 owns 2^{j-1} < |k| <= 2^j.
inline int lp_block_index(int k) {
  const auto a = static_cast<unsigned>(std::abs(k));
  if (a <= 1) return 0;
  return std::bit_width(a - 1);
}

/// Number of blocks needed to cover |k| <= N.
inline int lp_block_count(int truncation) { return lp_block_index(truncation) + 1; }

inline SpectralField lp_project(const SpectralField& f, int j) {
  if (j < 0) throw PreconditionError("lp_project: negative block index");
  SpectralField out(f.truncation());
  for (int k = -f.truncation(); k <= f.truncation(); ++k)
    if (lp_block_index(k) == j) out.set(k, f[k]);
  return out;
}

/// sum_k |c(k)|^2 (no 2 pi factor).
inline double coefficient_energy(const SpectralField& f) {
  double e = 0.0;
  for (const auto& c : f.coefficients()) e += std::norm(c);
  return e;
}

/// True L^2(0, 2 pi) norm: sqrt(2 pi sum |c(k)|^2).
inline double l2_norm(const SpectralField& f) { return std::sqrt(kTwoPi * coefficient_energy(f)); }

/// Riemann-sum L^2 norm of grid samples, sqrt(2 pi / M sum |v|^2).
template <typename T>
double l2_norm(const BasicGridField<T>& g) {
  double e = 0.0;
  for (const auto& v : g.values()) e += std::norm(Complex(v));
  return std::sqrt(kTwoPi * e / static_cast<double>(g.size()));
}

inline double max_abs_difference(const SpectralField& a, const SpectralField& b) {
  const int n = std::max(a.truncation(), b.truncation());
  double d = 0.0;
  for (int k = -n; k <= n; ++k) d = std::max(d, std::abs(a[k] - b[k]));
  return d;
}

}  // namespace talbot
