#pragma once

// Norms and regularity diagnostics on truncated Fourier series.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "talbot/error.hpp"
#include "talbot/fit.hpp"
#include "talbot/function_spec.hpp"
#include "talbot/spectral_field.hpp"

namespace talbot {

/// Encodes p = infinity or q = infinity for besov_norm.
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// <k> = (1 + k^2)^{1/2}
inline double japanese_bracket(double k) { return std::sqrt(1.0 + k * k); }

inline double sobolev_norm(const SpectralField& f, double s) {
  const int n = f.truncation();
  double acc = 0.0;
  for (int k = -n; k <= n; ++k) acc += std::pow(1.0 + static_cast<double>(k) * k, s) * std::norm(f[k]);
  return std::sqrt(acc);
}

/// L^p norm with respect to the normalized measure dx / 2 pi on the torus,
/// approximated by the mean over uniform samples.
template <typename T>
double lp_norm_normalized(const BasicGridField<T>& g, double p) {
  if (std::isinf(p)) {
    double m = 0.0;
    for (const auto& v : g.values()) m = std::max(m, std::abs(v));
    return m;
  }
  double acc = 0.0;
  for (const auto& v : g.values()) acc += std::pow(std::abs(v), p);
  return std::pow(acc / static_cast<double>(g.size()), 1.0 / p);
}

/// Besov norm with sharp dyadic blocks. Block L^p norms use the normalized
/// measure and a grid of at least 8 * 2^j points for block j.
inline double besov_norm(const SpectralField& f, double s, double p, double q) {
  if (!(p >= 1.0) || !(q >= 1.0)) throw PreconditionError("besov_norm: need 1 <= p, q <= inf");
  const int blocks = lp_block_count(f.truncation());
  std::vector<double> weighted(static_cast<std::size_t>(blocks));
  for (int j = 0; j < blocks; ++j) {
    const auto block = lp_project(f, j);
    if (coefficient_energy(block) == 0.0) {
      weighted[j] = 0.0;
      continue;
    }
    const int top = j == 0 ? 1 : (1 << j);
    const std::size_t M = detail::next_power_of_two(std::max<std::size_t>(8 * static_cast<std::size_t>(top), 16));
    const auto grid = GridField(detail::synthesize_unchecked(block.resized(std::min(top, f.truncation())), M));
    weighted[j] = std::pow(2.0, s * j) * lp_norm_normalized(grid, p);
  }
  if (std::isinf(q)) return *std::max_element(weighted.begin(), weighted.end());
  double acc = 0.0;
  for (int j = 1; j < blocks; ++j) acc += std::pow(weighted[j], q);
  return weighted[0] + std::pow(acc, 1.0 / q);
}

inline double total_variation(const PiecewiseConstant& spec) { return spec.total_variation(); }

/// sum_m |g[m+1] - g[m]| with periodic wrap.
template <typename T>
double total_variation(const BasicGridField<T>& g) {
  const auto v = g.values();
  double tv = 0.0;
  for (std::size_t m = 0; m < v.size(); ++m) tv += std::abs(v[(m + 1) % v.size()] - v[m]);
  return tv;
}

/// Estimate of the supremal Sobolev exponent from dyadic-block decay.
struct TailExponent {
  double sigma = 0.0;  // +inf when the field is a trigonometric polynomial
  double slope = 0.0;  // of log2(mean |c|^2 per mode) against j
  double slope_stderr = 0.0;
  double sigma_stderr = 0.0;
  double r_squared = 0.0;
  int block_lo = 0;
  int block_hi = 0;
};

namespace detail {

// Mean |c(k)|^2 over the 2^j modes of the complete block j >= 1.
inline std::vector<double> block_mean_energy(const SpectralField& f) {
  std::vector<double> e;
  e.push_back(0.0);  // block 0 unused by the fit
  for (int j = 1; (1 << j) <= f.truncation(); ++j) {
    double acc = 0.0;
    for (int k = (1 << (j - 1)) + 1; k <= (1 << j); ++k) acc += std::norm(f[k]) + std::norm(f[-k]);
    e.push_back(acc / static_cast<double>(1 << j));
  }
  return e;
}

}  // namespace detail

/// Fit over the complete blocks j in [block_lo, block_hi]. Coefficients with
/// |c(k)| ~ |k|^{-(sigma + 1/2)} give slope -(2 sigma + 1).
inline TailExponent regularity_exponent(const SpectralField& f, int block_lo, int block_hi) {
  const auto energy = detail::block_mean_energy(f);
  const int complete = static_cast<int>(energy.size()) - 1;
  if (block_lo < 1 || block_hi > complete || block_hi < block_lo)
    throw PreconditionError("regularity_exponent: fit range outside the complete blocks");

  int nonzero_total = 0;
  for (int j = 1; j <= complete; ++j) nonzero_total += energy[j] > 0.0 ? 1 : 0;

  std::vector<double> x, y;
  for (int j = block_lo; j <= block_hi; ++j) {
    if (energy[j] <= 0.0) continue;
    x.push_back(j);
    y.push_back(std::log2(energy[j]));
  }
  TailExponent t;
  t.block_lo = block_lo;
  t.block_hi = block_hi;
  if (x.size() < 3) {
    // A finite trigonometric polynomial has no tail at all.
    bool tail_empty = true;
    for (int j = block_lo; j <= complete; ++j) tail_empty = tail_empty && energy[j] == 0.0;
    if (tail_empty && nonzero_total > 0) {
      t.sigma = kInfinity;
      return t;
    }
    throw EstimatorUndefined("regularity_exponent: fewer than 3 nonzero blocks in fit range");
  }
  const auto fit = fit_line(x, y);
  t.slope = fit.slope;
  t.slope_stderr = fit.slope_stderr;
  t.r_squared = fit.r_squared;
  t.sigma = -fit.slope / 2.0 - 0.5;
  t.sigma_stderr = fit.slope_stderr / 2.0;
  return t;
}

/// Default fit range: the middle third of the complete dyadic blocks.
inline TailExponent regularity_exponent(const SpectralField& f) {
  if (f.truncation() < 64) throw PreconditionError("regularity_exponent: need N >= 64");
  const int complete = static_cast<int>(detail::block_mean_energy(f).size()) - 1;
  const int lo = complete / 3 + 1;
  const int hi = (2 * complete + 2) / 3;
  return regularity_exponent(f, lo, hi);
}

/// phi_beta(k) = sum_{|n| <= |k|} <n>^{-beta}
inline double phi_beta(long long k, double beta) {
  if (!(beta >= 0.0)) throw PreconditionError("phi_beta: beta must be >= 0");
  const long long a = k < 0 ? -k : k;
  double acc = 0.0;
  // Smallest terms first.
  for (long long n = a; n >= 1; --n) acc += 2.0 * std::pow(1.0 + static_cast<double>(n) * n, -beta / 2.0);
  return acc + 1.0;
}

/// Asymptotic branch of phi_beta: 1 (beta > 1), log(1 + <k>) (beta = 1),
/// <k>^{1 - beta} (beta < 1).
inline double phi_beta_branch(long long k, double beta) {
  const double b = japanese_bracket(static_cast<double>(k));
  if (beta > 1.0) return 1.0;
  if (beta == 1.0) return std::log(1.0 + b);
  return std::pow(b, 1.0 - beta);
}

struct ConvolutionBoundReport {
  double lattice_sum = 0.0;
  double bound = 0.0;  // phi_beta(k1 - k2) / <k1 - k2>^gamma
  double ratio = 0.0;
  long long cutoff = 0;
};

/// sum_{|n| <= L} <n-k1>^{-beta} <n-k2>^{-gamma} against
/// phi_beta(k1-k2) / <k1-k2>^gamma. L defaults to 16 max(|k1|, |k2|, 1).
inline ConvolutionBoundReport convolution_bound_check(long long k1, long long k2, double beta, double gamma,
                                                      std::optional<long long> cutoff = std::nullopt) {
  if (!(beta >= gamma && gamma >= 0.0 && beta + gamma > 1.0))
    throw PreconditionError("convolution_bound_check: need beta >= gamma >= 0 and beta + gamma > 1");
  const long long L = cutoff.value_or(16 * std::max({std::llabs(k1), std::llabs(k2), 1LL}));
  ConvolutionBoundReport r;
  r.cutoff = L;
  double acc = 0.0;
  for (long long n = -L; n <= L; ++n) {
    const double d1 = static_cast<double>(n - k1), d2 = static_cast<double>(n - k2);
    acc += std::pow(1.0 + d1 * d1, -beta / 2.0) * std::pow(1.0 + d2 * d2, -gamma / 2.0);
  }
  r.lattice_sum = acc;
  const long long d = k1 - k2;
  r.bound = phi_beta(d, beta) / std::pow(japanese_bracket(static_cast<double>(d)), gamma);
  r.ratio = r.lattice_sum / r.bound;
  return r;
}

// ---- NormReport -----------------------------------------------------------------

struct BesovIndex {
  double s, p, q;
  auto operator<=>(const BesovIndex&) const = default;
};

struct NormReport {
  std::map<double, double> sobolev;
  std::map<BesovIndex, double> besov;
  double total_variation = 0.0;
  std::optional<TailExponent> tail_exponent;
};

/// Total variation is measured on a grid of M >= 4N samples.
inline NormReport make_norm_report(const SpectralField& f, const std::vector<double>& sobolev_exponents,
                                   const std::vector<BesovIndex>& besov_indices) {
  NormReport r;
  for (double s : sobolev_exponents) r.sobolev[s] = sobolev_norm(f, s);
  for (const auto& b : besov_indices) r.besov[b] = besov_norm(f, b.s, b.p, b.q);
  const std::size_t M = detail::next_power_of_two(std::max<std::size_t>(4 * static_cast<std::size_t>(f.truncation()), 16));
  r.total_variation = total_variation(synthesize(f, M));
  if (f.truncation() >= 64) {
    try {
      r.tail_exponent = regularity_exponent(f);
    } catch (const EstimatorUndefined&) {
    }
  }
  return r;
}

namespace detail {
inline nlohmann::json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return nullptr;
  return v;
}
}  // namespace detail

inline nlohmann::json to_json_value(const TailExponent& t) {
  return {{"sigma", detail::number_or_inf(t.sigma)},
          {"slope", t.slope},
          {"slope_stderr", t.slope_stderr},
          {"sigma_stderr", t.sigma_stderr},
          {"r_squared", t.r_squared},
          {"block_lo", t.block_lo},
          {"block_hi", t.block_hi}};
}

inline nlohmann::json to_json_value(const NormReport& r) {
  nlohmann::json sob = nlohmann::json::array();
  for (const auto& [s, v] : r.sobolev) sob.push_back({{"s", s}, {"value", v}});
  nlohmann::json bes = nlohmann::json::array();
  for (const auto& [i, v] : r.besov)
    bes.push_back({{"s", i.s}, {"p", detail::number_or_inf(i.p)}, {"q", detail::number_or_inf(i.q)}, {"value", v}});
  nlohmann::json j = {{"sobolev", sob}, {"besov", bes}, {"total_variation", r.total_variation}};
  j["tail_exponent"] = r.tail_exponent ? to_json_value(*r.tail_exponent) : nlohmann::json(nullptr);
  return j;
}

}  // namespace talbot
