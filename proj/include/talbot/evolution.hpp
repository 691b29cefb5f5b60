#pragma once

// Time evolution for i u_t + u_xx = V u on the torus.
//
// Standard convention: free modes evolve as exp(-i k^2 t), and the full
// solution is u(t) = exp(-i t H) f with H[k,l] = k^2 delta_kl + V^(k-l).
// The reflected convention replaces t by -t everywhere.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "talbot/error.hpp"
#include "talbot/fit.hpp"
#include "talbot/norms.hpp"
#include "talbot/quadrature.hpp"
#include "talbot/spectral_field.hpp"

namespace talbot {

enum class TimeConvention { standard, reflected };

inline double signed_time(double t, TimeConvention conv) { return conv == TimeConvention::standard ? t : -t; }

namespace detail {

/// n u mod 2 for n >= 0, exact in the binary value of u (returned rounded to double).
inline double times_mod2(unsigned long long n, double u) {
  if (u == 0.0 || n == 0) return 0.0;
  if (u < 0.0) {
    const double r = times_mod2(n, -u);
    return r == 0.0 ? 0.0 : 2.0 - r;
  }
  int ex = 0;
  const double mant = std::frexp(u, &ex);
  const auto m = static_cast<unsigned long long>(std::ldexp(mant, 53));
  const int e = ex - 53;  // u = m 2^e
  using u128 = unsigned __int128;
  u128 prod = static_cast<u128>(n) * m;
  if (e >= 1) return 0.0;
  if (e == 0) return static_cast<double>(prod & 1);
  if (1 - e < 127) prod &= (static_cast<u128>(1) << (1 - e)) - 1;
  return std::ldexp(static_cast<double>(prod), e);
}

}  // namespace detail

/// Phases k^2 t are reduced in units of pi: t / pi is exact for t = 2 pi
/// and pi in floating point, so full and half revivals come out exact.
inline SpectralField free_evolve(const SpectralField& f, double t,
                                 TimeConvention conv = TimeConvention::standard) {
  const double u = signed_time(t, conv) / std::numbers::pi;
  SpectralField out(f.truncation());
  for (int k = -f.truncation(); k <= f.truncation(); ++k) {
    const double r = detail::times_mod2(static_cast<unsigned long long>(std::abs(k)) * static_cast<unsigned long long>(std::abs(k)), u);
    const Complex phase = r == 0.0 ? Complex(1.0) : r == 1.0 ? Complex(-1.0) : std::polar(1.0, -std::numbers::pi * r);
    out.set(k, f[k] * phase);
  }
  return out;
}

/// exp(it(d_xx - v0)) f = exp(-i t v0) free_evolve(f, t)
inline SpectralField shifted_free_evolve(const SpectralField& f, double t, double v0,
                                         TimeConvention conv = TimeConvention::standard) {
  return free_evolve(f, t, conv) * std::polar(1.0, -v0 * signed_time(t, conv));
}

inline double l1_norm(const SpectralField& f) {
  double s = 0.0;
  for (const auto& c : f.coefficients()) s += std::abs(c);
  return s;
}

/// Truncated Hamiltonian and its eigendecomposition. Immutable once built.
/// The mean V^(0) is kept out of the eigensolve and applied as a scalar phase.
class HamiltonianSystem {
 public:
  HamiltonianSystem(const SpectralField& V, int truncation) : n_(truncation) {
    if (truncation < 0) throw PreconditionError("HamiltonianSystem: negative truncation");
    if (!V.is_real_valued(1e-12)) throw PreconditionError("HamiltonianSystem: V must be real (Hermitian H)");
    mean_ = V[0].real();
    vl1_ = l1_norm(V);
    const int dim = 2 * n_ + 1;
    bool real = true;
    for (int m = -std::min(2 * n_, V.truncation()); m <= std::min(2 * n_, V.truncation()); ++m)
      real = real && V[m].imag() == 0.0;

    if (real) {
      Eigen::MatrixXd H(dim, dim);
      for (int a = 0; a < dim; ++a)
        for (int b = 0; b < dim; ++b) H(a, b) = a == b ? 0.0 : V[a - b].real();
      for (int a = 0; a < dim; ++a) H(a, a) += static_cast<double>(a - n_) * (a - n_);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
      if (es.info() != Eigen::Success) throw NumericError("HamiltonianSystem: eigendecomposition failed");
      reduced_ = es.eigenvalues();
      vectors_ = es.eigenvectors().cast<Complex>();
    } else {
      Eigen::MatrixXcd H(dim, dim);
      for (int a = 0; a < dim; ++a)
        for (int b = 0; b < dim; ++b) H(a, b) = a == b ? Complex{} : V[a - b];
      for (int a = 0; a < dim; ++a) H(a, a) += static_cast<double>(a - n_) * (a - n_);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
      if (es.info() != Eigen::Success) throw NumericError("HamiltonianSystem: eigendecomposition failed");
      reduced_ = es.eigenvalues();
      vectors_ = es.eigenvectors();
    }
    eigenvalues_ = reduced_.array() + mean_;
    real_ = real;
  }

  int truncation() const { return n_; }
  double potential_mean() const { return mean_; }
  double potential_l1() const { return vl1_; }
  bool real_symmetric() const { return real_; }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  const Eigen::MatrixXcd& eigenvectors() const { return vectors_; }

  /// Rebuild H from the stored potential pieces: Q diag(lambda) Q*.
  Eigen::MatrixXcd reconstructed() const {
    return vectors_ * eigenvalues_.cast<Complex>().asDiagonal() * vectors_.adjoint();
  }

  /// exp(-i s H) c
  SpectralField propagate(const SpectralField& f, double s) const {
    if (f.truncation() != n_) throw PreconditionError("eigen_evolve: field and system truncations differ");
    const Eigen::Map<const Eigen::VectorXcd> c(f.coefficients().data(), f.size());
    Eigen::VectorXcd y = vectors_.adjoint() * c;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const long double phase = std::fmod(static_cast<long double>(reduced_[i]) * s,
                                          2.0L * std::numbers::pi_v<long double>);
      y[i] *= std::polar(1.0, -static_cast<double>(phase));
    }
    const Eigen::VectorXcd out = (vectors_ * y) * std::polar(1.0, -mean_ * s);
    return SpectralField(n_, std::vector<Complex>(out.data(), out.data() + out.size()));
  }

 private:
  int n_;
  double mean_ = 0.0;
  double vl1_ = 0.0;
  bool real_ = true;
  Eigen::VectorXd eigenvalues_;
  Eigen::VectorXd reduced_;  // eigenvalues of H - V^(0)
  Eigen::MatrixXcd vectors_;
};

enum class SolveMethod { eigen, picard, free };

inline std::string to_string(SolveMethod m) {
  switch (m) {
    case SolveMethod::eigen: return "eigen";
    case SolveMethod::picard: return "picard";
    case SolveMethod::free: return "free";
  }
  return "unknown";
}

struct SolutionSnapshot {
  double t = 0.0;
  SpectralField field;
  SolveMethod method = SolveMethod::free;
  nlohmann::json metadata = nlohmann::json::object();
};

inline SolutionSnapshot eigen_evolve(const HamiltonianSystem& sys, const SpectralField& f, double t,
                                     TimeConvention conv = TimeConvention::standard) {
  if (!std::isfinite(t)) throw PreconditionError("eigen_evolve: non-finite time");
  SolutionSnapshot s;
  s.t = t;
  s.field = sys.propagate(f, signed_time(t, conv));
  s.method = SolveMethod::eigen;
  s.metadata = {{"N", sys.truncation()}, {"potential_mean", sys.potential_mean()}};
  return s;
}

// ---- Picard iteration -------------------------------------------------------------

struct PicardOptions {
  int iters = 30;
  double tolerance = 1e-10;  // accepted per-window fixed-point residual (relative)
  int max_nodes = 96;
};

namespace detail {

// Collocation nodes per window: resolves exp(i theta u) for |theta| <= theta_max.
inline int picard_nodes(double theta_max, int cap) {
  return std::clamp(static_cast<int>(std::ceil(1.5 * theta_max)) + 10, 8, std::max(8, cap));
}

// A[i][n] = int_{-1}^{u_i} exp(i theta u) P_n(u) du for the Gauss nodes u_i plus
// the endpoint u = 1 (last row, exact closed form).
inline std::vector<Complex> partial_oscillatory_weights(const GaussLegendre& rule, double theta) {
  const int p = static_cast<int>(rule.size());
  std::vector<Complex> A(static_cast<std::size_t>(p + 1) * p);
  const int q = p + static_cast<int>(std::ceil(std::abs(theta))) + 16;
  const auto sub = gauss_legendre(q);
  for (int i = 0; i < p; ++i) {
    const double half = 0.5 * (rule.nodes[i] + 1.0);
    for (int j = 0; j < q; ++j) {
      const double u = -1.0 + half * (sub.nodes[j] + 1.0);
      const Complex e = std::polar(sub.weights[j] * half, theta * u);
      const auto P = legendre_values(p - 1, u);
      for (int n = 0; n < p; ++n) A[static_cast<std::size_t>(i) * p + n] += e * P[n];
    }
  }
  const auto w = fourier_legendre_weights(p - 1, theta);
  for (int n = 0; n < p; ++n) A[static_cast<std::size_t>(p) * p + n] = w[n];
  return A;
}

}  // namespace detail

/// Picard iteration of the gauge-removed Duhamel map in the interaction
/// picture, w_k(s) = exp(i k^2 s) v_k(s) with v = exp(i s V^(0)) u:
///
///   w_k(s) = w_k(s0) - i int_{s0}^{s} sum_l V'(k-l) exp(i (k^2 - l^2) s') w_l(s') ds'
///
/// with V' = V - V^(0). Each window carries a Legendre interpolant of w at
/// Gauss nodes; the oscillatory factor is integrated exactly against it.
inline SolutionSnapshot picard_solve(const SpectralField& f, const SpectralField& V, double t_end, double delta,
                                     const PicardOptions& opt = {},
                                     TimeConvention conv = TimeConvention::standard) {
  if (opt.iters < 1) throw PreconditionError("picard_solve: iters must be >= 1");
  if (!(delta > 0.0) || !std::isfinite(delta)) throw PreconditionError("picard_solve: delta must be positive");
  if (!std::isfinite(t_end)) throw PreconditionError("picard_solve: non-finite end time");
  if (!V.is_real_valued(1e-12)) throw PreconditionError("picard_solve: V must be real");

  const int n = f.truncation();
  const double T = signed_time(t_end, conv);
  const double v0 = V[0].real();

  // Couplings (k, l) with V'(k-l) != 0, grouped by k.
  struct Coupling {
    int l;
    Complex v;
    int omega;  // k^2 - l^2
  };
  std::vector<std::vector<Coupling>> couplings(static_cast<std::size_t>(2 * n + 1));
  int omega_max = 0;
  for (int k = -n; k <= n; ++k)
    for (int l = -n; l <= n; ++l) {
      if (k == l) continue;
      const Complex v = V[k - l];
      if (v == Complex{}) continue;
      const int w = k * k - l * l;
      couplings[static_cast<std::size_t>(k + n)].push_back({l, v, w});
      omega_max = std::max(omega_max, std::abs(w));
    }

  const int windows = T == 0.0 ? 0 : static_cast<int>(std::ceil(std::abs(T) / delta - 1e-12));
  const double step = windows > 0 ? T / windows : 0.0;
  const int p = detail::picard_nodes(omega_max * std::abs(step) / 2.0, opt.max_nodes);
  const LegendreTransform lt(p);
  const auto& rule = lt.rule();

  std::map<int, std::vector<Complex>> weights;
  for (const auto& row : couplings)
    for (const auto& c : row)
      if (!weights.contains(c.omega))
        weights.emplace(c.omega, detail::partial_oscillatory_weights(rule, c.omega * step / 2.0));

  std::vector<Complex> w(f.coefficients().begin(), f.coefficients().end());
  std::vector<double> residuals;
  const std::size_t dim = w.size();
  // values[node][k]; node p is the window end.
  std::vector<Complex> cur(static_cast<std::size_t>(p + 1) * dim), next(cur.size());
  std::vector<Complex> legendre(static_cast<std::size_t>(p) * dim), column(static_cast<std::size_t>(p));

  for (int win = 0; win < windows; ++win) {
    const double center = (win + 0.5) * step;
    for (int i = 0; i <= p; ++i) std::copy(w.begin(), w.end(), cur.begin() + static_cast<std::ptrdiff_t>(i * dim));
    double scale = 0.0;
    for (const auto& c : w) scale = std::max(scale, std::abs(c));
    scale = std::max(scale, 1e-300);

    double change = 0.0;
    std::vector<double> history;
    int it = 0;
    for (; it < opt.iters; ++it) {
      for (std::size_t k = 0; k < dim; ++k) {
        for (int i = 0; i < p; ++i) column[i] = cur[static_cast<std::size_t>(i) * dim + k];
        const auto a = lt.coefficients<Complex>(column);
        std::copy(a.begin(), a.end(), legendre.begin() + static_cast<std::ptrdiff_t>(k * p));
      }
      change = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        for (int i = 0; i <= p; ++i) {
          Complex acc{};
          for (const auto& c : couplings[k]) {
            const auto& A = weights.at(c.omega);
            const Complex* a = &legendre[static_cast<std::size_t>(c.l + n) * p];
            Complex inner{};
            for (int m = 0; m < p; ++m) inner += A[static_cast<std::size_t>(i) * p + m] * a[m];
            acc += c.v * std::polar(1.0, c.omega * center) * inner;
          }
          const Complex value = w[k] - Complex(0.0, 1.0) * (step / 2.0) * acc;
          const std::size_t idx = static_cast<std::size_t>(i) * dim + k;
          change = std::max(change, std::abs(value - cur[idx]));
          next[idx] = value;
        }
      }
      std::swap(cur, next);
      history.push_back(change / scale);
      if (!std::isfinite(change)) break;
      if (change <= 1e-15 * scale) break;
    }
    const double residual = history.empty() ? 0.0 : history.back();
    if (!(residual <= opt.tolerance))
      throw NonConvergenceError("picard_solve: window " + std::to_string(win) + " residual " +
                                    std::to_string(residual) + " after " + std::to_string(opt.iters) +
                                    " iterations (delta too large)",
                                history);
    residuals.push_back(residual);
    std::copy(cur.begin() + static_cast<std::ptrdiff_t>(p * dim), cur.end(), w.begin());
  }

  // Undo the interaction picture and the gauge.
  SpectralField out(n, std::move(w));
  out = free_evolve(out, T) * std::polar(1.0, -v0 * T);

  SolutionSnapshot s;
  s.t = t_end;
  s.field = std::move(out);
  s.method = SolveMethod::picard;
  s.metadata = {{"delta", std::abs(step)},
                {"windows", windows},
                {"nodes", p},
                {"iters", opt.iters},
                {"window_residuals", residuals}};
  return s;
}

/// delta = 0.05 / (1 + ||V^||_l1)
inline double default_picard_delta(const SpectralField& V) { return 0.05 / (1.0 + l1_norm(V)); }

// ---- Duhamel part -----------------------------------------------------------------

/// P(t) = eigen_evolve(f, t) - shifted_free_evolve(f, t, V^(0)), with f
/// truncated or padded to the system's truncation.
inline SpectralField duhamel_part(const HamiltonianSystem& sys, const SpectralField& f, double t,
                                  TimeConvention conv = TimeConvention::standard) {
  const auto g = f.resized(sys.truncation());
  return eigen_evolve(sys, g, t, conv).field - shifted_free_evolve(g, t, sys.potential_mean(), conv);
}

inline SpectralField duhamel_part(const SpectralField& f, const SpectralField& V, double t, int truncation,
                                  TimeConvention conv = TimeConvention::standard) {
  const HamiltonianSystem sys(V, truncation);
  return duhamel_part(sys, f, t, conv);
}

// ---- growth -----------------------------------------------------------------------

struct GrowthReport {
  double s = 0.0;
  std::vector<double> times;
  std::vector<double> ratios;     // ||u(t)||_{H^s} / ||f||_{H^s}
  std::vector<double> l2_ratios;  // ||u(t)||_{L^2} / ||f||_{L^2}
  double log_slope = 0.0;         // fitted slope of log ratio against t
  double envelope_constant = 0.0; // max_t ratio e^{-t}
  double max_l2_deviation = 0.0;
};

inline GrowthReport global_growth_check(const SpectralField& f, const SpectralField& V,
                                        const std::vector<double>& times, double s,
                                        TimeConvention conv = TimeConvention::standard) {
  if (times.empty()) throw PreconditionError("global_growth_check: empty time list");
  for (std::size_t i = 0; i < times.size(); ++i)
    if (!(times[i] > 0.0) || (i > 0 && !(times[i] > times[i - 1])))
      throw PreconditionError("global_growth_check: times must be positive and increasing");

  const HamiltonianSystem sys(V, f.truncation());
  GrowthReport r;
  r.s = s;
  r.times = times;
  const double base = sobolev_norm(f, s), base_l2 = sobolev_norm(f, 0.0);
  if (base == 0.0) throw PreconditionError("global_growth_check: zero initial data");
  std::vector<double> logs;
  for (double t : times) {
    const auto u = eigen_evolve(sys, f, t, conv).field;
    const double ratio = sobolev_norm(u, s) / base;
    r.ratios.push_back(ratio);
    r.l2_ratios.push_back(sobolev_norm(u, 0.0) / base_l2);
    r.max_l2_deviation = std::max(r.max_l2_deviation, std::abs(r.l2_ratios.back() - 1.0));
    r.envelope_constant = std::max(r.envelope_constant, ratio * std::exp(-t));
    logs.push_back(std::log(ratio));
  }
  r.log_slope = times.size() >= 2 ? fit_line(times, logs).slope : 0.0;
  return r;
}

// ---- serialization ----------------------------------------------------------------

inline nlohmann::json to_json_value(const SolutionSnapshot& s) {
  std::vector<double> inter;
  inter.reserve(2 * s.field.size());
  for (const auto& c : s.field.coefficients()) {
    inter.push_back(c.real());
    inter.push_back(c.imag());
  }
  return {{"t", s.t},
          {"method", to_string(s.method)},
          {"N", s.field.truncation()},
          {"coefficients", inter},
          {"metadata", s.metadata}};
}

inline SolutionSnapshot snapshot_from_json(const nlohmann::json& j) {
  SolutionSnapshot s;
  s.t = j.at("t").get<double>();
  const auto m = j.at("method").get<std::string>();
  s.method = m == "eigen" ? SolveMethod::eigen : m == "picard" ? SolveMethod::picard : SolveMethod::free;
  const int n = j.at("N").get<int>();
  const auto inter = j.at("coefficients").get<std::vector<double>>();
  if (inter.size() != 2 * (2 * static_cast<std::size_t>(n) + 1))
    throw ConfigError("snapshot: coefficient array length does not match N");
  std::vector<Complex> c(inter.size() / 2);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = {inter[2 * i], inter[2 * i + 1]};
  s.field = SpectralField(n, std::move(c));
  if (j.contains("metadata")) s.metadata = j.at("metadata");
  return s;
}

namespace detail {

template <typename T>
void write_le(std::ostream& os, T value) {
  auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  std::array<unsigned char, sizeof(T)> bytes{};
  if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) throw ConfigError("snapshot: truncated binary");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

}  // namespace detail

/// Binary layout (little-endian): "TLBT", u32 version = 1, u32 method,
/// i32 N, f64 t, then 2N+1 pairs of f64 (re, im) for k = -N..N.
inline void write_binary(std::ostream& os, const SolutionSnapshot& s) {
  os.write("TLBT", 4);
  detail::write_le<std::uint32_t>(os, 1);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.method));
  detail::write_le<std::int32_t>(os, s.field.truncation());
  detail::write_le<double>(os, s.t);
  for (const auto& c : s.field.coefficients()) {
    detail::write_le<double>(os, c.real());
    detail::write_le<double>(os, c.imag());
  }
}

inline SolutionSnapshot read_binary(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "TLBT") throw ConfigError("snapshot: bad magic");
  if (detail::read_le<std::uint32_t>(is) != 1) throw ConfigError("snapshot: unsupported version");
  SolutionSnapshot s;
  const auto method = detail::read_le<std::uint32_t>(is);
  if (method > 2) throw ConfigError("snapshot: bad method tag");
  s.method = static_cast<SolveMethod>(method);
  const auto n = detail::read_le<std::int32_t>(is);
  if (n < 0) throw ConfigError("snapshot: negative truncation");
  s.t = detail::read_le<double>(is);
  std::vector<Complex> c(2 * static_cast<std::size_t>(n) + 1);
  for (auto& z : c) {
    const double re = detail::read_le<double>(is);
    z = {re, detail::read_le<double>(is)};
  }
  s.field = SpectralField(n, std::move(c));
  return s;
}

}  // namespace talbot
