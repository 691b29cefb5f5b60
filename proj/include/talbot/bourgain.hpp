#pragma once

// Finite-sum checks of the X^{s,b} machinery: norms of atomic mode sums, the
// bilinear kernel M(k, l, tau) and suprema of its l-sums.

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "talbot/error.hpp"
#include "talbot/fit.hpp"
#include "talbot/norms.hpp"

namespace talbot {

struct KernelParams {
  double s = 0.5;
  double a = 0.0;
  double r = 0.0;
  double b = 0.51;
  double b_prime = 0.51;

  /// a <= r, a < 1 + r - s, a < 1/2
  bool valid() const { return a <= r && a < 1.0 + r - s && a < 0.5; }

  /// Distance of (a, r) to the boundary of the valid region, in a.
  double boundary_distance() const {
    return std::min({std::abs(a - r), std::abs(a - (1.0 + r - s)), std::abs(a - 0.5)});
  }

  void check() const {
    if (!(r >= 0.0) || !(s > 0.0) || !(b > 0.0 && b < 1.0) || !(b_prime > 0.0 && b_prime < 1.0))
      throw PreconditionError("KernelParams: need r >= 0, s > 0, b, b' in (0, 1)");
  }
};

struct Atom {
  long long k = 0;
  double tau = 0.0;
  Complex amplitude{};
};

/// Finite sum of space-time atoms with distinct (k, tau).
class ModeSum {
 public:
  ModeSum() = default;
  explicit ModeSum(std::vector<Atom> atoms) {
    for (auto& a : atoms) add(a);
  }

  void add(const Atom& atom) {
    for (const auto& a : atoms_)
      if (a.k == atom.k && a.tau == atom.tau) throw PreconditionError("ModeSum: duplicate (k, tau) atom");
    atoms_.push_back(atom);
  }

  const std::vector<Atom>& atoms() const { return atoms_; }

 private:
  std::vector<Atom> atoms_;
};

inline double xsb_norm(const ModeSum& u, double s, double b) {
  double acc = 0.0;
  for (const auto& a : u.atoms()) {
    const double kk = static_cast<double>(a.k);
    acc += std::pow(1.0 + kk * kk, s) * std::pow(1.0 + (a.tau + kk * kk) * (a.tau + kk * kk), b) *
           std::norm(a.amplitude);
  }
  return std::sqrt(acc);
}

/// <k>^{s+a} <tau+k^2>^{b'-1} <l>^{-s} <k-l>^{-r} <tau+l^2>^{-b}
inline double kernel_M(long long k, long long l, double tau, const KernelParams& p) {
  const double kd = static_cast<double>(k), ld = static_cast<double>(l), d = static_cast<double>(k - l);
  const double pk = tau + kd * kd, pl = tau + ld * ld;
  return std::pow(1.0 + kd * kd, (p.s + p.a) / 2.0) * std::pow(1.0 + pk * pk, (p.b_prime - 1.0) / 2.0) *
         std::pow(1.0 + ld * ld, -p.s / 2.0) * std::pow(1.0 + d * d, -p.r / 2.0) *
         std::pow(1.0 + pl * pl, -p.b / 2.0);
}

/// S(k, tau) = sum_{|l| <= L, l != k} M(k, l, tau)^2 by direct summation.
inline double kernel_sum(long long k, double tau, const KernelParams& p, long long L) {
  double acc = 0.0;
  for (long long l = -L; l <= L; ++l) {
    if (l == k) continue;
    const double m = kernel_M(k, l, tau, p);
    acc += m * m;
  }
  return acc;
}

enum class TauSampling {
  resonance,           // tau in {-m^2 : 0 <= m <= L}
  resonance_and_grid,  // plus 64 points per dyadic tau-scale, |tau| <= 4 K^2
};

struct KernelSupOptions {
  long long K = 1 << 10;
  long long L = 0;                  // 0: 2K + 64
  int samples_per_octave = 4;       // 0: every k in [0, K]
  TauSampling sampling = TauSampling::resonance;
};

struct KernelProfilePoint {
  long long k = 0;
  double tau_argmax = 0.0;
  double value = 0.0;  // sup over sampled tau of S(k, tau)
};

struct OctaveMax {
  int octave = 0;  // k in (2^{j-1}, 2^j]
  double value = 0.0;
};

struct KernelSupReport {
  KernelParams params;
  long long K = 0;
  long long L = 0;
  std::vector<KernelProfilePoint> profile;
  std::vector<OctaveMax> octaves;
  double sup = 0.0;
  long long k_argmax = 0;
  double growth_slope = 0.0;  // of log2 octave max against octave, top three octaves
  bool growing = false;
};

inline constexpr double kGrowthThreshold = 0.1;

namespace detail {

inline std::vector<long long> kernel_k_samples(long long K, int per_octave) {
  std::set<long long> ks;
  if (per_octave <= 0) {
    for (long long k = 0; k <= K; ++k) ks.insert(k);
  } else {
    for (long long k = 0; k <= std::min<long long>(K, 16); ++k) ks.insert(k);
    for (long long top = 32; top <= K * 2; top *= 2) {
      const long long lo = top / 2;
      for (int i = 1; i <= per_octave; ++i) {
        const long long k = lo + (lo * i) / per_octave;
        if (k <= K) ks.insert(k);
      }
    }
    ks.insert(K);
  }
  return {ks.begin(), ks.end()};
}

inline std::vector<double> tau_grid(long long K) {
  std::vector<double> taus;
  const double top = 4.0 * static_cast<double>(K) * static_cast<double>(K);
  for (double scale = 1.0; scale < top; scale *= 2.0)
    for (int i = 0; i < 64; ++i) {
      const double t = scale * (1.0 + i / 64.0);
      taus.push_back(t);
      taus.push_back(-t);
    }
  taus.push_back(0.0);
  return taus;
}

}  // namespace detail

/// sup over sampled tau and k <= K of S(k, tau).
///
/// For tau = -m^2 the l-sum is a product with the matrix <l^2 - m^2>^{-2b}
/// (folded over l -> -l), shared by every k; rows are generated in blocks.
inline KernelSupReport kernel_sup(const KernelParams& p, const KernelSupOptions& opt = {}) {
  p.check();
  if (opt.K < 1) throw PreconditionError("kernel_sup: K must be >= 1");
  const long long K = opt.K;
  const long long L = opt.L > 0 ? opt.L : 2 * K + 64;
  if (L < K) throw PreconditionError("kernel_sup: L must be >= K");
  const auto ks = detail::kernel_k_samples(K, opt.samples_per_octave);
  const auto nk = static_cast<Eigen::Index>(ks.size());

  auto bracket_pow = [](double x, double e) { return std::pow(1.0 + x * x, e / 2.0); };

  // X(l, j) = <l>^{-2s} (<k-l>^{-2r} + <k+l>^{-2r}) for l >= 1, excluding l = k.
  const Eigen::Index rows = L + 1;
  Eigen::MatrixXd X(rows, nk);
  for (Eigen::Index j = 0; j < nk; ++j) {
    const long long k = ks[j];
    for (long long l = 0; l <= L; ++l) {
      const double al = bracket_pow(static_cast<double>(l), -2.0 * p.s);
      double v = 0.0;
      if (l != k) v += bracket_pow(static_cast<double>(k - l), -2.0 * p.r);
      if (l != 0 && -l != k) v += bracket_pow(static_cast<double>(k + l), -2.0 * p.r);
      X(l, j) = al * v;
    }
  }

  std::vector<double> best(ks.size(), -1.0), best_tau(ks.size(), 0.0);
  auto consider = [&](std::size_t j, double tau, double value) {
    if (value > best[j]) {
      best[j] = value;
      best_tau[j] = tau;
    }
  };

  const Eigen::Index block = 256;
  Eigen::MatrixXd G;
  for (Eigen::Index m0 = 0; m0 < rows; m0 += block) {
    const Eigen::Index mb = std::min(block, rows - m0);
    G.resize(mb, rows);
    for (Eigen::Index i = 0; i < mb; ++i) {
      const double m2 = static_cast<double>(m0 + i) * static_cast<double>(m0 + i);
      for (Eigen::Index l = 0; l < rows; ++l) G(i, l) = bracket_pow(static_cast<double>(l) * l - m2, -2.0 * p.b);
    }
    const Eigen::MatrixXd R = G * X;
    for (Eigen::Index j = 0; j < nk; ++j) {
      const double kd = static_cast<double>(ks[j]);
      const double front = bracket_pow(kd, 2.0 * (p.s + p.a));
      for (Eigen::Index i = 0; i < mb; ++i) {
        const double tau = -static_cast<double>(m0 + i) * static_cast<double>(m0 + i);
        consider(static_cast<std::size_t>(j), tau, front * bracket_pow(tau + kd * kd, 2.0 * (p.b_prime - 1.0)) * R(i, j));
      }
    }
  }

  if (opt.sampling == TauSampling::resonance_and_grid) {
    const auto taus = detail::tau_grid(K);
    for (std::size_t j = 0; j < ks.size(); ++j)
      for (double tau : taus) consider(j, tau, kernel_sum(ks[j], tau, p, L));
  }

  KernelSupReport rep;
  rep.params = p;
  rep.K = K;
  rep.L = L;
  std::map<int, double> octave;
  for (std::size_t j = 0; j < ks.size(); ++j) {
    rep.profile.push_back({ks[j], best_tau[j], best[j]});
    if (best[j] > rep.sup) {  // ties resolve toward smaller k
      rep.sup = best[j];
      rep.k_argmax = ks[j];
    }
    const int oct = ks[j] <= 1 ? 0 : static_cast<int>(std::bit_width(static_cast<unsigned long long>(ks[j] - 1)));
    octave[oct] = std::max(octave[oct], best[j]);
  }
  for (const auto& [o, v] : octave) rep.octaves.push_back({o, v});

  if (rep.octaves.size() >= 3) {
    std::vector<double> x, y;
    for (std::size_t i = rep.octaves.size() - 3; i < rep.octaves.size(); ++i) {
      x.push_back(rep.octaves[i].octave);
      y.push_back(std::log2(rep.octaves[i].value));
    }
    rep.growth_slope = fit_line(x, y).slope;
    rep.growing = rep.growth_slope > kGrowthThreshold;
  }
  return rep;
}

inline nlohmann::json to_json_value(const KernelSupReport& r) {
  nlohmann::json oct = nlohmann::json::array();
  for (const auto& o : r.octaves) oct.push_back({{"octave", o.octave}, {"value", o.value}});
  return {{"s", r.params.s},
          {"a", r.params.a},
          {"r", r.params.r},
          {"b", r.params.b},
          {"b_prime", r.params.b_prime},
          {"valid", r.params.valid()},
          {"K", r.K},
          {"L", r.L},
          {"sup", r.sup},
          {"k_argmax", r.k_argmax},
          {"growth_slope", r.growth_slope},
          {"growing", r.growing},
          {"octaves", oct}};
}

/// Per-k profile as CSV rows: k,tau_argmax,S
inline void write_profile_csv(std::ostream& os, const KernelSupReport& r) {
  const auto old = os.precision(17);
  os << "k,tau_argmax,S\n";
  for (const auto& p : r.profile) os << p.k << ',' << p.tau_argmax << ',' << p.value << '\n';
  os.precision(old);
}

/// sup_t ||u(t)||_{H^s} / ||u||_{X^{s,b}} for u(t, x) = sum amp exp(i (tau t + k x)).
inline double embedding_check(const ModeSum& u, double s, double b, const std::vector<double>& t_grid) {
  if (!(b > 0.5)) throw PreconditionError("embedding_check: need b > 1/2");
  if (t_grid.empty()) throw PreconditionError("embedding_check: empty time grid");
  const double denom = xsb_norm(u, s, b);
  if (denom == 0.0) return 0.0;
  double sup = 0.0;
  for (double t : t_grid) {
    std::map<long long, Complex> modes;
    for (const auto& a : u.atoms()) modes[a.k] += a.amplitude * std::polar(1.0, a.tau * t);
    double acc = 0.0;
    for (const auto& [k, c] : modes) acc += std::pow(1.0 + static_cast<double>(k) * k, s) * std::norm(c);
    sup = std::max(sup, std::sqrt(acc));
  }
  return sup / denom;
}

}  // namespace talbot
