#pragma once

// The five experiments: dichotomy, dimension, smoothing, kernel scan, revival.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "talbot/bourgain.hpp"
#include "talbot/evolution.hpp"
#include "talbot/experiments/config.hpp"
#include "talbot/experiments/output.hpp"
#include "talbot/fractal_dim.hpp"
#include "talbot/function_spec.hpp"
#include "talbot/norms.hpp"
#include "talbot/revivals.hpp"

namespace talbot::experiments {

struct RunOptions {
  unsigned threads = 1;
};

// ---- shared pieces -----------------------------------------------------------------

/// Solution u(t) = shifted free evolution of f (at the data truncation) plus
/// the Duhamel part from an eigensolve at a lower truncation.
class HybridSolver {
 public:
  HybridSolver(const ExperimentConfig& cfg, int data_truncation)
      : f_(realize(cfg.data, data_truncation)) {
    const auto V = realize(cfg.potential, 2 * cfg.resolution.duhamel_N);
    mean_ = V[0].real();
    bool zero = true;
    for (int k = -V.truncation(); k <= V.truncation(); ++k)
      if (k != 0 && V[k] != Complex{}) zero = false;
    if (!zero) sys_ = std::make_shared<HamiltonianSystem>(V, cfg.resolution.duhamel_N);
  }

  const SpectralField& data() const { return f_; }
  double potential_mean() const { return mean_; }
  bool has_duhamel_part() const { return static_cast<bool>(sys_); }

  SpectralField duhamel(double t) const {
    if (!sys_) return SpectralField(0);
    return duhamel_part(*sys_, f_, t);
  }

  SpectralField solution(double t) const {
    auto u = shifted_free_evolve(f_, t, mean_);
    if (sys_) u += duhamel(t);
    return u;
  }

 private:
  SpectralField f_;
  double mean_ = 0.0;
  std::shared_ptr<const HamiltonianSystem> sys_;
};

/// t = 2 pi p / q with q <= qmax, if t matches within tol.
inline std::optional<RationalTime> as_rational_time(double t, long long qmax = 1000, double tol = 1e-12) {
  for (long long q = 1; q <= qmax; ++q) {
    const double p = std::round(t * static_cast<double>(q) / kTwoPi);
    if (std::abs(t - kTwoPi * p / static_cast<double>(q)) <= tol * std::max(1.0, std::abs(t)))
      return RationalTime(static_cast<long long>(p), q);
  }
  return std::nullopt;
}

inline bool is_pi_rational(double t, int qmax = 64, double tol = 1e-12) {
  return distance_to_pi_rationals(t, qmax) <= tol * std::max(1.0, std::abs(t));
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <typename T>
inline double max_adjacent_jump(const BasicGridField<T>& g) {
  const auto v = g.values();
  double m = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) m = std::max(m, std::abs(v[(i + 1) % v.size()] - v[i]));
  return m;
}

namespace detail {

inline ExperimentResult start(const ExperimentConfig& cfg) {
  ExperimentResult r;
  r.experiment = to_string(cfg.experiment);
  r.config_hash = config_hash(cfg.tree);
  r.seed = cfg.seed;
  return r;
}

template <typename T>
T param(const ExperimentConfig& cfg, const char* key, T fallback) {
  if (!cfg.params.contains(key)) return fallback;
  try {
    return cfg.params.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("params.") + key + ": " + e.what());
  }
}

template <typename T>
std::vector<T> param_list(const ExperimentConfig& cfg, const char* key, std::vector<T> fallback) {
  if (!cfg.params.contains(key)) return fallback;
  try {
    const auto& j = cfg.params.at(key);
    return j.is_array() ? j.get<std::vector<T>>() : std::vector<T>{j.get<T>()};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("params.") + key + ": " + e.what());
  }
}

inline std::vector<SampledTime> times_or(const ExperimentConfig& cfg, std::vector<SampledTime> fallback) {
  return cfg.times.empty() ? fallback : cfg.times;
}

struct Stopwatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

}  // namespace detail

// ---- dichotomy ---------------------------------------------------------------------

/// J(t) = max_m |u(t, x_{m+1}) - u(t, x_m)| on M = 2^level points, N = M / 4.
inline ExperimentResult run_dichotomy(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  detail::Stopwatch sw;
  auto res = detail::start(cfg);
  auto levels = cfg.resolution.levels.empty() ? std::vector<int>{12, 14, 16} : cfg.resolution.levels;
  std::sort(levels.begin(), levels.end());
  if (levels.size() < 2) throw ConfigError("dichotomy: need at least two resolution levels");
  const auto times = detail::times_or(cfg, {{"pi", std::numbers::pi}, {"sqrt(2)", std::numbers::sqrt2}});
  const double persist_tol = detail::param(cfg, "persistence_tolerance", 0.2);
  const bool discontinuous = cfg.data.is_piecewise_constant();

  const HybridSolver solver(cfg, (1 << levels.back()) / 4);
  struct Cell {
    std::vector<double> J;
  };
  const auto cells = parallel_map(times.size(), opt.threads, [&](std::size_t i) {
    const double t = times[i].value;
    const auto free = shifted_free_evolve(solver.data(), t, solver.potential_mean());
    const auto P = solver.duhamel(t);
    Cell c;
    for (int e : levels) {
      const std::size_t M = std::size_t{1} << e;
      auto u = free.resized(static_cast<int>(M / 4));
      if (solver.has_duhamel_part()) u += P;
      c.J.push_back(max_adjacent_jump(synthesize(u, M)));
    }
    return c;
  });

  Table jumps{"jumps", {"config_hash", "time_label", "t", "pi_rational", "M", "N", "J"}, {}};
  Table trend{"trend",
              {"config_hash", "time_label", "t", "pi_rational", "J_coarse", "J_fine", "max_rel_deviation",
               "min_step_ratio", "required_step_ratio", "classification"},
              {}};
  bool all_ok = true;
  std::string failures;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i].value;
    const bool rational = is_pi_rational(t);
    const auto& J = cells[i].J;
    double dev = 0.0, min_ratio = std::numeric_limits<double>::infinity(), required = 0.0;
    for (std::size_t l = 0; l < levels.size(); ++l) {
      jumps.add({res.config_hash, times[i].label, t, rational, static_cast<long long>(1LL << levels[l]),
                 static_cast<long long>((1LL << levels[l]) / 4), J[l]});
      dev = std::max(dev, std::abs(J[l] - J[0]) / J[0]);
      if (l > 0) {
        min_ratio = std::min(min_ratio, J[l - 1] / J[l]);
        // Holder-1/2 increments shrink by sqrt of the refinement factor.
        required = std::max(required, std::sqrt(std::exp2(levels[l] - levels[l - 1])));
      }
    }
    const bool persistent = dev <= persist_tol;
    const bool vanishing = min_ratio >= required;
    const std::string cls = persistent ? "persistent" : vanishing ? "vanishing" : "indeterminate";
    trend.add({res.config_hash, times[i].label, t, rational, J.front(), J.back(), dev, min_ratio, required, cls});

    const bool expect_persistent = discontinuous && rational;
    const bool ok = expect_persistent ? persistent : vanishing;
    if (!ok) {
      all_ok = false;
      failures += times[i].label + " expected " + (expect_persistent ? "persistent" : "vanishing") + "; ";
    }
  }
  res.tables = {std::move(jumps), std::move(trend)};
  res.checks.push_back({"dichotomy", all_ok, failures.empty() ? "all times classified as predicted" : failures});
  res.summary = {{"levels", levels}, {"discontinuous_data", discontinuous}};
  res.wall_seconds = sw.seconds();
  return res;
}

// ---- dimension ---------------------------------------------------------------------

inline ExperimentResult run_dimension(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  detail::Stopwatch sw;
  auto res = detail::start(cfg);
  const std::size_t M = cfg.resolution.M;
  const int N = cfg.resolution.truncation();
  const auto times = detail::times_or(cfg, irrational_times(8, cfg.seed));
  for (const auto& t : times)
    if (is_pi_rational(t.value)) throw ConfigError("dimension: time '" + t.label + "' is a rational multiple of pi");
  const auto [def_lo, def_hi] = default_fit_levels(M);
  const int j_min = detail::param(cfg, "j_min", def_lo), j_max = detail::param(cfg, "j_max", def_hi);
  const double accept_lo = detail::param(cfg, "accept_min", 1.35), accept_hi = detail::param(cfg, "accept_max", 1.65);

  const HybridSolver solver(cfg, N);
  const std::vector<std::string> observables = {"re", "im", "density"};
  const auto cells = parallel_map(times.size(), opt.threads, [&](std::size_t i) {
    const auto u = synthesize(solver.solution(times[i].value), M);
    return std::vector<DimensionEstimate>{minkowski_dimension(real_part(u), j_min, j_max),
                                          minkowski_dimension(imag_part(u), j_min, j_max),
                                          minkowski_dimension(density(u), j_min, j_max)};
  });

  const double sigma0 = cfg.data.claimed_regularity.value_or(std::numeric_limits<double>::quiet_NaN());
  const double r0 = cfg.potential.claimed_regularity.value_or(std::numeric_limits<double>::quiet_NaN());
  const double lower = 2.5 - 2.0 * sigma0;
  const double upper = std::isinf(r0) ? 1.5 : std::max(1.5, 2.5 - sigma0 - r0);

  Table per{"dimension_per_time",
            {"config_hash", "time_label", "t", "observable", "slope", "stderr", "upper", "r_squared", "j_min",
             "j_max"},
            {}};
  std::vector<std::vector<double>> slopes(observables.size());
  for (std::size_t i = 0; i < times.size(); ++i)
    for (std::size_t o = 0; o < observables.size(); ++o) {
      const auto& d = cells[i][o];
      per.add({res.config_hash, times[i].label, times[i].value, observables[o], d.slope, d.standard_error, d.upper,
               d.r_squared, static_cast<long long>(d.j_min), static_cast<long long>(d.j_max)});
      slopes[o].push_back(d.slope);
    }

  Table agg{"dimension_summary",
            {"config_hash", "observable", "median", "min", "max", "lower_bound", "upper_bound", "bv_verified",
             "times"},
            {}};
  bool ok = true;
  std::string detail;
  for (std::size_t o = 0; o < observables.size(); ++o) {
    const double med = median(slopes[o]);
    const auto [mn, mx] = std::minmax_element(slopes[o].begin(), slopes[o].end());
    agg.add({res.config_hash, observables[o], med, slopes[o].empty() ? NAN : *mn, slopes[o].empty() ? NAN : *mx,
             lower, upper, cfg.data.bv_verified(), static_cast<long long>(times.size())});
    const bool in = med >= accept_lo && med <= accept_hi;
    ok = ok && in;
    detail += observables[o] + " median " + format_number(med) + (in ? " in" : " outside") + " [" +
              format_number(accept_lo) + ", " + format_number(accept_hi) + "]; ";
  }
  res.tables = {std::move(per), std::move(agg)};
  res.checks.push_back({"dimension", ok, detail});
  res.summary = {{"M", M},          {"N", N},         {"j_min", j_min},         {"j_max", j_max},
                 {"lower_bound", lower}, {"upper_bound", upper}, {"bv_verified", cfg.data.bv_verified()},
                 {"duhamel_N", cfg.resolution.duhamel_N}};
  res.wall_seconds = sw.seconds();
  return res;
}

// ---- smoothing ---------------------------------------------------------------------

inline ExperimentResult run_smoothing(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  detail::Stopwatch sw;
  auto res = detail::start(cfg);
  const int N = cfg.resolution.N > 0 ? cfg.resolution.N : cfg.resolution.duhamel_N;
  const auto times = detail::times_or(cfg, {{"1", 1.0}});
  const double s = detail::param(cfg, "s", 0.5);
  const double a = detail::param(cfg, "a", 0.25);
  const auto hs = detail::param_list<double>(cfg, "h", {1.0 / 16, 1.0 / 64, 1.0 / 256, 1.0 / 1024});
  const std::optional<double> min_gain =
      cfg.params.contains("min_gain") ? std::optional(detail::param(cfg, "min_gain", 0.0)) : std::nullopt;

  const auto f = realize(cfg.data, N);
  const auto V = realize(cfg.potential, 2 * N);
  bool has_potential = false;
  for (int k = 1; k <= V.truncation(); ++k) has_potential = has_potential || V[k] != Complex{};
  // Without a non-constant potential P vanishes identically.
  const auto sys = has_potential ? std::make_shared<const HamiltonianSystem>(V, N) : nullptr;
  auto duhamel = [&](double t) { return sys ? duhamel_part(*sys, f, t) : SpectralField(N); };
  const auto tf = regularity_exponent(f);

  struct Cell {
    std::optional<TailExponent> tail;
    std::vector<double> continuity;
  };
  const auto cells = parallel_map(times.size(), opt.threads, [&](std::size_t i) {
    const double t = times[i].value;
    const auto P = duhamel(t);
    Cell c;
    try {
      c.tail = regularity_exponent(P);
    } catch (const EstimatorUndefined&) {
    }
    for (double h : hs) c.continuity.push_back(sobolev_norm(duhamel(t + h) - P, s + a));
    return c;
  });

  Table sm{"smoothing",
           {"config_hash", "time_label", "t", "sigma_f", "sigma_f_stderr", "sigma_P", "sigma_P_stderr", "gain"},
           {}};
  Table cont{"continuity", {"config_hash", "time_label", "t", "h", "sobolev_exponent", "norm_difference"}, {}};
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto& c = cells[i];
    const double sp = c.tail ? c.tail->sigma : std::numeric_limits<double>::quiet_NaN();
    const double gain = sp - tf.sigma;  // nan marks an undefined gain (P identically zero)
    sm.add({res.config_hash, times[i].label, times[i].value, tf.sigma, tf.sigma_stderr, sp,
            c.tail ? c.tail->sigma_stderr : std::numeric_limits<double>::quiet_NaN(), gain});
    for (std::size_t k = 0; k < hs.size(); ++k)
      cont.add({res.config_hash, times[i].label, times[i].value, hs[k], s + a, c.continuity[k]});
    if (min_gain) {
      const bool pass = gain >= *min_gain;
      ok = ok && pass;
      detail += times[i].label + " gain " + format_number(gain) + (pass ? " >= " : " < ") + format_number(*min_gain) + "; ";
    }
  }
  res.tables = {std::move(sm), std::move(cont)};
  if (min_gain) res.checks.push_back({"smoothing_gain", ok, detail});
  res.summary = {{"N", N}, {"sigma_f", tf.sigma}, {"s", s}, {"a", a}};
  res.wall_seconds = sw.seconds();
  return res;
}

// ---- kernel scan -------------------------------------------------------------------

inline ExperimentResult run_kernel_scan(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  detail::Stopwatch sw;
  auto res = detail::start(cfg);
  const double s = detail::param(cfg, "s", 0.5);
  const double b = detail::param(cfg, "b", 0.51), bp = detail::param(cfg, "b_prime", b);
  const auto as = detail::param_list<double>(cfg, "a", {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7});
  const auto rs = detail::param_list<double>(cfg, "r", {0.0, 0.25, 0.5, 1.0});
  const auto sweep = detail::param_list<double>(cfg, "b_sweep", {0.501, 0.51, 0.55});
  const double margin = detail::param(cfg, "margin", 0.05);
  const double min_match = detail::param(cfg, "min_match", 0.9);
  KernelSupOptions kopt;
  kopt.K = detail::param<long long>(cfg, "K", 1LL << 12);
  kopt.L = detail::param<long long>(cfg, "L", 0);
  kopt.samples_per_octave = detail::param(cfg, "samples_per_octave", 4);
  if (kopt.K < 16) throw ConfigError("kernel_scan: K must be >= 16");

  struct Point {
    KernelParams p;
    bool sweep;
  };
  std::vector<Point> points;
  for (double r : rs)
    for (double a : as) points.push_back({{s, a, r, b, bp}, false});
  for (double bs : sweep)
    if (bs != b)
      for (double r : rs)
        for (double a : as) points.push_back({{s, a, r, bs, bs}, true});

  const auto reports = parallel_map(points.size(), opt.threads, [&](std::size_t i) { return kernel_sup(points[i].p, kopt); });

  Table grid{"kernel_grid",
             {"config_hash", "s", "a", "r", "b", "b_prime", "valid", "boundary", "growth_slope", "growing", "match",
              "sup", "k_argmax"},
             {}};
  Table bsw{"kernel_b_sweep", {"config_hash", "s", "a", "r", "b", "b_prime", "valid", "growth_slope", "growing"}, {}};
  Table prof{"kernel_profiles", {"config_hash", "a", "r", "b", "k", "tau_argmax", "S"}, {}};
  int counted = 0, matched = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i].p;
    const auto& rep = reports[i];
    if (points[i].sweep) {
      bsw.add({res.config_hash, p.s, p.a, p.r, p.b, p.b_prime, p.valid(), rep.growth_slope, rep.growing});
      continue;
    }
    const bool boundary = p.boundary_distance() <= margin + 1e-9;
    const bool match = rep.growing == !p.valid();
    if (!boundary) {
      ++counted;
      matched += match ? 1 : 0;
    }
    grid.add({res.config_hash, p.s, p.a, p.r, p.b, p.b_prime, p.valid(), boundary, rep.growth_slope, rep.growing,
              match, rep.sup, rep.k_argmax});
    for (const auto& pp : rep.profile) prof.add({res.config_hash, p.a, p.r, p.b, pp.k, pp.tau_argmax, pp.value});
  }
  const double fraction = counted ? static_cast<double>(matched) / counted : 1.0;
  res.tables = {std::move(grid), std::move(bsw), std::move(prof)};
  res.checks.push_back({"kernel_region", fraction >= min_match,
                        std::to_string(matched) + "/" + std::to_string(counted) + " non-boundary points match"});
  res.summary = {{"K", kopt.K}, {"match_fraction", fraction}, {"non_boundary_points", counted},
                 {"growth_threshold", kGrowthThreshold}};
  res.wall_seconds = sw.seconds();
  return res;
}

// ---- revival -----------------------------------------------------------------------

inline ExperimentResult run_revival(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  detail::Stopwatch sw;
  auto res = detail::start(cfg);
  const int qmax = detail::param(cfg, "q_max", 20);
  if (qmax < 0) throw ConfigError("revival: q_max must be >= 0");
  const int N = cfg.resolution.N > 0 ? cfg.resolution.N : 1024;
  const double tol = detail::param(cfg, "tolerance", 1e-10);
  const double decomposition_tol = detail::param(cfg, "decomposition_tolerance", 1e-8);
  const auto f = realize(cfg.data, N);

  std::vector<RationalTime> rts;
  for (long long q = 1; q <= qmax; ++q)
    for (long long p = 0; p < q; ++p)
      if (std::gcd(p, q) == 1) rts.push_back(RationalTime(p, q));

  const auto errors = parallel_map(rts.size(), opt.threads,
                                   [&](std::size_t i) { return revival_error(f, rts[i].value(), rts[i]); });

  Table rev{"revival", {"config_hash", "p", "q", "t", "error"}, {}};
  Table gauss{"gauss_coefficients", {"config_hash", "p", "q", "m", "re", "im", "abs"}, {}};
  double worst = 0.0;
  for (std::size_t i = 0; i < rts.size(); ++i) {
    rev.add({res.config_hash, rts[i].p(), rts[i].q(), rts[i].value(), errors[i]});
    worst = std::max(worst, errors[i]);
    const auto G = gauss_coefficients(rts[i]);
    for (std::size_t m = 0; m < G.size(); ++m)
      gauss.add({res.config_hash, rts[i].p(), rts[i].q(), static_cast<long long>(m), G[m].real(), G[m].imag(),
                 std::abs(G[m])});
  }
  res.checks.push_back({"quantization", worst <= tol, "max revival error " + format_number(worst)});

  Table dec{"decomposition", {"config_hash", "time_label", "t", "p", "q", "error"}, {}};
  const auto V = realize(cfg.potential, 2 * std::min(N, cfg.resolution.duhamel_N));
  bool has_potential = false;
  for (int k = -V.truncation(); k <= V.truncation(); ++k)
    if (k != 0 && V[k] != Complex{}) has_potential = true;
  if (has_potential && qmax > 0) {
    const int n = std::min(N, cfg.resolution.duhamel_N);
    const auto g = f.resized(n);
    const HamiltonianSystem sys(V, n);
    const auto times = detail::times_or(cfg, {{"pi", std::numbers::pi}});
    double worst_dec = 0.0;
    for (const auto& t : times) {
      const auto rt = as_rational_time(t.value, qmax);
      if (!rt) throw ConfigError("revival: time '" + t.label + "' is not 2 pi p / q with q <= q_max");
      const auto u = eigen_evolve(sys, g, t.value).field;
      const auto quantized = rational_time_evolve(g, *rt) * std::polar(1.0, -sys.potential_mean() * t.value);
      const double err = l2_norm(u - (quantized + duhamel_part(sys, g, t.value))) / l2_norm(g);
      dec.add({res.config_hash, t.label, t.value, rt->p(), rt->q(), err});
      worst_dec = std::max(worst_dec, err);
    }
    res.checks.push_back({"decomposition", worst_dec <= decomposition_tol,
                          "max decomposition error " + format_number(worst_dec)});
  }
  res.tables = {std::move(rev), std::move(gauss), std::move(dec)};
  res.summary = {{"N", N}, {"q_max", qmax}, {"max_revival_error", worst}, {"rational_times", rts.size()}};
  res.wall_seconds = sw.seconds();
  return res;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  switch (cfg.experiment) {
    case ExperimentKind::dichotomy: return run_dichotomy(cfg, opt);
    case ExperimentKind::dimension: return run_dimension(cfg, opt);
    case ExperimentKind::smoothing: return run_smoothing(cfg, opt);
    case ExperimentKind::kernel_scan: return run_kernel_scan(cfg, opt);
    case ExperimentKind::revival: return run_revival(cfg, opt);
  }
  throw ConfigError("unknown experiment");
}

}  // namespace talbot::experiments
