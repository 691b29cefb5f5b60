#pragma once

// Box-counting dimension of graphs of sampled real functions on the torus.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "talbot/error.hpp"
#include "talbot/fit.hpp"
#include "talbot/spectral_field.hpp"

namespace talbot {

/// Finest usable level: 2^j <= M / 4.
inline int max_box_level(std::size_t M) { return std::bit_width(M) - 1 - 2; }

/// Boxes of side eps = 2 pi / 2^level. Each of the 2^level intervals needs
/// ceil(osc / eps) + 1 boxes, osc being max - min over the samples of the
/// closed interval (its right endpoint is the first sample of the next one).
inline std::uint64_t box_count_level(const RealGridField& g, int level) {
  const std::size_t M = g.size();
  if (level < 0 || level > max_box_level(M))
    throw PreconditionError("box_count: level " + std::to_string(level) + " outside [0, log2(M) - 2]");
  const std::size_t intervals = std::size_t{1} << level;
  const std::size_t width = M / intervals;
  const double eps = kTwoPi / static_cast<double>(intervals);
  const auto v = g.values();
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < intervals; ++i) {
    double lo = v[(i + 1) * width % M], hi = lo;
    for (std::size_t m = i * width; m < (i + 1) * width; ++m) {
      lo = std::min(lo, v[m]);
      hi = std::max(hi, v[m]);
    }
    total += static_cast<std::uint64_t>(std::ceil((hi - lo) / eps)) + 1;
  }
  return total;
}

/// eps must equal 2 pi / 2^j for an integer j with 2^j <= M / 4.
inline std::uint64_t box_count(const RealGridField& g, double eps) {
  if (!(eps > 0.0)) throw PreconditionError("box_count: eps must be positive");
  const double ratio = kTwoPi / eps;
  const double j = std::round(std::log2(ratio));
  if (std::abs(ratio - std::exp2(j)) > 1e-9 * ratio)
    throw PreconditionError("box_count: eps is not on the dyadic grid 2 pi / 2^j");
  return box_count_level(g, static_cast<int>(j));
}

struct BoxScale {
  int level = 0;
  double eps = 0.0;
  std::uint64_t count = 0;
};

struct DimensionEstimate {
  double slope = 0.0;
  double standard_error = 0.0;
  double upper = 0.0;  // slope + stderr
  double r_squared = 0.0;
  int j_min = 0;
  int j_max = 0;
  std::vector<BoxScale> scales;  // eps strictly decreasing
};

/// Default fit levels for M samples: j in [max(2, J/3), J - 2], J = log2(M) - 2.
inline std::pair<int, int> default_fit_levels(std::size_t M) {
  const int J = max_box_level(M);
  return {std::max(2, J / 3), J - 2};
}

inline DimensionEstimate minkowski_dimension(const RealGridField& g, int j_min, int j_max) {
  if (j_max > max_box_level(g.size()))
    throw PreconditionError("minkowski_dimension: j_max exceeds log2(M) - 2");
  if (j_min < 0 || j_max - j_min < 4)
    throw EstimatorUndefined("minkowski_dimension: fewer than 5 usable scales");
  DimensionEstimate d;
  d.j_min = j_min;
  d.j_max = j_max;
  std::vector<double> x, y;
  for (int j = j_min; j <= j_max; ++j) {
    const auto n = box_count_level(g, j);
    d.scales.push_back({j, kTwoPi / std::exp2(j), n});
    x.push_back(j * std::numbers::ln2);
    y.push_back(std::log(static_cast<double>(n)));
  }
  const auto fit = fit_line(x, y);
  d.slope = fit.slope;
  d.standard_error = fit.slope_stderr;
  d.upper = fit.slope + fit.slope_stderr;
  d.r_squared = fit.r_squared;
  return d;
}

inline DimensionEstimate minkowski_dimension(const RealGridField& g) {
  const auto [lo, hi] = default_fit_levels(g.size());
  return minkowski_dimension(g, lo, hi);
}

inline nlohmann::json to_json_value(const DimensionEstimate& d) {
  nlohmann::json scales = nlohmann::json::array();
  for (const auto& s : d.scales) scales.push_back({{"level", s.level}, {"eps", s.eps}, {"count", s.count}});
  return {{"slope", d.slope},   {"stderr", d.standard_error}, {"upper", d.upper}, {"r_squared", d.r_squared},
          {"j_min", d.j_min},   {"j_max", d.j_max},    {"scales", scales}};
}

inline const char* dimension_csv_header() { return "slope,stderr,upper,r_squared,j_min,j_max"; }

inline void write_csv_row(std::ostream& os, const DimensionEstimate& d) {
  const auto old = os.precision(17);
  os << d.slope << ',' << d.standard_error << ',' << d.upper << ',' << d.r_squared << ',' << d.j_min << ',' << d.j_max;
  os.precision(old);
}

}  // namespace talbot
