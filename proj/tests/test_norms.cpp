#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracle_values.hpp"
#include "talbot/function_spec.hpp"
#include "talbot/norms.hpp"
#include "test_util.hpp"

using namespace talbot;
using testing_util::random_field;

namespace {

SpectralField power_law(int n, double decay) {
  SpectralField f(n);
  for (int k = 1; k <= n; ++k) {
    const double c = std::pow(static_cast<double>(k), -decay);
    f.set(k, c);
    f.set(-k, c);
  }
  return f;
}

}  // namespace

TEST(Sobolev, ConstantField) {
  const auto f = SpectralField::constant(10, Complex(0.0, -3.0));
  for (double s : {-1.0, 0.0, 0.5, 2.0}) EXPECT_NEAR(sobolev_norm(f, s), 3.0, 1e-14);
}

TEST(Sobolev, SingleModeOne) {
  EXPECT_NEAR(sobolev_norm(SpectralField::single_mode(3, 1), 1.0), std::sqrt(2.0), 1e-15);
}

TEST(Sobolev, MonotoneInS) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto f = random_field(40, seed);
    double prev = 0.0;
    for (double s = -1.0; s <= 2.0; s += 0.25) {
      const double v = sobolev_norm(f, s);
      EXPECT_GE(v, prev);
      prev = v;
    }
  }
}

// The step has |c(k)| ~ 1/(pi k) on odd k: the s > 1/2 norm keeps growing with N
// faster than the s < 1/2 one.
TEST(Sobolev, StepDivergenceOnset) {
  const auto spec = step_function();
  auto growth = [&](double s) {
    return sobolev_norm(realize(spec, 1024), s) - sobolev_norm(realize(spec, 256), s);
  };
  EXPECT_GT(growth(0.51), growth(0.49));
  EXPECT_GT(growth(0.6), 2.0 * growth(0.4));
  // Below the threshold successive 4x refinements add geometrically less; above it, more.
  auto increments = [&](double s) {
    const double a = sobolev_norm(realize(spec, 256), s), b = sobolev_norm(realize(spec, 1024), s),
                 c = sobolev_norm(realize(spec, 4096), s);
    return std::pair{b - a, c - b};
  };
  const auto [low1, low2] = increments(0.3);
  const auto [high1, high2] = increments(0.7);
  EXPECT_LT(low2, 0.7 * low1);
  EXPECT_GT(high2, 1.2 * high1);
}

TEST(Besov, ComparableToSobolev) {
  for (double s : {0.3, 0.5, 0.9})
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto f = random_field(64, 1000 + seed);
      const double ratio = besov_norm(f, s, 2.0, 2.0) / sobolev_norm(f, s);
      EXPECT_GE(ratio, 0.5) << "s=" << s;
      EXPECT_LE(ratio, 2.0) << "s=" << s;
    }
}

TEST(Besov, SingleModeSupNorm) {
  const auto f = SpectralField::single_mode(8, 3);
  for (double s : {0.0, 0.4, 1.3}) EXPECT_NEAR(besov_norm(f, s, kInfinity, kInfinity), std::pow(2.0, 2 * s), 1e-12);
}

TEST(Besov, ZeroField) {
  for (double p : {1.0, 2.0, kInfinity})
    for (double q : {1.0, 2.0, kInfinity}) EXPECT_EQ(besov_norm(SpectralField(16), 0.5, p, q), 0.0);
}

TEST(Besov, RejectsSmallExponents) { EXPECT_THROW(besov_norm(SpectralField(4), 0.5, 0.5, 1.0), PreconditionError); }

TEST(TotalVariation, Indicator) { EXPECT_DOUBLE_EQ(total_variation(std::get<PiecewiseConstant>(step_function().kind)), 2.0); }

TEST(TotalVariation, Constant) {
  EXPECT_EQ(total_variation(PiecewiseConstant{{}, {}, 3.0}), 0.0);
  EXPECT_EQ(total_variation(RealGridField(std::vector<double>(64, 1.5))), 0.0);
}

TEST(TotalVariation, SampledSine) {
  std::vector<double> v(4096);
  for (std::size_t m = 0; m < v.size(); ++m) v[m] = std::sin(kTwoPi * m / 4096.0);
  EXPECT_NEAR(total_variation(RealGridField(v)), 4.0, 0.01);
}

// Fejer means of the truncated series are free of Gibbs overshoot.
TEST(TotalVariation, PiecewiseMatchesSynthesis) {
  const PiecewiseConstant p{{0.5, 2.0, 4.0}, {1.5, -2.0, 0.5}, 0.2};
  const int n = 4096;
  auto f = realize(FunctionSpec{p, 0.5, ""}, n);
  for (int k = -n; k <= n; ++k) f.set(k, f[k] * (1.0 - std::abs(k) / (n + 1.0)));
  const double tv = total_variation(real_part(synthesize(f, 1 << 14)));
  EXPECT_NEAR(tv / p.total_variation(), 1.0, 0.05);
}

TEST(RegularityExponent, HarmonicDecay) {
  const auto t = regularity_exponent(power_law(4096, 1.0));
  EXPECT_NEAR(t.sigma, 0.5, 0.05);
  EXPECT_GT(t.block_hi, t.block_lo);
}

TEST(RegularityExponent, FasterDecay) { EXPECT_NEAR(regularity_exponent(power_law(4096, 1.25)).sigma, 0.75, 0.05); }

TEST(RegularityExponent, PlantedPowerLaws) {
  for (double sigma : {0.1, 0.3, 0.6, 1.0, 1.5})
    EXPECT_NEAR(regularity_exponent(power_law(8192, sigma + 0.5)).sigma, sigma, 0.05);
}

TEST(RegularityExponent, TrigPolynomialIsInfinite) {
  const auto t = regularity_exponent(realize(cosine(1.0, 3), 128));
  EXPECT_TRUE(std::isinf(t.sigma));
}

TEST(RegularityExponent, DegenerateTailThrows) {
  SpectralField f(4096);
  f.set(20, 1.0);
  f.set(3000, 1.0);
  EXPECT_THROW(regularity_exponent(f), EstimatorUndefined);
  EXPECT_THROW(regularity_exponent(SpectralField(32)), PreconditionError);
}

TEST(PhiBeta, Counting) {
  EXPECT_DOUBLE_EQ(phi_beta(3, 0.0), 7.0);
  EXPECT_DOUBLE_EQ(phi_beta(-3, 0.0), 7.0);
  for (double b : {0.0, 0.7, 3.0}) EXPECT_DOUBLE_EQ(phi_beta(0, b), 1.0);
  EXPECT_THROW(phi_beta(3, -0.1), PreconditionError);
}

TEST(PhiBeta, ConvergentBranch) {
  const double a = phi_beta(10000, 2.0), b = phi_beta(100000, 2.0);
  EXPECT_GE(a, 1.0);
  EXPECT_LE(a, 1.0 + std::numbers::pi * std::numbers::pi / 3.0);
  EXPECT_NEAR(a, oracle::kPhiTwo_1e4, 1e-12);
  EXPECT_NEAR(b, oracle::kPhiTwo_1e5, 1e-12);
  // The remaining tail is 2 sum_{n > k} n^-2 ~ 2/k.
  EXPECT_NEAR(b - a, 2.0 * (1e-4 - 1e-5), 1e-7);
}

TEST(PhiBeta, AsymptoticBrackets) {
  struct Case {
    double beta, lo, hi;
  };
  for (const auto& c : {Case{0.5, oracle::kPhiRatioMin_half, oracle::kPhiRatioMax_half},
                        Case{1.0, oracle::kPhiRatioMin_one, oracle::kPhiRatioMax_one},
                        Case{2.0, oracle::kPhiRatioMin_two, oracle::kPhiRatioMax_two}}) {
    double lo = INFINITY, hi = 0.0;
    for (int j = 4; j <= 16; ++j) {
      const double r = phi_beta(1LL << j, c.beta) / phi_beta_branch(1LL << j, c.beta);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    EXPECT_NEAR(lo, c.lo, 1e-10 * c.lo) << c.beta;
    EXPECT_NEAR(hi, c.hi, 1e-10 * c.hi) << c.beta;
    EXPECT_LT(hi / lo, 1.2) << c.beta;
  }
}

TEST(ConvolutionBound, Origin) {
  const auto r = convolution_bound_check(0, 0, 2.0, 2.0, 100000);
  EXPECT_NEAR(r.lattice_sum, oracle::kConvZeroTwoTwo, 1e-12);
  EXPECT_LE(r.ratio, 3.0);
  EXPECT_EQ(r.cutoff, 100000);
}

TEST(ConvolutionBound, GammaZero) {
  double worst = 0.0;
  for (long long k1 : {0LL, 5LL, -40LL, 300LL})
    for (long long k2 : {0LL, 17LL, -250LL}) worst = std::max(worst, convolution_bound_check(k1, k2, 1.5, 0.0).ratio);
  EXPECT_LE(worst, 6.0);
}

TEST(ConvolutionBound, DyadicSweep) {
  double worst = 0.0;
  std::vector<double> ratios;
  for (int j = 4; j <= 10; ++j) {
    const auto r = convolution_bound_check(1LL << j, 0, 1.2, 0.9, 100000);
    EXPECT_NEAR(r.ratio, oracle::kConvSweepRatios[j - 4], 1e-10);
    ratios.push_back(r.ratio);
    worst = std::max(worst, r.ratio);
  }
  EXPECT_LE(worst, 10.0);
  for (std::size_t i = 4; i < ratios.size(); ++i) EXPECT_LE(ratios[i], ratios[i - 1]);
}

TEST(ConvolutionBound, DefaultCutoff) {
  EXPECT_EQ(convolution_bound_check(3, -7, 1.0, 0.5).cutoff, 112);
  EXPECT_EQ(convolution_bound_check(0, 0, 1.0, 0.5).cutoff, 16);
}

TEST(ConvolutionBound, Preconditions) {
  EXPECT_THROW(convolution_bound_check(0, 0, 0.5, 0.9), PreconditionError);
  EXPECT_THROW(convolution_bound_check(0, 0, 0.6, 0.3), PreconditionError);
  EXPECT_THROW(convolution_bound_check(0, 0, 1.5, -0.1), PreconditionError);
}

TEST(NormReport, FieldsAndJson) {
  const auto f = realize(step_function(), 256);
  const auto r = make_norm_report(f, {0.0, 0.25}, {{0.5, 2.0, 2.0}, {0.2, kInfinity, kInfinity}});
  EXPECT_LE(r.sobolev.at(0.0), r.sobolev.at(0.25));
  ASSERT_TRUE(r.tail_exponent.has_value());
  EXPECT_NEAR(r.tail_exponent->sigma, 0.5, 0.05);
  const auto j = to_json_value(r);
  EXPECT_TRUE(j.contains("sobolev"));
  EXPECT_TRUE(j.contains("besov"));
  EXPECT_TRUE(j.contains("total_variation"));
  EXPECT_TRUE(j.at("tail_exponent").contains("block_lo"));
  for (const auto& [k, v] : r.besov) EXPECT_GE(v, 0.0);
}
