#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "talbot/evolution.hpp"
#include "talbot/function_spec.hpp"
#include "test_util.hpp"

using namespace talbot;
using testing_util::random_field;

namespace {

double l2_distance(const SpectralField& a, const SpectralField& b) { return l2_norm(a - b); }

SpectralField potential_cos(int n, double amp) { return realize(cosine(amp, 1), n); }

}  // namespace

TEST(FreeEvolve, FullRevival) {
  const auto f = random_field(64, 1);
  EXPECT_LE(max_abs_difference(free_evolve(f, kTwoPi), f), 1e-12);
}

TEST(FreeEvolve, HalfPeriodTranslates) {
  const auto f = random_field(32, 2);
  const auto u = free_evolve(f, std::numbers::pi);
  for (int k = -32; k <= 32; ++k) EXPECT_NEAR(std::abs(u[k] - (k % 2 ? -1.0 : 1.0) * f[k]), 0.0, 1e-13);
  const auto gf = synthesize(f, 256), gu = synthesize(u, 256);
  for (std::size_t m = 0; m < 256; ++m) EXPECT_NEAR(std::abs(gu[m] - gf[(m + 128) % 256]), 0.0, 1e-11);
}

TEST(FreeEvolve, SingleModePhase) {
  const auto u = free_evolve(SpectralField::single_mode(4, 2), 0.1);
  EXPECT_NEAR(std::abs(u[2] - std::polar(1.0, -0.4)), 0.0, 1e-15);
}

TEST(FreeEvolve, PeriodicInTime) {
  const auto f = random_field(128, 3);
  for (double t : {0.3, 2.0, 17.5})
    EXPECT_LE(max_abs_difference(free_evolve(f, t + kTwoPi), free_evolve(f, t)), 1e-10) << t;
}

TEST(FreeEvolve, ReflectedConvention) {
  const auto f = random_field(16, 4);
  EXPECT_EQ(free_evolve(f, 0.7, TimeConvention::reflected), free_evolve(f, -0.7));
  EXPECT_EQ(shifted_free_evolve(f, 0.7, 0.3, TimeConvention::reflected), shifted_free_evolve(f, -0.7, 0.3));
}

TEST(ShiftedFreeEvolve, ZeroShift) {
  const auto f = random_field(16, 5);
  EXPECT_EQ(shifted_free_evolve(f, 1.3, 0.0), free_evolve(f, 1.3));
}

TEST(ShiftedFreeEvolve, ConstantData) {
  const auto u = shifted_free_evolve(SpectralField::constant(3, 2.0), std::numbers::pi, 1.0);
  EXPECT_NEAR(std::abs(u[0] + 2.0), 0.0, 1e-15);
}

TEST(ShiftedFreeEvolve, MatchesConstantPotential) {
  const auto f = random_field(24, 6);
  const HamiltonianSystem sys(SpectralField::constant(0, 0.7), 24);
  EXPECT_LE(max_abs_difference(shifted_free_evolve(f, 0.3, 0.7), eigen_evolve(sys, f, 0.3).field), 1e-10);
}

TEST(Hamiltonian, Invariants) {
  const auto V = realize(cosine(0.8, 1), 4) + realize(cosine(0.3, 3), 4);
  const HamiltonianSystem sys(V, 48);
  const int dim = 97;
  Eigen::MatrixXcd H(dim, dim);
  for (int a = 0; a < dim; ++a)
    for (int b = 0; b < dim; ++b) H(a, b) = V[a - b] + (a == b ? Complex((a - 48.0) * (a - 48.0)) : Complex{});
  EXPECT_LE((sys.reconstructed() - H).cwiseAbs().maxCoeff(), 1e-12 * H.cwiseAbs().maxCoeff());
  const auto& Q = sys.eigenvectors();
  EXPECT_LE((Q.adjoint() * Q - Eigen::MatrixXcd::Identity(dim, dim)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_GE(sys.eigenvalues().minCoeff(), -l1_norm(V));
  EXPECT_TRUE(sys.real_symmetric());
  EXPECT_DOUBLE_EQ(sys.potential_mean(), 0.0);
}

TEST(Hamiltonian, ComplexHermitianPotential) {
  SpectralField V(2);
  V.set(1, Complex(0.2, 0.4));
  V.set(-1, Complex(0.2, -0.4));
  const HamiltonianSystem sys(V, 16);
  EXPECT_FALSE(sys.real_symmetric());
  const auto f = random_field(16, 7);
  EXPECT_NEAR(l2_norm(eigen_evolve(sys, f, 3.0).field) / l2_norm(f), 1.0, 1e-12);
}

TEST(Hamiltonian, RejectsNonRealPotential) {
  EXPECT_THROW(HamiltonianSystem(SpectralField::single_mode(2, 1, 1.0), 8), PreconditionError);
}

TEST(EigenEvolve, ZeroPotentialIsFree) {
  const auto f = random_field(64, 8);
  const HamiltonianSystem sys(SpectralField(0), 64);
  EXPECT_LE(max_abs_difference(eigen_evolve(sys, f, 2.7).field, free_evolve(f, 2.7)), 1e-12);
}

TEST(EigenEvolve, ConstantPotentialIsPhase) {
  const auto f = random_field(32, 9);
  const HamiltonianSystem sys(SpectralField::constant(0, 1.7), 32);
  const auto want = free_evolve(f, 0.9) * std::polar(1.0, -1.7 * 0.9);
  EXPECT_LE(max_abs_difference(eigen_evolve(sys, f, 0.9).field, want), 1e-12);
}

TEST(EigenEvolve, Unitarity) {
  const auto f = realize(step_function(), 128);
  const HamiltonianSystem sys(potential_cos(1, 0.5), 128);
  const double n0 = l2_norm(f);
  for (double t : {0.0, 0.1, 1.0, 10.0, 100.0}) EXPECT_NEAR(l2_norm(eigen_evolve(sys, f, t).field) / n0, 1.0, 1e-10) << t;
}

TEST(EigenEvolve, GroupProperty) {
  const auto f = realize(step_function(), 64);
  const HamiltonianSystem sys(potential_cos(1, 1.0), 64);
  const auto a = eigen_evolve(sys, f, 1.9).field;
  const auto b = eigen_evolve(sys, eigen_evolve(sys, f, 0.7).field, 1.2).field;
  EXPECT_LE(max_abs_difference(a, b), 1e-10);
}

TEST(EigenEvolve, GaugeCovariance) {
  const auto f = random_field(32, 10);
  const auto V = potential_cos(1, 0.6);
  const HamiltonianSystem sys(V, 32), shifted(V + SpectralField::constant(0, 0.45), 32);
  const double t = 1.3;
  const auto want = eigen_evolve(sys, f, t).field * std::polar(1.0, -0.45 * t);
  EXPECT_LE(max_abs_difference(eigen_evolve(shifted, f, t).field, want), 1e-12);
}

TEST(EigenEvolve, TruncationMismatch) {
  const HamiltonianSystem sys(SpectralField(0), 8);
  EXPECT_THROW(eigen_evolve(sys, SpectralField(9), 1.0), PreconditionError);
  EXPECT_THROW(eigen_evolve(sys, SpectralField(8), NAN), PreconditionError);
}

TEST(EigenEvolve, TruncationConvergence) {
  const auto V = potential_cos(1, 1.0);
  std::vector<SpectralField> u;
  for (int n : {32, 64, 128, 256}) u.push_back(eigen_evolve(HamiltonianSystem(V, n), realize(step_function(), n), 1.0).field);
  double prev = INFINITY;
  for (std::size_t i = 0; i + 1 < u.size(); ++i) {
    const double d = l2_distance(u[i + 1], u[i]);
    EXPECT_LT(d, prev);
    prev = d;
  }
}

TEST(Picard, FreeCaseIsExact) {
  const auto f = random_field(16, 11);
  const auto s = picard_solve(f, SpectralField(0), 0.8, 0.3, {1, 1e-10, 96});
  EXPECT_LE(max_abs_difference(s.field, free_evolve(f, 0.8)), 1e-14);
  EXPECT_EQ(s.method, SolveMethod::picard);
}

TEST(Picard, MatchesEigen) {
  const auto f = realize(step_function(), 64);
  const auto V = potential_cos(1, 0.5);
  const auto p = picard_solve(f, V, 0.5, 0.1);
  const auto e = eigen_evolve(HamiltonianSystem(V, 64), f, 0.5);
  EXPECT_LE(l2_distance(p.field, e.field), 1e-6);
  EXPECT_EQ(p.metadata.at("windows").get<int>(), 5);
}

TEST(Picard, CrossAgreementGrid) {
  const auto f = realize(step_function(), 128);
  const auto V = potential_cos(2, 1.0) + realize(cosine(1.0, 2), 2);  // l1 = 2
  ASSERT_NEAR(l1_norm(V), 2.0, 1e-15);
  const HamiltonianSystem sys(V, 128);
  for (double t : {0.25, 1.0}) {
    const auto p = picard_solve(f, V, t, 0.05, {30, 1e-10, 96});
    EXPECT_LE(l2_distance(p.field, eigen_evolve(sys, f, t).field), 1e-6) << t;
  }
}

TEST(Picard, ReflectedConvention) {
  const auto f = realize(step_function(), 32);
  const auto V = potential_cos(1, 0.5);
  const auto a = picard_solve(f, V, 0.4, 0.1, {}, TimeConvention::reflected);
  const auto b = eigen_evolve(HamiltonianSystem(V, 32), f, 0.4, TimeConvention::reflected);
  EXPECT_LE(l2_distance(a.field, b.field), 1e-6);
}

TEST(Picard, HugeWindowDiverges) {
  const auto f = realize(step_function(), 32);
  const auto V = potential_cos(1, 10.0);
  try {
    picard_solve(f, V, 50.0, 50.0);
    FAIL() << "expected non-convergence";
  } catch (const NonConvergenceError& e) {
    EXPECT_FALSE(e.residual_history().empty());
  }
}

TEST(Picard, Preconditions) {
  const auto f = SpectralField(4);
  EXPECT_THROW(picard_solve(f, SpectralField(0), 1.0, 0.0), PreconditionError);
  EXPECT_THROW(picard_solve(f, SpectralField(0), 1.0, 0.1, {0, 1e-10, 96}), PreconditionError);
  EXPECT_THROW(picard_solve(f, SpectralField::single_mode(1, 1), 1.0, 0.1), PreconditionError);
}

TEST(Picard, DefaultDelta) { EXPECT_DOUBLE_EQ(default_picard_delta(potential_cos(1, 2.0)), 0.05 / 3.0); }

TEST(Picard, PartialWeightsEndpoint) {
  // The last row (u = 1) must agree with the quadrature rows' construction.
  const auto rule = gauss_legendre(12);
  const double theta = 7.5;
  const auto A = detail::partial_oscillatory_weights(rule, theta);
  const auto sub = gauss_legendre(60);
  for (int n = 0; n < 12; ++n) {
    Complex acc{};
    for (std::size_t j = 0; j < sub.size(); ++j)
      acc += sub.weights[j] * std::polar(1.0, theta * sub.nodes[j]) * legendre_values(11, sub.nodes[j])[n];
    EXPECT_NEAR(std::abs(A[12 * 12 + n] - acc), 0.0, 1e-12) << n;
  }
}

TEST(Duhamel, ZeroPotential) {
  const auto P = duhamel_part(realize(step_function(), 32), SpectralField(0), 1.0, 32);
  EXPECT_LE(l2_norm(P), 1e-12);
}

TEST(Duhamel, ZeroTime) {
  const auto P = duhamel_part(realize(step_function(), 32), potential_cos(1, 1.0), 0.0, 32);
  EXPECT_LE(l2_norm(P), 1e-13);
}

TEST(Duhamel, SmoothingGain) {
  const auto f = realize(step_function(), 512);
  const auto P = duhamel_part(f, potential_cos(1, 1.0), 1.0, 512);
  EXPECT_TRUE(std::isfinite(sobolev_norm(P, 0.5)));
  const double gain = regularity_exponent(P).sigma - regularity_exponent(f).sigma;
  EXPECT_GE(gain, 0.35);
}

TEST(Duhamel, AdditiveInData) {
  const auto V = potential_cos(1, 0.8);
  const HamiltonianSystem sys(V, 48);
  const auto f = random_field(48, 12), g = random_field(48, 13);
  const auto lhs = duhamel_part(sys, f + g, 0.9);
  const auto rhs = duhamel_part(sys, f, 0.9) + duhamel_part(sys, g, 0.9);
  EXPECT_LE(max_abs_difference(lhs, rhs), 1e-10);
}

TEST(Duhamel, DecomposesSolution) {
  const auto V = potential_cos(1, 0.8) + SpectralField::constant(0, 0.3);
  const HamiltonianSystem sys(V, 48);
  const auto f = random_field(48, 14);
  const auto u = eigen_evolve(sys, f, 2.0).field;
  EXPECT_LE(max_abs_difference(u, shifted_free_evolve(f, 2.0, 0.3) + duhamel_part(sys, f, 2.0)), 1e-12);
}

TEST(GlobalGrowth, L2IsConserved) {
  const auto r = global_growth_check(realize(step_function(), 128), potential_cos(1, 1.0), {0.5, 1, 5, 20}, 0.0);
  for (double x : r.ratios) EXPECT_NEAR(x, 1.0, 1e-10);
  EXPECT_LE(r.max_l2_deviation, 1e-10);
}

TEST(GlobalGrowth, ExponentialEnvelope) {
  std::vector<double> times;
  for (int i = 1; i <= 20; ++i) times.push_back(i);
  const auto r = global_growth_check(realize(step_function(), 256), potential_cos(1, 1.0), times, 0.5);
  EXPECT_LE(r.log_slope, 1.0);
  EXPECT_TRUE(std::isfinite(r.envelope_constant));
}

TEST(GlobalGrowth, FreeFlowConstant) {
  const auto f = random_field(32, 15);
  for (double s : {0.0, 0.5, 2.0}) {
    const auto r = global_growth_check(f, SpectralField(0), {1, 2, 3}, s);
    for (double x : r.ratios) EXPECT_NEAR(x, 1.0, 1e-12);
  }
  EXPECT_THROW(global_growth_check(f, SpectralField(0), {2, 1}, 0.0), PreconditionError);
  EXPECT_THROW(global_growth_check(f, SpectralField(0), {}, 0.0), PreconditionError);
}

TEST(Snapshot, JsonRoundTrip) {
  const HamiltonianSystem sys(potential_cos(1, 0.5), 8);
  const auto s = eigen_evolve(sys, random_field(8, 16), 0.25);
  const auto j = to_json_value(s);
  EXPECT_EQ(j.at("coefficients").size(), 34u);
  const auto back = snapshot_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.field, s.field);
  EXPECT_EQ(back.t, s.t);
  EXPECT_EQ(back.method, SolveMethod::eigen);
}

TEST(Snapshot, BinaryRoundTrip) {
  SolutionSnapshot s{1.5, random_field(5, 17), SolveMethod::picard, {}};
  std::stringstream ss;
  write_binary(ss, s);
  EXPECT_EQ(ss.str().size(), 4u + 4 + 4 + 4 + 8 + 11 * 16);
  EXPECT_EQ(ss.str().substr(0, 4), "TLBT");
  const auto back = read_binary(ss);
  EXPECT_EQ(back.field, s.field);
  EXPECT_EQ(back.t, 1.5);
  EXPECT_EQ(back.method, SolveMethod::picard);

  std::stringstream bad("XXXX");
  EXPECT_THROW(read_binary(bad), ConfigError);
  std::string cut = ss.str().substr(0, 40);
  std::stringstream truncated(cut);
  EXPECT_THROW(read_binary(truncated), ConfigError);
}
