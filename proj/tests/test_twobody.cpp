#include "bosetrap/reference.hpp"
#include "bosetrap/twobody.hpp"
#include "bosetrap/units.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace bosetrap;
using twobody::GaussianPotential;

namespace {

double rb_mu() { return 0.5 * units::reference_system().mass(); }

// Zero-energy regular solution by classical RK4, normalised to 1 - r/a outside
// the well. Returns a and r_e = 2 int (v^2 - u^2) dr.
struct ZeroEnergy {
  double a;
  double r_e;
};

ZeroEnergy rk4_zero_energy(const GaussianPotential& v, double mu) {
  const double r_end = 20.0 * v.range;
  const int n = 200000;
  const double h = r_end / n;
  auto acc = [&](double r, double u) { return 2.0 * mu * v(r) * u; };
  std::vector<double> us(n + 1);
  double u = 0.0, p = 1.0;
  us[0] = u;
  for (int i = 0; i < n; ++i) {
    const double r = i * h;
    const double k1u = p, k1p = acc(r, u);
    const double k2u = p + 0.5 * h * k1p, k2p = acc(r + 0.5 * h, u + 0.5 * h * k1u);
    const double k3u = p + 0.5 * h * k2p, k3p = acc(r + 0.5 * h, u + 0.5 * h * k2u);
    const double k4u = p + h * k3p, k4p = acc(r + h, u + h * k3u);
    u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
    p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
    us[i + 1] = u;
  }
  const double a = r_end - u / p;
  // Simpson over the grid.
  const double norm = -a * p;
  double integral = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double r = i * h;
    const double vv = 1.0 - r / a, uu = us[i] / norm;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    integral += w * (vv * vv - uu * uu);
  }
  return {a, 2.0 * integral * h / 3.0};
}

// Lowest eigenvalue of the finite-difference radial Hamiltonian on [0, R] with
// u(0) = u(R) = 0, by Sturm-sequence bisection on the tridiagonal matrix.
double fd_ground_state(const GaussianPotential& v, double mu, double r_end, double h) {
  const int n = static_cast<int>(r_end / h);
  const double off = -1.0 / (2.0 * mu * h * h);
  std::vector<double> diag(n);
  for (int i = 0; i < n; ++i) diag[i] = -2.0 * off + v((i + 1) * h);
  auto count_below = [&](double x) {
    int c = 0;
    double q = diag[0] - x;
    if (q < 0) ++c;
    for (int i = 1; i < n; ++i) {
      if (q == 0.0) q = 1e-300;
      q = diag[i] - x - off * off / q;
      if (q < 0) ++c;
    }
    return c;
  };
  double lo = v.depth, hi = 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-13 * std::abs(lo); ++it) {
    const double mid = 0.5 * (lo + hi);
    (count_below(mid) >= 1 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(TwoBody, TabulatedDepthsGiveTabulatedScatteringLengths) {
  const double mu = rb_mu();
  for (const auto& row : reference::table2) {
    const double a = twobody::scattering_length({row.v0_au, reference::gaussian_range_au}, mu);
    EXPECT_NEAR(a / row.a_au, 1.0, reference::tolerance::scattering_length_rel) << "V0 = " << row.v0_au;
  }
}

TEST(TwoBody, NoPotentialNoScattering) {
  const GaussianPotential v{0.0, 11.65};
  EXPECT_EQ(twobody::scattering_length(v, rb_mu()), 0.0);
  EXPECT_TRUE(twobody::bound_states(v, rb_mu()).empty());
  EXPECT_THROW(twobody::effective_range(v, rb_mu()), std::domain_error);
}

TEST(TwoBody, BornLimitForWeakWell) {
  const double mu = rb_mu();
  const GaussianPotential v{-1e-11, 11.65};
  const double born = 2.0 * mu * v.depth * std::sqrt(M_PI) / 4.0 * std::pow(v.range, 3);
  const double a = twobody::scattering_length(v, mu);
  EXPECT_LT(a, 0.0);
  EXPECT_NEAR(a / born, 1.0, 1e-3);
  // Repulsive well of the same size: opposite sign.
  EXPECT_GT(twobody::scattering_length({1e-11, 11.65}, mu), 0.0);
}

TEST(TwoBody, ScatteringLengthMatchesIndependentIntegrator) {
  const double mu = rb_mu();
  for (double v0 : {-1.4e-7, -1.28e-7, -1.251e-7, -5e-8}) {
    const GaussianPotential v{v0, 11.65};
    const auto oracle = rk4_zero_energy(v, mu);
    EXPECT_NEAR(twobody::scattering_length(v, mu) / oracle.a, 1.0, 1e-6) << v0;
  }
}

TEST(TwoBody, EffectiveRangeMatchesIntegralForm) {
  const double mu = rb_mu();
  for (double v0 : {-1.4e-7, -1.27e-7, -1.251e-7}) {
    const GaussianPotential v{v0, 11.65};
    const auto oracle = rk4_zero_energy(v, mu);
    EXPECT_NEAR(twobody::effective_range(v, mu) / oracle.r_e, 1.0, 1e-3) << v0;
  }
}

TEST(TwoBody, EffectiveRangeStaysNearTheWellWidth) {
  const double mu = rb_mu();
  const double shallow = twobody::effective_range({-1.4e-7, 11.65}, mu);
  const double deep = twobody::effective_range({-1.251e-7, 11.65}, mu);
  // a grows fifty-fold across the table; r_e moves by its 1/a correction only.
  EXPECT_NEAR(deep / shallow, 1.0, 0.1);
  EXPECT_GT(shallow, 0.5 * 11.65);
  EXPECT_LT(shallow, 3.0 * 11.65);
}

TEST(TwoBody, LowMomentumExpansionHolds) {
  const double mu = rb_mu();
  const GaussianPotential v{-1.3e-7, 11.65};
  const double a = twobody::scattering_length(v, mu);
  const double re = twobody::effective_range(v, mu);
  for (double kb : {0.01, 0.03, 0.05}) {
    const double k = kb / v.range;
    const auto s = twobody::phase_shift(v, mu, k);
    EXPECT_NEAR(s.k_cot_delta, -1.0 / a + 0.5 * re * k * k, 1e-3 / a) << kb;
  }
}

TEST(TwoBody, OneBoundStateAcrossTheTable) {
  const double mu = rb_mu();
  for (const auto& row : reference::table2) {
    EXPECT_EQ(twobody::bound_state_count({row.v0_au, 11.65}, mu), 1) << row.v0_au;
  }
}

TEST(TwoBody, BoundStateMatchesFiniteDifferences) {
  const double mu = rb_mu();
  for (double v0 : {-1.4e-7, -1.3e-7}) {
    const GaussianPotential v{v0, 11.65};
    const auto e = twobody::bound_states(v, mu);
    ASSERT_EQ(e.size(), 1u);
    const double fd = fd_ground_state(v, mu, 2500.0, 0.01);
    EXPECT_NEAR(e[0] / fd, 1.0, 1e-3) << v0;
    // Universal regime: E close to -1 / (2 mu a^2), with a small range correction.
    const double a = twobody::scattering_length(v, mu);
    EXPECT_NEAR(e[0] * 2.0 * mu * a * a, -1.0, 0.25) << v0;
  }
}

TEST(TwoBody, PoleAtSecondBoundStateThreshold) {
  const double mu = rb_mu();
  // Bracket the depth where a second s-wave state appears.
  double lo = -1.3e-7, hi = -5e-6;
  ASSERT_EQ(twobody::bound_state_count({lo, 11.65}, mu), 1);
  ASSERT_GE(twobody::bound_state_count({hi, 11.65}, mu), 2);
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (twobody::bound_state_count({mid, 11.65}, mu) >= 2 ? hi : lo) = mid;
  }
  const double pole = 0.5 * (lo + hi);
  EXPECT_LT(twobody::scattering_length({pole * (1.0 - 1e-4), 11.65}, mu), -50.0 * 11.65);
  EXPECT_GT(twobody::scattering_length({pole * (1.0 + 1e-4), 11.65}, mu), 50.0 * 11.65);
}

TEST(TwoBody, TuneStrengthInvertsTheMap) {
  const double mu = rb_mu();
  const auto a5962 = twobody::tune_strength(11.65, 5962.0, mu);
  EXPECT_NEAR(a5962.depth / -1.251e-7, 1.0, 1e-3);
  const auto a402 = twobody::tune_strength(11.65, 402.4, mu);
  EXPECT_NEAR(a402.depth / -1.290e-7, 1.0, 1e-3);
  const auto a100 = twobody::tune_strength(11.65, 100.0, mu);
  EXPECT_NEAR(twobody::scattering_length(a100, mu), 100.0, 1e-4);
  EXPECT_EQ(twobody::bound_state_count(a100, mu), 1);
  EXPECT_LT(a100.depth, -1.4e-7);
}

TEST(TwoBody, TuneStrengthRejectsUnreachableTargets) {
  EXPECT_THROW(twobody::tune_strength(11.65, 0.0, rb_mu()), std::domain_error);
  EXPECT_THROW(twobody::tune_strength(11.65, -50.0, rb_mu()), std::domain_error);
}

TEST(TwoBody, SummaryIsConsistent) {
  const double mu = rb_mu();
  const GaussianPotential v{-1.28e-7, 11.65};
  const auto s = twobody::summarize(v, mu);
  EXPECT_DOUBLE_EQ(s.scattering_length, twobody::scattering_length(v, mu));
  EXPECT_EQ(s.n_bound, 1);
  ASSERT_EQ(s.bound_energies.size(), 1u);
  EXPECT_LT(s.bound_energies[0], 0.0);
}
