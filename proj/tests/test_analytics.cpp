#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <chrono>
#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "xborder/analytics.hpp"
#include "xborder/limit_engine.hpp"

using namespace xborder;

namespace {

const double pi = std::numbers::pi;

Mat2d cov(double s11, double s22, double s12) { return {{{s11, s12}, {s12, s22}}}; }
const Mat2d I2 = cov(1, 1, 0);

}  // namespace

// ---------------------------------------------------------------------------
// Wedge parameters
// ---------------------------------------------------------------------------

TEST(Wedge, UncorrelatedAngles) {
  const auto w = wedge_params({1, 1}, {0, 0}, I2);
  EXPECT_DOUBLE_EQ(w.alpha, pi / 2);
  EXPECT_NEAR(w.theta0, pi / 4, 1e-15);
  EXPECT_EQ(w.a1, 0.0);
  EXPECT_EQ(w.a2, 0.0);
  EXPECT_EQ(w.d1, 0.0);
  EXPECT_EQ(w.d2, 0.0);
  EXPECT_EQ(w.a_t, 0.0);
  EXPECT_NEAR(w.U, 2.0, 1e-15);
}

TEST(Wedge, AlphaIsArccosOfMinusRho) {
  for (double rho : {-0.9, -0.5, -0.1, 0.0, 0.2, 0.5, 0.95})
    EXPECT_NEAR(wedge_params({1, 2}, {0, 0}, cov(1, 1, rho)).alpha, std::acos(-rho), 1e-14) << rho;
}

TEST(Wedge, PolarCoordinatesRecoverStartPoint) {
  // x1 = s1 r sin(alpha - theta0), x2 = s2 r (rho sin(alpha - theta0) + sqrt(1-rho^2) cos(alpha - theta0)).
  for (double rho : {-0.7, -0.2, 0.0, 0.4, 0.8}) {
    for (auto x : {Vec2d{1, 1}, Vec2d{0.2, 3}, Vec2d{4, 0.5}, Vec2d{1, 0.9}}) {
      const double s11 = 0.7, s22 = 1.9;
      const auto w = wedge_params(x, {0, 0}, cov(s11, s22, rho * std::sqrt(s11 * s22)));
      ASSERT_GT(w.theta0, 0.0);
      ASSERT_LT(w.theta0, w.alpha);
      const double r = std::sqrt(w.U), a = w.alpha - w.theta0;
      EXPECT_NEAR(w.sigma1 * r * std::sin(a), x[0], 1e-12);
      EXPECT_NEAR(w.sigma2 * r * (rho * std::sin(a) + std::sqrt(1 - rho * rho) * std::cos(a)), x[1], 1e-12);
    }
  }
}

TEST(Wedge, TimeTiltIsMinusHalfQuadraticForm) {
  const Mat2d s = cov(0.8, 0.3, 0.2);
  const Vec2d mu{-1.5, 0.7};
  const auto w = wedge_params({1, 1}, mu, s);
  const double det = s[0][0] * s[1][1] - s[0][1] * s[0][1];
  const double q = (s[1][1] * mu[0] * mu[0] - 2 * s[0][1] * mu[0] * mu[1] + s[0][0] * mu[1] * mu[1]) / det;
  EXPECT_NEAR(w.a_t, -0.5 * q, 1e-12);
  // a = -Sigma^{-1} mu.
  EXPECT_NEAR(w.a1, -(s[1][1] * mu[0] - s[0][1] * mu[1]) / det, 1e-12);
  EXPECT_NEAR(w.a2, -(s[0][0] * mu[1] - s[0][1] * mu[0]) / det, 1e-12);
}

TEST(Wedge, Errors) {
  auto code = [](auto f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvariantViolation;
  };
  EXPECT_EQ(code([] { wedge_params({1, 1}, {0, 0}, cov(1, 1, 1)); }), ErrorCode::DegenerateCovariance);
  EXPECT_EQ(code([] { wedge_params({1, 1}, {0, 0}, cov(0, 1, 0)); }), ErrorCode::DegenerateCovariance);
  EXPECT_EQ(code([] { wedge_params({0, 1}, {0, 0}, I2); }), ErrorCode::DomainError);
  EXPECT_EQ(code([] { survival_probability({1, 1}, {0, 0}, I2, 0.0); }), ErrorCode::DomainError);
}

// ---------------------------------------------------------------------------
// Survival probability
// ---------------------------------------------------------------------------

TEST(Survival, IndependentProductOracle) {
  const auto t0 = std::chrono::steady_clock::now();
  const double v = survival_probability({1, 1}, {0, 0}, I2, 1.0);
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double ref = std::pow(2 * oracle::normal_cdf(1.0) - 1, 2);
  EXPECT_NEAR(v, ref, 1e-9);
  EXPECT_NEAR(ref, 0.466065, 1e-6);
  EXPECT_LT(dt, 1.0);
}

TEST(Survival, DriftedIndependentProductOracle) {
  struct Case { Vec2d x, mu; double s1, s2, t; };
  for (const auto& c : {Case{{1, 1}, {-1, 0.5}, 1, 1, 1}, Case{{0.5, 2}, {-3, -1}, 0.5, 2, 0.3},
                        Case{{1, 1}, {-5, -5}, 0.5, 0.5, 0.1}, Case{{2, 0.7}, {1, 2}, 1.3, 0.4, 2.0},
                        Case{{1, 1}, {0, 0}, 0.5, 0.5, 0.01}, Case{{0.3, 0.4}, {0.2, -0.1}, 1, 1, 5.0}}) {
    const double v = survival_probability(c.x, c.mu, cov(c.s1, c.s2, 0), c.t);
    const double ref = oracle::survival_1d(c.x[0], c.mu[0], std::sqrt(c.s1), c.t) *
                       oracle::survival_1d(c.x[1], c.mu[1], std::sqrt(c.s2), c.t);
    EXPECT_NEAR(v, ref, 1e-8) << c.x[0] << "," << c.x[1] << " mu " << c.mu[0] << "," << c.mu[1] << " t " << c.t;
  }
}

TEST(Survival, CorrelatedMatchesMonteCarlo) {
  struct Case { Vec2d x, mu; Mat2d s; double t; };
  for (const auto& c : {Case{{1, 1}, {0, 0}, cov(1, 1, -0.5), 1.0}, Case{{1, 1}, {0, 0}, cov(1, 1, 0.5), 1.0},
                        Case{{0.8, 1.5}, {-1, 0.5}, cov(0.5, 1.2, 0.4), 0.7}}) {
    const double v = survival_probability(c.x, c.mu, c.s, c.t);
    const auto mc = oracle::planar_mc(c.x[0], c.x[1], c.mu[0], c.mu[1], c.s[0][0], c.s[1][1], c.s[0][1], c.t,
                                      20000, 1e-3, 99);
    EXPECT_NEAR(v, mc.survival, 4 * mc.survival_se + 2e-3) << c.s[0][1];
  }
}

TEST(Survival, LimitsAndMonotonicity) {
  const Mat2d s = cov(1, 0.6, 0.3);
  EXPECT_NEAR(survival_probability({1, 1}, {0, 0}, s, 1e-4), 1.0, 1e-12);
  double prev = 1.0;
  for (double t : {0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0}) {
    const double v = survival_probability({1, 1}, {-0.5, 0.2}, s, t);
    EXPECT_LE(v, prev + 1e-12);
    EXPECT_GE(v, 0.0);
    prev = v;
  }
  // Drift toward the axes lowers survival.
  EXPECT_LT(survival_probability({1, 1}, {-1, 0}, s, 1), survival_probability({1, 1}, {0, 0}, s, 1));
  EXPECT_LT(survival_probability({1, 1}, {0, -1}, s, 1), survival_probability({1, 1}, {0, 0}, s, 1));
}

// ---------------------------------------------------------------------------
// Exit direction and location
// ---------------------------------------------------------------------------

TEST(Upward, ClosedForms) {
  EXPECT_NEAR(upward_probability({1, 1}, {0, 0}, I2).value, 0.5, 1e-15);
  const auto u = upward_probability({1, std::sqrt(3.0)}, {0, 0}, I2);
  EXPECT_TRUE(u.closed_form);
  EXPECT_NEAR(u.value, 1.0 / 3.0, 1e-10);
}

TEST(Upward, CorrelatedClosedFormMatchesMonteCarlo) {
  const auto u = upward_probability({1, 1.5}, {0, 0}, cov(1, 1, -0.5));
  const auto mc = oracle::planar_mc(1, 1.5, 0, 0, 1, 1, -0.5, 200.0, 4000, 1e-3, 5);
  ASSERT_GT(mc.exited, 3900);
  EXPECT_NEAR(u.value, mc.up, 4 * mc.up_se + 0.01);
}

TEST(Upward, DriftedMonteCarloAgreesWithOracle) {
  SeriesControl ctl;
  ctl.mc_paths = 20000;
  const auto u = upward_probability({1, 1}, {-1, -0.2}, I2, ctl);
  EXPECT_FALSE(u.closed_form);
  EXPECT_GT(u.se, 0.0);
  const auto mc = oracle::planar_mc(1, 1, -1, -0.2, 1, 1, 0, 60.0, 4000, 1e-3, 17);
  EXPECT_NEAR(u.value, mc.up, 4 * std::hypot(u.se, mc.up_se) + 0.01);
  // Drift down on the bid side makes the bid exhaust first: downward moves dominate.
  EXPECT_LT(u.value, 0.5);
}

TEST(ExitDensity, IntegratesToUpwardProbability) {
  boost::math::quadrature::exp_sinh<double> integrator;
  for (double rho : {-0.6, 0.0, 0.3, 0.8}) {
    for (auto x : {Vec2d{1, 1}, Vec2d{1, std::sqrt(3.0)}, Vec2d{0.4, 2.5}}) {
      const Mat2d s = cov(0.7, 1.4, rho * std::sqrt(0.7 * 1.4));
      const auto w = wedge_params(x, {0, 0}, s);
      const double total = integrator.integrate([&](double z) { return exit_location_density(x, s, z); });
      EXPECT_NEAR(total, (w.alpha - w.theta0) / w.alpha, 1e-8) << rho;
    }
  }
}

TEST(ExitDensity, SymmetryAndBoundary) {
  const double r0 = std::sqrt(2.0);
  for (double u : {0.1, 0.5, 1.3}) {
    const double a = exit_location_density({1, 1}, I2, r0 * std::exp(u));
    const double b = exit_location_density({1, 1}, I2, r0 * std::exp(-u));
    // z p(z) is symmetric in log z about log sqrt(U).
    EXPECT_NEAR(r0 * std::exp(u) * a, r0 * std::exp(-u) * b, 1e-14);
  }
  EXPECT_LT(exit_location_density({1, 1}, I2, 1e-9), 1e-6);
}

TEST(ExitDensity, CorrelatedLocationMatchesMonteCarlo) {
  // Tail P[W1(tau) > z0, exit through W2 = 0] checks the location scale.
  const Mat2d s = cov(1.0, 0.5, 0.35);
  const Vec2d x{1.0, 0.8};
  const double z0 = 1.2;
  boost::math::quadrature::exp_sinh<double> integrator;
  const double tail = integrator.integrate([&](double z) { return exit_location_density(x, s, z0 + z); });
  const auto mc = oracle::planar_mc(x[0], x[1], 0, 0, s[0][0], s[1][1], s[0][1], 200.0, 4000, 1e-3, 23);
  double hits = 0;
  for (double w1 : mc.w1_at_exit) hits += w1 > z0 ? 1.0 : 0.0;
  const double est = hits / static_cast<double>(mc.exited);
  EXPECT_NEAR(tail, est, 4 * std::sqrt(est * (1 - est) / mc.exited) + 0.01);
}

// ---------------------------------------------------------------------------
// Counts and ranges
// ---------------------------------------------------------------------------

TEST(Counts, NoHitPossibleGivesZeroChanges) {
  const auto d = price_change_count_dist(point_mass_dist({50, 50, 50, 50}), {0, 0}, I2, 1.0, 10);
  ASSERT_FALSE(d.pk.empty());
  EXPECT_NEAR(d.pk[0], 1.0, 1e-12);
}

TEST(Counts, NormalizedAndMatchesLimitEngine) {
  // Four-dimensional symmetric flow whose summed covariance is the identity.
  const Vec4d r{0.5, 0.5, 0.5, 0.5};
  CountControl ctl;
  ctl.time_points = 200;
  const auto d = price_change_count_dist(point_mass_dist(r), {0, 0}, I2, 1.0, 30, ctl);
  double total = d.residual;
  for (double p : d.pk) total += p;
  EXPECT_NEAR(total, 1.0, 1e-4);

  BmSpec spec;
  spec.x0 = r;
  for (int i = 0; i < 4; ++i) spec.sigma[i][i] = 0.5;
  spec.grid_dt = 1e-4;
  LimitOptions opt;
  opt.record_states = false;
  const int reps = 3000;
  std::vector<double> freq(d.pk.size() + 10, 0.0);
  for (int k = 0; k < reps; ++k) {
    const auto tr = simulate_active_limit({}, 31, spec, point_reinit<double>(r), 1.0, opt, static_cast<std::uint64_t>(k));
    const auto c = static_cast<std::size_t>(tr.summary.price_changes);
    if (c < freq.size()) freq[c] += 1.0 / reps;
  }
  for (std::size_t k = 0; k < 4; ++k) {
    const double se = std::sqrt(std::max(d.pk[k] * (1 - d.pk[k]), 1e-4) / reps);
    // Grid monitoring slightly delays hits; allow a small bias on top of 4 SE.
    EXPECT_NEAR(freq[k], d.pk[k], 4 * se + 0.015) << "k=" << k;
  }
}

TEST(Range, DeltaFormulaMatchesEnumeration) {
  for (double p : {0.5, 0.3, 0.7, 0.55}) {
    for (int k = 0; k <= 12; ++k) {
      const auto d = oracle::walk_range_enumeration(k, p);
      for (int n = 0; n <= 4; ++n) {
        double ref = 0;
        for (const auto& [r, w] : d)
          if (r <= n) ref += w;
        EXPECT_NEAR(walk_range_cdf(k, n, p), ref, 1e-12) << "p=" << p << " k=" << k << " n=" << n;
      }
      if (k >= 1) {
        const double one = d.count(1) ? d.at(1) : 0.0;
        EXPECT_NEAR(walk_range_one(k, p), one, 1e-14);
      }
    }
  }
}

TEST(Range, DegenerateAndTrivialCases) {
  EXPECT_EQ(walk_range_cdf(5, 4, 1.0), 0.0);
  EXPECT_EQ(walk_range_cdf(4, 4, 0.0), 1.0);
  CountDistribution c;
  c.pk = {1.0};
  const auto cdf = range_cdf_from_counts(c, 0.5, 3);
  for (double v : cdf) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(Range, MatchesLimitEngine) {
  const Vec4d r{0.5, 0.5, 0.5, 0.5};
  CountControl ctl;
  const auto res = range_distribution(point_mass_dist(r), {0, 0}, I2, 1.0, 4, ctl);
  EXPECT_DOUBLE_EQ(res.p_up, 0.5);
  BmSpec spec;
  spec.x0 = r;
  for (int i = 0; i < 4; ++i) spec.sigma[i][i] = 0.5;
  spec.grid_dt = 1e-4;
  LimitOptions opt;
  opt.record_states = false;
  const int reps = 3000;
  std::vector<double> cdf(5, 0.0);
  for (int k = 0; k < reps; ++k) {
    const auto tr = simulate_active_limit({}, 77, spec, point_reinit<double>(r), 1.0, opt, static_cast<std::uint64_t>(k));
    const auto range = tr.summary.max_B_F - tr.summary.min_B_F;
    for (int n = 0; n <= 4; ++n)
      if (range <= n) cdf[static_cast<std::size_t>(n)] += 1.0 / reps;
  }
  for (int n = 0; n <= 4; ++n) {
    const double p = res.cdf[static_cast<std::size_t>(n)];
    EXPECT_NEAR(cdf[static_cast<std::size_t>(n)], p, 4 * std::sqrt(std::max(p * (1 - p), 1e-4) / reps) + 0.015)
        << "n=" << n;
  }
}

// ---------------------------------------------------------------------------
// Interface PDE
// ---------------------------------------------------------------------------

TEST(Interface, ParameterMapping) {
  const auto p = InterfaceParams::from_flow(0.25, 0.25, 0.0, -2, -2);
  EXPECT_DOUBLE_EQ(p.sigma1_sq, 0.25);
  EXPECT_DOUBLE_EQ(p.sigma2_sq, 1.25);
  EXPECT_DOUBLE_EQ(p.rho_cross, 0.25);
  EXPECT_DOUBLE_EQ(p.mu1, -2);
  EXPECT_DOUBLE_EQ(p.mu2, -6);
}

TEST(Interface, BoundaryBehaviour) {
  const auto p = InterfaceParams::from_flow(0.25, 0.25, 0.0, -2, -2);
  const PdeControl ctl;  // default resolution
  EXPECT_GT(interface_survival(1.0, 1.0, p, 1e-3, ctl), 0.99);
  EXPECT_LT(interface_survival(1.0, 1e-3, p, 0.5, ctl), 0.02);
  // Monotone in both starting queues.
  const auto sol = interface_solution(3.0, 7.0, p, 0.5, ctl);
  for (double xF : {0.25, 0.5, 1.0, 2.0})
    for (double xG : {0.25, 0.5, 1.0, 2.0}) {
      const double v = sol.eval(xG, 2 * xF + xG);
      EXPECT_LE(v, sol.eval(xG + 0.25, 2 * xF + xG + 0.25) + 1e-9);
      EXPECT_LE(v, sol.eval(xG, 2 * (xF + 0.25) + xG) + 1e-9);
    }
}

TEST(Interface, MatchesReflectedRepresentation) {
  const auto p = InterfaceParams::from_flow(0.25, 0.25, 0.0, -2, -2);
  for (auto [xF, xG] : {std::pair{0.5, 1.0}, std::pair{1.5, 0.5}}) {
    const double v = interface_survival(xF, xG, p, 0.5);
    const auto [mc, se] = oracle::reflected_pair_survival(xF, xG, 0.25, 0.25, 0, -2, -2, 0.5, 10000, 1e-3, 3);
    EXPECT_NEAR(v, mc, 0.02) << xF << "," << xG << " se " << se;
  }
}

TEST(Interface, Errors) {
  const auto p = InterfaceParams::from_flow(0.25, 0.25, 0.0, -2, -2);
  PdeControl ex;
  ex.explicit_scheme = true;
  ex.n_time = 50;
  try {
    interface_survival(1, 1, p, 1.0, ex);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CFLViolation);
  }
  PdeControl coarse;
  coarse.n_space = 8;
  coarse.n_time = 20;
  coarse.richardson_check = true;
  coarse.richardson_tol = 1e-4;
  try {
    interface_survival(1, 1, p, 1.0, coarse);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GridTooCoarse);
  }
}
