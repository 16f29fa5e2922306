#pragma once
// Closed-form and numerical analytics for the diffusion limit:
//  * first exit of a planar correlated Brownian motion from the positive
//    quadrant (survival probability, direction of exit, exit location);
//  * distribution of the number of price changes and of the bid-price range
//    (renewal argument plus the range of a Bernoulli random walk);
//  * the interface PDE characterizing how long the direction of
//    cross-border trading persists.

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include "core_model.hpp"
#include "random.hpp"
#include "special_functions.hpp"

namespace xborder {

// ---------------------------------------------------------------------------
// Wedge parameters
// ---------------------------------------------------------------------------

struct WedgeParams {
  double alpha = 0.0;   // wedge angle of the quadrant after decorrelation
  double theta0 = 0.0;  // angle of the start point
  double a1 = 0.0, a2 = 0.0;  // exponential tilt (Girsanov) coefficients
  double d1 = 0.0, d2 = 0.0;  // drift projections
  double U = 0.0;       // squared Mahalanobis radius of the start point
  double a_t = 0.0;     // time tilt, equals -mu' Sigma^{-1} mu / 2
  double sigma1 = 0.0, sigma2 = 0.0, rho = 0.0;
};

inline WedgeParams wedge_params(const Vec2d& x, const Vec2d& mu, const Mat2d& sigma) {
  const double s11 = sigma[0][0], s22 = sigma[1][1], s12 = sigma[0][1];
  if (!(s11 > 0.0) || !(s22 > 0.0))
    throw Error(ErrorCode::DegenerateCovariance, "covariance needs a positive diagonal");
  if (std::abs(s12 - sigma[1][0]) > 1e-12 * std::max(s11, s22))
    throw Error(ErrorCode::DegenerateCovariance, "covariance is not symmetric");
  WedgeParams w;
  w.sigma1 = std::sqrt(s11);
  w.sigma2 = std::sqrt(s22);
  w.rho = s12 / (w.sigma1 * w.sigma2);
  if (!(std::abs(w.rho) < 1.0))
    throw Error(ErrorCode::DegenerateCovariance, "|rho| must be < 1 (regular covariance)");
  if (!(x[0] > 0.0) || !(x[1] > 0.0) || !std::isfinite(x[0]) || !std::isfinite(x[1]))
    throw Error(ErrorCode::DomainError, "start point must lie in the open positive quadrant");

  const double pi = std::numbers::pi;
  const double s1 = w.sigma1, s2 = w.sigma2, rho = w.rho;
  const double c = std::sqrt(1.0 - rho * rho);
  if (rho > 0.0) w.alpha = pi + std::atan(-c / rho);
  else if (rho == 0.0) w.alpha = pi / 2.0;
  else w.alpha = std::atan(-c / rho);

  const double den = x[0] * s2 - rho * x[1] * s1;
  const double num = x[1] * s1 * c;
  if (den < 0.0) w.theta0 = pi + std::atan(num / den);
  else if (den == 0.0) w.theta0 = pi / 2.0;
  else w.theta0 = std::atan(num / den);

  w.a1 = (rho * mu[1] * s1 - mu[0] * s2) / ((1.0 - rho * rho) * s1 * s1 * s2);
  w.a2 = (rho * mu[0] * s2 - mu[1] * s1) / ((1.0 - rho * rho) * s2 * s2 * s1);
  w.d1 = w.a1 * s1 + rho * w.a2 * s2;
  w.d2 = w.a2 * s2 * c;
  w.U = (x[0] * x[0] / (s1 * s1) + x[1] * x[1] / (s2 * s2) - 2.0 * rho * x[0] * x[1] / (s1 * s2)) /
        (1.0 - rho * rho);
  w.a_t = w.a1 * w.a1 * s1 * s1 / 2.0 + rho * w.a1 * w.a2 * s1 * s2 + w.a2 * w.a2 * s2 * s2 / 2.0 +
          w.a1 * mu[0] + w.a2 * mu[1];
  return w;
}

// ---------------------------------------------------------------------------
// Survival probability of the first exit time
// ---------------------------------------------------------------------------

struct SeriesControl {
  double term_tol = 1e-12;       // truncation of the outer sum
  int j_max = 4000;              // SeriesNotConverged beyond this many terms
  double panel_width = 0.75;     // radial panel width in units of sqrt(t)
  double tail_sigmas = 10.0;     // radial window half-width in units of sqrt(t)
  // Monte Carlo settings for quantities without a tractable closed form.
  std::int64_t mc_paths = 100000;
  std::uint64_t mc_seed = 20240101;
  double mc_step_fraction = 0.2;  // time step = (fraction * distance to the axes)^2
  double mc_dt_min = 1e-7;
  double mc_T_cap = 1e6;
};

namespace detail {

// Composite Gauss-Legendre rule (20 points per panel) on [a, b].
inline void gauss_panels(double a, double b, int panels, std::vector<double>& nodes,
                         std::vector<double>& weights) {
  using Rule = boost::math::quadrature::gauss<double, 20>;
  const auto& xs = Rule::abscissa();
  const auto& ws = Rule::weights();
  nodes.clear();
  weights.clear();
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h, half = 0.5 * h;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (xs[i] == 0.0) {
        nodes.push_back(mid);
        weights.push_back(ws[i] * half);
        continue;
      }
      nodes.push_back(mid - half * xs[i]);
      weights.push_back(ws[i] * half);
      nodes.push_back(mid + half * xs[i]);
      weights.push_back(ws[i] * half);
    }
  }
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// P[one-dimensional BM with drift mu, volatility s, started at x > 0 hits 0 by t].
inline double hit_prob_1d(double x, double mu, double s, double t) {
  const double sd = s * std::sqrt(t);
  const double first = normal_cdf((-x - mu * t) / sd);
  const double tail = normal_cdf((-x + mu * t) / sd);
  if (tail <= 0.0) return first;
  const double log_second = -2.0 * mu * x / (s * s) + std::log(tail);
  return std::min(1.0, first + std::exp(log_second));
}

}  // namespace detail

// P[tau > t] for the planar BM x + mu t + Sigma^{1/2} B(t), tau the first
// time either coordinate reaches zero. Series over Bessel orders j*pi/alpha,
// angular and radial integrals by composite Gauss-Legendre, everything in
// log space with exp(-U/2t) folded into the exponentially scaled Bessel.
inline double survival_probability(const Vec2d& x, const Vec2d& mu, const Mat2d& sigma, double t,
                                   const SeriesControl& ctl = {}) {
  const WedgeParams w = wedge_params(x, mu, sigma);
  if (!(t > 0.0) || !std::isfinite(t)) throw Error(ErrorCode::DomainError, "t must be positive and finite");

  // Far from both axes relative to sqrt(t): the union bound of the two
  // one-dimensional hitting probabilities is below the requested accuracy.
  const double h1 = detail::hit_prob_1d(x[0], mu[0], w.sigma1, t);
  const double h2 = detail::hit_prob_1d(x[1], mu[1], w.sigma2, t);
  if (h1 + h2 < 1e-3 * ctl.term_tol) return std::clamp(1.0 - h1 - h2, 0.0, 1.0);

  const double pi = std::numbers::pi;
  const double alpha = w.alpha;
  const double r0 = std::sqrt(w.U);
  const double st = std::sqrt(t);
  const bool driftless = w.d1 == 0.0 && w.d2 == 0.0 && w.a1 == 0.0 && w.a2 == 0.0;

  // phi(theta) = d1 sin(alpha - theta) + d2 cos(alpha - theta): radial tilt.
  auto phi = [&](double th) { return w.d1 * std::sin(alpha - th) + w.d2 * std::cos(alpha - th); };
  double phi_min = 0.0, phi_max = 0.0;
  if (!driftless) {
    phi_min = std::numeric_limits<double>::infinity();
    phi_max = -phi_min;
    for (int i = 0; i <= 400; ++i) {
      const double v = phi(alpha * i / 400.0);
      phi_min = std::min(phi_min, v);
      phi_max = std::max(phi_max, v);
    }
    const double D = std::hypot(w.d1, w.d2);
    phi_min = std::max(-D, phi_min - 1e-3 * D);
    phi_max = std::min(D, phi_max + 1e-3 * D);
  }

  // Radial window: the Gaussian factor exp(-(r - r0)^2 / 2t - r phi) peaks at r0 - t phi.
  const double half = ctl.tail_sigmas * st;
  const double lo = std::max(0.0, r0 - t * phi_max - half);
  const double hi = r0 - t * phi_min + half;
  const int r_panels = std::max(4, static_cast<int>(std::ceil((hi - lo) / (ctl.panel_width * st))));
  std::vector<double> rn, rw;
  detail::gauss_panels(lo, hi, r_panels, rn, rw);
  const std::size_t R = rn.size();

  // Orders needed: I_nu(z) e^{-z} ~ exp(-nu^2 / 2z) once nu^2 >> z.
  const double z_max = hi * r0 / t;
  const double nu_est = std::sqrt(2.0 * z_max * std::log(1e3 / ctl.term_tol)) + 10.0;
  const int j_est = static_cast<int>(std::ceil(nu_est * alpha / pi)) + 2;

  std::vector<double> tn, tw;
  if (!driftless) detail::gauss_panels(0.0, alpha, std::max(4, j_est / 2 + 4), tn, tw);
  const std::size_t Th = tn.size();

  // base[r] collects every j-independent log factor; E[r][theta] <= 1.
  const double log_pref = w.a1 * x[0] + w.a2 * x[1] + w.a_t * t + std::log(2.0 / (alpha * t));
  std::vector<double> base(R), bound(R);
  std::vector<double> E(driftless ? 0 : R * Th);
  for (std::size_t k = 0; k < R; ++k) {
    const double r = rn[k];
    base[k] = log_pref + std::log(r) - (r - r0) * (r - r0) / (2.0 * t) - r * phi_min + std::log(rw[k]);
    if (driftless) {
      bound[k] = 1.0;
      continue;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < Th; ++i) {
      const double e = std::exp(-r * (phi(tn[i]) - phi_min)) * tw[i];
      E[k * Th + i] = e;
      s += e;
    }
    bound[k] = s;
  }

  std::vector<double> sines(Th);
  double sum = 0.0;
  for (int j = 1;; ++j) {
    if (j > ctl.j_max)
      throw Error(ErrorCode::SeriesNotConverged, "survival series did not reach term_tol within j_max terms");
    const double nu = j * pi / alpha;
    const double ang = std::sin(j * pi * w.theta0 / alpha);
    for (std::size_t i = 0; i < Th; ++i) sines[i] = std::sin(j * pi * tn[i] / alpha);
    const double closed = driftless ? alpha * 2.0 / (j * pi) : 0.0;  // |int sin| <= 2 alpha / (j pi)
    double term = 0.0, mag = 0.0;
    for (std::size_t k = 0; k < R; ++k) {
      const double lw = base[k] + log_bessel_i_scaled(nu, rn[k] * r0 / t);
      if (lw < -745.0) continue;
      const double wk = std::exp(lw);
      if (driftless) {
        mag += wk * closed;
        term += (j % 2 == 1) ? wk * closed : 0.0;
      } else {
        double inner = 0.0;
        const double* e = &E[k * Th];
        for (std::size_t i = 0; i < Th; ++i) inner += sines[i] * e[i];
        term += wk * inner;
        mag += wk * bound[k];
      }
    }
    sum += ang * term;
    if (mag < ctl.term_tol && nu * nu > z_max) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Exit direction and exit location
// ---------------------------------------------------------------------------

struct UpwardResult {
  double value = 0.0;          // P[first coordinate still positive at the exit time]
  double se = 0.0;             // Monte Carlo standard error (0 for the closed form)
  double unexited_fraction = 0.0;
  bool closed_form = false;
};

namespace detail {

struct PlanarExit {
  bool exited = false;
  bool through_second_axis = false;  // W2 reached zero first (first coordinate positive)
  double tau = 0.0;
  double w1 = 0.0;  // first coordinate at the exit (grid value)
};

// Planar BM run until it leaves the quadrant, with steps scaled to the
// current distance from the axes and a Brownian-bridge crossing test per
// coordinate between grid points.
inline PlanarExit simulate_planar_exit(const Vec2d& x, const Vec2d& mu, const WedgeParams& w, Rng& rng,
                                       NormalSampler& normal, const SeriesControl& ctl) {
  const double s1 = w.sigma1, s2 = w.sigma2, c = std::sqrt(1.0 - w.rho * w.rho);
  double y1 = x[0], y2 = x[1], t = 0.0;
  PlanarExit out;
  while (t < ctl.mc_T_cap) {
    const double d = std::min(y1 / s1, y2 / s2);
    double dt = std::max(ctl.mc_dt_min, ctl.mc_step_fraction * ctl.mc_step_fraction * d * d);
    dt = std::min(dt, ctl.mc_T_cap - t);
    const double sq = std::sqrt(dt);
    const double z1 = normal(rng), z2 = normal(rng);
    const double n1 = y1 + mu[0] * dt + s1 * sq * z1;
    const double n2 = y2 + mu[1] * dt + s2 * sq * (w.rho * z1 + c * z2);
    t += dt;
    if (n1 <= 0.0 || n2 <= 0.0) {
      bool second;
      if (n1 <= 0.0 && n2 <= 0.0) second = y2 / (y2 - n2) < y1 / (y1 - n1);
      else second = n2 <= 0.0;
      out = {true, second, t, std::max(0.0, second ? n1 : 0.0)};
      return out;
    }
    const double p1 = std::exp(-2.0 * y1 * n1 / (s1 * s1 * dt));
    const double p2 = std::exp(-2.0 * y2 * n2 / (s2 * s2 * dt));
    const bool c1 = uniform01(rng) < p1;
    const bool c2 = uniform01(rng) < p2;
    if (c1 || c2) {
      const bool second = c1 && c2 ? p2 > p1 : c2;
      out = {true, second, t, second ? 0.5 * (y1 + n1) : 0.0};
      return out;
    }
    y1 = n1;
    y2 = n2;
  }
  out.tau = t;
  return out;
}

}  // namespace detail

// Probability that the first exit happens through {W2 = 0}, i.e. that the
// cumulative bid queue is still positive when the ask side is exhausted
// (an upward price move). Exact for zero drift; Monte Carlo otherwise.
inline UpwardResult upward_probability(const Vec2d& x, const Vec2d& mu, const Mat2d& sigma,
                                       const SeriesControl& ctl = {}) {
  const WedgeParams w = wedge_params(x, mu, sigma);
  if (w.a_t > 0.0)
    throw Error(ErrorCode::HittingNotAlmostSure, "a_t > 0: the exit time is not almost surely finite");
  UpwardResult res;
  if (mu[0] == 0.0 && mu[1] == 0.0) {
    res.value = (w.alpha - w.theta0) / w.alpha;
    res.closed_form = true;
    return res;
  }
  Rng rng = make_rng(ctl.mc_seed, Stream::MonteCarlo, 0);
  NormalSampler normal;
  std::int64_t up = 0, unexited = 0;
  for (std::int64_t k = 0; k < ctl.mc_paths; ++k) {
    const auto e = detail::simulate_planar_exit(x, mu, w, rng, normal, ctl);
    if (!e.exited) ++unexited;
    else if (e.through_second_axis) ++up;
  }
  const double m = static_cast<double>(ctl.mc_paths);
  res.value = static_cast<double>(up) / m;
  res.se = std::sqrt(res.value * (1.0 - res.value) / m);
  res.unexited_fraction = static_cast<double>(unexited) / m;
  return res;
}

// Driftless density of W1 at the exit time on (0, inf). The exit point on
// {W2 = 0} sits at polar radius z / (sigma1 sin alpha), hence the scale factor
// inside the logarithm (it is 1 for a standard, uncorrelated BM).
inline double exit_location_density(const Vec2d& x, const Mat2d& sigma, double z) {
  if (!(z > 0.0)) return 0.0;
  const WedgeParams w = wedge_params(x, {0.0, 0.0}, sigma);
  const double pi = std::numbers::pi;
  const double scale = w.sigma1 * std::sin(w.alpha);
  const double k = pi / w.alpha;
  const double arg = k * std::log(std::sqrt(w.U) * scale / z);
  if (std::abs(arg) > 700.0) return 0.0;
  return std::sin(k * w.theta0) / (2.0 * z * w.alpha * (std::cosh(arg) - std::cos(k * w.theta0)));
}

// ---------------------------------------------------------------------------
// Number of price changes and price range
// ---------------------------------------------------------------------------

// Distribution of the summed reinitialization values h(R) = (R_bF + R_bG,
// R_aF + R_aG) as weighted points.
struct SummedReinitDist {
  std::vector<Vec2d> points;
  std::vector<double> weights;
};

inline SummedReinitDist point_mass_dist(const Vec4d& r) {
  return {{{r[0] + r[2], r[1] + r[3]}}, {1.0}};
}

// Each of the four components i.i.d. on the given support with given weights.
inline SummedReinitDist iid_component_dist(const std::vector<double>& support,
                                           const std::vector<double>& probs) {
  if (support.size() != probs.size() || support.empty())
    throw Error(ErrorCode::DomainError, "support and probabilities must have equal nonzero length");
  // Distribution of the sum of two independent components.
  std::vector<double> vals;
  std::vector<double> w;
  for (std::size_t i = 0; i < support.size(); ++i)
    for (std::size_t j = 0; j < support.size(); ++j) {
      const double v = support[i] + support[j];
      auto it = std::find_if(vals.begin(), vals.end(), [&](double u) { return std::abs(u - v) < 1e-12; });
      if (it == vals.end()) {
        vals.push_back(v);
        w.push_back(probs[i] * probs[j]);
      } else {
        w[static_cast<std::size_t>(it - vals.begin())] += probs[i] * probs[j];
      }
    }
  SummedReinitDist d;
  for (std::size_t i = 0; i < vals.size(); ++i)
    for (std::size_t j = 0; j < vals.size(); ++j) {
      d.points.push_back({vals[i], vals[j]});
      d.weights.push_back(w[i] * w[j]);
    }
  return d;
}

struct CountControl {
  int time_points = 200;   // convolution grid on [0, T]
  double tail_tol = 1e-10; // stop once P[K = k] and the remaining mass are below this
  SeriesControl series{};
};

struct CountDistribution {
  std::vector<double> pk;      // P[K(T) = k], k = 0..size-1
  std::vector<double> grid;    // time grid
  std::vector<double> G;       // distribution function of the inter-change time on the grid
  double residual = 0.0;       // P[K(T) >= pk.size()]
};

// Distribution function G of one inter-price-change time (start drawn from
// the summed reinit distribution) on an equidistant grid.
inline std::vector<double> interchange_cdf(const SummedReinitDist& dist, const Vec2d& mu_h, const Mat2d& sigma_h,
                                           const std::vector<double>& grid, const SeriesControl& ctl) {
  std::vector<double> G(grid.size(), 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] <= 0.0) continue;
    double s = 0.0;
    for (std::size_t p = 0; p < dist.points.size(); ++p)
      s += dist.weights[p] * survival_probability(dist.points[p], mu_h, sigma_h, grid[i], ctl);
    G[i] = std::clamp(1.0 - s, 0.0, 1.0);
  }
  // Enforce monotonicity against quadrature noise.
  for (std::size_t i = 1; i < G.size(); ++i) G[i] = std::max(G[i], G[i - 1]);
  return G;
}

// P[K(T) = k] from the renewal identity P[K(T) = k] = G^{*k}(T) - G^{*(k+1)}(T),
// with the convolutions evaluated by the trapezoid rule in the measure dG.
inline CountDistribution count_distribution_from_cdf(const std::vector<double>& grid, const std::vector<double>& G,
                                                     int k_max, double tail_tol) {
  CountDistribution out;
  out.grid = grid;
  out.G = G;
  const std::size_t N = grid.size();
  std::vector<double> dG(N, 0.0);
  for (std::size_t i = 1; i < N; ++i) dG[i] = G[i] - G[i - 1];
  std::vector<double> prev(N, 1.0);  // G^{*0} = 1 on [0, T]
  std::vector<double> cur = G;       // G^{*1}
  for (int k = 0;; ++k) {
    out.pk.push_back(std::max(0.0, prev[N - 1] - cur[N - 1]));
    out.residual = cur[N - 1];  // P[K(T) > k]
    if (k >= k_max || (k > 0 && cur[N - 1] < tail_tol)) break;
    std::vector<double> next(N, 0.0);
    for (std::size_t n = 1; n < N; ++n) {
      double s = 0.0;
      for (std::size_t i = 1; i <= n; ++i) s += 0.5 * (cur[n - i] + cur[n - i + 1]) * dG[i];
      next[n] = s;
    }
    prev = std::move(cur);
    cur = std::move(next);
  }
  return out;
}

inline CountDistribution price_change_count_dist(const SummedReinitDist& dist, const Vec2d& mu_h,
                                                 const Mat2d& sigma_h, double T, int k_max,
                                                 const CountControl& ctl = {}) {
  if (!(T > 0.0)) throw Error(ErrorCode::DomainError, "T must be positive");
  std::vector<double> grid(static_cast<std::size_t>(ctl.time_points) + 1);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = T * static_cast<double>(i) / ctl.time_points;
  const auto G = interchange_cdf(dist, mu_h, sigma_h, grid, ctl.series);
  return count_distribution_from_cdf(grid, G, k_max, ctl.tail_tol);
}

namespace detail {

// Inner sum of the range formula for a walk with up-probability p.
inline double range_delta(int n, int k, double p) {
  const double pi = std::numbers::pi;
  const double q = 1.0 - p, r = q / p, spq = std::sqrt(p * q), sr = std::sqrt(r);
  const double rn = std::pow(r, n);
  double tot = 0.0;
  for (int m = 1; 2 * m < n; ++m) {
    const double c = std::cos(m * pi / n), s = std::sin(m * pi / n);
    for (int e : {1, -1}) {
      const double num = 2.0 * std::pow(e * sr, n) + ((m % 2 == 1) ? 1.0 : -1.0) * (1.0 + rn);
      const double den = (1.0 - 2.0 * e * spq * c) * (1.0 - 2.0 * e * spq * c);
      const double sgn = ((k + 1 - n) % 2 == 0 || e == 1) ? 1.0 : -1.0;
      tot += num / den * sgn * std::pow(c, k - 1) * s * s;
    }
  }
  return tot / (2.0 * n * rn);
}

}  // namespace detail

// P[range of a k-step Bernoulli(p) walk <= n]; the range is max - min of
// the visited positions (so a k-step walk has range at most k).
inline double walk_range_cdf(int k, int n, double p) {
  if (k < 0 || n < 0) throw Error(ErrorCode::DomainError, "k and n must be nonnegative");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::DomainError, "p must lie in [0,1]");
  if (k <= n) return 1.0;
  if (p == 0.0 || p == 1.0) return 0.0;  // deterministic walk: range k > n
  if (n == 0) return 0.0;
  // The classical formula is stated for the number of distinct sites
  // (range + 1) and walks of k + 1 steps in its own indexing.
  const int N = n + 1, K = k + 1;
  const double q = 1.0 - p, r = q / p;
  const double v = std::pow(2.0 * std::sqrt(p * q), K + 1) * std::pow(r, N / 2.0) *
                   (std::sqrt(r) * detail::range_delta(N + 1, K, p) - detail::range_delta(N, K, p));
  return std::clamp(v, 0.0, 1.0);
}

// P[range = 1] for a k-step walk, k >= 1.
inline double walk_range_one(int k, double p) {
  if (k < 1) return 0.0;
  const double pq = p * (1.0 - p);
  return std::pow(pq, k / 2) * ((k % 2 == 0) ? 2.0 : 1.0);
}

struct RangeResult {
  std::vector<double> cdf;     // P[R(T) <= n delta], n = 0..n_max
  double p_up = 0.0;           // probability of an upward move
  double p_up_se = 0.0;
  CountDistribution counts;
};

inline std::vector<double> range_cdf_from_counts(const CountDistribution& counts, double p, int n_max) {
  std::vector<double> cdf(static_cast<std::size_t>(n_max) + 1, 0.0);
  for (int n = 0; n <= n_max; ++n) {
    double s = 0.0;
    for (std::size_t k = 0; k < counts.pk.size(); ++k)
      s += counts.pk[k] * walk_range_cdf(static_cast<int>(k), n, p);
    cdf[static_cast<std::size_t>(n)] = std::clamp(s, 0.0, 1.0);
  }
  return cdf;
}

// Distribution of the bid-price range over [0, T] (in ticks) when the
// initial queues and every reinitialization are i.i.d. from dist.
inline RangeResult range_distribution(const SummedReinitDist& dist, const Vec2d& mu_h, const Mat2d& sigma_h,
                                      double T, int n_max, const CountControl& ctl = {}) {
  RangeResult res;
  double var = 0.0;
  for (std::size_t i = 0; i < dist.points.size(); ++i) {
    const auto u = upward_probability(dist.points[i], mu_h, sigma_h, ctl.series);
    res.p_up += dist.weights[i] * u.value;
    var += dist.weights[i] * dist.weights[i] * u.se * u.se;
  }
  res.p_up_se = std::sqrt(var);
  res.counts = price_change_count_dist(dist, mu_h, sigma_h, T, 100000, ctl);
  res.cdf = range_cdf_from_counts(res.counts, res.p_up, n_max);
  return res;
}

// ---------------------------------------------------------------------------
// Interface PDE
// ---------------------------------------------------------------------------

struct InterfaceParams {
  double sigma1_sq = 0.0;
  double sigma2_sq = 0.0;
  double rho_cross = 0.0;  // rho * sigma1 * sigma2
  double mu1 = 0.0;
  double mu2 = 0.0;

  // From the national queue parameters of one book side.
  static InterfaceParams from_flow(double sigmaF_sq, double sigmaG_sq, double cov_FG, double muF, double muG) {
    InterfaceParams p;
    p.sigma1_sq = sigmaG_sq;
    p.sigma2_sq = sigmaG_sq + 4.0 * cov_FG + 4.0 * sigmaF_sq;
    p.rho_cross = sigmaG_sq + 2.0 * cov_FG;
    p.mu1 = muG;
    p.mu2 = muG + 2.0 * muF;
    return p;
  }
};

struct PdeControl {
  int n_space = 200;          // grid intervals per axis
  int n_time = 1000;          // time steps per unit time (at least 50 per solve)
  double domain_mult = 6.0;   // domain = eval point + domain_mult standard deviations
  bool explicit_scheme = false;
  bool richardson_check = false;
  double richardson_tol = 5e-3;
};

struct InterfaceSolution {
  double h = 0.0;
  int n = 0;
  std::vector<double> values;  // (n+1)^2 nodal values, row-major in z1

  double at(int i, int j) const { return values[static_cast<std::size_t>(i) * (n + 1) + j]; }

  double eval(double z1, double z2) const {
    const double L = h * n;
    z1 = std::clamp(z1, 0.0, L);
    z2 = std::clamp(z2, 0.0, L);
    const int i = std::min(n - 1, static_cast<int>(z1 / h));
    const int j = std::min(n - 1, static_cast<int>(z2 / h));
    const double u = z1 / h - i, v = z2 / h - j;
    return (1 - u) * (1 - v) * at(i, j) + u * (1 - v) * at(i + 1, j) + (1 - u) * v * at(i, j + 1) +
           u * v * at(i + 1, j + 1);
  }
};

namespace detail {

struct Coef {
  double a11, a22, a12, b1, b2;  // F_t = a11 F_11 + a22 F_22 + a12 F_12 + b1 F_1 + b2 F_2
};

inline Coef interface_coef(const InterfaceParams& p, int i, int j) {
  const Coef upper{p.sigma1_sq / 2.0, p.sigma2_sq / 2.0, p.rho_cross, p.mu1, p.mu2};  // z2 > z1
  const Coef lower{p.sigma2_sq / 2.0, p.sigma1_sq / 2.0, p.rho_cross, p.mu2, p.mu1};  // z2 < z1
  if (j > i) return upper;
  if (j < i) return lower;
  return {(upper.a11 + lower.a11) / 2.0, (upper.a22 + lower.a22) / 2.0, p.rho_cross,
          (upper.b1 + lower.b1) / 2.0, (upper.b2 + lower.b2) / 2.0};
}

// Discrete generator on interior nodes 1..n-1 (both axes), Dirichlet 0 at
// index 0 and zero-Neumann (mirror onto n-1) at index n.
inline Eigen::SparseMatrix<double> interface_generator(const InterfaceParams& p, int n, double h) {
  const int m = n - 1;
  auto id = [m](int i, int j) { return (i - 1) * m + (j - 1); };
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(m) * m * 9);
  const double h2 = h * h;
  for (int i = 1; i <= m; ++i) {
    for (int j = 1; j <= m; ++j) {
      const Coef c = interface_coef(p, i, j);
      const int row = id(i, j);
      auto add = [&](int a, int b, double v) {
        if (a <= 0 || b <= 0) return;  // Dirichlet zero on the axes
        if (a >= n) a = n - 1;         // far field: zero normal derivative
        if (b >= n) b = n - 1;
        trip.emplace_back(row, id(a, b), v);
      };
      add(i, j, -2.0 * c.a11 / h2 - 2.0 * c.a22 / h2);
      add(i + 1, j, c.a11 / h2);
      add(i - 1, j, c.a11 / h2);
      add(i, j + 1, c.a22 / h2);
      add(i, j - 1, c.a22 / h2);
      const double x = c.a12 / (4.0 * h2);
      add(i + 1, j + 1, x);
      add(i - 1, j - 1, x);
      add(i + 1, j - 1, -x);
      add(i - 1, j + 1, -x);
      // First derivatives: second-order central differences while the cell
      // Peclet number |b| h / (2a) is at most 1 (the stencil stays monotone),
      // upwinding otherwise. Upwinding everywhere adds |b| h / 2 of artificial
      // diffusion, which visibly lowers survival for strong drifts.
      auto drift = [&](double b, double a, int di, int dj) {
        if (std::abs(b) * h <= 2.0 * a) {
          add(i + di, j + dj, b / (2.0 * h));
          add(i - di, j - dj, -b / (2.0 * h));
        } else if (b >= 0) {
          add(i + di, j + dj, b / h);
          add(i, j, -b / h);
        } else {
          add(i, j, b / h);
          add(i - di, j - dj, -b / h);
        }
      };
      drift(c.b1, c.a11, 1, 0);
      drift(c.b2, c.a22, 0, 1);
    }
  }
  Eigen::SparseMatrix<double> A(m * m, m * m);
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

inline InterfaceSolution solve_interface(const InterfaceParams& p, double L, int n, double t,
                                         const PdeControl& ctl) {
  const double h = L / n;
  const int m = n - 1;
  const auto A = interface_generator(p, n, h);
  const int steps = std::max(50, static_cast<int>(std::ceil(ctl.n_time * t)));
  const double dt = t / steps;
  Eigen::VectorXd u = Eigen::VectorXd::Ones(m * m);
  if (ctl.explicit_scheme) {
    const double amax = std::max(p.sigma1_sq, p.sigma2_sq) / 2.0;
    const double bmax = std::max(std::abs(p.mu1), std::abs(p.mu2));
    const double limit = 1.0 / (4.0 * amax / (h * h) + std::abs(p.rho_cross) / (h * h) + 2.0 * bmax / h);
    if (dt > limit)
      throw Error(ErrorCode::CFLViolation, "explicit time step exceeds the stability limit");
    for (int s = 0; s < steps; ++s) u += dt * (A * u);
  } else {
    Eigen::SparseMatrix<double> I(m * m, m * m);
    I.setIdentity();
    Eigen::SparseMatrix<double> M = I - dt * A;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(M);
    if (lu.info() != Eigen::Success) throw Error(ErrorCode::InvariantViolation, "PDE factorization failed");
    for (int s = 0; s < steps; ++s) u = lu.solve(u);
  }
  InterfaceSolution sol;
  sol.h = h;
  sol.n = n;
  sol.values.assign(static_cast<std::size_t>(n + 1) * (n + 1), 0.0);
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= n; ++j) {
      const int a = std::min(i, m), b = std::min(j, m);
      sol.values[static_cast<std::size_t>(i) * (n + 1) + j] = std::clamp(u[(a - 1) * m + (b - 1)], 0.0, 1.0);
    }
  return sol;
}

inline double interface_domain(const InterfaceParams& p, double zmax, double t, const PdeControl& ctl) {
  const double sd = std::sqrt(std::max(p.sigma1_sq, p.sigma2_sq) * t);
  const double drift = std::max({0.0, p.mu1, p.mu2}) * t;
  return zmax + drift + ctl.domain_mult * sd;
}

}  // namespace detail

// Full solution grid on [0, L]^2 covering the point (z1, z2).
inline InterfaceSolution interface_solution(double z1_max, double z2_max, const InterfaceParams& ip, double t,
                                            const PdeControl& ctl = {}) {
  if (!(t > 0.0)) throw Error(ErrorCode::DomainError, "t must be positive");
  const double s = ip.rho_cross / std::sqrt(ip.sigma1_sq * ip.sigma2_sq);
  if (!(ip.sigma1_sq > 0.0) || !(ip.sigma2_sq > 0.0) || !(std::abs(s) <= 1.0))
    throw Error(ErrorCode::CovarianceNotPSD, "interface diffusion matrix is not positive semidefinite");
  const double L = detail::interface_domain(ip, std::max(z1_max, z2_max), t, ctl);
  return detail::solve_interface(ip, L, ctl.n_space, t, ctl);
}

// P[the importing direction persists beyond t] for national queues (xF, xG):
// the solution evaluated at (z1, z2) = (xG, 2 xF + xG).
inline double interface_survival(double xF, double xG, const InterfaceParams& ip, double t,
                                 const PdeControl& ctl = {}) {
  if (!(xF > 0.0) || !(xG > 0.0)) throw Error(ErrorCode::DomainError, "queue sizes must be positive");
  const double z1 = xG, z2 = 2.0 * xF + xG;
  const auto sol = interface_solution(z1, z2, ip, t, ctl);
  const double v = sol.eval(z1, z2);
  if (ctl.richardson_check) {
    PdeControl coarse = ctl;
    coarse.n_space = ctl.n_space / 2;
    coarse.n_time = ctl.n_time / 2;
    coarse.richardson_check = false;
    const double vc = interface_solution(z1, z2, ip, t, coarse).eval(z1, z2);
    // The coarse/fine difference bounds the fine-grid error conservatively.
    if (std::abs(v - vc) > ctl.richardson_tol)
      throw Error(ErrorCode::GridTooCoarse, "Richardson error estimate exceeds tolerance");
  }
  return v;
}

}  // namespace xborder
