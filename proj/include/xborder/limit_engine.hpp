#pragma once
// Diffusion-limit dynamics: the path maps applied to discretized linear
// Brownian motion x0 + mu t + Sigma^{1/2} B(t).
//
// Hitting is detected on the grid (no bridge correction in the dynamics).
// As a diagnostic, the active engine can also report the Brownian-bridge
// probability that the summed bid / ask paths stayed positive between grid
// points, which gives a bias-corrected survival estimator.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "core_model.hpp"
#include "micro_engine.hpp"
#include "path_maps.hpp"
#include "random.hpp"
#include "reinit.hpp"

namespace xborder {

struct BmSpec {
  Vec4d x0{1.0, 1.0, 1.0, 1.0};
  Vec4d mu{};
  Mat4d sigma{};
  double grid_dt = 1e-4;
};

// Symmetric square root of a PSD matrix.
inline Eigen::Matrix4d psd_sqrt(const Mat4d& s) {
  Eigen::Matrix4d m;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) m(i, j) = s[i][j];
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff()))
    throw Error(ErrorCode::CovarianceNotPSD, "covariance matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(m);
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < -1e-12 * scale)
    throw Error(ErrorCode::CovarianceNotPSD, "covariance matrix has a negative eigenvalue");
  const Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

// Gaussian increment generator with mean mu*dt and covariance Sigma*dt.
class BmIncrements {
 public:
  BmIncrements(const BmSpec& spec, Rng rng) : rng_(std::move(rng)), dt_(spec.grid_dt) {
    if (!(spec.grid_dt > 0.0)) throw Error(ErrorCode::DomainError, "grid_dt must be positive");
    const Eigen::Matrix4d a = psd_sqrt(spec.sigma) * std::sqrt(dt_);
    for (int i = 0; i < 4; ++i) {
      drift_[i] = spec.mu[i] * dt_;
      for (int j = 0; j < 4; ++j) a_[i][j] = a(i, j);
    }
    for (int j = 0; j < 4; ++j) {
      active_[j] = false;
      for (int i = 0; i < 4; ++i) active_[j] = active_[j] || a_[i][j] != 0.0;
    }
  }

  Vec4d next() {
    Vec4d z{};
    for (int j = 0; j < 4; ++j) z[j] = active_[j] ? normal_(rng_) : 0.0;
    Vec4d d = drift_;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) d[i] += a_[i][j] * z[j];
    return d;
  }

  double dt() const { return dt_; }

 private:
  Rng rng_;
  NormalSampler normal_;
  double dt_;
  Vec4d drift_{};
  Mat4d a_{};
  std::array<bool, 4> active_{};
};

inline std::int64_t grid_steps(double T, double dt) {
  const double s = T / dt;
  const auto n = static_cast<std::int64_t>(std::llround(s));
  if (std::abs(s - static_cast<double>(n)) > 1e-6 * std::max(1.0, s))
    throw Error(ErrorCode::HorizonNotMultipleOfDt, "horizon is not a multiple of grid_dt");
  return n;
}

inline GridPath<double, 4> sample_bm_path(std::uint64_t seed, const BmSpec& spec, double T,
                                          std::uint64_t replication = 0) {
  BmIncrements inc(spec, make_rng(seed, Stream::Brownian, replication));
  const std::int64_t n = grid_steps(T, spec.grid_dt);
  GridPath<double, 4> p{spec.grid_dt, {}, Interp::GridSamples};
  p.values.reserve(static_cast<std::size_t>(n + 1));
  Vec4d x = spec.x0;
  p.values.push_back(x);
  for (std::int64_t k = 0; k < n; ++k) {
    const Vec4d d = inc.next();
    for (int i = 0; i < 4; ++i) x[i] += d[i];
    p.values.push_back(x);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Limit simulation
// ---------------------------------------------------------------------------

struct LimitState {
  std::int64_t B_F = 0;  // ticks
  std::int64_t B_G = 0;
  Vec4d Q{};
  double C = 0.0;
  Regime regime = Regime::Active;
  std::int64_t l = 0;
};

struct LimitPriceChange {
  double t = 0.0;
  std::int64_t l = 0;
  bool up = false;
  int country = -1;  // -1 both, 0 F, 1 G
};

struct LimitSwitch {
  double t = 0.0;
  bool to_inactive = true;
  ZIndicator z{};
  double C = 0.0;
};

struct LimitSummary {
  std::int64_t price_changes = 0;
  std::int64_t price_changes_F = 0;
  std::int64_t price_changes_G = 0;
  std::int64_t min_B_F = 0, max_B_F = 0, min_B_G = 0, max_B_G = 0;
  std::int64_t switches = 0;
  std::int64_t ties = 0;  // logged coincidences (simultaneous hits / boundary + price change)
  double first_price_change = std::numeric_limits<double>::infinity();
  bool first_up = false;
  // Product over grid steps of the bridge probabilities that neither summed
  // side crossed zero between grid points (active regime, up to the first
  // price change or T). Zero when a grid hit occurred.
  double bridge_survival = 1.0;
  LimitState final_state{};
};

struct LimitTrajectory {
  double dt = 0.0;
  std::vector<double> times;
  std::vector<LimitState> states;
  std::vector<LimitPriceChange> price_changes;
  std::vector<LimitSwitch> regime_switches;
  LimitSummary summary;
};

struct LimitOptions {
  bool record_states = true;
  std::int64_t record_every = 1;
  std::int64_t stop_after_price_changes = -1;  // stop early once this many changes occurred
  bool bridge_weight = false;
};

enum class LimitMode { Active, Inactive, Switching };

namespace detail {

class LimitSimulator {
 public:
  LimitSimulator(const LimitState& s0, const BmSpec& spec, ReinitSequence<double>& reinit,
                 double kappa_minus, double kappa_plus, LimitMode mode, const LimitOptions& opt)
      : spec_(spec), reinit_(reinit), kmin_(kappa_minus), kplus_(kappa_plus), mode_(mode), opt_(opt) {
    s_ = s0;
    s_.Q = spec.x0;
    if (mode == LimitMode::Inactive) s_.regime = Regime::Inactive;
    if (mode == LimitMode::Active) s_.regime = Regime::Active;
    if (s_.regime == Regime::Active && s_.B_F != s_.B_G)
      throw Error(ErrorCode::InvariantViolation, "active regime requires equal prices");
    sum_var_[0] = spec.sigma[0][0] + spec.sigma[2][2] + 2 * spec.sigma[0][2];
    sum_var_[1] = spec.sigma[1][1] + spec.sigma[3][3] + 2 * spec.sigma[1][3];
    enter_regime(s_.regime);
    auto& sm = traj_.summary;
    sm.min_B_F = sm.max_B_F = s_.B_F;
    sm.min_B_G = sm.max_B_G = s_.B_G;
    traj_.dt = spec.grid_dt;
  }

  LimitTrajectory run(BmIncrements& inc, std::int64_t steps) {
    record(0, true);
    for (std::int64_t k = 1; k <= steps; ++k) {
      const Vec4d dw = inc.next();
      t_ = static_cast<double>(k) * spec_.grid_dt;
      if (s_.regime == Regime::Active) step_active(dw);
      else step_inactive(dw);
      record(k, k == steps);
      if (opt_.stop_after_price_changes >= 0 &&
          traj_.summary.price_changes >= opt_.stop_after_price_changes)
        break;
    }
    traj_.summary.final_state = s_;
    return std::move(traj_);
  }

 private:
  auto reinit_fn() {
    return [this](std::int64_t l, bool up, const Vec4d& q_pre) { return reinit_(l, up, q_pre); };
  }

  void enter_regime(Regime r) {
    s_.regime = r;
    if (r == Regime::Active) {
      act_ = ActiveMapEngine<double>(s_.Q);
      act_.set_count(s_.l);
      seg_c0_ = s_.C;
    } else {
      inact_ = InactiveMapEngine<double>(s_.Q);
      inact_.set_count(s_.l);
    }
  }

  void price_change(bool up, int country) {
    traj_.price_changes.push_back({t_, s_.l, up, country});
    auto& sm = traj_.summary;
    if (sm.price_changes == 0) {
      sm.first_price_change = t_;
      sm.first_up = up;
    }
    ++sm.price_changes;
    if (country <= 0) ++sm.price_changes_F;
    if (country != 0) ++sm.price_changes_G;
  }

  void step_active(const Vec4d& dw) {
    const Vec4d q_pre = s_.Q;
    const bool bounded = mode_ == LimitMode::Switching;
    ActiveMapEngine<double> trial = act_;
    const auto st = trial.step(dw, reinit_fn());
    const double c_new = seg_c0_ + trial.capacity();
    if (bounded && (c_new > kplus_ || c_new < -kmin_)) {
      if (st.price_change) ++traj_.summary.ties;
      handoff(q_pre, dw, st, c_new > kplus_);
      return;
    }
    if (opt_.bridge_weight && traj_.summary.price_changes == 0) {
      const double hb0 = q_pre[0] + q_pre[2], ha0 = q_pre[1] + q_pre[3];
      const double hb1 = hb0 + dw[0] + dw[2], ha1 = ha0 + dw[1] + dw[3];
      auto stay = [&](double a, double b, double v) {
        if (a <= 0.0 || b <= 0.0) return 0.0;
        if (v <= 0.0) return 1.0;
        return 1.0 - std::exp(-2.0 * a * b / (v * spec_.grid_dt));
      };
      traj_.summary.bridge_survival *= stay(hb0, hb1, sum_var_[0]) * stay(ha0, ha1, sum_var_[1]);
    }
    act_ = trial;
    s_.Q = act_.q();
    s_.C = seg_c0_ + act_.capacity();
    if (st.price_change) {
      s_.l = act_.count();
      const int d = st.up ? 1 : -1;
      s_.B_F += d;
      s_.B_G += d;
      price_change(st.up, -1);
    }
  }

  // Capacity leaves its band: clamp, move the triggering country's price,
  // reinitialize its queue pair, let the other country continue with the raw
  // increment, and switch to national books.
  void handoff(const Vec4d& q_pre, const Vec4d& dw, const ActiveStep<double>& st, bool upper) {
    int idx = -1;
    double best = 0.0;
    for (int i = 0; i < 4; ++i) {
      const double contrib = -capacity_sign(i) * st.push[i];
      const double outward = upper ? contrib : -contrib;
      if (st.push[i] > 0.0 && outward > best) { best = outward; idx = i; }
    }
    if (idx < 0) throw Error(ErrorCode::InvariantViolation, "capacity exit without a cross-border regulator increment");
    const int c = static_cast<int>(origin_of(idx));
    const bool up = side_of(idx) == Side::Ask;
    ZIndicator z;
    (c == 0 ? z.z_F : z.z_G) = up ? 1 : -1;
    s_.C = upper ? kplus_ : -kmin_;
    s_.l += 1;
    const Vec4d r = reinit_(s_.l, up, q_pre);
    Vec4d q = q_pre;
    for (int i = 0; i < 4; ++i) q[i] += dw[i];
    q[2 * c] = r[2 * c];
    q[2 * c + 1] = r[2 * c + 1];
    if (c == 0) s_.B_F += up ? 1 : -1;
    else s_.B_G += up ? 1 : -1;
    s_.Q = q;
    price_change(up, c);
    traj_.regime_switches.push_back({t_, true, z, s_.C});
    ++traj_.summary.switches;
    enter_regime(Regime::Inactive);
    // The continuing country may already sit at zero.
    apply_inactive_events(inact_.resolve(q_pre, reinit_fn()));
    s_.Q = inact_.q();
    maybe_recouple();
  }

  void apply_inactive_events(const std::vector<InactiveEvent>& ev) {
    for (const auto& e : ev) {
      const int c = e.component / 2;
      if (c == 0) s_.B_F += e.up ? 1 : -1;
      else s_.B_G += e.up ? 1 : -1;
      s_.l = e.l;
      price_change(e.up, c);
    }
  }

  void maybe_recouple() {
    if (mode_ != LimitMode::Switching) return;
    if (std::abs(static_cast<double>(s_.B_F - s_.B_G)) < 0.5) {
      traj_.regime_switches.push_back({t_, false, {}, s_.C});
      enter_regime(Regime::Active);
    }
  }

  void step_inactive(const Vec4d& dw) {
    apply_inactive_events(inact_.step(dw, reinit_fn()));
    s_.Q = inact_.q();
    maybe_recouple();
  }

  void record(std::int64_t k, bool last) {
    auto& sm = traj_.summary;
    sm.min_B_F = std::min(sm.min_B_F, s_.B_F);
    sm.max_B_F = std::max(sm.max_B_F, s_.B_F);
    sm.min_B_G = std::min(sm.min_B_G, s_.B_G);
    sm.max_B_G = std::max(sm.max_B_G, s_.B_G);
    if (opt_.record_states && (k % std::max<std::int64_t>(1, opt_.record_every) == 0 || last)) {
      traj_.times.push_back(static_cast<double>(k) * spec_.grid_dt);
      traj_.states.push_back(s_);
    }
  }

  BmSpec spec_;
  ReinitSequence<double>& reinit_;
  double kmin_, kplus_;
  LimitMode mode_;
  LimitOptions opt_;
  LimitState s_;
  ActiveMapEngine<double> act_;
  InactiveMapEngine<double> inact_;
  double seg_c0_ = 0.0;
  double t_ = 0.0;
  std::array<double, 2> sum_var_{};
  LimitTrajectory traj_;
};

inline LimitTrajectory simulate_limit(const LimitState& s0, std::uint64_t seed, const BmSpec& spec,
                                      const ReinitSpec<double>& r, double kappa_minus,
                                      double kappa_plus, double T, LimitMode mode,
                                      const LimitOptions& opt, std::uint64_t replication) {
  for (double x : spec.x0)
    if (!(x > 0.0)) throw Error(ErrorCode::DomainError, "initial queues must be strictly positive");
  BmIncrements inc(spec, make_rng(seed, Stream::Brownian, replication));
  ReinitSequence<double> reinit(r, seed, replication);
  LimitSimulator sim(s0, spec, reinit, kappa_minus, kappa_plus, mode, opt);
  return sim.run(inc, grid_steps(T, spec.grid_dt));
}

}  // namespace detail

// Initial queues are taken from spec.x0; s0 provides prices, capacity, l.
inline LimitTrajectory simulate_active_limit(const LimitState& s0, std::uint64_t seed, const BmSpec& spec,
                                             const ReinitSpec<double>& r, double T,
                                             const LimitOptions& opt = {}, std::uint64_t replication = 0) {
  return detail::simulate_limit(s0, seed, spec, r, kInfiniteCapacity, kInfiniteCapacity, T,
                                LimitMode::Active, opt, replication);
}

inline LimitTrajectory simulate_inactive_limit(const LimitState& s0, std::uint64_t seed,
                                               const BmSpec& spec, const ReinitSpec<double>& r, double T,
                                               const LimitOptions& opt = {},
                                               std::uint64_t replication = 0) {
  return detail::simulate_limit(s0, seed, spec, r, kInfiniteCapacity, kInfiniteCapacity, T,
                                LimitMode::Inactive, opt, replication);
}

inline LimitTrajectory simulate_regime_switching_limit(const LimitState& s0, std::uint64_t seed,
                                                       const BmSpec& spec, const ReinitSpec<double>& r,
                                                       double kappa_minus, double kappa_plus, double T,
                                                       const LimitOptions& opt = {},
                                                       std::uint64_t replication = 0) {
  return detail::simulate_limit(s0, seed, spec, r, kappa_minus, kappa_plus, T, LimitMode::Switching,
                                opt, replication);
}

inline void write_limit_trajectory_csv(std::ostream& os, const LimitTrajectory& t, double delta) {
  os << "t,Q_bF,Q_aF,Q_bG,Q_aG,B_F,B_G,C,regime\n";
  os.precision(9);
  for (std::size_t k = 0; k < t.states.size(); ++k) {
    const auto& s = t.states[k];
    os << t.times[k];
    for (auto q : s.Q) os << ',' << q;
    os << ',' << static_cast<double>(s.B_F) * delta << ',' << static_cast<double>(s.B_G) * delta << ','
       << s.C << ',' << (s.regime == Regime::Active ? "active" : "inactive") << '\n';
  }
}

}  // namespace xborder
