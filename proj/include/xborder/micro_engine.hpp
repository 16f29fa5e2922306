#pragma once
// Event-by-event simulation of the cross-border order books: coupled
// (active) dynamics, decoupled national (inactive) dynamics, and the
// capacity-constrained regime-switching market.
//
// Units: queues and capacity in dv, prices in ticks.

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "core_model.hpp"
#include "order_flow.hpp"
#include "reinit.hpp"

namespace xborder {

using MicroReinit = ReinitSequence<std::int64_t>;

struct ZIndicator {
  int z_F = 0;
  int z_G = 0;
  bool operator==(const ZIndicator&) const = default;
};

enum class StepKind { Domestic, CrossBorder, PriceChange, PriceChangeCrossBorder };

struct StepInfo {
  StepKind kind = StepKind::Domestic;
  bool up = false;
  int country = -1;  // inactive price changes: 0 = F, 1 = G
};

struct PriceChangeRecord {
  std::int64_t step = 0;
  std::int64_t l = 0;
  bool up = false;
  int country = -1;  // -1 both (active), 0 F, 1 G
};

struct RegimeSwitchRecord {
  std::int64_t step = 0;
  bool to_inactive = true;
  ZIndicator z{};
  std::int64_t capacity = 0;
};

struct MicroSummary {
  std::int64_t price_changes = 0;
  std::int64_t price_changes_F = 0;
  std::int64_t price_changes_G = 0;
  std::int64_t min_B_F = 0, max_B_F = 0, min_B_G = 0, max_B_G = 0;
  std::int64_t switches = 0;          // active -> inactive transitions
  std::int64_t inactive_steps = 0;
  std::int64_t incidents = 0;         // logged anomalies (see engine docs)
  MarketState final_state{};
};

struct Trajectory {
  double dt = 1.0;
  std::vector<MarketState> states;          // one per step (k = 0..T_n), if recorded
  std::vector<Vec4i> cross_border_counters; // M^{i,I}_k per step, if recorded
  std::vector<PriceChangeRecord> price_changes;
  std::vector<ReinitRecord> reinit_values;
  std::vector<RegimeSwitchRecord> regime_switches;
  std::vector<std::string> incident_log;
  MicroSummary summary;
};

struct RunOptions {
  bool record_states = true;
  // Handoff at a capacity boundary: add the triggering order to the
  // reinitialized queues (literal reading). When false the order is consumed
  // by the price change only.
  bool handoff_adds_order = true;
};

// ---------------------------------------------------------------------------
// Single steps
// ---------------------------------------------------------------------------

inline void check_queues(const MarketState& s) {
  for (auto q : s.Q)
    if (q < 0) throw Error(ErrorCode::InvariantViolation, "negative queue size");
}

// Coupled-book step. Updates the cross-border counters M when supplied.
inline MarketState step_active(const MarketState& s, const OrderEvent& e, MicroReinit& reinit,
                               StepInfo* info = nullptr, Vec4i* M = nullptr) {
  MarketState n = s;
  const int idx = e.type();
  const int jdx = type_index(e.side, other(e.origin));
  StepInfo si;
  if (e.size > 0) {
    n.Q[idx] += 1;
  } else {
    const std::int64_t cum = s.Q[idx] + s.Q[jdx];
    const bool cross = s.Q[idx] == 0;
    if (cross && M) (*M)[idx] += 1;
    if (cum > 1) {
      if (!cross) {
        n.Q[idx] -= 1;
      } else {
        n.Q[jdx] -= 1;
        n.C += capacity_sign(idx) * e.size;
        si.kind = StepKind::CrossBorder;
      }
    } else if (cum == 1) {
      const bool up = e.side == Side::Ask;
      n.l = s.l + 1;
      n.B_F += up ? 1 : -1;
      n.B_G += up ? 1 : -1;
      n.Q = reinit(n.l, up, s.Q);
      if (cross) n.C += capacity_sign(idx) * e.size;
      si.kind = cross ? StepKind::PriceChangeCrossBorder : StepKind::PriceChange;
      si.up = up;
    } else {
      throw Error(ErrorCode::InvariantViolation, "market order against an empty cumulative queue");
    }
  }
  check_queues(n);
  if (info) *info = si;
  return n;
}

// National-book step: the order only affects its own country.
inline MarketState step_inactive(const MarketState& s, const OrderEvent& e, MicroReinit& reinit,
                                 StepInfo* info = nullptr) {
  MarketState n = s;
  const int idx = e.type();
  StepInfo si;
  if (e.size > 0) {
    n.Q[idx] += 1;
  } else if (s.Q[idx] > 1) {
    n.Q[idx] -= 1;
  } else {
    const bool up = e.side == Side::Ask;
    const int base = 2 * static_cast<int>(e.origin);
    n.l = s.l + 1;
    if (e.origin == Origin::F) n.B_F += up ? 1 : -1;
    else n.B_G += up ? 1 : -1;
    const Vec4i r = reinit(n.l, up, s.Q);
    n.Q[base] = r[base];
    n.Q[base + 1] = r[base + 1];
    si.kind = StepKind::PriceChange;
    si.up = up;
    si.country = static_cast<int>(e.origin);
  }
  check_queues(n);
  if (info) *info = si;
  return n;
}

// Z indicator of the event that drives the capacity out of its band:
// +1 if the country's ask queue is depleted, -1 if its bid queue is.
inline ZIndicator compute_z(const MarketState& s_pre, const OrderEvent& e) {
  ZIndicator z;
  for (int c = 0; c < 2; ++c) {
    std::int64_t b = s_pre.Q[2 * c];
    std::int64_t a = s_pre.Q[2 * c + 1];
    if (static_cast<int>(e.origin) == c) {
      if (e.side == Side::Bid) b += e.size;
      else a += e.size;
    }
    int v = 0;
    if (b >= 0 && a == -1) v = 1;
    else if (b == -1 && a >= 0) v = -1;
    (c == 0 ? z.z_F : z.z_G) = v;
  }
  return z;
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

namespace detail {

class TrajectoryBuilder {
 public:
  TrajectoryBuilder(const MarketState& s0, std::size_t steps, const RunOptions& opt, double dt)
      : opt_(opt) {
    t_.dt = dt;
    if (opt_.record_states) {
      t_.states.reserve(steps + 1);
      t_.cross_border_counters.reserve(steps + 1);
    }
    auto& sm = t_.summary;
    sm.min_B_F = sm.max_B_F = s0.B_F;
    sm.min_B_G = sm.max_B_G = s0.B_G;
    record(s0);
  }

  void record(const MarketState& s) {
    auto& sm = t_.summary;
    sm.min_B_F = std::min(sm.min_B_F, s.B_F);
    sm.max_B_F = std::max(sm.max_B_F, s.B_F);
    sm.min_B_G = std::min(sm.min_B_G, s.B_G);
    sm.max_B_G = std::max(sm.max_B_G, s.B_G);
    if (s.regime == Regime::Inactive) ++sm.inactive_steps;
    sm.final_state = s;
    if (opt_.record_states) {
      t_.states.push_back(s);
      t_.cross_border_counters.push_back(M_);
    }
  }

  void price_change(std::int64_t k, const MarketState& s, bool up, int country) {
    t_.price_changes.push_back({k, s.l, up, country});
    ReinitRecord rr;
    rr.l = s.l;
    rr.up = up;
    for (int i = 0; i < 4; ++i) rr.value[i] = static_cast<double>(s.Q[i]);
    t_.reinit_values.push_back(rr);
    auto& sm = t_.summary;
    ++sm.price_changes;
    if (country <= 0) ++sm.price_changes_F;
    if (country != 0) ++sm.price_changes_G;
  }

  Vec4i& M() { return M_; }
  Trajectory& get() { return t_; }

 private:
  RunOptions opt_;
  Trajectory t_;
  Vec4i M_{};
};

}  // namespace detail

inline Trajectory run_active(const MarketState& s0, const OrderStream& stream, MicroReinit& reinit,
                             const RunOptions& opt = {}, double dt = 1.0) {
  detail::TrajectoryBuilder tb(s0, stream.size(), opt, dt);
  MarketState s = s0;
  s.regime = Regime::Active;
  for (std::size_t k = 0; k < stream.size(); ++k) {
    StepInfo info;
    s = step_active(s, stream[k], reinit, &info, &tb.M());
    if (info.kind == StepKind::PriceChange || info.kind == StepKind::PriceChangeCrossBorder)
      tb.price_change(static_cast<std::int64_t>(k + 1), s, info.up, -1);
    tb.record(s);
  }
  return std::move(tb.get());
}

inline Trajectory run_inactive(const MarketState& s0, const OrderStream& stream, MicroReinit& reinit,
                               const RunOptions& opt = {}, double dt = 1.0) {
  detail::TrajectoryBuilder tb(s0, stream.size(), opt, dt);
  MarketState s = s0;
  s.regime = Regime::Inactive;
  for (std::size_t k = 0; k < stream.size(); ++k) {
    StepInfo info;
    s = step_inactive(s, stream[k], reinit, &info);
    if (info.kind == StepKind::PriceChange)
      tb.price_change(static_cast<std::int64_t>(k + 1), s, info.up, info.country);
    tb.record(s);
  }
  return std::move(tb.get());
}

// Regime-switching market. Orders are requested from `next(regime)` so the
// flow may depend on the current regime.
template <class NextOrder>
Trajectory run_regime_switching(const MarketState& s0, std::int64_t steps, NextOrder&& next,
                                MicroReinit& reinit, const ValidatedParams& vp,
                                const RunOptions& opt = {}) {
  if (s0.B_F != s0.B_G)
    throw Error(ErrorCode::InvariantViolation, "regime-switching run must start with equal prices");
  detail::TrajectoryBuilder tb(s0, static_cast<std::size_t>(steps), opt, vp.dt);
  const std::int64_t kmin = vp.kappa_minus_units;
  const std::int64_t kplus = vp.kappa_plus_units;
  MarketState s = s0;
  s.regime = Regime::Active;
  auto& traj = tb.get();

  auto handoff_to_inactive = [&](const OrderEvent& e, std::int64_t k) {
    const ZIndicator z = compute_z(s, e);
    if ((z.z_F != 0) == (z.z_G != 0)) {
      traj.incident_log.push_back("step " + std::to_string(k) +
                                  ": Z indicator has " +
                                  ((z.z_F != 0) ? "two" : "no") + " nonzero components");
      ++traj.summary.incidents;
      throw Error(ErrorCode::InvariantViolation, "unexpected Z indicator at a regime switch");
    }
    const MarketState pre = s;
    const int c = z.z_F != 0 ? 0 : 1;
    const int zc = z.z_F != 0 ? z.z_F : z.z_G;
    const bool up = zc > 0;
    s.l = pre.l + 1;
    const Vec4i r = reinit(s.l, up, pre.Q);
    if (c == 0) s.B_F += zc;
    else s.B_G += zc;
    s.Q[2 * c] = r[2 * c];
    s.Q[2 * c + 1] = r[2 * c + 1];
    if (opt.handoff_adds_order) s.Q[e.type()] += e.size;
    s.regime = Regime::Inactive;
    check_queues(s);
    tb.price_change(k, s, up, c);
    traj.regime_switches.push_back({k, true, z, s.C});
    ++traj.summary.switches;
  };

  for (std::int64_t k = 1; k <= steps; ++k) {
    const OrderEvent e = next(s.regime);
    if (s.regime == Regime::Inactive && s.B_F == s.B_G) {
      // Prices coincided after the previous event: re-couple the books and
      // process the current order as an ordinary event of the coupled book
      // (including a price change if it depletes a cumulative queue).
      s.regime = Regime::Active;
      traj.regime_switches.push_back({k, false, {}, s.C});
    }
    if (s.regime == Regime::Active) {
      const int idx = e.type();
      const bool cross = e.size < 0 && s.Q[idx] == 0;
      const std::int64_t c_new = cross ? s.C + capacity_sign(idx) * e.size : s.C;
      if (cross && (c_new > kplus || c_new < -kmin)) {
        handoff_to_inactive(e, k);
      } else {
        StepInfo info;
        s = step_active(s, e, reinit, &info, &tb.M());
        if (info.kind == StepKind::PriceChange || info.kind == StepKind::PriceChangeCrossBorder)
          tb.price_change(k, s, info.up, -1);
      }
    } else {
      StepInfo info;
      s = step_inactive(s, e, reinit, &info);
      if (info.kind == StepKind::PriceChange) tb.price_change(k, s, info.up, info.country);
    }
    tb.record(s);
  }
  return std::move(traj);
}

inline Trajectory run_regime_switching(const MarketState& s0, const OrderStream& stream,
                                       MicroReinit& reinit, const ValidatedParams& vp,
                                       const RunOptions& opt = {}) {
  std::size_t k = 0;
  return run_regime_switching(
      s0, static_cast<std::int64_t>(stream.size()), [&](Regime) { return stream[k++]; }, reinit, vp,
      opt);
}

// ---------------------------------------------------------------------------
// CSV export
// ---------------------------------------------------------------------------

inline void write_trajectory_csv(std::ostream& os, const Trajectory& t, double dv, double delta) {
  os << "t,Q_bF,Q_aF,Q_bG,Q_aG,B_F,B_G,C,regime\n";
  os.precision(9);
  for (std::size_t k = 0; k < t.states.size(); ++k) {
    const auto& s = t.states[k];
    os << static_cast<double>(k) * t.dt;
    for (auto q : s.Q) os << ',' << static_cast<double>(q) * dv;
    os << ',' << static_cast<double>(s.B_F) * delta << ',' << static_cast<double>(s.B_G) * delta
       << ',' << static_cast<double>(s.C) * dv << ',' << (s.regime == Regime::Active ? "active" : "inactive")
       << '\n';
  }
}

inline void write_events_csv(std::ostream& os, const Trajectory& t) {
  os << "t,event,detail,l\n";
  os.precision(9);
  for (const auto& p : t.price_changes) {
    os << static_cast<double>(p.step) * t.dt << ",price_change,"
       << (p.country < 0 ? "both" : (p.country == 0 ? "F" : "G")) << (p.up ? "_up" : "_down") << ','
       << p.l << '\n';
  }
  for (const auto& r : t.regime_switches) {
    os << static_cast<double>(r.step) * t.dt << ','
       << (r.to_inactive ? "to_inactive" : "to_active") << ",zF=" << r.z.z_F << ";zG=" << r.z.z_G
       << ",\n";
  }
}

}  // namespace xborder
