#pragma once
// Regulated-path functionals on uniform grids: one-dimensional Skorokhod
// reflection, the sum-preserving reflection g with absorption at the origin,
// its regulator gbar, hitting times, the composite maps G / Ghat, and the
// active / inactive queue, capacity and price maps.
//
// Every map is implemented as a streaming state machine (step(increment))
// with full-path wrappers on top. The same code runs on integer paths (micro
// scale, exact) and on floating-point Brownian paths (limit scale).

#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "core_model.hpp"
#include "order_flow.hpp"

namespace xborder {

template <class T>
using Vec2 = std::array<T, 2>;
template <class T>
using Vec4 = std::array<T, 4>;

// ---------------------------------------------------------------------------
// One-dimensional Skorokhod map: z = w + l, l_t = sup_{s<=t} (-w_s)^+.
// ---------------------------------------------------------------------------

template <class T>
std::pair<GridPath<T, 1>, GridPath<T, 1>> skorokhod1d(const GridPath<T, 1>& w) {
  GridPath<T, 1> z{w.dt, {}, w.interp};
  GridPath<T, 1> l{w.dt, {}, w.interp};
  z.values.reserve(w.values.size());
  l.values.reserve(w.values.size());
  T reg = T(0);
  for (const auto& v : w.values) {
    if (-v[0] > reg) reg = -v[0];
    l.values.push_back({reg});
    z.values.push_back({v[0] + reg});
  }
  return {z, l};
}

// ---------------------------------------------------------------------------
// Sum-preserving reflection with absorption (streaming).
//
// Each increment is applied to the current state; a negative component is
// pushed back to 0 and the push is subtracted from the other component
// (reflection matrix R = [[1,-1],[-1,1]]). When the sum becomes <= 0 the path
// is absorbed at (0,0) and the regulators freeze. Before absorbing, the part
// of the final push that the other component can still serve is counted, so
// that the regulators count every cross-border execution at micro scale.
// ---------------------------------------------------------------------------

template <class T>
class GReflector {
 public:
  GReflector() = default;
  explicit GReflector(Vec2<T> w0) { reset(w0); }

  void reset(Vec2<T> w0) {
    g_ = w0;
    L_ = {T(0), T(0)};
    last_push_ = {T(0), T(0)};
    absorbed_ = false;
    zero_comp_ = -1;
    reflection_events_ = 0;
    new_reflection_ = false;
    if (w0[0] + w0[1] <= T(0)) {
      absorbed_ = true;
      g_ = {T(0), T(0)};
    } else if (w0[0] <= T(0)) {
      zero_comp_ = 0;
    } else if (w0[1] <= T(0)) {
      zero_comp_ = 1;
    }
  }

  // Returns true if absorption happens at this step.
  bool step(const Vec2<T>& dw) {
    last_push_ = {T(0), T(0)};
    new_reflection_ = false;
    if (absorbed_) return false;
    Vec2<T> y{g_[0] + dw[0], g_[1] + dw[1]};
    const T s = y[0] + y[1];
    if (s <= T(0)) {
      for (int i = 0; i < 2; ++i) {
        const int j = 1 - i;
        if (y[i] < T(0) && y[j] > T(0)) {
          const T p = (-y[i] < y[j]) ? -y[i] : y[j];
          L_[i] += p;
          last_push_[i] = p;
          note_reflection(i);
        }
      }
      absorbed_ = true;
      g_ = {T(0), T(0)};
      return true;
    }
    for (int i = 0; i < 2; ++i) {
      if (y[i] < T(0)) {
        const T p = -y[i];
        y[i] = T(0);
        y[1 - i] -= p;
        L_[i] += p;
        last_push_[i] = p;
        note_reflection(i);
      }
    }
    g_ = y;
    if (g_[0] <= T(0)) zero_comp_ = 0;
    else if (g_[1] <= T(0)) zero_comp_ = 1;
    return false;
  }

  const Vec2<T>& g() const { return g_; }
  const Vec2<T>& regulators() const { return L_; }
  const Vec2<T>& last_push() const { return last_push_; }
  bool absorbed() const { return absorbed_; }
  bool new_reflection() const { return new_reflection_; }
  std::int64_t reflection_events() const { return reflection_events_; }

 private:
  void note_reflection(int i) {
    if (zero_comp_ != i || reflection_events_ == 0) {
      new_reflection_ = true;
      ++reflection_events_;
    }
    zero_comp_ = i;
  }

  Vec2<T> g_{};
  Vec2<T> L_{};
  Vec2<T> last_push_{};
  bool absorbed_ = false;
  int zero_comp_ = -1;
  std::int64_t reflection_events_ = 0;
  bool new_reflection_ = false;
};

struct ReflectionRecordBase {
  std::vector<std::size_t> reflection_times;  // grid indices at which a new reflection phase starts
  std::optional<std::size_t> absorbed_at;     // grid index of absorption
};

template <class T>
struct ReflectionRecord : ReflectionRecordBase {
  GridPath<T, 2> regulators;  // gbar
};

template <class T>
struct GMapResult {
  GridPath<T, 2> g;
  ReflectionRecord<T> rec;
};

template <class T>
GMapResult<T> g_map(const GridPath<T, 2>& w) {
  GMapResult<T> out;
  out.g = {w.dt, {}, w.interp};
  out.rec.regulators = {w.dt, {}, w.interp};
  if (w.values.empty()) return out;
  GReflector<T> r(w.values[0]);
  if (r.absorbed()) out.rec.absorbed_at = 0;
  out.g.values.push_back(r.g());
  out.rec.regulators.values.push_back(r.regulators());
  for (std::size_t k = 1; k < w.values.size(); ++k) {
    const Vec2<T> dw{w.values[k][0] - w.values[k - 1][0], w.values[k][1] - w.values[k - 1][1]};
    if (r.step(dw)) out.rec.absorbed_at = k;
    if (r.new_reflection()) out.rec.reflection_times.push_back(k);
    out.g.values.push_back(r.g());
    out.rec.regulators.values.push_back(r.regulators());
  }
  return out;
}

template <class T>
GridPath<T, 2> gbar_map(const GridPath<T, 2>& w) {
  return g_map(w).rec.regulators;
}

// ---------------------------------------------------------------------------
// Hitting times of the summed bid / ask components.
// ---------------------------------------------------------------------------

struct HittingTimes {
  std::size_t tau_b = 0;  // grid index; equals steps when not hit
  std::size_t tau_a = 0;
  std::size_t tau = 0;
  bool hit_b = false;
  bool hit_a = false;
};

template <class T>
HittingTimes hitting_maps(const GridPath<T, 4>& q) {
  HittingTimes h;
  const std::size_t N = q.steps();
  h.tau_b = h.tau_a = N;
  for (std::size_t k = 0; k < q.values.size(); ++k) {
    const auto& v = q.values[k];
    if (!h.hit_b && v[0] + v[2] <= T(0)) { h.hit_b = true; h.tau_b = k; }
    if (!h.hit_a && v[1] + v[3] <= T(0)) { h.hit_a = true; h.tau_a = k; }
    if (h.hit_a && h.hit_b) break;
  }
  h.tau = std::min(h.tau_a, h.tau_b);
  return h;
}

namespace detail {
template <class T>
GridPath<T, 2> project(const GridPath<T, 4>& q, int i, int j) {
  GridPath<T, 2> p{q.dt, {}, q.interp};
  p.values.reserve(q.values.size());
  for (const auto& v : q.values) p.values.push_back({v[i], v[j]});
  return p;
}
}  // namespace detail

// G(w) = (g(bid)_1, g(ask)_1, g(bid)_2, g(ask)_2) with bid = (1,3), ask = (2,4).
template <class T>
GridPath<T, 4> G_map(const GridPath<T, 4>& q) {
  const auto gb = g_map(detail::project(q, 0, 2)).g;
  const auto ga = g_map(detail::project(q, 1, 3)).g;
  GridPath<T, 4> out{q.dt, {}, q.interp};
  out.values.reserve(q.values.size());
  for (std::size_t k = 0; k < q.values.size(); ++k)
    out.values.push_back({gb.values[k][0], ga.values[k][0], gb.values[k][1], ga.values[k][1]});
  return out;
}

// Ghat = gbar(bid)_2 - gbar(bid)_1 - gbar(ask)_2 + gbar(ask)_1.
template <class T>
GridPath<T, 1> Ghat_map(const GridPath<T, 4>& q) {
  const auto lb = gbar_map(detail::project(q, 0, 2));
  const auto la = gbar_map(detail::project(q, 1, 3));
  GridPath<T, 1> out{q.dt, {}, q.interp};
  out.values.reserve(q.values.size());
  for (std::size_t k = 0; k < q.values.size(); ++k)
    out.values.push_back({lb.values[k][1] - lb.values[k][0] - la.values[k][1] + la.values[k][0]});
  return out;
}

// Capacity change caused by per-type regulator increments (pushes):
// dC = push_bG - push_bF - push_aG + push_aF.
template <class T>
T capacity_from_pushes(const Vec4<T>& push) {
  return push[2] - push[0] - push[3] + push[1];
}

// ---------------------------------------------------------------------------
// Active maps (shared book): queues, unrestricted capacity and prices.
// ---------------------------------------------------------------------------

template <class T>
struct ActiveStep {
  bool price_change = false;
  bool up = false;
  Vec4<T> q_pre{};
  Vec4<T> push{};        // per-type regulator increments during the step
  T capacity_change{};   // unrestricted capacity increment during the step
};

template <class T>
class ActiveMapEngine {
 public:
  ActiveMapEngine() = default;
  explicit ActiveMapEngine(const Vec4<T>& q0) { restart(q0); }

  // Restarts the reflections at q (after a reinitialization or a regime change).
  void restart(const Vec4<T>& q) {
    bid_.reset({q[0], q[2]});
    ask_.reset({q[1], q[3]});
    q_ = q;
  }

  // Applies one increment. Reinit is a callable (l, up, q_pre) -> Vec4<T>.
  template <class Reinit>
  ActiveStep<T> step(const Vec4<T>& dw, Reinit&& reinit) {
    ActiveStep<T> st;
    st.q_pre = q_;
    const T hb_prev = q_[0] + q_[2];
    const T ha_prev = q_[1] + q_[3];
    const T c_before = segment_capacity();
    const bool ab = bid_.step({dw[0], dw[2]});
    const bool aa = ask_.step({dw[1], dw[3]});
    st.push = {bid_.last_push()[0], ask_.last_push()[0], bid_.last_push()[1], ask_.last_push()[1]};
    const T c_after = segment_capacity();
    st.capacity_change = c_after - c_before;
    if (ab || aa) {
      bool up = aa;
      if (ab && aa) {
        // Both summed sides depleted within one grid step (limit scale only):
        // attribute the move to the side whose linear interpolation crosses first.
        const double fb = crossing_fraction(hb_prev, hb_prev + dw[0] + dw[2]);
        const double fa = crossing_fraction(ha_prev, ha_prev + dw[1] + dw[3]);
        up = fa < fb;
        ++ties_;
      }
      st.price_change = true;
      st.up = up;
      capacity_base_ += c_after;
      ++count_;
      if (up) ++n_a_; else ++n_b_;
      const Vec4<T> r = reinit(count_, up, st.q_pre);
      restart(r);
    } else {
      q_ = {bid_.g()[0], ask_.g()[0], bid_.g()[1], ask_.g()[1]};
    }
    return st;
  }

  const Vec4<T>& q() const { return q_; }
  // Unrestricted capacity accumulated since construction (excluding C0).
  T capacity() const { return capacity_base_ + segment_capacity(); }
  std::int64_t price() const { return n_a_ - n_b_; }  // ticks, applied to both prices
  std::int64_t count() const { return count_; }
  void set_count(std::int64_t l) { count_ = l; }
  std::int64_t ties() const { return ties_; }

 private:
  static double crossing_fraction(T prev, T next) {
    const double p = static_cast<double>(prev), n = static_cast<double>(next);
    if (p <= 0.0) return 0.0;
    return p / (p - n);
  }
  T segment_capacity() const {
    return bid_.regulators()[1] - bid_.regulators()[0] - ask_.regulators()[1] + ask_.regulators()[0];
  }

  GReflector<T> bid_, ask_;
  Vec4<T> q_{};
  T capacity_base_{};
  std::int64_t count_ = 0;
  std::int64_t n_a_ = 0, n_b_ = 0;
  std::int64_t ties_ = 0;
};

template <class T>
struct PsiActiveResult {
  GridPath<T, 4> Q;
  GridPath<T, 1> C;                      // Psi^C: unrestricted capacity increment from 0
  GridPath<std::int64_t, 2> B;           // Psi^B in ticks: (N_a - N_b) for both countries
  std::vector<std::size_t> price_change_steps;
  std::vector<bool> up;
};

// Full-path active map on w = q0 + X.
template <class T, class Reinit>
PsiActiveResult<T> psi_active(const GridPath<T, 4>& w, Reinit&& reinit) {
  PsiActiveResult<T> out;
  out.Q = {w.dt, {}, w.interp};
  out.C = {w.dt, {}, w.interp};
  out.B = {w.dt, {}, w.interp};
  if (w.values.empty()) return out;
  ActiveMapEngine<T> eng(w.values[0]);
  const std::size_t N = w.values.size();
  out.Q.values.reserve(N);
  out.C.values.reserve(N);
  out.B.values.reserve(N);
  out.Q.values.push_back(eng.q());
  out.C.values.push_back({eng.capacity()});
  out.B.values.push_back({0, 0});
  for (std::size_t k = 1; k < N; ++k) {
    Vec4<T> dw;
    for (int i = 0; i < 4; ++i) dw[i] = w.values[k][i] - w.values[k - 1][i];
    const auto st = eng.step(dw, reinit);
    if (st.price_change) {
      out.price_change_steps.push_back(k);
      out.up.push_back(st.up);
    }
    out.Q.values.push_back(eng.q());
    out.C.values.push_back({eng.capacity()});
    out.B.values.push_back({eng.price(), eng.price()});
  }
  return out;
}

template <class T, class Reinit>
GridPath<T, 4> psi_q_active(const GridPath<T, 4>& w, Reinit&& reinit) {
  return psi_active(w, std::forward<Reinit>(reinit)).Q;
}
template <class T, class Reinit>
GridPath<T, 1> psi_c_active(const GridPath<T, 4>& w, Reinit&& reinit) {
  return psi_active(w, std::forward<Reinit>(reinit)).C;
}
template <class T, class Reinit>
GridPath<std::int64_t, 2> psi_b_active(const GridPath<T, 4>& w, Reinit&& reinit) {
  return psi_active(w, std::forward<Reinit>(reinit)).B;
}

// ---------------------------------------------------------------------------
// Inactive maps (national books): per-component hitting reinitializes the
// owning country's queue pair only.
// ---------------------------------------------------------------------------

struct InactiveEvent {
  int component = 0;  // type index that hit zero
  bool up = false;
  std::int64_t l = 0;
};

template <class T>
class InactiveMapEngine {
 public:
  InactiveMapEngine() = default;
  explicit InactiveMapEngine(const Vec4<T>& q0) : q_(q0) {}

  void restart(const Vec4<T>& q) { q_ = q; }

  // Applies one increment; returns the price-change events it caused.
  template <class Reinit>
  std::vector<InactiveEvent> step(const Vec4<T>& dw, Reinit&& reinit) {
    const Vec4<T> q_pre = q_;
    for (int i = 0; i < 4; ++i) q_[i] += dw[i];
    return resolve(q_pre, reinit);
  }

  // Processes every component that is at or below zero (used after steps
  // and after regime handoffs).
  template <class Reinit>
  std::vector<InactiveEvent> resolve(const Vec4<T>& q_pre, Reinit&& reinit) {
    std::vector<InactiveEvent> ev;
    for (;;) {
      int hit = -1;
      double best = 2.0;
      for (int i = 0; i < 4; ++i) {
        if (q_[i] <= T(0)) {
          const double p = static_cast<double>(q_pre[i]);
          const double frac = p <= 0.0 ? 0.0 : p / (p - static_cast<double>(q_[i]));
          if (frac < best) { best = frac; hit = i; }
        }
      }
      if (hit < 0) break;
      const bool up = (hit % 2) == 1;
      ++count_;
      ++n_[hit];
      const Vec4<T> r = reinit(count_, up, q_pre);
      const int base = 2 * (hit / 2);
      q_[base] = r[base];
      q_[base + 1] = r[base + 1];
      ev.push_back({hit, up, count_});
    }
    return ev;
  }

  const Vec4<T>& q() const { return q_; }
  std::int64_t price_F() const { return n_[1] - n_[0]; }
  std::int64_t price_G() const { return n_[3] - n_[2]; }
  std::int64_t count() const { return count_; }
  void set_count(std::int64_t l) { count_ = l; }
  const std::array<std::int64_t, 4>& counters() const { return n_; }

 private:
  Vec4<T> q_{};
  std::int64_t count_ = 0;
  std::array<std::int64_t, 4> n_{};
};

template <class T>
struct PsiInactiveResult {
  GridPath<T, 4> Q;
  GridPath<std::int64_t, 2> B;  // (B_F, B_G) in ticks
  std::vector<std::size_t> price_change_steps;
  std::vector<InactiveEvent> events;
};

template <class T, class Reinit>
PsiInactiveResult<T> psi_inactive(const GridPath<T, 4>& w, Reinit&& reinit) {
  PsiInactiveResult<T> out;
  out.Q = {w.dt, {}, w.interp};
  out.B = {w.dt, {}, w.interp};
  if (w.values.empty()) return out;
  InactiveMapEngine<T> eng(w.values[0]);
  out.Q.values.push_back(eng.q());
  out.B.values.push_back({0, 0});
  for (std::size_t k = 1; k < w.values.size(); ++k) {
    Vec4<T> dw;
    for (int i = 0; i < 4; ++i) dw[i] = w.values[k][i] - w.values[k - 1][i];
    for (const auto& e : eng.step(dw, reinit)) {
      out.price_change_steps.push_back(k);
      out.events.push_back(e);
    }
    out.Q.values.push_back(eng.q());
    out.B.values.push_back({eng.price_F(), eng.price_G()});
  }
  return out;
}

template <class T, class Reinit>
GridPath<T, 4> psi_q_inactive(const GridPath<T, 4>& w, Reinit&& reinit) {
  return psi_inactive(w, std::forward<Reinit>(reinit)).Q;
}
template <class T, class Reinit>
GridPath<std::int64_t, 2> psi_b_inactive(const GridPath<T, 4>& w, Reinit&& reinit) {
  return psi_inactive(w, std::forward<Reinit>(reinit)).B;
}

}  // namespace xborder
