#pragma once
// Order stream generation and the piecewise-constant net order flow path.

#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <vector>

#include "core_model.hpp"
#include "random.hpp"

namespace xborder {

struct OrderEvent {
  Side side = Side::Bid;
  Origin origin = Origin::F;
  int size = 1;  // +1 limit order, -1 market order (units of dv)

  int type() const { return type_index(side, origin); }
  bool operator==(const OrderEvent&) const = default;
};

using OrderStream = std::vector<OrderEvent>;

enum class Interp { PiecewiseConstant, GridSamples };

// A D-dimensional path sampled at k*dt, k = 0..steps.
template <class T, std::size_t D>
struct GridPath {
  double dt = 1.0;
  std::vector<std::array<T, D>> values;
  Interp interp = Interp::PiecewiseConstant;

  std::size_t steps() const { return values.empty() ? 0 : values.size() - 1; }
};

// Draws one order. Exactly two uniforms are consumed per call so that
// streams stay aligned regardless of the outcome.
inline OrderEvent sample_order(Rng& rng, const ValidatedParams& vp, Regime regime = Regime::Active);
// Online order source: queried with the current regime at every draw so
// regime-dependent flows can be simulated.
class OrderSource {
 public:
  OrderSource(const ValidatedParams& vp, Rng rng) : vp_(&vp), rng_(std::move(rng)) {}
  OrderEvent next(Regime regime) { return sample_order(rng_, *vp_, regime); }

 private:
  const ValidatedParams* vp_;
  Rng rng_;
};

namespace detail {

inline OrderEvent order_from_uniforms(const FlowParams& f, double u_type, double u_sign) {
  int idx = 3;
  double cum = 0.0;
  for (int i = 0; i < 4; ++i) {
    cum += f.event_probs[i];
    if (u_type < cum && f.event_probs[i] > 0.0) { idx = i; break; }
  }
  if (f.event_probs[idx] == 0.0) {
    for (int i = 3; i >= 0; --i)
      if (f.event_probs[i] > 0.0) { idx = i; break; }
  }
  OrderEvent e;
  e.side = side_of(idx);
  e.origin = origin_of(idx);
  e.size = (u_sign < f.market_prob[idx]) ? -1 : 1;
  return e;
}

}  // namespace detail

// Pre-generated stream of steps = T/dt events under the active-regime flow.
// For dependence_order m > 0 the sign uniform of event k is
// Phi((Z_k + ... + Z_{k-m}) / sqrt(m+1)) for i.i.d. standard normals Z (a
// Gaussian moving average): marginals are unchanged, neighbouring events are
// positively dependent and events more than m steps apart are independent.
inline OrderStream generate_stream(std::uint64_t seed, const ValidatedParams& vp,
                                   std::uint64_t replication = 0) {
  Rng rng = make_rng(seed, Stream::Orders, replication);
  OrderStream s;
  s.reserve(static_cast<std::size_t>(vp.steps));
  const int m = vp.p.dependence_order;
  if (m == 0) {
    for (std::int64_t k = 0; k < vp.steps; ++k) s.push_back(sample_order(rng, vp, Regime::Active));
    return s;
  }
  std::normal_distribution<double> normal;
  std::vector<double> window(static_cast<std::size_t>(m) + 1, 0.0);
  double sum = 0.0;
  for (std::size_t i = 1; i < window.size(); ++i) {
    window[i] = normal(rng);
    sum += window[i];
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(m + 1));
  for (std::int64_t k = 0; k < vp.steps; ++k) {
    const double u_type = uniform01(rng);
    const std::size_t slot = static_cast<std::size_t>(k % (m + 1));
    sum -= window[slot];
    window[slot] = normal(rng);
    sum += window[slot];
    const double u_sign = 0.5 * std::erfc(-sum * scale / std::sqrt(2.0));
    s.push_back(detail::order_from_uniforms(vp.p.flow, u_type, u_sign));
  }
  return s;
}

inline OrderEvent sample_order(Rng& rng, const ValidatedParams& vp, Regime regime) {
  const double u_type = uniform01(rng);
  const double u_sign = uniform01(rng);
  return detail::order_from_uniforms(vp.flow(regime), u_type, u_sign);
}

// Empirical per-type moments of a stream (used when dependence_order > 0).
inline MomentSet estimate_event_moments(const OrderStream& stream, double dv) {
  MomentSet m;
  const double N = static_cast<double>(stream.size());
  if (N == 0) return m;
  Vec4d mean{};
  Mat4d second{};
  for (const auto& e : stream) mean[e.type()] += e.size;
  for (auto& x : mean) x /= N;
  for (const auto& e : stream) second[e.type()][e.type()] += 1.0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) m.cross[i][j] = second[i][j] / N - mean[i] * mean[j];
    m.sigma2[i] = m.cross[i][i];
    m.mu[i] = mean[i] / dv;
  }
  return m;
}

// X_k = partial sums of order sizes per type, in dv units.
inline GridPath<std::int64_t, 4> net_flow_path(const OrderStream& stream, double dt = 1.0) {
  GridPath<std::int64_t, 4> path;
  path.dt = dt;
  path.interp = Interp::PiecewiseConstant;
  path.values.reserve(stream.size() + 1);
  Vec4i x{};
  path.values.push_back(x);
  for (const auto& e : stream) {
    x[e.type()] += e.size;
    path.values.push_back(x);
  }
  return path;
}

// CSV dump of a stream for replay debugging.
inline void write_stream_csv(std::ostream& os, const OrderStream& stream) {
  os << "k,side,origin,size\n";
  for (std::size_t k = 0; k < stream.size(); ++k) {
    const auto& e = stream[k];
    os << (k + 1) << ',' << (e.side == Side::Bid ? 'b' : 'a') << ','
       << (e.origin == Origin::F ? 'F' : 'G') << ',' << e.size << '\n';
  }
}

}  // namespace xborder
