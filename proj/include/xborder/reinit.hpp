#pragma once
// Queue reinitialization after price changes: R = Phi(Q(tau-), eps) with
// eps drawn from f+ (upward move) or f- (downward move).
//
// ReinitSequence fixes the draws by price-change index l, so the micro
// engine and the path maps consume identical values when they are given
// the same seed.

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "core_model.hpp"
#include "random.hpp"

namespace xborder {

template <class T>
struct ReinitSpec {
  using Vec = std::array<T, 4>;
  // Phi(pre-change queues, noise draw) -> new queues.
  std::function<Vec(const Vec& q_pre, const Vec& eps)> phi = [](const Vec&, const Vec& eps) {
    return eps;
  };
  std::function<Vec(Rng&)> f_plus;
  std::function<Vec(Rng&)> f_minus;
  double alpha_floor = 1.0;
};

// Independent uniform draws on {j*unit : j = lo..hi} for every component,
// identical for up and down moves, Phi(x, y) = y.
template <class T>
ReinitSpec<T> uniform_reinit(std::int64_t lo, std::int64_t hi, T unit = T(1)) {
  ReinitSpec<T> spec;
  auto draw = [lo, hi, unit](Rng& rng) {
    std::array<T, 4> v{};
    for (auto& x : v) {
      const auto j = lo + static_cast<std::int64_t>(uniform01(rng) * static_cast<double>(hi - lo + 1));
      x = static_cast<T>(std::min(j, hi)) * unit;
    }
    return v;
  };
  spec.f_plus = draw;
  spec.f_minus = draw;
  return spec;
}

// Deterministic point-mass reinitialization.
template <class T>
ReinitSpec<T> point_reinit(std::array<T, 4> value) {
  ReinitSpec<T> spec;
  spec.f_plus = [value](Rng&) { return value; };
  spec.f_minus = [value](Rng&) { return value; };
  return spec;
}

struct ReinitRecord {
  std::int64_t l = 0;
  bool up = false;
  std::array<double, 4> value{};
};

template <class T>
class ReinitSequence {
 public:
  using Vec = std::array<T, 4>;

  ReinitSequence(ReinitSpec<T> spec, Rng rng) : spec_(std::move(spec)), rng_(std::move(rng)) {}
  ReinitSequence(ReinitSpec<T> spec, std::uint64_t seed, std::uint64_t replication = 0)
      : ReinitSequence(std::move(spec), make_rng(seed, Stream::Reinit, replication)) {}

  // Noise draw eps^{+/-}_l (l >= 1). Pairs are generated lazily in order of l.
  const Vec& eps(std::int64_t l, bool up) {
    if (l < 1) throw Error(ErrorCode::InvariantViolation, "reinit index must be >= 1");
    while (static_cast<std::int64_t>(plus_.size()) < l) {
      plus_.push_back(spec_.f_plus(rng_));
      minus_.push_back(spec_.f_minus(rng_));
    }
    return up ? plus_[static_cast<std::size_t>(l - 1)] : minus_[static_cast<std::size_t>(l - 1)];
  }

  // R^{+/-}_l = Phi(q_pre, eps^{+/-}_l), checked against the floor alpha*eps.
  Vec value(std::int64_t l, bool up, const Vec& q_pre) {
    const Vec& e = eps(l, up);
    Vec r = spec_.phi(q_pre, e);
    for (int j = 0; j < 4; ++j) {
      if (!(static_cast<double>(r[j]) >= spec_.alpha_floor * static_cast<double>(e[j])) ||
          !(r[j] > T(0)))
        throw Error(ErrorCode::InvariantViolation,
                    "reinitialization value violates the floor Phi(x,y) >= alpha*y > 0");
    }
    return r;
  }

  Vec operator()(std::int64_t l, bool up, const Vec& q_pre) { return value(l, up, q_pre); }

 private:
  ReinitSpec<T> spec_;
  Rng rng_;
  std::vector<Vec> plus_;
  std::vector<Vec> minus_;
};

}  // namespace xborder
