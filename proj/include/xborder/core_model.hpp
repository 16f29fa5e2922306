#pragma once
// Parameter and state types shared by every engine, plus validation and
// the derivation of per-order-type drift / covariance moments.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace xborder {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

enum class ErrorCode {
  NonPositiveTick,
  CapacityNotMultipleOfDv,
  ProbabilitiesInvalid,
  HorizonNotMultipleOfDt,
  UnsupportedDependence,
  InvariantViolation,
  CovarianceNotPSD,
  DegenerateCovariance,
  DomainError,
  SeriesNotConverged,
  HittingNotAlmostSure,
  GridTooCoarse,
  CFLViolation,
  ConfigInvalid,
  IoError,
};

inline const char* error_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::NonPositiveTick: return "NonPositiveTick";
    case ErrorCode::CapacityNotMultipleOfDv: return "CapacityNotMultipleOfDv";
    case ErrorCode::ProbabilitiesInvalid: return "ProbabilitiesInvalid";
    case ErrorCode::HorizonNotMultipleOfDt: return "HorizonNotMultipleOfDt";
    case ErrorCode::UnsupportedDependence: return "UnsupportedDependence";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::CovarianceNotPSD: return "CovarianceNotPSD";
    case ErrorCode::DegenerateCovariance: return "DegenerateCovariance";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::SeriesNotConverged: return "SeriesNotConverged";
    case ErrorCode::HittingNotAlmostSure: return "HittingNotAlmostSure";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::CFLViolation: return "CFLViolation";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

// Structured error: a primary code plus every violation found.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::vector<std::string> details = {})
      : std::runtime_error(std::string(error_name(code)) + ": " + message),
        code_(code),
        details_(std::move(details)) {}

  ErrorCode code() const { return code_; }
  const std::vector<std::string>& details() const { return details_; }

 private:
  ErrorCode code_;
  std::vector<std::string> details_;
};

// ---------------------------------------------------------------------------
// Order types
// ---------------------------------------------------------------------------

enum class Side : int { Bid = 0, Ask = 1 };
enum class Origin : int { F = 0, G = 1 };
enum class Regime : int { Active = 0, Inactive = 1 };

// Component order used for every 4-vector: (b,F), (a,F), (b,G), (a,G).
constexpr int type_index(Side s, Origin o) { return 2 * static_cast<int>(o) + static_cast<int>(s); }
constexpr Side side_of(int idx) { return static_cast<Side>(idx % 2); }
constexpr Origin origin_of(int idx) { return static_cast<Origin>(idx / 2); }
constexpr Origin other(Origin o) { return o == Origin::F ? Origin::G : Origin::F; }

inline const char* type_name(int idx) {
  static const char* names[4] = {"bF", "aF", "bG", "aG"};
  return names[idx];
}

using Vec4i = std::array<std::int64_t, 4>;
using Vec4d = std::array<double, 4>;
using Mat4d = std::array<std::array<double, 4>, 4>;
using Vec2d = std::array<double, 2>;
using Mat2d = std::array<std::array<double, 2>, 2>;

// Sign with which a cross-border execution of an order of a given type moves
// the capacity process: a (b,F) market order served by G's bid volume
// exports from G to F, etc.  C += capacity_sign(idx) * V.
constexpr int capacity_sign(int idx) {
  // (b,F) -> +1, (a,F) -> -1, (b,G) -> -1, (a,G) -> +1
  return (idx == 0 || idx == 3) ? 1 : -1;
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

struct FlowParams {
  Vec4d event_probs{0.25, 0.25, 0.25, 0.25};
  Vec4d market_prob{0.5, 0.5, 0.5, 0.5};
};

constexpr double kInfiniteCapacity = std::numeric_limits<double>::infinity();

struct ModelParams {
  std::int64_t n = 10000;
  double horizon_T = 1.0;
  double tick_delta = 0.1;
  double kappa_minus = kInfiniteCapacity;
  double kappa_plus = kInfiniteCapacity;
  FlowParams flow{};
  int dependence_order = 0;
  std::optional<FlowParams> regime_overrides{};
};

// Validated parameters with all derived integer quantities.
struct ValidatedParams {
  ModelParams p;
  double dt = 0.0;
  double dv = 0.0;
  std::int64_t steps = 0;                 // T / dt
  std::int64_t kappa_minus_units = 0;     // kappa_minus / dv (or max for infinite)
  std::int64_t kappa_plus_units = 0;

  const FlowParams& flow(Regime r) const {
    if (r == Regime::Inactive && p.regime_overrides) return *p.regime_overrides;
    return p.flow;
  }
  bool capacity_bounded() const {
    return kappa_minus_units < std::numeric_limits<std::int64_t>::max() ||
           kappa_plus_units < std::numeric_limits<std::int64_t>::max();
  }
};

namespace detail {

inline bool near_integer(double x, double rel = 1e-9) {
  return std::abs(x - std::round(x)) <= rel * std::max(1.0, std::abs(x));
}

inline void check_flow(const FlowParams& f, const char* label, std::vector<std::string>& errs,
                       std::optional<ErrorCode>& first) {
  double s = 0.0;
  bool bad = false;
  for (int i = 0; i < 4; ++i) {
    if (!(f.event_probs[i] >= 0.0 && f.event_probs[i] <= 1.0)) bad = true;
    if (!(f.market_prob[i] >= 0.0 && f.market_prob[i] <= 1.0)) bad = true;
    s += f.event_probs[i];
  }
  if (std::abs(s - 1.0) > 1e-12) bad = true;
  if (bad) {
    std::ostringstream os;
    os << label << ": event_probs must lie in [0,1] and sum to 1 (sum=" << s
       << "), market_prob must lie in [0,1]";
    errs.push_back(os.str());
    if (!first) first = ErrorCode::ProbabilitiesInvalid;
  }
}

}  // namespace detail

// Checks every invariant of ModelParams; throws an Error whose code is the
// first violation and whose details list all of them.
inline ValidatedParams validate_params(const ModelParams& p) {
  std::vector<std::string> errs;
  std::optional<ErrorCode> first;
  auto fail = [&](ErrorCode c, const std::string& msg) {
    errs.push_back(msg);
    if (!first) first = c;
  };

  ValidatedParams v;
  v.p = p;
  if (p.n <= 0) fail(ErrorCode::HorizonNotMultipleOfDt, "n must be a positive integer");
  const double n = static_cast<double>(std::max<std::int64_t>(p.n, 1));
  v.dt = 1.0 / n;
  v.dv = 1.0 / std::sqrt(n);

  if (!(p.tick_delta > 0.0) || !std::isfinite(p.tick_delta))
    fail(ErrorCode::NonPositiveTick, "tick_delta must be positive and finite");

  auto capacity_units = [&](double kappa, const char* name) -> std::int64_t {
    if (std::isinf(kappa) && kappa > 0) return std::numeric_limits<std::int64_t>::max();
    if (!(kappa > 0.0)) {
      fail(ErrorCode::CapacityNotMultipleOfDv, std::string(name) + " must be positive");
      return 0;
    }
    const double u = kappa / v.dv;
    if (!detail::near_integer(u)) {
      fail(ErrorCode::CapacityNotMultipleOfDv,
           std::string(name) + " is not an integer multiple of dv");
      return 0;
    }
    return static_cast<std::int64_t>(std::llround(u));
  };
  v.kappa_minus_units = capacity_units(p.kappa_minus, "kappa_minus");
  v.kappa_plus_units = capacity_units(p.kappa_plus, "kappa_plus");

  detail::check_flow(p.flow, "flow", errs, first);
  if (p.regime_overrides) detail::check_flow(*p.regime_overrides, "regime_overrides", errs, first);

  if (!(p.horizon_T >= 0.0) || !std::isfinite(p.horizon_T)) {
    fail(ErrorCode::HorizonNotMultipleOfDt, "horizon_T must be finite and nonnegative");
  } else {
    const double steps = p.horizon_T / v.dt;
    if (!detail::near_integer(steps))
      fail(ErrorCode::HorizonNotMultipleOfDt, "horizon_T is not an integer multiple of dt");
    v.steps = static_cast<std::int64_t>(std::llround(steps));
  }
  if (p.dependence_order < 0)
    fail(ErrorCode::UnsupportedDependence, "dependence_order must be >= 0");

  if (first) {
    std::string msg = errs.front();
    if (errs.size() > 1) msg += " (+" + std::to_string(errs.size() - 1) + " more)";
    throw Error(*first, msg, errs);
  }
  return v;
}

// ---------------------------------------------------------------------------
// Moments
// ---------------------------------------------------------------------------

struct MomentSet {
  Vec4d mu{};        // drift per type
  Vec4d sigma2{};    // variance per type
  Mat4d cross{};     // full covariance; cross[i][i] == sigma2[i]
};

// Moments of the scaled order sizes under multinomial type selection
// (exactly one type per step) for an i.i.d. flow.
inline MomentSet derive_event_moments(const ValidatedParams& vp, Regime regime = Regime::Active) {
  if (vp.p.dependence_order > 0)
    throw Error(ErrorCode::UnsupportedDependence,
                "analytic moments are only available for i.i.d. flow (dependence_order = 0)");
  const FlowParams& f = vp.flow(regime);
  MomentSet m;
  Vec4d mean_step{};  // E[V_i] / dv  (= P_i (1 - 2 p_i))
  for (int i = 0; i < 4; ++i) {
    mean_step[i] = f.event_probs[i] * (1.0 - 2.0 * f.market_prob[i]);
    m.mu[i] = mean_step[i] / vp.dv;
  }
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      m.cross[i][j] = (i == j) ? f.event_probs[i] - mean_step[i] * mean_step[i]
                               : -mean_step[i] * mean_step[j];
    }
    m.sigma2[i] = m.cross[i][i];
  }
  return m;
}

// Drift and covariance of the summed bid/ask flow h(X) = (X_bF + X_bG, X_aF + X_aG).
struct SharedMoments {
  Vec2d mu_h{};
  Mat2d sigma_h{};
};

inline SharedMoments aggregate_shared_moments(const MomentSet& m) {
  SharedMoments s;
  const int bF = 0, aF = 1, bG = 2, aG = 3;
  s.mu_h = {m.mu[bF] + m.mu[bG], m.mu[aF] + m.mu[aG]};
  s.sigma_h[0][0] = m.cross[bF][bF] + 2.0 * m.cross[bF][bG] + m.cross[bG][bG];
  s.sigma_h[1][1] = m.cross[aF][aF] + 2.0 * m.cross[aF][aG] + m.cross[aG][aG];
  const double off = m.cross[bF][aF] + m.cross[bF][aG] + m.cross[bG][aF] + m.cross[bG][aG];
  s.sigma_h[0][1] = off;
  s.sigma_h[1][0] = off;
  return s;
}

// ---------------------------------------------------------------------------
// Market state (micro engine units: queues/capacity in dv, prices in ticks)
// ---------------------------------------------------------------------------

struct MarketState {
  std::int64_t B_F = 0;
  std::int64_t B_G = 0;
  Vec4i Q{};
  std::int64_t C = 0;
  Regime regime = Regime::Active;
  std::int64_t l = 0;  // cumulative price-change count

  bool operator==(const MarketState&) const = default;
};

}  // namespace xborder
