#pragma once
// Scripted Monte Carlo studies: the shared-vs-national price-change tables,
// the cross-border market scenarios with regime switching, and Monte Carlo
// cross-validation of the analytic formulas against the limit engine.
//
// Every replication r draws from streams derived from (master seed, r), so
// results are identical for any worker count; reductions run in
// replication order.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "analytics.hpp"
#include "core_model.hpp"
#include "limit_engine.hpp"
#include "micro_engine.hpp"
#include "order_flow.hpp"
#include "random.hpp"
#include "reinit.hpp"

namespace xborder {

// Runs body(r) for r in [0, count) on up to `workers` threads.
inline void parallel_for(std::int64_t count, int workers, const std::function<void(std::int64_t)>& body) {
  workers = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::int64_t>(count, 1))));
  if (workers == 1) {
    for (std::int64_t r = 0; r < count; ++r) body(r);
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::int64_t r = w; r < count; r += workers) body(r);
    });
  for (auto& t : pool) t.join();
}

// Mean and standard error of a sample.
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& v) {
  MeanSe m;
  if (v.empty()) return m;
  const double n = static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += x;
  m.mean = s / n;
  if (v.size() > 1) {
    double q = 0.0;
    for (double x : v) q += (x - m.mean) * (x - m.mean);
    m.se = std::sqrt(q / (n - 1.0) / n);
  }
  return m;
}

// Market-order probability giving drift mu for a type with arrival
// probability P: mu = P (1 - 2 p) / dv.
inline double market_prob_for_drift(double mu, double event_prob, double dv) {
  return 0.5 * (1.0 - mu * dv / event_prob);
}

// ---------------------------------------------------------------------------
// Shared vs national price-change tables
// ---------------------------------------------------------------------------

struct TableConfig {
  std::int64_t n = 10000;
  std::int64_t replications = 1000;
  std::uint64_t master_seed = 42;
  // Initial queues and reinitializations: independent uniform on {j dv : j = lo..hi}.
  std::int64_t reinit_lo = 1, reinit_hi = 20;
  std::int64_t initial_lo = 1, initial_hi = 20;
  std::vector<std::string> scenarios{"a", "b", "c", "d"};
  int workers = 1;
};

// Scenario drift rows: a) all zero; b) both bid sides; c) both F sides;
// d) (b,F) and (a,G); every drift that is not zero equals -2.5.
inline ModelParams table_scenario_params(const std::string& scenario, std::int64_t n) {
  ModelParams p;
  p.n = n;
  const double dv = 1.0 / std::sqrt(static_cast<double>(n));
  std::vector<int> drifted;
  if (scenario == "a") drifted = {};
  else if (scenario == "b") drifted = {0, 2};
  else if (scenario == "c") drifted = {0, 1};
  else if (scenario == "d") drifted = {0, 3};
  else throw Error(ErrorCode::ConfigInvalid, "unknown table scenario '" + scenario + "'");
  for (int i : drifted) p.flow.market_prob[i] = market_prob_for_drift(-2.5, p.flow.event_probs[i], dv);
  return p;
}

struct TableRow {
  std::string scenario;
  std::array<MeanSe, 3> N{};  // shared, F, G price-change counts
  std::array<MeanSe, 3> R{};  // shared, F, G bid-price ranges in ticks
};

struct Table {
  std::vector<TableRow> rows;
};

struct TableReplication {
  std::array<double, 3> N{};
  std::array<double, 3> R{};
};

// One replication: the same order stream drives the shared book (active
// dynamics) and the two national books (inactive dynamics).
inline TableReplication table_replication(const ValidatedParams& vp, const TableConfig& cfg, std::uint64_t rep) {
  const auto stream = generate_stream(cfg.master_seed, vp, rep);
  Rng irng = make_rng(cfg.master_seed, Stream::InitialQueues, rep);
  const auto init = uniform_reinit<std::int64_t>(cfg.initial_lo, cfg.initial_hi).f_plus(irng);
  const auto spec = uniform_reinit<std::int64_t>(cfg.reinit_lo, cfg.reinit_hi);
  RunOptions opt;
  opt.record_states = false;
  MarketState s0;
  s0.Q = init;
  MicroReinit ra(spec, cfg.master_seed, rep), ri(spec, cfg.master_seed, rep);
  const auto shared = run_active(s0, stream, ra, opt);
  s0.regime = Regime::Inactive;
  const auto national = run_inactive(s0, stream, ri, opt);
  TableReplication out;
  out.N = {static_cast<double>(shared.summary.price_changes), static_cast<double>(national.summary.price_changes_F),
           static_cast<double>(national.summary.price_changes_G)};
  out.R = {static_cast<double>(shared.summary.max_B_F - shared.summary.min_B_F),
           static_cast<double>(national.summary.max_B_F - national.summary.min_B_F),
           static_cast<double>(national.summary.max_B_G - national.summary.min_B_G)};
  return out;
}

inline Table run_price_change_table(const TableConfig& cfg) {
  if (cfg.replications < 1) throw Error(ErrorCode::ConfigInvalid, "replications must be >= 1");
  Table table;
  for (const auto& sc : cfg.scenarios) {
    const auto vp = validate_params(table_scenario_params(sc, cfg.n));
    std::vector<TableReplication> reps(static_cast<std::size_t>(cfg.replications));
    parallel_for(cfg.replications, cfg.workers, [&](std::int64_t r) {
      reps[static_cast<std::size_t>(r)] = table_replication(vp, cfg, static_cast<std::uint64_t>(r));
    });
    TableRow row;
    row.scenario = sc;
    for (int q = 0; q < 3; ++q) {
      std::vector<double> n, rg;
      for (const auto& x : reps) {
        n.push_back(x.N[q]);
        rg.push_back(x.R[q]);
      }
      row.N[q] = mean_se(n);
      row.R[q] = mean_se(rg);
    }
    table.rows.push_back(row);
  }
  return table;
}

inline void write_table_csv(std::ostream& os, const Table& t) {
  os.precision(9);
  os << "scenario,metric,value,se\n";
  const char* names[3] = {"shared", "F", "G"};
  for (const auto& r : t.rows) {
    for (int q = 0; q < 3; ++q) os << r.scenario << ",N_" << names[q] << ',' << r.N[q].mean << ',' << r.N[q].se << '\n';
    for (int q = 0; q < 3; ++q) os << r.scenario << ",R_" << names[q] << ',' << r.R[q].mean << ',' << r.R[q].se << '\n';
  }
}

// ---------------------------------------------------------------------------
// Cross-border market scenarios with regime switching
// ---------------------------------------------------------------------------

enum class EngineKind { Micro, Limit };

struct ScenarioSpec {
  std::string name = "balanced";
  ModelParams params{};
  std::int64_t replications = 1000;
  std::uint64_t master_seed = 42;
  EngineKind engine = EngineKind::Micro;
  std::int64_t reinit_lo = 10, reinit_hi = 20;    // in dv units
  std::int64_t initial_lo = 10, initial_hi = 20;  // in dv units
  double limit_grid_dt = 1e-4;                    // limit engine only
  int workers = 1;
};

// Balanced market: all types equally likely, market orders slightly more
// frequent than limit orders (every drift -2.5).
inline ScenarioSpec balanced_scenario() {
  ScenarioSpec s;
  s.name = "balanced";
  s.params.kappa_minus = s.params.kappa_plus = 0.5;
  const double dv = 1.0 / std::sqrt(static_cast<double>(s.params.n));
  for (int i = 0; i < 4; ++i) s.params.flow.market_prob[i] = 0.5 + 5.0 * dv;
  return s;
}

// Imbalanced market: exports from F more frequent than imports
// (drift -2.5 on (b,F) and (a,G), zero otherwise).
inline ScenarioSpec imbalanced_scenario() {
  ScenarioSpec s;
  s.name = "imbalanced";
  s.params.kappa_minus = s.params.kappa_plus = 0.5;
  const double dv = 1.0 / std::sqrt(static_cast<double>(s.params.n));
  s.params.flow.market_prob = {0.5 + 5.0 * dv, 0.5, 0.5, 0.5 + 5.0 * dv};
  return s;
}

// Imbalanced active regime; during inactive regimes F sees less activity
// and only (a,G) keeps a negative drift.
inline ScenarioSpec regime_dependent_scenario() {
  ScenarioSpec s = imbalanced_scenario();
  s.name = "regime_dependent";
  const double dv = 1.0 / std::sqrt(static_cast<double>(s.params.n));
  FlowParams inactive;
  inactive.event_probs = {0.1, 0.1, 0.3, 0.5};
  inactive.market_prob = {0.5, 0.5, 0.5, 0.5 + 2.5 * dv};
  s.params.regime_overrides = inactive;
  return s;
}

struct ReplicationSummary {
  std::int64_t switches = 0;
  double active_time = 0.0;
  double inactive_time = 0.0;
  double terminal_C = 0.0;  // volume units
  double terminal_B_F = 0.0, terminal_B_G = 0.0;  // price units (ticks * delta)
  std::int64_t price_changes_F = 0, price_changes_G = 0;
};

struct ScenarioResult {
  std::string name;
  std::vector<ReplicationSummary> replications;
  double switch_probability = 0.0;  // fraction of replications with at least one switch
  double switch_probability_se = 0.0;
  MeanSe switches, terminal_C, active_time, inactive_time, terminal_B_F, terminal_B_G;
  Trajectory first;             // replication 0 (micro engine)
  LimitTrajectory first_limit;  // replication 0 (limit engine)
};

namespace detail {

inline ReplicationSummary micro_scenario_replication(const ScenarioSpec& spec, const ValidatedParams& vp,
                                                     std::uint64_t rep, Trajectory* keep) {
  Rng orders = make_rng(spec.master_seed, Stream::Orders, rep);
  Rng irng = make_rng(spec.master_seed, Stream::InitialQueues, rep);
  MarketState s0;
  s0.Q = uniform_reinit<std::int64_t>(spec.initial_lo, spec.initial_hi).f_plus(irng);
  MicroReinit reinit(uniform_reinit<std::int64_t>(spec.reinit_lo, spec.reinit_hi), spec.master_seed, rep);
  RunOptions opt;
  opt.record_states = keep != nullptr;
  OrderSource src(vp, orders);
  auto t = run_regime_switching(s0, vp.steps, [&](Regime r) { return src.next(r); }, reinit, vp, opt);
  ReplicationSummary s;
  s.switches = t.summary.switches;
  s.inactive_time = static_cast<double>(t.summary.inactive_steps) * vp.dt;
  s.active_time = vp.p.horizon_T - s.inactive_time;
  s.terminal_C = static_cast<double>(t.summary.final_state.C) * vp.dv;
  s.terminal_B_F = static_cast<double>(t.summary.final_state.B_F) * vp.p.tick_delta;
  s.terminal_B_G = static_cast<double>(t.summary.final_state.B_G) * vp.p.tick_delta;
  s.price_changes_F = t.summary.price_changes_F;
  s.price_changes_G = t.summary.price_changes_G;
  if (keep) *keep = std::move(t);
  return s;
}

inline BmSpec limit_spec_from_params(const ValidatedParams& vp, const Vec4d& x0, double grid_dt) {
  if (vp.p.regime_overrides)
    throw Error(ErrorCode::UnsupportedDependence, "the limit engine uses one set of moments for both regimes");
  const auto m = derive_event_moments(vp, Regime::Active);
  BmSpec b;
  b.x0 = x0;
  b.mu = m.mu;
  b.sigma = m.cross;
  b.grid_dt = grid_dt;
  return b;
}

inline ReplicationSummary limit_scenario_replication(const ScenarioSpec& spec, const ValidatedParams& vp,
                                                     std::uint64_t rep, LimitTrajectory* keep) {
  Rng irng = make_rng(spec.master_seed, Stream::InitialQueues, rep);
  const auto q0 = uniform_reinit<double>(spec.initial_lo, spec.initial_hi, vp.dv).f_plus(irng);
  const auto b = limit_spec_from_params(vp, q0, spec.limit_grid_dt);
  LimitOptions opt;
  opt.record_states = keep != nullptr;
  const auto t = simulate_regime_switching_limit({}, spec.master_seed, b,
                                                 uniform_reinit<double>(spec.reinit_lo, spec.reinit_hi, vp.dv),
                                                 vp.p.kappa_minus, vp.p.kappa_plus, vp.p.horizon_T, opt, rep);
  ReplicationSummary s;
  s.switches = static_cast<std::int64_t>(std::count_if(t.regime_switches.begin(), t.regime_switches.end(),
                                                       [](const auto& x) { return x.to_inactive; }));
  // Regime durations from the switch log.
  double last = 0.0, inactive = 0.0;
  bool in_inactive = false;
  for (const auto& sw : t.regime_switches) {
    if (sw.to_inactive) last = sw.t;
    else inactive += sw.t - last;
    in_inactive = sw.to_inactive;
  }
  if (in_inactive) inactive += vp.p.horizon_T - last;
  s.inactive_time = inactive;
  s.active_time = vp.p.horizon_T - inactive;
  s.terminal_C = t.summary.final_state.C;
  s.terminal_B_F = static_cast<double>(t.summary.final_state.B_F) * vp.p.tick_delta;
  s.terminal_B_G = static_cast<double>(t.summary.final_state.B_G) * vp.p.tick_delta;
  s.price_changes_F = t.summary.price_changes_F;
  s.price_changes_G = t.summary.price_changes_G;
  if (keep) *keep = t;
  return s;
}

}  // namespace detail

inline ScenarioResult run_scenario(const ScenarioSpec& spec) {
  if (spec.replications < 1) throw Error(ErrorCode::ConfigInvalid, "replications must be >= 1");
  const auto vp = validate_params(spec.params);
  ScenarioResult res;
  res.name = spec.name;
  res.replications.resize(static_cast<std::size_t>(spec.replications));
  parallel_for(spec.replications, spec.workers, [&](std::int64_t r) {
    const auto rep = static_cast<std::uint64_t>(r);
    auto& out = res.replications[static_cast<std::size_t>(r)];
    if (spec.engine == EngineKind::Micro) out = detail::micro_scenario_replication(spec, vp, rep, r == 0 ? &res.first : nullptr);
    else out = detail::limit_scenario_replication(spec, vp, rep, r == 0 ? &res.first_limit : nullptr);
  });
  std::vector<double> any, sw, c, at, it, bf, bg;
  for (const auto& s : res.replications) {
    any.push_back(s.switches > 0 ? 1.0 : 0.0);
    sw.push_back(static_cast<double>(s.switches));
    c.push_back(s.terminal_C);
    at.push_back(s.active_time);
    it.push_back(s.inactive_time);
    bf.push_back(s.terminal_B_F);
    bg.push_back(s.terminal_B_G);
  }
  const auto p = mean_se(any);
  res.switch_probability = p.mean;
  res.switch_probability_se = p.se;
  res.switches = mean_se(sw);
  res.terminal_C = mean_se(c);
  res.active_time = mean_se(at);
  res.inactive_time = mean_se(it);
  res.terminal_B_F = mean_se(bf);
  res.terminal_B_G = mean_se(bg);
  return res;
}

inline void write_scenario_summary_csv(std::ostream& os, const ScenarioResult& r) {
  os.precision(9);
  os << "replication,switches,active_time,inactive_time,terminal_C,terminal_B_F,terminal_B_G,price_changes_F,"
        "price_changes_G\n";
  for (std::size_t i = 0; i < r.replications.size(); ++i) {
    const auto& s = r.replications[i];
    os << i << ',' << s.switches << ',' << s.active_time << ',' << s.inactive_time << ',' << s.terminal_C << ','
       << s.terminal_B_F << ',' << s.terminal_B_G << ',' << s.price_changes_F << ',' << s.price_changes_G << '\n';
  }
}

// ---------------------------------------------------------------------------
// Monte Carlo cross-validation of the analytics
// ---------------------------------------------------------------------------

enum class QueryKind { Survival, Upward, Range };

struct AnalyticsQuery {
  QueryKind kind = QueryKind::Survival;
  Vec2d x{1.0, 1.0};          // summed (bid, ask) queues
  Vec2d mu{0.0, 0.0};         // summed drift
  Mat2d sigma{{{1.0, 0.0}, {0.0, 1.0}}};
  double t = 1.0;             // horizon (survival, range)
  int n = 1;                  // range threshold in ticks
};

struct McBudget {
  std::int64_t paths = 100000;
  double grid_dt = 1e-4;
  std::uint64_t seed = 1;
  bool bridge_weight = true;   // survival: bridge-corrected estimator
  double upward_horizon = 50.0;
  int workers = 1;
};

struct CrossValidation {
  double analytic = 0.0;
  double mc_estimate = 0.0;
  double se = 0.0;         // Monte Carlo standard error
  double null_se = 0.0;    // binomial standard error at the analytic value
  double unresolved = 0.0; // fraction of paths without an outcome (upward query)

  // |analytic - mc| within k standard errors; the binomial error at the
  // analytic value guards against a degenerate (zero) sample variance.
  bool within(double k = 3.0) const {
    return std::abs(analytic - mc_estimate) <= k * std::max(se, null_se);
  }
};

// Four-dimensional flow whose summed bid/ask process has the queried
// (x, mu, Sigma): each country carries half, countries independent.
inline BmSpec embed_summed_query(const AnalyticsQuery& q, double grid_dt) {
  BmSpec b;
  b.grid_dt = grid_dt;
  for (int i = 0; i < 4; ++i) {
    const int side = i % 2;
    b.x0[i] = q.x[side] / 2.0;
    b.mu[i] = q.mu[side] / 2.0;
    for (int j = 0; j < 4; ++j)
      if (i / 2 == j / 2) b.sigma[i][j] = q.sigma[side][j % 2] / 2.0;
  }
  return b;
}

inline CrossValidation mc_cross_validate(const AnalyticsQuery& q, const McBudget& budget,
                                         const SeriesControl& ctl = {}) {
  CrossValidation cv;
  const BmSpec spec = embed_summed_query(q, budget.grid_dt);
  const auto reinit = point_reinit<double>(spec.x0);
  const auto N = static_cast<std::size_t>(budget.paths);
  std::vector<double> sample(N, 0.0);
  std::vector<char> resolved(N, 1);
  LimitOptions opt;
  opt.record_states = false;

  switch (q.kind) {
    case QueryKind::Survival: {
      cv.analytic = survival_probability(q.x, q.mu, q.sigma, q.t, ctl);
      opt.stop_after_price_changes = 1;
      opt.bridge_weight = budget.bridge_weight;
      parallel_for(budget.paths, budget.workers, [&](std::int64_t r) {
        const auto t = simulate_active_limit({}, budget.seed, spec, reinit, q.t, opt, static_cast<std::uint64_t>(r));
        const bool survived = t.summary.price_changes == 0;
        sample[static_cast<std::size_t>(r)] = survived ? (budget.bridge_weight ? t.summary.bridge_survival : 1.0) : 0.0;
      });
      break;
    }
    case QueryKind::Upward: {
      const auto u = upward_probability(q.x, q.mu, q.sigma, ctl);
      cv.analytic = u.value;
      opt.stop_after_price_changes = 1;
      parallel_for(budget.paths, budget.workers, [&](std::int64_t r) {
        const auto t = simulate_active_limit({}, budget.seed, spec, reinit, budget.upward_horizon, opt,
                                             static_cast<std::uint64_t>(r));
        const auto i = static_cast<std::size_t>(r);
        if (t.summary.price_changes == 0) resolved[i] = 0;
        else sample[i] = t.summary.first_up ? 1.0 : 0.0;
      });
      break;
    }
    case QueryKind::Range: {
      CountControl cc;
      cc.series = ctl;
      const auto res = range_distribution(point_mass_dist(spec.x0), q.mu, q.sigma, q.t, q.n, cc);
      cv.analytic = res.cdf[static_cast<std::size_t>(q.n)];
      parallel_for(budget.paths, budget.workers, [&](std::int64_t r) {
        const auto t = simulate_active_limit({}, budget.seed, spec, reinit, q.t, opt, static_cast<std::uint64_t>(r));
        sample[static_cast<std::size_t>(r)] = (t.summary.max_B_F - t.summary.min_B_F) <= q.n ? 1.0 : 0.0;
      });
      break;
    }
  }
  std::vector<double> used;
  used.reserve(N);
  for (std::size_t i = 0; i < N; ++i)
    if (resolved[i]) used.push_back(sample[i]);
  cv.unresolved = 1.0 - static_cast<double>(used.size()) / static_cast<double>(std::max<std::size_t>(N, 1));
  const auto m = mean_se(used);
  cv.mc_estimate = m.mean;
  cv.se = m.se;
  const double n = static_cast<double>(std::max<std::size_t>(used.size(), 1));
  cv.null_se = std::sqrt(std::max(cv.analytic * (1.0 - cv.analytic), 1.0 / n) / n);
  return cv;
}

}  // namespace xborder
