// Acceptance suite: prints one PASS/FAIL line per criterion followed by a
// summary. Exits 0 when every criterion was evaluated (pass or fail) so that
// a failing criterion is reported rather than hidden; `--strict` makes any
// failure a nonzero exit. `--only 3,7` restricts the run to some criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "xborder/analytics.hpp"
#include "xborder/experiments.hpp"
#include "xborder/micro_engine.hpp"
#include "xborder/path_maps.hpp"

using namespace xborder;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

MicroReinit uniform_micro(std::int64_t lo, std::int64_t hi, std::uint64_t seed) {
  return MicroReinit(uniform_reinit<std::int64_t>(lo, hi), seed);
}

// ---------------------------------------------------------------------------
// 1. Micro engine equals the path maps on the same net-flow path.
// ---------------------------------------------------------------------------
Outcome micro_map_equivalence() {
  const auto t0 = Clock::now();
  ModelParams p;
  p.n = 10000;
  const auto vp = validate_params(p);
  int mismatches = 0;
  std::int64_t price_changes = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto stream = generate_stream(seed, vp);
    Rng irng = make_rng(seed, Stream::InitialQueues);
    const Vec4i q0 = uniform_reinit<std::int64_t>(1, 20).f_plus(irng);
    auto x = net_flow_path(stream);
    for (auto& v : x.values)
      for (int i = 0; i < 4; ++i) v[i] += q0[i];

    MarketState s0;
    s0.Q = q0;
    auto r1 = uniform_micro(1, 20, seed), r2 = uniform_micro(1, 20, seed);
    const auto t = run_active(s0, stream, r1);
    const auto m = psi_active(x, r2);
    bool ok = m.Q.values.size() == t.states.size();
    for (std::size_t k = 0; ok && k < t.states.size(); ++k) {
      const auto& s = t.states[k];
      ok = m.Q.values[k] == s.Q && m.C.values[k][0] == s.C && m.B.values[k][0] == s.B_F &&
           m.B.values[k][1] == s.B_G;
    }
    price_changes += t.summary.price_changes;

    s0.regime = Regime::Inactive;
    auto r3 = uniform_micro(1, 20, seed), r4 = uniform_micro(1, 20, seed);
    const auto ti = run_inactive(s0, stream, r3);
    const auto mi = psi_inactive(x, r4);
    ok = ok && mi.Q.values.size() == ti.states.size();
    for (std::size_t k = 0; ok && k < ti.states.size(); ++k) {
      const auto& s = ti.states[k];
      ok = mi.Q.values[k] == s.Q && mi.B.values[k][0] == s.B_F && mi.B.values[k][1] == s.B_G &&
           s.C == s0.C;
    }
    if (!ok) ++mismatches;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 60.0,
          fmt("100 seeds, n=10000: %d mismatching seeds, %lld active price changes compared, %.1fs (limit 60s)",
              mismatches, static_cast<long long>(price_changes), secs)};
}

// ---------------------------------------------------------------------------
// 2. Driftless independent survival equals the product of 1-d survivals.
// ---------------------------------------------------------------------------
Outcome survival_product_oracle() {
  const auto t0 = Clock::now();
  const double v = survival_probability({1.0, 1.0}, {0.0, 0.0}, {{{1.0, 0.0}, {0.0, 1.0}}}, 1.0);
  const double ref = std::pow(2.0 * oracle::normal_cdf(1.0) - 1.0, 2);
  const double secs = seconds_since(t0);
  return {std::abs(v - ref) <= 1e-6 && secs < 1.0,
          fmt("series %.12f vs product %.12f, |diff|=%.2e, %.3fs", v, ref, std::abs(v - ref), secs)};
}

// ---------------------------------------------------------------------------
// 3. Survival series vs limit-engine Monte Carlo (1e5 paths, grid 1e-4).
// ---------------------------------------------------------------------------
Outcome survival_vs_mc() {
  struct Set {
    const char* name;
    AnalyticsQuery q;
  };
  std::vector<Set> sets;
  {
    AnalyticsQuery q;  // symmetric driftless
    sets.push_back({"driftless", q});
  }
  {
    AnalyticsQuery q;  // aggregate drift of the balanced scenario
    q.mu = {-5.0, -5.0};
    q.sigma = {{{0.5, 0.0}, {0.0, 0.5}}};
    q.t = 0.2;
    sets.push_back({"balanced-aggregate", q});
  }
  for (double r : {0.5, -0.5}) {
    AnalyticsQuery q;
    q.sigma = {{{1.0, r}, {r, 1.0}}};
    q.t = 0.5;
    sets.push_back({r > 0 ? "rho=+0.5" : "rho=-0.5", q});
  }
  McBudget b;
  b.paths = 100000;
  b.grid_dt = 1e-4;
  b.seed = 2027;
  bool pass = true;
  std::ostringstream os;
  for (const auto& s : sets) {
    const auto cv = mc_cross_validate(s.q, b);
    const double z = std::abs(cv.mc_estimate - cv.analytic) / cv.se;
    pass = pass && z <= 3.0;
    os << fmt("%s t=%.2g: series %.5f mc %.5f se %.5f (%.2f SE); ", s.name, s.q.t, cv.analytic, cv.mc_estimate,
              cv.se, z);
  }
  return {pass, os.str()};
}

// ---------------------------------------------------------------------------
// 4. Driftless upward probability: closed form vs Monte Carlo.
// ---------------------------------------------------------------------------
Outcome upward_probability_check() {
  const Mat2d I{{{1.0, 0.0}, {0.0, 1.0}}};
  bool pass = true;
  std::ostringstream os;
  const auto exact = upward_probability({1.0, std::sqrt(3.0)}, {0.0, 0.0}, I);
  const double err = std::abs(exact.value - 1.0 / 3.0);
  pass = exact.closed_form && err <= 1e-10;
  os << fmt("(1,sqrt3) closed form %.15f (|err|=%.1e); ", exact.value, err);
  McBudget b;
  b.paths = 20000;
  b.grid_dt = 2.5e-4;
  b.upward_horizon = 100.0;
  b.seed = 2028;
  for (const Vec2d& x : {Vec2d{1.0, 1.0}, Vec2d{1.0, std::sqrt(3.0)}}) {
    AnalyticsQuery q;
    q.kind = QueryKind::Upward;
    q.x = x;
    q.sigma = I;
    const auto cv = mc_cross_validate(q, b);
    const double z = std::abs(cv.mc_estimate - cv.analytic) / cv.se;
    pass = pass && z <= 3.0;
    os << fmt("x=(%.3g,%.3g): closed %.5f mc %.5f se %.5f (%.2f SE, %.2f%% unresolved); ", x[0], x[1],
              cv.analytic, cv.mc_estimate, cv.se, z, 100.0 * cv.unresolved);
  }
  return {pass, os.str()};
}

// ---------------------------------------------------------------------------
// 5. Interface PDE vs the explicit reflected representation.
// ---------------------------------------------------------------------------
Outcome interface_vs_mc() {
  const auto ip = InterfaceParams::from_flow(0.25, 0.25, 0.0, -2.0, -2.0);
  double worst = 0.0;
  std::string where;
  std::uint64_t seed = 500;
  for (double t : {0.25, 0.5, 0.75, 1.0})
    for (double xF : {0.5, 1.0, 1.5})
      for (double xG : {0.5, 1.0, 1.5}) {
        const double v = interface_survival(xF, xG, ip, t);
        const auto [mc, se] = oracle::reflected_pair_survival(xF, xG, 0.25, 0.25, 0.0, -2.0, -2.0, t, 10000, 2.5e-4,
                                                             ++seed);
        if (std::abs(v - mc) > worst) {
          worst = std::abs(v - mc);
          where = fmt("t=%.2f x=(%.1f,%.1f) pde %.4f mc %.4f se %.4f", t, xF, xG, v, mc, se);
        }
      }
  return {worst <= 0.02, fmt("36 comparisons, max |pde - mc| = %.4f (tol 0.02) at %s", worst, where.c_str())};
}

// ---------------------------------------------------------------------------
// 6. Price-change count and range tables.
// ---------------------------------------------------------------------------
Outcome table_reproduction() {
  const auto t0 = Clock::now();
  TableConfig cfg;  // n = 10000, m = 1000, seed 42, single worker
  const auto table = run_price_change_table(cfg);
  const double secs = seconds_since(t0);
  // shared / F / G for scenarios a-d
  const double refN[4][3] = {{6.88, 11.91, 11.86}, {27.91, 34.99, 35.36}, {23.39, 50.34, 11.72}, {23.6, 35.19, 35.31}};
  const double refR[4][3] = {{3.10, 4.48, 4.44}, {18.36, 15.03, 15.13}, {6.85, 10.25, 4.43}, {6.71, 14.93, 15.48}};
  const char* col[3] = {"shared", "F", "G"};
  int rel_fail = 0, se_fail = 0;
  std::ostringstream os, bad;
  for (std::size_t s = 0; s < table.rows.size(); ++s) {
    const auto& row = table.rows[s];
    for (int c = 0; c < 3; ++c)
      for (int metric = 0; metric < 2; ++metric) {
        const MeanSe v = metric == 0 ? row.N[c] : row.R[c];
        const double ref = metric == 0 ? refN[s][c] : refR[s][c];
        const bool rel_ok = std::abs(v.mean - ref) <= 0.10 * ref;
        const bool se_ok = std::abs(v.mean - ref) <= 3.0 * v.se;
        rel_fail += !rel_ok;
        se_fail += !se_ok;
        if (!rel_ok || !se_ok)
          bad << fmt(" %s:%s_%s=%.3f(se %.3f) vs %.2f [%+.1f%%, %.1f SE]", row.scenario.c_str(),
                     metric == 0 ? "N" : "R", col[c], v.mean, v.se, ref, 100.0 * (v.mean / ref - 1.0),
                     (v.mean - ref) / v.se);
      }
  }
  os << fmt("24 entries: %d outside 10%%, %d outside 3 SE; %.1fs single-threaded (target 120s)", rel_fail, se_fail,
            secs);
  if (!bad.str().empty()) os << ";" << bad.str();
  return {rel_fail == 0 && se_fail == 0 && secs < 120.0, os.str()};
}

// ---------------------------------------------------------------------------
// 7. Regime-switch frequency in the balanced configuration.
// ---------------------------------------------------------------------------
Outcome switch_frequency() {
  const auto r = run_scenario(balanced_scenario());
  const double p = r.switch_probability;
  return {p >= 0.48 && p <= 0.58,
          fmt("m=%zu: switch probability %.4f (se %.4f), target [0.48, 0.58]; mean switches %.3f, mean terminal C %.4f",
              r.replications.size(), p, r.switch_probability_se, r.switches.mean, r.terminal_C.mean)};
}

// ---------------------------------------------------------------------------
// 8. Randomized invariant suite.
// ---------------------------------------------------------------------------
struct InvariantCounts {
  std::int64_t queue_negative = 0, capacity_out = 0, price_split_active = 0, capacity_moved_inactive = 0,
               simultaneous_national = 0, sum_identity = 0, recomposition = 0, complementarity = 0;
  std::int64_t switches = 0, inactive_steps = 0, reflections = 0;

  std::int64_t violations() const {
    return queue_negative + capacity_out + price_split_active + capacity_moved_inactive + simultaneous_national +
           sum_identity + recomposition + complementarity;
  }
};

template <class T>
void check_reflection(const GridPath<T, 2>& w, InvariantCounts& c) {
  const auto r = g_map(w);
  const std::size_t end = r.rec.absorbed_at ? *r.rec.absorbed_at : w.values.size();
  c.reflections += static_cast<std::int64_t>(r.rec.reflection_times.size());
  for (std::size_t k = 0; k < end; ++k) {
    const auto& g = r.g.values[k];
    const auto& L = r.rec.regulators.values[k];
    const auto& x = w.values[k];
    const auto d = [](T a, T b) { return std::abs(static_cast<double>(a) - static_cast<double>(b)); };
    if (g[0] < T(0) || g[1] < T(0)) ++c.queue_negative;
    if (d(g[0] + g[1], x[0] + x[1]) > 1e-12) ++c.sum_identity;
    if (d(g[0], x[0] + L[0] - L[1]) > 1e-12 || d(g[1], x[1] + L[1] - L[0]) > 1e-12) ++c.recomposition;
    if (k > 0) {
      const auto& Lp = r.rec.regulators.values[k - 1];
      for (int i = 0; i < 2; ++i)
        if (L[i] < Lp[i] || (L[i] > Lp[i] && g[i] != T(0))) ++c.complementarity;
    }
  }
}

Outcome invariant_suite() {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> n_pick(0, 2), kap(1, 8), qlo(1, 5), qspan(0, 15), coin(0, 1);
  std::uniform_real_distribution<double> mp(0.4, 0.62), ep(0.1, 1.0);
  std::normal_distribution<double> nd;
  const std::int64_t ns[3] = {400, 2500, 10000};
  InvariantCounts c;
  for (int run = 0; run < 1000; ++run) {
    ModelParams p;
    p.n = ns[n_pick(rng)];
    const double dv = 1.0 / std::sqrt(static_cast<double>(p.n));
    p.kappa_minus = kap(rng) * dv;
    p.kappa_plus = kap(rng) * dv;
    auto random_flow = [&] {
      FlowParams f;
      double s = 0.0;
      for (auto& e : f.event_probs) s += (e = ep(rng));
      for (auto& e : f.event_probs) e /= s;
      f.event_probs[3] = 1.0 - f.event_probs[0] - f.event_probs[1] - f.event_probs[2];
      for (auto& m : f.market_prob) m = mp(rng);
      return f;
    };
    p.flow = random_flow();
    if (coin(rng)) p.regime_overrides = random_flow();
    const auto vp = validate_params(p);
    const std::int64_t lo = qlo(rng), hi = lo + qspan(rng);
    Rng irng = make_rng(static_cast<std::uint64_t>(run), Stream::InitialQueues);
    MarketState s0;
    s0.Q = uniform_reinit<std::int64_t>(lo, hi).f_plus(irng);
    auto reinit = uniform_micro(lo, hi, static_cast<std::uint64_t>(run));
    OrderSource src(vp, make_rng(static_cast<std::uint64_t>(run), Stream::Orders));
    const auto t = run_regime_switching(s0, vp.steps, [&](Regime r) { return src.next(r); }, reinit, vp);
    c.switches += t.summary.switches;
    for (std::size_t k = 0; k < t.states.size(); ++k) {
      const auto& s = t.states[k];
      for (auto q : s.Q) c.queue_negative += q < 0;
      c.capacity_out += s.C > vp.kappa_plus_units || s.C < -vp.kappa_minus_units;
      if (s.regime == Regime::Active) c.price_split_active += s.B_F != s.B_G;
      if (k > 0 && s.regime == Regime::Inactive) {
        const auto& prev = t.states[k - 1];
        ++c.inactive_steps;
        if (prev.regime == Regime::Inactive) c.capacity_moved_inactive += s.C != prev.C;
        c.simultaneous_national += s.B_F != prev.B_F && s.B_G != prev.B_G;
      }
    }

    // Reflection identities on an integer walk and a Gaussian path.
    GridPath<std::int64_t, 2> wi;
    GridPath<double, 2> wd;
    wi.values.push_back({s0.Q[0], s0.Q[2]});
    wd.values.push_back({static_cast<double>(s0.Q[0]) * dv, static_cast<double>(s0.Q[2]) * dv});
    std::uniform_int_distribution<int> step(0, 3);
    for (int k = 0; k < 2000; ++k) {
      auto vi = wi.values.back();
      const int e = step(rng);
      vi[e / 2] += (e % 2) ? 1 : -1;
      wi.values.push_back(vi);
      auto vd = wd.values.back();
      vd[0] += 0.02 * nd(rng);
      vd[1] += 0.02 * nd(rng);
      wd.values.push_back(vd);
    }
    check_reflection(wi, c);
    check_reflection(wd, c);
  }
  std::ostringstream os;
  os << "1000 runs (" << c.switches << " regime switches, " << c.inactive_steps << " inactive steps, "
     << c.reflections << " reflection phases); violations: queues<0 " << c.queue_negative << ", capacity "
     << c.capacity_out << ", active price split " << c.price_split_active << ", inactive capacity move "
     << c.capacity_moved_inactive << ", simultaneous national jumps " << c.simultaneous_national
     << ", sum identity " << c.sum_identity << ", recomposition " << c.recomposition << ", complementarity "
     << c.complementarity;
  return {c.violations() == 0 && c.switches > 0, os.str()};
}

// ---------------------------------------------------------------------------
// 9. Walk-range formula vs exhaustive enumeration.
// ---------------------------------------------------------------------------
Outcome range_enumeration() {
  double worst = 0.0;
  int checked = 0;
  for (double p : {0.5, 0.3, 0.7, 0.15, 0.9}) {
    for (int k = 0; k <= 12; ++k) {
      const auto d = oracle::walk_range_enumeration(k, p);
      for (int n = 0; n <= 4; ++n) {
        double ref = 0.0;
        for (const auto& [r, w] : d)
          if (r <= n) ref += w;
        worst = std::max(worst, std::abs(walk_range_cdf(k, n, p) - ref));
        ++checked;
      }
    }
  }
  // Exact integer path counts for the symmetric walk.
  double worst_counts = 0.0;
  for (int k = 0; k <= 12; ++k) {
    const auto d = oracle::walk_range_counts(k);
    for (int n = 0; n <= 4; ++n) {
      std::uint64_t cnt = 0;
      for (const auto& [r, c] : d)
        if (r <= n) cnt += c;
      const double total = std::ldexp(1.0, k);
      worst_counts = std::max(worst_counts, std::abs(walk_range_cdf(k, n, 0.5) - static_cast<double>(cnt) / total));
    }
  }
  return {worst <= 1e-12 && worst_counts <= 1e-12,
          fmt("%d (p,k,n) cases, k<=12, n<=4: max |formula - enumeration| = %.2e, vs exact counts %.2e", checked,
              worst, worst_counts)};
}

// ---------------------------------------------------------------------------
// 10. Qualitative monotonicity of the survival probability.
// ---------------------------------------------------------------------------
Outcome survival_monotonicity() {
  const Vec2d x{1.0, 1.0};
  const double t = 1.0;
  int pairs = 0, violations = 0;
  std::string first_bad;
  auto check = [&](const std::vector<double>& v, bool increasing, const std::string& label) {
    for (std::size_t i = 1; i < v.size(); ++i) {
      ++pairs;
      const bool ok = increasing ? v[i] > v[i - 1] : v[i] < v[i - 1];
      if (!ok) {
        ++violations;
        if (first_bad.empty()) first_bad = label + fmt(" at index %zu: %.10f -> %.10f", i, v[i - 1], v[i]);
      }
    }
  };
  const std::vector<double> mus{-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0};
  const std::vector<double> rhos{-0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75};
  // Increasing in the common mean, for several bid/ask variance splits.
  for (double sb : {0.25, 0.5, 0.75}) {
    std::vector<double> v;
    for (double m : mus) v.push_back(survival_probability(x, {m, m}, {{{sb, 0.0}, {0.0, 1.0 - sb}}}, t));
    check(v, true, fmt("mean (sigma_b^2=%.2f)", sb));
  }
  // Decreasing in the bid-bid cross-country correlation (national variances 0.25).
  for (double m : {-1.0, 0.0, 1.0}) {
    std::vector<double> v;
    for (double r : rhos) v.push_back(survival_probability(x, {m, m}, {{{0.5 * (1.0 + r), 0.0}, {0.0, 0.5}}}, t));
    check(v, false, fmt("rho bF,bG (mu=%.0f)", m));
  }
  // Increasing in the bid-ask cross-country correlation.
  for (double m : {-1.0, 0.0, 1.0})
    for (double sb : {0.25, 0.5, 0.75}) {
      const double sa = 1.0 - sb;
      std::vector<double> v;
      for (double r : rhos) {
        const double c = r * std::sqrt(sb * sa) / 2.0;
        v.push_back(survival_probability(x, {m, m}, {{{sb, c}, {c, sa}}}, t));
      }
      check(v, true, fmt("rho bF,aG (mu=%.0f, sigma_b^2=%.2f)", m, sb));
    }
  return {violations == 0, fmt("%d strict pairwise comparisons, %d violations%s%s", pairs, violations,
                               first_bad.empty() ? "" : "; first: ", first_bad.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  bool strict = false;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--strict") {
      strict = true;
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
    } else {
      std::cerr << "usage: acceptance [--strict] [--only k,...]\n";
      return 2;
    }
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"micro engine equals path maps", micro_map_equivalence},
      {"analytic survival vs product oracle", survival_product_oracle},
      {"survival vs limit-engine Monte Carlo", survival_vs_mc},
      {"upward probability closed form", upward_probability_check},
      {"interface PDE vs reflected Monte Carlo", interface_vs_mc},
      {"price-change and range tables", table_reproduction},
      {"balanced regime-switch frequency", switch_frequency},
      {"randomized invariant suite", invariant_suite},
      {"walk-range formula vs enumeration", range_enumeration},
      {"survival monotonicity orderings", survival_monotonicity},
  };
  int passed = 0, failed = 0;
  bool crashed = false;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int k = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(k)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
      crashed = true;
    }
    (o.pass ? passed : failed) += 1;
    std::cout << "criterion " << k << ": " << (o.pass ? "PASS" : "FAIL") << " [" << criteria[i].first << "] "
              << o.detail << fmt(" (%.1fs)", seconds_since(t0)) << std::endl;
  }
  std::cout << "summary: " << passed << " passed, " << failed << " failed" << std::endl;
  if (crashed) return 1;
  return (strict && failed > 0) ? 1 : 0;
}
