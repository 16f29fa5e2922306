#pragma once
// Command-line dispatch, JSON configuration ingestion and CSV emission.
//
// Exit codes: 0 success, 1 unexpected failure, 2 invalid configuration or
// arguments, 3 I/O failure, 4 any other structured model/analytics error.
// The default output directory is taken from XBORDER_OUTPUT_DIR (else ".").

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "analytics.hpp"
#include "core_model.hpp"
#include "experiments.hpp"
#include "limit_engine.hpp"
#include "micro_engine.hpp"
#include "order_flow.hpp"
#include "reinit.hpp"

namespace xborder {

using Json = nlohmann::json;

struct RunConfig {
  std::string command;
  std::string config_path;
  std::string output_dir = ".";
  std::optional<std::uint64_t> master_seed;
  int worker_count = 1;
  std::vector<std::string> overrides;  // key=value, dotted keys, JSON values
};

// ---------------------------------------------------------------------------
// JSON helpers
// ---------------------------------------------------------------------------

namespace cfg {

inline void require_object(const Json& j, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, where + " must be a JSON object");
}

// Rejects keys outside `allowed` (typos must not silently fall back to defaults).
inline void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  require_object(j, where);
  std::vector<std::string> bad;
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) bad.push_back(where + ": unknown key '" + k + "'");
  if (!bad.empty()) throw Error(ErrorCode::ConfigInvalid, bad.front(), bad);
}

template <class T>
T get(const Json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, "key '" + key + "': " + e.what());
  }
}

inline Vec4d get_vec4(const Json& j, const std::string& key, Vec4d fallback) {
  if (!j.contains(key)) return fallback;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 4) throw Error(ErrorCode::ConfigInvalid, "key '" + key + "' must be an array of 4 numbers");
  Vec4d v{};
  for (int i = 0; i < 4; ++i) {
    if (!a[i].is_number()) throw Error(ErrorCode::ConfigInvalid, "key '" + key + "' must hold numbers");
    v[i] = a[i].get<double>();
  }
  return v;
}

// null or "inf" denote an unbounded capacity.
inline double get_capacity(const Json& j, const std::string& key) {
  if (!j.contains(key) || j.at(key).is_null()) return kInfiniteCapacity;
  const auto& v = j.at(key);
  if (v.is_string() && v.get<std::string>() == "inf") return kInfiniteCapacity;
  if (!v.is_number()) throw Error(ErrorCode::ConfigInvalid, "key '" + key + "' must be a number, null or \"inf\"");
  return v.get<double>();
}

inline FlowParams parse_flow(const Json& j, FlowParams f, const std::string& where) {
  check_keys(j, {"event_probs", "market_prob"}, where);
  f.event_probs = get_vec4(j, "event_probs", f.event_probs);
  f.market_prob = get_vec4(j, "market_prob", f.market_prob);
  return f;
}

inline ModelParams parse_model(const Json& j, ModelParams p = {}) {
  check_keys(j,
             {"n", "T", "tick", "kappa_minus", "kappa_plus", "event_probs", "market_prob", "dependence_order",
              "inactive_flow"},
             "model");
  p.n = get<std::int64_t>(j, "n", p.n);
  p.horizon_T = get<double>(j, "T", p.horizon_T);
  p.tick_delta = get<double>(j, "tick", p.tick_delta);
  if (j.contains("kappa_minus")) p.kappa_minus = get_capacity(j, "kappa_minus");
  if (j.contains("kappa_plus")) p.kappa_plus = get_capacity(j, "kappa_plus");
  p.flow.event_probs = get_vec4(j, "event_probs", p.flow.event_probs);
  p.flow.market_prob = get_vec4(j, "market_prob", p.flow.market_prob);
  p.dependence_order = get<int>(j, "dependence_order", p.dependence_order);
  if (j.contains("inactive_flow")) {
    if (j.at("inactive_flow").is_null()) p.regime_overrides.reset();
    else p.regime_overrides = parse_flow(j.at("inactive_flow"), p.regime_overrides.value_or(p.flow), "inactive_flow");
  }
  return p;
}

struct RangeSpec {
  std::int64_t lo = 10, hi = 20;
};

inline RangeSpec parse_range(const Json& j, RangeSpec r, const std::string& where) {
  check_keys(j, {"lo", "hi"}, where);
  r.lo = get<std::int64_t>(j, "lo", r.lo);
  r.hi = get<std::int64_t>(j, "hi", r.hi);
  if (r.lo < 1 || r.hi < r.lo) throw Error(ErrorCode::ConfigInvalid, where + ": need 1 <= lo <= hi");
  return r;
}

// Applies key=value overrides; the key is a dotted path, the value JSON
// (bare words are taken as strings).
inline void apply_overrides(Json& j, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw Error(ErrorCode::ConfigInvalid, "override '" + o + "' is not key=value");
    const std::string key = o.substr(0, eq), val = o.substr(eq + 1);
    Json v;
    try {
      v = Json::parse(val);
    } catch (const Json::exception&) {
      v = val;
    }
    Json* node = &j;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      if (!node->contains(parts[i])) (*node)[parts[i]] = Json::object();
      node = &(*node)[parts[i]];
      if (!node->is_object()) throw Error(ErrorCode::ConfigInvalid, "override '" + key + "' descends into a non-object");
    }
    (*node)[parts.back()] = v;
  }
}

inline Json load_json(const std::string& path) {
  if (path.empty()) return Json::object();
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot open config file '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, "config file '" + path + "' is not valid JSON: " + e.what());
  }
}

// "1,2" -> {1, 2}
inline std::vector<double> parse_list(const std::string& s, const std::string& what) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(tok, &used));
      if (used != tok.size() && tok.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigInvalid, what + ": cannot parse '" + tok + "' as a number");
    }
  }
  return v;
}

inline Vec2d parse_vec2(const std::string& s, const std::string& what) {
  const auto v = parse_list(s, what);
  if (v.size() != 2) throw Error(ErrorCode::ConfigInvalid, what + " needs two comma-separated numbers");
  return {v[0], v[1]};
}

// "I" (identity), "s11,s12,s21,s22" or "s11,s22,s12".
inline Mat2d parse_sigma(const std::string& s) {
  if (s == "I") return {{{1.0, 0.0}, {0.0, 1.0}}};
  const auto v = parse_list(s, "--sigma");
  if (v.size() == 4) return {{{v[0], v[1]}, {v[2], v[3]}}};
  if (v.size() == 3) return {{{v[0], v[2]}, {v[2], v[1]}}};
  throw Error(ErrorCode::ConfigInvalid, "--sigma must be I, s11,s12,s21,s22 or s11,s22,s12");
}

}  // namespace cfg

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

class OutputDir {
 public:
  explicit OutputDir(std::string dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec || !std::filesystem::is_directory(dir_))
      throw Error(ErrorCode::IoError, "cannot create output directory '" + dir_ + "'");
  }

  template <class Writer>
  std::string write(const std::string& name, Writer&& w) const {
    const auto path = (std::filesystem::path(dir_) / name).string();
    std::ofstream os(path);
    if (!os) throw Error(ErrorCode::IoError, "cannot open '" + path + "' for writing");
    os << std::setprecision(9);
    w(os);
    os.flush();
    if (!os) throw Error(ErrorCode::IoError, "write to '" + path + "' failed");
    return path;
  }

 private:
  std::string dir_;
};

inline std::string default_output_dir() {
  const char* env = std::getenv("XBORDER_OUTPUT_DIR");
  return (env && *env) ? env : ".";
}

inline int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::ConfigInvalid: return 2;
    case ErrorCode::IoError: return 3;
    default: return 4;
  }
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

namespace commands {

struct SimulationConfig {
  ModelParams model{};
  std::string mode = "active";  // active | inactive | switching
  cfg::RangeSpec initial{10, 20};
  cfg::RangeSpec reinit{10, 20};
  std::uint64_t seed = 42;
  std::uint64_t replication = 0;
  bool handoff_adds_order = true;
  double grid_dt = 1e-4;
  std::int64_t record_every = 1;
};

inline SimulationConfig parse_simulation(const Json& j, bool limit) {
  std::set<std::string> keys{"model", "mode", "initial_queues", "reinit", "seed", "replication"};
  if (limit) keys.insert({"grid_dt", "record_every"});
  else keys.insert("handoff_adds_order");
  cfg::check_keys(j, keys, "config");
  SimulationConfig c;
  if (j.contains("model")) c.model = cfg::parse_model(j.at("model"));
  c.mode = cfg::get<std::string>(j, "mode", c.mode);
  if (c.mode != "active" && c.mode != "inactive" && c.mode != "switching")
    throw Error(ErrorCode::ConfigInvalid, "mode must be active, inactive or switching");
  if (j.contains("initial_queues")) c.initial = cfg::parse_range(j.at("initial_queues"), c.initial, "initial_queues");
  if (j.contains("reinit")) c.reinit = cfg::parse_range(j.at("reinit"), c.reinit, "reinit");
  c.seed = cfg::get<std::uint64_t>(j, "seed", c.seed);
  c.replication = cfg::get<std::uint64_t>(j, "replication", c.replication);
  c.handoff_adds_order = cfg::get<bool>(j, "handoff_adds_order", c.handoff_adds_order);
  c.grid_dt = cfg::get<double>(j, "grid_dt", c.grid_dt);
  c.record_every = cfg::get<std::int64_t>(j, "record_every", c.record_every);
  if (!(c.grid_dt > 0.0) || c.record_every < 1) throw Error(ErrorCode::ConfigInvalid, "grid_dt and record_every must be positive");
  return c;
}

inline int simulate_micro(const Json& j, const OutputDir& out, std::ostream& log) {
  const auto c = parse_simulation(j, false);
  const auto vp = validate_params(c.model);
  Rng irng = make_rng(c.seed, Stream::InitialQueues, c.replication);
  MarketState s0;
  s0.Q = uniform_reinit<std::int64_t>(c.initial.lo, c.initial.hi).f_plus(irng);
  MicroReinit reinit(uniform_reinit<std::int64_t>(c.reinit.lo, c.reinit.hi), c.seed, c.replication);
  RunOptions opt;
  opt.handoff_adds_order = c.handoff_adds_order;
  Trajectory t;
  if (c.mode == "switching") {
    OrderSource src(vp, make_rng(c.seed, Stream::Orders, c.replication));
    t = run_regime_switching(s0, vp.steps, [&](Regime r) { return src.next(r); }, reinit, vp, opt);
  } else {
    const auto stream = generate_stream(c.seed, vp, c.replication);
    if (c.mode == "active") {
      t = run_active(s0, stream, reinit, opt);
    } else {
      s0.regime = Regime::Inactive;
      t = run_inactive(s0, stream, reinit, opt);
    }
  }
  out.write("trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, t, vp.dv, vp.p.tick_delta); });
  out.write("events.csv", [&](std::ostream& os) { write_events_csv(os, t); });
  log << std::setprecision(9) << "simulate-micro mode=" << c.mode << " seed=" << c.seed
      << " price_changes=" << t.summary.price_changes << " switches=" << t.summary.switches
      << " final_B_F=" << static_cast<double>(t.summary.final_state.B_F) * vp.p.tick_delta
      << " final_B_G=" << static_cast<double>(t.summary.final_state.B_G) * vp.p.tick_delta << '\n';
  return 0;
}

inline int simulate_limit(const Json& j, const OutputDir& out, std::ostream& log) {
  const auto c = parse_simulation(j, true);
  const auto vp = validate_params(c.model);
  Rng irng = make_rng(c.seed, Stream::InitialQueues, c.replication);
  const auto q0 = uniform_reinit<double>(c.initial.lo, c.initial.hi, vp.dv).f_plus(irng);
  const BmSpec spec = detail::limit_spec_from_params(vp, q0, c.grid_dt);
  const auto r = uniform_reinit<double>(c.reinit.lo, c.reinit.hi, vp.dv);
  LimitOptions opt;
  opt.record_every = c.record_every;
  LimitState s0;
  LimitTrajectory t;
  if (c.mode == "active") {
    t = simulate_active_limit(s0, c.seed, spec, r, vp.p.horizon_T, opt, c.replication);
  } else if (c.mode == "inactive") {
    s0.regime = Regime::Inactive;
    t = simulate_inactive_limit(s0, c.seed, spec, r, vp.p.horizon_T, opt, c.replication);
  } else {
    t = simulate_regime_switching_limit(s0, c.seed, spec, r, vp.p.kappa_minus, vp.p.kappa_plus, vp.p.horizon_T, opt,
                                        c.replication);
  }
  out.write("limit_trajectory.csv", [&](std::ostream& os) { write_limit_trajectory_csv(os, t, vp.p.tick_delta); });
  log << std::setprecision(9) << "simulate-limit mode=" << c.mode << " seed=" << c.seed
      << " price_changes=" << t.summary.price_changes << " switches=" << t.summary.switches
      << " final_B_F=" << static_cast<double>(t.summary.final_state.B_F) * vp.p.tick_delta
      << " final_B_G=" << static_cast<double>(t.summary.final_state.B_G) * vp.p.tick_delta << '\n';
  return 0;
}

inline TableConfig parse_tables(const Json& j) {
  cfg::check_keys(j, {"n", "replications", "seed", "initial_queues", "reinit", "scenarios", "workers"}, "config");
  TableConfig c;
  c.n = cfg::get<std::int64_t>(j, "n", c.n);
  c.replications = cfg::get<std::int64_t>(j, "replications", c.replications);
  c.master_seed = cfg::get<std::uint64_t>(j, "seed", c.master_seed);
  c.workers = cfg::get<int>(j, "workers", c.workers);
  if (j.contains("initial_queues")) {
    const auto r = cfg::parse_range(j.at("initial_queues"), {c.initial_lo, c.initial_hi}, "initial_queues");
    c.initial_lo = r.lo;
    c.initial_hi = r.hi;
  }
  if (j.contains("reinit")) {
    const auto r = cfg::parse_range(j.at("reinit"), {c.reinit_lo, c.reinit_hi}, "reinit");
    c.reinit_lo = r.lo;
    c.reinit_hi = r.hi;
  }
  c.scenarios = cfg::get<std::vector<std::string>>(j, "scenarios", c.scenarios);
  return c;
}

inline ScenarioSpec parse_scenario(const Json& j) {
  cfg::check_keys(j,
                  {"preset", "name", "model", "replications", "seed", "engine", "initial_queues", "reinit", "grid_dt",
                   "workers"},
                  "config");
  const auto preset = cfg::get<std::string>(j, "preset", "balanced");
  ScenarioSpec s;
  if (preset == "balanced") s = balanced_scenario();
  else if (preset == "imbalanced") s = imbalanced_scenario();
  else if (preset == "regime_dependent") s = regime_dependent_scenario();
  else if (preset != "none") throw Error(ErrorCode::ConfigInvalid, "unknown preset '" + preset + "'");
  s.name = cfg::get<std::string>(j, "name", s.name);
  if (j.contains("model")) s.params = cfg::parse_model(j.at("model"), s.params);
  s.replications = cfg::get<std::int64_t>(j, "replications", s.replications);
  s.master_seed = cfg::get<std::uint64_t>(j, "seed", s.master_seed);
  const auto engine = cfg::get<std::string>(j, "engine", "micro");
  if (engine == "micro") s.engine = EngineKind::Micro;
  else if (engine == "limit") s.engine = EngineKind::Limit;
  else throw Error(ErrorCode::ConfigInvalid, "engine must be micro or limit");
  if (j.contains("initial_queues")) {
    const auto r = cfg::parse_range(j.at("initial_queues"), {s.initial_lo, s.initial_hi}, "initial_queues");
    s.initial_lo = r.lo;
    s.initial_hi = r.hi;
  }
  if (j.contains("reinit")) {
    const auto r = cfg::parse_range(j.at("reinit"), {s.reinit_lo, s.reinit_hi}, "reinit");
    s.reinit_lo = r.lo;
    s.reinit_hi = r.hi;
  }
  s.limit_grid_dt = cfg::get<double>(j, "grid_dt", s.limit_grid_dt);
  s.workers = cfg::get<int>(j, "workers", s.workers);
  return s;
}

inline int experiment_tables(Json j, const OutputDir& out, std::ostream& log) {
  const auto c = parse_tables(j);
  const auto table = run_price_change_table(c);
  out.write("table.csv", [&](std::ostream& os) { write_table_csv(os, table); });
  log << std::setprecision(9) << "experiment tables seed=" << c.master_seed << " replications=" << c.replications;
  for (const auto& r : table.rows)
    log << ' ' << r.scenario << ":N=" << r.N[0].mean << '/' << r.N[1].mean << '/' << r.N[2].mean;
  log << '\n';
  return 0;
}

inline int experiment_scenario(const Json& j, const OutputDir& out, std::ostream& log) {
  const auto s = parse_scenario(j);
  const auto res = run_scenario(s);
  const auto vp = validate_params(s.params);
  out.write("scenario_summary.csv", [&](std::ostream& os) { write_scenario_summary_csv(os, res); });
  if (s.engine == EngineKind::Micro) {
    out.write("trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, res.first, vp.dv, vp.p.tick_delta); });
    out.write("events.csv", [&](std::ostream& os) { write_events_csv(os, res.first); });
  } else {
    out.write("limit_trajectory.csv",
              [&](std::ostream& os) { write_limit_trajectory_csv(os, res.first_limit, vp.p.tick_delta); });
  }
  log << std::setprecision(9) << "experiment scenario name=" << res.name << " seed=" << s.master_seed
      << " replications=" << s.replications << " switch_probability=" << res.switch_probability
      << " se=" << res.switch_probability_se << " mean_terminal_C=" << res.terminal_C.mean << '\n';
  return 0;
}

inline QueryKind parse_kind(const std::string& k) {
  if (k == "survival") return QueryKind::Survival;
  if (k == "upward") return QueryKind::Upward;
  if (k == "range") return QueryKind::Range;
  throw Error(ErrorCode::ConfigInvalid, "query kind must be survival, upward or range");
}

inline int experiment_cross_validate(const Json& j, const OutputDir& out, std::ostream& log) {
  cfg::check_keys(j, {"query", "budget"}, "config");
  AnalyticsQuery q;
  McBudget b;
  if (j.contains("query")) {
    const auto& jq = j.at("query");
    cfg::check_keys(jq, {"kind", "x", "mu", "sigma", "t", "n"}, "query");
    q.kind = parse_kind(cfg::get<std::string>(jq, "kind", "survival"));
    auto v2 = [&](const char* key, Vec2d d) {
      const auto v = cfg::get<std::vector<double>>(jq, key, {d[0], d[1]});
      if (v.size() != 2) throw Error(ErrorCode::ConfigInvalid, std::string("query.") + key + " needs 2 numbers");
      return Vec2d{v[0], v[1]};
    };
    q.x = v2("x", q.x);
    q.mu = v2("mu", q.mu);
    if (jq.contains("sigma")) {
      const auto m = cfg::get<std::vector<std::vector<double>>>(jq, "sigma", {});
      if (m.size() != 2 || m[0].size() != 2 || m[1].size() != 2)
        throw Error(ErrorCode::ConfigInvalid, "query.sigma must be a 2x2 array");
      q.sigma = {{{m[0][0], m[0][1]}, {m[1][0], m[1][1]}}};
    }
    q.t = cfg::get<double>(jq, "t", q.t);
    q.n = cfg::get<int>(jq, "n", q.n);
  }
  if (j.contains("budget")) {
    const auto& jb = j.at("budget");
    cfg::check_keys(jb, {"paths", "grid_dt", "seed", "bridge_weight", "upward_horizon", "workers"}, "budget");
    b.paths = cfg::get<std::int64_t>(jb, "paths", b.paths);
    b.grid_dt = cfg::get<double>(jb, "grid_dt", b.grid_dt);
    b.seed = cfg::get<std::uint64_t>(jb, "seed", b.seed);
    b.bridge_weight = cfg::get<bool>(jb, "bridge_weight", b.bridge_weight);
    b.upward_horizon = cfg::get<double>(jb, "upward_horizon", b.upward_horizon);
    b.workers = cfg::get<int>(jb, "workers", b.workers);
  }
  const auto cv = mc_cross_validate(q, b);
  out.write("cross_validation.csv", [&](std::ostream& os) {
    os << "analytic,mc_estimate,se,null_se,unresolved\n"
       << cv.analytic << ',' << cv.mc_estimate << ',' << cv.se << ',' << cv.null_se << ',' << cv.unresolved << '\n';
  });
  log << std::setprecision(9) << "experiment cross-validate analytic=" << cv.analytic << " mc=" << cv.mc_estimate
      << " se=" << cv.se << " within_3se=" << (cv.within(3.0) ? "yes" : "no") << '\n';
  return 0;
}

}  // namespace commands

// ---------------------------------------------------------------------------
// Dispatcher
// ---------------------------------------------------------------------------

inline int dispatch(int argc, const char* const* argv, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Cross-border limit order book simulator and analytics"};
  app.require_subcommand(1);
  RunConfig rc;
  rc.output_dir = default_output_dir();
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sc, bool with_config) {
    if (with_config) sc->add_option("--config", rc.config_path, "JSON configuration file");
    sc->add_option("--output-dir", rc.output_dir, "directory for CSV output (default $XBORDER_OUTPUT_DIR or .)");
    if (with_config) {
      sc->add_option("--seed", seed, "master seed (overrides the config)");
      sc->add_option("--workers", rc.worker_count, "worker threads for experiments")->check(CLI::PositiveNumber);
      sc->add_option("--set", rc.overrides, "config override key=value (dotted keys, JSON values)");
    }
  };

  auto* sim_micro = app.add_subcommand("simulate-micro", "order-by-order simulation");
  add_common(sim_micro, true);
  auto* sim_limit = app.add_subcommand("simulate-limit", "diffusion-limit simulation");
  add_common(sim_limit, true);

  auto* analytics = app.add_subcommand("analytics", "closed-form and numerical analytics");
  analytics->require_subcommand(1);
  std::string xs = "1,1", mus = "0,0", sigmas = "I", zs = "1";
  double t = 1.0;
  int n_max = 4;
  double sF2 = 0.25, sG2 = 0.25, cov = 0.0, muF = 0.0, muG = 0.0, xF = 1.0, xG = 1.0;
  PdeControl pde;
  auto add_planar = [&](CLI::App* sc, bool with_mu, bool with_t) {
    sc->add_option("--x", xs, "start point x1,x2");
    if (with_mu) sc->add_option("--mu", mus, "drift mu1,mu2");
    sc->add_option("--sigma", sigmas, "covariance: I | s11,s12,s21,s22 | s11,s22,s12");
    if (with_t) sc->add_option("--t", t, "time horizon")->check(CLI::PositiveNumber);
    sc->add_option("--output-dir", rc.output_dir, "directory for CSV output");
  };
  auto* a_surv = analytics->add_subcommand("survival", "P[no price change before t]");
  add_planar(a_surv, true, true);
  auto* a_up = analytics->add_subcommand("upward", "probability that the first price change is upward");
  add_planar(a_up, true, false);
  auto* a_exit = analytics->add_subcommand("exit-density", "density of the bid queue when the ask side depletes");
  add_planar(a_exit, false, false);
  a_exit->add_option("--z", zs, "comma-separated evaluation points");
  auto* a_range = analytics->add_subcommand("range", "distribution of the price range");
  add_planar(a_range, true, true);
  a_range->add_option("--n-max", n_max, "largest range (ticks)")->check(CLI::NonNegativeNumber);
  auto* a_pde = analytics->add_subcommand("interface-pde", "survival of the importing direction via the interface PDE");
  a_pde->add_option("--sigmaF2", sF2, "variance of the foreign flow");
  a_pde->add_option("--sigmaG2", sG2, "variance of the domestic flow");
  a_pde->add_option("--cov", cov, "covariance of the two flows");
  a_pde->add_option("--muF", muF, "drift of the foreign flow");
  a_pde->add_option("--muG", muG, "drift of the domestic flow");
  a_pde->add_option("--xF", xF, "foreign queue");
  a_pde->add_option("--xG", xG, "domestic queue");
  a_pde->add_option("--t", t, "time horizon")->check(CLI::PositiveNumber);
  a_pde->add_option("--n-space", pde.n_space, "grid intervals per axis")->check(CLI::Range(4, 4000));
  a_pde->add_option("--n-time", pde.n_time, "time steps per unit time")->check(CLI::PositiveNumber);
  a_pde->add_option("--output-dir", rc.output_dir, "directory for CSV output");

  auto* experiment = app.add_subcommand("experiment", "scripted Monte Carlo studies");
  experiment->require_subcommand(1);
  auto* e_tables = experiment->add_subcommand("tables", "shared vs national price changes and ranges");
  add_common(e_tables, true);
  auto* e_scen = experiment->add_subcommand("scenario", "regime-switching market scenario");
  add_common(e_scen, true);
  auto* e_cv = experiment->add_subcommand("cross-validate", "Monte Carlo check of an analytic quantity");
  add_common(e_cv, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, log, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, log, err);
  } catch (const CLI::ParseError& e) {
    err << "error: ConfigInvalid: " << e.what() << '\n';
    return 2;
  }

  try {
    auto seed_given = [&](CLI::App* sc) { return sc->count("--seed") > 0; };
    auto load = [&](CLI::App* sc, const char* seed_key) {
      Json j = cfg::load_json(rc.config_path);
      cfg::require_object(j, "config");
      cfg::apply_overrides(j, rc.overrides);
      if (seed_given(sc)) rc.master_seed = seed;
      if (rc.master_seed) cfg::apply_overrides(j, {std::string(seed_key) + "=" + std::to_string(*rc.master_seed)});
      if (sc->count("--workers")) cfg::apply_overrides(j, {"workers=" + std::to_string(rc.worker_count)});
      return j;
    };

    if (sim_micro->parsed()) return commands::simulate_micro(load(sim_micro, "seed"), OutputDir(rc.output_dir), log);
    if (sim_limit->parsed()) return commands::simulate_limit(load(sim_limit, "seed"), OutputDir(rc.output_dir), log);
    if (e_tables->parsed()) return commands::experiment_tables(load(e_tables, "seed"), OutputDir(rc.output_dir), log);
    if (e_scen->parsed()) return commands::experiment_scenario(load(e_scen, "seed"), OutputDir(rc.output_dir), log);
    if (e_cv->parsed()) {
      Json j = cfg::load_json(rc.config_path);
      cfg::require_object(j, "config");
      cfg::apply_overrides(j, rc.overrides);
      if (seed_given(e_cv)) cfg::apply_overrides(j, {"budget.seed=" + std::to_string(seed)});
      if (e_cv->count("--workers")) cfg::apply_overrides(j, {"budget.workers=" + std::to_string(rc.worker_count)});
      return commands::experiment_cross_validate(j, OutputDir(rc.output_dir), log);
    }

    log << std::setprecision(9);
    if (a_surv->parsed()) {
      const Vec2d x = cfg::parse_vec2(xs, "--x"), mu = cfg::parse_vec2(mus, "--mu");
      const Mat2d s = cfg::parse_sigma(sigmas);
      const double v = survival_probability(x, mu, s, t);
      OutputDir(rc.output_dir).write("survival.csv", [&](std::ostream& os) {
        os << "x1,x2,mu1,mu2,t,survival\n" << x[0] << ',' << x[1] << ',' << mu[0] << ',' << mu[1] << ',' << t << ','
           << v << '\n';
      });
      log << "survival " << v << '\n';
      return 0;
    }
    if (a_up->parsed()) {
      const Vec2d x = cfg::parse_vec2(xs, "--x"), mu = cfg::parse_vec2(mus, "--mu");
      const auto u = upward_probability(x, mu, cfg::parse_sigma(sigmas));
      OutputDir(rc.output_dir).write("upward.csv", [&](std::ostream& os) {
        os << "x1,x2,mu1,mu2,upward,se,closed_form\n" << x[0] << ',' << x[1] << ',' << mu[0] << ',' << mu[1] << ','
           << u.value << ',' << u.se << ',' << (u.closed_form ? 1 : 0) << '\n';
      });
      log << "upward " << u.value << " se=" << u.se << (u.closed_form ? " closed_form" : " monte_carlo") << '\n';
      return 0;
    }
    if (a_exit->parsed()) {
      const Vec2d x = cfg::parse_vec2(xs, "--x");
      const Mat2d s = cfg::parse_sigma(sigmas);
      const auto z = cfg::parse_list(zs, "--z");
      std::vector<double> d;
      for (double v : z) d.push_back(exit_location_density(x, s, v));
      OutputDir(rc.output_dir).write("exit_density.csv", [&](std::ostream& os) {
        os << "z,density\n";
        for (std::size_t i = 0; i < z.size(); ++i) os << z[i] << ',' << d[i] << '\n';
      });
      log << "exit-density points=" << z.size() << " first=" << (d.empty() ? 0.0 : d.front()) << '\n';
      return 0;
    }
    if (a_range->parsed()) {
      const Vec2d x = cfg::parse_vec2(xs, "--x"), mu = cfg::parse_vec2(mus, "--mu");
      const auto r = range_distribution(point_mass_dist({x[0], x[1], 0.0, 0.0}), mu, cfg::parse_sigma(sigmas), t, n_max);
      OutputDir(rc.output_dir).write("range.csv", [&](std::ostream& os) {
        os << "n,cdf\n";
        for (std::size_t i = 0; i < r.cdf.size(); ++i) os << i << ',' << r.cdf[i] << '\n';
      });
      log << "range p_up=" << r.p_up << " cdf(n_max)=" << r.cdf.back() << '\n';
      return 0;
    }
    if (a_pde->parsed()) {
      const auto ip = InterfaceParams::from_flow(sF2, sG2, cov, muF, muG);
      const double v = interface_survival(xF, xG, ip, t, pde);
      OutputDir(rc.output_dir).write("interface.csv", [&](std::ostream& os) {
        os << "xF,xG,t,survival\n" << xF << ',' << xG << ',' << t << ',' << v << '\n';
      });
      log << "interface-pde survival " << v << '\n';
      return 0;
    }
    err << "error: ConfigInvalid: no command given\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    for (const auto& d : e.details()) err << "  " << d << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace xborder
