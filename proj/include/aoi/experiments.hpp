#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "aoi/csma.hpp"
#include "aoi/error.hpp"
#include "aoi/optimizer.hpp"
#include "aoi/round_robin.hpp"
#include "aoi/simulator.hpp"

namespace aoi::cli {

using json = nlohmann::ordered_json;

// ============================================================================
// Configuration
// ============================================================================

/// Parsed run configuration. Times are milliseconds, rates 1/ms. Fields a
/// command does not use are ignored; fields it needs but the file omits keep
/// the defaults below.
struct Config {
  csma::NetworkParams network;
  bool has_network = false;

  int w0 = 16;
  double t_slot_ms = 0.009;
  double r_ub = -1.0;  ///< < 0 means: derive from (w0, t_slot_ms)

  sim::MacKind mac = sim::MacKind::Idealized;
  std::vector<int> windows;
  std::vector<int> rr_order;

  double horizon_ms = 1.0e6;
  double warmup_ms = -1.0;  ///< < 0 means: 5% of the horizon
  std::uint64_t seed = 1;
  int seeds = 10;

  int grid = 60;
  bool log_grid = true;

  std::vector<int> density_nodes{2, 4, 6, 8};
  std::vector<int> w0_candidates{16, 32, 64, 128};
  double density_lambda = 1.0;
  double density_holding_rate = 1.0;
};

inline Config parse_config(const json& j) {
  Config c;
  try {
    if (j.contains("network")) {
      for (const json& lj : j.at("network").at("links")) {
        csma::Link l;
        l.lambda = lj.at("lambda").get<double>();
        l.holding_rate = lj.at("holding_rate").get<double>();
        l.backoff_rate = lj.value("backoff_rate", 0.0);
        c.network.links.push_back(l);
      }
      c.has_network = true;
      csma::validate(c.network);
    }
    c.w0 = j.value("w0", c.w0);
    c.t_slot_ms = j.value("t_slot_ms", c.t_slot_ms);
    c.r_ub = j.value("r_ub", c.r_ub);
    if (j.contains("mac")) {
      const std::string m = j.at("mac").get<std::string>();
      if (m == "idealized")
        c.mac = sim::MacKind::Idealized;
      else if (m == "slotted")
        c.mac = sim::MacKind::Slotted;
      else if (m == "round_robin")
        c.mac = sim::MacKind::RoundRobin;
      else
        throw ValidationError("mac must be idealized, slotted, or round_robin");
    }
    if (j.contains("windows")) c.windows = j.at("windows").get<std::vector<int>>();
    if (j.contains("rr_order")) c.rr_order = j.at("rr_order").get<std::vector<int>>();
    c.horizon_ms = j.value("horizon_ms", c.horizon_ms);
    c.warmup_ms = j.value("warmup_ms", c.warmup_ms);
    c.seed = j.value("seed", c.seed);
    c.seeds = j.value("seeds", c.seeds);
    c.grid = j.value("grid", c.grid);
    if (j.contains("grid_scale")) {
      const std::string g = j.at("grid_scale").get<std::string>();
      if (g == "log")
        c.log_grid = true;
      else if (g == "linear")
        c.log_grid = false;
      else
        throw ValidationError("grid_scale must be log or linear");
    }
    if (j.contains("density_nodes"))
      c.density_nodes = j.at("density_nodes").get<std::vector<int>>();
    if (j.contains("w0_candidates"))
      c.w0_candidates = j.at("w0_candidates").get<std::vector<int>>();
    c.density_lambda = j.value("density_lambda", c.density_lambda);
    c.density_holding_rate = j.value("density_holding_rate", c.density_holding_rate);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad config: ") + e.what());
  }

  if (!(c.t_slot_ms > 0.0)) throw ValidationError("t_slot_ms must be positive");
  if (c.w0 < 2) throw ValidationError("w0 must be >= 2");
  if (c.grid < 2) throw ValidationError("grid must be >= 2 points per axis");
  if (c.seeds < 1) throw ValidationError("seeds must be >= 1");
  for (int nn : c.density_nodes)
    if (nn < 1) throw ValidationError("density_nodes entries must be >= 1");
  for (int w : c.w0_candidates)
    if (w < 2) throw ValidationError("w0_candidates entries must be >= 2");
  if (!(c.density_lambda > 0.0) || !(c.density_holding_rate > 0.0))
    throw ValidationError("nonpositive rate: density parameters");
  return c;
}

namespace detail {

inline const csma::NetworkParams& require_network(const Config& c) {
  if (!c.has_network) throw ValidationError("config needs network.links");
  return c.network;
}

inline double resolve_r_ub(const Config& c) {
  return c.r_ub > 0.0 ? c.r_ub : opt::r_upper_bound(c.w0, c.t_slot_ms);
}

inline opt::OptimizerInputs optimizer_inputs(const Config& c) {
  opt::OptimizerInputs in;
  for (const csma::Link& l : require_network(c).links)
    in.holding_rates.push_back(l.holding_rate);
  in.r_ub = resolve_r_ub(c);
  return in;
}

inline std::vector<double> lambdas(const csma::NetworkParams& p) {
  std::vector<double> out;
  for (const csma::Link& l : p.links) out.push_back(l.lambda);
  return out;
}

/// Runs fn(i) for i in [0, n) on a few worker threads, results landing in
/// index order regardless of scheduling.
template <typename Fn>
void parallel_for(int n, Fn&& fn) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = std::min<unsigned>(hw, static_cast<unsigned>(n));
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (int i = static_cast<int>(w); i < n; i += static_cast<int>(workers)) fn(i);
    });
  for (std::thread& th : pool) th.join();
}

inline std::string fmt(double x) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

}  // namespace detail

// ============================================================================
// Commands
// ============================================================================

inline csma::AgeBreakdown run_age(const Config& c) {
  return csma::total_age(detail::require_network(c));
}

inline opt::BackoffAssignment run_optimize(const Config& c) {
  const csma::NetworkParams& p = detail::require_network(c);
  return opt::optimize_backoff(detail::optimizer_inputs(c), c.t_slot_ms,
                               detail::lambdas(p));
}

struct SimulateOutput {
  sim::Scenario scenario;
  sim::Result result;
};

inline SimulateOutput run_simulate(const Config& c) {
  SimulateOutput out;
  out.scenario.params = detail::require_network(c);
  out.scenario.mac = c.mac;
  out.scenario.t_slot_ms = c.t_slot_ms;
  out.scenario.rr_order = c.rr_order;
  out.scenario.horizon_ms = c.horizon_ms;
  out.scenario.warmup_ms = c.warmup_ms;
  out.scenario.seed = c.seed;
  if (c.mac == sim::MacKind::Slotted) {
    out.scenario.windows = c.windows;
    if (out.scenario.windows.empty()) {
      for (const csma::Link& l : out.scenario.params.links) {
        if (!(l.backoff_rate > 0.0))
          throw ValidationError(
              "cannot derive contention windows: set windows explicitly or "
              "give every link a positive backoff_rate");
        const double w = opt::contention_window(l.backoff_rate, c.t_slot_ms);
        out.scenario.windows.push_back(
            std::max(2, static_cast<int>(std::floor(w + 0.5))));
      }
    }
  }
  out.result = sim::simulate(out.scenario);
  return out;
}

struct SweepRow {
  double r1 = 0.0, r2 = 0.0;
  double total_age_ms = 0.0;
  bool is_min = false;
};

/// Evaluates the closed-form total age over a 2-D back-off grid. Only defined
/// for two-link networks.
inline std::vector<SweepRow> run_sweep(const Config& c) {
  const csma::NetworkParams& p = detail::require_network(c);
  if (p.links.size() != 2)
    throw ValidationError("sweep needs exactly two links");
  const double r_ub = detail::resolve_r_ub(c);
  const int n = c.grid;

  std::vector<double> axis(n);
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / (n - 1);
    axis[i] = c.log_grid ? r_ub * std::pow(1e-3, 1.0 - t)
                         : r_ub * (static_cast<double>(i + 1) / n);
  }
  axis.back() = r_ub;

  std::vector<SweepRow> rows(static_cast<std::size_t>(n) * n);
  detail::parallel_for(n * n, [&](int cell) {
    const int i = cell / n, j = cell % n;
    csma::NetworkParams q = p;
    q.links[0].backoff_rate = axis[i];
    q.links[1].backoff_rate = axis[j];
    rows[cell] = {axis[i], axis[j], csma::total_age(q).total, false};
  });

  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].total_age_ms < rows[best].total_age_ms) best = i;
  rows[best].is_min = true;
  return rows;
}

struct DensityRow {
  int n = 0;
  int w0 = 0;
  double ideal_age_ms = 0.0;    ///< uncapped idealized optimum, n/lambda + n^2/H
  double slotted_age_ms = 0.0;  ///< seed-averaged slotted simulation
  double gap_percent = 0.0;     ///< signed, 100 * (slotted - ideal) / ideal
  bool selected = false;  ///< lowest simulated age among this n's windows
};

struct DensityOutput {
  std::vector<DensityRow> rows;
  bool unconverged = false;
};

/// For growing symmetric networks, compares the slotted MAC at the optimizer's
/// windows against the idealized closed form with no back-off cap, sweeping the
/// window floor and flagging the best one per network size. The uncapped
/// symmetric optimum is the aggressive limit of the closed form: with every
/// back-off rate pushed to infinity the total age tends to n/lambda + n^2/H.
/// The gap column is signed; the slotted MAC can land below the reference
/// because frozen counters make channel access more regular than the
/// memoryless model assumes.
inline DensityOutput run_density(const Config& c) {
  DensityOutput out;
  struct Cell {
    int n, w0;
    double ideal = 0.0, slotted = 0.0;
    bool unconverged = false;
  };
  std::vector<Cell> cells;
  for (int nn : c.density_nodes)
    for (int w0 : c.w0_candidates) cells.push_back({nn, w0});

  const int runs_per_cell = c.seeds;
  detail::parallel_for(static_cast<int>(cells.size()), [&](int ci) {
    Cell& cell = cells[ci];
    opt::OptimizerInputs in;
    in.holding_rates.assign(cell.n, c.density_holding_rate);
    in.r_ub = opt::r_upper_bound(cell.w0, c.t_slot_ms);
    const std::vector<double> lam(cell.n, c.density_lambda);
    const opt::BackoffAssignment a = opt::optimize_backoff(in, c.t_slot_ms, lam);
    cell.ideal = cell.n / c.density_lambda +
                 static_cast<double>(cell.n) * cell.n / c.density_holding_rate;

    sim::Scenario s;
    s.params.links.resize(cell.n);
    for (int k = 0; k < cell.n; ++k)
      s.params.links[k] = {c.density_lambda, c.density_holding_rate,
                           a.backoff_rates[k]};
    s.mac = sim::MacKind::Slotted;
    s.t_slot_ms = c.t_slot_ms;
    s.windows.assign(a.contention_windows_rounded.begin(),
                     a.contention_windows_rounded.end());
    s.horizon_ms = c.horizon_ms;
    s.warmup_ms = c.warmup_ms;

    double sum = 0.0;
    for (int i = 0; i < runs_per_cell; ++i) {
      s.seed = c.seed + static_cast<std::uint64_t>(i);
      const sim::Result r = sim::simulate(s);
      if (r.unconverged) cell.unconverged = true;
      sum += r.total_age;
    }
    cell.slotted = sum / runs_per_cell;
  });

  std::size_t ci = 0;
  for (int nn : c.density_nodes) {
    (void)nn;
    std::size_t best = ci;
    for (std::size_t j = ci; j < ci + c.w0_candidates.size(); ++j)
      if (cells[j].slotted < cells[best].slotted) best = j;
    for (std::size_t j = ci; j < ci + c.w0_candidates.size(); ++j) {
      const Cell& cell = cells[j];
      out.rows.push_back({cell.n, cell.w0, cell.ideal, cell.slotted,
                          100.0 * (cell.slotted - cell.ideal) / cell.ideal,
                          j == best});
      out.unconverged = out.unconverged || cell.unconverged;
    }
    ci += c.w0_candidates.size();
  }
  return out;
}

struct CompareRow {
  std::string scheme;
  std::string method;
  double total_age_ms = 0.0;
  std::string note;
};

struct CompareOutput {
  std::vector<CompareRow> rows;
  bool unconverged = false;
};

/// Optimized CSMA against a work-conserving round-robin schedule on the same
/// network: closed form and analysis rows plus matching simulations.
inline CompareOutput run_compare(const Config& c) {
  const csma::NetworkParams& p = detail::require_network(c);
  const double r_ub = detail::resolve_r_ub(c);
  const opt::BackoffAssignment a =
      opt::optimize_backoff(detail::optimizer_inputs(c), c.t_slot_ms,
                            detail::lambdas(p));

  csma::NetworkParams tuned = p;
  for (std::size_t k = 0; k < tuned.links.size(); ++k)
    tuned.links[k].backoff_rate = a.backoff_rates[k];

  std::string rates = "R*=(";
  for (std::size_t k = 0; k < a.backoff_rates.size(); ++k)
    rates += (k ? " " : "") + detail::fmt(a.backoff_rates[k]);
  rates += ")";

  CompareOutput out;
  out.rows.push_back({"csma", "closed_form_optimal", a.achieved_total_age, rates});

  sim::Scenario s;
  s.params = tuned;
  s.mac = sim::MacKind::Idealized;
  s.horizon_ms = c.horizon_ms;
  s.warmup_ms = c.warmup_ms;
  s.seed = c.seed;
  const sim::Result ideal_sim = sim::simulate(s);
  out.unconverged |= ideal_sim.unconverged;
  out.rows.push_back({"csma", "idealized_simulation", ideal_sim.total_age,
                      "seed=" + std::to_string(c.seed)});

  out.rows.push_back({"round_robin", "shs_analysis", rr::total_age(p).total,
                      "fixed cyclic order; empty turns send fake updates"});

  s.params = p;
  s.mac = sim::MacKind::RoundRobin;
  s.rr_order = c.rr_order;
  const sim::Result rr_sim = sim::simulate(s);
  out.unconverged |= rr_sim.unconverged;
  out.rows.push_back({"round_robin", "simulation", rr_sim.total_age,
                      "seed=" + std::to_string(c.seed)});
  return out;
}

// ============================================================================
// Rendering
// ============================================================================
// CSV tables open with a "# aoi-csma <command> v1" schema comment; JSON
// documents carry the same tag in a "schema" field. Numbers print with %.12g,
// so identical runs render byte-identical output.

inline std::string render_age_csv(const csma::AgeBreakdown& b) {
  std::string out = "# aoi-csma age v1\nrecord,link,value\n";
  for (std::size_t k = 0; k < b.per_link.size(); ++k)
    out += "per_link_age_ms," + std::to_string(k + 1) + "," +
           detail::fmt(b.per_link[k]) + "\n";
  out += "total_age_ms,," + detail::fmt(b.total) + "\n";
  out += "normalization,," + detail::fmt(b.normalization) + "\n";
  return out;
}

inline json render_age_json(const csma::AgeBreakdown& b) {
  json j;
  j["schema"] = "aoi-csma age v1";
  j["per_link_age_ms"] = b.per_link;
  j["total_age_ms"] = b.total;
  j["normalization"] = b.normalization;
  return j;
}

inline json render_optimize_json(const opt::BackoffAssignment& a, double r_ub) {
  json j;
  j["schema"] = "aoi-csma optimize v1";
  j["r_ub"] = r_ub;
  j["backoff_rates"] = a.backoff_rates;
  j["contention_windows"] = a.contention_windows;
  j["contention_windows_rounded"] = a.contention_windows_rounded;
  j["total_age_ms"] = a.achieved_total_age;
  json k;
  k["saturated"] = a.kkt.saturated;
  k["eps"] = a.kkt.eps;
  k["rho"] = a.kkt.rho;
  k["gamma"] = a.kkt.gamma;
  k["nu"] = a.kkt.nu;
  k["mu"] = a.kkt.mu;
  k["eta"] = a.kkt.eta;
  k["f"] = a.kkt.f;
  k["x_sum"] = a.kkt.x_sum;
  k["y_sum"] = a.kkt.y_sum;
  j["kkt"] = k;
  return j;
}

inline std::string render_optimize_csv(const opt::BackoffAssignment& a) {
  std::string out = "# aoi-csma optimize v1\nrecord,link,value\n";
  for (std::size_t k = 0; k < a.backoff_rates.size(); ++k) {
    const std::string id = std::to_string(k + 1);
    out += "backoff_rate," + id + "," + detail::fmt(a.backoff_rates[k]) + "\n";
    out += "contention_window," + id + "," + detail::fmt(a.contention_windows[k]) + "\n";
    out += "contention_window_rounded," + id + "," +
           std::to_string(a.contention_windows_rounded[k]) + "\n";
  }
  out += "total_age_ms,," + detail::fmt(a.achieved_total_age) + "\n";
  out += "eps,," + detail::fmt(a.kkt.eps) + "\n";
  return out;
}

inline json render_simulate_json(const SimulateOutput& s) {
  json j;
  j["schema"] = "aoi-csma simulate v1";
  j["per_link_age_ms"] = s.result.per_link_age;
  j["total_age_ms"] = s.result.total_age;
  j["busy_fraction"] = s.result.busy_fraction;
  j["collisions"] = s.result.collisions;
  j["deliveries"] = s.result.deliveries;
  j["unconverged"] = s.result.unconverged;
  j["seed"] = s.scenario.seed;
  j["horizon_ms"] = s.scenario.horizon_ms;
  return j;
}

inline std::string render_simulate_csv(const SimulateOutput& s) {
  std::string out = "# aoi-csma simulate v1\nrecord,link,value\n";
  for (std::size_t k = 0; k < s.result.per_link_age.size(); ++k)
    out += "per_link_age_ms," + std::to_string(k + 1) + "," +
           detail::fmt(s.result.per_link_age[k]) + "\n";
  for (std::size_t k = 0; k < s.result.deliveries.size(); ++k)
    out += "deliveries," + std::to_string(k + 1) + "," +
           std::to_string(s.result.deliveries[k]) + "\n";
  out += "total_age_ms,," + detail::fmt(s.result.total_age) + "\n";
  out += "busy_fraction,," + detail::fmt(s.result.busy_fraction) + "\n";
  out += "collisions,," + std::to_string(s.result.collisions) + "\n";
  out += std::string("unconverged,,") + (s.result.unconverged ? "1" : "0") + "\n";
  return out;
}

inline std::string render_sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "# aoi-csma sweep v1\nr1,r2,total_age_ms,is_min\n";
  for (const SweepRow& r : rows)
    out += detail::fmt(r.r1) + "," + detail::fmt(r.r2) + "," +
           detail::fmt(r.total_age_ms) + "," + (r.is_min ? "1" : "0") + "\n";
  return out;
}

inline json render_sweep_json(const std::vector<SweepRow>& rows) {
  json j;
  j["schema"] = "aoi-csma sweep v1";
  json arr = json::array();
  for (const SweepRow& r : rows) {
    json row;
    row["r1"] = r.r1;
    row["r2"] = r.r2;
    row["total_age_ms"] = r.total_age_ms;
    row["is_min"] = r.is_min;
    arr.push_back(row);
  }
  j["rows"] = arr;
  return j;
}

inline std::string render_density_csv(const DensityOutput& d) {
  std::string out = "# aoi-csma density v1\nn,w0,ideal_age_ms,slotted_age_ms,gap_percent,selected\n";
  for (const DensityRow& r : d.rows)
    out += std::to_string(r.n) + "," + std::to_string(r.w0) + "," +
           detail::fmt(r.ideal_age_ms) + "," + detail::fmt(r.slotted_age_ms) + "," +
           detail::fmt(r.gap_percent) + "," + (r.selected ? "1" : "0") + "\n";
  return out;
}

inline json render_density_json(const DensityOutput& d) {
  json j;
  j["schema"] = "aoi-csma density v1";
  json arr = json::array();
  for (const DensityRow& r : d.rows) {
    json row;
    row["n"] = r.n;
    row["w0"] = r.w0;
    row["ideal_age_ms"] = r.ideal_age_ms;
    row["slotted_age_ms"] = r.slotted_age_ms;
    row["gap_percent"] = r.gap_percent;
    row["selected"] = r.selected;
    arr.push_back(row);
  }
  j["rows"] = arr;
  j["unconverged"] = d.unconverged;
  return j;
}

inline std::string render_compare_csv(const CompareOutput& cmp) {
  std::string out = "# aoi-csma compare v1\nscheme,method,total_age_ms,note\n";
  for (const CompareRow& r : cmp.rows)
    out += r.scheme + "," + r.method + "," + detail::fmt(r.total_age_ms) + "," +
           r.note + "\n";
  return out;
}

inline json render_compare_json(const CompareOutput& cmp) {
  json j;
  j["schema"] = "aoi-csma compare v1";
  json arr = json::array();
  for (const CompareRow& r : cmp.rows) {
    json row;
    row["scheme"] = r.scheme;
    row["method"] = r.method;
    row["total_age_ms"] = r.total_age_ms;
    row["note"] = r.note;
    arr.push_back(row);
  }
  j["rows"] = arr;
  j["unconverged"] = cmp.unconverged;
  return j;
}

}  // namespace aoi::cli
