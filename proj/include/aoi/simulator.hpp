#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "aoi/csma.hpp"
#include "aoi/error.hpp"
#include "aoi/random.hpp"

namespace aoi::sim {

enum class MacKind { Idealized, Slotted, RoundRobin };

/// One simulation run: a network, a channel-access discipline, and a clock.
/// warmup_ms < 0 means "use 5% of the horizon". Slotted runs need per-link
/// contention windows (>= 2 mini-slots each); round-robin runs may give a
/// custom cyclic order (default: link index order).
struct Scenario {
  csma::NetworkParams params;
  MacKind mac = MacKind::Idealized;
  double t_slot_ms = 0.009;
  std::vector<int> windows;
  std::vector<int> rr_order;
  double horizon_ms = 0.0;
  double warmup_ms = -1.0;
  std::uint64_t seed = 1;
};

struct Result {
  std::vector<double> per_link_age;      ///< ms, time-averaged past warmup
  double total_age = 0.0;                ///< sum of per_link_age
  double busy_fraction = 0.0;            ///< channel occupancy past warmup
  std::uint64_t collisions = 0;          ///< slotted only, always 0 otherwise
  std::vector<std::uint64_t> deliveries; ///< per link, past warmup
  bool unconverged = false;              ///< some link never delivered
};

namespace detail {

inline double effective_warmup(const Scenario& s) {
  return s.warmup_ms < 0.0 ? 0.05 * s.horizon_ms : s.warmup_ms;
}

inline void validate_scenario(const Scenario& s) {
  csma::validate(s.params);
  const std::size_t n = s.params.links.size();
  if (!(s.horizon_ms > 0.0) || !std::isfinite(s.horizon_ms))
    throw ValidationError("horizon must be positive");
  const double warmup = effective_warmup(s);
  if (warmup >= s.horizon_ms)
    throw ValidationError("warmup must be shorter than the horizon");
  if (s.mac == MacKind::Idealized) {
    for (const csma::Link& l : s.params.links)
      if (l.backoff_rate == 0.0)
        throw ValidationError("starved link, infinite age: backoff_rate is zero");
  }
  if (s.mac == MacKind::Slotted) {
    if (!(s.t_slot_ms > 0.0)) throw ValidationError("nonpositive slot duration");
    if (s.windows.size() != n)
      throw ValidationError("window count does not match link count");
    for (int w : s.windows)
      if (w < 2) throw ValidationError("contention window must be >= 2 mini-slots");
  }
  if (s.mac == MacKind::RoundRobin && !s.rr_order.empty()) {
    if (s.rr_order.size() != n)
      throw ValidationError("round-robin order must list every link once");
    std::vector<char> seen(n, 0);
    for (int k : s.rr_order) {
      if (k < 0 || k >= static_cast<int>(n) || seen[k])
        throw ValidationError("round-robin order must list every link once");
      seen[k] = 1;
    }
  }
}

// Tracks one link's age sawtooth and integrates it exactly. The monitor age
// at time t is t - monitor_ts; a delivery moves monitor_ts forward to the
// delivered packet's generation timestamp, never backward.
struct LinkState {
  double gen_ts = 0.0;      ///< timestamp of the freshest packet at the source
  double monitor_ts = 0.0;  ///< timestamp of the packet the monitor holds
  double next_arrival = 0.0;
  double mark = 0.0;        ///< left edge of the age segment being integrated
  double age_integral = 0.0;
  std::uint64_t deliveries = 0;
  rng::Stream arrivals, service, backoff;
};

class Engine {
 public:
  explicit Engine(const Scenario& s)
      : s_(s),
        n_(static_cast<int>(s.params.links.size())),
        warmup_(effective_warmup(s)),
        horizon_(s.horizon_ms) {
    links_.resize(n_);
    for (int k = 0; k < n_; ++k) {
      LinkState& l = links_[k];
      l.arrivals = rng::Stream(s.seed, k, rng::Purpose::Arrival);
      l.service = rng::Stream(s.seed, k, rng::Purpose::Service);
      l.backoff = rng::Stream(s.seed, k, rng::Purpose::Backoff);
      l.next_arrival = l.arrivals.exponential(s.params.links[k].lambda);
    }
  }

  Result run() {
    switch (s_.mac) {
      case MacKind::Idealized: run_idealized(); break;
      case MacKind::Slotted: run_slotted(); break;
      case MacKind::RoundRobin: run_round_robin(); break;
    }
    return finish();
  }

 private:
  // Replays link k's Poisson arrivals up to time t. Arrivals only move the
  // source timestamp, so they can be merged in lazily per link.
  void advance_arrivals(int k, double t) {
    LinkState& l = links_[k];
    while (l.next_arrival <= t) {
      l.gen_ts = l.next_arrival;
      l.next_arrival += l.arrivals.exponential(s_.params.links[k].lambda);
    }
  }

  // Closes the current constant-timestamp age segment of link k at time t.
  void integrate_to(int k, double t) {
    LinkState& l = links_[k];
    const double a = std::max(l.mark, warmup_);
    const double b = std::min(t, horizon_);
    if (b > a) {
      const double u = l.monitor_ts;
      l.age_integral += 0.5 * ((b - u) * (b - u) - (a - u) * (a - u));
    }
    l.mark = t;
  }

  // A successful transmission of link k ends at time t; whatever packet the
  // source holds then (possibly the already-delivered one, a fake update) is
  // handed to the monitor.
  void deliver(int k, double t) {
    advance_arrivals(k, t);
    integrate_to(k, t);
    LinkState& l = links_[k];
    l.monitor_ts = l.gen_ts;
    if (t >= warmup_ && t <= horizon_) ++l.deliveries;
  }

  void add_busy(double from, double to) {
    const double a = std::max(from, warmup_);
    const double b = std::min(to, horizon_);
    if (b > a) busy_time_ += b - a;
  }

  void run_idealized() {
    double t = 0.0;
    while (true) {
      // Idle period: every link re-arms a fresh back-off timer.
      int winner = 0;
      double wait = std::numeric_limits<double>::infinity();
      for (int k = 0; k < n_; ++k) {
        const double d = links_[k].backoff.exponential(s_.params.links[k].backoff_rate);
        if (d < wait) {
          wait = d;
          winner = k;
        }
      }
      const double start = t + wait;
      if (start > horizon_) return;
      const double len =
          links_[winner].service.exponential(s_.params.links[winner].holding_rate);
      if (start + len > horizon_) {
        add_busy(start, horizon_);
        return;
      }
      t = start + len;
      add_busy(start, t);
      deliver(winner, t);
    }
  }

  void run_slotted() {
    std::vector<int> counters(n_);
    for (int k = 0; k < n_; ++k) counters[k] = links_[k].backoff.uniform_int(s_.windows[k]);

    double t = 0.0;
    std::vector<int> txs;
    while (true) {
      int m = counters[0];
      for (int k = 1; k < n_; ++k) m = std::min(m, counters[k]);
      txs.clear();
      for (int k = 0; k < n_; ++k) {
        counters[k] -= m;
        if (counters[k] == 0) txs.push_back(k);
      }
      const double start = t + m * s_.t_slot_ms;
      if (start > horizon_) return;

      if (txs.size() == 1) {
        const int k = txs[0];
        const double len = links_[k].service.exponential(s_.params.links[k].holding_rate);
        if (start + len > horizon_) {
          add_busy(start, horizon_);
          return;
        }
        t = start + len;
        add_busy(start, t);
        deliver(k, t);
        counters[k] = links_[k].backoff.uniform_int(s_.windows[k]);
      } else {
        // Simultaneous expiry: all frames overlap and are lost. The channel
        // stays busy for the longest of the colliding transmissions.
        if (start >= warmup_ && start <= horizon_) ++collisions_;
        double len = 0.0;
        for (int k : txs)
          len = std::max(len, links_[k].service.exponential(s_.params.links[k].holding_rate));
        if (start + len > horizon_) {
          add_busy(start, horizon_);
          return;
        }
        t = start + len;
        add_busy(start, t);
        for (int k : txs) counters[k] = links_[k].backoff.uniform_int(s_.windows[k]);
      }
    }
  }

  void run_round_robin() {
    std::vector<int> order = s_.rr_order;
    if (order.empty()) {
      order.resize(n_);
      std::iota(order.begin(), order.end(), 0);
    }
    double t = 0.0;
    std::size_t pos = 0;
    while (true) {
      const int k = order[pos];
      pos = (pos + 1) % order.size();
      const double len = links_[k].service.exponential(s_.params.links[k].holding_rate);
      if (t + len > horizon_) {
        add_busy(t, horizon_);
        return;
      }
      const double start = t;
      t += len;
      add_busy(start, t);
      deliver(k, t);
    }
  }

  Result finish() {
    Result r;
    r.per_link_age.resize(n_);
    r.deliveries.resize(n_);
    const double window = horizon_ - warmup_;
    for (int k = 0; k < n_; ++k) {
      integrate_to(k, horizon_);
      r.per_link_age[k] = links_[k].age_integral / window;
      r.total_age += r.per_link_age[k];
      r.deliveries[k] = links_[k].deliveries;
      if (links_[k].deliveries == 0) r.unconverged = true;
    }
    r.busy_fraction = busy_time_ / window;
    r.collisions = collisions_;
    return r;
  }

  const Scenario& s_;
  int n_;
  double warmup_, horizon_;
  double busy_time_ = 0.0;
  std::uint64_t collisions_ = 0;
  std::vector<LinkState> links_;
};

}  // namespace detail

/// Runs one scenario to its horizon. Ages integrate exactly between events;
/// statistics cover [warmup, horizon]. Deterministic: the same scenario and
/// seed reproduce the result bit for bit.
inline Result simulate(const Scenario& s) {
  detail::validate_scenario(s);
  return detail::Engine(s).run();
}

/// Fraction of transmission attempts that ended in a collision,
/// collisions / (collisions + successes), over the measurement window.
inline double estimate_collision_rate(const Scenario& s) {
  if (s.mac != MacKind::Slotted)
    throw ValidationError("collision estimation requires slotted mode");
  const Result r = simulate(s);
  const std::uint64_t successes =
      std::accumulate(r.deliveries.begin(), r.deliveries.end(), std::uint64_t{0});
  const std::uint64_t attempts = r.collisions + successes;
  if (attempts == 0)
    throw ValidationError("horizon too short: no transmission attempts observed");
  return static_cast<double>(r.collisions) / static_cast<double>(attempts);
}

}  // namespace aoi::sim
