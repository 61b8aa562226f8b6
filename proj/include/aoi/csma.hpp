#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "aoi/error.hpp"
#include "aoi/shs.hpp"

namespace aoi::csma {

// ============================================================================
// Network parameters
// ============================================================================

/// One source/link pair. All rates are per millisecond.
struct Link {
  double lambda = 0.0;        ///< packet generation rate (Poisson)
  double holding_rate = 0.0;  ///< H_k: inverse mean channel holding time
  double backoff_rate = 0.0;  ///< R_k: inverse mean idle back-off
};

/// An N-link network sharing one collision-free channel. Back-off timers run
/// only while the channel is idle, so exactly one link transmits at a time.
struct NetworkParams {
  std::vector<Link> links;
};

inline void validate(const NetworkParams& p) {
  if (p.links.empty()) throw ValidationError("network needs at least one link");
  for (const Link& l : p.links) {
    if (!(l.lambda > 0.0) || !std::isfinite(l.lambda))
      throw ValidationError("nonpositive rate: lambda");
    if (!(l.holding_rate > 0.0) || !std::isfinite(l.holding_rate))
      throw ValidationError("nonpositive rate: holding_rate");
    if (l.backoff_rate < 0.0 || !std::isfinite(l.backoff_rate))
      throw ValidationError("negative rate: backoff_rate");
  }
}

namespace detail {

inline void require_active(const NetworkParams& p) {
  for (std::size_t k = 0; k < p.links.size(); ++k)
    if (p.links[k].backoff_rate == 0.0)
      throw ValidationError("starved link, infinite age: backoff_rate of link " +
                            std::to_string(k + 1) + " is zero");
}

}  // namespace detail

/// Normalization constant of the channel-occupancy chain,
/// C(R) = 1 + sum_k R_k / H_k. Always >= 1.
inline double normalization(const NetworkParams& p) {
  validate(p);
  double c = 1.0;
  for (const Link& l : p.links) c += l.backoff_rate / l.holding_rate;
  return c;
}

// ============================================================================
// Hybrid model for one link of interest
// ============================================================================

/// Builds the hybrid model seen by link `link_of_interest` (0-based). States:
/// 0 = idle channel, q = link q transmitting. Ages: component 0 is the monitor
/// age, component 1 the age of the link's freshest undelivered packet.
///
/// Transitions: captures 0 -> k at R_k and releases k -> 0 at H_k keep ages,
/// except the release of the link of interest, which copies the packet age
/// into the monitor age. Arrivals of the link of interest self-loop in every
/// state and zero the packet age. Other links' arrivals never touch these two
/// ages, so they do not appear.
inline shs::Model build_shs_for_link(const NetworkParams& p, int link_of_interest) {
  validate(p);
  detail::require_active(p);
  const int n = static_cast<int>(p.links.size());
  if (link_of_interest < 0 || link_of_interest >= n)
    throw ValidationError("link index out of range");

  shs::Model m;
  m.num_states = n + 1;
  m.age_dim = 2;
  m.drifts = Eigen::MatrixXd::Ones(m.num_states, 2);

  Eigen::MatrixXd keep = Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd deliver(2, 2);  // [x0, x1] -> [x1, x1]
  deliver << 0, 0, 1, 1;
  Eigen::MatrixXd refresh(2, 2);  // [x0, x1] -> [x0, 0]
  refresh << 1, 0, 0, 0;

  for (int k = 0; k < n; ++k)
    m.transitions.push_back({0, k + 1, p.links[k].backoff_rate, keep});
  for (int k = 0; k < n; ++k)
    m.transitions.push_back({k + 1, 0, p.links[k].holding_rate,
                             k == link_of_interest ? deliver : keep});
  const double lam = p.links[link_of_interest].lambda;
  for (int q = 0; q <= n; ++q) m.transitions.push_back({q, q, lam, refresh});

  return m;
}

// ============================================================================
// Closed forms
// ============================================================================

/// Occupancy probabilities without solving a linear system: idle weight 1,
/// busy weight R_k / H_k, normalized by C(R).
inline shs::StationaryDistribution stationary_closed_form(const NetworkParams& p) {
  validate(p);
  detail::require_active(p);
  const int n = static_cast<int>(p.links.size());
  const double c = normalization(p);
  Eigen::VectorXd pi(n + 1);
  pi(0) = 1.0 / c;
  for (int k = 0; k < n; ++k)
    pi(k + 1) = p.links[k].backoff_rate / p.links[k].holding_rate / c;
  return shs::StationaryDistribution{std::move(pi)};
}

/// Average monitor age of one link (0-based), in ms:
/// C(R)/R_i + 1/lambda_i - 1/H_i + (sum_k R_k/H_k^2) / C(R).
inline double per_link_age(const NetworkParams& p, int link) {
  validate(p);
  const int n = static_cast<int>(p.links.size());
  if (link < 0 || link >= n) throw ValidationError("link index out of range");
  detail::require_active(p);

  const double c = normalization(p);
  double hazard = 0.0;  // sum_k R_k / H_k^2
  for (const Link& l : p.links)
    hazard += l.backoff_rate / (l.holding_rate * l.holding_rate);

  const Link& li = p.links[link];
  return c / li.backoff_rate + 1.0 / li.lambda - 1.0 / li.holding_rate + hazard / c;
}

struct AgeBreakdown {
  std::vector<double> per_link;  ///< ms, one entry per link
  double total = 0.0;            ///< sum of per_link
  double normalization = 1.0;    ///< C(R)
};

/// All per-link ages plus their sum. The sum telescopes to
/// sum 1/lambda_k - sum 1/H_k + N * (sum R_k/H_k^2)/C + C * sum 1/R_k.
inline AgeBreakdown total_age(const NetworkParams& p) {
  validate(p);
  detail::require_active(p);
  AgeBreakdown out;
  out.normalization = normalization(p);
  out.per_link.reserve(p.links.size());
  for (std::size_t k = 0; k < p.links.size(); ++k) {
    out.per_link.push_back(per_link_age(p, static_cast<int>(k)));
    out.total += out.per_link.back();
  }
  return out;
}

}  // namespace aoi::csma
