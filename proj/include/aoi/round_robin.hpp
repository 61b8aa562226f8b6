#pragma once

#include <vector>

#include "aoi/csma.hpp"
#include "aoi/error.hpp"
#include "aoi/shs.hpp"

namespace aoi::rr {

/// Hybrid model of a work-conserving round-robin schedule as seen by one link
/// (0-based). State k means link k is transmitting; the chain walks the cycle
/// k -> k+1 mod N at rate H_k with no idle gaps. A link with nothing fresh
/// sends a fake update carrying its previous timestamp, so every visit ends
/// with a delivery: the exit of the link of interest copies the packet age
/// into the monitor age, and its arrivals self-loop everywhere zeroing the
/// packet age. Back-off rates are ignored.
inline shs::Model build_shs_for_link(const csma::NetworkParams& p,
                                     int link_of_interest) {
  csma::validate(p);
  const int n = static_cast<int>(p.links.size());
  if (link_of_interest < 0 || link_of_interest >= n)
    throw ValidationError("link index out of range");

  shs::Model m;
  m.num_states = n;
  m.age_dim = 2;
  m.drifts = Eigen::MatrixXd::Ones(n, 2);

  Eigen::MatrixXd keep = Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd deliver(2, 2);
  deliver << 0, 0, 1, 1;
  Eigen::MatrixXd refresh(2, 2);
  refresh << 1, 0, 0, 0;

  for (int k = 0; k < n; ++k)
    m.transitions.push_back({k, (k + 1) % n, p.links[k].holding_rate,
                             k == link_of_interest ? deliver : keep});
  const double lam = p.links[link_of_interest].lambda;
  for (int q = 0; q < n; ++q) m.transitions.push_back({q, q, lam, refresh});

  return m;
}

/// Exact per-link and total average age under round robin, solved through the
/// generic correlation system. Cheap for small N; used as the reference the
/// event-driven round-robin simulation is checked against.
inline csma::AgeBreakdown total_age(const csma::NetworkParams& p) {
  csma::validate(p);
  csma::AgeBreakdown out;
  out.normalization = 1.0;  // channel never idles
  const int n = static_cast<int>(p.links.size());
  out.per_link.reserve(n);
  for (int k = 0; k < n; ++k) {
    shs::Model m = rr::build_shs_for_link(p, k);
    shs::StationaryDistribution pi = shs::stationary_distribution(m);
    shs::CorrelationVectors v = shs::solve_correlations(m, pi);
    out.per_link.push_back(shs::average_age(v, 0));
    out.total += out.per_link.back();
  }
  return out;
}

}  // namespace aoi::rr
