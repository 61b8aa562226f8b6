#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <queue>
#include <string>
#include <vector>

#include "aoi/error.hpp"

namespace aoi::shs {

// ============================================================================
// Model types
// ============================================================================

/// One labeled transition of the discrete chain. Taking the edge rewrites the
/// continuous age vector as x' = x * reset (row-vector convention), so column
/// j of the reset map says which pre-transition components feed age j.
struct Transition {
  int from = 0;
  int to = 0;
  double rate = 0.0;      ///< exponential rate, 1/ms; must be > 0
  Eigen::MatrixXd reset;  ///< age_dim x age_dim with entries in {0, 1}
};

/// A finite-state Markov chain driving a vector of ages that grow at the
/// per-state drift rate between transitions and are remapped linearly when a
/// transition fires. Self-transitions are legal and do reset ages.
struct Model {
  int num_states = 0;
  int age_dim = 0;
  std::vector<Transition> transitions;
  Eigen::MatrixXd drifts;  ///< num_states x age_dim with entries in {0, 1}
};

struct ValidationReport {
  bool ok = false;
  std::string first_violation;  ///< empty when ok
  bool shapes_ok = false;
  bool rates_positive = false;
  bool resets_binary = false;
  bool drifts_binary = false;
  bool irreducible = false;
};

struct StationaryDistribution {
  Eigen::VectorXd probs;  ///< length num_states, entries in [0, 1], sums to 1
};

/// Row q holds the stationary expectation of (age vector, indicator of state
/// q). Summing one column over all states gives that age component's long-run
/// average.
struct CorrelationVectors {
  Eigen::MatrixXd v;  ///< num_states x age_dim
};

// ============================================================================
// Validation
// ============================================================================

namespace detail {

inline bool is_binary(double x) { return x == 0.0 || x == 1.0; }

// Strong connectivity of the digraph formed by distinct-state transitions.
// Forward and reverse reachability from state 0 must both cover everything.
inline bool strongly_connected(const Model& m) {
  const int n = m.num_states;
  if (n == 1) return true;
  std::vector<std::vector<int>> fwd(n), rev(n);
  for (const Transition& t : m.transitions) {
    if (t.from == t.to) continue;
    fwd[t.from].push_back(t.to);
    rev[t.to].push_back(t.from);
  }
  auto covers_all = [n](const std::vector<std::vector<int>>& adj) {
    std::vector<char> seen(n, 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    int count = 1;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (int w : adj[u])
        if (!seen[w]) {
          seen[w] = 1;
          ++count;
          q.push(w);
        }
    }
    return count == n;
  };
  return covers_all(fwd) && covers_all(rev);
}

}  // namespace detail

inline ValidationReport validate(const Model& m) {
  ValidationReport r;

  auto fail = [&r](const std::string& why) {
    if (r.first_violation.empty()) r.first_violation = why;
  };

  r.shapes_ok = m.num_states >= 1 && m.age_dim >= 1 &&
                m.drifts.rows() == m.num_states && m.drifts.cols() == m.age_dim;
  for (const Transition& t : m.transitions) {
    if (t.from < 0 || t.from >= m.num_states || t.to < 0 || t.to >= m.num_states)
      r.shapes_ok = false;
    if (t.reset.rows() != m.age_dim || t.reset.cols() != m.age_dim) r.shapes_ok = false;
  }
  if (!r.shapes_ok) fail("malformed model shape");

  r.rates_positive = true;
  for (const Transition& t : m.transitions)
    if (!(t.rate > 0.0) || !std::isfinite(t.rate)) r.rates_positive = false;
  if (!r.rates_positive) fail("nonpositive rate");

  r.resets_binary = r.shapes_ok;
  if (r.shapes_ok)
    for (const Transition& t : m.transitions)
      if (!t.reset.unaryExpr([](double x) { return detail::is_binary(x) ? 1.0 : 0.0; }).all())
        r.resets_binary = false;
  if (!r.resets_binary) fail("reset map entries must be 0 or 1");

  r.drifts_binary = r.shapes_ok;
  if (r.shapes_ok &&
      !m.drifts.unaryExpr([](double x) { return detail::is_binary(x) ? 1.0 : 0.0; }).all())
    r.drifts_binary = false;
  if (!r.drifts_binary) fail("drift entries must be 0 or 1");

  r.irreducible = r.shapes_ok && detail::strongly_connected(m);
  if (!r.irreducible) fail("not irreducible");

  r.ok = r.shapes_ok && r.rates_positive && r.resets_binary && r.drifts_binary &&
         r.irreducible;
  return r;
}

inline void ensure_valid(const Model& m) {
  ValidationReport r = validate(m);
  if (!r.ok) throw ValidationError(r.first_violation);
}

// ============================================================================
// Stationary distribution
// ============================================================================

/// Solves the global balance equations with a normalization row. Self-loops
/// cancel on both sides of every balance equation, so they are skipped.
inline StationaryDistribution stationary_distribution(const Model& m) {
  ensure_valid(m);
  const int n = m.num_states;

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (const Transition& t : m.transitions) {
    if (t.from == t.to) continue;
    a(t.from, t.from) += t.rate;  // outflow
    a(t.to, t.from) -= t.rate;    // inflow into `to`, column of source state
  }

  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  // One balance row is redundant for an irreducible chain; trade the last one
  // for the normalization constraint.
  a.row(n - 1).setOnes();
  b(n - 1) = 1.0;

  Eigen::VectorXd pi = a.partialPivLu().solve(b);

  // Verify every balance equation, including the replaced one.
  double worst = std::abs(pi.sum() - 1.0);
  for (int q = 0; q < n; ++q) {
    double net = 0.0;
    for (const Transition& t : m.transitions) {
      if (t.from == t.to) continue;
      if (t.from == q) net += t.rate * pi(q);
      if (t.to == q) net -= t.rate * pi(t.from);
    }
    worst = std::max(worst, std::abs(net));
  }
  if (!pi.allFinite() || worst > 1e-10)
    throw SolverError("stationary distribution did not satisfy balance, residual " +
                      std::to_string(worst));

  return StationaryDistribution{std::move(pi)};
}

// ============================================================================
// Correlation vectors
// ============================================================================

/// Solves the linear system tying each state's age expectations to its
/// neighbors': v_q * (total outflow of q) = drift_q * pi_q +
/// sum over incoming l of rate_l * v_source(l) * reset_l.
/// Unlike the balance equations, self-loops matter here because their reset
/// maps act on the ages.
inline CorrelationVectors solve_correlations(const Model& m,
                                             const StationaryDistribution& pi) {
  ensure_valid(m);
  const int n = m.num_states;
  const int d = m.age_dim;
  if (pi.probs.size() != n)
    throw ValidationError("stationary distribution size does not match model");

  const int dim = n * d;
  auto idx = [d](int q, int j) { return q * d + j; };

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);

  std::vector<double> outflow(n, 0.0);
  for (const Transition& t : m.transitions) outflow[t.from] += t.rate;

  for (int q = 0; q < n; ++q)
    for (int j = 0; j < d; ++j) {
      a(idx(q, j), idx(q, j)) += outflow[q];
      b(idx(q, j)) = m.drifts(q, j) * pi.probs(q);
    }
  for (const Transition& t : m.transitions)
    for (int j = 0; j < d; ++j)
      for (int mcomp = 0; mcomp < d; ++mcomp)
        if (t.reset(mcomp, j) != 0.0)
          a(idx(t.to, j), idx(t.from, mcomp)) -= t.rate * t.reset(mcomp, j);

  Eigen::VectorXd x = a.partialPivLu().solve(b);

  double residual = (a * x - b).cwiseAbs().maxCoeff();
  if (!x.allFinite() || residual > 1e-10)
    throw SolverError("no finite age: correlation system is singular (residual " +
                      std::to_string(residual) + ")");

  Eigen::MatrixXd v(n, d);
  for (int q = 0; q < n; ++q)
    for (int j = 0; j < d; ++j) v(q, j) = x(idx(q, j));
  return CorrelationVectors{std::move(v)};
}

/// Long-run average of one age component: the column sum of the correlation
/// matrix.
inline double average_age(const CorrelationVectors& v, int age_component) {
  if (age_component < 0 || age_component >= v.v.cols())
    throw ValidationError("age component index out of range");
  return v.v.col(age_component).sum();
}

}  // namespace aoi::shs
