#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "aoi/csma.hpp"
#include "aoi/error.hpp"

namespace aoi::opt {

// ============================================================================
// Inputs and 802.11 mapping
// ============================================================================

/// Everything the age-minimizing back-off problem depends on. Arrival rates
/// are deliberately absent: they shift the objective by a constant and cannot
/// change the minimizer.
struct OptimizerInputs {
  std::vector<double> holding_rates;  ///< H_k > 0, 1/ms
  double r_ub = 0.0;                  ///< shared upper bound on every R_k, 1/ms
};

inline void validate(const OptimizerInputs& in) {
  if (in.holding_rates.empty())
    throw ValidationError("optimizer needs at least one link");
  for (double h : in.holding_rates)
    if (!(h > 0.0) || !std::isfinite(h))
      throw ValidationError("nonpositive rate: holding_rate");
  if (!(in.r_ub > 0.0) || !std::isfinite(in.r_ub))
    throw ValidationError("nonpositive rate: r_ub");
}

/// Largest mean back-off rate a station with contention window floor w0 can
/// sustain: the mean count-down is (w0 - 1)/2 idle mini-slots.
inline double r_upper_bound(int w0, double t_slot_ms) {
  if (w0 < 2) throw ValidationError("contention window floor must be >= 2");
  if (!(t_slot_ms > 0.0)) throw ValidationError("nonpositive slot duration");
  return 2.0 / ((w0 - 1) * t_slot_ms);
}

/// Inverse of r_upper_bound: the (real-valued) contention window whose mean
/// count-down realizes back-off rate r.
inline double contention_window(double r, double t_slot_ms) {
  if (!(r > 0.0)) throw ValidationError("nonpositive rate: backoff_rate");
  if (!(t_slot_ms > 0.0)) throw ValidationError("nonpositive slot duration");
  return 2.0 / (t_slot_ms * r) + 1.0;
}

/// Cubic whose positivity certifies that a symmetric network saturates the
/// rate cap: (h + n r)^3 - n r (h + n r)^2 - n h r^2.
inline double lemma1_polynomial(int n, double h, double r) {
  if (n < 1) throw ValidationError("link count must be >= 1");
  const double s = h + n * r;
  return s * s * s - n * r * s * s - n * h * r * r;
}

// ============================================================================
// The objective
// ============================================================================

/// R-dependent part of the total average age:
/// N * (sum R_k/H_k^2) / C(R) + C(R) * sum 1/R_k.
/// Adding sum 1/lambda_k - sum 1/H_k recovers the full total.
inline double age_objective(const std::vector<double>& holding_rates,
                            const std::vector<double>& backoff_rates) {
  const std::size_t n = holding_rates.size();
  double c = 1.0, hazard = 0.0, inv = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    c += backoff_rates[k] / holding_rates[k];
    hazard += backoff_rates[k] / (holding_rates[k] * holding_rates[k]);
    inv += 1.0 / backoff_rates[k];
  }
  return static_cast<double>(n) * hazard / c + c * inv;
}

// ============================================================================
// Saturation test
// ============================================================================

/// Result of the closed-form test for the all-links-at-the-cap optimum. The
/// corner is optimal iff some multiplier rho falls in (rho_lower, rho_upper].
struct SaturationCheck {
  bool saturated = false;
  double rho_lower = 0.0;
  double rho_upper = 0.0;
};

inline SaturationCheck check_saturated(const OptimizerInputs& in) {
  validate(in);
  const int n = static_cast<int>(in.holding_rates.size());
  const double r = in.r_ub;
  double x = 0.0, y = 0.0;
  for (double h : in.holding_rates) {
    x += 1.0 / h;
    y += 1.0 / (h * h);
  }
  const double s = 1.0 + x * r;

  SaturationCheck out;
  out.rho_lower = n * s / r - n * y * r / s;
  out.rho_upper = std::numeric_limits<double>::infinity();
  for (double h : in.holding_rates)
    out.rho_upper = std::min(out.rho_upper, h * s * s / (r * r) - n / h);
  out.saturated = out.rho_lower < out.rho_upper;
  return out;
}

// ============================================================================
// KKT solution
// ============================================================================

/// Optimum of the convexified problem in throughput shares f_k = eps * R_k
/// with eps = 1/C(R), together with its multipliers.
///   stationarity:  n/H_k^2 - 1/f_k^2 + mu_k - eta_k + rho/H_k = 0
///   coupling:      sum f_k / H_k = 1 - eps
/// nu (upper bound on eps) and eta_k (lower bounds on f_k) are always zero at
/// an optimum and are carried only for completeness.
struct KktSolution {
  std::vector<double> f;       ///< f_k = eps * R_k
  double eps = 0.0;            ///< 1 / C(R*)
  double rho = 0.0;            ///< multiplier of the coupling constraint
  double gamma = 0.0;          ///< multiplier of eps >= eps_min
  double nu = 0.0;             ///< multiplier of eps <= 1, always 0
  std::vector<double> mu;      ///< multipliers of f_k <= eps * r_ub
  std::vector<double> eta;     ///< multipliers of f_k >= 0, always 0
  double x_sum = 0.0;          ///< sum 1/H_k
  double y_sum = 0.0;          ///< sum 1/H_k^2
  bool saturated = false;
  std::vector<bool> capped;    ///< which links sit on f_k = eps * r_ub
};

namespace detail {

struct WaterFill {
  double rho = 0.0;
  std::vector<double> f;
  std::vector<bool> capped;
  double residual = 0.0;  ///< |sum f/H - (1 - eps)| at exit
};

// For fixed eps, find rho so that sum_k min(eps*r_ub, sqrt(H_k/(n/H_k + rho)))
// / H_k equals 1 - eps. The left side is continuous and non-increasing in rho,
// equals eps * r_ub * sum 1/H_k once every link is capped, and vanishes as
// rho grows, so bisection between those regimes always brackets the root.
inline WaterFill water_fill(const std::vector<double>& hs, double r_ub, double eps,
                            int iteration_cap, double residual_tol) {
  const int n = static_cast<int>(hs.size());
  const double cap = eps * r_ub;
  const double target = 1.0 - eps;

  auto fill = [&](double rho, std::vector<double>& f, std::vector<bool>& capped) {
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
      const double arg = n / hs[k] + rho;
      double interior = std::numeric_limits<double>::infinity();
      if (arg > 0.0) interior = std::sqrt(hs[k] / arg);
      capped[k] = interior >= cap;
      f[k] = capped[k] ? cap : interior;
      sum += f[k] / hs[k];
    }
    return sum - target;
  };

  WaterFill w;
  w.f.assign(n, 0.0);
  w.capped.assign(n, false);

  // Below rho_all_capped every link sits on the cap and the sum is flat.
  double lo = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n; ++k)
    lo = std::min(lo, hs[k] / (cap * cap) - n / hs[k]);

  double g_lo = fill(lo, w.f, w.capped);
  if (g_lo <= residual_tol) {  // root sits in the flat all-capped regime
    w.rho = lo;
    w.residual = std::abs(g_lo);
    return w;
  }

  double hi = lo;
  double step = std::max(1.0, std::abs(lo));
  int iter = 0;
  while (iter++ < iteration_cap) {
    hi = lo + step;
    if (fill(hi, w.f, w.capped) <= 0.0) break;
    step *= 2.0;
  }

  double mid = hi, g_mid = g_lo;
  while (iter++ < iteration_cap) {
    mid = 0.5 * (lo + hi);
    g_mid = fill(mid, w.f, w.capped);
    if (std::abs(g_mid) <= residual_tol) break;
    (g_mid > 0.0 ? lo : hi) = mid;
    if (hi - lo <= 1e-16 * (1.0 + std::abs(lo) + std::abs(hi))) {
      mid = 0.5 * (lo + hi);
      g_mid = fill(mid, w.f, w.capped);
      break;
    }
  }

  if (std::abs(g_mid) <= residual_tol) {
    w.rho = mid;
    w.residual = std::abs(g_mid);
    return w;
  }
  throw SolverError("water-filling bisection stalled, coupling residual " +
                    std::to_string(g_mid));
}

}  // namespace detail

/// Solves the convexified back-off problem. The saturated corner is returned
/// directly when the closed-form test certifies it; otherwise a golden-section
/// search over eps wraps a water-filling bisection over rho. The profile in
/// eps inherits unimodality from joint convexity.
inline KktSolution solve_kkt(const OptimizerInputs& in) {
  validate(in);
  const int n = static_cast<int>(in.holding_rates.size());
  const std::vector<double>& hs = in.holding_rates;
  const double r = in.r_ub;

  KktSolution sol;
  sol.eta.assign(n, 0.0);
  for (double h : hs) {
    sol.x_sum += 1.0 / h;
    sol.y_sum += 1.0 / (h * h);
  }
  const double s = 1.0 + sol.x_sum * r;
  const double eps_min = 1.0 / s;

  const SaturationCheck sat = check_saturated(in);
  if (sat.saturated) {
    sol.saturated = true;
    sol.eps = eps_min;
    sol.f.assign(n, eps_min * r);
    sol.capped.assign(n, true);
    // Any rho strictly inside the certified interval yields nonnegative
    // multipliers; take the midpoint (the upper end keeps mu of the tightest
    // link at zero, the lower end keeps gamma at zero).
    sol.rho = 0.5 * (sat.rho_lower + sat.rho_upper);
    sol.gamma = sol.rho * s + n * sol.y_sum * r - n * s * s / r;
    sol.mu.resize(n);
    for (int k = 0; k < n; ++k)
      sol.mu[k] = std::max(0.0, s * s / (r * r) - n / (hs[k] * hs[k]) - sol.rho / hs[k]);
    return sol;
  }

  constexpr int kIterationCap = 10000;
  constexpr double kRhoResidualTol = 1e-10;
  constexpr double kEpsWidthTol = 1e-9;

  auto profile = [&](double eps) {
    if (1.0 - eps < 1e-14) return std::numeric_limits<double>::infinity();
    detail::WaterFill w =
        detail::water_fill(hs, r, eps, kIterationCap, kRhoResidualTol);
    double obj = 0.0;
    for (int k = 0; k < n; ++k)
      obj += n * w.f[k] / (hs[k] * hs[k]) + 1.0 / w.f[k];
    return obj;
  };

  // Golden-section over eps in [eps_min, 1].
  const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = eps_min, b = 1.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = profile(c), fd = profile(d);
  int iter = 0;
  while (b - a > kEpsWidthTol && iter++ < kIterationCap) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = profile(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = profile(d);
    }
  }
  if (b - a > kEpsWidthTol)
    throw SolverError("eps search stalled, interval width " + std::to_string(b - a));

  sol.eps = 0.5 * (a + b);
  detail::WaterFill w =
      detail::water_fill(hs, r, sol.eps, kIterationCap, kRhoResidualTol);
  sol.rho = w.rho;
  sol.f = w.f;
  sol.capped = w.capped;
  sol.gamma = 0.0;
  sol.mu.resize(n);
  const double cap = sol.eps * r;
  for (int k = 0; k < n; ++k)
    sol.mu[k] = w.capped[k]
                    ? std::max(0.0, 1.0 / (cap * cap) - n / (hs[k] * hs[k]) -
                                        sol.rho / hs[k])
                    : 0.0;
  return sol;
}

// ============================================================================
// Brute-force reference
// ============================================================================

/// Grid minimizer of the age objective over (0, r_ub]^N, used as an
/// independent check on solve_kkt. For N <= 3 a logarithmic grid is refined
/// around the incumbent until the local spacing drops below
/// relative_resolution * r_ub; the box corner is always a grid point. Larger
/// N falls back to cyclic coordinate descent in the share variables.
inline std::vector<double> solve_brute(const OptimizerInputs& in,
                                       double relative_resolution = 1e-3) {
  validate(in);
  if (!(relative_resolution > 0.0) || relative_resolution >= 1.0)
    throw ValidationError("resolution must lie in (0, 1)");
  const int n = static_cast<int>(in.holding_rates.size());
  const std::vector<double>& hs = in.holding_rates;
  const double r_ub = in.r_ub;

  if (n <= 3) {
    const int points = 24;
    std::vector<double> lo(n, r_ub * 1e-4), hi(n, r_ub);
    bool log_scale = true;
    std::vector<double> best(n, r_ub);
    double best_obj = age_objective(hs, best);

    while (true) {
      std::vector<std::vector<double>> axes(n);
      for (int k = 0; k < n; ++k) {
        axes[k].resize(points);
        for (int i = 0; i < points; ++i) {
          const double t = static_cast<double>(i) / (points - 1);
          axes[k][i] = log_scale
                           ? std::exp(std::log(lo[k]) +
                                      t * (std::log(hi[k]) - std::log(lo[k])))
                           : lo[k] + t * (hi[k] - lo[k]);
        }
        axes[k].back() = hi[k];  // keep the corner exact
      }

      std::vector<int> best_idx(n, points - 1);
      std::vector<double> rr(n);
      std::vector<int> idx(n, 0);
      while (true) {
        for (int k = 0; k < n; ++k) rr[k] = axes[k][idx[k]];
        const double obj = age_objective(hs, rr);
        if (obj < best_obj) {
          best_obj = obj;
          best = rr;
          best_idx = idx;
        }
        int k = 0;
        while (k < n && ++idx[k] == points) idx[k++] = 0;
        if (k == n) break;
      }

      double spacing = 0.0;
      for (int k = 0; k < n; ++k)
        spacing = std::max(spacing, (hi[k] - lo[k]) / (points - 1));
      if (spacing <= relative_resolution * r_ub) return best;

      for (int k = 0; k < n; ++k) {
        const int i = best_idx[k];
        lo[k] = axes[k][std::max(0, i - 1)];
        hi[k] = axes[k][std::min(points - 1, i + 1)];
      }
      log_scale = false;  // local boxes refine linearly
    }
  }

  // Coordinate descent on the convex share formulation: minimize
  // n*f_k/H_k^2 + 1/f_k one coordinate at a time subject to the linear cap
  // constraints that survive eliminating eps.
  double x = 0.0;
  for (double h : hs) x += 1.0 / h;
  const double eps_min = 1.0 / (1.0 + x * r_ub);

  std::vector<double> f(n);
  for (int k = 0; k < n; ++k) f[k] = 0.5 * eps_min * r_ub;
  const int sweeps = 10000;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    double moved = 0.0;
    for (int k = 0; k < n; ++k) {
      double others = 0.0;
      for (int j = 0; j < n; ++j)
        if (j != k) others += f[j] / hs[j];
      // eps(f_k) = 1 - others - f_k/H_k must stay in [eps_min, 1], and every
      // f_j <= eps * r_ub must keep holding.
      double hi = hs[k] * (1.0 - eps_min - others);
      hi = std::min(hi, r_ub * (1.0 - others) / (1.0 + r_ub / hs[k]));
      for (int j = 0; j < n; ++j)
        if (j != k) hi = std::min(hi, hs[k] * (1.0 - others - f[j] / r_ub));
      if (hi <= 0.0) continue;
      const double lo_k = 1e-12 * hi;
      const double ideal = hs[k] / std::sqrt(static_cast<double>(n));
      const double next = std::clamp(ideal, lo_k, hi);
      moved = std::max(moved, std::abs(next - f[k]));
      f[k] = next;
    }
    if (moved < 1e-13 * r_ub) break;
  }

  double eps = 1.0;
  for (int k = 0; k < n; ++k) eps -= f[k] / hs[k];
  eps = std::max(eps, eps_min);
  std::vector<double> out(n);
  for (int k = 0; k < n; ++k) out[k] = std::min(f[k] / eps, r_ub);
  return out;
}

// ============================================================================
// End-to-end assignment
// ============================================================================

/// Back-off rates plus their 802.11 window mapping and the age they achieve
/// at the given arrival rates.
struct BackoffAssignment {
  std::vector<double> backoff_rates;        ///< R*_k, capped links exactly r_ub
  std::vector<double> contention_windows;   ///< real-valued, from R*_k
  std::vector<int> contention_windows_rounded;  ///< nearest int, ties up, >= W0
  double achieved_total_age = 0.0;          ///< ms, at the reference lambdas
  KktSolution kkt;
};

inline BackoffAssignment optimize_backoff(const OptimizerInputs& in,
                                          double t_slot_ms,
                                          const std::vector<double>& lambdas) {
  validate(in);
  if (lambdas.size() != in.holding_rates.size())
    throw ValidationError("lambda count does not match link count");
  for (double l : lambdas)
    if (!(l > 0.0)) throw ValidationError("nonpositive rate: lambda");

  BackoffAssignment out;
  out.kkt = solve_kkt(in);
  const int n = static_cast<int>(in.holding_rates.size());
  out.backoff_rates.resize(n);
  for (int k = 0; k < n; ++k)
    out.backoff_rates[k] = out.kkt.capped[k] ? in.r_ub : out.kkt.f[k] / out.kkt.eps;

  const double w0_real = contention_window(in.r_ub, t_slot_ms);
  const int w0 = static_cast<int>(std::floor(w0_real + 0.5));
  out.contention_windows.resize(n);
  out.contention_windows_rounded.resize(n);
  for (int k = 0; k < n; ++k) {
    out.contention_windows[k] = contention_window(out.backoff_rates[k], t_slot_ms);
    const int rounded = static_cast<int>(std::floor(out.contention_windows[k] + 0.5));
    out.contention_windows_rounded[k] = std::max(rounded, w0);
  }

  csma::NetworkParams p;
  p.links.resize(n);
  for (int k = 0; k < n; ++k)
    p.links[k] = {lambdas[k], in.holding_rates[k], out.backoff_rates[k]};
  out.achieved_total_age = csma::total_age(p).total;
  return out;
}

}  // namespace aoi::opt
