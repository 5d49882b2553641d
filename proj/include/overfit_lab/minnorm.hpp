#pragma once

// Minimum representation-cost interpolation.
//
// The interpolator is parameterized by the incoming slope s_j at every sample.
// Between samples j and j+1 the function follows the line through sample j
// with slope s_j, then the line through sample j+1 with slope s_{j+1}; the
// single kink sits where the two lines cross.  Writing
//
//   u_j = |s_j - delta_{j-1}|  in [0, w_j],   w_j = |delta_j - delta_{j-1}|,
//
// the kink in interval i has total slope change A + B with A = w_i - u_i and
// B = u_{i+1}, sits at (x_i A + x_{i+1} B) / (A + B), and costs
//
//   N_i(A, B) = || (A + B, x_i A + x_{i+1} B) ||_2,
//
// a norm of a linear map, hence convex.  Every interval whose endpoints do not
// share a non-flat curvature label forces u_{i+1} = 0, which splits the chain
// into independent runs of free variables.  Each run is solved by projected
// Newton on a smoothed objective (continuation on the smoothing) and then
// polished with exact coordinate minimization plus two-variable moves off the
// non-smooth corners.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "overfit_lab/dataset.hpp"
#include "overfit_lab/interpolators.hpp"
#include "overfit_lab/pwl.hpp"

namespace overfit_lab {

struct SolverOptions {
  double interpolation_tolerance = 1e-9;
  double cost_tolerance = 1e-10;  // relative change in cost between polish sweeps
  int max_iters = 0;              // polish sweeps per run; 0 selects max(10 n, 100)
};

/// A maximal run of coupled free variables.  `positions` holds the L+2 sample
/// abscissae spanned by the run's L+1 cost terms; term k uses positions k and
/// k+1.  Term 0 has A = head, B = u[0]; term k has A = widths[k-1] - u[k-1]
/// and B = u[k] (B = 0 for the last term).
struct ChainRun {
  std::vector<double> positions;
  std::vector<double> widths;
  double head = 0.0;

  [[nodiscard]] std::size_t size() const { return widths.size(); }
};

struct RunSolution {
  std::vector<double> u;
  double cost = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct MinNormResult {
  PiecewiseLinear function;
  double cost = 0.0;
  bool converged = true;
  int iterations = 0;
  double max_interpolation_residual = 0.0;
  std::vector<double> incoming_slopes;
};

namespace detail {

/// Cost of one kink with slope-change split (A, B) between abscissae p < q.
inline double kink_cost(double a, double b, double p, double q) {
  return std::hypot(a + b, p * a + q * b);
}

/// dN/dA; at the corner A = B = 0 this is the one-sided derivative along +A.
inline double kink_cost_da(double a, double b, double p, double q) {
  const double s = a + b;
  const double t = p * a + q * b;
  const double n = std::hypot(s, t);
  if (n == 0.0) return std::hypot(1.0, p);
  return (s + p * t) / n;
}

inline double kink_cost_db(double a, double b, double p, double q) {
  const double s = a + b;
  const double t = p * a + q * b;
  const double n = std::hypot(s, t);
  if (n == 0.0) return std::hypot(1.0, q);
  return (s + q * t) / n;
}

class RunObjective {
 public:
  explicit RunObjective(const ChainRun& run) : run_(run), len_(run.size()) {}

  [[nodiscard]] std::size_t size() const { return len_; }
  [[nodiscard]] double width(std::size_t k) const { return run_.widths[k]; }
  [[nodiscard]] double pos(std::size_t k) const { return run_.positions[k]; }

  [[nodiscard]] double term_a(std::size_t k, const std::vector<double>& u) const {
    return k == 0 ? run_.head : std::max(0.0, run_.widths[k - 1] - u[k - 1]);
  }
  [[nodiscard]] double term_b(std::size_t k, const std::vector<double>& u) const {
    return k < len_ ? u[k] : 0.0;
  }

  [[nodiscard]] double term(std::size_t k, const std::vector<double>& u) const {
    return kink_cost(term_a(k, u), term_b(k, u), pos(k), pos(k + 1));
  }

  [[nodiscard]] double total(const std::vector<double>& u) const {
    double f = 0.0;
    for (std::size_t k = 0; k <= len_; ++k) f += term(k, u);
    return f;
  }

  /// Derivative of the objective in u[k] with every other coordinate fixed,
  /// evaluated at u[k] = value.  At the bounds this is the one-sided
  /// derivative pointing into the box.
  [[nodiscard]] double partial(std::size_t k, double value, const std::vector<double>& u) const {
    const double a_left = term_a(k, u);
    const double b_right = term_b(k + 1, u);
    const double a_right = std::max(0.0, run_.widths[k] - value);
    return kink_cost_db(a_left, value, pos(k), pos(k + 1)) -
           kink_cost_da(a_right, b_right, pos(k + 1), pos(k + 2));
  }

  /// Exact minimizer of the objective along coordinate k.
  [[nodiscard]] double coordinate_argmin(std::size_t k, const std::vector<double>& u) const {
    const double w = run_.widths[k];
    if (w <= 0.0) return 0.0;
    if (partial(k, 0.0, u) >= 0.0) return 0.0;
    if (partial(k, w, u) <= 0.0) return w;
    double lo = 0.0, hi = w;
    for (int it = 0; it < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * w; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (partial(k, mid, u) < 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  }

  /// Smoothed objective: each term is sqrt(S^2 + T^2 + eta_k^2).
  [[nodiscard]] double smoothed(const std::vector<double>& u, double eta_rel) const {
    double f = 0.0;
    for (std::size_t k = 0; k <= len_; ++k) {
      const double a = term_a(k, u), b = term_b(k, u), p = pos(k), q = pos(k + 1);
      const double eta = eta_rel * term_scale(k);
      f += std::hypot(std::hypot(a + b, p * a + q * b), eta);
    }
    return f;
  }

  /// Gradient and tridiagonal Hessian of the smoothed objective in u.
  void smoothed_derivatives(const std::vector<double>& u, double eta_rel, std::vector<double>& grad,
                            std::vector<double>& diag, std::vector<double>& off) const {
    grad.assign(len_, 0.0);
    diag.assign(len_, 0.0);
    off.assign(len_ > 0 ? len_ - 1 : 0, 0.0);
    for (std::size_t k = 0; k <= len_; ++k) {
      const double a = term_a(k, u), b = term_b(k, u), p = pos(k), q = pos(k + 1);
      const double s = a + b, t = p * a + q * b;
      const double eta = eta_rel * term_scale(k);
      const double n = std::sqrt(s * s + t * t + eta * eta);
      if (n == 0.0) continue;
      const double ga = s + p * t, gb = s + q * t;
      const double n3 = n * n * n;
      const double haa = (1.0 + p * p) / n - ga * ga / n3;
      const double hab = (1.0 + p * q) / n - ga * gb / n3;
      const double hbb = (1.0 + q * q) / n - gb * gb / n3;
      if (k >= 1) {
        grad[k - 1] -= ga / n;
        diag[k - 1] += haa;
      }
      if (k < len_) {
        grad[k] += gb / n;
        diag[k] += hbb;
      }
      if (k >= 1 && k < len_) off[k - 1] -= hab;
    }
  }

 private:
  [[nodiscard]] double term_scale(std::size_t k) const {
    const double amax = k == 0 ? run_.head : run_.widths[k - 1];
    const double bmax = k < len_ ? run_.widths[k] : 0.0;
    return (amax + bmax) * std::hypot(1.0, std::max(std::abs(pos(k)), std::abs(pos(k + 1))));
  }

  const ChainRun& run_;
  std::size_t len_;
};

/// Solves a symmetric tridiagonal system in place (Thomas algorithm).
inline bool solve_tridiagonal(std::vector<double> diag, std::vector<double> off, std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    if (diag[i - 1] <= 0.0) return false;
    const double m = off[i - 1] / diag[i - 1];
    diag[i] -= m * off[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  if (n > 0 && diag[n - 1] <= 0.0) return false;
  for (std::size_t i = n; i-- > 0;) {
    if (i + 1 < n) rhs[i] -= off[i] * rhs[i + 1];
    rhs[i] /= diag[i];
  }
  return true;
}

/// Projected Newton on the smoothed objective for one smoothing level.
/// Returns the number of Newton iterations taken.
inline int projected_newton(const RunObjective& obj, std::vector<double>& u, double eta_rel, int max_steps) {
  const std::size_t len = obj.size();
  std::vector<double> grad, diag, off, step(len), trial(len);
  int steps = 0;
  for (; steps < max_steps; ++steps) {
    obj.smoothed_derivatives(u, eta_rel, grad, diag, off);
    // Work in scaled variables v = u / w so every box is [0, 1].
    std::vector<bool> active(len, false);
    constexpr double kBoundEps = 1e-13;
    double pg = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      const double w = obj.width(k);
      const double gv = grad[k] * w;
      const double v = u[k] / w;
      if ((v <= kBoundEps && gv > 0.0) || (v >= 1.0 - kBoundEps && gv < 0.0)) {
        active[k] = true;
      } else {
        pg = std::max(pg, std::abs(gv));
      }
    }
    std::vector<double> dv(len, 0.0), hd(len), ho(len > 0 ? len - 1 : 0), rhs(len);
    for (std::size_t k = 0; k < len; ++k) {
      const double w = obj.width(k);
      hd[k] = diag[k] * w * w;
      rhs[k] = -grad[k] * w;
      if (k + 1 < len) ho[k] = off[k] * w * obj.width(k + 1);
    }
    for (std::size_t k = 0; k < len; ++k) {
      if (!active[k]) continue;
      if (k > 0) ho[k - 1] = 0.0;
      if (k + 1 < len) ho[k] = 0.0;
    }
    const double reg = 1e-14 * (1.0 + *std::max_element(hd.begin(), hd.end()));
    for (auto& d : hd) d += reg;
    std::vector<double> sol = rhs;
    if (!solve_tridiagonal(hd, ho, sol)) break;
    for (std::size_t k = 0; k < len; ++k) dv[k] = sol[k];

    const double f0 = obj.smoothed(u, eta_rel);
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      double descent = 0.0;
      for (std::size_t k = 0; k < len; ++k) {
        const double w = obj.width(k);
        const double v = std::clamp(u[k] / w + t * dv[k], 0.0, 1.0);
        trial[k] = v * w;
        descent += grad[k] * (trial[k] - u[k]);
      }
      if (descent >= 0.0) continue;
      const double f1 = obj.smoothed(trial, eta_rel);
      if (f1 <= f0 + 1e-4 * descent) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    double change = 0.0;
    for (std::size_t k = 0; k < len; ++k) change = std::max(change, std::abs(trial[k] - u[k]) / obj.width(k));
    u = trial;
    if (change < 1e-15 || pg == 0.0) {
      ++steps;
      break;
    }
  }
  return steps;
}

/// Two-variable move off the corner of term k (A = 0 and B = 0, 1 <= k < L).
/// Returns true when a strictly improving move was taken.
inline bool corner_escape(const RunObjective& obj, std::size_t k, std::vector<double>& u) {
  const std::size_t left = k - 1, right = k;
  const double p = obj.pos(k), q = obj.pos(k + 1);
  const double g1 = kink_cost_db(obj.term_a(k - 1, u), u[left], obj.pos(k - 1), obj.pos(k));
  const double g2 = kink_cost_da(obj.width(right) - u[right], obj.term_b(k + 1, u), obj.pos(k + 1), obj.pos(k + 2));
  // Directional derivative along (u_left -= alpha, u_right += 1 - alpha).
  auto slope = [&](double alpha) { return std::hypot(1.0, p * alpha + q * (1.0 - alpha)) - alpha * g1 - (1.0 - alpha) * g2; };
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 100; ++it) {
    const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    if (slope(m1) < slope(m2)) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  const double alpha = 0.5 * (lo + hi);
  if (!(slope(alpha) < -1e-12)) return false;
  double tmax = std::numeric_limits<double>::infinity();
  if (alpha > 0.0) tmax = std::min(tmax, obj.width(left) / alpha);
  if (alpha < 1.0) tmax = std::min(tmax, obj.width(right) / (1.0 - alpha));
  const std::vector<double> base = u;
  auto at = [&](double t) {
    std::vector<double> v = base;
    v[left] = std::clamp(base[left] - alpha * t, 0.0, obj.width(left));
    v[right] = std::clamp(base[right] + (1.0 - alpha) * t, 0.0, obj.width(right));
    return v;
  };
  double a = 0.0, b = tmax;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = obj.total(at(c)), fd = obj.total(at(d));
  for (int it = 0; it < 200 && b - a > 1e-16 * tmax; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = obj.total(at(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = obj.total(at(d));
    }
  }
  const auto cand = at(0.5 * (a + b));
  const double before = obj.total(base);
  if (obj.total(cand) < before - 1e-13 * before) {
    u = cand;
    return true;
  }
  return false;
}

/// Moves coordinates lying within `band` (relative to their width) of a bound
/// onto it, singly and in corner pairs, when that does not raise the cost.
/// Coordinate descent approaches such corners only linearly.
inline bool snap_to_bounds(const RunObjective& obj, std::vector<double>& u, double band) {
  bool moved = false;
  double best = obj.total(u);
  auto attempt = [&](std::vector<double>& v) {
    const double c = obj.total(v);
    if (c <= best && v != u) {
      best = c;
      u = v;
      moved = true;
    }
  };
  for (std::size_t k = 0; k < obj.size(); ++k) {
    const double w = obj.width(k);
    std::vector<double> v = u;
    if (u[k] > 0.0 && u[k] < band * w) {
      v[k] = 0.0;
      if (k > 0 && obj.term_a(k, u) < band * obj.width(k - 1)) v[k - 1] = obj.width(k - 1);
      attempt(v);
      v = u;
      v[k] = 0.0;
      attempt(v);
    } else if (u[k] < w && u[k] > (1.0 - band) * w) {
      v[k] = w;
      if (k + 1 < obj.size() && u[k + 1] < band * obj.width(k + 1)) v[k + 1] = 0.0;
      attempt(v);
      v = u;
      v[k] = w;
      attempt(v);
    }
  }
  return moved;
}

/// Local optimality certificate: every coordinate is optimal in its box and no
/// two-variable move off a corner decreases the cost.
inline bool run_is_certified(const RunObjective& obj, const std::vector<double>& u) {
  constexpr double kTol = 1e-6;
  const std::size_t len = obj.size();
  for (std::size_t k = 0; k < len; ++k) {
    const double w = obj.width(k);
    const double h = 1e-9 * w;
    const double lo = std::max(0.0, u[k] - h), hi = std::min(w, u[k] + h);
    if (u[k] > h && obj.partial(k, lo, u) > kTol) return false;
    if (u[k] < w - h && obj.partial(k, hi, u) < -kTol) return false;
  }
  for (std::size_t k = 1; k < len; ++k) {
    if (obj.term_a(k, u) == 0.0 && u[k] == 0.0) {
      std::vector<double> copy = u;
      if (corner_escape(obj, k, copy) && obj.total(copy) < obj.total(u) * (1.0 - 1e-12)) return false;
    }
  }
  return true;
}

}  // namespace detail

/// Minimizes the run's representation cost over its box of free variables.
inline RunSolution solve_interval_run(const ChainRun& run, const SolverOptions& opts = {}) {
  if (run.positions.size() != run.size() + 2) {
    throw std::invalid_argument("solve_interval_run: positions must have size L + 2");
  }
  const detail::RunObjective obj(run);
  const std::size_t len = run.size();
  const int cap = opts.max_iters > 0 ? opts.max_iters : std::max<int>(100, 10 * static_cast<int>(len));
  RunSolution sol;
  sol.u.assign(len, 0.0);
  for (std::size_t k = 0; k < len; ++k) sol.u[k] = 0.5 * run.widths[k];

  int iters = 0;
  if (len >= 2) {
    for (double eta = 1e-2; eta > 1e-14; eta *= 0.1) iters += detail::projected_newton(obj, sol.u, eta, 30);
  }
  int sweeps = 0;

  double cost = obj.total(sol.u);
  bool settled = false, was_stagnant = false, snapped = false;
  while (sweeps < cap) {
    ++sweeps;
    double change = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      double next = obj.coordinate_argmin(k, sol.u);
      if (next < 1e-12 * run.widths[k]) next = 0.0;
      if (next > (1.0 - 1e-12) * run.widths[k]) next = run.widths[k];
      change = std::max(change, std::abs(next - sol.u[k]) / run.widths[k]);
      sol.u[k] = next;
    }
    bool escaped = false;
    for (std::size_t k = 1; k < len; ++k) {
      if (obj.term_a(k, sol.u) == 0.0 && sol.u[k] == 0.0) escaped |= detail::corner_escape(obj, k, sol.u);
    }
    const double next_cost = obj.total(sol.u);
    const double drop = cost - next_cost;
    cost = next_cost;
    const bool stagnant = drop <= opts.cost_tolerance * std::max(cost, 1e-300);
    if (!escaped && (change <= 1e-12 || (stagnant && was_stagnant))) {
      if (!snapped && detail::snap_to_bounds(obj, sol.u, 1e-4)) {
        snapped = true;
        cost = obj.total(sol.u);
        was_stagnant = false;
        continue;
      }
      settled = true;
      break;
    }
    was_stagnant = stagnant && !escaped;
  }
  sol.cost = cost;
  sol.iterations = iters + sweeps;
  sol.converged = settled && detail::run_is_certified(obj, sol.u);
  return sol;
}

/// The minimum representation-cost interpolator with at most one kink per
/// [x[i], x[i+1]) and no kink outside [x[0], x[n-1]).
inline MinNormResult minnorm_interpolate(const Dataset& s, const SolverOptions& opts = {}) {
  const std::size_t n = s.size();
  if (n < 2) throw std::invalid_argument("minnorm_interpolate: need at least two points");
  MinNormResult result;
  if (n <= 3) {
    result.function = extended_spline(s);
    result.cost = representation_cost(result.function);
    result.incoming_slopes.resize(n);
    for (std::size_t j = 0; j < n; ++j) result.incoming_slopes[j] = s.secant_slope(j == 0 ? 0 : j - 1);
    return result;
  }

  const auto labels = curvature(s);
  std::vector<double> left(n), width(n), dir(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto [l, r] = s.slopes_around(j);
    left[j] = l;
    width[j] = std::abs(r - l);
    dir[j] = r >= l ? 1.0 : -1.0;
  }
  // u[j] is free exactly when interval j-1 is an interior same-sign interval.
  std::vector<bool> free(n, false);
  for (std::size_t i = 1; i + 2 < n; ++i) {
    free[i + 1] = labels[i] == labels[i + 1] && labels[i] != CurvatureLabel::Flat && width[i + 1] > 0.0;
  }
  std::vector<double> u(n, 0.0);
  int iterations = 0;
  bool converged = true;
  SolverOptions run_opts = opts;
  if (run_opts.max_iters <= 0) run_opts.max_iters = std::max<int>(100, 10 * static_cast<int>(n));

  for (std::size_t j = 0; j < n;) {
    if (!free[j]) {
      ++j;
      continue;
    }
    std::size_t end = j;
    while (end < n && free[end]) ++end;
    ChainRun run;
    run.head = width[j - 1];
    for (std::size_t k = j; k < end; ++k) run.widths.push_back(width[k]);
    for (std::size_t k = j - 1; k <= end; ++k) run.positions.push_back(s.x()[k]);
    const RunSolution sol = solve_interval_run(run, run_opts);
    for (std::size_t k = j; k < end; ++k) u[k] = sol.u[k - j];
    iterations += sol.iterations;
    converged = converged && sol.converged;
    j = end;
  }

  std::vector<double> slopes(n);
  for (std::size_t j = 0; j < n; ++j) slopes[j] = left[j] + dir[j] * u[j];

  std::vector<double> breaks;
  std::vector<Line> lines{Line{slopes[0], s.x()[0], s.y()[0]}};
  double cost = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double a = std::max(0.0, width[i] - u[i]);
    const double b = u[i + 1];
    if (a + b == 0.0) continue;  // s_i = s_{i+1} = delta_i: no kink
    const double xi = s.x()[i], xn = s.x()[i + 1];
    double tau;
    if (a == 0.0) {
      tau = xn;
    } else if (b == 0.0) {
      tau = xi;
    } else {
      tau = std::min(xn, xi + (xn - xi) * (b / (a + b)));
    }
    cost += detail::kink_cost(a, b, xi, xn);
    breaks.push_back(tau);
    lines.push_back(Line{slopes[i + 1], xn, s.y()[i + 1]});
  }
  result.function = PiecewiseLinear::from_pieces(std::move(breaks), std::move(lines));
  result.cost = representation_cost(result.function);
  result.iterations = iterations;
  result.incoming_slopes = std::move(slopes);
  double residual = 0.0;
  for (std::size_t j = 0; j < n; ++j) residual = std::max(residual, std::abs(result.function(s.x()[j]) - s.y()[j]));
  result.max_interpolation_residual = residual;
  result.converged = converged && residual <= opts.interpolation_tolerance;
  (void)cost;
  return result;
}

}  // namespace overfit_lab
