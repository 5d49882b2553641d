#pragma once

// Independent references: an exhaustive kink-position search for the min-norm
// interpolator on tiny datasets, a Monte Carlo risk estimator and a sup-norm
// distance between piecewise-linear functions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "overfit_lab/dataset.hpp"
#include "overfit_lab/pwl.hpp"
#include "overfit_lab/random.hpp"
#include "overfit_lab/risk.hpp"

namespace overfit_lab {

struct OracleResult {
  double cost = 0.0;
  PiecewiseLinear function;
  double search_resolution = 0.0;
  std::size_t candidates_examined = 0;
};

struct OracleOptions {
  std::size_t max_grid_cells = 200000;
  std::size_t polish_candidates = 16;
  double polish_resolution = 1e-9;
};

namespace detail {

/// With kink positions fixed, the slopes are affine in the initial slope t:
/// slope_k = a_k + b_k t.  The cost sum_k w_k |slope_{k+1} - slope_k| is a
/// weighted absolute deviation in t, minimized at a weighted median.
struct FixedKinkSolution {
  double cost = 0.0;
  double initial_slope = 0.0;
};

inline FixedKinkSolution solve_fixed_kinks(const Dataset& s, const std::vector<double>& tau) {
  using real = long double;  // slopes grow like 1/(x_{i+1} - tau_i) along the chain
  const std::size_t m = tau.size();  // n - 1 kinks
  std::vector<real> a(m + 1), b(m + 1);
  a[0] = 0.0L;
  b[0] = 1.0L;
  for (std::size_t i = 0; i < m; ++i) {
    // The slope on [tau_{i-1}, tau_i] passes through point i; the next one reaches point i+1.
    const real xi = s.x()[i], xn = s.x()[i + 1];
    const real rise = static_cast<real>(s.y()[i + 1]) - s.y()[i];
    const real run = xn - tau[i];
    a[i + 1] = (rise - a[i] * (tau[i] - xi)) / run;
    b[i + 1] = -b[i] * (tau[i] - xi) / run;
  }
  // Terms w_k |c_k + d_k t|.
  std::vector<std::pair<real, real>> roots;  // (root, weight)
  real constant = 0.0L, total_weight = 0.0L;
  std::vector<real> c(m), d(m), w(m);
  for (std::size_t k = 0; k < m; ++k) {
    w[k] = std::hypot(1.0L, static_cast<real>(tau[k]));
    c[k] = a[k + 1] - a[k];
    d[k] = b[k + 1] - b[k];
    if (d[k] == 0.0L) {
      constant += w[k] * std::abs(c[k]);
    } else {
      roots.emplace_back(-c[k] / d[k], w[k] * std::abs(d[k]));
      total_weight += w[k] * std::abs(d[k]);
    }
  }
  real t = 0.0L;
  if (!roots.empty()) {
    std::sort(roots.begin(), roots.end());
    real acc = 0.0L;
    for (const auto& [r, wt] : roots) {
      acc += wt;
      if (acc >= 0.5L * total_weight) {
        t = r;
        break;
      }
    }
  }
  real cost = constant;
  for (std::size_t k = 0; k < m; ++k) {
    if (d[k] != 0.0L) cost += w[k] * std::abs(c[k] + d[k] * t);
  }
  return {static_cast<double>(cost), static_cast<double>(t)};
}

inline PiecewiseLinear kink_function(const Dataset& s, const std::vector<double>& tau, double t) {
  using real = long double;
  std::vector<Kink> kinks;
  real slope = t;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    const real xi = s.x()[i], xn = s.x()[i + 1];
    const real next = (static_cast<real>(s.y()[i + 1]) - s.y()[i] - slope * (tau[i] - xi)) / (xn - tau[i]);
    kinks.push_back(Kink{tau[i], static_cast<double>(next - slope)});
    slope = next;
  }
  return PiecewiseLinear(s.point(0), t, std::move(kinks));
}

}  // namespace detail

/// Exhaustive search over kink positions tau_i in [x_i, x_{i+1}) on a product
/// grid of at most opts.max_grid_cells cells (per-axis spacing `resolution`
/// in a coordinate clustered toward the data points, coarsened if needed),
/// then hierarchical local-grid polish of the best cells down to
/// opts.polish_resolution.
inline OracleResult brute_force_minnorm(const Dataset& s, double resolution = 1e-3, const OracleOptions& opts = {}) {
  const std::size_t n = s.size();
  if (n < 2) throw std::invalid_argument("brute_force_minnorm: need at least two points");
  if (n > 6) throw std::invalid_argument("brute_force_minnorm: n > 6 is not supported");
  if (!(resolution > 0.0 && resolution <= 1.0)) throw std::invalid_argument("brute_force_minnorm: resolution in (0, 1]");
  OracleResult res;
  if (n == 2) {
    res.function = PiecewiseLinear::affine(s.secant_slope(0), s.point(0));
    res.candidates_examined = 1;
    res.search_resolution = resolution;
    return res;
  }
  const std::size_t dim = n - 1;
  const auto requested = static_cast<std::size_t>(std::ceil(1.0 / resolution));
  const auto affordable = static_cast<std::size_t>(
      std::floor(std::pow(static_cast<double>(opts.max_grid_cells), 1.0 / static_cast<double>(dim)) + 1e-9));
  const std::size_t per_axis = std::max<std::size_t>(2, std::min(requested, affordable));
  std::vector<double> len(dim);
  for (std::size_t i = 0; i < dim; ++i) len[i] = s.x()[i + 1] - s.x()[i];

  // Grid coordinates u in [0, 1] map to fractions (1 - cos(pi u)) / 2 of each
  // interval, which clusters candidates toward both data points where the
  // cost varies fastest.
  const double top = 1.0 - 1e-4;
  auto position = [&](std::size_t i, double u) {
    const double frac = std::min(top, 0.5 * (1.0 - std::cos(std::numbers::pi * u)));
    return s.x()[i] + len[i] * frac;
  };

  std::vector<std::pair<double, std::vector<double>>> best;  // (cost, grid coordinates)
  std::vector<std::size_t> idx(dim, 0);
  std::vector<double> tau(dim), coord(dim);
  for (;;) {
    for (std::size_t i = 0; i < dim; ++i) {
      coord[i] = static_cast<double>(idx[i]) / static_cast<double>(per_axis - 1);
      tau[i] = position(i, coord[i]);
    }
    const double cost = detail::solve_fixed_kinks(s, tau).cost;
    ++res.candidates_examined;
    // Kinks with zero slope change can sit anywhere in their interval at
    // identical cost; keep one representative per cost value.
    const bool duplicate = std::any_of(best.begin(), best.end(), [&](const auto& e) {
      return std::abs(e.first - cost) <= 1e-12 * std::max(1.0, cost);
    });
    if (!duplicate && (best.size() < opts.polish_candidates || cost < best.back().first)) {
      best.emplace_back(cost, coord);
      std::sort(best.begin(), best.end(), [](const auto& l, const auto& r) { return l.first < r.first; });
      if (best.size() > opts.polish_candidates) best.pop_back();
    }
    std::size_t k = 0;
    while (k < dim && ++idx[k] == per_axis) idx[k++] = 0;
    if (k == dim) break;
  }

  // Hierarchical local grids: a box of half-width `radius` (fractional
  // coordinates) around the incumbent, sampled at `pts` points per axis; the
  // box recentres on the best point and shrinks only when that point is
  // interior.
  const int pts = dim <= 3 ? 9 : 5;
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<double> best_tau;
  std::vector<double> trial(dim);
  std::vector<int> ix(dim);
  for (auto& [cost0, start] : best) {
    std::vector<double> frac(dim);
    for (std::size_t i = 0; i < dim; ++i) frac[i] = start[i];
    double cur = cost0;
    double radius = 2.0 / static_cast<double>(per_axis);
    for (int guard = 0; radius >= opts.polish_resolution && guard < 400; ++guard) {
      std::vector<double> centre = frac;
      std::fill(ix.begin(), ix.end(), 0);
      bool on_edge = false;
      for (;;) {
        bool edge = false;
        for (std::size_t i = 0; i < dim; ++i) {
          const double off = radius * (2.0 * ix[i] / (pts - 1) - 1.0);
          trial[i] = std::clamp(centre[i] + off, 0.0, 1.0);
          edge = edge || ix[i] == 0 || ix[i] == pts - 1;
          tau[i] = position(i, trial[i]);
        }
        const double c = detail::solve_fixed_kinks(s, tau).cost;
        ++res.candidates_examined;
        if (c < cur) {
          cur = c;
          frac = trial;
          on_edge = edge;
        }
        std::size_t k = 0;
        while (k < dim && ++ix[k] == pts) ix[k++] = 0;
        if (k == dim) break;
      }
      if (!on_edge) radius *= 0.5;
    }
    if (cur < best_cost) {
      best_cost = cur;
      best_tau.resize(dim);
      for (std::size_t i = 0; i < dim; ++i) best_tau[i] = position(i, frac[i]);
    }
  }
  const auto sol = detail::solve_fixed_kinks(s, best_tau);
  res.function = detail::kink_function(s, best_tau, sol.initial_slope);
  res.cost = representation_cost(res.function);
  res.search_resolution = opts.polish_resolution;
  return res;
}

struct MonteCarloEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Sample mean of |f(x) - target(x) - eps|^p, x uniform on [0, 1].
inline MonteCarloEstimate monte_carlo_risk(const PiecewiseLinear& f, const PiecewiseLinear& target,
                                           const NoiseModel& noise, double p, std::size_t samples, Philox& rng) {
  if (samples < 1000) throw std::invalid_argument("monte_carlo_risk: need at least 1000 samples");
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double x = rng.uniform();
    const double v = std::pow(std::abs(f(x) - target(x) - noise.sample(rng)), p);
    const double delta = v - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (v - mean);
  }
  const double var = m2 / static_cast<double>(samples - 1);
  return {mean, std::sqrt(var / static_cast<double>(samples))};
}

/// max |f - g| over [0, 1]: both kink sets inside [0, 1], the endpoints, and
/// a uniform grid of grid_points points.
inline double sup_distance(const PiecewiseLinear& f, const PiecewiseLinear& g, std::size_t grid_points = 2) {
  if (grid_points < 2) throw std::invalid_argument("sup_distance: need at least two grid points");
  double m = 0.0;
  auto probe = [&](double x) { m = std::max(m, std::abs(f(x) - g(x))); };
  for (std::size_t i = 0; i < grid_points; ++i) probe(static_cast<double>(i) / static_cast<double>(grid_points - 1));
  for (double t : f.breakpoints()) {
    if (t >= 0.0 && t <= 1.0) probe(t);
  }
  for (double t : g.breakpoints()) {
    if (t >= 0.0 && t <= 1.0) probe(t);
  }
  return m;
}

}  // namespace overfit_lab
