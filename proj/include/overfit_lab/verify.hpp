#pragma once

// Invariant suites behind `overfit_lab verify`.  Each suite draws its
// instances from Verification substreams of the given seed and returns a
// machine-readable report listing every failed check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <json.hpp>

#include "overfit_lab/dataset.hpp"
#include "overfit_lab/experiments.hpp"
#include "overfit_lab/interpolators.hpp"
#include "overfit_lab/minnorm.hpp"
#include "overfit_lab/oracle.hpp"
#include "overfit_lab/pwl.hpp"
#include "overfit_lab/random.hpp"
#include "overfit_lab/risk.hpp"

namespace overfit_lab {

inline const std::vector<std::string>& verify_suites() {
  static const std::vector<std::string> names{"oracle", "envelope", "spike",      "slopes",
                                              "gaps",   "moments",  "inequality", "gamma"};
  return names;
}

struct CheckFailure {
  std::string check;
  nlohmann::json instance;
};

struct VerifyReport {
  std::string suite;
  std::uint64_t seed = 0;
  std::size_t checks = 0;
  std::size_t failed = 0;
  std::vector<CheckFailure> failures;  // the first kMaxRecorded failures
  nlohmann::json details = nlohmann::json::object();

  static constexpr std::size_t kMaxRecorded = 25;

  [[nodiscard]] bool passed() const { return failed == 0; }

  void expect(bool ok, const std::string& check, const nlohmann::json& instance = {}) {
    ++checks;
    if (ok) return;
    ++failed;
    if (failures.size() < kMaxRecorded) failures.push_back({check, instance});
  }

  void merge(const VerifyReport& other) {
    checks += other.checks;
    failed += other.failed;
    for (const auto& f : other.failures) {
      if (failures.size() < kMaxRecorded) failures.push_back(f);
    }
  }

  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json fails = nlohmann::json::array();
    for (const auto& f : failures) fails.push_back({{"check", f.check}, {"instance", f.instance}});
    return {{"suite", suite}, {"seed", seed},       {"passed", passed()}, {"checks", checks},
            {"failed", failed}, {"failures", fails}, {"details", details}};
  }
};

inline nlohmann::json to_json(const Dataset& s) { return {{"x", s.x()}, {"y", s.y()}}; }

namespace detail {

inline Dataset noisy_zero_dataset(std::size_t n, Philox& rng) {
  return draw_iid(n, PiecewiseLinear::constant(0.0), NoiseModel::gaussian(1.0), rng).data;
}

inline Philox verification_stream(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
  return substream(seed, tag, index, StreamPurpose::Verification);
}

// Stream tags, one per suite, so suites never share draws.
enum : std::uint64_t {
  kTagOracle = 101,
  kTagStructure = 102,
  kTagSpike = 103,
  kTagGaps = 104,
  kTagMoments = 105,
  kTagInequality = 106,
  kTagEvents = 107,
};

}  // namespace detail

/// Main solver against the exhaustive kink search on random datasets with
/// n drawn from n_values in turn, zero target and unit Gaussian noise.
inline VerifyReport verify_oracle(std::uint64_t seed, std::size_t count = 100,
                                  const std::vector<std::size_t>& n_values = {2, 3, 4}) {
  VerifyReport rep;
  rep.suite = "oracle";
  rep.seed = seed;
  double worst_cost = 0.0, worst_sup = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t n = n_values[i % n_values.size()];
    auto rng = detail::verification_stream(seed, detail::kTagOracle, i);
    const auto s = detail::noisy_zero_dataset(n, rng);
    const auto sol = minnorm_interpolate(s);
    const auto ref = brute_force_minnorm(s);
    const double gap = std::abs(sol.cost - ref.cost);
    const double sup = sup_distance(sol.function, ref.function, 1001);
    const double rel = gap / std::max(ref.cost, std::numeric_limits<double>::min());
    worst_cost = std::max(worst_cost, ref.cost > 0.0 ? rel : gap);
    worst_sup = std::max(worst_sup, sup);
    const nlohmann::json inst{{"index", i}, {"data", to_json(s)}, {"solver_cost", sol.cost},
                              {"oracle_cost", ref.cost}, {"sup_distance", sup}};
    rep.expect(sol.converged, "solver converged", inst);
    rep.expect(gap <= 1e-6 * ref.cost + 1e-12, "cost within 1e-6 relative", inst);
    rep.expect(sup <= 1e-4, "sup distance <= 1e-4", inst);
  }
  rep.details = {{"instances", count}, {"max_relative_cost_gap", worst_cost}, {"max_sup_distance", worst_sup}};
  return rep;
}

struct StructureChecks {
  bool kink_budget = true;
  bool envelope = true;
  bool boundary = true;
  bool slopes = true;
};

/// Structural properties of one min-norm fit.  Tolerances are absolute.
inline void check_structure(const Dataset& s, const MinNormResult& r, const StructureChecks& which,
                            VerifyReport& rep, const nlohmann::json& tag, double envelope_tol = 1e-8,
                            double boundary_tol = 1e-10, double slope_tol = 1e-8) {
  const auto& f = r.function;
  const auto& x = s.x();
  const std::size_t n = s.size();
  auto instance = [&](const char* what, double at) {
    nlohmann::json j = tag;
    j["what"] = what;
    j["at"] = at;
    j["data"] = to_json(s);
    return j;
  };
  rep.expect(r.converged, "solver converged", instance("converged", 0.0));

  if (which.kink_budget) {
    std::vector<std::size_t> per(n - 1, 0);
    bool outside = false;
    double where = 0.0;
    for (double t : f.breakpoints()) {
      if (t < x.front() || t >= x.back()) {
        outside = true;
        where = t;
        continue;
      }
      const auto it = std::upper_bound(x.begin(), x.end(), t);
      ++per[static_cast<std::size_t>(it - x.begin()) - 1];
    }
    rep.expect(!outside, "no kink outside [x_1, x_n)", instance("kink", where));
    const auto most = std::max_element(per.begin(), per.end());
    rep.expect(*most <= 1, "at most one kink per interval",
               instance("interval", x[static_cast<std::size_t>(most - per.begin())]));
  }

  if (which.envelope) {
    double worst = 0.0, at = 0.0;
    for (const auto& e : envelope(s)) {
      for (int k = 0; k < 500; ++k) {
        const double t = e.left + (e.right - e.left) * k / 500.0;
        const double v = f(t);
        const double miss = std::max(e.lower(t) - v, v - e.upper(t));
        if (miss > worst) {
          worst = miss;
          at = t;
        }
      }
    }
    rep.expect(worst <= envelope_tol, "envelope containment", instance("envelope", at));
  }

  if (which.boundary) {
    const Line first = s.secant(0);
    const Line last = s.secant(n - 2);
    double worst = 0.0, at = 0.0;
    auto probe = [&](double t, const Line& g) {
      const double d = std::abs(f(t) - g(t));
      if (d > worst) {
        worst = d;
        at = t;
      }
    };
    for (int k = 0; k < 200; ++k) probe(x[1] * k / 200.0, first);
    const double b = x[n - 2];
    for (int k = 0; k <= 200; ++k) probe(b + (1.0 - b) * k / 200.0, last);
    rep.expect(worst <= boundary_tol, "boundary identities", instance("boundary", at));
  }

  if (which.slopes) {
    double worst = 0.0, at = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto [lo, hi] = s.slopes_around(i);
      const double incoming = f.slope_at(std::nextafter(x[i], -std::numeric_limits<double>::infinity()));
      const double miss = std::max(std::min(lo, hi) - incoming, incoming - std::max(lo, hi));
      if (miss > worst) {
        worst = miss;
        at = x[i];
      }
    }
    rep.expect(worst <= slope_tol, "incoming slope bounds", instance("slope", at));
  }
}

/// Random noisy datasets with n drawn from n_values in turn.
inline VerifyReport verify_structure(std::uint64_t seed, std::size_t count, const std::vector<std::size_t>& n_values,
                                     const StructureChecks& which, const std::string& name = "structure") {
  VerifyReport rep;
  rep.suite = name;
  rep.seed = seed;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t n = n_values[i % n_values.size()];
    auto rng = detail::verification_stream(seed, detail::kTagStructure, i);
    const auto s = detail::noisy_zero_dataset(n, rng);
    check_structure(s, minnorm_interpolate(s), which, rep, {{"index", i}, {"n", n}});
  }
  rep.details = {{"instances", count}, {"n_values", n_values}};
  return rep;
}

inline VerifyReport verify_envelope(std::uint64_t seed, std::size_t count = 200) {
  return verify_structure(seed, count, {5, 20, 100}, {false, true, true, false}, "envelope");
}

inline VerifyReport verify_slopes(std::uint64_t seed, std::size_t count = 200) {
  return verify_structure(seed, count, {5, 20, 100}, {true, false, false, true}, "slopes");
}

/// Four points x1 < x2 < x3 < x4 with y = (h - d, h, h, h - d) (concave) or
/// its mirror (convex): both inner points carry the same curvature, so the
/// fit on [x2, x3] is the min (max) of the two outer secants, which cross at
/// x2 + l1 l2 / (l1 + l3).
inline Dataset spike_configuration(Philox& rng, bool concave) {
  std::vector<double> x(4);
  do {
    for (auto& v : x) v = rng.uniform();
    std::sort(x.begin(), x.end());
  } while (x[1] - x[0] < 1e-3 || x[2] - x[1] < 1e-3 || x[3] - x[2] < 1e-3);
  const double h = 4.0 * rng.uniform() - 2.0;
  const double d = (0.5 + 2.5 * rng.uniform()) * (concave ? 1.0 : -1.0);
  return Dataset(x, {h - d, h, h, h - d});
}

inline VerifyReport verify_spike(std::uint64_t seed, std::size_t count = 50, double tol = 1e-8) {
  VerifyReport rep;
  rep.suite = "spike";
  rep.seed = seed;
  double worst_shape = 0.0, worst_cross = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = detail::verification_stream(seed, detail::kTagSpike, i);
    const auto s = spike_configuration(rng, i % 2 == 0);
    const nlohmann::json inst{{"index", i}, {"data", to_json(s)}};
    const auto r = minnorm_interpolate(s);
    rep.expect(r.converged, "solver converged", inst);

    const auto sp = special_points(s);
    std::optional<SpikeSegment> seg;
    for (std::size_t k = 0; k < sp.indices.size() && !seg; ++k) seg = exact_spike(s, k);
    rep.expect(seg.has_value() && seg->interval == 1, "hypotheses hold on the middle interval", inst);
    if (!seg) continue;

    double shape = 0.0;
    for (int k = 0; k <= 1000; ++k) {
      const double t = seg->left + (seg->right - seg->left) * k / 1000.0;
      shape = std::max(shape, std::abs(r.function(t) - seg->shape(t)));
    }
    rep.expect(shape <= tol, "matches min/max of extended secants", inst);

    const double l1 = s.gap(1), l2 = s.gap(2), l3 = s.gap(3);
    const double predicted = s.x()[1] + l1 * l2 / (l1 + l3);
    const auto bp = r.function.breakpoints();
    double nearest = std::numeric_limits<double>::infinity();
    for (double t : bp) {
      if (t > seg->left && t < seg->right) nearest = std::min(nearest, std::abs(t - predicted));
    }
    rep.expect(std::abs(seg->kink - predicted) <= tol, "secants cross at the predicted point", inst);
    rep.expect(nearest <= tol, "solver kink at the predicted point", inst);
    worst_shape = std::max(worst_shape, shape);
    worst_cross = std::max(worst_cross, nearest);
  }
  rep.details = {{"instances", count}, {"max_shape_error", worst_shape}, {"max_kink_error", worst_cross}};
  return rep;
}

/// One random gap per draw, scaled by n + 1, against Exp(1).  The iid design
/// must pass at level alpha and the grid design must fail with p < 1e-6.
inline VerifyReport verify_gaps(std::uint64_t seed, std::size_t draws = 10000, std::size_t n = 100,
                                double alpha = 0.01) {
  VerifyReport rep;
  rep.suite = "gaps";
  rep.seed = seed;
  auto a = detail::verification_stream(seed, detail::kTagGaps, 0);
  auto b = detail::verification_stream(seed, detail::kTagGaps, 1);
  const auto iid = gap_distribution_test(Design::IidUniform, n, draws, a, alpha);
  const auto grid = gap_distribution_test(Design::Grid, n, draws, b, alpha);
  auto as_json = [](const KsReport& r) {
    return nlohmann::json{{"statistic", r.statistic}, {"p_value", r.p_value}, {"samples", r.samples}};
  };
  rep.expect(iid.pass, "iid gaps pass KS against Exp(1)", as_json(iid));
  rep.expect(grid.p_value < 1e-6, "grid gaps fail KS decisively", as_json(grid));
  rep.details = {{"iid", as_json(iid)}, {"grid", as_json(grid)}, {"alpha", alpha}, {"n", n}};
  return rep;
}

/// E|Z|^p, Z standard normal, by double-exponential quadrature of 2 z^p phi(z).
inline double folded_normal_moment_quadrature(double p) {
  boost::math::quadrature::exp_sinh<double> integrator;
  auto f = [p](double z) {
    if (z <= 0.0) return 0.0;
    return 2.0 * std::exp(p * std::log(z) - 0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  };
  return integrator.integrate(f, 0.0, std::numeric_limits<double>::infinity());
}

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

inline MeanEstimate mean_estimate(const std::vector<double>& v) {
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = v[i] - mean;
    mean += d / static_cast<double>(i + 1);
    m2 += d * (v[i] - mean);
  }
  return {mean, std::sqrt(m2 / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()))};
}

inline VerifyReport verify_gamma(std::size_t points = 1000) {
  VerifyReport rep;
  rep.suite = "gamma";
  for (std::size_t k = 1; k <= points; ++k) {
    const double z = static_cast<double>(k) / static_cast<double>(points);
    const auto [lo, g, hi] = gamma_bounds_check(z);
    rep.expect(lo <= g && g <= hi, "1/(2z) <= Gamma(z) <= 1/z", {{"z", z}, {"gamma", g}});
  }
  rep.details = {{"points", points}};
  return rep;
}

inline VerifyReport verify_moments(std::uint64_t seed, std::size_t samples = 10000000,
                                   std::size_t gamma_samples = 1000000) {
  VerifyReport rep;
  rep.suite = "moments";
  rep.seed = seed;
  nlohmann::json folded = nlohmann::json::array();
  const auto unit = NoiseModel::gaussian(1.0);
  for (double p : {1.0, 1.5, 2.0, 3.0}) {
    const double closed = unit.moment(p);
    const double quad = folded_normal_moment_quadrature(p);
    folded.push_back({{"p", p}, {"closed_form", closed}, {"quadrature", quad}});
    rep.expect(std::abs(closed - quad) <= 1e-10, "folded normal moment", folded.back());
  }

  nlohmann::json maxab = nlohmann::json::array();
  {
    auto rng = detail::verification_stream(seed, detail::kTagMoments, 0);
    std::vector<double> inv1(samples), inv15(samples);
    for (std::size_t i = 0; i < samples; ++i) {
      const double a = -std::log(rng.uniform_open());
      const double b = -std::log(rng.uniform_open());
      const double m = std::max(a, b);
      inv1[i] = 1.0 / m;
      inv15[i] = 1.0 / (m * std::sqrt(m));
    }
    for (const auto& [p, v] : {std::pair{1.0, &inv1}, std::pair{1.5, &inv15}}) {
      const auto est = mean_estimate(*v);
      const auto bound = max_exp_inverse_moment(p);
      const double truth = max_exp_inverse_moment_true(p);
      maxab.push_back({{"p", p},
                       {"monte_carlo", est.mean},
                       {"std_error", est.std_error},
                       {"exact", truth},
                       {"bound", bound.bound}});
      rep.expect(est.mean <= bound.bound, "E[1/max(A,B)^p] <= 2^p/(2-p)", maxab.back());
      rep.expect(std::abs(est.mean - truth) <= 3.0 * est.std_error, "E[1/max(A,B)^p] within 3 SE", maxab.back());
    }
  }

  nlohmann::json inv_gamma;
  {
    auto rng = detail::verification_stream(seed, detail::kTagMoments, 1);
    std::vector<double> v(gamma_samples);
    for (auto& e : v) {
      double z = 0.0;
      for (int k = 0; k < 9; ++k) z -= std::log(rng.uniform_open());
      e = 1.0 / (z * z);
    }
    const auto est = mean_estimate(v);
    const double exact = boost::math::tgamma(7.0) / boost::math::tgamma(9.0);
    inv_gamma = {{"monte_carlo", est.mean}, {"std_error", est.std_error}, {"exact", exact},
                 {"library", inverse_gamma_moment(9.0, 2.0)}};
    rep.expect(std::abs(est.mean - exact) <= 3.0 * est.std_error, "E[1/Gamma(9,1)^2] within 3 SE", inv_gamma);
    rep.expect(std::abs(inverse_gamma_moment(9.0, 2.0) - exact) <= 1e-14, "inverse gamma moment closed form",
               inv_gamma);
  }

  const auto gamma = verify_gamma();
  rep.merge(gamma);
  rep.details = {{"folded_normal", folded}, {"inverse_max", maxab}, {"inverse_gamma", inv_gamma},
                 {"gamma_points", gamma.checks}, {"samples", samples}};
  return rep;
}

/// A random piecewise-linear function with up to four kinks in [0, 1].
inline PiecewiseLinear random_function(Philox& rng) {
  const int kinks = static_cast<int>(rng.uniform() * 5.0);
  std::vector<Kink> ks;
  for (int k = 0; k < kinks; ++k) ks.push_back(Kink{rng.uniform(), 6.0 * rng.uniform() - 3.0});
  return PiecewiseLinear(Point{0.0, 4.0 * rng.uniform() - 2.0}, 6.0 * rng.uniform() - 3.0, ks);
}

/// L_p >= R_p on random (predictor, target, sigma, p) instances, plus the
/// two-point inequality behind it on random triples.
inline VerifyReport verify_inequality(std::uint64_t seed, std::size_t instances = 500,
                                      std::size_t triples = 100000, double slack = 1e-9) {
  VerifyReport rep;
  rep.suite = "inequality";
  rep.seed = seed;
  double min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < instances; ++i) {
    auto rng = detail::verification_stream(seed, detail::kTagInequality, i);
    const auto f = random_function(rng);
    const auto target = random_function(rng);
    const double sigma = 2.0 * rng.uniform();
    const double p = 1.0 + 3.0 * rng.uniform();
    const auto noise = NoiseModel::gaussian(sigma);
    const double r = reconstruction_risk(f, target, p);
    const double l = population_risk(f, target, noise, p);
    min_gap = std::min(min_gap, l - r);
    rep.expect(l >= r - slack, "L_p >= R_p",
               {{"index", i}, {"predictor", to_json(f)}, {"target", to_json(target)}, {"sigma", sigma},
                {"p", p}, {"R_p", r}, {"L_p", l}});
  }
  auto rng = detail::verification_stream(seed, detail::kTagInequality, instances);
  std::size_t bad = 0;
  for (std::size_t i = 0; i < triples; ++i) {
    const double mu = 10.0 * rng.uniform() - 5.0;
    const double delta = 10.0 * rng.uniform() - 5.0;
    const double p = 1.0 + 4.0 * rng.uniform();
    const bool ok = symmetric_noise_inequality_check(mu, delta, p);
    bad += ok ? 0 : 1;
    rep.expect(ok, "two-point inequality", {{"mu", mu}, {"delta", delta}, {"p", p}});
  }
  rep.details = {{"instances", instances}, {"min_L_minus_R", min_gap}, {"triples", triples}, {"triple_failures", bad}};
  return rep;
}

inline VerifyReport run_verify_suite(const std::string& name, std::uint64_t seed) {
  if (name == "oracle") return verify_oracle(seed);
  if (name == "envelope") return verify_envelope(seed);
  if (name == "spike") return verify_spike(seed);
  if (name == "slopes") return verify_slopes(seed);
  if (name == "gaps") return verify_gaps(seed);
  if (name == "moments") return verify_moments(seed);
  if (name == "inequality") return verify_inequality(seed);
  if (name == "gamma") {
    auto r = verify_gamma();
    r.seed = seed;
    return r;
  }
  throw std::invalid_argument("unknown suite '" + name + "'");
}

/// Blocks that fire at n points over many trials: the min-norm fit's
/// reconstruction risk on each firing block's middle interval against the
/// block lower bound, and the pooled firing rate against its analytic value.
struct LowerBoundStudy {
  std::size_t trials = 0;
  std::size_t blocks = 0;
  std::size_t events = 0;
  double c0_empirical = 0.0;
  double c0_std_error = 0.0;
  double c0_reference = 0.0;
  ProportionEstimate gap_pattern;
  VerifyReport report;
};

namespace detail {

/// Checks every firing block of one sample; returns the number of firing blocks.
inline std::size_t check_firing_blocks(const Sample& sample, const std::vector<double>& p_values, std::size_t trial,
                                       VerifyReport& rep, std::size_t& blocks) {
  const auto zero = PiecewiseLinear::constant(0.0);
  const auto events = detect_unfortunate_events(sample.data, sample.noise, p_values.front());
  blocks += events.blocks;
  if (events.events == 0) return 0;
  const auto f = minnorm_interpolate(sample.data).function;
  const auto& x = sample.data.x();
  for (const auto& b : events.block_events) {
    if (!b.fired) continue;
    const double l2 = x[b.start + 2] - x[b.start + 1];
    const double l3 = x[b.start + 3] - x[b.start + 2];
    const double l4 = x[b.start + 4] - x[b.start + 3];
    for (double p : p_values) {
      const double local = reconstruction_risk(f, zero, p, b.left, b.right, RiskMethod::Quadrature);
      const double bound = block_lower_bound(l2, l3, l4, p);
      rep.expect(local >= bound - 1e-8, "middle-interval risk >= block lower bound",
                 {{"trial", trial}, {"block_start", b.start}, {"p", p}, {"R_p", local}, {"bound", bound}});
    }
  }
  return events.events;
}

/// Standard normal conditioned on [lo, hi], by rejection.
inline double conditioned_normal(Philox& rng, double lo, double hi) {
  const auto unit = NoiseModel::gaussian(1.0);
  for (;;) {
    const double z = unit.sample(rng);
    if (z >= lo && z <= hi) return z;
  }
}

}  // namespace detail

inline LowerBoundStudy lower_bound_study(std::uint64_t seed, std::size_t trials = 1000, std::size_t n = 600,
                                         const std::vector<double>& p_values = {1.0, 1.5, 2.0, 3.0},
                                         std::size_t gap_samples = 10000000) {
  LowerBoundStudy st;
  st.trials = trials;
  st.report.suite = "events";
  st.report.seed = seed;
  const auto zero = PiecewiseLinear::constant(0.0);
  const auto noise = NoiseModel::gaussian(1.0);
  for (std::size_t t = 0; t < trials; ++t) {
    auto rng = detail::verification_stream(seed, detail::kTagEvents, t);
    st.events += detail::check_firing_blocks(draw_iid(n, zero, noise, rng), p_values, t, st.report, st.blocks);
  }
  auto rng = detail::verification_stream(seed, detail::kTagEvents, trials);
  st.gap_pattern = gap_pattern_monte_carlo(gap_samples, rng);
  st.c0_reference = gaussian_pattern_probability() * st.gap_pattern.estimate;
  const double m = static_cast<double>(st.blocks);
  st.c0_empirical = m > 0.0 ? static_cast<double>(st.events) / m : 0.0;
  st.c0_std_error = m > 0.0 ? std::sqrt(st.c0_reference * (1.0 - st.c0_reference) / m) : 0.0;
  st.report.expect(std::abs(st.c0_empirical - st.c0_reference) <= 3.0 * st.c0_std_error,
                   "firing rate within 3 SE of analytic value",
                   {{"empirical", st.c0_empirical}, {"reference", st.c0_reference}, {"std_error", st.c0_std_error}});
  st.report.details = {{"trials", trials},         {"n", n},
                       {"blocks", st.blocks},       {"events", st.events},
                       {"c0_empirical", st.c0_empirical}, {"c0_reference", st.c0_reference},
                       {"c0_std_error", st.c0_std_error}, {"gap_pattern", st.gap_pattern.estimate}};
  return st;
}

/// As lower_bound_study, but every block's noise is redrawn conditional on
/// the sign pattern, so blocks fire whenever their gaps line up (probability
/// 1/3).  The firing rate is checked against the gap-pattern probability.
inline LowerBoundStudy planted_lower_bound_study(std::uint64_t seed, std::size_t trials = 200, std::size_t n = 600,
                                                 const std::vector<double>& p_values = {1.0, 1.5, 2.0, 3.0}) {
  LowerBoundStudy st;
  st.trials = trials;
  st.report.suite = "events-planted";
  st.report.seed = seed;
  const auto zero = PiecewiseLinear::constant(0.0);
  const auto noise = NoiseModel::gaussian(1.0);
  for (std::size_t t = 0; t < trials; ++t) {
    auto rng = detail::verification_stream(seed, detail::kTagEvents + 1, t);
    auto sample = draw_iid(n, zero, noise, rng);
    for (std::size_t start = 0; start + 6 <= n && start < 10 * (n / 10); start += 10) {
      for (std::size_t k = 0; k < 6; ++k) {
        const bool low = k == 1 || k == 4;
        sample.noise[start + k] = low ? detail::conditioned_normal(rng, -40.0, -1.0)
                                      : detail::conditioned_normal(rng, 1.0, 2.0);
      }
    }
    sample.data = Dataset(sample.data.x(), sample.noise);
    st.events += detail::check_firing_blocks(sample, p_values, t, st.report, st.blocks);
  }
  const double m = static_cast<double>(st.blocks);
  st.c0_reference = kGapPatternProbability;
  st.c0_empirical = m > 0.0 ? static_cast<double>(st.events) / m : 0.0;
  st.c0_std_error = m > 0.0 ? std::sqrt(st.c0_reference * (1.0 - st.c0_reference) / m) : 0.0;
  st.report.expect(std::abs(st.c0_empirical - st.c0_reference) <= 3.0 * st.c0_std_error,
                   "planted firing rate within 3 SE of the gap-pattern probability",
                   {{"empirical", st.c0_empirical}, {"reference", st.c0_reference}, {"std_error", st.c0_std_error}});
  st.report.details = {{"trials", trials}, {"n", n}, {"blocks", st.blocks}, {"events", st.events},
                       {"rate", st.c0_empirical}};
  return st;
}

}  // namespace overfit_lab
