#pragma once

// Data generation, seeded risk sweeps over (n, p), trend statistics and the
// distributional checks on sample spacings and spike-forming blocks.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "overfit_lab/dataset.hpp"
#include "overfit_lab/interpolators.hpp"
#include "overfit_lab/minnorm.hpp"
#include "overfit_lab/pwl.hpp"
#include "overfit_lab/random.hpp"
#include "overfit_lab/risk.hpp"

namespace overfit_lab {

enum class Design { IidUniform, Grid };
enum class Method { Spline, ExtSpline, MinNorm };

inline const char* to_string(Design d) { return d == Design::Grid ? "grid" : "iid"; }

inline const char* to_string(Method m) {
  switch (m) {
    case Method::Spline: return "spline";
    case Method::ExtSpline: return "extspline";
    case Method::MinNorm: return "minnorm";
  }
  return "unknown";
}

inline Design parse_design(const std::string& s) {
  if (s == "iid" || s == "iid_uniform") return Design::IidUniform;
  if (s == "grid") return Design::Grid;
  throw std::invalid_argument("unknown design '" + s + "' (expected iid or grid)");
}

inline Method parse_method(const std::string& s) {
  if (s == "spline") return Method::Spline;
  if (s == "extspline") return Method::ExtSpline;
  if (s == "minnorm") return Method::MinNorm;
  throw std::invalid_argument("unknown method '" + s + "' (expected spline, extspline or minnorm)");
}

struct ExperimentConfig {
  Design design = Design::IidUniform;
  PiecewiseLinear target = PiecewiseLinear::constant(0.0);
  NoiseModel noise = NoiseModel::gaussian(1.0);
  std::vector<std::size_t> n_values;
  std::vector<double> p_values;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  Method interpolator = Method::MinNorm;
  SolverOptions solver;

  void validate() const {
    if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
    if (n_values.empty() || p_values.empty()) throw std::invalid_argument("config: empty n or p list");
    for (auto n : n_values) {
      if (n < 2) throw std::invalid_argument("config: every n must be >= 2");
      if (n > 0xffffffffu) throw std::invalid_argument("config: n too large");
    }
    for (double p : p_values) {
      if (!(p >= 1.0) || !std::isfinite(p)) throw std::invalid_argument("config: every p must be >= 1");
    }
  }

  /// Lipschitz constant of the target: the largest absolute slope.
  [[nodiscard]] double lipschitz() const {
    double g = 0.0;
    for (const auto& piece : target.pieces()) g = std::max(g, std::abs(piece.slope));
    return g;
  }
};

/// A drawn dataset together with the noise realization of each sorted point.
struct Sample {
  Dataset data;
  std::vector<double> noise;
};

namespace detail {

inline Sample label(std::vector<double> x, const PiecewiseLinear& target, const NoiseModel& noise, Philox& rng) {
  std::vector<double> eps(x.size());
  for (auto& e : eps) e = noise.sample(rng);
  std::vector<std::size_t> order(x.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> xs(x.size()), ys(x.size()), es(x.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    xs[i] = x[order[i]];
    es[i] = eps[order[i]];
    ys[i] = target(xs[i]) + es[i];
  }
  return {Dataset(std::move(xs), std::move(ys)), std::move(es)};
}

}  // namespace detail

/// n i.i.d. uniform inputs (a draw with coinciding inputs is redrawn whole),
/// labels target(x) + eps.
inline Sample draw_iid(std::size_t n, const PiecewiseLinear& target, const NoiseModel& noise, Philox& rng) {
  if (n < 2) throw std::invalid_argument("sample_iid: n must be >= 2");
  std::vector<double> x(n);
  for (;;) {
    for (auto& v : x) v = rng.uniform();
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end()) break;
  }
  return detail::label(std::move(x), target, noise, rng);
}

/// Inputs x_i = i / n for i = 1..n.
inline Sample draw_grid(std::size_t n, const PiecewiseLinear& target, const NoiseModel& noise, Philox& rng) {
  if (n < 2) throw std::invalid_argument("sample_grid: n must be >= 2");
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i + 1) / static_cast<double>(n);
  return detail::label(std::move(x), target, noise, rng);
}

inline Sample draw(Design design, std::size_t n, const PiecewiseLinear& target, const NoiseModel& noise,
                   Philox& rng) {
  return design == Design::Grid ? draw_grid(n, target, noise, rng) : draw_iid(n, target, noise, rng);
}

inline Dataset sample_iid(std::size_t n, const PiecewiseLinear& target, const NoiseModel& noise, Philox& rng) {
  return draw_iid(n, target, noise, rng).data;
}

inline Dataset sample_grid(std::size_t n, const PiecewiseLinear& target, const NoiseModel& noise, Philox& rng) {
  return draw_grid(n, target, noise, rng).data;
}

struct Fit {
  PiecewiseLinear function;
  double cost = 0.0;
  bool converged = true;
};

inline Fit fit(const Dataset& s, Method method, const SolverOptions& opts = {}) {
  switch (method) {
    case Method::Spline: {
      auto f = linear_spline(s);
      const double c = representation_cost(f);
      return {std::move(f), c, true};
    }
    case Method::ExtSpline: {
      auto f = extended_spline(s);
      const double c = representation_cost(f);
      return {std::move(f), c, true};
    }
    case Method::MinNorm: {
      auto r = minnorm_interpolate(s, opts);
      return {std::move(r.function), r.cost, r.converged};
    }
  }
  throw std::invalid_argument("fit: unknown method");
}

struct SweepRecord {
  std::size_t n = 0;
  double p = 1.0;
  std::size_t trial = 0;
  double reconstruction = 0.0;
  double population = 0.0;
  double cost = 0.0;
  bool converged = true;
};

struct SweepSummary {
  std::size_t n = 0;
  double p = 1.0;
  double median = 0.0;  // of L_p
  double q25 = 0.0;
  double q75 = 0.0;
  double trimmed_mean = 0.0;
  double ratio_to_bayes = 0.0;  // median L_p / E|eps|^p
  double max_to_sum = 0.0;      // heavy-tail diagnostic over trials
  std::size_t nonconverged = 0;
};

struct SweepResult {
  ExperimentConfig config;
  std::vector<SweepRecord> records;  // ordered by (n, p, trial)
  std::vector<SweepSummary> summaries;

  [[nodiscard]] const SweepSummary& summary(std::size_t n, double p) const {
    for (const auto& s : summaries) {
      if (s.n == n && s.p == p) return s;
    }
    throw std::out_of_range("sweep: no summary for the requested (n, p)");
  }
};

/// Type-7 sample quantile (linear interpolation between order statistics).
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile: empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(const std::vector<double>& v) { return quantile(v, 0.5); }

/// Mean after dropping floor(fraction * size) values from each end.
inline double trimmed_mean(std::vector<double> v, double fraction = 0.1) {
  if (v.empty()) throw std::invalid_argument("trimmed_mean: empty sample");
  std::sort(v.begin(), v.end());
  const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(v.size())));
  double sum = 0.0;
  for (std::size_t i = k; i < v.size() - k; ++i) sum += v[i];
  return sum / static_cast<double>(v.size() - 2 * k);
}

/// Worker count: OVERFIT_LAB_THREADS if set, otherwise the hardware count.
inline unsigned worker_count() {
  if (const char* env = std::getenv("OVERFIT_LAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, count) on up to worker_count() threads.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; !failed && (i = next++) < count;) {
        try {
          body(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

inline std::vector<SweepSummary> summarize(const ExperimentConfig& cfg, const std::vector<SweepRecord>& records) {
  std::vector<SweepSummary> out;
  for (auto n : cfg.n_values) {
    for (double p : cfg.p_values) {
      std::vector<double> l;
      SweepSummary s;
      s.n = n;
      s.p = p;
      double sum = 0.0, mx = 0.0;
      for (const auto& r : records) {
        if (r.n != n || r.p != p) continue;
        l.push_back(r.population);
        sum += r.population;
        mx = std::max(mx, r.population);
        if (!r.converged) ++s.nonconverged;
      }
      s.median = median(l);
      s.q25 = quantile(l, 0.25);
      s.q75 = quantile(l, 0.75);
      s.trimmed_mean = trimmed_mean(l);
      const double bayes = cfg.noise.moment(p);
      s.ratio_to_bayes = bayes > 0.0 ? s.median / bayes : std::numeric_limits<double>::quiet_NaN();
      s.max_to_sum = sum > 0.0 ? mx / sum : 0.0;
      out.push_back(s);
    }
  }
  return out;
}

/// Every (n, trial) draws its inputs and noise from its own substream, so a
/// trial can be regenerated alone and results do not depend on scheduling.
inline SweepResult run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::size_t np = cfg.p_values.size();
  const std::size_t jobs = cfg.n_values.size() * cfg.trials;
  std::vector<SweepRecord> records(jobs * np);
  parallel_for(jobs, [&](std::size_t job) {
    const std::size_t ni = job / cfg.trials, trial = job % cfg.trials;
    const std::size_t n = cfg.n_values[ni];
    Philox rng = substream(cfg.seed, n, trial, StreamPurpose::Inputs);
    const Sample sample = draw(cfg.design, n, cfg.target, cfg.noise, rng);
    const Fit f = fit(sample.data, cfg.interpolator, cfg.solver);
    for (std::size_t pi = 0; pi < np; ++pi) {
      const double p = cfg.p_values[pi];
      SweepRecord& r = records[(ni * np + pi) * cfg.trials + trial];
      r.n = n;
      r.p = p;
      r.trial = trial;
      r.reconstruction = reconstruction_risk(f.function, cfg.target, p);
      r.population = population_risk(f.function, cfg.target, cfg.noise, p);
      r.cost = f.cost;
      r.converged = f.converged;
    }
  });
  SweepResult out;
  out.config = cfg;
  out.records = std::move(records);
  out.summaries = summarize(cfg, out.records);
  return out;
}

inline constexpr const char* kSweepCsvHeader = "n,p,trial,interpolator,design,R_p,L_p,cost,converged";
inline constexpr const char* kSummaryCsvHeader = "n,p,median_L,q25,q75,ratio_to_bayes";

inline void write_sweep_csv(std::ostream& os, const SweepResult& sr) {
  os << kSweepCsvHeader << '\n';
  char buf[256];
  for (const auto& r : sr.records) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%zu,%s,%s,%.17g,%.17g,%.17g,%s\n", r.n, r.p, r.trial,
                  to_string(sr.config.interpolator), to_string(sr.config.design), r.reconstruction, r.population,
                  r.cost, r.converged ? "true" : "false");
    os << buf;
  }
}

inline void write_summary_csv(std::ostream& os, const SweepResult& sr) {
  os << kSummaryCsvHeader << '\n';
  char buf[256];
  for (const auto& s : sr.summaries) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.n, s.p, s.median, s.q25, s.q75,
                  s.ratio_to_bayes);
    os << buf;
  }
}

/// Median L_p / L_p(target) per n, and the largest factor by which it moves
/// between consecutive n.
struct TemperedReport {
  double p = 1.0;
  std::vector<std::size_t> n;
  std::vector<double> ratio;
  double max_step_factor = 1.0;

  [[nodiscard]] bool within(double lo, double hi) const {
    return std::all_of(ratio.begin(), ratio.end(), [&](double r) { return r >= lo && r <= hi; });
  }
};

inline TemperedReport tempered_statistic(const SweepResult& sr, double p) {
  const double bayes = sr.config.noise.moment(p);
  if (!(bayes > 0.0)) throw std::invalid_argument("tempered_statistic: noise moment must be positive");
  TemperedReport t;
  t.p = p;
  for (auto n : sr.config.n_values) {
    t.n.push_back(n);
    t.ratio.push_back(sr.summary(n, p).median / bayes);
  }
  for (std::size_t i = 0; i + 1 < t.ratio.size(); ++i) {
    const double a = t.ratio[i], b = t.ratio[i + 1];
    t.max_step_factor = std::max(t.max_step_factor, std::max(a / b, b / a));
  }
  return t;
}

/// Median L_p per n and the least-squares slope of log(median) on log(n).
struct GrowthReport {
  double p = 2.0;
  std::vector<std::size_t> n;
  std::vector<double> median;
  double slope = 0.0;
};

inline double loglog_slope(const std::vector<std::size_t>& n, const std::vector<double>& v) {
  if (n.size() < 2) return 0.0;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    mx += std::log(static_cast<double>(n[i]));
    my += std::log(v[i]);
  }
  mx /= static_cast<double>(n.size());
  my /= static_cast<double>(n.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const double dx = std::log(static_cast<double>(n[i])) - mx;
    sxy += dx * (std::log(v[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

inline GrowthReport catastrophic_statistic(const SweepResult& sr, double p) {
  if (p < 2.0) throw std::invalid_argument("catastrophic_statistic: p must be >= 2");
  GrowthReport g;
  g.p = p;
  for (auto n : sr.config.n_values) {
    g.n.push_back(n);
    g.median.push_back(sr.summary(n, p).median);
  }
  g.slope = loglog_slope(g.n, g.median);
  return g;
}

/// One-sample Kolmogorov-Smirnov test.
struct KsReport {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t samples = 0;
  double alpha = 0.01;
  bool pass = true;
};

/// Asymptotic Kolmogorov tail Q(lambda) = 2 sum_k (-1)^{k-1} exp(-2 k^2 lambda^2).
inline double kolmogorov_tail(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

inline KsReport ks_test(std::vector<double> sample, const std::function<double(double)>& cdf, double alpha = 0.01) {
  if (sample.empty()) throw std::invalid_argument("ks_test: empty sample");
  std::sort(sample.begin(), sample.end());
  const double m = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, static_cast<double>(i + 1) / m - f, f - static_cast<double>(i) / m});
  }
  KsReport r;
  r.statistic = d;
  r.samples = sample.size();
  r.alpha = alpha;
  const double sq = std::sqrt(m);
  r.p_value = kolmogorov_tail((sq + 0.12 + 0.11 / sq) * d);
  r.pass = r.p_value >= alpha;
  return r;
}

inline double exponential_cdf(double x) { return x <= 0.0 ? 0.0 : -std::expm1(-x); }

/// (n+1) times one uniformly chosen gap per draw, pooled over draws, tested
/// against Exp(1).  Gaps within a draw are exchangeable but dependent, so
/// only one is kept.
inline KsReport gap_distribution_test(Design design, std::size_t n, std::size_t draws, Philox& rng,
                                      double alpha = 0.01) {
  if (n < 10) throw std::invalid_argument("gap_distribution_test: n must be >= 10");
  const auto zero = PiecewiseLinear::constant(0.0);
  const auto silent = NoiseModel::gaussian(0.0);
  std::vector<double> pooled;
  pooled.reserve(draws);
  for (std::size_t d = 0; d < draws; ++d) {
    const auto gaps = draw(design, n, zero, silent, rng).data.gaps();
    const auto pick = std::min<std::size_t>(gaps.size() - 1, static_cast<std::size_t>(rng.uniform() * gaps.size()));
    pooled.push_back(static_cast<double>(n + 1) * gaps[pick]);
  }
  return ks_test(std::move(pooled), exponential_cdf, alpha);
}

/// One six-point block: points start .. start+5 (local indices 1..6), local
/// gaps l2, l3, l4 between points 2-3, 3-4 and 4-5.
struct BlockEvent {
  std::size_t start = 0;
  bool noise_pattern = false;
  bool gap_pattern = false;
  bool fired = false;
  double left = 0.0;   // x of local point 3
  double right = 0.0;  // x of local point 4
  double lower_bound = 0.0;  // l3^{p+1} / (l2 + l4)^p, or l3^3 / (l2 + l4)^2 for p >= 2
};

struct EventReport {
  std::size_t blocks = 0;
  std::size_t events = 0;
  double c0_estimate = 0.0;
  std::vector<BlockEvent> block_events;
};

inline double block_lower_bound(double l2, double l3, double l4, double p) {
  if (p < 2.0) return std::pow(l3, p + 1.0) / std::pow(l2 + l4, p);
  return l3 * l3 * l3 / ((l2 + l4) * (l2 + l4));
}

/// Blocks of six consecutive points starting at 10 (i - 1), i = 1..floor(n/10).
/// Fewer than 60 points give an empty report.
inline EventReport detect_unfortunate_events(const Dataset& s, const std::vector<double>& noise, double p) {
  if (noise.size() != s.size()) throw std::invalid_argument("detect_unfortunate_events: noise size mismatch");
  EventReport rep;
  const std::size_t n = s.size();
  if (n < 60) return rep;
  for (std::size_t i = 1; i <= n / 10; ++i) {
    const std::size_t start = 10 * (i - 1);
    if (start + 6 > n) break;
    BlockEvent b;
    b.start = start;
    const double* e = noise.data() + start;
    auto in12 = [](double v) { return v >= 1.0 && v <= 2.0; };
    b.noise_pattern = e[1] <= -1.0 && e[4] <= -1.0 && in12(e[0]) && in12(e[2]) && in12(e[3]) && in12(e[5]);
    const auto& x = s.x();
    const double l2 = x[start + 2] - x[start + 1];
    const double l3 = x[start + 3] - x[start + 2];
    const double l4 = x[start + 4] - x[start + 3];
    b.gap_pattern = l3 >= l2 && l3 >= l4;
    b.fired = b.noise_pattern && b.gap_pattern;
    b.left = x[start + 2];
    b.right = x[start + 3];
    b.lower_bound = block_lower_bound(l2, l3, l4, p);
    rep.events += b.fired ? 1 : 0;
    rep.block_events.push_back(b);
  }
  rep.blocks = rep.block_events.size();
  rep.c0_estimate = rep.blocks ? static_cast<double>(rep.events) / static_cast<double>(rep.blocks) : 0.0;
  return rep;
}

/// P(eps <= -1)^2 P(1 <= eps <= 2)^4 for standard normal noise.
inline double gaussian_pattern_probability() {
  auto phi = [](double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); };
  const double low = phi(-1.0), band = phi(2.0) - phi(1.0);
  return low * low * band * band * band * band;
}

/// Probability that the middle of three i.i.d. exponentials is the largest.
inline constexpr double kGapPatternProbability = 1.0 / 3.0;

struct ProportionEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

/// Monte Carlo estimate of P(X3 >= X2, X3 >= X4) for i.i.d. Exp(1).
inline ProportionEstimate gap_pattern_monte_carlo(std::size_t samples, Philox& rng) {
  if (samples == 0) throw std::invalid_argument("gap_pattern_monte_carlo: need samples");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double x2 = -std::log(rng.uniform_open());
    const double x3 = -std::log(rng.uniform_open());
    const double x4 = -std::log(rng.uniform_open());
    hits += (x3 >= x2 && x3 >= x4) ? 1 : 0;
  }
  const double m = static_cast<double>(samples);
  const double q = static_cast<double>(hits) / m;
  return {q, std::sqrt(q * (1.0 - q) / m), samples};
}

}  // namespace overfit_lab
