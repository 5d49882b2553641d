#pragma once

// Reconstruction and population risk of piecewise-linear predictors on [0, 1].

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/hypergeometric_1F1.hpp>

#include "overfit_lab/pwl.hpp"
#include "overfit_lab/random.hpp"

namespace overfit_lab {

namespace detail {

/// C_p = E|Z|^p for standard normal Z.
inline double folded_normal_moment(double p) {
  return std::exp(0.5 * p * std::numbers::ln2 + std::lgamma(0.5 * (p + 1.0))) / std::sqrt(std::numbers::pi);
}

/// Asymptotic expansion of E[(w - Z)^q] for large positive w.
inline double shifted_power_series(double w, double q) {
  double sum = 0.0;
  double term_prev = std::numeric_limits<double>::infinity();
  double double_factorial = 1.0;  // (2k-1)!!
  for (int k = 0; k < 60; ++k) {
    if (k > 0) double_factorial *= 2.0 * k - 1.0;
    double binom = 1.0;
    for (int j = 0; j < 2 * k; ++j) binom *= (q - j) / (j + 1.0);
    const double term = binom * double_factorial * std::pow(w, q - 2.0 * k);
    if (std::abs(term) > std::abs(term_prev)) break;
    sum += term;
    if (std::abs(term) <= 1e-18 * std::abs(sum)) break;
    term_prev = term;
    if (binom == 0.0) break;
  }
  return sum;
}

inline constexpr double kAsymptoticThreshold = 12.0;

}  // namespace detail

/// h_p(w) = E|w - Z|^p for standard normal Z.
inline double gaussian_shifted_moment(double w, double p) {
  const double aw = std::abs(w);
  if (aw > detail::kAsymptoticThreshold) return detail::shifted_power_series(aw, p);
  return detail::folded_normal_moment(p) * boost::math::hypergeometric_1F1(-0.5 * p, 0.5, -0.5 * w * w);
}

/// H_p(w) = integral of h_p from 0 to w (odd in w).
inline double gaussian_shifted_moment_integral(double w, double p) {
  const double aw = std::abs(w);
  const double sgn = w < 0 ? -1.0 : 1.0;
  if (aw > detail::kAsymptoticThreshold) return sgn * detail::shifted_power_series(aw, p + 1.0) / (p + 1.0);
  return detail::folded_normal_moment(p) * w * boost::math::hypergeometric_1F1(-0.5 * p, 1.5, -0.5 * w * w);
}

/// Label-noise distribution.  Gaussian noise is handled in closed form; a
/// custom model supplies a sampler and m(mu, p) = E|mu - eps|^p.
class NoiseModel {
 public:
  using Sampler = std::function<double(Philox&)>;
  using ShiftedMoment = std::function<double(double mu, double p)>;

  static NoiseModel gaussian(double sigma) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("gaussian noise: sigma must be >= 0");
    NoiseModel m;
    m.sigma_ = sigma;
    m.symmetric_ = true;
    m.name_ = "gaussian";
    return m;
  }

  static NoiseModel custom(Sampler sampler, ShiftedMoment moment, bool symmetric, std::string name = "custom") {
    NoiseModel m;
    m.sampler_ = std::move(sampler);
    m.moment_ = std::move(moment);
    m.symmetric_ = symmetric;
    m.name_ = std::move(name);
    return m;
  }

  [[nodiscard]] bool is_gaussian() const { return sigma_.has_value(); }
  [[nodiscard]] std::optional<double> sigma() const { return sigma_; }
  [[nodiscard]] bool symmetric() const { return symmetric_; }
  [[nodiscard]] const std::string& name() const { return name_; }

  [[nodiscard]] std::string describe() const {
    if (sigma_) return "gaussian:" + std::to_string(*sigma_);
    return name_;
  }

  double sample(Philox& rng) const {
    if (sigma_) return *sigma_ * standard_normal(rng);
    return sampler_(rng);
  }

  /// E|mu - eps|^p.
  [[nodiscard]] double shifted_moment(double mu, double p) const {
    if (sigma_) {
      const double s = *sigma_;
      if (s == 0.0) return std::pow(std::abs(mu), p);
      return std::pow(s, p) * gaussian_shifted_moment(mu / s, p);
    }
    return moment_(mu, p);
  }

  /// E|eps|^p.
  [[nodiscard]] double moment(double p) const {
    if (sigma_) {
      if (p == 0.0) return 1.0;
      return std::pow(*sigma_, p) * detail::folded_normal_moment(p);
    }
    return moment_(0.0, p);
  }

  /// Polar Box-Muller; two uniforms in, one normal out, so every draw
  /// consumes the stream deterministically.
  static double standard_normal(Philox& rng) {
    for (;;) {
      const double u = 2.0 * rng.uniform() - 1.0;
      const double v = 2.0 * rng.uniform() - 1.0;
      const double r = u * u + v * v;
      if (r > 0.0 && r < 1.0) return u * std::sqrt(-2.0 * std::log(r) / r);
    }
  }

 private:
  NoiseModel() = default;
  std::optional<double> sigma_;
  Sampler sampler_;
  ShiftedMoment moment_;
  bool symmetric_ = false;
  std::string name_;
};

inline double noise_moment(const NoiseModel& noise, double p) {
  if (p < 0.0) throw std::invalid_argument("noise_moment: p must be >= 0");
  return noise.moment(p);
}

enum class RiskMethod { ClosedForm, Quadrature, MonteCarlo };

inline const char* to_string(RiskMethod m) {
  switch (m) {
    case RiskMethod::ClosedForm: return "closed_form";
    case RiskMethod::Quadrature: return "quadrature";
    case RiskMethod::MonteCarlo: return "monte_carlo";
  }
  return "unknown";
}

struct RiskReport {
  double p = 1.0;
  double reconstruction = 0.0;
  double population = 0.0;
  RiskMethod method = RiskMethod::ClosedForm;
  double abs_error_estimate = 0.0;
};

inline constexpr const char* kRiskCsvHeader = "p,R_p,L_p,method,abs_error_estimate";

inline void write_csv_row(std::ostream& os, const RiskReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%s,%.17g\n", r.p, r.reconstruction, r.population,
                to_string(r.method), r.abs_error_estimate);
  os << buf;
}

namespace detail {

inline void require_p(double p, const char* who) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw std::invalid_argument(std::string(who) + ": p must be >= 1");
}

/// Linear pieces of d on [a, b]: consecutive abscissae where d is affine between.
inline std::vector<double> segment_grid(const PiecewiseLinear& d, double a, double b) {
  std::vector<double> xs{a};
  for (double t : d.breakpoints()) {
    if (t > a && t < b) xs.push_back(t);
  }
  xs.push_back(b);
  return xs;
}

/// (b^q - a^q) / (b - a) for 0 <= a <= b, without cancellation.
inline double power_difference_quotient(double a, double b, double q) {
  if (a > b) std::swap(a, b);
  if (b == 0.0) return 0.0;
  if (a == 0.0) return std::pow(b, q - 1.0);
  const double r = (b - a) / a;
  if (r == 0.0) return q * std::pow(a, q - 1.0);
  return std::pow(a, q - 1.0) * std::expm1(q * std::log1p(r)) / r;
}

/// Integral over an interval of length len of |v|^p where v runs linearly
/// from va to vb, same sign (or zero) at both ends.
inline double same_sign_power_integral(double va, double vb, double len, double p) {
  return len * power_difference_quotient(std::abs(va), std::abs(vb), p + 1.0) / (p + 1.0);
}

/// Splits a linear piece at its zero crossing.
template <class F>
void for_each_signed_piece(double va, double vb, double len, F&& f) {
  if ((va < 0.0 && vb > 0.0) || (va > 0.0 && vb < 0.0)) {
    const double frac = va / (va - vb);
    f(va, 0.0, len * frac);
    f(0.0, vb, len * (1.0 - frac));
  } else {
    f(va, vb, len);
  }
}

/// Integral of |v|^p along a same-sign linear piece, in the variable v, on
/// pieces graded geometrically toward a zero endpoint.  Each graded piece is
/// analytic, so a fixed 61-point Kronrod rule suffices; the 31-point rule on
/// the same piece gives the error estimate.
inline double graded_power_integral(double va, double vb, double len, double p, double& err) {
  double a = std::abs(va), b = std::abs(vb);
  if (a > b) std::swap(a, b);
  if (len <= 0.0 || b == 0.0) return 0.0;
  if (b == a) return len * std::pow(a, p);
  auto f = [p](double v) { return std::pow(v, p); };
  using K61 = boost::math::quadrature::gauss_kronrod<double, 61>;
  using K31 = boost::math::quadrature::gauss_kronrod<double, 31>;
  double total = 0.0, e = 0.0;
  double hi = b;
  while (hi > a) {
    const double lo = (a > 0.1 * hi || 0.1 * hi < 1e-17 * b) ? a : 0.1 * hi;
    const double fine = K61::integrate(f, lo, hi, 0, 0.0);
    const double coarse = K31::integrate(f, lo, hi, 0, 0.0);
    total += fine;
    e += std::abs(fine - coarse) + 4.0 * std::numeric_limits<double>::epsilon() * std::abs(fine);
    hi = lo;
  }
  err += e * len / (b - a);
  return total * len / (b - a);
}

}  // namespace detail

/// Integral of |f - target|^p over [a, b], p >= 1.  Integer p uses the exact
/// antiderivative of |linear|^p per piece; fractional p uses
/// Gauss-Kronrod quadrature graded toward zero crossings.
inline double reconstruction_risk(const PiecewiseLinear& f, const PiecewiseLinear& target, double p, double a,
                                  double b, RiskMethod method, double* abs_error = nullptr) {
  detail::require_p(p, "reconstruction_risk");
  if (!(b >= a)) throw std::invalid_argument("reconstruction_risk: empty interval");
  const PiecewiseLinear d = difference(f, target);
  const auto xs = detail::segment_grid(d, a, b);
  double total = 0.0, err = 0.0;
  for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
    const double len = xs[k + 1] - xs[k];
    if (len <= 0.0) continue;
    const double va = d(xs[k]);
    const double vb = d(xs[k + 1]);
    detail::for_each_signed_piece(va, vb, len, [&](double u, double v, double l) {
      if (method == RiskMethod::Quadrature) {
        total += detail::graded_power_integral(u, v, l, p, err);
      } else {
        total += detail::same_sign_power_integral(u, v, l, p);
      }
    });
  }
  if (abs_error) *abs_error = method == RiskMethod::Quadrature ? err : 1e-15 * total;
  return total;
}

/// R_p(f) = integral over [0, 1] of |f - target|^p.
inline double reconstruction_risk(const PiecewiseLinear& f, const PiecewiseLinear& target, double p) {
  const bool integer = std::floor(p) == p;
  return reconstruction_risk(f, target, p, 0.0, 1.0, integer ? RiskMethod::ClosedForm : RiskMethod::Quadrature);
}

namespace detail {

/// Average of h_p over w in [wa, wb].
inline double gaussian_segment_average(double wa, double wb, double p) {
  const double width = std::abs(wb - wa);
  const double scale = std::max(std::abs(wa), std::abs(wb));
  if (width >= 0.5 && width >= 1e-2 * scale) {
    return (gaussian_shifted_moment_integral(wb, p) - gaussian_shifted_moment_integral(wa, p)) / (wb - wa);
  }
  // Narrow piece: h_p is smooth on the scale of the piece.
  auto h = [&](double t) { return gaussian_shifted_moment(wa + (wb - wa) * t, p); };
  return boost::math::quadrature::gauss<double, 10>::integrate(h, 0.0, 1.0);
}

}  // namespace detail

/// L_p(f) = E |f(x) - target(x) - eps|^p with x uniform on [0, 1].
inline double population_risk(const PiecewiseLinear& f, const PiecewiseLinear& target, const NoiseModel& noise,
                              double p, double* abs_error = nullptr) {
  detail::require_p(p, "population_risk");
  if (!std::isfinite(noise.moment(p))) throw std::invalid_argument("population_risk: infinite noise moment");
  const PiecewiseLinear d = difference(f, target);
  const auto xs = detail::segment_grid(d, 0.0, 1.0);
  double total = 0.0, err = 0.0;
  const auto sigma = noise.sigma();
  for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
    const double len = xs[k + 1] - xs[k];
    if (len <= 0.0) continue;
    const double va = d(xs[k]);
    const double vb = d(xs[k + 1]);
    if (sigma && *sigma == 0.0) {
      detail::for_each_signed_piece(va, vb, len, [&](double u, double v, double l) {
        total += detail::same_sign_power_integral(u, v, l, p);
      });
    } else if (sigma) {
      const double s = *sigma;
      total += len * std::pow(s, p) * detail::gaussian_segment_average(va / s, vb / s, p);
    } else {
      auto g = [&](double t) { return noise.shifted_moment(va + (vb - va) * t, p); };
      double e = 0.0;
      total += len * boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, 0.0, 1.0, 10, 1e-12, &e);
      err += len * std::abs(e);
    }
  }
  if (abs_error) *abs_error = sigma ? 1e-13 * std::max(total, 1.0) : err;
  return total;
}

/// Both risks of one predictor.
inline RiskReport evaluate_risk(const PiecewiseLinear& f, const PiecewiseLinear& target, const NoiseModel& noise,
                                double p) {
  RiskReport r;
  r.p = p;
  const bool integer = std::floor(p) == p;
  r.method = integer ? RiskMethod::ClosedForm : RiskMethod::Quadrature;
  double e1 = 0.0, e2 = 0.0;
  r.reconstruction = reconstruction_risk(f, target, p, 0.0, 1.0, r.method, &e1);
  r.population = population_risk(f, target, noise, p, &e2);
  r.abs_error_estimate = std::max(e1, e2);
  return r;
}

/// (1/(2z), Gamma(z), 1/z) for z in (0, 1].
inline std::tuple<double, double, double> gamma_bounds_check(double z) {
  if (!(z > 0.0 && z <= 1.0)) throw std::invalid_argument("gamma_bounds_check: z must lie in (0, 1]");
  return {0.5 / z, boost::math::tgamma(z), 1.0 / z};
}

struct InverseMaxMoment {
  double exact = 0.0;  // 2^p Gamma(2 - p), the bound on E[1/(A/2 + B/2)^p]
  double bound = 0.0;  // 2^p / (2 - p)
};

/// For A, B i.i.d. Exp(1), bounds on E[1/max(A, B)^p], 1 <= p < 2.
inline InverseMaxMoment max_exp_inverse_moment(double p) {
  if (!(p >= 1.0 && p < 2.0)) throw std::invalid_argument("max_exp_inverse_moment: p must lie in [1, 2)");
  return {std::pow(2.0, p) * boost::math::tgamma(2.0 - p), std::pow(2.0, p) / (2.0 - p)};
}

/// E[1/max(A, B)^p] for A, B i.i.d. Exp(1), 0 < p < 2.
inline double max_exp_inverse_moment_true(double p) {
  if (!(p > 0.0 && p < 2.0)) throw std::invalid_argument("max_exp_inverse_moment_true: p must lie in (0, 2)");
  if (p == 1.0) return 2.0 * std::numbers::ln2;
  return 2.0 * boost::math::tgamma(1.0 - p) * (1.0 - std::pow(2.0, p - 1.0));
}

/// E[1/Z^q] for Z ~ Gamma(shape, 1), q < shape.
inline double inverse_gamma_moment(double shape, double q) {
  if (!(q < shape)) throw std::invalid_argument("inverse_gamma_moment: need q < shape");
  return std::exp(std::lgamma(shape - q) - std::lgamma(shape));
}

/// (|mu + delta|^p + |mu - delta|^p) / 2 >= |mu|^p.
inline bool symmetric_noise_inequality_check(double mu, double delta, double p) {
  const double lhs = 0.5 * (std::pow(std::abs(mu + delta), p) + std::pow(std::abs(mu - delta), p));
  const double rhs = std::pow(std::abs(mu), p);
  return lhs >= rhs * (1.0 - 8.0 * std::numeric_limits<double>::epsilon());
}

}  // namespace overfit_lab
