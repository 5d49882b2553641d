#pragma once

// Spline interpolators and the combinatorial description of the min-norm
// interpolator: discrete curvature, special points, per-interval envelopes
// and the exact spike shape.

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "overfit_lab/dataset.hpp"
#include "overfit_lab/pwl.hpp"

namespace overfit_lab {

namespace detail {
inline void require_two_points(const Dataset& s, const char* who) {
  if (s.size() < 2) throw std::invalid_argument(std::string(who) + ": need at least two points");
}
}  // namespace detail

/// Connect-the-dots interpolator, constant y[0] left of x[0] and y[n-1] right of x[n-1].
inline PiecewiseLinear linear_spline(const Dataset& s) {
  detail::require_two_points(s, "linear_spline");
  const std::size_t n = s.size();
  std::vector<double> breaks(s.x().begin(), s.x().end());
  std::vector<Line> lines;
  lines.reserve(n + 1);
  lines.push_back(Line{0.0, s.x()[0], s.y()[0]});
  for (std::size_t i = 0; i + 1 < n; ++i) lines.push_back(s.secant(i));
  lines.push_back(Line{0.0, s.x()[n - 1], s.y()[n - 1]});
  return PiecewiseLinear::from_pieces(std::move(breaks), std::move(lines));
}

/// Same as the linear spline on [x[0], x[n-1]], with the first and last
/// secants extended outward.
inline PiecewiseLinear extended_spline(const Dataset& s) {
  detail::require_two_points(s, "extended_spline");
  const std::size_t n = s.size();
  std::vector<double> breaks(s.x().begin() + 1, s.x().end() - 1);
  std::vector<Line> lines;
  lines.reserve(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) lines.push_back(s.secant(i));
  return PiecewiseLinear::from_pieces(std::move(breaks), std::move(lines));
}

enum class CurvatureLabel : int { Concave = -1, Flat = 0, Convex = 1 };

inline int sign(CurvatureLabel c) { return static_cast<int>(c); }

/// Two slopes count as equal when they differ by at most this much relative
/// to max(1, |left|, |right|).
inline constexpr double kCollinearityTolerance = 1e-10;

inline CurvatureLabel curvature_between(double left, double right) {
  const double scale = std::max({1.0, std::abs(left), std::abs(right)});
  if (std::abs(right - left) <= kCollinearityTolerance * scale) return CurvatureLabel::Flat;
  return right > left ? CurvatureLabel::Convex : CurvatureLabel::Concave;
}

/// Sign of the change in secant slope at each data point.  The first and last
/// points are always Flat since the boundary secants are repeated.
inline std::vector<CurvatureLabel> curvature(const Dataset& s) {
  detail::require_two_points(s, "curvature");
  std::vector<CurvatureLabel> labels(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto [left, right] = s.slopes_around(i);
    labels[i] = curvature_between(left, right);
  }
  return labels;
}

/// Zero-based indices where the curvature label changes, scanning left to
/// right.  The first point is always special.
struct SpecialPoints {
  std::vector<std::size_t> indices;
};

inline SpecialPoints special_points(const std::vector<CurvatureLabel>& labels) {
  SpecialPoints sp;
  if (labels.empty()) return sp;
  sp.indices.push_back(0);
  for (std::size_t j = 1; j < labels.size(); ++j) {
    if (labels[j] != labels[sp.indices.back()]) sp.indices.push_back(j);
  }
  return sp;
}

inline SpecialPoints special_points(const Dataset& s) { return special_points(curvature(s)); }

/// Bounds on the min-norm interpolator over [left, right) = [x[i], x[i+1]).
struct Envelope {
  std::size_t interval = 0;
  double left = 0.0;
  double right = 0.0;
  PiecewiseLinear lower;
  PiecewiseLinear upper;
  bool pinned = false;  // lower and upper coincide with a single secant
};

inline std::vector<Envelope> envelope(const Dataset& s) {
  detail::require_two_points(s, "envelope");
  const std::size_t n = s.size();
  const auto labels = curvature(s);
  std::vector<Envelope> out;
  out.reserve(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    Envelope e;
    e.interval = i;
    e.left = s.x()[i];
    e.right = s.x()[i + 1];
    const Line g = s.secant(i);
    const auto secant_fn = PiecewiseLinear::affine(g.slope, Point{g.x0, g.y0});
    const bool interior = i >= 1 && i + 2 < n;
    const CurvatureLabel a = labels[i];
    const CurvatureLabel b = labels[i + 1];
    if (interior && a == b && a != CurvatureLabel::Flat) {
      const Line prev = s.secant(i - 1);
      const Line next = s.secant(i + 1);
      if (a == CurvatureLabel::Convex) {
        e.lower = max_of_lines(prev, next);
        e.upper = secant_fn;
      } else {
        e.lower = secant_fn;
        e.upper = min_of_lines(prev, next);
      }
    } else {
      e.lower = secant_fn;
      e.upper = secant_fn;
      e.pinned = true;
    }
    out.push_back(std::move(e));
  }
  return out;
}

/// Forced spike between two special points that are two samples apart.
struct SpikeSegment {
  std::size_t interval = 0;  // zero-based: covers [x[interval], x[interval+1])
  double left = 0.0;
  double right = 0.0;
  double kink = 0.0;  // where the two extended secants cross
  PiecewiseLinear shape;
};

/// `k` indexes `special_points(s).indices`.  When special point k is followed
/// by special point k+1 exactly two samples later and the slope actually bends
/// at special point k, the min-norm interpolator on [x[m], x[m+1]) (m the
/// index of special point k) is the min (concave) or max (convex) of the
/// secants just left and just right of that interval.
inline std::optional<SpikeSegment> exact_spike(const Dataset& s, std::size_t k) {
  detail::require_two_points(s, "exact_spike");
  const auto labels = curvature(s);
  const auto sp = special_points(labels);
  if (k + 1 >= sp.indices.size()) return std::nullopt;
  const std::size_t m = sp.indices[k];
  if (sp.indices[k + 1] != m + 2) return std::nullopt;
  if (m == 0 || labels[m] == CurvatureLabel::Flat) return std::nullopt;
  const Line prev = s.secant(m - 1);
  const Line next = s.secant(m + 1);
  SpikeSegment seg;
  seg.interval = m;
  seg.left = s.x()[m];
  seg.right = s.x()[m + 1];
  seg.kink = intersection(prev, next);
  seg.shape = labels[m] == CurvatureLabel::Concave ? min_of_lines(prev, next) : max_of_lines(prev, next);
  return seg;
}

}  // namespace overfit_lab
