#pragma once

// Standalone SVG plots of a dataset and a fitted piecewise-linear function.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "overfit_lab/dataset.hpp"
#include "overfit_lab/interpolators.hpp"
#include "overfit_lab/pwl.hpp"

namespace overfit_lab {

struct SvgOptions {
  double width = 800.0;
  double height = 500.0;
  double margin = 40.0;
  std::string title;
  bool shade_envelope = false;
};

/// Intervals [x[i], x[i+1]] on which |f| exceeds max(|y_i|, |y_{i+1}|).
inline std::vector<std::size_t> overshoot_intervals(const Dataset& s, const PiecewiseLinear& f, double tol = 1e-9) {
  std::vector<std::size_t> out;
  const auto& x = s.x();
  const auto& y = s.y();
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    double peak = std::max(std::abs(f(x[i])), std::abs(f(x[i + 1])));
    for (double t : f.breakpoints()) {
      if (t > x[i] && t < x[i + 1]) peak = std::max(peak, std::abs(f(t)));
    }
    if (peak > std::max(std::abs(y[i]), std::abs(y[i + 1])) + tol) out.push_back(i);
  }
  return out;
}

namespace detail {

inline std::string svg_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Abscissae where a piecewise-linear function on [a, b] needs a vertex.
inline std::vector<double> vertices(const PiecewiseLinear& f, double a, double b) {
  std::vector<double> v{a};
  for (double t : f.breakpoints()) {
    if (t > a && t < b) v.push_back(t);
  }
  v.push_back(b);
  return v;
}

}  // namespace detail

/// Plots the data points and f over [0, 1] (widened to cover the data).
/// With shade_envelope set, the envelope region of every free interval is
/// filled.
inline void write_svg(std::ostream& os, const Dataset& s, const PiecewiseLinear& f, const SvgOptions& opts = {}) {
  const double x0 = std::min(0.0, s.x().front());
  const double x1 = std::max(1.0, s.x().back());
  std::vector<Envelope> env;
  if (opts.shade_envelope) {
    for (auto& e : envelope(s)) {
      if (!e.pinned) env.push_back(std::move(e));
    }
  }

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  auto cover = [&](double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  };
  for (double v : s.y()) cover(v);
  for (double t : detail::vertices(f, x0, x1)) cover(f(t));
  for (const auto& e : env) {
    for (double t : detail::vertices(e.upper, e.left, e.right)) cover(e.upper(t));
    for (double t : detail::vertices(e.lower, e.left, e.right)) cover(e.lower(t));
  }
  if (hi - lo < 1e-12) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  const double w = opts.width, h = opts.height, m = opts.margin;
  auto px = [&](double x) { return detail::svg_number(m + (x - x0) / (x1 - x0) * (w - 2.0 * m)); };
  auto py = [&](double y) { return detail::svg_number(h - m - (y - lo) / (hi - lo) * (h - 2.0 * m)); };

  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
     << ' ' << h << "\">\n";
  if (!opts.title.empty()) os << "  <title>" << detail::xml_escape(opts.title) << "</title>\n";
  os << "  <rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  os << "  <rect x=\"" << m << "\" y=\"" << m << "\" width=\"" << w - 2 * m << "\" height=\"" << h - 2 * m
     << "\" fill=\"none\" stroke=\"#999\" stroke-width=\"1\"/>\n";
  if (lo < 0.0 && hi > 0.0) {
    os << "  <line x1=\"" << px(x0) << "\" y1=\"" << py(0.0) << "\" x2=\"" << px(x1) << "\" y2=\"" << py(0.0)
       << "\" stroke=\"#ccc\" stroke-dasharray=\"4 3\"/>\n";
  }

  if (!env.empty()) {
    os << "  <g fill=\"#f4a261\" fill-opacity=\"0.35\" stroke=\"none\">\n";
    for (const auto& e : env) {
      os << "    <polygon points=\"";
      for (double t : detail::vertices(e.upper, e.left, e.right)) os << px(t) << ',' << py(e.upper(t)) << ' ';
      auto lower = detail::vertices(e.lower, e.left, e.right);
      std::reverse(lower.begin(), lower.end());
      for (double t : lower) os << px(t) << ',' << py(e.lower(t)) << ' ';
      os << "\"/>\n";
    }
    os << "  </g>\n";
  }

  os << "  <polyline fill=\"none\" stroke=\"#1d3557\" stroke-width=\"1.5\" points=\"";
  for (double t : detail::vertices(f, x0, x1)) os << px(t) << ',' << py(f(t)) << ' ';
  os << "\"/>\n";

  os << "  <g fill=\"#e63946\">\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    os << "    <circle cx=\"" << px(s.x()[i]) << "\" cy=\"" << py(s.y()[i]) << "\" r=\"3\"/>\n";
  }
  os << "  </g>\n</svg>\n";
}

}  // namespace overfit_lab
