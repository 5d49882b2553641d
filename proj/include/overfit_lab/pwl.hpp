#pragma once

// Continuous piecewise-linear functions on the real line.
//
// A function is stored as an ordered list of breakpoints together with one
// line per piece.  Every line carries its own reference point, so evaluating
// a piece never goes through a global intercept; this keeps values accurate
// when slopes are huge and breakpoints sit far from the origin.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <json.hpp>

namespace overfit_lab {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Kink {
  double position = 0.0;
  double slope_change = 0.0;
};

/// A line through `(x0, y0)` with the given slope.
struct Line {
  double slope = 0.0;
  double x0 = 0.0;
  double y0 = 0.0;

  [[nodiscard]] double operator()(double x) const { return y0 + slope * (x - x0); }
};

/// Line through two points with distinct abscissae.
inline Line line_through(Point a, Point b) {
  return Line{(b.y - a.y) / (b.x - a.x), a.x, a.y};
}

/// Abscissa where two non-parallel lines meet.
inline double intersection(const Line& a, const Line& b) {
  // a(x) = b(x)  <=>  (a.slope - b.slope) x = b(0) - a(0), written around a.x0.
  const double gap = b(a.x0) - a.y0;
  return a.x0 + gap / (a.slope - b.slope);
}

inline constexpr double kMergeTolerance = 1e-12;

class PiecewiseLinear {
 public:
  /// The zero function.
  PiecewiseLinear() : pieces_{Line{}} {}

  /// Builds from an anchor value, the slope left of every kink, and the slope
  /// changes.  Kinks are sorted; kinks closer than 1e-12 are merged by summing
  /// their changes and changes below 1e-12 in magnitude are dropped.
  PiecewiseLinear(Point anchor, double initial_slope, std::vector<Kink> kinks) {
    if (!std::isfinite(anchor.x) || !std::isfinite(anchor.y) || !std::isfinite(initial_slope)) {
      throw std::invalid_argument("PiecewiseLinear: non-finite anchor or slope");
    }
    for (const auto& k : kinks) {
      if (!std::isfinite(k.position) || !std::isfinite(k.slope_change)) {
        throw std::invalid_argument("PiecewiseLinear: non-finite kink");
      }
    }
    std::sort(kinks.begin(), kinks.end(),
              [](const Kink& a, const Kink& b) { return a.position < b.position; });
    std::vector<Kink> merged;
    for (const auto& k : kinks) {
      if (!merged.empty() && k.position - merged.back().position < kMergeTolerance) {
        merged.back().slope_change += k.slope_change;
      } else {
        merged.push_back(k);
      }
    }
    std::erase_if(merged, [](const Kink& k) { return std::abs(k.slope_change) < kMergeTolerance; });

    breaks_.reserve(merged.size());
    std::vector<double> slopes{initial_slope};
    for (const auto& k : merged) {
      breaks_.push_back(k.position);
      slopes.push_back(slopes.back() + k.slope_change);
    }
    pieces_.resize(slopes.size());
    const std::size_t home = piece_index(anchor.x);
    pieces_[home] = Line{slopes[home], anchor.x, anchor.y};
    for (std::size_t k = home + 1; k < pieces_.size(); ++k) {
      const double t = breaks_[k - 1];
      pieces_[k] = Line{slopes[k], t, pieces_[k - 1](t)};
    }
    for (std::size_t k = home; k-- > 0;) {
      const double t = breaks_[k];
      pieces_[k] = Line{slopes[k], t, pieces_[k + 1](t)};
    }
  }

  /// Builds from explicit pieces: `lines[k]` is used on [breaks[k-1], breaks[k]).
  /// The caller guarantees adjacent lines meet at their breakpoint.  Breakpoints
  /// closer than 1e-12 collapse (the zero-length piece between them is dropped)
  /// and breakpoints whose slope change is below 1e-12 are removed.
  static PiecewiseLinear from_pieces(std::vector<double> breaks, std::vector<Line> lines) {
    if (lines.size() != breaks.size() + 1) {
      throw std::invalid_argument("from_pieces: need exactly one more line than breakpoints");
    }
    for (std::size_t k = 0; k < breaks.size(); ++k) {
      if (!std::isfinite(breaks[k]) || (k > 0 && breaks[k] < breaks[k - 1])) {
        throw std::invalid_argument("from_pieces: breakpoints must be finite and sorted");
      }
    }
    PiecewiseLinear f;
    f.pieces_.clear();
    f.pieces_.push_back(lines.front());
    for (std::size_t k = 0; k < breaks.size(); ++k) {
      if (!f.breaks_.empty() && breaks[k] - f.breaks_.back() < kMergeTolerance) {
        f.pieces_.back() = lines[k + 1];
        continue;
      }
      f.breaks_.push_back(breaks[k]);
      f.pieces_.push_back(lines[k + 1]);
    }
    f.drop_flat_breaks();
    return f;
  }

  static PiecewiseLinear affine(double slope, Point through) {
    PiecewiseLinear f;
    f.pieces_.front() = Line{slope, through.x, through.y};
    return f;
  }

  static PiecewiseLinear constant(double value) { return affine(0.0, Point{0.0, value}); }

  [[nodiscard]] double operator()(double x) const {
    if (!std::isfinite(x)) throw std::invalid_argument("PiecewiseLinear: non-finite argument");
    return pieces_[piece_index(x)](x);
  }

  /// Slope of the piece containing x (right derivative).
  [[nodiscard]] double slope_at(double x) const { return pieces_[piece_index(x)].slope; }

  [[nodiscard]] std::span<const double> breakpoints() const { return breaks_; }
  [[nodiscard]] std::span<const Line> pieces() const { return pieces_; }
  [[nodiscard]] std::size_t kink_count() const { return breaks_.size(); }
  [[nodiscard]] bool is_affine() const { return breaks_.empty(); }

  /// Value at the first kink (or at the reference point of an affine function).
  [[nodiscard]] Point anchor() const {
    if (breaks_.empty()) return Point{pieces_[0].x0, pieces_[0].y0};
    return Point{breaks_[0], pieces_[1](breaks_[0])};
  }
  [[nodiscard]] double initial_slope() const { return pieces_.front().slope; }
  [[nodiscard]] double final_slope() const { return pieces_.back().slope; }

  [[nodiscard]] std::vector<Kink> kinks() const {
    std::vector<Kink> out;
    out.reserve(breaks_.size());
    for (std::size_t k = 0; k < breaks_.size(); ++k) {
      out.push_back(Kink{breaks_[k], pieces_[k + 1].slope - pieces_[k].slope});
    }
    return out;
  }

  /// Index of the piece whose half-open domain contains x.
  [[nodiscard]] std::size_t piece_index(double x) const {
    return static_cast<std::size_t>(std::upper_bound(breaks_.begin(), breaks_.end(), x) -
                                    breaks_.begin());
  }

 private:
  void drop_flat_breaks() {
    std::vector<double> breaks;
    std::vector<Line> pieces{pieces_.front()};
    for (std::size_t k = 0; k < breaks_.size(); ++k) {
      if (std::abs(pieces_[k + 1].slope - pieces.back().slope) < kMergeTolerance) continue;
      breaks.push_back(breaks_[k]);
      pieces.push_back(pieces_[k + 1]);
    }
    breaks_ = std::move(breaks);
    pieces_ = std::move(pieces);
  }

  std::vector<double> breaks_;
  std::vector<Line> pieces_;
};

inline double eval(const PiecewiseLinear& f, double x) { return f(x); }

/// Weighted total variation of f': sum over kinks of sqrt(1 + t^2) |c|.
inline double representation_cost(const PiecewiseLinear& f) {
  double cost = 0.0;
  for (const auto& k : f.kinks()) cost += std::hypot(1.0, k.position) * std::abs(k.slope_change);
  return cost;
}

/// Pointwise f - g.  Breakpoints are the merged union of both inputs.
inline PiecewiseLinear difference(const PiecewiseLinear& f, const PiecewiseLinear& g) {
  std::vector<double> breaks;
  breaks.reserve(f.kink_count() + g.kink_count());
  std::ranges::merge(f.breakpoints(), g.breakpoints(), std::back_inserter(breaks));
  std::vector<double> unique;
  for (double t : breaks) {
    if (unique.empty() || t - unique.back() >= kMergeTolerance) unique.push_back(t);
  }
  std::vector<Line> lines;
  lines.reserve(unique.size() + 1);
  for (std::size_t k = 0; k <= unique.size(); ++k) {
    double ref;
    if (unique.empty()) {
      ref = 0.0;
    } else if (k == 0) {
      ref = unique.front();
    } else if (k == unique.size()) {
      ref = unique.back();
    } else {
      ref = 0.5 * (unique[k - 1] + unique[k]);
    }
    // Piece k lives on [unique[k-1], unique[k]); sample each input there.
    const Line& lf = f.pieces()[f.piece_index(k == 0 && !unique.empty() ? std::nextafter(ref, -INFINITY) : ref)];
    const Line& lg = g.pieces()[g.piece_index(k == 0 && !unique.empty() ? std::nextafter(ref, -INFINITY) : ref)];
    lines.push_back(Line{lf.slope - lg.slope, ref, lf(ref) - lg(ref)});
  }
  return PiecewiseLinear::from_pieces(std::move(unique), std::move(lines));
}

/// Pointwise maximum of two lines (convex, one kink where they cross).
inline PiecewiseLinear max_of_lines(const Line& a, const Line& b) {
  if (a.slope == b.slope) {
    return PiecewiseLinear::affine(a.slope, a(0.0) >= b(0.0) ? Point{a.x0, a.y0} : Point{b.x0, b.y0});
  }
  const double t = intersection(a, b);
  const Line& left = a.slope < b.slope ? a : b;
  const Line& right = a.slope < b.slope ? b : a;
  return PiecewiseLinear::from_pieces({t}, {left, right});
}

/// Pointwise minimum of two lines (concave, one kink where they cross).
inline PiecewiseLinear min_of_lines(const Line& a, const Line& b) {
  if (a.slope == b.slope) {
    return PiecewiseLinear::affine(a.slope, a(0.0) <= b(0.0) ? Point{a.x0, a.y0} : Point{b.x0, b.y0});
  }
  const double t = intersection(a, b);
  const Line& left = a.slope > b.slope ? a : b;
  const Line& right = a.slope > b.slope ? b : a;
  return PiecewiseLinear::from_pieces({t}, {left, right});
}

// ---------------------------------------------------------------------------
// Two-layer ReLU network with a skip connection.

struct ReluUnit {
  double a = 0.0;  // output weight
  double w = 0.0;  // input weight
  double b = 0.0;  // bias
};

struct ReluNetwork {
  std::vector<ReluUnit> units;
  double skip_slope = 0.0;      // a_0
  double skip_intercept = 0.0;  // b_0

  [[nodiscard]] double operator()(double x) const {
    double y = skip_slope * x + skip_intercept;
    for (const auto& u : units) y += u.a * std::max(0.0, u.w * x + u.b);
    return y;
  }

  /// Squared norm of the regularized parameters (skip connection excluded).
  [[nodiscard]] double squared_norm() const {
    double s = 0.0;
    for (const auto& u : units) s += u.a * u.a + u.w * u.w + u.b * u.b;
    return s;
  }
};

/// One unit per kink with the norm-minimal scaling a^2 = w^2 + b^2, w > 0.
/// The skip connection carries the leftmost affine piece.
inline ReluNetwork to_network(const PiecewiseLinear& f) {
  ReluNetwork net;
  const Line& left = f.pieces().front();
  net.skip_slope = left.slope;
  net.skip_intercept = left(0.0);
  for (const auto& k : f.kinks()) {
    const double weight = std::hypot(1.0, k.position);
    const double mag = std::abs(k.slope_change);
    const double w = std::sqrt(mag / weight);
    const double a = std::copysign(std::sqrt(mag * weight), k.slope_change);
    net.units.push_back(ReluUnit{a, w, -w * k.position});
  }
  return net;
}

// ---------------------------------------------------------------------------
// JSON: {"anchor":[x,y], "initial_slope": s, "kinks":[[t,c],...]}

inline nlohmann::json to_json(const PiecewiseLinear& f) {
  const Point a = f.anchor();
  nlohmann::json kinks = nlohmann::json::array();
  for (const auto& k : f.kinks()) kinks.push_back({k.position, k.slope_change});
  return nlohmann::json{{"anchor", {a.x, a.y}}, {"initial_slope", f.initial_slope()}, {"kinks", kinks}};
}

inline PiecewiseLinear pwl_from_json(const nlohmann::json& j) {
  try {
    const auto& anchor = j.at("anchor");
    if (!anchor.is_array() || anchor.size() != 2) throw std::invalid_argument("anchor must be [x, y]");
    std::vector<Kink> kinks;
    for (const auto& k : j.at("kinks")) {
      if (!k.is_array() || k.size() != 2) throw std::invalid_argument("kink must be [t, c]");
      kinks.push_back(Kink{k[0].get<double>(), k[1].get<double>()});
    }
    return PiecewiseLinear(Point{anchor[0].get<double>(), anchor[1].get<double>()},
                           j.at("initial_slope").get<double>(), std::move(kinks));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed piecewise-linear JSON: ") + e.what());
  }
}

}  // namespace overfit_lab
