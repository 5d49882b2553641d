#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "overfit_lab/pwl.hpp"

namespace overfit_lab {

/// Sorted training sample on [0, 1].
///
/// Indices are zero-based: point i is (x[i], y[i]) for i = 0..n-1, secant i
/// joins points i and i+1.  Gaps follow the convention gap(0) = x[0],
/// gap(i) = x[i] - x[i-1], gap(n) = 1 - x[n-1], so there are n+1 of them and
/// they sum to one.
class Dataset {
 public:
  Dataset(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    if (x_.size() != y_.size()) throw std::invalid_argument("Dataset: x and y differ in length");
    for (std::size_t i = 0; i < x_.size(); ++i) {
      if (!std::isfinite(x_[i]) || !std::isfinite(y_[i])) {
        throw std::invalid_argument("Dataset: non-finite coordinate");
      }
      if (x_[i] < 0.0 || x_[i] > 1.0) throw std::invalid_argument("Dataset: x outside [0, 1]");
      if (i > 0 && !(x_[i] > x_[i - 1])) {
        throw std::invalid_argument("Dataset: x must be strictly increasing (duplicate or unsorted x)");
      }
    }
  }

  /// Sorts the pairs jointly by x before validating.
  static Dataset from_unsorted(std::vector<double> x, std::vector<double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("Dataset: x and y differ in length");
    std::vector<std::size_t> order(x.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::ranges::sort(order, [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> xs, ys;
    xs.reserve(x.size());
    ys.reserve(y.size());
    for (auto i : order) {
      xs.push_back(x[i]);
      ys.push_back(y[i]);
    }
    return Dataset(std::move(xs), std::move(ys));
  }

  [[nodiscard]] std::size_t size() const { return x_.size(); }
  [[nodiscard]] const std::vector<double>& x() const { return x_; }
  [[nodiscard]] const std::vector<double>& y() const { return y_; }
  [[nodiscard]] Point point(std::size_t i) const { return Point{x_[i], y_[i]}; }

  [[nodiscard]] double gap(std::size_t i) const {
    if (i == 0) return x_.front();
    if (i == x_.size()) return 1.0 - x_.back();
    return x_[i] - x_[i - 1];
  }

  [[nodiscard]] std::vector<double> gaps() const {
    std::vector<double> g(x_.size() + 1);
    for (std::size_t i = 0; i <= x_.size(); ++i) g[i] = gap(i);
    return g;
  }

  /// Slope of the secant through points i and i+1, for i = 0..n-2.
  [[nodiscard]] double secant_slope(std::size_t i) const {
    return (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
  }

  /// Secant line through points i and i+1.
  [[nodiscard]] Line secant(std::size_t i) const { return Line{secant_slope(i), x_[i], y_[i]}; }

  /// Incoming/outgoing slope pair around point i with the boundary convention
  /// that the first and last secants are repeated: returns (left, right).
  [[nodiscard]] std::pair<double, double> slopes_around(std::size_t i) const {
    const std::size_t n = x_.size();
    const double right = secant_slope(std::min(i, n - 2));
    const double left = secant_slope(i == 0 ? 0 : i - 1);
    return {left, right};
  }

 private:
  std::vector<double> x_;
  std::vector<double> y_;
};

namespace detail {

inline bool parse_double(const std::string& field, double& out) {
  std::size_t pos = 0;
  try {
    out = std::stod(field, &pos);
  } catch (const std::exception&) {
    return false;
  }
  while (pos < field.size() && std::isspace(static_cast<unsigned char>(field[pos]))) ++pos;
  return pos == field.size();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

/// Parses two-column `x,y` CSV text.  A first row that does not parse as two
/// numbers is treated as a header.  Rows need not be sorted.
inline Dataset parse_dataset_csv(std::istream& in) {
  std::vector<double> xs, ys;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++row;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto cells = detail::split_csv_line(line);
    double x = 0, y = 0;
    const bool numeric =
        cells.size() == 2 && detail::parse_double(cells[0], x) && detail::parse_double(cells[1], y);
    if (!numeric) {
      if (xs.empty() && row == 1) continue;
      throw std::invalid_argument("dataset CSV: row " + std::to_string(row) + " is not two numbers");
    }
    xs.push_back(x);
    ys.push_back(y);
  }
  return Dataset::from_unsorted(std::move(xs), std::move(ys));
}

inline Dataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  return parse_dataset_csv(in);
}

}  // namespace overfit_lab
