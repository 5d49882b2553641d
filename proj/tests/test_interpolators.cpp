#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "overfit_lab/interpolators.hpp"

using namespace overfit_lab;

namespace {

Dataset random_dataset(std::mt19937_64& gen, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> x(n), y(n);
  for (auto& v : x) v = u(gen);
  for (auto& v : y) v = z(gen);
  return Dataset::from_unsorted(x, y);
}

}  // namespace

TEST(Dataset, GapsAndSecants) {
  const Dataset s({0.1, 0.4, 0.8}, {1.0, 2.0, 0.0});
  const auto g = s.gaps();
  ASSERT_EQ(g.size(), 4u);
  EXPECT_DOUBLE_EQ(g[0], 0.1);
  EXPECT_NEAR(g[3], 0.2, 1e-15);
  double sum = 0.0;
  for (double v : g) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_NEAR(s.secant_slope(0), 1.0 / 0.3, 1e-14);
  EXPECT_NEAR(s.secant_slope(1), -5.0, 1e-14);
}

TEST(Dataset, Rejects) {
  EXPECT_THROW(Dataset({0.1, 0.1}, {0.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(Dataset({0.2, 0.1}, {0.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(Dataset({0.1, 1.1}, {0.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(Dataset({0.1}, {0.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(Dataset({0.1, 0.2}, {0.0, NAN}), std::invalid_argument);
}

TEST(Dataset, CsvParsing) {
  std::istringstream with_header("x,y\n0.5,1\n0.2,3\n");
  const auto s = parse_dataset_csv(with_header);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_DOUBLE_EQ(s.x()[0], 0.2);
  EXPECT_DOUBLE_EQ(s.y()[0], 3.0);
  std::istringstream bad("0.1,1\nfoo,2\n");
  EXPECT_THROW(parse_dataset_csv(bad), std::invalid_argument);
  std::istringstream dup("0.1,1\n0.1,2\n");
  EXPECT_THROW(parse_dataset_csv(dup), std::invalid_argument);
}

TEST(LinearSpline, TwoPoints) {
  const Dataset s({0.2, 0.8}, {1.0, 3.0});
  const auto g = linear_spline(s);
  EXPECT_DOUBLE_EQ(g(0.0), 1.0);
  EXPECT_DOUBLE_EQ(g(1.0), 3.0);
  EXPECT_NEAR(g.slope_at(0.5), 2.0 / 0.6, 1e-14);
}

TEST(LinearSpline, CollinearIsAffineInside) {
  const Dataset s({0.1, 0.5, 0.9}, {0.0, 1.0, 2.0});
  const auto g = linear_spline(s);
  EXPECT_EQ(g.kink_count(), 2u);
  EXPECT_NEAR(g.slope_at(0.3), 2.5, 1e-14);
  EXPECT_NEAR(g.slope_at(0.7), 2.5, 1e-14);
}

TEST(LinearSpline, Interpolates) {
  std::mt19937_64 gen(1);
  const auto s = random_dataset(gen, 10);
  const auto g = linear_spline(s);
  const auto h = extended_spline(s);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_NEAR(g(s.x()[i]), s.y()[i], 1e-12);
    EXPECT_NEAR(h(s.x()[i]), s.y()[i], 1e-12);
  }
  EXPECT_THROW(linear_spline(Dataset({0.5}, {1.0})), std::invalid_argument);
}

TEST(ExtendedSpline, Extension) {
  EXPECT_TRUE(extended_spline(Dataset({0.1, 0.6}, {0.0, 1.0})).is_affine());
  const Dataset s({0.5, 0.6, 0.9}, {0.0, 1.0, 1.0});
  const auto h = extended_spline(s);
  EXPECT_NEAR(h(0.0), -5.0, 1e-12);
  const auto d = difference(h, linear_spline(s));
  for (double x = 0.5; x <= 0.9; x += 0.01) EXPECT_NEAR(d(x), 0.0, 1e-12);
}

TEST(Curvature, Labels) {
  for (auto c : curvature(Dataset({0.1, 0.2, 0.5}, {1.0, 2.0, 5.0}))) EXPECT_EQ(c, CurvatureLabel::Flat);
  const auto peak = curvature(Dataset({0.25, 0.5, 0.75}, {0.0, 1.0, 0.0}));
  EXPECT_EQ(peak[1], CurvatureLabel::Concave);

  std::mt19937_64 gen(2);
  const auto s = random_dataset(gen, 30);
  const auto labels = curvature(s);
  EXPECT_EQ(labels.front(), CurvatureLabel::Flat);
  EXPECT_EQ(labels.back(), CurvatureLabel::Flat);
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    const double left = (s.y()[i] - s.y()[i - 1]) / (s.x()[i] - s.x()[i - 1]);
    const double right = (s.y()[i + 1] - s.y()[i]) / (s.x()[i + 1] - s.x()[i]);
    EXPECT_EQ(sign(labels[i]), right > left ? 1 : -1);
  }
}

TEST(SpecialPoints, Traces) {
  using C = CurvatureLabel;
  EXPECT_EQ(special_points(std::vector<C>{C::Flat, C::Flat, C::Flat}).indices, (std::vector<std::size_t>{0}));
  EXPECT_EQ(special_points(std::vector<C>{C::Flat, C::Concave, C::Concave, C::Convex}).indices,
            (std::vector<std::size_t>{0, 1, 3}));
  EXPECT_EQ(special_points(std::vector<C>{C::Flat, C::Convex, C::Concave, C::Convex, C::Concave}).indices,
            (std::vector<std::size_t>{0, 1, 2, 3, 4}));
}

TEST(Envelope, CollinearPinned) {
  const Dataset s({0.1, 0.3, 0.6, 0.9}, {0.0, 1.0, 2.5, 4.0});
  for (const auto& e : envelope(s)) {
    EXPECT_TRUE(e.pinned);
    EXPECT_NEAR(e.lower(0.5), e.upper(0.5), 1e-14);
  }
}

TEST(Envelope, BadCaseUpperIsMinOfNeighbours) {
  // Labels 0, -1, -1, 0 on four points: the middle interval is a concave run.
  const Dataset s({0.1, 0.3, 0.5, 0.7}, {-1.0, 1.0, 1.0, -1.0});
  const auto env = envelope(s);
  ASSERT_EQ(env.size(), 3u);
  EXPECT_TRUE(env[0].pinned);
  EXPECT_TRUE(env[2].pinned);
  // Interval [x1, x2) is interior only when n >= 4 and it is not the last.
  const auto mid = env[1];
  EXPECT_FALSE(mid.pinned);
  const auto expected = min_of_lines(s.secant(0), s.secant(2));
  for (double x = 0.3; x < 0.5; x += 0.01) {
    EXPECT_NEAR(mid.upper(x), expected(x), 1e-12);
    EXPECT_LE(mid.lower(x), mid.upper(x) + 1e-12);
  }
}

TEST(Envelope, LowerBelowUpperOnRandomData) {
  std::mt19937_64 gen(3);
  for (int rep = 0; rep < 20; ++rep) {
    const auto s = random_dataset(gen, 25);
    for (const auto& e : envelope(s)) {
      for (int k = 0; k < 50; ++k) {
        const double x = e.left + (e.right - e.left) * k / 50.0;
        EXPECT_LE(e.lower(x), e.upper(x) + 1e-9 * (1.0 + std::abs(e.upper(x))));
        if (e.pinned) {
          EXPECT_EQ(e.lower(x), e.upper(x));
        }
      }
    }
  }
}

TEST(ExactSpike, HypothesesUnmet) {
  const Dataset s({0.1, 0.3, 0.6, 0.9}, {0.0, 1.0, 2.5, 4.0});
  EXPECT_FALSE(exact_spike(s, 0).has_value());
}

TEST(ExactSpike, IntersectionFormula) {
  // Six-point block with the unfortunate noise pattern on a zero target.
  const std::vector<double> x{0.05, 0.1, 0.2, 0.45, 0.55, 0.7};
  const std::vector<double> y{1.5, -1.0, 1.0, 1.0, -1.0, 1.5};
  const Dataset s(x, y);
  const auto sp = special_points(s);
  std::optional<SpikeSegment> spike;
  for (std::size_t k = 0; k < sp.indices.size(); ++k) {
    if (sp.indices[k] == 2) spike = exact_spike(s, k);
  }
  ASSERT_TRUE(spike.has_value());
  EXPECT_EQ(spike->interval, 2u);
  const double l2 = x[2] - x[1], l3 = x[3] - x[2], l4 = x[4] - x[3];
  EXPECT_NEAR(spike->kink - x[2], l2 * l3 / (l2 + l4), 1e-12);
}
