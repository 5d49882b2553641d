#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "overfit_lab/minnorm.hpp"
#include "overfit_lab/oracle.hpp"

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

/// Number of kinks in each [x_i, x_{i+1}); kinks outside [x_0, x_{n-1}) land
/// in the returned `outside` counter.
std::vector<int> kinks_per_interval(const PiecewiseLinear& f, const Dataset& s, int& outside) {
  std::vector<int> count(s.size() - 1, 0);
  outside = 0;
  for (double t : f.breakpoints()) {
    if (t < s.x().front() || t >= s.x().back()) {
      ++outside;
      continue;
    }
    const auto it = std::upper_bound(s.x().begin(), s.x().end(), t);
    ++count[static_cast<std::size_t>(it - s.x().begin()) - 1];
  }
  return count;
}

void expect_structural_invariants(const Dataset& s, const MinNormResult& r) {
  const auto& f = r.function;
  const std::size_t n = s.size();
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(f(s.x()[i]), s.y()[i], 1e-9);

  int outside = 0;
  for (int c : kinks_per_interval(f, s, outside)) EXPECT_LE(c, 1);
  EXPECT_EQ(outside, 0);

  for (const auto& e : envelope(s)) {
    for (int k = 0; k < 500; ++k) {
      const double x = e.left + (e.right - e.left) * k / 500.0;
      const double scale = 1.0 + std::abs(e.upper(x));
      EXPECT_GE(f(x), e.lower(x) - 1e-8 * scale);
      EXPECT_LE(f(x), e.upper(x) + 1e-8 * scale);
    }
  }

  const Line g1 = s.secant(0), gl = s.secant(n - 2);
  for (int k = 0; k <= 100; ++k) {
    const double a = s.x()[1] * k / 100.0;
    if (a < s.x()[1]) {
      EXPECT_NEAR(f(a), g1(a), 1e-10 * (1.0 + std::abs(g1(a))));
    }
    const double b = s.x()[n - 2] + (1.0 - s.x()[n - 2]) * k / 100.0;
    EXPECT_NEAR(f(b), gl(b), 1e-10 * (1.0 + std::abs(gl(b))));
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto [lo_slope, hi_slope] = s.slopes_around(i);
    const double incoming = f.slope_at(std::nextafter(s.x()[i], -INFINITY));
    const double scale = 1.0 + std::max(std::abs(lo_slope), std::abs(hi_slope));
    EXPECT_GE(incoming, std::min(lo_slope, hi_slope) - 1e-8 * scale);
    EXPECT_LE(incoming, std::max(lo_slope, hi_slope) + 1e-8 * scale);
  }
  EXPECT_LE(r.cost, representation_cost(extended_spline(s)) * (1.0 + 1e-12) + 1e-12);
}

}  // namespace

TEST(MinNorm, CollinearIsAffine) {
  const Dataset s({0.1, 0.3, 0.6, 0.9, 0.95}, {0.0, 1.0, 2.5, 4.0, 4.25});
  const auto r = minnorm_interpolate(s);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.cost, 0.0, 1e-12);
  EXPECT_TRUE(r.function.is_affine());
}

TEST(MinNorm, SmallNClosedForm) {
  const Dataset two({0.2, 0.7}, {1.0, -1.0});
  EXPECT_TRUE(minnorm_interpolate(two).function.is_affine());
  const Dataset three({0.2, 0.5, 0.7}, {1.0, -1.0, 0.0});
  const auto r = minnorm_interpolate(three);
  ASSERT_EQ(r.function.kink_count(), 1u);
  EXPECT_DOUBLE_EQ(r.function.breakpoints()[0], 0.5);
  const double expected = std::sqrt(1 + 0.25) * std::abs(three.secant_slope(1) - three.secant_slope(0));
  EXPECT_NEAR(r.cost, expected, 1e-12);
}

TEST(MinNorm, RejectsTinyInput) { EXPECT_THROW(minnorm_interpolate(Dataset({0.5}, {0.0})), std::invalid_argument); }

TEST(MinNorm, MatchesOracleOnSmallData) {
  std::mt19937_64 gen(42);
  for (int rep = 0; rep < 12; ++rep) {
    const std::size_t n = 4 + rep % 2;
    const auto s = random_dataset(gen, n);
    const auto r = minnorm_interpolate(s);
    const auto o = brute_force_minnorm(s, 1e-3);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.cost, o.cost, 1e-6 * std::max(1.0, o.cost)) << "rep " << rep;
    EXPECT_LE(sup_distance(r.function, o.function, 1001), 1e-4 * std::max(1.0, o.cost)) << "rep " << rep;
  }
}

TEST(MinNorm, StructuralInvariants) {
  std::mt19937_64 gen(9);
  for (std::size_t n : {5u, 20u, 100u, 400u}) {
    for (int rep = 0; rep < 10; ++rep) {
      const auto s = random_dataset(gen, n);
      const auto r = minnorm_interpolate(s);
      EXPECT_TRUE(r.converged) << "n " << n << " rep " << rep;
      expect_structural_invariants(s, r);
    }
  }
}

TEST(MinNorm, ExactSpike) {
  const std::vector<double> x{0.05, 0.1, 0.2, 0.45, 0.55, 0.7};
  const std::vector<double> y{1.5, -1.0, 1.0, 1.0, -1.0, 1.5};
  const Dataset s(x, y);
  const auto r = minnorm_interpolate(s);
  const auto sp = special_points(s);
  std::optional<SpikeSegment> spike;
  for (std::size_t k = 0; k < sp.indices.size(); ++k) {
    if (auto seg = exact_spike(s, k)) spike = seg;
  }
  ASSERT_TRUE(spike.has_value());
  for (int k = 0; k <= 200; ++k) {
    const double xx = spike->left + (spike->right - spike->left) * k / 200.0;
    EXPECT_NEAR(r.function(xx), spike->shape(xx), 1e-8);
  }
}

TEST(MinNorm, AlternatingCurvatureIsSpline) {
  std::vector<double> x, y;
  for (int i = 0; i < 12; ++i) {
    x.push_back(0.05 + 0.08 * i);
    y.push_back(i % 2 == 0 ? 0.0 : 1.0);
  }
  const Dataset s(x, y);
  const auto f = minnorm_interpolate(s).function;
  const auto g = linear_spline(s);
  for (double t = x[1]; t <= x[10]; t += 0.001) EXPECT_NEAR(f(t), g(t), 1e-12);
}

TEST(MinNorm, Deterministic) {
  std::mt19937_64 gen(5);
  const auto s = random_dataset(gen, 200);
  const auto a = minnorm_interpolate(s);
  const auto b = minnorm_interpolate(s);
  ASSERT_EQ(a.function.kink_count(), b.function.kink_count());
  for (std::size_t k = 0; k < a.function.kink_count(); ++k) {
    EXPECT_EQ(a.function.kinks()[k].position, b.function.kinks()[k].position);
    EXPECT_EQ(a.function.kinks()[k].slope_change, b.function.kinks()[k].slope_change);
  }
  EXPECT_EQ(a.cost, b.cost);
}

TEST(IntervalRun, LengthOneIsClosedForm) {
  ChainRun run;
  run.positions = {0.1, 0.3, 0.6};
  run.widths = {2.0};
  run.head = 1.5;
  const auto sol = solve_interval_run(run);
  EXPECT_TRUE(sol.converged);
  EXPECT_DOUBLE_EQ(sol.u[0], 2.0);
}

TEST(IntervalRun, LengthTwoMatchesGrid) {
  std::mt19937_64 gen(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    ChainRun run;
    std::vector<double> pos(4);
    for (auto& p : pos) p = u(gen);
    std::sort(pos.begin(), pos.end());
    run.positions = pos;
    run.widths = {0.1 + 3.0 * u(gen), 0.1 + 3.0 * u(gen)};
    run.head = 0.1 + 3.0 * u(gen);
    const auto sol = solve_interval_run(run);
    auto cost = [&](double u0, double u1) {
      return std::hypot(run.head + u0, pos[0] * run.head + pos[1] * u0) +
             std::hypot(run.widths[0] - u0 + u1, pos[1] * (run.widths[0] - u0) + pos[2] * u1) +
             std::hypot(run.widths[1] - u1, pos[2] * (run.widths[1] - u1));
    };
    double best = INFINITY;
    const int m = 800;
    for (int i = 0; i <= m; ++i) {
      for (int j = 0; j <= m; ++j) best = std::min(best, cost(run.widths[0] * i / m, run.widths[1] * j / m));
    }
    EXPECT_LE(sol.cost, best + 1e-12);
    EXPECT_NEAR(sol.cost, best, 1e-4 * best);
  }
}
