#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hardy/rearrange.hpp"

using namespace hardy;

namespace {

DomainPtr box1d(double len, std::size_t n) { return share(GridDomain({0.0}, {len}, {n})); }

DomainPtr centered_cube(int n, double half, std::size_t cells) {
  return share(GridDomain(std::vector<double>(n, -half), std::vector<double>(n, half), std::vector<std::size_t>(n, cells)));
}

GridFunction random_nonnegative(const DomainPtr& d, std::mt19937_64& rng, double zero_fraction = 0.2) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<double> v(d->size());
  for (auto& x : v) x = U(rng) < zero_fraction ? 0.0 : std::floor(U(rng) * 8.0) / 4.0 + U(rng) * 1e-3 * (U(rng) < 0.5);
  return GridFunction(d, std::move(v));
}

}  // namespace

TEST(Distribution, HandExamples) {
  EXPECT_EQ(distribution(GridFunction(box1d(1.0, 4))), StepFunction());
  auto ind = GridFunction(box1d(1.0, 4), {1.0, 0.0, 1.0, 0.0});
  EXPECT_EQ(distribution(ind), StepFunction({1.0}, {0.5, 0.0}));
  auto f = GridFunction(box1d(3.0, 3), {3.0, 1.0, 2.0});
  EXPECT_EQ(distribution(f), StepFunction({1.0, 2.0, 3.0}, {3.0, 2.0, 1.0, 0.0}));
}

TEST(Rearrangement, HandExamples) {
  auto f = GridFunction(box1d(3.0, 3), {3.0, 1.0, 2.0});
  EXPECT_EQ(decreasing_rearrangement(f), StepFunction({1.0, 2.0, 3.0}, {3.0, 2.0, 1.0, 0.0}));
  auto c = GridFunction(box1d(1.0, 8), {0, 2, 2, 0, 2, 0, 0, 0});
  EXPECT_EQ(decreasing_rearrangement(c), StepFunction({0.375}, {2.0, 0.0}));
  auto perm = GridFunction(box1d(3.0, 3), {2.0, 3.0, -1.0});
  EXPECT_EQ(decreasing_rearrangement(perm), decreasing_rearrangement(f));
}

TEST(Rearrangement, EquimeasurableAndLpPreserving) {
  std::mt19937_64 rng(17);
  auto d = centered_cube(3, 1.0, 8);
  for (int trial = 0; trial < 50; ++trial) {
    auto f = random_nonnegative(d, rng);
    const auto fs = decreasing_rearrangement(f);
    EXPECT_EQ(distribution(fs), distribution(f));
    for (double p : {1.0, 1.5, 2.0, 3.0}) {
      double direct = 0.0;
      for (std::size_t i = 0; i < f.size(); ++i) direct += std::pow(std::fabs(f[i]), p);
      direct *= d->cell_volume();
      EXPECT_NEAR(fs.integrate([p](double v) { return std::pow(v, p); }), direct, 1e-12 * direct);
    }
  }
}

TEST(MaximalFunctionTest, ClosedForms) {
  auto chi = maximal_function(StepFunction({1.0}, {1.0, 0.0}));
  EXPECT_DOUBLE_EQ(chi(0.5), 1.0);
  EXPECT_DOUBLE_EQ(chi(1.0), 1.0);
  EXPECT_DOUBLE_EQ(chi(4.0), 0.25);
  auto c = maximal_function(StepFunction({}, {2.5}));
  EXPECT_DOUBLE_EQ(c(0.1), 2.5);
  EXPECT_DOUBLE_EQ(c(100.0), 2.5);
  auto s = maximal_function(StepFunction({1.0, 2.0, 3.0}, {3.0, 2.0, 1.0, 0.0}));
  EXPECT_DOUBLE_EQ(s(2.0), 2.5);
  EXPECT_THROW(s(0.0), InvalidInput);
  EXPECT_THROW(s(-1.0), InvalidInput);
}

TEST(MaximalFunctionTest, DominatesAndDecreases) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto d = centered_cube(2, 1.0, 12);
  for (int trial = 0; trial < 30; ++trial) {
    const auto fs = decreasing_rearrangement(random_nonnegative(d, rng));
    const auto mf = maximal_function(fs);
    double prev = INFINITY;
    for (double t = 1e-3; t < 6.0; t *= 1.07) {
      const double v = mf(t);
      EXPECT_GE(v, fs(t) - 1e-12 * v);
      EXPECT_LE(v, prev + 1e-12 * v);
      prev = v;
    }
  }
}

TEST(Schwarz, IndicatorOfUnitVolumeBecomesUnitBall) {
  const int n = 3;
  auto src = centered_cube(n, 2.0, 32);
  const double omega = unit_ball_volume(n);
  // A box of volume omega_3, as a union of whole cells.
  const double h = src->spacing(0);
  const auto cells = static_cast<std::size_t>(std::lround(omega / std::pow(h, 3)));
  std::vector<double> v(src->size(), 0.0);
  for (std::size_t i = 0; i < cells; ++i) v[i] = 1.0;
  auto f = GridFunction(src, v);
  auto target = centered_cube(n, 1.5, 24);
  auto res = schwarz_symmetrization(f, target);
  const double ht = target->spacing(0);
  Point x;
  for (std::size_t i = 0; i < target->size(); ++i) {
    target->center(i, x);
    const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    if (r < 1.0 - ht) {
      EXPECT_EQ(res.u[i], 1.0);
    } else if (r > 1.0 + ht) {
      EXPECT_EQ(res.u[i], 0.0);
    }
  }
  EXPECT_THROW(schwarz_symmetrization(f, centered_cube(n, 0.9, 12)), InvalidInput);
}

TEST(Schwarz, RadialDecreasingIsAFixedPoint) {
  auto d = centered_cube(2, 1.0, 40);
  auto radial = [](const Point& x) { return std::max(0.0, 0.7 - std::sqrt(x[0] * x[0] + x[1] * x[1])); };
  auto f = GridFunction::from_function(d, radial);
  auto res = schwarz_symmetrization(f, d);
  const double h = d->spacing(0);
  // One cell layer of radial displacement changes the value by at most the slope times h.
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(res.u[i], f[i], 1.5 * h);
}

TEST(Schwarz, EquimeasurabilityWithinSurfaceLayer) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const int n = 3;
  auto d = centered_cube(n, 1.0, 16);
  const double h = d->spacing(0), omega = unit_ball_volume(n), vol = d->cell_volume();
  for (int trial = 0; trial < 5; ++trial) {
    const double cx = 0.3 * U(rng), cy = 0.3 * U(rng);
    auto f = GridFunction::from_function(d, [&](const Point& x) {
      return std::max(0.0, 0.6 - std::hypot(1.3 * (x[0] - cx), x[1] - cy, 0.8 * x[2]));
    });
    auto target = centered_cube(n, 1.0, 16);
    auto res = schwarz_symmetrization(f, target);
    const auto af = distribution(f), au = distribution(res.u);
    Point x;
    for (double s : af.breakpoints()) {
      const double R = std::pow(af(s) / omega, 1.0 / n);
      std::size_t surface = 0;
      for (std::size_t i = 0; i < target->size(); ++i) {
        target->center(i, x);
        if (std::fabs(std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) - R) <= std::sqrt(3.0) * h) ++surface;
      }
      EXPECT_LE(std::fabs(au(s) - af(s)), 2.0 * static_cast<double>(surface) * vol) << "level " << s;
    }
    EXPECT_GE(res.measure_error, 0.0);
  }
}

TEST(Schwarz, PolyaSzegoOnBumps) {
  auto d = centered_cube(3, 1.0, 24);
  const double h = d->spacing(0);
  for (double p : {1.5, 2.0, 3.0}) {
    auto u = GridFunction::from_function(d, [](const Point& x) {
      const double r2 = 2.0 * x[0] * x[0] + (x[1] - 0.1) * (x[1] - 0.1) + 0.5 * x[2] * x[2];
      return r2 < 0.36 ? std::exp(1.0 - 1.0 / (1.0 - r2 / 0.36)) : 0.0;
    });
    auto s = schwarz_symmetrization(u, d);
    EXPECT_LE(gradient_p_energy(s.u, p), gradient_p_energy(u, p) * (1.0 + 5.0 * h)) << p;
  }
}

TEST(HardyLittlewood, HandExamplesAndErrors) {
  auto d = box1d(4.0, 4);
  auto f = GridFunction(d, {1.0, 0.0, 0.0, 0.0});
  auto g = GridFunction(d, {0.0, 0.0, 1.0, 0.0});
  EXPECT_DOUBLE_EQ(hardy_littlewood_gap(f, g), 1.0);
  EXPECT_DOUBLE_EQ(hardy_littlewood_gap(f, f), 0.0);
  EXPECT_THROW(hardy_littlewood_gap(GridFunction(d, {-1.0, 0.0, 0.0, 0.0}), g), InvalidInput);
  EXPECT_THROW(hardy_littlewood_gap(f, GridFunction(box1d(4.0, 5))), InvalidInput);
}

TEST(HardyLittlewood, NonnegativeOnRandomPairs) {
  std::mt19937_64 rng(31);
  auto d = centered_cube(3, 1.0, 8);
  for (int trial = 0; trial < 100; ++trial) {
    auto f = random_nonnegative(d, rng), g = random_nonnegative(d, rng);
    const double scale = f.max_abs() * g.max_abs() * 8.0;
    EXPECT_GE(hardy_littlewood_gap(f, g), -1e-10 * scale);
  }
}

TEST(StepFunctionTest, ValidationAndCsv) {
  EXPECT_THROW(StepFunction({1.0}, {1.0, 2.0}), InvalidInput);
  EXPECT_THROW(StepFunction({2.0, 1.0}, {3.0, 2.0, 1.0}), InvalidInput);
  EXPECT_THROW(StepFunction({1.0}, {1.0}), InvalidInput);
  StepFunction f({0.1, 0.35, 2.0}, {5.0, 1.0 / 3.0, 0.125, 0.0});
  EXPECT_EQ(StepFunction::from_csv(f.to_csv()), f);
  EXPECT_DOUBLE_EQ(f.support_measure(), 2.0);
}
