#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "hardy/grid.hpp"
#include "hardy/io.hpp"

using namespace hardy;

namespace {

DomainPtr cube(int n, double lo, double hi, std::size_t cells, Closure c = Closure::zero) {
  GridDomain d(std::vector<double>(n, lo), std::vector<double>(n, hi), std::vector<std::size_t>(n, cells));
  d.set_closure(c);
  return share(std::move(d));
}

GridFunction random_function(const DomainPtr& d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<double> v(d->size());
  for (auto& x : v) x = U(rng);
  return GridFunction(d, std::move(v));
}

}  // namespace

TEST(GridDomain, RejectsDegenerateBoxes) {
  EXPECT_THROW(GridDomain({0.0}, {0.0}, {4}), InvalidInput);
  EXPECT_THROW(GridDomain({0.0, 0.0}, {1.0}, {4, 4}), InvalidInput);
  EXPECT_THROW(GridDomain({0.0}, {1.0}, {0}), InvalidInput);
  GridDomain d({0.0, -1.0}, {1.0, 1.0}, {4, 8});
  EXPECT_DOUBLE_EQ(d.spacing(0), 0.25);
  EXPECT_DOUBLE_EQ(d.spacing(1), 0.25);
  EXPECT_EQ(d.size(), 32u);
  EXPECT_THROW(d.set_mask(Mask(31, 1)), InvalidInput);
}

TEST(GridDomain, NodeAlignedPutsGhostsOnTheFaces) {
  auto d = GridDomain::node_aligned_cube(2, 0.0, 1.0, 3);
  EXPECT_DOUBLE_EQ(d.spacing(0), 0.25);
  EXPECT_DOUBLE_EQ(d.center(0)[0], 0.25);
  EXPECT_DOUBLE_EQ(d.center(d.size() - 1)[1], 0.75);
}

TEST(GridFunction, ZeroExtensionAndFiniteness) {
  GridDomain d({0.0}, {1.0}, {4});
  d.set_mask({1, 1, 0, 1});
  auto dp = share(d);
  GridFunction f(dp, {1.0, 2.0, 3.0, 4.0});
  EXPECT_EQ(f[2], 0.0);
  EXPECT_THROW(GridFunction(dp, {1.0, NAN, 0.0, 0.0}), InvalidInput);
  EXPECT_NO_THROW(GridFunction(dp, {1.0, 1.0, NAN, 0.0}));  // off-mask values are discarded
}

TEST(Energy, ZeroFunctionHasZeroEnergy) {
  auto d = cube(3, 0.0, 1.0, 8);
  EXPECT_EQ(gradient_p_energy(GridFunction(d), 2.0), 0.0);
  EXPECT_EQ(gradient_p_energy(GridFunction(d), 1.5), 0.0);
}

TEST(Energy, LinearFunctionWithInteriorDifferences) {
  for (std::size_t n : {8u, 32u, 100u}) {
    auto d = cube(1, 0.0, 1.0, n, Closure::one_sided);
    auto u = GridFunction::from_function(d, [](const Point& x) { return x[0]; });
    const double h = 1.0 / static_cast<double>(n);
    EXPECT_NEAR(gradient_p_energy(u, 2.0), 1.0, 2.0 * h);
  }
}

TEST(Energy, RejectsBadInput) {
  auto d = cube(2, 0.0, 1.0, 4);
  GridFunction u(d);
  EXPECT_THROW(gradient_p_energy(u, 1.0), InvalidInput);
  u.mutable_values()[3] = INFINITY;
  EXPECT_THROW(gradient_p_energy(u, 2.0), InvalidInput);
}

// Dimensional analysis: a layer of transition width h costs area * h^{1-p};
// a single-cell set costs h^{N-p}.
TEST(Energy, SmoothedIndicatorScalesWithMesh) {
  const double p = 2.0;
  auto energy_of_ball = [&](std::size_t n) {
    auto d = cube(3, -1.0, 1.0, n);
    const double h = d->spacing(0);
    auto u = GridFunction::from_function(d, [&](const Point& x) {
      const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
      return std::clamp((0.5 + h - r) / h, 0.0, 1.0);
    });
    return gradient_p_energy(u, p);
  };
  const double ratio_ball = energy_of_ball(64) / energy_of_ball(32);
  EXPECT_NEAR(ratio_ball, std::pow(2.0, p - 1.0), 0.15 * std::pow(2.0, p - 1.0));

  auto energy_of_cell = [&](std::size_t n) {
    auto d = cube(3, -1.0, 1.0, n);
    GridFunction u(d);
    u.mutable_values()[d->cell_containing(Point{0.01, 0.01, 0.01}).value()] = 1.0;
    return gradient_p_energy(u, p);
  };
  EXPECT_NEAR(energy_of_cell(64) / energy_of_cell(32), std::pow(0.5, 3.0 - p), 1e-12);
}

TEST(Energy, HomogeneityAndTranslation) {
  std::mt19937_64 rng(7);
  for (double p : {1.3, 2.0, 2.7}) {
    for (Closure c : {Closure::zero, Closure::far_field, Closure::one_sided}) {
      auto d = cube(3, -1.0, 1.0, 6, c);
      auto u = random_function(d, rng);
      const double e = gradient_p_energy(u, p);
      for (double scale : {-3.0, 0.25, 7.5}) {
        EXPECT_NEAR(gradient_p_energy(u.scaled(scale), p), std::pow(std::fabs(scale), p) * e, 1e-12 * e * std::pow(std::fabs(scale), p));
      }
    }
  }
  // Shift a compactly supported function (and its mask) by whole cells.
  auto d = cube(2, 0.0, 1.0, 16);
  auto bump = [](double cx, double cy) {
    return [=](const Point& x) { return std::max(0.0, 0.04 - (x[0] - cx) * (x[0] - cx) - (x[1] - cy) * (x[1] - cy)); };
  };
  const double h = d->spacing(0);
  for (double p : {1.5, 2.0, 3.0}) {
    const double e0 = gradient_p_energy(GridFunction::from_function(d, bump(0.4, 0.4)), p);
    const double e1 = gradient_p_energy(GridFunction::from_function(d, bump(0.4 + 3 * h, 0.4 - 2 * h)), p);
    EXPECT_NEAR(e0, e1, 1e-12 * e0);
  }
}

TEST(Energy, RefinementConvergesAtFirstOrder) {
  // sin(pi x) sin(pi y) on the unit square: exact Dirichlet energy pi^2/2.
  const double exact = M_PI * M_PI / 2.0;
  std::vector<double> err;
  for (std::size_t n : {15u, 31u, 63u, 127u}) {
    auto d = share(GridDomain::node_aligned_cube(2, 0.0, 1.0, n));
    auto u = GridFunction::from_function(d, [](const Point& x) { return std::sin(M_PI * x[0]) * std::sin(M_PI * x[1]); });
    err.push_back(std::fabs(gradient_p_energy(u, 2.0) - exact));
  }
  for (std::size_t i = 1; i < err.size(); ++i) EXPECT_GE(std::log2(err[i - 1] / err[i]), 1.0);
  // p = 3: successive differences shrink at least linearly.
  std::vector<double> e;
  for (std::size_t n : {15u, 31u, 63u, 127u}) {
    auto d = share(GridDomain::node_aligned_cube(2, 0.0, 1.0, n));
    auto u = GridFunction::from_function(d, [](const Point& x) { return std::sin(M_PI * x[0]) * std::sin(M_PI * x[1]); });
    e.push_back(gradient_p_energy(u, 3.0));
  }
  EXPECT_GE(std::log2(std::fabs(e[1] - e[0]) / std::fabs(e[2] - e[1])), 0.9);
  EXPECT_GE(std::log2(std::fabs(e[2] - e[1]) / std::fabs(e[3] - e[2])), 0.9);
}

TEST(Energy, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  for (double p : {1.5, 2.0, 3.0}) {
    for (Closure c : {Closure::zero, Closure::far_field, Closure::one_sided}) {
      auto d = cube(2, -1.0, 1.0, 5, c);
      auto u = random_function(d, rng);
      DirichletEnergy E(*d);
      std::vector<double> g(d->size());
      E.value_and_gradient(u.values(), p, 0.0, g);
      auto v = std::vector<double>(u.values().begin(), u.values().end());
      for (std::size_t i = 0; i < v.size(); i += 3) {
        const double step = 1e-6;
        v[i] += step;
        const double ep = E.value(v, p);
        v[i] -= 2 * step;
        const double em = E.value(v, p);
        v[i] += step;
        EXPECT_NEAR(g[i], (ep - em) / (2 * step), 1e-5 * (1.0 + std::fabs(g[i]))) << "p=" << p << " closure=" << to_string(c);
      }
    }
  }
}

TEST(Weighted, TrivialValuesAndErrors) {
  auto d = cube(3, 0.0, 1.0, 10);
  auto one = GridFunction::from_function(d, [](const Point&) { return 1.0; });
  EXPECT_NEAR(integrate_weighted(one, one, 2.0), 1.0, 1e-12);
  EXPECT_NEAR(integrate_weighted(one.scaled(2.0), one, 2.0), 2.0, 1e-12);
  auto other = cube(3, 0.0, 1.0, 11);
  EXPECT_THROW(integrate_weighted(one, GridFunction(other), 2.0), InvalidInput);
}

TEST(Weighted, BilinearInGMonotoneInAbsU) {
  std::mt19937_64 rng(3);
  auto d = cube(3, 0.0, 1.0, 6);
  for (int trial = 0; trial < 20; ++trial) {
    auto g1 = random_function(d, rng).abs();
    auto g2 = random_function(d, rng).abs();
    auto u = random_function(d, rng);
    const double a = 0.7, b = 2.3;
    std::vector<double> mix(d->size());
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * g1[i] + b * g2[i];
    const double lhs = integrate_weighted(GridFunction(d, mix), u, 2.5);
    const double rhs = a * integrate_weighted(g1, u, 2.5) + b * integrate_weighted(g2, u, 2.5);
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::fabs(rhs));
    auto bigger = u.abs();
    for (auto& x : bigger.mutable_values()) x *= 1.1;
    EXPECT_GE(integrate_weighted(g1, bigger, 2.5), integrate_weighted(g1, u, 2.5));
  }
}

TEST(Transfer, InterpolationReproducesLinearFunctions) {
  auto coarse = cube(2, 0.0, 1.0, 8);
  auto fine = cube(2, 0.0, 1.0, 16);
  auto lin = [](const Point& x) { return 2.0 * x[0] - 3.0 * x[1] + 0.5; };
  auto uc = GridFunction::from_function(coarse, lin);
  auto uf = interpolate(*coarse, uc.values(), *fine);
  const double h = coarse->spacing(0);
  Point x;
  for (std::size_t i = 0; i < fine->size(); ++i) {
    fine->center(i, x);
    if (x[0] > 0.5 * h && x[0] < 1 - 0.5 * h && x[1] > 0.5 * h && x[1] < 1 - 0.5 * h) {
      EXPECT_NEAR(uf[i], lin(x), 1e-12);
    }
  }
}

TEST(Transfer, WindowInheritsAndCutsFaces) {
  GridDomain d({-2.0, -2.0, -2.0}, {2.0, 2.0, 2.0}, {16, 16, 16});
  d.set_closure(Closure::zero);
  auto w = make_window(d, {-1.9, 0.0, 0.0}, 0.5);
  EXPECT_EQ(w.origin[0], 0u);
  EXPECT_EQ(w.domain.closure(0, false), Closure::zero);
  EXPECT_EQ(w.domain.closure(0, true), Closure::far_field);
  EXPECT_EQ(w.domain.closure(1, false), Closure::far_field);
  EXPECT_DOUBLE_EQ(w.domain.spacing(1), d.spacing(1));
  for (std::size_t i = 0; i < w.domain.size(); ++i) {
    const auto a = w.domain.center(i);
    const auto b = d.center(w.parent_index(i, d));
    EXPECT_NEAR(distance(a, b), 0.0, 1e-12);
  }
}

TEST(CompactSetTest, MembershipAndContainment) {
  auto d = cube(3, -1.0, 1.0, 16);
  auto b = CompactSet::ball(d, {0.0, 0.0, 0.0}, 0.5);
  EXPECT_TRUE(b.compactly_contained());
  EXPECT_FALSE(CompactSet::ball(d, {0.0, 0.0, 0.0}, 5.0).compactly_contained());
  EXPECT_TRUE(CompactSet::ball(d, {0.0, 0.0, 0.0}, 5.0).trimmed().compactly_contained());
  EXPECT_TRUE(CompactSet::ball(d, {0, 0, 0}, 0.3).subset_of(b));
  GridDomain m = *d;
  Mask mask(m.size(), 0);
  m.set_mask(mask);
  EXPECT_THROW(CompactSet(share(m), Mask(m.size(), 1)), InvalidInput);
}

TEST(FileFormat, RoundTripWithMask) {
  GridDomain d({-1.0, 0.0}, {1.0, 2.0}, {5, 3});
  Mask m(d.size(), 1);
  m[4] = 0;
  d.set_mask(m);
  auto dp = share(d);
  std::mt19937_64 rng(5);
  auto f = random_function(dp, rng);
  const std::string path = ::testing::TempDir() + "/f.grid", mpath = ::testing::TempDir() + "/f.mask";
  io::write_grid_function(path, f);
  io::write_mask(mpath, dp->mask());
  auto g = io::read_grid_function(path, mpath);
  EXPECT_TRUE(g.domain() == f.domain());
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(f[i], g[i]);
}
