#include <gtest/gtest.h>

#include <cmath>

#include "hardy/lorentz.hpp"
#include "hardy/mazya.hpp"
#include "hardy/rayleigh.hpp"

using namespace hardy;

namespace {

DomainPtr far_field_cube(int n, double half, std::size_t cells) {
  GridDomain d(std::vector<double>(n, -half), std::vector<double>(n, half), std::vector<std::size_t>(n, cells));
  d.set_closure(Closure::far_field);
  return share(d);
}

GridFunction sum(const GridFunction& a, const GridFunction& b) {
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] + b[i];
  return GridFunction(a.domain_ptr(), std::move(v));
}

const CenterLadder& ladder_at(const ConcentrationMap& m, const Point& x) {
  for (const auto& L : m.centers)
    if (!L.at_infinity && distance(L.center, x) < 1e-12) return L;
  throw std::runtime_error("center not found");
}

const CenterLadder& infinity_ladder(const ConcentrationMap& m) {
  for (const auto& L : m.centers)
    if (L.at_infinity) return L;
  throw std::runtime_error("no ladder at infinity");
}

}  // namespace

TEST(Constants, HardyConstantAndThreshold) {
  EXPECT_DOUBLE_EQ(hardy_constant(2.0), 4.0);
  EXPECT_NEAR(hardy_constant(3.0), 27.0 / 4.0, 1e-14);
  EXPECT_DOUBLE_EQ(perturbation_threshold(1.0, 7.0, 2.0), 1.0);
  EXPECT_DOUBLE_EQ(perturbation_threshold(0.0, 3.0, 2.0), 0.0);
  const double h = 0.37;
  EXPECT_DOUBLE_EQ(perturbation_threshold(h, 2.0 * (2.0 * hardy_constant(2.0) - 1.0) * h, 2.0), 0.5);
  EXPECT_THROW(perturbation_threshold(1.0, 0.0, 2.0), InvalidInput);
}

TEST(LowerBound, IndicatorOfBallOverItself) {
  // int_{B_1} 1 / Cap(B_1, R^3) = (4 pi / 3) / (4 pi) = 1/3.
  auto d = far_field_cube(3, 2.0, 48);
  auto g = sample_potential(PotentialSpec::indicator({0, 0, 0}, 0.0, 1.0), d);
  const auto est = mazya_lower_bound(g, 2.0, {{"B_1", CompactSet::ball(d, {0, 0, 0}, 1.0)}});
  EXPECT_NEAR(est.lower, 1.0 / 3.0, 0.06 / 3.0);
  ASSERT_TRUE(est.best.has_value());
  EXPECT_EQ(est.family_log[*est.best].descriptor, "B_1");
}

TEST(LowerBound, InversePowerBallRatioIsScaleFree) {
  auto d = far_field_cube(3, 2.0, 48);
  auto g = sample_potential(PotentialSpec::inverse_power({0, 0, 0}, 2.0), d);
  std::vector<FamilyMember> fam;
  for (double r : {0.5, 0.75, 1.0}) fam.push_back({"B_" + std::to_string(r), CompactSet::ball(d, {0, 0, 0}, r)});
  const auto est = mazya_lower_bound(g, 2.0, fam);
  // (p-1)^{p-1} / (N-p)^p = 1 for N = 3, p = 2.
  EXPECT_DOUBLE_EQ(inverse_power_ball_ratio(3, 2.0), 1.0);
  double lo = INFINITY, hi = 0.0;
  for (const auto& e : est.family_log) {
    EXPECT_NEAR(e.ratio, 1.0, 0.08) << e.descriptor;
    lo = std::min(lo, e.ratio);
    hi = std::max(hi, e.ratio);
  }
  EXPECT_LT(hi / lo, 1.05);
}

TEST(LowerBound, FamilyAndIntegrandMonotonicity) {
  auto d = far_field_cube(3, 2.0, 24);
  auto g1 = sample_potential(PotentialSpec::bump({0.5, 0, 0}, 1.0), d);
  auto g2 = sample_potential(PotentialSpec::inverse_power({-0.5, 0, 0}, 1.5), d);
  std::vector<FamilyMember> fam;
  for (const Point& c : {Point{0.5, 0, 0}, Point{-0.5, 0, 0}, Point{0, 0.5, 0}})
    for (double r : {0.4, 0.8}) fam.push_back({"ball", CompactSet::ball(d, c, r)});

  // Enlarging the family never lowers the bound.
  std::vector<FamilyMember> small(fam.begin(), fam.begin() + 2);
  EXPECT_LE(mazya_lower_bound(g1, 2.0, small).lower, mazya_lower_bound(g1, 2.0, fam).lower);

  // Common denominators make the ratios additive in g.
  const auto a = mazya_lower_bound(g1, 2.0, fam), b = mazya_lower_bound(g2, 2.0, fam);
  const auto ab = mazya_lower_bound(sum(g1, g2), 2.0, fam);
  for (std::size_t i = 0; i < fam.size(); ++i)
    EXPECT_NEAR(ab.family_log[i].ratio, a.family_log[i].ratio + b.family_log[i].ratio, 1e-10 * ab.family_log[i].ratio);
  EXPECT_LE(ab.lower, (a.lower + b.lower) * (1.0 + 1e-10));

  // Restricting the integrand to A lowers the bound.
  const auto A = CompactSet::ball(d, {0.3, 0, 0}, 0.6);
  std::vector<double> restricted(g1.size());
  for (std::size_t i = 0; i < restricted.size(); ++i) restricted[i] = A.contains(i) ? g1[i] : 0.0;
  auto fam_A = fam;
  for (const auto& m : fam) {
    auto F = m.set.intersect(A);
    if (!F.empty()) fam_A.push_back({"ball cap A", F});
  }
  EXPECT_LE(mazya_lower_bound(GridFunction(d, restricted), 2.0, fam_A).lower, mazya_lower_bound(g1, 2.0, fam_A).lower);
}

TEST(LowerBound, SandwichOnBoundedBox) {
  auto d = share(GridDomain::node_aligned_cube(3, 0.0, 1.0, 15));
  GridFunction g(d, std::vector<double>(d->size(), 1.0));
  const auto est = mazya_lower_bound(g, 2.0, default_family(g));
  const double B = best_constant({d, g, 2.0}).B;
  EXPECT_GT(est.lower, 0.0);
  const auto s = hardy_sandwich(est.lower, B, 2.0);
  EXPECT_TRUE(s.consistent);
  EXPECT_LE(est.lower, B);
  EXPECT_EQ(s.C_H, 4.0);
  EXPECT_DOUBLE_EQ(s.upper, 4.0 * est.lower);
  EXPECT_GE(s.slack_needed, 0.0);
  const auto zero = hardy_sandwich(0.0, 0.0, 2.0);
  EXPECT_EQ(zero.upper, 0.0);
  EXPECT_TRUE(zero.consistent);
}

TEST(LowerBound, RejectsBadInput) {
  auto d = far_field_cube(3, 1.0, 8);
  GridFunction g(d, std::vector<double>(d->size(), 1.0));
  EXPECT_THROW(mazya_lower_bound(g, 2.0, {}), InvalidInput);
  EXPECT_THROW(mazya_lower_bound(g.scaled(-1.0), 2.0, {{"b", CompactSet::ball(d, {0, 0, 0}, 0.5)}}), InvalidInput);
}

TEST(Concentration, InversePowerDoesNotDecayAtOriginOrInfinity) {
  auto d = far_field_cube(3, 2.0, 32);
  const auto spec = PotentialSpec::inverse_power({0, 0, 0}, 2.0);
  auto g = sample_potential(spec, d);
  ConcentrationOptions opt;
  opt.centers = {{0, 0, 0}, {1.0, 1.0, 0.0}, {-1.0, 0.5, 0.5}};
  const auto map = concentration_function(g, 2.0, opt);
  ASSERT_EQ(map.centers.size(), 4u);
  const auto& origin = ladder_at(map, {0, 0, 0});
  EXPECT_FALSE(origin.decaying);
  EXPECT_NEAR(origin.estimate, 1.0, 0.2);
  EXPECT_TRUE(ladder_at(map, {1.0, 1.0, 0.0}).decaying);
  EXPECT_FALSE(infinity_ladder(map).decaying);
  for (const auto& L : map.centers)
    for (std::size_t k = 1; k < L.ladder.size(); ++k) EXPECT_LE(L.ladder[k].value, L.ladder[k - 1].value);

  const auto v = compactness_verdict(map);
  EXPECT_EQ(v.verdict, Compactness::not_compact);
  EXPECT_TRUE(v.infinity_witness);
  ASSERT_EQ(v.singular_points.size(), 1u);
  EXPECT_EQ(v.singular_points[0], (Point{0, 0, 0}));
  EXPECT_EQ(singular_set(map).size(), 1u);

  const double B = 1.0 / best_constant({d, g, 2.0}).quotient;
  const auto att = attainment_criterion(map, *d, B);
  EXPECT_EQ(att.verdict, Attainment::inconclusive);
  EXPECT_FALSE(att.strict_gap);
}

TEST(Concentration, BoundedWeightsAreCompact) {
  auto d = far_field_cube(3, 2.0, 32);
  const auto spec = PotentialSpec::bump({0, 0, 0}, 1.5);
  auto g = sample_potential(spec, d);
  ConcentrationOptions opt = concentration_options_for(spec);
  opt.lattice_per_axis = 3;
  const auto map = concentration_function(g, 2.0, opt);
  EXPECT_EQ(compactness_verdict(map).verdict, Compactness::compact);
  EXPECT_TRUE(singular_set(map).empty());
  const double B = best_constant({d, g, 2.0}).B;
  const auto att = attainment_criterion(map, *d, B);
  EXPECT_EQ(att.verdict, Attainment::attained_sufficient);
  EXPECT_EQ(att.covering_measure, 0.0);
  EXPECT_EQ(att.note, "sufficient-criterion check");

  auto cube = share(GridDomain::node_aligned_cube(3, 0.0, 1.0, 31));
  GridFunction one(cube, std::vector<double>(cube->size(), 1.0));
  ConcentrationOptions copt;
  copt.lattice_per_axis = 3;
  const auto cmap = concentration_function(one, 2.0, copt);
  EXPECT_EQ(compactness_verdict(cmap).verdict, Compactness::compact);
  for (const auto& L : cmap.centers) EXPECT_FALSE(L.at_infinity);
}

TEST(Concentration, ResolutionAndDeterminism) {
  auto d = far_field_cube(3, 2.0, 32);
  auto g = sample_potential(PotentialSpec::inverse_power({0.3, 0, 0}, 2.0), d);
  ConcentrationOptions opt;
  opt.centers = {{0.3, 0, 0}, {-1, -1, 0}};
  opt.radii = {0.1, 0.5, 1.0};
  opt.threads = 1;
  const auto a = concentration_function(g, 2.0, opt);
  ASSERT_EQ(a.warnings.size(), 1u);
  EXPECT_EQ(a.centers[0].ladder.size(), 2u);
  opt.threads = 3;
  const auto b = concentration_function(g, 2.0, opt);
  ASSERT_EQ(a.centers.size(), b.centers.size());
  for (std::size_t c = 0; c < a.centers.size(); ++c)
    for (std::size_t k = 0; k < a.centers[c].ladder.size(); ++k)
      EXPECT_EQ(a.centers[c].ladder[k].value, b.centers[c].ladder[k].value);
  opt.radii = {0.1};
  EXPECT_THROW(concentration_function(g, 2.0, opt), InvalidInput);
}

TEST(Concentration, LocalizedEstimatorIsOrdered) {
  // Capacities relative to B_2r(x) are larger than relative to Omega, so the
  // localized ratio is the smaller one, and the localization constant closes
  // the gap.
  auto d = far_field_cube(3, 2.0, 32);
  auto g = sample_potential(PotentialSpec::inverse_power({0, 0, 0}, 2.0), d);
  for (const Point& x : {Point{0, 0, 0}, Point{0.5, 0, 0}}) {
    const double r = 0.5;
    const auto F = CompactSet::ball(d, x, r);
    const auto loc = localized_capacity_comparison(F, x, r, 2.0);
    const double integral = integrate_over(g, F);
    const double local_ratio = integral / loc.lhs, global_ratio = integral / loc.rhs;
    EXPECT_LE(local_ratio, global_ratio);
    EXPECT_LE(global_ratio, loc.ratio * local_ratio * (1.0 + 1e-12));
  }
}

TEST(PositivePart, Verdicts) {
  auto d = far_field_cube(3, 2.0, 32);
  ConcentrationOptions opt;
  opt.lattice_per_axis = 3;
  auto inv = sample_potential(PotentialSpec::inverse_power({0, 0, 0}, 2.0), d);
  EXPECT_EQ(positive_part_criterion(inv.scaled(-1.0), 2.0, opt).verdict, Attainment::no_positive_mass);

  auto phi = sample_potential(PotentialSpec::bump({0, 0, 0}, 1.5), d);
  const auto signed_g = sum(phi.scaled(4.0), inv.scaled(-1.0));
  const auto v = positive_part_criterion(signed_g, 2.0, opt);
  EXPECT_EQ(v.verdict, Attainment::attained_sufficient);
  ASSERT_TRUE(v.positive_part.has_value());

  auto in = sample_potential(PotentialSpec::indicator({0, 0, 0}, 0.0, 1.0), d);
  auto shell = sample_potential(PotentialSpec::indicator({0, 0, 0}, 1.0, 1.8), d);
  EXPECT_EQ(positive_part_criterion(sum(in, shell.scaled(-1.0)), 2.0, opt).verdict, Attainment::attained_sufficient);
}

TEST(SampledConcentration, ResolvesFeaturesBelowTheGridScale) {
  // A bump of radius 0.4 is only three cells wide at h = 1/8; sampled
  // windows still see its interior as bounded.
  auto d = far_field_cube(3, 2.0, 32);
  const auto bump = PotentialSpec::bump({0.7, 0.2, 0}, 0.4);
  ConcentrationOptions opt = concentration_options_for(bump);
  opt.lattice_per_axis = 2;
  opt.centers = {{0.7, 0.2, 0}, {0.9, 0.2, 0}, {-1, -1, -1}};
  opt.levels = 4;
  const auto map = concentration_function(bump, d, 2.0, opt);
  EXPECT_EQ(compactness_verdict(map).verdict, Compactness::compact);
  for (const auto& L : map.centers) {
    EXPECT_TRUE(L.decaying) << L.label();
    if (!L.at_infinity) {
      EXPECT_NEAR(L.ladder.back().r, 0.125, 1e-15);
    }
  }

  const auto inv = PotentialSpec::inverse_power({0, 0, 0}, 2.0);
  opt = concentration_options_for(inv);
  opt.centers = {{0, 0, 0}, {1, 1, 0}};
  opt.levels = 4;
  const auto imap = concentration_function(inv, d, 2.0, opt);
  const auto v = compactness_verdict(imap);
  EXPECT_EQ(v.verdict, Compactness::not_compact);
  EXPECT_TRUE(v.infinity_witness);
  const auto& origin = ladder_at(imap, {0, 0, 0});
  EXPECT_FALSE(origin.decaying);
  // Self-similar windows: every rung solves the same discrete problem.
  for (const auto& e : origin.ladder) EXPECT_NEAR(e.value, origin.estimate, 1e-9 * origin.estimate);
  EXPECT_TRUE(ladder_at(imap, {1, 1, 0}).decaying);
  EXPECT_FALSE(infinity_ladder(imap).decaying);

  opt.cells_per_radius = 1.0;
  EXPECT_THROW(concentration_function(inv, d, 2.0, opt), InvalidInput);
}
