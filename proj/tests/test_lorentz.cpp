#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "hardy/lorentz.hpp"

using namespace hardy;

namespace {

StepFunction random_steps(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const int k = 1 + static_cast<int>(U(rng) * 6);
  std::vector<double> t, v;
  double level = 1.0 + 4.0 * U(rng), pos = 0.0;
  for (int i = 0; i < k; ++i) {
    v.push_back(level);
    pos += 0.05 + U(rng);
    t.push_back(pos);
    level *= 0.2 + 0.7 * U(rng);
  }
  v.push_back(0.0);
  return StepFunction(t, v);
}

// Direct quadrature of (t^{1/P} f**(t))^Q dt/t from the exact f** evaluator;
// tanh-sinh copes with the t^{Q/P-1} endpoint singularity at 0.
double norm_by_quadrature(const StepFunction& f, double P, double Q) {
  const auto mf = maximal_function(f);
  auto w = [&](double t) { return std::pow(t, Q / P - 1.0) * std::pow(mf(t), Q); };
  boost::math::quadrature::tanh_sinh<double> ts;
  boost::math::quadrature::exp_sinh<double> es;
  double acc = 0.0, a = 0.0;
  for (double b : f.breakpoints()) {
    acc += ts.integrate(w, a, b, 1e-14);
    a = b;
  }
  acc += es.integrate([&](double t) { return w(a + t); }, 0.0, INFINITY, 1e-14);
  return std::pow(acc, 1.0 / Q);
}

}  // namespace

TEST(Quasinorm, IndicatorClosedForms) {
  for (double m : {0.3, 1.0, 7.0}) {
    StepFunction chi({m}, {1.0, 0.0});
    for (double P : {1.5, 2.0, 4.0}) {
      EXPECT_NEAR(lorentz_quasinorm(chi, {P, kInf}), std::pow(m, 1.0 / P), 1e-12);
      for (double Q : {1.0, 2.0, 3.5}) {
        EXPECT_NEAR(lorentz_quasinorm(chi, {P, Q}), std::pow(P / Q, 1.0 / Q) * std::pow(m, 1.0 / P), 1e-12);
      }
    }
  }
}

TEST(Quasinorm, PowerProfiles) {
  const int N = 3;
  const double p = 2.0, alpha = p / N;
  EXPECT_NEAR(lorentz_quasinorm(PowerProfile::power_law(1.0, alpha, 0.01, 5.0), {N / p, kInf}), 1.0, 1e-12);
  EXPECT_NEAR(lorentz_quasinorm(PowerProfile::power_law(1.0, alpha), {N / p, kInf}), 1.0, 1e-12);
  EXPECT_NEAR(lorentz_norm(PowerProfile::power_law(1.0, alpha), {N / p, kInf}), N / (N - p), 1e-12);
  // Strong norm of an untruncated power diverges logarithmically.
  EXPECT_EQ(lorentz_quasinorm(PowerProfile::power_law(1.0, alpha), {N / p, 2.0}), kInf);
}

TEST(Quasinorm, CriticalExponentsSurviveRounding) {
  // p / N and 1 / (N / p) need not agree to the last bit.
  for (auto [N, p] : {std::pair{3, 1.2}, {3, 1.1}, {5, 1.5}, {6, 1.7}, {7, 2.3}}) {
    const auto f = PowerProfile::power_law(1.0, p / N);
    EXPECT_NEAR(lorentz_quasinorm(f, {N / p, kInf}), 1.0, 1e-12) << N << " " << p;
    EXPECT_NEAR(lorentz_norm(f, {N / p, kInf}), N / (N - p), 1e-10) << N << " " << p;
  }
}

TEST(Norm, ClosedFormsAndZero) {
  StepFunction chi({1.0}, {1.0, 0.0});
  EXPECT_NEAR(lorentz_norm(chi, {2.0, kInf}), 1.0, 1e-14);
  EXPECT_EQ(lorentz_norm(StepFunction(), {2.0, kInf}), 0.0);
  EXPECT_EQ(lorentz_quasinorm(StepFunction(), {2.0, 3.0}), 0.0);
  EXPECT_EQ(lorentz_norm(StepFunction({}, {1.0}), {2.0, kInf}), kInf);
  EXPECT_THROW(LorentzIndex(2.0, 0.5), InvalidInput);
  EXPECT_THROW(LorentzIndex(1.0, kInf), InvalidInput);
}

TEST(Norm, FiniteQMatchesDirectQuadrature) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = random_steps(rng);
    for (auto [P, Q] : {std::pair{2.0, 1.0}, std::pair{1.5, 2.0}, std::pair{3.0, 2.5}}) {
      const double oracle = norm_by_quadrature(f, P, Q);
      EXPECT_NEAR(lorentz_norm(f, {P, Q}), oracle, 1e-9 * oracle);
    }
  }
}

TEST(Norm, WeakNormMatchesDenseSampling) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = random_steps(rng);
    const auto mf = maximal_function(f);
    for (double P : {1.5, 3.0}) {
      double sampled = 0.0;
      for (double t = 1e-4; t < 100.0; t *= 1.0005) sampled = std::max(sampled, std::pow(t, 1.0 / P) * mf(t));
      const double exact = lorentz_norm(f, {P, kInf});
      EXPECT_GE(exact, sampled - 1e-12);
      EXPECT_NEAR(exact, sampled, 1e-3 * exact);
    }
  }
}

TEST(Properties, OrderingScalingMonotonicity) {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 50; ++trial) {
    const auto f = random_steps(rng);
    for (auto [P, Q] : {std::pair{2.0, kInf}, std::pair{1.5, kInf}, std::pair{2.0, 2.0}, std::pair{4.0, 1.0}}) {
      const double q = lorentz_quasinorm(f, {P, Q}), n = lorentz_norm(f, {P, Q});
      EXPECT_LE(q, n * (1.0 + 1e-12));
      if (Q == kInf) {
        EXPECT_LE(n, P / (P - 1.0) * q * (1.0 + 1e-12));
      }
      std::vector<double> scaled = f.levels();
      for (auto& v : scaled) v *= 3.7;
      const StepFunction g(f.breakpoints(), scaled);
      EXPECT_NEAR(lorentz_quasinorm(g, {P, Q}), 3.7 * q, 1e-13 * q);
      // A pointwise smaller profile.
      std::vector<double> smaller = f.levels();
      for (auto& v : smaller) v = std::min(v, 0.6 * f.levels()[0]);
      EXPECT_LE(lorentz_quasinorm(StepFunction(f.breakpoints(), smaller), {P, Q}), q * (1.0 + 1e-14));
    }
  }
}

TEST(RadialI, StepProfiles) {
  EXPECT_DOUBLE_EQ(radial_I_norm({1.0, 2.0}, {0.0, 1.0, 0.0}, 2.0), 1.5);
  EXPECT_EQ(radial_I_norm({1.0}, {0.0, 0.0}, 2.0), 0.0);
  EXPECT_EQ(radial_I_norm({1.0}, {1.0, 0.5}, 2.0), kInf);
  // Additivity over disjoint radial supports.
  const double a = radial_I_norm({0.5, 1.0}, {0.0, 2.0, 0.0}, 2.5);
  const double b = radial_I_norm({1.5, 3.0}, {0.0, 0.7, 0.0}, 2.5);
  const double ab = radial_I_norm({0.5, 1.0, 1.5, 3.0}, {0.0, 2.0, 0.0, 0.7, 0.0}, 2.5);
  EXPECT_NEAR(ab, a + b, 1e-14 * ab);
}

TEST(RadialI, SingularAnnulusFinitenessFlip) {
  for (double beta : {0.3, 0.7, 0.9, 0.99}) {
    auto g = [beta](double, double s) { return std::pow(s, -beta); };
    const auto res = radial_I_norm(g, 1.0, 2.0, 2.0);
    // int_1^2 r (r-1)^{-beta} dr = 1/(1-beta) + 1/(2-beta).
    const double exact = 1.0 / (1.0 - beta) + 1.0 / (2.0 - beta);
    EXPECT_NEAR(res.value, exact, 1e-8 * exact) << beta;
  }
  for (double beta : {1.0, 1.2}) {
    auto g = [beta](double, double s) { return std::pow(s, -beta); };
    EXPECT_EQ(radial_I_norm(g, 1.0, 2.0, 2.0).value, kInf) << beta;
  }
}

TEST(RadialI, TailsAtInfinity) {
  // r^{p-1} r^{-q}: integrable at infinity iff q > p.
  using Profile = std::function<double(double)>;
  auto fast = radial_I_norm(Profile([](double r) { return std::pow(r, -3.5); }), 1.0, kInf, 2.0);
  EXPECT_NEAR(fast.value, 1.0 / 1.5, 1e-8);
  EXPECT_EQ(radial_I_norm(Profile([](double r) { return std::pow(r, -2.0); }), 1.0, kInf, 2.0).value, kInf);
  // A smooth profile on a bounded support: int_0^1 r (1 - r^2) dr = 1/4.
  EXPECT_NEAR(radial_I_norm(Profile([](double r) { return 1.0 - r * r; }), 0.0, 1.0, 2.0).value, 0.25, 1e-9);
}

TEST(EmbeddingConstants, BallFamilyAndQuotedForm) {
  const int N = 3;
  const double p = 2.0;
  EXPECT_DOUBLE_EQ(inverse_power_ball_ratio(N, p), 1.0);
  // The ball-family value is C(N,p) times the weak norm N/(N-p) of t^{-p/N}.
  EXPECT_NEAR(symmetrized_inverse_power_norm_ball_family(N, p),
              weak_lorentz_embedding_constant(N, p) * lorentz_norm(PowerProfile::power_law(1.0, p / N), {N / p, kInf}),
              1e-12);
  EXPECT_NEAR(symmetrized_inverse_power_norm_quoted(N, p), 1.0 / 3.0, 1e-15);
  EXPECT_GT(std::fabs(symmetrized_inverse_power_norm_quoted(N, p) - symmetrized_inverse_power_norm_ball_family(N, p)), 1e-3);
}
