#pragma once

/// \file capacity.hpp
/// Variational p-capacity of a compact set relative to a grid domain.

#include <algorithm>
#include <cmath>
#include <array>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hardy/error.hpp"
#include "hardy/grid.hpp"
#include "hardy/optimize.hpp"

namespace hardy {

struct CapacityProblem {
  DomainPtr domain;
  CompactSet obstacle;
  double p = 2.0;
  SolverConfig solver{};
};

struct CapacityResult {
  double value = 0.0;
  GridFunction minimizer;
  bool converged = false;
  int iterations = 0;
  std::vector<double> energy_history;
};

/// N omega_N ((N - p)/(p - 1))^{p-1} r^{N-p}, the capacity of B_r in R^N.
inline double capacity_ball_analytic(int N, double p, double r) {
  require(N >= 2, "ball capacity needs N >= 2");
  require(p > 1.0 && p < N, "ball capacity needs 1 < p < N");
  require(r > 0.0 && std::isfinite(r), "ball radius must be positive");
  return N * unit_ball_volume(N) * std::pow((N - p) / (p - 1.0), p - 1.0) * std::pow(r, N - p);
}

namespace detail {

inline void validate(const CapacityProblem& pr) {
  require(pr.domain != nullptr, "capacity problem has no domain");
  require(same_domain(pr.domain, pr.obstacle.domain_ptr()), "obstacle lives on a different grid");
  const int n = pr.domain->dim();
  require(pr.p > 1.0 && pr.p < n, "capacity needs 1 < p < N");
  require(pr.domain->masked_count() > 0, "domain mask is empty");
  require(pr.obstacle.compactly_contained(), "obstacle must be compactly contained in the domain");
  pr.solver.validate();
}

struct BallFit {
  Point center;
  double radius = 0.0;
  bool ball_like = false;
};

/// Ball of the same measure about the centroid; ball_like when F and that
/// ball differ only within one cell diagonal of the sphere.
inline BallFit fit_ball(const CompactSet& F) {
  const auto& d = F.domain();
  const int n = d.dim();
  BallFit fit;
  fit.center.assign(n, 0.0);
  const auto count = F.count();
  if (count == 0) return fit;
  Point x;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!F.contains(i)) continue;
    d.center(i, x);
    for (int k = 0; k < n; ++k) fit.center[k] += x[k];
  }
  for (auto& c : fit.center) c /= static_cast<double>(count);
  fit.radius = std::pow(F.measure() / unit_ball_volume(n), 1.0 / n);
  double diag = 0.0;
  for (int k = 0; k < n; ++k) diag += d.spacing(k) * d.spacing(k);
  diag = std::sqrt(diag);
  fit.ball_like = true;
  for (std::size_t i = 0; i < d.size() && fit.ball_like; ++i) {
    if (!d.inside(i)) continue;
    d.center(i, x);
    const double r = distance(x, fit.center);
    if (F.contains(i) ? r > fit.radius + diag : r < fit.radius - diag) fit.ball_like = false;
  }
  return fit;
}

/// Distance from x to the nearest zero-closed face of the box.
inline double distance_to_zero_faces(const GridDomain& d, const Point& x) {
  double r = std::numeric_limits<double>::infinity();
  for (int k = 0; k < d.dim(); ++k) {
    if (d.closure(k, false) == Closure::zero) r = std::min(r, x[k] - d.lo()[k]);
    if (d.closure(k, true) == Closure::zero) r = std::min(r, d.hi()[k] - x[k]);
  }
  return r;
}

/// Radial capacitary profile of the fitted ball when F is ball-like,
/// otherwise the indicator of F averaged with its axis neighbours.
inline std::vector<double> initial_guess(const CapacityProblem& pr) {
  const auto& d = *pr.domain;
  const auto& F = pr.obstacle;
  const int n = d.dim();
  std::vector<double> u(d.size(), 0.0);
  const auto fit = fit_ball(F);
  if (fit.ball_like && fit.radius > 0.0) {
    const double gamma = (n - pr.p) / (pr.p - 1.0);
    const double outer = distance_to_zero_faces(d, fit.center);
    const double a = std::pow(fit.radius, -gamma);
    const double b = std::isfinite(outer) && outer > fit.radius ? std::pow(outer, -gamma) : 0.0;
    Point x;
    for (std::size_t i = 0; i < d.size(); ++i) {
      d.center(i, x);
      const double r = std::max(distance(x, fit.center), fit.radius);
      u[i] = std::clamp((std::pow(r, -gamma) - b) / (a - b), 0.0, 1.0);
    }
    return u;
  }
  std::array<std::size_t, kMaxDim> c{};
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (F.contains(i)) {
      u[i] = 1.0;
      continue;
    }
    d.multi_index(i, c);
    int hits = 0, total = 0;
    for (int k = 0; k < n; ++k) {
      const auto s = d.strides()[k];
      if (c[k] > 0) {
        ++total;
        hits += F.contains(i - s);
      }
      if (c[k] + 1 < d.cells()[k]) {
        ++total;
        hits += F.contains(i + s);
      }
    }
    if (hits > 0) u[i] = static_cast<double>(hits) / (2.0 * total);
  }
  return u;
}

inline CapacityResult solve(const CapacityProblem& pr, std::vector<double> u) {
  const auto& d = *pr.domain;
  const std::size_t size = d.size();
  // 0: free, 1: pinned to one, 2: pinned to zero.
  std::vector<std::uint8_t> kind(size, 0);
  for (std::size_t i = 0; i < size; ++i) kind[i] = pr.obstacle.contains(i) ? 1 : (d.inside(i) ? 0 : 2);
  auto project = [&](std::span<double> v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (kind[i] == 1) v[i] = 1.0;
      else if (kind[i] == 2) v[i] = 0.0;
      else v[i] = std::clamp(v[i], 0.0, 1.0);
    }
  };
  const DirichletEnergy energy(d);
  const double eps = 1e-8 / d.min_spacing();
  const double p = pr.p;
  auto objective = [&](std::span<const double> v, std::span<double> g) {
    return energy.value_and_gradient(v, p, eps, g);
  };
  double curvature = 0.0;
  for (int k = 0; k < d.dim(); ++k) curvature += 4.0 / (d.spacing(k) * d.spacing(k));
  const double step = 1.0 / (p * curvature * d.cell_volume());
  auto res = projected_descent(std::move(u), objective, project, pr.solver, step);
  CapacityResult out{energy.value(res.x, p), GridFunction(pr.domain, std::move(res.x)), res.converged, res.iterations,
                     std::move(res.history)};
  return out;
}

}  // namespace detail

/// Cap_p(F, Omega): the least p-Dirichlet energy over 0 <= u <= 1 with u = 1
/// on F and u = 0 off the mask. Minimized by accelerated projected gradient,
/// optionally warm-started from the same problem on a coarsened grid. An
/// unconverged run returns its best value with `converged` false.
inline CapacityResult capacity(const CapacityProblem& pr) {
  detail::validate(pr);
  if (pr.obstacle.empty()) {
    return {0.0, GridFunction(pr.domain), true, 0, {0.0}};
  }
  const auto& d = *pr.domain;
  std::vector<double> guess;
  bool coarse_ok = pr.solver.nested;
  for (int k = 0; k < d.dim() && coarse_ok; ++k) coarse_ok = d.cells()[k] >= 24;
  if (coarse_ok) {
    auto coarse = d.coarsened();
    auto coarse_ptr = share(coarse);
    CompactSet coarse_F(coarse_ptr, sample_mask(d, pr.obstacle.member(), coarse));
    if (!coarse_F.empty() && coarse_F.compactly_contained()) {
      CapacityProblem sub{coarse_ptr, coarse_F, pr.p, pr.solver};
      sub.solver.tol_rel_energy = std::max(pr.solver.tol_rel_energy, 1e-6);
      const auto sol = capacity(sub);
      guess = interpolate(coarse, sol.minimizer.values(), d);
    }
  }
  if (guess.empty()) guess = detail::initial_guess(pr);
  return detail::solve(pr, std::move(guess));
}

// ---------------------------------------------------------------------------
// Checks of the algebraic properties of capacity.

enum class CapacityProperty { monotone_in_set, monotone_in_domain, scaling, subadditivity, isometry };

inline std::string to_string(CapacityProperty p) {
  switch (p) {
    case CapacityProperty::monotone_in_set: return "monotone_in_set";
    case CapacityProperty::monotone_in_domain: return "monotone_in_domain";
    case CapacityProperty::scaling: return "scaling";
    case CapacityProperty::subadditivity: return "subadditivity";
    case CapacityProperty::isometry: return "isometry";
  }
  return "?";
}

/// One property hypothesis encoded as problems:
///   monotone_in_set:    first.F subset of second.F, same domain
///   monotone_in_domain: first on the larger domain, second on the smaller
///   scaling:            second is first dilated by `lambda`
///   subadditivity:      first = F1, second = F2, third = F1 union F2
///   isometry:           second is an isometric image of first
struct CapacityCheck {
  CapacityProperty property;
  CapacityProblem first, second;
  std::optional<CapacityProblem> third;
  double lambda = 1.0;
};

struct CapacityCheckRow {
  std::string property;
  double lhs = 0.0, rhs = 0.0;
  bool pass = false;
};

struct CapacityPropertyReport {
  std::vector<CapacityCheckRow> rows;
  /// Largest |F| / Cap_p(F)^{N/(N-p)} seen across all solved problems.
  double measure_constant = 0.0;
  bool all_pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.pass; });
  }
};

/// Relative tolerance absorbing discretization in the property checks; the
/// isometry check uses the tighter `isometry_tolerance`.
inline constexpr double kPropertyTolerance = 0.10;
inline constexpr double kIsometryTolerance = 0.02;

inline CapacityPropertyReport check_capacity_properties(const std::vector<CapacityCheck>& checks) {
  CapacityPropertyReport rep;
  auto solve = [&](const CapacityProblem& pr) {
    const double cap = capacity(pr).value;
    const int n = pr.domain->dim();
    if (cap > 0.0) rep.measure_constant = std::max(rep.measure_constant, pr.obstacle.measure() / std::pow(cap, n / (n - pr.p)));
    return cap;
  };
  for (const auto& c : checks) {
    CapacityCheckRow row{to_string(c.property)};
    const double a = solve(c.first), b = solve(c.second);
    switch (c.property) {
      case CapacityProperty::monotone_in_set:
        require(c.first.obstacle.subset_of(c.second.obstacle), "monotone_in_set needs nested obstacles");
        row.lhs = a;
        row.rhs = b;
        row.pass = a <= b * (1.0 + kPropertyTolerance);
        break;
      case CapacityProperty::monotone_in_domain:
        row.lhs = a;
        row.rhs = b;
        row.pass = a <= b * (1.0 + kPropertyTolerance);
        break;
      case CapacityProperty::scaling: {
        const int n = c.first.domain->dim();
        row.lhs = b / a;
        row.rhs = std::pow(c.lambda, n - c.first.p);
        row.pass = std::fabs(row.lhs / row.rhs - 1.0) <= kPropertyTolerance;
        break;
      }
      case CapacityProperty::subadditivity: {
        require(c.third.has_value(), "subadditivity needs the union problem");
        row.lhs = solve(*c.third);
        row.rhs = a + b;
        row.pass = row.lhs <= row.rhs * (1.0 + kPropertyTolerance);
        break;
      }
      case CapacityProperty::isometry:
        row.lhs = b;
        row.rhs = a;
        row.pass = std::fabs(b / a - 1.0) <= kIsometryTolerance;
        break;
    }
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

struct LocalizedCapacity {
  double lhs = 0.0, rhs = 0.0, ratio = 1.0;
};

/// Cap_p(F cap B_r(x), Omega cap B_2r(x)) against Cap_p(F cap B_r(x), Omega).
/// The doubled ball must lie inside the grid box.
inline LocalizedCapacity localized_capacity_comparison(const CompactSet& F, const Point& x, double r, double p,
                                                       const SolverConfig& solver = {}) {
  const auto& d = F.domain();
  const int n = d.dim();
  require(static_cast<int>(x.size()) == n, "center has the wrong dimension");
  require(r > 0.0, "radius must be positive");
  for (int k = 0; k < n; ++k)
    require(x[k] - 2.0 * r >= d.lo()[k] && x[k] + 2.0 * r <= d.hi()[k], "the doubled ball does not fit the grid box");
  const auto local = F.intersect(CompactSet::ball(F.domain_ptr(), x, r));
  require(!local.empty(), "F does not meet B_r(x)");

  auto win = make_window(d, x, 2.0 * r, Closure::zero);
  win.domain.set_closure(Closure::zero);
  Mask m = win.domain.mask();
  Point y;
  for (std::size_t i = 0; i < m.size(); ++i) {
    win.domain.center(i, y);
    if (distance(y, x) >= 2.0 * r) m[i] = 0;
  }
  win.domain.set_mask(std::move(m));
  const auto wptr = share(win.domain);
  CompactSet local_in_window(wptr, win.restrict_values<std::uint8_t>(d, local.member()));

  LocalizedCapacity out;
  out.lhs = capacity({wptr, local_in_window, p, solver}).value;
  out.rhs = capacity({F.domain_ptr(), local, p, solver}).value;
  out.ratio = out.lhs / out.rhs;
  return out;
}

}  // namespace hardy
