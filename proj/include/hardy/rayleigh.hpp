#pragma once

/// \file rayleigh.hpp
/// Best Hardy constant B_g as the reciprocal of the least Rayleigh quotient
///   R(u) = int |grad u|^p / int g |u|^p,  u >= 0,
/// the residual of the associated weighted p-eigenvalue equation, and a
/// mass-concentration diagnostic for minimizing sequences.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hardy/error.hpp"
#include "hardy/grid.hpp"
#include "hardy/optimize.hpp"
#include "hardy/potential.hpp"

namespace hardy {

struct RayleighProblem {
  DomainPtr domain;
  GridFunction g;
  double p = 2.0;
  SolverConfig config{};
  std::optional<GridFunction> init = std::nullopt;
  /// Iterates kept in the trace, taken at accepted steps 1, 2, 4, 8, ...
  /// and at the end; the latest ones are kept.
  int snapshots = 10;
};

struct Snapshot {
  int iteration = 0;
  double quotient = 0.0;
  GridFunction u;
};

struct RayleighTrace {
  /// R after every accepted step, starting with the initial guess.
  std::vector<double> quotients;
  std::vector<Snapshot> snapshots;
  int reseeds = 0;
  int iterations = 0;
  bool converged = false;
};

struct BestConstant {
  double B = 0.0;
  double quotient = 0.0;
  /// Minimizer normalized to int g u^p = 1.
  GridFunction u;
  double residual = 0.0;
  RayleighTrace trace;
};

inline double rayleigh_quotient(const GridFunction& u, const GridFunction& g, double p) {
  require(same_domain(u.domain_ptr(), g.domain_ptr()), "u and g live on different domains");
  const double mass = integrate_weighted(g, u, p);
  require(mass > 0.0, "int g |u|^p must be positive");
  return gradient_p_energy(u, p) / mass;
}

/// |grad E(u) - lambda grad G(u)| / |grad E(u)|, both gradients taken
/// against every grid direction, where E is the p-Dirichlet energy and
/// G(u) = int g |u|^p. Zero exactly at discrete eigenpairs.
inline double evp_residual(const GridFunction& u, const GridFunction& g, double p, double lambda) {
  require(same_domain(u.domain_ptr(), g.domain_ptr()), "u and g live on different domains");
  require(p > 1.0, "evp_residual needs p > 1");
  check_finite(u, "u");
  const auto& d = u.domain();
  std::vector<double> ge(u.size()), gg(u.size());
  DirichletEnergy(d).value_and_gradient(u.values(), p, 1e-8 / d.min_spacing(), ge);
  weighted_mass(g.values(), u.values(), p, d.cell_volume(), gg);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!d.inside(i)) continue;
    const double r = ge[i] - lambda * gg[i];
    num += r * r;
    den += ge[i] * ge[i];
  }
  require(den > 0.0, "evp_residual of a function with zero energy gradient");
  return std::sqrt(num / den);
}

namespace detail {

/// prod_k sin(pi (x_k - lo_k)/(hi_k - lo_k)) on the mask.
inline std::vector<double> smooth_bump(const GridDomain& d) {
  std::vector<double> u(d.size(), 0.0);
  Point x;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!d.inside(i)) continue;
    d.center(i, x);
    double v = 1.0;
    for (int k = 0; k < d.dim(); ++k) v *= std::sin(M_PI * (x[k] - d.lo()[k] + 0.5 * d.spacing(k)) / (d.hi()[k] - d.lo()[k] + d.spacing(k)));
    u[i] = v;
  }
  return u;
}

inline BestConstant solve_rayleigh(const RayleighProblem& pr, const std::vector<double>& gv, double g_scale,
                                   std::vector<double> u) {
  const auto& d = *pr.domain;
  const double p = pr.p, vol = d.cell_volume();
  const DirichletEnergy energy(d);
  const double eps = 1e-8 / d.min_spacing();
  std::vector<double> ge(d.size()), gg(d.size());

  auto objective = [&](std::span<const double> v, std::span<double> grad) {
    const double E = energy.value_and_gradient(v, p, eps, ge);
    const double G = weighted_mass(gv, v, p, vol, gg);
    if (!(G > 0.0)) return std::numeric_limits<double>::infinity();
    const double R = E / G;
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = (ge[i] - R * gg[i]) / G;
    return R;
  };
  auto project = [&](std::span<double> v) {
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = d.inside(i) ? std::max(v[i], 0.0) : 0.0;
  };
  auto normalize = [&](std::span<double> v) {
    const double G = weighted_mass(gv, v, p, vol);
    const double c = std::pow(G, -1.0 / p);
    for (auto& x : v) x *= c;
    return c;
  };

  // Natural step: inverse curvature of the energy at the normalized guess.
  std::vector<double> tmp = u;
  normalize(tmp);
  double curvature = 0.0;
  for (int k = 0; k < d.dim(); ++k) curvature += 4.0 / (d.spacing(k) * d.spacing(k));
  double grad_scale = 1.0;
  if (p != 2.0) {
    const double E = energy.value(tmp, p);
    double volume = static_cast<double>(d.masked_count()) * vol;
    grad_scale = std::pow(std::max(E / volume, 1e-300), (p - 2.0) / p);
  }
  const double step = 1.0 / (p * std::max(p - 1.0, 1.0) * grad_scale * curvature * vol);

  std::vector<Snapshot> snaps;
  int next_snapshot = 1;
  auto observe = [&](int it, std::span<const double> v, double R) {
    if (pr.snapshots <= 0 || it < next_snapshot) return;
    snaps.push_back({it, R, GridFunction(pr.domain, std::vector<double>(v.begin(), v.end()))});
    next_snapshot *= 2;
  };
  auto res = projected_descent(std::move(u), objective, project, pr.config, step, normalize, observe);

  // Rescale from the normalized weight g / g_scale back to g.
  const double R = res.value / g_scale;
  for (auto& x : res.x) x *= std::pow(g_scale, -1.0 / p);
  BestConstant out{1.0 / R, R, GridFunction(pr.domain, std::move(res.x)), 0.0, {}};
  out.trace.quotients = std::move(res.history);
  for (auto& q : out.trace.quotients) q /= g_scale;
  for (auto& s : snaps) {
    s.quotient /= g_scale;
    s.u = s.u.scaled(std::pow(g_scale, -1.0 / p));
  }
  if (snaps.empty() || snaps.back().iteration != res.iterations)
    snaps.push_back({res.iterations, R, out.u});
  if (static_cast<int>(snaps.size()) > pr.snapshots)
    snaps.erase(snaps.begin(), snaps.end() - std::max(pr.snapshots, 1));
  out.trace.snapshots = std::move(snaps);
  out.trace.iterations = res.iterations;
  out.trace.converged = res.converged;
  out.residual = evp_residual(out.u, pr.g, p, R);
  return out;
}

}  // namespace detail

/// B_g = 1 / min R(u) by accelerated projected gradient on the quotient,
/// renormalizing int g u^p = 1 after every accepted step. Starts from
/// `init`, else from the solution on a coarsened grid, else from a sine
/// bump; an initial guess without weighted mass is replaced by random
/// positive fields, up to five times.
inline BestConstant best_constant(const RayleighProblem& pr) {
  require(pr.domain != nullptr, "Rayleigh problem has no domain");
  require(same_domain(pr.domain, pr.g.domain_ptr()), "g lives on a different grid");
  require(pr.p > 1.0, "Rayleigh quotient needs p > 1");
  pr.config.validate();
  check_finite(pr.g, "g");
  require(pr.g.min_value() >= 0.0, "the Rayleigh solver needs g >= 0");
  const auto& d = *pr.domain;
  const double g_scale = pr.g.max_abs();
  require(g_scale > 0.0, "g has no positive mass: the constraint set is empty");
  std::vector<double> gv(pr.g.values().begin(), pr.g.values().end());
  for (auto& v : gv) v /= g_scale;

  std::vector<double> u;
  if (pr.init) {
    require(same_domain(pr.domain, pr.init->domain_ptr()), "initial guess lives on a different grid");
    u.assign(pr.init->values().begin(), pr.init->values().end());
    for (auto& v : u) v = std::fabs(v);
  } else {
    bool coarse_ok = pr.config.nested;
    for (int k = 0; k < d.dim() && coarse_ok; ++k) coarse_ok = d.cells()[k] >= 24;
    if (coarse_ok) {
      auto coarse = share(d.coarsened());
      GridFunction cg(coarse, bin_average(d, pr.g.values(), *coarse));
      if (cg.max_abs() > 0.0) {
        RayleighProblem sub{coarse, cg, pr.p, pr.config, std::nullopt, 0};
        sub.config.tol_rel_energy = std::max(pr.config.tol_rel_energy, 1e-6);
        const auto sol = best_constant(sub);
        u = interpolate(*coarse, sol.u.values(), d);
      }
    }
    if (u.empty()) u = detail::smooth_bump(d);
  }

  int reseeds = 0;
  std::mt19937_64 rng(pr.config.seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  while (weighted_mass(gv, u, pr.p, d.cell_volume()) <= 0.0) {
    require(reseeds < 5, "int g |u0|^p = 0 for the initial guess and five random reseeds");
    ++reseeds;
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = d.inside(i) ? U(rng) : 0.0;
  }
  auto out = detail::solve_rayleigh(pr, gv, g_scale, std::move(u));
  out.trace.reseeds = reseeds;
  return out;
}

// ---------------------------------------------------------------------------
// Concentration of minimizing sequences.

enum class ConcentrationKind { convergent, concentrating };

inline std::string to_string(ConcentrationKind k) {
  return k == ConcentrationKind::convergent ? "CONVERGENT" : "CONCENTRATING";
}

struct ConcentrationSeries {
  Point center;  // empty for the point at infinity
  /// Fraction of int g |u|^p inside B_r(center), or outside B_R for infinity,
  /// per snapshot.
  std::vector<double> fraction;
  bool concentrating = false;
};

struct ConcentrationReport {
  ConcentrationKind verdict = ConcentrationKind::convergent;
  std::vector<ConcentrationSeries> series;
  /// Index into `series` of the first concentrating center.
  std::optional<std::size_t> witness;
};

struct DiagnosticOptions {
  /// Ball radius as a fraction of each snapshot box's inner radius.
  double radius_fraction = 0.25;
  /// Track the mass outside B_R, R = outer_fraction * inner radius, about the
  /// box center.
  bool include_infinity = false;
  double outer_fraction = 0.75;
  /// Final fraction needed to call a series concentrating.
  double final_fraction = 0.5;
  /// The mass left outside must shrink at least by this factor from the
  /// first to the last snapshot.
  double outside_shrink = 0.75;
  /// Allowed dip between consecutive snapshots.
  double monotone_slack = 1e-3;
};

/// Follows the weighted mass fraction g |u_k|^p near each candidate center
/// along a sequence of snapshots, which may be the iterates of one run or the
/// minimizers of a ladder of boxes. A center is concentrating when its
/// fraction grows towards 1 along the sequence: it never drops by more than
/// `monotone_slack`, the mass outside shrinks by `outside_shrink`, and the
/// last fraction is at least `final_fraction`. One snapshot is never enough.
inline ConcentrationReport concentration_diagnostic(const std::vector<Snapshot>& sequence,
                                                    const std::vector<GridFunction>& weights, double p,
                                                    const std::vector<Point>& centers,
                                                    const DiagnosticOptions& opt = {}) {
  require(!sequence.empty(), "concentration diagnostic needs at least one snapshot");
  require(weights.size() == 1 || weights.size() == sequence.size(),
          "pass one weight per snapshot, or a single shared weight");
  ConcentrationReport rep;
  const std::size_t m = centers.size() + (opt.include_infinity ? 1 : 0);
  rep.series.resize(m);
  for (std::size_t c = 0; c < centers.size(); ++c) rep.series[c].center = centers[c];
  Point x;
  for (std::size_t k = 0; k < sequence.size(); ++k) {
    const auto& u = sequence[k].u;
    const auto& g = weights.size() == 1 ? weights[0] : weights[k];
    require(same_domain(u.domain_ptr(), g.domain_ptr()), "snapshot and weight live on different grids");
    const auto& d = u.domain();
    const double R = d.inner_radius();
    Point mid(d.dim());
    for (int j = 0; j < d.dim(); ++j) mid[j] = 0.5 * (d.lo()[j] + d.hi()[j]);
    std::vector<double> inside(m, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double w = g[i] * std::pow(std::fabs(u[i]), p);
      if (w == 0.0) continue;
      total += w;
      d.center(i, x);
      for (std::size_t c = 0; c < centers.size(); ++c)
        if (distance(x, centers[c]) <= opt.radius_fraction * R) inside[c] += w;
      if (opt.include_infinity && distance(x, mid) > opt.outer_fraction * R) inside[m - 1] += w;
    }
    require(total > 0.0, "snapshot carries no weighted mass");
    for (std::size_t c = 0; c < m; ++c) rep.series[c].fraction.push_back(inside[c] / total);
  }
  for (std::size_t c = 0; c < m; ++c) {
    auto& s = rep.series[c];
    const auto& f = s.fraction;
    bool monotone = f.size() > 1;
    for (std::size_t k = 1; k < f.size(); ++k) monotone = monotone && f[k] >= f[k - 1] - opt.monotone_slack;
    s.concentrating = monotone && f.back() >= opt.final_fraction &&
                      1.0 - f.back() <= opt.outside_shrink * (1.0 - f.front());
    if (s.concentrating && !rep.witness) {
      rep.witness = c;
      rep.verdict = ConcentrationKind::concentrating;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Nested boxes for potentials on all of R^N.

struct LadderStep {
  double L = 0.0;
  std::size_t interior_cells = 0;
  BestConstant result;
  GridFunction g;
};

struct BoxLadder {
  std::vector<LadderStep> steps;
  /// Smallest quotient over every accepted iterate of every box.
  double min_quotient = 0.0;
  /// Smallest final quotient over the boxes, i.e. the best estimate of 1/B_g.
  double best_quotient = 0.0;
  ConcentrationReport diagnostic;
};

/// Minimizes the quotient on the boxes (-L, L)^N with zero boundary values at
/// fixed spacing h, so that B_g(box) increases towards B_g(R^N). The
/// diagnostic follows the box minimizers around the declared singularities,
/// or around the singular point nearest the origin when none are declared.
inline BoxLadder box_ladder(const PotentialSpec& spec, int dim, double p, const std::vector<double>& Ls, double h,
                            const SolverConfig& config = {}, const SamplingOptions& sampling = {},
                            const DiagnosticOptions& diag = {}) {
  require(!Ls.empty(), "box ladder needs at least one L");
  validate(spec, dim, p);
  BoxLadder out;
  out.min_quotient = out.best_quotient = std::numeric_limits<double>::infinity();
  std::vector<Snapshot> finals;
  std::vector<GridFunction> weights;
  for (double L : Ls) {
    require(L > 0.0 && h > 0.0 && h < L, "box ladder needs 0 < h < L");
    const auto interior = static_cast<std::size_t>(std::lround(2.0 * L / h)) - 1;
    auto d = share(GridDomain::node_aligned_cube(dim, -L, L, interior));
    auto g = sample_potential(spec, d, sampling);
    RayleighProblem pr{d, g, p, config, std::nullopt, 10};
    auto res = best_constant(pr);
    for (double q : res.trace.quotients) out.min_quotient = std::min(out.min_quotient, q);
    out.best_quotient = std::min(out.best_quotient, res.quotient);
    finals.push_back({res.trace.iterations, res.quotient, res.u});
    weights.push_back(g);
    out.steps.push_back({L, interior, std::move(res), std::move(g)});
  }
  std::vector<Point> centers;
  for (const auto& s : spec.declared_singularities) centers.push_back(s);
  if (centers.empty()) {
    if (auto c = project_to_singular_set(spec, Point(dim, 0.0))) centers.push_back(*c);
  }
  out.diagnostic = concentration_diagnostic(finals, weights, p, centers, diag);
  return out;
}

}  // namespace hardy
