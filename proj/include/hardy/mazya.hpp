#pragma once

/// \file mazya.hpp
/// Lower bounds for the Maz'ya norm
///   |g| = sup_F int_F g / Cap_p(F, Omega)
/// over explicit set families, concentration functions C_g(x) and C_g(inf)
/// on radius ladders, the singular set, and the compactness and attainment
/// verdicts built from them.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hardy/capacity.hpp"
#include "hardy/error.hpp"
#include "hardy/grid.hpp"
#include "hardy/potential.hpp"

namespace hardy {

/// C_H = p^p (p-1)^{1-p}.
inline double hardy_constant(double p) {
  require(p > 1.0, "C_H needs p > 1");
  return std::pow(p, p) * std::pow(p - 1.0, 1.0 - p);
}

namespace detail {

/// Runs f(0), ..., f(n-1) on up to `threads` workers. Each index writes its
/// own output slot, so results do not depend on scheduling.
template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline std::string format_point(const Point& x) {
  std::ostringstream s;
  s.precision(6);
  s << '(';
  for (std::size_t k = 0; k < x.size(); ++k) s << (k ? "," : "") << x[k];
  s << ')';
  return s.str();
}

/// Value at quantile q of the positive entries of v restricted to `where`.
inline std::optional<double> positive_quantile(std::span<const double> v, const Mask& where, double q) {
  std::vector<double> s;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (where[i] && v[i] > 0.0) s.push_back(v[i]);
  if (s.empty()) return std::nullopt;
  const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(s.size() - 1)));
  std::nth_element(s.begin(), s.begin() + static_cast<long>(k), s.end());
  return s[k];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Lower bounds over set families.

struct FamilyMember {
  std::string descriptor;
  CompactSet set;
};

struct FamilyEntry {
  std::string descriptor;
  double integral = 0.0;
  double capacity = 0.0;
  double ratio = 0.0;
  bool converged = true;
};

struct MazyaEstimate {
  /// Best ratio found; max over family_log.
  double lower = 0.0;
  std::vector<FamilyEntry> family_log;
  /// B_g estimate, when one has been paired with the bound.
  std::optional<double> upper;
  std::optional<std::size_t> best;
};

struct FamilyOptions {
  /// Lattice balls per axis; 0 leaves them out.
  int lattice_per_axis = 3;
  /// Ball radii as fractions of the box inner radius.
  std::vector<double> radius_fractions{0.5, 0.25};
  std::vector<double> quantiles{0.5, 0.9, 0.99};
  /// Adds balls and annuli about this point, for radial g.
  std::optional<Point> radial_center;
};

/// Evenly spread lattice points in the box, snapped to cell centers of the
/// mask.
inline std::vector<Point> center_lattice(const GridDomain& d, int per_axis) {
  require(per_axis > 0, "center lattice needs at least one point per axis");
  const int n = d.dim();
  std::size_t total = 1;
  for (int k = 0; k < n; ++k) total *= static_cast<std::size_t>(per_axis);
  std::vector<Point> out;
  Point x(n);
  for (std::size_t t = 0; t < total; ++t) {
    std::size_t rest = t;
    for (int k = 0; k < n; ++k) {
      const auto i = rest % static_cast<std::size_t>(per_axis);
      rest /= static_cast<std::size_t>(per_axis);
      x[k] = d.lo()[k] + (static_cast<double>(i) + 0.5) / per_axis * (d.hi()[k] - d.lo()[k]);
    }
    const auto c = d.cell_containing(x);
    if (c && d.inside(*c)) out.push_back(d.center(*c));
  }
  return out;
}

/// Balls on a center lattice times a radius ladder, superlevel sets of g at
/// a quantile ladder, and balls and annuli about a radial center. Every set
/// is trimmed away from the zero boundary; empty sets are dropped.
inline std::vector<FamilyMember> default_family(const GridFunction& g, const FamilyOptions& opt = {}) {
  const auto& dp = g.domain_ptr();
  const auto& d = *dp;
  const double R = d.inner_radius();
  std::vector<FamilyMember> out;
  auto add = [&](std::string name, CompactSet F) {
    F = F.trimmed();
    if (!F.empty()) out.push_back({std::move(name), std::move(F)});
  };
  const auto lattice = opt.lattice_per_axis > 0 ? center_lattice(d, opt.lattice_per_axis) : std::vector<Point>{};
  for (const auto& c : lattice)
    for (double f : opt.radius_fractions)
      add("ball" + detail::format_point(c) + " r=" + std::to_string(f * R), CompactSet::ball(dp, c, f * R));
  Mask all(d.size(), 1);
  for (double q : opt.quantiles) {
    if (const auto t = detail::positive_quantile(g.values(), all, q)) {
      add("superlevel q=" + std::to_string(q),
          CompactSet::where(dp, [&](std::size_t i, const Point&) { return g[i] >= *t && g[i] > 0.0; }));
    }
  }
  if (opt.radial_center) {
    const Point& c = *opt.radial_center;
    for (double f : {0.125, 0.25, 0.5, 0.9}) add("ball" + detail::format_point(c) + " r=" + std::to_string(f * R), CompactSet::ball(dp, c, f * R));
    for (auto [a, b] : {std::pair{0.125, 0.25}, std::pair{0.25, 0.5}, std::pair{0.5, 0.9}}) {
      add("annulus" + detail::format_point(c) + " " + std::to_string(a * R) + ".." + std::to_string(b * R),
          CompactSet::where(dp, [&](std::size_t, const Point& x) {
            const double r = distance(x, c);
            return r >= a * R && r <= b * R;
          }));
    }
  }
  return out;
}

/// max over the family of int_F g / Cap_p(F, Omega). The capacities come
/// from feasible potentials, so they can only be too large and the ratio
/// stays a lower bound for |g| on the grid.
inline MazyaEstimate mazya_lower_bound(const GridFunction& g, double p, const std::vector<FamilyMember>& family,
                                       const SolverConfig& solver = {}, int threads = 1) {
  require(!family.empty(), "the set family is empty");
  check_finite(g, "g");
  require(g.min_value() >= 0.0, "pass |g|: the Maz'ya norm is defined for g >= 0");
  for (const auto& m : family)
    require(same_domain(m.set.domain_ptr(), g.domain_ptr()), "family set '" + m.descriptor + "' lives on another grid");
  MazyaEstimate out;
  out.family_log.resize(family.size());
  detail::parallel_for(family.size(), threads, [&](std::size_t i) {
    const auto& m = family[i];
    FamilyEntry e{m.descriptor, integrate_over(g, m.set), 0.0, 0.0, true};
    if (!m.set.empty() && e.integral > 0.0) {
      const auto cap = capacity({g.domain_ptr(), m.set, p, solver});
      e.capacity = cap.value;
      e.converged = cap.converged;
      e.ratio = cap.value > 0.0 ? e.integral / cap.value : 0.0;
    }
    out.family_log[i] = std::move(e);
  });
  for (std::size_t i = 0; i < out.family_log.size(); ++i) {
    if (!out.best || out.family_log[i].ratio > out.lower) {
      out.lower = out.family_log[i].ratio;
      out.best = i;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Concentration functions.

struct LadderEntry {
  double r = 0.0;
  /// Running maximum of the family ratios down to this radius.
  double value = 0.0;
  /// Data of the best set at this radius.
  double integral = 0.0;
  double capacity = 0.0;
  std::string descriptor;
  double spacing = 0.0;
};

struct CenterLadder {
  Point center;
  bool at_infinity = false;
  /// Radii in decreasing order for points, increasing order for infinity, so
  /// the neighbourhood shrinks along the ladder.
  std::vector<LadderEntry> ladder;
  /// Value at the smallest neighbourhood; the limit is not extrapolated.
  double estimate = 0.0;
  /// Decay rate of the ladder in log-log scale (r^slope for points,
  /// R^{-slope} for infinity); infinite once the ladder hits zero.
  double slope = 0.0;
  bool decaying = true;
  std::string label() const { return at_infinity ? "inf" : detail::format_point(center); }
};

struct ConcentrationMap {
  int dim = 0;
  double p = 2.0;
  std::vector<CenterLadder> centers;
  /// Median over decaying ladders with positive estimate of the estimate one
  /// rung further.
  double noise_floor = 0.0;
  std::vector<std::string> warnings;
  bool limit_extrapolated = false;
};

struct ConcentrationOptions {
  /// Explicit centers; when empty a lattice plus `seeds` is used.
  std::vector<Point> centers;
  /// Points per axis of the default lattice; 0 picks floor(27^{1/N}), about
  /// 27 points in total.
  int lattice_per_axis = 0;
  /// Known singular points, e.g. from PotentialSpec::declared_singularities.
  std::vector<Point> seeds;
  /// Nearest point of the singular set; lattice points are projected too.
  std::function<std::optional<Point>(const Point&)> project;
  /// Explicit radii; when empty r_k = r_min 2^k, r_min = 4h, k < levels.
  std::vector<double> radii;
  int levels = 3;
  /// Solve each rung on a coarsened grid with about four cells per radius.
  bool coarsen_ladder = true;
  /// Window half-width in units of r; cut faces get far-field closures.
  double window_factor = 2.0;
  /// Resolution of windows sampled from a potential description.
  double cells_per_radius = 4.0;
  SamplingOptions sampling{};
  /// Superlevel quantiles of g restricted to the ball.
  std::vector<double> quantiles{0.5, 0.9};
  /// Rungs, counted from the smallest neighbourhood, used for the slope.
  int slope_rungs = 2;
  /// Adds the point at infinity; defaults to domains with far-field faces.
  std::optional<bool> include_infinity;
  int threads = 1;
  SolverConfig solver{};
};

/// Seeds and projection taken from a potential description.
inline ConcentrationOptions concentration_options_for(const PotentialSpec& spec, ConcentrationOptions opt = {}) {
  for (const auto& s : spec.declared_singularities) opt.seeds.push_back(s);
  auto shared = std::make_shared<PotentialSpec>(spec);
  opt.project = [shared](const Point& x) { return project_to_singular_set(*shared, x); };
  return opt;
}

namespace detail {

/// Memoizes capacities of window problems written in window-local
/// coordinates, so translated copies of the same problem are solved once.
/// The key captures every input of the solve, which keeps the cached values
/// independent of which thread filled them.
class CapacityCache {
 public:
  double get(const GridDomain& local, const Mask& F, double p, const SolverConfig& cfg) {
    std::string key = make_key(local, F, p);
    {
      std::lock_guard lock(mutex_);
      if (auto it = values_.find(key); it != values_.end()) return it->second;
    }
    auto dp = share(local);
    const double v = capacity({dp, CompactSet(dp, F), p, cfg}).value;
    std::lock_guard lock(mutex_);
    values_.emplace(std::move(key), v);
    return v;
  }

 private:
  static std::string make_key(const GridDomain& d, const Mask& F, double p) {
    std::string k;
    auto put = [&k](const void* data, std::size_t n) { k.append(static_cast<const char*>(data), n); };
    put(&p, sizeof p);
    for (int j = 0; j < d.dim(); ++j) {
      const double h = d.spacing(j);
      const std::size_t c = d.cells()[j];
      put(&h, sizeof h);
      put(&c, sizeof c);
      const int lo = static_cast<int>(d.closure(j, false)), hi = static_cast<int>(d.closure(j, true));
      put(&lo, sizeof lo);
      put(&hi, sizeof hi);
      const double ff = d.far_field_center().empty() ? 0.0 : d.far_field_center()[j];
      put(&ff, sizeof ff);
    }
    put(d.mask().data(), d.mask().size());
    put(F.data(), F.size());
    return k;
  }
  std::mutex mutex_;
  std::map<std::string, double> values_;
};

/// Copy of a window domain moved so that its box starts at the origin.
inline GridDomain localized_copy(const GridDomain& w) {
  const int n = w.dim();
  std::vector<double> lo(n, 0.0), hi(n);
  // Spacings rounded to 40 significant bits so that translated windows,
  // whose spacings differ in the last bits, give the same problem.
  for (int k = 0; k < n; ++k) {
    const double h = w.spacing(k);
    const int e = std::ilogb(h);
    hi[k] = static_cast<double>(w.cells()[k]) * std::ldexp(std::round(std::ldexp(h, 40 - e)), e - 40);
  }
  GridDomain out(lo, hi, w.cells());
  out.set_mask(w.mask());
  for (int k = 0; k < n; ++k) {
    out.set_closure(k, false, w.closure(k, false));
    out.set_closure(k, true, w.closure(k, true));
  }
  if (w.has_far_field()) {
    Point c = w.far_field_center();
    for (int k = 0; k < n; ++k) c[k] = std::round(std::ldexp(c[k] - w.lo()[k], 30)) * std::ldexp(1.0, -30);
    out.set_far_field_center(std::move(c));
  }
  return out;
}

struct Level {
  DomainPtr domain;
  GridFunction g;
};

inline std::vector<Level> coarse_levels(const GridFunction& g, int count) {
  std::vector<Level> out{{g.domain_ptr(), g}};
  while (static_cast<int>(out.size()) < count) {
    const auto& d = *out.back().domain;
    bool ok = true;
    for (int k = 0; k < d.dim(); ++k) ok = ok && d.cells()[k] >= 16;
    if (!ok) break;
    auto c = share(d.coarsened());
    GridFunction cg(c, bin_average(d, out.back().g.values(), *c));
    auto& v = cg.mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i)
      if (!c->inside(i)) v[i] = 0.0;
    out.push_back({c, std::move(cg)});
  }
  return out;
}

struct RungResult {
  double value = 0.0, integral = 0.0, capacity = 0.0;
  std::string descriptor;
};

/// Best family ratio of g restricted to B_r(x) on a window around x. `win`
/// is in global coordinates, `gw` holds g on its cells.
inline RungResult ball_rung_on(const GridDomain& win, std::span<const double> gw, const Point& x, double r,
                               double p, const ConcentrationOptions& opt, CapacityCache& cache) {
  const auto local = localized_copy(win);
  const auto vol = local.cell_volume();
  const int n = win.dim();
  // Offsets from x in local index coordinates keep ball masks identical for
  // translated windows.
  Point xl(n);
  for (int k = 0; k < n; ++k) xl[k] = x[k] - win.lo()[k];
  Mask ball(local.size(), 0), half(local.size(), 0);
  Point y;
  for (std::size_t i = 0; i < ball.size(); ++i) {
    if (!local.inside(i)) continue;
    local.center(i, y);
    const double dist = distance(y, xl);
    ball[i] = dist <= r ? 1 : 0;
    half[i] = dist <= 0.5 * r ? 1 : 0;
  }
  std::vector<std::pair<std::string, Mask>> sets;
  sets.emplace_back("ball r=" + std::to_string(r), ball);
  sets.emplace_back("ball r=" + std::to_string(0.5 * r), half);
  for (double q : opt.quantiles) {
    if (const auto t = positive_quantile(gw, ball, q)) {
      Mask m(local.size(), 0);
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = ball[i] && gw[i] >= *t ? 1 : 0;
      sets.emplace_back("superlevel q=" + std::to_string(q) + " in r=" + std::to_string(r), std::move(m));
    }
  }
  auto dp = share(local);
  RungResult best;
  std::vector<Mask> seen;
  for (auto& [name, m] : sets) {
    auto F = CompactSet(dp, m).trimmed();
    if (F.empty()) continue;
    if (std::find(seen.begin(), seen.end(), F.member()) != seen.end()) continue;
    seen.push_back(F.member());
    double integral = 0.0;
    for (std::size_t i = 0; i < gw.size(); ++i)
      if (F.contains(i)) integral += gw[i];
    integral *= vol;
    if (integral <= 0.0) continue;
    const double cap = cache.get(local, F.member(), p, opt.solver);
    if (cap > 0.0 && integral / cap > best.value) best = {integral / cap, integral, cap, name};
  }
  return best;
}

/// Ball rung on a window cut from a grid level.
inline RungResult ball_rung(const Level& lv, const Point& x, double r, double p, const ConcentrationOptions& opt,
                            CapacityCache& cache) {
  const auto& d = *lv.domain;
  auto win = make_window(d, x, opt.window_factor * r, Closure::far_field);
  return ball_rung_on(win.domain, win.restrict_values<double>(d, lv.g.values()), x, r, p, opt, cache);
}

/// Window of half-width `half` around x with the given spacing, clipped to
/// the parent box. Clipped faces keep the parent closure, cut faces are far
/// field; the mask is sampled from the parent.
inline GridDomain sampled_window(const GridDomain& parent, const Point& x, double half, double spacing) {
  const int n = parent.dim();
  std::vector<double> lo(n), hi(n);
  std::vector<std::size_t> cells(n);
  std::array<bool, kMaxDim> at_lo{}, at_hi{};
  for (int k = 0; k < n; ++k) {
    at_lo[k] = x[k] - half <= parent.lo()[k];
    at_hi[k] = x[k] + half >= parent.hi()[k];
    lo[k] = at_lo[k] ? parent.lo()[k] : x[k] - half;
    const double top = at_hi[k] ? parent.hi()[k] : x[k] + half;
    cells[k] = static_cast<std::size_t>(std::max(1L, std::lround((top - lo[k]) / spacing)));
    hi[k] = at_hi[k] ? top : lo[k] + static_cast<double>(cells[k]) * spacing;
  }
  GridDomain w(lo, hi, cells);
  Mask m(w.size(), 1);
  Point y;
  for (std::size_t i = 0; i < m.size(); ++i) {
    w.center(i, y);
    const auto c = parent.cell_containing(y);
    m[i] = c && parent.inside(*c) ? 1 : 0;
  }
  w.set_mask(std::move(m));
  for (int k = 0; k < n; ++k) {
    w.set_closure(k, false, at_lo[k] ? parent.closure(k, false) : Closure::far_field);
    w.set_closure(k, true, at_hi[k] ? parent.closure(k, true) : Closure::far_field);
  }
  if (w.has_far_field()) {
    Point c = x;
    for (int k = 0; k < n; ++k) {
      const double margin = 0.25 * w.spacing(k);
      c[k] = std::clamp(c[k], w.lo()[k] + margin, w.hi()[k] - margin);
    }
    w.set_far_field_center(std::move(c));
  }
  return w;
}

/// Ball rung with g sampled from its description on a window of about
/// `cells_per_radius` cells per radius, independent of any global grid.
inline RungResult sampled_ball_rung(const PotentialSpec& spec, const GridDomain& parent, const Point& x, double r,
                                    double p, const ConcentrationOptions& opt, CapacityCache& cache) {
  const auto win = sampled_window(parent, x, opt.window_factor * r, r / opt.cells_per_radius);
  const auto dp = share(win);
  const auto g = sample_potential(spec, dp, opt.sampling);
  return ball_rung_on(win, g.values(), x, r, p, opt, cache);
}

/// Best family ratio of g restricted to the complement of B_R(mid).
inline RungResult infinity_rung(const Level& lv, const Point& mid, double R, double p, const ConcentrationOptions& opt,
                                CapacityCache& cache) {
  const auto& d = *lv.domain;
  Mask outside(d.size(), 0);
  Point y;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!d.inside(i)) continue;
    d.center(i, y);
    outside[i] = distance(y, mid) >= R ? 1 : 0;
  }
  std::vector<std::pair<std::string, Mask>> sets;
  sets.emplace_back("shell R=" + std::to_string(R), outside);
  for (double q : opt.quantiles) {
    if (const auto t = positive_quantile(lv.g.values(), outside, q)) {
      Mask m(d.size(), 0);
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = outside[i] && lv.g[i] >= *t ? 1 : 0;
      sets.emplace_back("superlevel q=" + std::to_string(q) + " beyond R=" + std::to_string(R), std::move(m));
    }
  }
  RungResult best;
  std::vector<Mask> seen;
  for (auto& [name, m] : sets) {
    auto F = CompactSet(lv.domain, m).trimmed();
    if (F.empty()) continue;
    if (std::find(seen.begin(), seen.end(), F.member()) != seen.end()) continue;
    seen.push_back(F.member());
    const double integral = integrate_over(lv.g, F);
    if (integral <= 0.0) continue;
    const double cap = cache.get(*lv.domain, F.member(), p, opt.solver);
    if (cap > 0.0 && integral / cap > best.value) best = {integral / cap, integral, cap, name};
  }
  return best;
}

/// Least-squares slope of log v against log s over the positive values.
inline double loglog_slope(const std::vector<double>& s, const std::vector<double>& v) {
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (v[k] <= 0.0) continue;
    const double a = std::log(s[k]), b = std::log(v[k]);
    n += 1;
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  if (n < 2) return 0.0;
  const double den = n * sxx - sx * sx;
  return den > 0.0 ? (n * sxy - sx * sy) / den : 0.0;
}

inline void add_unique(std::vector<Point>& pts, Point x, double tol) {
  for (const auto& q : pts)
    if (distance(q, x) <= tol) return;
  pts.push_back(std::move(x));
}

}  // namespace detail

namespace detail {

inline std::vector<Point> ladder_centers(const GridDomain& d, const ConcentrationOptions& opt) {
  const int n = d.dim();
  std::vector<Point> centers;
  if (!opt.centers.empty()) {
    for (const auto& c : opt.centers) {
      require(static_cast<int>(c.size()) == n, "center has the wrong dimension");
      add_unique(centers, c, 0.0);
    }
    return centers;
  }
  const double tol = 0.5 * d.min_spacing();
  int per_axis = opt.lattice_per_axis;
  if (per_axis <= 0) per_axis = static_cast<int>(std::floor(std::pow(27.0, 1.0 / n) + 1e-9));
  const auto lattice = center_lattice(d, per_axis);
  auto in_box = [&](const Point& x) {
    const auto c = d.cell_containing(x);
    return c && d.inside(*c);
  };
  for (const auto& s : opt.seeds)
    if (static_cast<int>(s.size()) == n && in_box(s)) add_unique(centers, s, tol);
  if (opt.project) {
    for (const auto& x : lattice)
      if (auto q = opt.project(x); q && in_box(*q)) add_unique(centers, *q, tol);
  }
  for (const auto& x : lattice) add_unique(centers, x, tol);
  return centers;
}

/// Evaluates every (center, rung) pair and assembles the ladders. `ball`
/// computes one point rung, `spacing` reports the grid spacing used at a
/// radius; `inf` is the level for infinity, or null.
inline ConcentrationMap assemble_ladders(
    const GridDomain& d, double p, const ConcentrationOptions& opt, const std::vector<double>& radii,
    const std::function<RungResult(const Point&, double, CapacityCache&)>& ball,
    const std::function<double(double)>& spacing, const Level* inf, ConcentrationMap map) {
  const int n = d.dim();
  const auto centers = ladder_centers(d, opt);
  const std::size_t m = centers.size() + (inf ? 1 : 0);
  map.centers.resize(m);
  const std::size_t rungs = radii.size();

  // Infinity: complements of B_R about the box center, R up to half the inner radius.
  std::vector<double> inf_radii;
  Point mid(n);
  for (int k = 0; k < n; ++k) mid[k] = 0.5 * (d.lo()[k] + d.hi()[k]);
  if (inf) {
    const double Rmax = 0.5 * d.inner_radius();
    for (std::size_t k = rungs; k-- > 0;) inf_radii.push_back(Rmax * std::pow(0.5, static_cast<double>(k)));
  }

  CapacityCache cache;
  std::vector<RungResult> results(m * rungs);
  parallel_for(m * rungs, opt.threads, [&](std::size_t t) {
    const std::size_t c = t / rungs, k = t % rungs;
    if (c < centers.size()) results[t] = ball(centers[c], radii[k], cache);
    else results[t] = infinity_rung(*inf, mid, inf_radii[k], p, opt, cache);
  });

  std::vector<double> floors;
  for (std::size_t c = 0; c < m; ++c) {
    auto& L = map.centers[c];
    L.at_infinity = c >= centers.size();
    if (!L.at_infinity) L.center = centers[c];
    // Order rungs so that the neighbourhood shrinks: r decreasing, R increasing.
    std::vector<double> scale(rungs), value(rungs);
    double running = 0.0;
    L.ladder.resize(rungs);
    for (std::size_t j = 0; j < rungs; ++j) {
      // j walks from the smallest neighbourhood outwards.
      const std::size_t k = L.at_infinity ? rungs - 1 - j : j;
      const auto& res = results[c * rungs + k];
      running = std::max(running, res.value);
      const double s = L.at_infinity ? inf_radii[k] : radii[k];
      const double sp = L.at_infinity ? inf->domain->max_spacing() : spacing(s);
      L.ladder[rungs - 1 - j] = {s, running, res.integral, res.capacity, res.descriptor, sp};
    }
    for (std::size_t j = 0; j < rungs; ++j) {
      scale[j] = L.at_infinity ? 1.0 / L.ladder[j].r : L.ladder[j].r;
      value[j] = L.ladder[j].value;
    }
    L.estimate = L.ladder.back().value;
    if (L.estimate <= 0.0) L.slope = std::numeric_limits<double>::infinity();
    else {
      const auto use = std::min<std::size_t>(rungs, static_cast<std::size_t>(std::max(opt.slope_rungs, 2)));
      const std::vector<double> s_tail(scale.end() - static_cast<long>(use), scale.end());
      const std::vector<double> v_tail(value.end() - static_cast<long>(use), value.end());
      L.slope = rungs > 1 ? loglog_slope(s_tail, v_tail) : 0.0;
    }
    L.decaying = L.slope >= 0.5 * p;
    if (L.decaying && !L.at_infinity && L.estimate > 0.0) floors.push_back(L.estimate * std::pow(2.0, -p));
  }
  if (!floors.empty()) {
    std::nth_element(floors.begin(), floors.begin() + static_cast<long>(floors.size() / 2), floors.end());
    map.noise_floor = floors[floors.size() / 2];
  }
  return map;
}

/// Coarsens `d` until it has at most 2^16 cells.
inline DomainPtr infinity_domain(const GridDomain& d) {
  auto c = share(d);
  while (c->size() > 65536) {
    bool ok = true;
    for (int k = 0; k < c->dim(); ++k) ok = ok && c->cells()[k] >= 4;
    if (!ok) break;
    c = share(c->coarsened());
  }
  return c;
}

}  // namespace detail

/// C_g ladders: for each center x and radius r the best ratio of g restricted
/// to B_r(x) over {B_r, B_{r/2}, superlevel sets in B_r}, kept as a running
/// maximum from small to large r; for infinity the same over complements of
/// B_R about the box center. A ladder decays when its log-log slope over the
/// smallest rungs is at least p/2. Radii below 4h, and default radii above
/// half the box inner radius, are skipped with a warning; at least two
/// default rungs are kept while they fit in the inner radius.
inline ConcentrationMap concentration_function(const GridFunction& g, double p, const ConcentrationOptions& opt = {}) {
  require(p > 1.0, "concentration function needs p > 1");
  check_finite(g, "g");
  require(g.min_value() >= 0.0, "pass |g|: the Maz'ya norm is defined for g >= 0");
  opt.solver.validate();
  const auto& d = g.domain();
  const double h = d.max_spacing();
  ConcentrationMap map;
  map.dim = d.dim();
  map.p = p;

  // Radii, smallest first.
  std::vector<double> radii = opt.radii;
  if (radii.empty()) {
    require(opt.levels > 0, "ladder needs at least one level");
    for (int k = 0; k < opt.levels; ++k) radii.push_back(4.0 * h * std::pow(2.0, k));
  }
  std::sort(radii.begin(), radii.end());
  std::vector<double> kept;
  for (double r : radii) {
    if (r < 4.0 * h * (1.0 - 1e-12)) {
      map.warnings.push_back("radius " + std::to_string(r) + " below 4h skipped");
      continue;
    }
    const bool fits = r <= 0.5 * d.inner_radius() * (1.0 + 1e-12) ||
                      (kept.size() < 2 && r <= d.inner_radius() * (1.0 + 1e-12));
    if (opt.radii.empty() && !fits) {
      map.warnings.push_back("radius " + std::to_string(r) + " above half the box inner radius skipped");
      continue;
    }
    kept.push_back(r);
  }
  require(!kept.empty(), "no radius resolvable on this grid (need r >= 4h)");
  radii = kept;

  // Grid level per rung: the coarsest spacing still giving four cells per radius.
  int depth = 1;
  if (opt.coarsen_ladder) depth = 1 + static_cast<int>(std::floor(std::log2(radii.back() / (4.0 * h)) + 1e-9));
  const bool with_inf = opt.include_infinity.value_or(d.has_far_field());
  const auto levels = detail::coarse_levels(g, with_inf ? std::max(depth, 8) : depth);
  auto level_for = [&](double r) -> std::size_t {
    std::size_t best = 0;
    if (!opt.coarsen_ladder) return 0;
    for (std::size_t j = 0; j < levels.size(); ++j)
      if (levels[j].domain->max_spacing() <= r / 4.0 * (1.0 + 1e-9)) best = j;
    return best;
  };
  std::size_t inf_level = 0;
  while (inf_level + 1 < levels.size() && levels[inf_level].domain->size() > 65536) ++inf_level;

  return detail::assemble_ladders(
      d, p, opt, radii,
      [&](const Point& x, double r, detail::CapacityCache& cache) {
        return detail::ball_rung(levels[level_for(r)], x, r, p, opt, cache);
      },
      [&](double r) { return levels[level_for(r)].domain->max_spacing(); }, with_inf ? &levels[inf_level] : nullptr,
      std::move(map));
}

/// C_g ladders with g sampled from its description on each window, so the
/// radii are not tied to a global grid. `domain` fixes the box, mask and
/// closures. Default radii are r_k = R 2^{-k}, k < levels, with R half the
/// inner radius.
inline ConcentrationMap concentration_function(const PotentialSpec& spec, const DomainPtr& domain, double p,
                                               const ConcentrationOptions& opt = {}) {
  require(p > 1.0, "concentration function needs p > 1");
  validate(spec, domain->dim(), p);
  opt.solver.validate();
  require(opt.cells_per_radius >= 2.0, "windows need at least two cells per radius");
  const auto& d = *domain;
  ConcentrationMap map;
  map.dim = d.dim();
  map.p = p;
  std::vector<double> radii = opt.radii;
  if (radii.empty()) {
    require(opt.levels > 0, "ladder needs at least one level");
    for (int k = 0; k < opt.levels; ++k) radii.push_back(0.5 * d.inner_radius() * std::pow(0.5, k));
  }
  for (double r : radii) require(r > 0.0 && std::isfinite(r), "radii must be positive");
  std::sort(radii.begin(), radii.end());
  radii.erase(std::unique(radii.begin(), radii.end()), radii.end());

  const bool with_inf = opt.include_infinity.value_or(d.has_far_field());
  std::optional<detail::Level> inf;
  if (with_inf) {
    auto c = detail::infinity_domain(d);
    inf = detail::Level{c, sample_potential(spec, c, opt.sampling)};
    require(inf->g.min_value() >= 0.0, "pass |g|: the Maz'ya norm is defined for g >= 0");
  }
  return detail::assemble_ladders(
      d, p, opt, radii,
      [&](const Point& x, double r, detail::CapacityCache& cache) {
        return detail::sampled_ball_rung(spec, d, x, r, p, opt, cache);
      },
      [&](double r) { return r / opt.cells_per_radius; }, inf ? &*inf : nullptr, std::move(map));
}

/// Centers with non-decaying ladders whose estimate exceeds the threshold
/// (default: ten times the noise floor). Infinity is reported separately by
/// the verdicts.
inline std::vector<Point> singular_set(const ConcentrationMap& map, std::optional<double> threshold = std::nullopt) {
  const double t = threshold.value_or(10.0 * map.noise_floor);
  std::vector<Point> out;
  for (const auto& L : map.centers)
    if (!L.at_infinity && !L.decaying && L.estimate > t) out.push_back(L.center);
  return out;
}

// ---------------------------------------------------------------------------
// Verdicts.

enum class Compactness { compact, not_compact };

inline std::string to_string(Compactness c) { return c == Compactness::compact ? "COMPACT" : "NOT_COMPACT"; }

struct CompactnessVerdict {
  Compactness verdict = Compactness::compact;
  /// Labels of the centers (or "inf") whose ladders do not decay.
  std::vector<std::string> witnesses;
  std::vector<Point> singular_points;
  bool infinity_witness = false;
};

/// COMPACT when every ladder decays, including infinity when it was
/// computed; NOT_COMPACT with the offending centers otherwise.
inline CompactnessVerdict compactness_verdict(const ConcentrationMap& map, std::optional<double> threshold = std::nullopt) {
  CompactnessVerdict out;
  const double t = threshold.value_or(10.0 * map.noise_floor);
  for (const auto& L : map.centers) {
    if (L.decaying || L.estimate <= t) continue;
    out.witnesses.push_back(L.label());
    if (L.at_infinity) out.infinity_witness = true;
    else out.singular_points.push_back(L.center);
  }
  if (!out.witnesses.empty()) out.verdict = Compactness::not_compact;
  return out;
}

inline CompactnessVerdict compactness_verdict(const GridFunction& g, double p, const ConcentrationOptions& opt = {}) {
  return compactness_verdict(concentration_function(g, p, opt));
}

inline CompactnessVerdict compactness_verdict(const PotentialSpec& spec, const DomainPtr& domain, double p,
                                              const ConcentrationOptions& opt = {}) {
  return compactness_verdict(concentration_function(spec, domain, p, opt));
}

struct Sandwich {
  double lower = 0.0;
  double B = 0.0;
  double upper = 0.0;  // C_H * lower
  double C_H = 0.0;
  /// Extra amount that lower would need for B <= C_H (lower + slack).
  double slack_needed = 0.0;
  bool consistent = true;
};

/// |g| <= B_g <= C_H |g| with |g| replaced by its lower bound. The left
/// inequality must hold up to `tolerance`; a failure points at a solver
/// problem. The right one may need slack because the bound is not sharp.
inline Sandwich hardy_sandwich(double lower, double B, double p, double tolerance = 1e-6) {
  require(lower >= 0.0 && B >= 0.0, "sandwich needs nonnegative bounds");
  Sandwich s;
  s.lower = lower;
  s.B = B;
  s.C_H = hardy_constant(p);
  s.upper = s.C_H * lower;
  s.slack_needed = std::max(0.0, B / s.C_H - lower);
  s.consistent = lower <= B + tolerance;
  return s;
}

/// eps_0 = (2 C_H - 1) |h| / |phi|.
inline double perturbation_threshold(double h_norm_lower, double phi_norm_lower, double p) {
  require(phi_norm_lower > 0.0, "the norm of phi must be positive");
  require(h_norm_lower >= 0.0, "the norm of h must be nonnegative");
  return (2.0 * hardy_constant(p) - 1.0) * h_norm_lower / phi_norm_lower;
}

enum class Attainment { attained_sufficient, inconclusive, no_positive_mass };

inline std::string to_string(Attainment a) {
  switch (a) {
    case Attainment::attained_sufficient: return "ATTAINED_SUFFICIENT";
    case Attainment::inconclusive: return "INCONCLUSIVE";
    case Attainment::no_positive_mass: return "NO_POSITIVE_MASS";
  }
  return "?";
}

struct AttainmentVerdict {
  Attainment verdict = Attainment::inconclusive;
  /// Measure of the union of smallest-rung balls around singular points.
  double covering_measure = 0.0;
  double domain_measure = 0.0;
  double covering_fraction = 0.0;
  bool covering_small = false;
  /// C_H times the largest C_g over non-decaying ladders (decaying ones
  /// count as zero).
  double max_CH_Cg = 0.0;
  double B = 0.0;
  bool strict_gap = false;
  std::string note = "sufficient-criterion check";
};

/// Sufficient criterion for attainment: the singular set is small and
/// C_H C_g < B_g at every center and at infinity.
inline AttainmentVerdict attainment_criterion(const ConcentrationMap& map, const GridDomain& d, double B,
                                              double covering_limit = 0.01,
                                              std::optional<double> threshold = std::nullopt) {
  AttainmentVerdict out;
  out.B = B;
  const double C_H = hardy_constant(map.p);
  double worst = 0.0;
  std::vector<std::pair<Point, double>> balls;
  for (const auto& L : map.centers) {
    if (L.decaying || L.estimate <= threshold.value_or(10.0 * map.noise_floor)) continue;
    worst = std::max(worst, L.estimate);
    if (!L.at_infinity) balls.emplace_back(L.center, L.ladder.back().r);
  }
  std::size_t covered = 0;
  Point x;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!d.inside(i)) continue;
    d.center(i, x);
    for (const auto& [c, r] : balls)
      if (distance(x, c) <= r) {
        ++covered;
        break;
      }
  }
  out.covering_measure = static_cast<double>(covered) * d.cell_volume();
  out.domain_measure = static_cast<double>(d.masked_count()) * d.cell_volume();
  out.covering_fraction = out.covering_measure / out.domain_measure;
  out.covering_small = out.covering_fraction < covering_limit;
  out.max_CH_Cg = C_H * worst;
  out.strict_gap = out.max_CH_Cg < B;
  out.verdict = out.covering_small && out.strict_gap ? Attainment::attained_sufficient : Attainment::inconclusive;
  return out;
}

struct PositivePartVerdict {
  Attainment verdict = Attainment::inconclusive;
  std::optional<CompactnessVerdict> positive_part;
};

/// A signed g attains B_g when g^+ is compact; g <= 0 has no admissible u.
inline PositivePartVerdict positive_part_criterion(const GridFunction& g, double p, const ConcentrationOptions& opt = {}) {
  check_finite(g, "g");
  PositivePartVerdict out;
  const auto gp = g.positive_part();
  if (gp.max_abs() == 0.0) {
    out.verdict = Attainment::no_positive_mass;
    return out;
  }
  out.positive_part = compactness_verdict(gp, p, opt);
  out.verdict = out.positive_part->verdict == Compactness::compact ? Attainment::attained_sufficient
                                                                   : Attainment::inconclusive;
  return out;
}

}  // namespace hardy
