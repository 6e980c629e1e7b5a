#pragma once

/// \file potential.hpp
/// The gallery of weight functions g and their sampling to cell averages.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hardy/error.hpp"
#include "hardy/grid.hpp"
#include "hardy/quadrature.hpp"

namespace hardy {

enum class PotentialKind {
  constant,          // c
  inverse_power,     // c |x - a|^{-s}
  cylindrical,       // c |x' - a'|^{-s}, x' the first k coordinates
  radial_profile,    // c gtilde(|x - a|), gtilde a step table
  indicator_scaled,  // c on rho_in <= |x - a| < rho_out
  annulus_singular,  // c (|x - a| - rho_in)^{-beta} on rho_in < |x - a| <= rho_out
  bump,              // c exp(1 - 1/(1 - |x - a|^2/rho^2)) on |x - a| < rho
  sum,               // sum of coefficient * term
};

inline std::string to_string(PotentialKind k) {
  switch (k) {
    case PotentialKind::constant: return "constant";
    case PotentialKind::inverse_power: return "inverse_power";
    case PotentialKind::cylindrical: return "cylindrical";
    case PotentialKind::radial_profile: return "radial_profile";
    case PotentialKind::indicator_scaled: return "indicator_scaled";
    case PotentialKind::annulus_singular: return "annulus_singular";
    case PotentialKind::bump: return "bump";
    case PotentialKind::sum: return "sum";
  }
  return "?";
}

inline PotentialKind potential_kind_from_string(const std::string& s) {
  for (auto k : {PotentialKind::constant, PotentialKind::inverse_power, PotentialKind::cylindrical,
                 PotentialKind::radial_profile, PotentialKind::indicator_scaled, PotentialKind::annulus_singular,
                 PotentialKind::bump, PotentialKind::sum})
    if (to_string(k) == s) return k;
  throw InvalidInput("unknown potential kind '" + s + "'");
}

struct PotentialSpec;

struct PotentialTerm {
  double coefficient = 1.0;
  std::shared_ptr<PotentialSpec> spec;
};

struct PotentialSpec {
  PotentialKind kind = PotentialKind::constant;
  double scale = 1.0;       // the factor c
  Point center;             // a (empty = origin); for cylindrical only the first k entries are used
  double exponent = 2.0;    // s for inverse_power / cylindrical
  int split = 0;            // k for cylindrical
  double rho_in = 0.0;      // inner radius for indicator_scaled / annulus_singular
  double rho_out = 1.0;     // outer radius (bump radius for bump)
  double beta = 0.5;        // annulus_singular exponent
  std::vector<double> breaks, levels;  // radial_profile table, levels[i] on [breaks[i-1], breaks[i])
  std::vector<PotentialTerm> terms;    // sum
  std::vector<Point> declared_singularities;
  nlohmann::json metadata = nlohmann::json::object();

  static PotentialSpec constant(double c) {
    PotentialSpec s;
    s.scale = c;
    return s;
  }
  static PotentialSpec inverse_power(Point a, double exponent, double c = 1.0) {
    PotentialSpec s;
    s.kind = PotentialKind::inverse_power;
    s.center = std::move(a);
    s.exponent = exponent;
    s.scale = c;
    return s;
  }
  static PotentialSpec cylindrical(int k, double exponent, double c = 1.0) {
    PotentialSpec s;
    s.kind = PotentialKind::cylindrical;
    s.split = k;
    s.exponent = exponent;
    s.scale = c;
    return s;
  }
  static PotentialSpec indicator(Point a, double rho_in, double rho_out, double c = 1.0) {
    PotentialSpec s;
    s.kind = PotentialKind::indicator_scaled;
    s.center = std::move(a);
    s.rho_in = rho_in;
    s.rho_out = rho_out;
    s.scale = c;
    return s;
  }
  static PotentialSpec annulus_singular(Point a, double beta, double rho_in = 1.0, double rho_out = 2.0) {
    PotentialSpec s;
    s.kind = PotentialKind::annulus_singular;
    s.center = std::move(a);
    s.beta = beta;
    s.rho_in = rho_in;
    s.rho_out = rho_out;
    return s;
  }
  static PotentialSpec bump(Point a, double radius, double c = 1.0) {
    PotentialSpec s;
    s.kind = PotentialKind::bump;
    s.center = std::move(a);
    s.rho_out = radius;
    s.scale = c;
    return s;
  }
  static PotentialSpec radial_profile(Point a, std::vector<double> breaks, std::vector<double> levels) {
    PotentialSpec s;
    s.kind = PotentialKind::radial_profile;
    s.center = std::move(a);
    s.breaks = std::move(breaks);
    s.levels = std::move(levels);
    return s;
  }
  static PotentialSpec sum_of(std::vector<std::pair<double, PotentialSpec>> parts) {
    PotentialSpec s;
    s.kind = PotentialKind::sum;
    for (auto& [c, p] : parts) s.terms.push_back({c, std::make_shared<PotentialSpec>(std::move(p))});
    return s;
  }
};

namespace detail {

inline double center_coord(const PotentialSpec& s, int k) {
  return k < static_cast<int>(s.center.size()) ? s.center[k] : 0.0;
}

inline double radius_from(const PotentialSpec& s, std::span<const double> x, int dims) {
  double r2 = 0.0;
  for (int k = 0; k < dims; ++k) {
    const double d = x[k] - center_coord(s, k);
    r2 += d * d;
  }
  return std::sqrt(r2);
}

}  // namespace detail

/// Checks exponent ranges for the potential in R^dim. When p > 0 is given,
/// also checks the ranges tied to the problem exponent.
inline void validate(const PotentialSpec& s, int dim, double p = 0.0) {
  require(std::isfinite(s.scale), "potential scale must be finite");
  const int centered = static_cast<int>(s.center.size());
  require(centered == 0 || centered == dim || (s.kind == PotentialKind::cylindrical && centered == s.split),
          "potential center must have one coordinate per axis");
  switch (s.kind) {
    case PotentialKind::constant: break;
    case PotentialKind::inverse_power:
      require(s.exponent > 0.0 && s.exponent < dim, "inverse_power needs 0 < exponent < N for local integrability");
      break;
    case PotentialKind::cylindrical:
      require(s.split >= 1 && s.split <= dim, "cylindrical needs 1 <= k <= N");
      require(s.exponent > 0.0 && s.exponent < s.split, "cylindrical needs 0 < exponent < k");
      if (p > 0.0) require(p < s.split, "cylindrical potential is a Hardy potential only for p < k");
      break;
    case PotentialKind::radial_profile:
      require(s.levels.size() == s.breaks.size() + 1, "radial_profile needs one more level than breaks");
      for (std::size_t i = 0; i < s.breaks.size(); ++i)
        require(s.breaks[i] > 0.0 && (i == 0 || s.breaks[i] > s.breaks[i - 1]),
                "radial_profile breaks must be positive and increasing");
      for (double v : s.levels) require(std::isfinite(v), "radial_profile levels must be finite");
      break;
    case PotentialKind::indicator_scaled:
      require(s.rho_in >= 0.0 && s.rho_out > s.rho_in, "indicator_scaled needs 0 <= rho_in < rho_out");
      break;
    case PotentialKind::annulus_singular:
      require(s.rho_in > 0.0 && s.rho_out > s.rho_in, "annulus_singular needs 0 < rho_in < rho_out");
      require(s.beta > 0.0 && s.beta < 1.0, "annulus_singular needs 0 < beta < 1 for local integrability");
      break;
    case PotentialKind::bump: require(s.rho_out > 0.0, "bump needs a positive radius"); break;
    case PotentialKind::sum:
      require(!s.terms.empty(), "sum potential needs at least one term");
      for (const auto& t : s.terms) {
        require(t.spec != nullptr && std::isfinite(t.coefficient), "sum term is malformed");
        validate(*t.spec, dim, p);
      }
      break;
  }
}

/// Pointwise value; +infinity on a point singularity.
inline double evaluate(const PotentialSpec& s, std::span<const double> x) {
  const int n = static_cast<int>(x.size());
  switch (s.kind) {
    case PotentialKind::constant: return s.scale;
    case PotentialKind::inverse_power: {
      const double r = detail::radius_from(s, x, n);
      return r == 0.0 ? std::numeric_limits<double>::infinity() : s.scale * std::pow(r, -s.exponent);
    }
    case PotentialKind::cylindrical: {
      const double r = detail::radius_from(s, x, s.split);
      return r == 0.0 ? std::numeric_limits<double>::infinity() : s.scale * std::pow(r, -s.exponent);
    }
    case PotentialKind::radial_profile: {
      const double r = detail::radius_from(s, x, n);
      const auto i = std::upper_bound(s.breaks.begin(), s.breaks.end(), r) - s.breaks.begin();
      return s.scale * s.levels[i];
    }
    case PotentialKind::indicator_scaled: {
      const double r = detail::radius_from(s, x, n);
      return r >= s.rho_in && r < s.rho_out ? s.scale : 0.0;
    }
    case PotentialKind::annulus_singular: {
      const double r = detail::radius_from(s, x, n);
      if (r <= s.rho_in || r > s.rho_out) return 0.0;
      return s.scale * std::pow(r - s.rho_in, -s.beta);
    }
    case PotentialKind::bump: {
      const double r = detail::radius_from(s, x, n);
      const double t = r / s.rho_out;
      return t < 1.0 ? s.scale * std::exp(1.0 - 1.0 / (1.0 - t * t)) : 0.0;
    }
    case PotentialKind::sum: {
      double v = 0.0;
      for (const auto& t : s.terms) v += t.coefficient * evaluate(*t.spec, x);
      return v;
    }
  }
  return 0.0;
}

/// Nearest point of the singular set of g to x (none for bounded kinds).
inline std::optional<Point> project_to_singular_set(const PotentialSpec& s, std::span<const double> x) {
  const int n = static_cast<int>(x.size());
  switch (s.kind) {
    case PotentialKind::inverse_power: {
      Point a(n);
      for (int k = 0; k < n; ++k) a[k] = detail::center_coord(s, k);
      return a;
    }
    case PotentialKind::cylindrical: {
      Point a(x.begin(), x.end());
      for (int k = 0; k < s.split; ++k) a[k] = detail::center_coord(s, k);
      return a;
    }
    case PotentialKind::annulus_singular: {
      const double r = detail::radius_from(s, x, n);
      Point a(n);
      for (int k = 0; k < n; ++k) {
        const double c = detail::center_coord(s, k);
        a[k] = r > 0.0 ? c + (x[k] - c) * s.rho_in / r : c + (k == 0 ? s.rho_in : 0.0);
      }
      return a;
    }
    case PotentialKind::sum: {
      std::optional<Point> best;
      double best_d = std::numeric_limits<double>::infinity();
      for (const auto& t : s.terms) {
        if (t.coefficient == 0.0) continue;
        if (auto q = project_to_singular_set(*t.spec, x)) {
          const double d = distance(*q, x);
          if (d < best_d) {
            best_d = d;
            best = std::move(q);
          }
        }
      }
      return best;
    }
    default: return std::nullopt;
  }
}

inline double distance_to_singular_set(const PotentialSpec& s, std::span<const double> x) {
  const auto q = project_to_singular_set(s, x);
  return q ? distance(*q, x) : std::numeric_limits<double>::infinity();
}

struct SamplingOptions {
  int subsamples = 3;  // m in the m^N midpoint rule
};

namespace detail {

inline double midpoint_average(const PotentialSpec& s, std::span<const double> lo, std::span<const double> h, int m,
                               double exclusion) {
  const int n = static_cast<int>(lo.size());
  std::array<int, kMaxDim> idx{};
  Point x(n);
  double total = 0.0;
  std::size_t count = 0;
  while (true) {
    for (int k = 0; k < n; ++k) x[k] = lo[k] + (idx[k] + 0.5) * h[k] / m;
    ++count;
    if (exclusion <= 0.0 || distance_to_singular_set(s, x) > exclusion) {
      const double v = evaluate(s, x);
      if (std::isfinite(v)) total += v;
    }
    int k = n - 1;
    for (; k >= 0; --k) {
      if (++idx[k] < m) break;
      idx[k] = 0;
    }
    if (k < 0) break;
  }
  return total / static_cast<double>(count);
}

/// Average of |z - a|^{-s} over a cell, treating the first `dims` axes.
inline double power_cell_average(std::span<const double> lo, std::span<const double> hi, std::span<const double> a,
                                 double s, int dims) {
  double vol = 1.0;
  for (int k = 0; k < dims; ++k) vol *= hi[k] - lo[k];
  return quad::power_box_integral(lo.first(dims), hi.first(dims), a.first(dims), s) / vol;
}

inline double cell_average(const PotentialSpec& s, std::span<const double> lo, std::span<const double> hi,
                           std::span<const double> h, const SamplingOptions& opt) {
  const int n = static_cast<int>(lo.size());
  auto diagonal = [&](int dims) {
    double d2 = 0.0;
    for (int k = 0; k < dims; ++k) d2 += h[k] * h[k];
    return std::sqrt(d2);
  };
  const double diag = diagonal(n);
  switch (s.kind) {
    case PotentialKind::inverse_power:
    case PotentialKind::cylindrical: {
      const int dims = s.kind == PotentialKind::cylindrical ? s.split : n;
      Point a(n);
      for (int k = 0; k < n; ++k) a[k] = center_coord(s, k);
      double dist2 = 0.0;
      for (int k = 0; k < dims; ++k) {
        const double c = std::clamp(a[k], lo[k], hi[k]) - a[k];
        dist2 += c * c;
      }
      // Near the pole the midpoint rule is inaccurate; integrate the pole exactly.
      if (std::sqrt(dist2) < 2.0 * diagonal(dims)) return s.scale * power_cell_average(lo, hi, a, s.exponent, dims);
      return midpoint_average(s, lo, h, opt.subsamples, 0.0);
    }
    case PotentialKind::annulus_singular: {
      Point c(n);
      for (int k = 0; k < n; ++k) c[k] = 0.5 * (lo[k] + hi[k]);
      if (distance_to_singular_set(s, c) < diag) return midpoint_average(s, lo, h, opt.subsamples, 0.1 * h[0]);
      return midpoint_average(s, lo, h, opt.subsamples, 0.0);
    }
    case PotentialKind::sum: {
      double v = 0.0;
      for (const auto& t : s.terms) v += t.coefficient * cell_average(*t.spec, lo, hi, h, opt);
      return v;
    }
    default: return midpoint_average(s, lo, h, opt.subsamples, 0.0);
  }
}

}  // namespace detail

/// Cell averages of g over every masked cell of the domain.
inline GridFunction sample_potential(const PotentialSpec& s, const DomainPtr& domain, const SamplingOptions& opt = {}) {
  validate(s, domain->dim());
  require(opt.subsamples >= 1, "subsample count must be positive");
  const int n = domain->dim();
  std::vector<double> v(domain->size(), 0.0);
  Point x, lo(n), hi(n);
  const auto& h = domain->spacings();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!domain->inside(i)) continue;
    domain->center(i, x);
    for (int k = 0; k < n; ++k) {
      lo[k] = x[k] - 0.5 * h[k];
      hi[k] = x[k] + 0.5 * h[k];
    }
    v[i] = detail::cell_average(s, lo, hi, h, opt);
  }
  return GridFunction(domain, std::move(v));
}

// ---------------------------------------------------------------------------
// JSON form.

inline nlohmann::json to_json(const PotentialSpec& s) {
  nlohmann::json j;
  j["kind"] = to_string(s.kind);
  j["scale"] = s.scale;
  switch (s.kind) {
    case PotentialKind::constant: break;
    case PotentialKind::inverse_power:
      j["center"] = s.center;
      j["exponent"] = s.exponent;
      break;
    case PotentialKind::cylindrical:
      j["center"] = s.center;
      j["exponent"] = s.exponent;
      j["k"] = s.split;
      break;
    case PotentialKind::radial_profile:
      j["center"] = s.center;
      j["breaks"] = s.breaks;
      j["levels"] = s.levels;
      break;
    case PotentialKind::indicator_scaled:
    case PotentialKind::annulus_singular:
    case PotentialKind::bump:
      j["center"] = s.center;
      j["rho_in"] = s.rho_in;
      j["rho_out"] = s.rho_out;
      if (s.kind == PotentialKind::annulus_singular) j["beta"] = s.beta;
      break;
    case PotentialKind::sum: {
      auto terms = nlohmann::json::array();
      for (const auto& t : s.terms) terms.push_back({{"coefficient", t.coefficient}, {"spec", to_json(*t.spec)}});
      j["terms"] = terms;
      break;
    }
  }
  if (!s.declared_singularities.empty()) j["declared_singularities"] = s.declared_singularities;
  if (!s.metadata.empty()) j["metadata"] = s.metadata;
  return j;
}

// ---------------------------------------------------------------------------
// Gallery.

inline std::vector<std::string> gallery_names() {
  return {"constant", "inverse_power", "cylindrical", "indicator", "annulus_singular", "bump", "radial_step"};
}

/// Named potentials, centered at the origin, valid for p = 2 in the smallest
/// dimension they make sense in (cylindrical needs N >= 4).
inline PotentialSpec gallery_entry(const std::string& name) {
  PotentialSpec s;
  if (name == "constant") s = PotentialSpec::constant(1.0);
  else if (name == "inverse_power") s = PotentialSpec::inverse_power({}, 2.0);
  else if (name == "cylindrical") s = PotentialSpec::cylindrical(3, 2.0);
  else if (name == "indicator") s = PotentialSpec::indicator({}, 0.0, 1.0);
  else if (name == "annulus_singular") s = PotentialSpec::annulus_singular({}, 0.8);
  else if (name == "bump") s = PotentialSpec::bump({}, 1.0);
  else if (name == "radial_step") s = PotentialSpec::radial_profile({}, {0.5, 1.0}, {2.0, 1.0, 0.0});
  else throw InvalidInput("unknown gallery potential '" + name + "'");
  s.metadata = {{"gallery", name}};
  return s;
}

namespace detail {

/// {"gallery": name, ...}: the named entry with the remaining fields
/// overriding its own.
inline nlohmann::json expand_gallery(const nlohmann::json& j) {
  require(j.at("gallery").is_string(), "'gallery' must name an entry");
  nlohmann::json base = to_json(gallery_entry(j.at("gallery").get<std::string>()));
  for (const auto& [key, value] : j.items())
    if (key != "gallery") base[key] = value;
  return base;
}

}  // namespace detail

inline PotentialSpec potential_from_json(const nlohmann::json& j) {
  require(j.is_object(), "potential spec must be a JSON object");
  if (j.contains("gallery")) return potential_from_json(detail::expand_gallery(j));
  require(j.contains("kind"), "potential spec needs a 'kind'");
  static const std::vector<std::string> known = {"kind",    "scale",  "center", "exponent", "k",
                                                 "breaks",  "levels", "rho_in", "rho_out",  "beta",
                                                 "terms",   "declared_singularities", "metadata", "radius"};
  for (const auto& [key, _] : j.items())
    require(std::find(known.begin(), known.end(), key) != known.end(), "unknown potential field '" + key + "'");
  PotentialSpec s;
  try {
    s.kind = potential_kind_from_string(j.at("kind").get<std::string>());
    s.scale = j.value("scale", 1.0);
    s.center = j.value("center", Point{});
    s.exponent = j.value("exponent", 2.0);
    s.split = j.value("k", 0);
    s.rho_in = j.value("rho_in", s.kind == PotentialKind::annulus_singular ? 1.0 : 0.0);
    s.rho_out = j.value("rho_out", j.value("radius", s.kind == PotentialKind::annulus_singular ? 2.0 : 1.0));
    s.beta = j.value("beta", 0.5);
    s.breaks = j.value("breaks", std::vector<double>{});
    s.levels = j.value("levels", std::vector<double>{});
    s.declared_singularities = j.value("declared_singularities", std::vector<Point>{});
    s.metadata = j.value("metadata", nlohmann::json::object());
    if (s.kind == PotentialKind::sum) {
      require(j.contains("terms") && j["terms"].is_array(), "sum potential needs a 'terms' array");
      for (const auto& t : j["terms"])
        s.terms.push_back({t.value("coefficient", 1.0), std::make_shared<PotentialSpec>(potential_from_json(t.at("spec")))});
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed potential spec: ") + e.what());
  }
  return s;
}

}  // namespace hardy
