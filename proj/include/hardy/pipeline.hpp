#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hardy/capacity.hpp"
#include "hardy/mazya.hpp"
#include "hardy/potential.hpp"
#include "hardy/rayleigh.hpp"

namespace hardy {

// ---------------------------------------------------------------------------
// Configuration.

/// One grid of a resolution ladder.
struct GridSpec {
  std::vector<double> lo, hi;
  std::vector<std::size_t> cells;
  Closure closure = Closure::zero;
  /// Treat [lo, hi] as node positions with `cells` interior nodes, so the
  /// zero boundary sits on lo and hi.
  bool node_aligned = false;

  DomainPtr make() const {
    require(!cells.empty() && lo.size() == cells.size() && hi.size() == cells.size(), "grid needs lo, hi and cells per axis");
    GridDomain d = node_aligned ? GridDomain::node_aligned(lo, hi, cells) : GridDomain(lo, hi, cells);
    d.set_closure(closure);
    return share(d);
  }
};

struct BallSpec {
  Point center;
  double radius = 0.0;
};

/// Ladder settings forwarded to the sampled concentration functions.
struct ConcentrationSettings {
  int lattice_per_axis = 0;
  int levels = 3;
  double cells_per_radius = 4.0;
  std::vector<double> radii;
  std::vector<Point> centers;
  std::vector<Point> seeds;
  std::optional<bool> include_infinity;
};

struct PipelineConfig {
  PotentialSpec potential = PotentialSpec::constant(1.0);
  double p = 2.0;
  std::vector<GridSpec> grids;
  std::uint64_t seed = 0;
  int threads = 1;
  /// Capacity solves (lower bounds and ladders).
  SolverConfig capacity{};
  /// Rayleigh quotient descent.
  SolverConfig rayleigh{};
  SamplingOptions sampling{};
  FamilyOptions family{};
  /// Extra balls added to the lower-bound family.
  std::vector<BallSpec> family_balls;
  ConcentrationSettings concentration{};
  /// Runs the capacity property suite on the coarsest grid.
  bool capacity_checks = false;
};

// ---------------------------------------------------------------------------
// Report.

struct LadderRow {
  double r = 0.0, value = 0.0, integral = 0.0, capacity = 0.0, spacing = 0.0;
  std::string descriptor;
};

struct LadderSummary {
  std::string center;
  bool at_infinity = false;
  double estimate = 0.0, slope = 0.0;
  bool decaying = false;
  std::vector<LadderRow> rows;
};

struct GridReport {
  GridSpec grid;
  double spacing = 0.0;
  std::size_t masked_cells = 0;
  double lower = 0.0;
  std::string lower_set;
  std::size_t family_size = 0;
  double B = 0.0;
  bool B_converged = false;
  int iterations = 0;
  double residual = 0.0;
  Sandwich sandwich;
  double noise_floor = 0.0;
  std::vector<std::string> warnings;
  std::vector<LadderSummary> ladders;
  std::vector<Point> singular_set;
  Compactness compactness = Compactness::compact;
  std::vector<std::string> witnesses;
  AttainmentVerdict attainment;
};

struct HardyReport {
  PotentialSpec potential = PotentialSpec::constant(1.0);
  double p = 2.0;
  int N = 0;
  double C_H = 0.0;
  std::vector<GridReport> grids;
  std::vector<CapacityCheckRow> capacity_checks;
  double measure_constant = 0.0;
  nlohmann::json provenance;

  /// Verdicts are those of the finest grid.
  const GridReport& finest() const {
    require(!grids.empty(), "report has no grids");
    return grids.back();
  }
};

/// Wall time per stage; kept out of the report so reports stay comparable.
struct PipelineTiming {
  std::vector<std::pair<std::string, double>> stages;
  double total = 0.0;
};

// ---------------------------------------------------------------------------
// JSON.

namespace detail {

/// Doubles with non-finite values spelled as strings, which JSON lacks.
inline nlohmann::json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline double num_from(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  throw InvalidInput("not a number: " + s);
}

inline Attainment attainment_from_string(const std::string& s) {
  for (auto a : {Attainment::attained_sufficient, Attainment::inconclusive, Attainment::no_positive_mass})
    if (to_string(a) == s) return a;
  throw InvalidInput("unknown attainment verdict '" + s + "'");
}

inline Compactness compactness_from_string(const std::string& s) {
  for (auto c : {Compactness::compact, Compactness::not_compact})
    if (to_string(c) == s) return c;
  throw InvalidInput("unknown compactness verdict '" + s + "'");
}

template <class T>
T value_or(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace detail

inline nlohmann::json to_json(const GridSpec& g) {
  return {{"lo", g.lo}, {"hi", g.hi}, {"cells", g.cells}, {"closure", to_string(g.closure)}, {"node_aligned", g.node_aligned}};
}

inline GridSpec grid_spec_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"lo", "hi", "cells", "closure", "node_aligned"};
  for (const auto& [k, v] : j.items()) require(known.contains(k), "unknown grid key '" + k + "'");
  GridSpec g;
  g.lo = j.at("lo").get<std::vector<double>>();
  g.hi = j.at("hi").get<std::vector<double>>();
  g.cells = j.at("cells").get<std::vector<std::size_t>>();
  g.closure = closure_from_string(detail::value_or<std::string>(j, "closure", "zero"));
  g.node_aligned = detail::value_or(j, "node_aligned", false);
  return g;
}

/// Accepts "N:lo:hi:cells[:closure[:node]]", e.g. "3:-2:2:64:far_field".
inline GridSpec parse_grid(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
  require(parts.size() >= 4 && parts.size() <= 6, "grid must read N:lo:hi:cells[:closure[:node]]");
  GridSpec g;
  try {
    const int n = std::stoi(parts[0]);
    require(n >= 1 && n <= kMaxDim, "grid dimension out of range");
    g.lo.assign(n, std::stod(parts[1]));
    g.hi.assign(n, std::stod(parts[2]));
    g.cells.assign(n, static_cast<std::size_t>(std::stoul(parts[3])));
  } catch (const std::logic_error& e) {
    if (dynamic_cast<const InvalidInput*>(&e)) throw;
    throw InvalidInput("cannot parse grid '" + text + "'");
  }
  if (parts.size() >= 5) g.closure = closure_from_string(parts[4]);
  if (parts.size() == 6) {
    require(parts[5] == "node", "last grid field must be 'node'");
    g.node_aligned = true;
  }
  return g;
}

inline nlohmann::json to_json(const ConcentrationSettings& c) {
  nlohmann::json j{{"lattice_per_axis", c.lattice_per_axis}, {"levels", c.levels}, {"cells_per_radius", c.cells_per_radius},
                   {"radii", c.radii}, {"centers", c.centers}, {"seeds", c.seeds}};
  if (c.include_infinity) j["include_infinity"] = *c.include_infinity;
  return j;
}

inline ConcentrationSettings concentration_settings_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"lattice_per_axis", "levels", "cells_per_radius", "radii",
                                           "centers", "seeds", "include_infinity"};
  for (const auto& [k, v] : j.items()) require(known.contains(k), "unknown concentration key '" + k + "'");
  ConcentrationSettings c;
  c.lattice_per_axis = detail::value_or(j, "lattice_per_axis", c.lattice_per_axis);
  c.levels = detail::value_or(j, "levels", c.levels);
  c.cells_per_radius = detail::value_or(j, "cells_per_radius", c.cells_per_radius);
  c.radii = detail::value_or(j, "radii", c.radii);
  c.centers = detail::value_or(j, "centers", c.centers);
  c.seeds = detail::value_or(j, "seeds", c.seeds);
  if (j.contains("include_infinity")) c.include_infinity = j.at("include_infinity").get<bool>();
  return c;
}

inline nlohmann::json to_json(const FamilyOptions& f) {
  nlohmann::json j{{"lattice_per_axis", f.lattice_per_axis}, {"radius_fractions", f.radius_fractions}, {"quantiles", f.quantiles}};
  if (f.radial_center) j["radial_center"] = *f.radial_center;
  return j;
}

inline FamilyOptions family_options_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"lattice_per_axis", "radius_fractions", "quantiles", "radial_center"};
  for (const auto& [k, v] : j.items()) require(known.contains(k), "unknown family key '" + k + "'");
  FamilyOptions f;
  f.lattice_per_axis = detail::value_or(j, "lattice_per_axis", f.lattice_per_axis);
  f.radius_fractions = detail::value_or(j, "radius_fractions", f.radius_fractions);
  f.quantiles = detail::value_or(j, "quantiles", f.quantiles);
  if (j.contains("radial_center")) f.radial_center = j.at("radial_center").get<Point>();
  return f;
}

inline nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json grids = nlohmann::json::array(), balls = nlohmann::json::array();
  for (const auto& g : c.grids) grids.push_back(to_json(g));
  for (const auto& b : c.family_balls) balls.push_back({{"center", b.center}, {"radius", b.radius}});
  nlohmann::json cap, ray;
  to_json(cap, c.capacity);
  to_json(ray, c.rayleigh);
  return {{"potential", to_json(c.potential)},
          {"p", c.p},
          {"grids", grids},
          {"seed", c.seed},
          {"threads", c.threads},
          {"capacity_solver", cap},
          {"rayleigh_solver", ray},
          {"subsamples", c.sampling.subsamples},
          {"family", to_json(c.family)},
          {"family_balls", balls},
          {"concentration", to_json(c.concentration)},
          {"capacity_checks", c.capacity_checks}};
}

/// Reads a configuration; unknown keys are rejected.
inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"potential",  "p",        "grids",         "seed",
                                           "threads",    "capacity_solver", "rayleigh_solver", "subsamples",
                                           "family",     "family_balls",    "concentration",   "capacity_checks"};
  require(j.is_object(), "configuration must be a JSON object");
  for (const auto& [k, v] : j.items()) require(known.contains(k), "unknown configuration key '" + k + "'");
  PipelineConfig c;
  if (j.contains("potential")) c.potential = potential_from_json(j.at("potential"));
  c.p = detail::value_or(j, "p", c.p);
  if (j.contains("grids"))
    for (const auto& g : j.at("grids")) c.grids.push_back(grid_spec_from_json(g));
  c.seed = detail::value_or(j, "seed", c.seed);
  c.threads = detail::value_or(j, "threads", c.threads);
  if (j.contains("capacity_solver")) from_json(j.at("capacity_solver"), c.capacity);
  if (j.contains("rayleigh_solver")) from_json(j.at("rayleigh_solver"), c.rayleigh);
  c.sampling.subsamples = detail::value_or(j, "subsamples", c.sampling.subsamples);
  if (j.contains("family")) c.family = family_options_from_json(j.at("family"));
  if (j.contains("family_balls"))
    for (const auto& b : j.at("family_balls")) c.family_balls.push_back({b.at("center").get<Point>(), b.at("radius").get<double>()});
  if (j.contains("concentration")) c.concentration = concentration_settings_from_json(j.at("concentration"));
  c.capacity_checks = detail::value_or(j, "capacity_checks", c.capacity_checks);
  return c;
}

inline nlohmann::json to_json(const GridReport& g) {
  nlohmann::json ladders = nlohmann::json::array();
  for (const auto& L : g.ladders) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : L.rows)
      rows.push_back({{"r", r.r}, {"Cg", r.value}, {"integral", r.integral}, {"capacity", r.capacity},
                      {"spacing", r.spacing}, {"set", r.descriptor}});
    ladders.push_back({{"center", L.center}, {"at_infinity", L.at_infinity}, {"estimate", L.estimate},
                       {"slope", detail::num(L.slope)}, {"decaying", L.decaying}, {"ladder", rows}});
  }
  const auto& a = g.attainment;
  const auto& s = g.sandwich;
  return {{"grid", to_json(g.grid)},
          {"spacing", g.spacing},
          {"masked_cells", g.masked_cells},
          {"mazya", {{"lower", g.lower}, {"best_set", g.lower_set}, {"family_size", g.family_size}}},
          {"rayleigh", {{"B", g.B}, {"converged", g.B_converged}, {"iterations", g.iterations}, {"residual", g.residual}}},
          {"sandwich",
           {{"lower", s.lower}, {"B", s.B}, {"upper", s.upper}, {"C_H", s.C_H}, {"slack_needed", s.slack_needed},
            {"consistent", s.consistent}}},
          {"concentration",
           {{"noise_floor", g.noise_floor},
            {"warnings", g.warnings},
            {"limit", "not extrapolated"},
            {"classification", "log-log slope threshold p/2 (heuristic)"},
            {"ladders", ladders}}},
          {"singular_set", g.singular_set},
          {"compactness", {{"verdict", to_string(g.compactness)}, {"witnesses", g.witnesses}}},
          {"attainment",
           {{"verdict", to_string(a.verdict)},
            {"covering_measure", a.covering_measure},
            {"domain_measure", a.domain_measure},
            {"covering_fraction", a.covering_fraction},
            {"covering_small", a.covering_small},
            {"max_CH_Cg", a.max_CH_Cg},
            {"B", a.B},
            {"strict_gap", a.strict_gap},
            {"note", a.note}}}};
}

inline GridReport grid_report_from_json(const nlohmann::json& j) {
  GridReport g;
  g.grid = grid_spec_from_json(j.at("grid"));
  g.spacing = j.at("spacing").get<double>();
  g.masked_cells = j.at("masked_cells").get<std::size_t>();
  const auto& m = j.at("mazya");
  g.lower = m.at("lower").get<double>();
  g.lower_set = m.at("best_set").get<std::string>();
  g.family_size = m.at("family_size").get<std::size_t>();
  const auto& r = j.at("rayleigh");
  g.B = r.at("B").get<double>();
  g.B_converged = r.at("converged").get<bool>();
  g.iterations = r.at("iterations").get<int>();
  g.residual = r.at("residual").get<double>();
  const auto& s = j.at("sandwich");
  g.sandwich = {s.at("lower").get<double>(), s.at("B").get<double>(),           s.at("upper").get<double>(),
                s.at("C_H").get<double>(),   s.at("slack_needed").get<double>(), s.at("consistent").get<bool>()};
  const auto& c = j.at("concentration");
  g.noise_floor = c.at("noise_floor").get<double>();
  g.warnings = c.at("warnings").get<std::vector<std::string>>();
  for (const auto& L : c.at("ladders")) {
    LadderSummary out{L.at("center").get<std::string>(), L.at("at_infinity").get<bool>(), L.at("estimate").get<double>(),
                      detail::num_from(L.at("slope")), L.at("decaying").get<bool>(), {}};
    for (const auto& row : L.at("ladder"))
      out.rows.push_back({row.at("r").get<double>(), row.at("Cg").get<double>(), row.at("integral").get<double>(),
                          row.at("capacity").get<double>(), row.at("spacing").get<double>(), row.at("set").get<std::string>()});
    g.ladders.push_back(std::move(out));
  }
  g.singular_set = j.at("singular_set").get<std::vector<Point>>();
  g.compactness = detail::compactness_from_string(j.at("compactness").at("verdict").get<std::string>());
  g.witnesses = j.at("compactness").at("witnesses").get<std::vector<std::string>>();
  const auto& a = j.at("attainment");
  g.attainment.verdict = detail::attainment_from_string(a.at("verdict").get<std::string>());
  g.attainment.covering_measure = a.at("covering_measure").get<double>();
  g.attainment.domain_measure = a.at("domain_measure").get<double>();
  g.attainment.covering_fraction = a.at("covering_fraction").get<double>();
  g.attainment.covering_small = a.at("covering_small").get<bool>();
  g.attainment.max_CH_Cg = a.at("max_CH_Cg").get<double>();
  g.attainment.B = a.at("B").get<double>();
  g.attainment.strict_gap = a.at("strict_gap").get<bool>();
  g.attainment.note = a.at("note").get<std::string>();
  return g;
}

inline nlohmann::json to_json(const HardyReport& r) {
  nlohmann::json grids = nlohmann::json::array(), trend = nlohmann::json::array(), checks = nlohmann::json::array();
  for (const auto& g : r.grids) {
    grids.push_back(to_json(g));
    trend.push_back({{"spacing", g.spacing}, {"lower", g.lower}, {"B", g.B}});
  }
  for (const auto& c : r.capacity_checks) checks.push_back({{"property", c.property}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"pass", c.pass}});
  nlohmann::json j{{"potential", to_json(r.potential)}, {"p", r.p}, {"N", r.N}, {"C_H", r.C_H}, {"grids", grids},
                   {"trend", trend}, {"capacity_checks", checks}, {"measure_constant", r.measure_constant},
                   {"provenance", r.provenance}};
  if (!r.grids.empty()) {
    const auto& f = r.finest();
    j["summary"] = {{"interval", {f.lower, f.B}},
                    {"singular_set", f.singular_set},
                    {"compactness", to_string(f.compactness)},
                    {"witnesses", f.witnesses},
                    {"attainment", to_string(f.attainment.verdict)}};
  }
  return j;
}

/// Inverse of to_json; the derived "trend" and "summary" blocks are ignored.
inline HardyReport report_from_json(const nlohmann::json& j) {
  HardyReport r;
  r.potential = potential_from_json(j.at("potential"));
  r.p = j.at("p").get<double>();
  r.N = j.at("N").get<int>();
  r.C_H = j.at("C_H").get<double>();
  for (const auto& g : j.at("grids")) r.grids.push_back(grid_report_from_json(g));
  for (const auto& c : j.at("capacity_checks"))
    r.capacity_checks.push_back({c.at("property").get<std::string>(), c.at("lhs").get<double>(), c.at("rhs").get<double>(),
                                 c.at("pass").get<bool>()});
  r.measure_constant = j.at("measure_constant").get<double>();
  r.provenance = j.at("provenance");
  return r;
}

// ---------------------------------------------------------------------------
// Pipeline.

namespace detail {

inline LadderSummary summarize(const CenterLadder& L) {
  LadderSummary out{L.label(), L.at_infinity, L.estimate, L.slope, L.decaying, {}};
  for (const auto& e : L.ladder) out.rows.push_back({e.r, e.value, e.integral, e.capacity, e.spacing, e.descriptor});
  return out;
}

/// Monotonicity, scaling, subadditivity and isometry on balls sized to the box.
inline std::vector<CapacityCheck> standard_capacity_checks(const DomainPtr& d, double p, const SolverConfig& cfg) {
  const int n = d->dim();
  Point c(n);
  for (int k = 0; k < n; ++k) c[k] = 0.5 * (d->lo()[k] + d->hi()[k]);
  const double R = d->inner_radius();
  auto ball = [&](const Point& x, double r) { return CapacityProblem{d, CompactSet::ball(d, x, r), p, cfg}; };
  Point left = c, right = c;
  left[0] -= 0.3 * R;
  right[0] += 0.3 * R;
  auto both = CompactSet::ball(d, left, 0.2 * R).unite(CompactSet::ball(d, right, 0.2 * R));
  std::vector<CapacityCheck> out;
  out.push_back({CapacityProperty::monotone_in_set, ball(c, 0.15 * R), ball(c, 0.3 * R), std::nullopt, 1.0});
  out.push_back({CapacityProperty::scaling, ball(c, 0.15 * R), ball(c, 0.3 * R), std::nullopt, 2.0});
  out.push_back({CapacityProperty::subadditivity, ball(left, 0.2 * R), ball(right, 0.2 * R), CapacityProblem{d, both, p, cfg}, 1.0});
  out.push_back({CapacityProperty::isometry, ball(left, 0.2 * R), ball(right, 0.2 * R), std::nullopt, 1.0});
  return out;
}

}  // namespace detail

/// Samples the potential on every grid of the ladder, then runs the family
/// lower bound, the Rayleigh descent, the sandwich, the sampled
/// concentration ladders and the verdicts. Deterministic for a fixed seed
/// and thread count. Signed potentials are rejected; use
/// positive_part_criterion for them.
inline HardyReport run_pipeline(const PipelineConfig& cfg, PipelineTiming* timing = nullptr) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  auto stamp = [&](const std::string& stage, clock::time_point t0) {
    if (timing) timing->stages.emplace_back(stage, std::chrono::duration<double>(clock::now() - t0).count());
  };
  require(!cfg.grids.empty(), "pipeline needs at least one grid");
  require(cfg.threads >= 1, "thread count must be positive");
  const int n = static_cast<int>(cfg.grids.front().cells.size());
  for (const auto& g : cfg.grids) require(static_cast<int>(g.cells.size()) == n, "all grids must share the dimension");
  require(cfg.p > 1.0 && cfg.p < n, "pipeline needs 1 < p < N");
  validate(cfg.potential, n, cfg.p);

  SolverConfig cap_cfg = cfg.capacity, ray_cfg = cfg.rayleigh;
  cap_cfg.seed = cfg.seed;
  ray_cfg.seed = cfg.seed;

  HardyReport rep;
  rep.potential = cfg.potential;
  rep.p = cfg.p;
  rep.N = n;
  rep.C_H = hardy_constant(cfg.p);
  nlohmann::json calls = nlohmann::json::array();

  for (std::size_t gi = 0; gi < cfg.grids.size(); ++gi) {
    const auto& spec = cfg.grids[gi];
    const std::string tag = "grid " + std::to_string(gi);
    auto dp = spec.make();
    GridReport gr;
    gr.grid = spec;
    gr.spacing = dp->max_spacing();
    gr.masked_cells = dp->masked_count();

    auto t0 = clock::now();
    const auto g = sample_potential(cfg.potential, dp, cfg.sampling);
    require(g.min_value() >= 0.0, "potential takes negative values; the pipeline needs g >= 0 (see verdict for signed g)");
    require(g.max_abs() > 0.0, "potential vanishes on the grid");
    stamp(tag + " sample", t0);

    t0 = clock::now();
    auto family = default_family(g, cfg.family);
    for (const auto& b : cfg.family_balls) {
      require(static_cast<int>(b.center.size()) == n, "family ball has the wrong dimension");
      auto F = CompactSet::ball(dp, b.center, b.radius).trimmed();
      if (!F.empty()) family.push_back({"ball" + detail::format_point(b.center) + " r=" + std::to_string(b.radius), std::move(F)});
    }
    const auto low = mazya_lower_bound(g, cfg.p, family, cap_cfg, cfg.threads);
    gr.lower = low.lower;
    gr.lower_set = low.best ? low.family_log[*low.best].descriptor : "";
    gr.family_size = family.size();
    stamp(tag + " mazya_lower_bound", t0);

    t0 = clock::now();
    const auto bc = best_constant({dp, g, cfg.p, ray_cfg});
    gr.B = bc.B;
    gr.B_converged = bc.trace.converged;
    gr.iterations = bc.trace.iterations;
    gr.residual = bc.residual;
    gr.sandwich = hardy_sandwich(gr.lower, gr.B, cfg.p);
    stamp(tag + " best_constant", t0);

    t0 = clock::now();
    ConcentrationOptions co = concentration_options_for(cfg.potential);
    co.lattice_per_axis = cfg.concentration.lattice_per_axis;
    co.levels = cfg.concentration.levels;
    co.cells_per_radius = cfg.concentration.cells_per_radius;
    co.radii = cfg.concentration.radii;
    co.centers = cfg.concentration.centers;
    for (const auto& s : cfg.concentration.seeds) co.seeds.push_back(s);
    co.include_infinity = cfg.concentration.include_infinity;
    co.threads = cfg.threads;
    co.solver = cap_cfg;
    co.sampling = cfg.sampling;
    const auto map = concentration_function(cfg.potential, dp, cfg.p, co);
    gr.noise_floor = map.noise_floor;
    gr.warnings = map.warnings;
    for (const auto& L : map.centers) gr.ladders.push_back(detail::summarize(L));
    gr.singular_set = singular_set(map);
    const auto cv = compactness_verdict(map);
    gr.compactness = cv.verdict;
    gr.witnesses = cv.witnesses;
    gr.attainment = attainment_criterion(map, *dp, gr.B);
    stamp(tag + " concentration", t0);

    calls.push_back({{"grid", gi},
                     {"calls",
                      {"sample_potential", "default_family + family_balls", "mazya_lower_bound", "best_constant",
                       "evp_residual", "hardy_sandwich", "concentration_function (sampled windows)", "singular_set",
                       "compactness_verdict", "attainment_criterion"}}});
    rep.grids.push_back(std::move(gr));
  }

  if (cfg.capacity_checks) {
    const auto t0 = clock::now();
    const auto checks = check_capacity_properties(detail::standard_capacity_checks(cfg.grids.front().make(), cfg.p, cap_cfg));
    rep.capacity_checks = checks.rows;
    rep.measure_constant = checks.measure_constant;
    calls.push_back({{"grid", 0}, {"calls", {"check_capacity_properties"}}});
    stamp("capacity checks", t0);
  }

  rep.provenance = {{"config", to_json(cfg)},
                    {"modules", calls},
                    {"notes",
                     {"lower bounds are maxima over the recorded family",
                      "B is the reciprocal of the smallest Rayleigh quotient found",
                      "C_g estimates are taken at the smallest rung; the limit is not extrapolated",
                      "wall time is written to timing.json next to the report"}}};
  if (timing) timing->total = std::chrono::duration<double>(clock::now() - start).count();
  return rep;
}

// ---------------------------------------------------------------------------
// Emission.

enum class EmitFormat { json, csv };

/// JSON: report.json. CSV: ladder.csv (one row per center and rung), trend.csv
/// (one row per grid) and capacity_checks.csv. Returns the written paths.
inline std::vector<std::string> emit(const HardyReport& r, EmitFormat format, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir + ": " + ec.message());
  auto open = [&](const std::string& name, std::vector<std::string>& paths) {
    const auto path = (fs::path(dir) / name).string();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    paths.push_back(path);
    return out;
  };
  std::vector<std::string> paths;
  auto fmt = [](double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
  };
  if (format == EmitFormat::json) {
    auto out = open("report.json", paths);
    out << to_json(r).dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + paths.back());
    return paths;
  }
  {
    auto out = open("ladder.csv", paths);
    out << "grid,center,r,Cg,capacity,integral\n";
    for (std::size_t gi = 0; gi < r.grids.size(); ++gi)
      for (const auto& L : r.grids[gi].ladders)
        for (const auto& row : L.rows)
          out << gi << ",\"" << L.center << "\"," << fmt(row.r) << ',' << fmt(row.value) << ',' << fmt(row.capacity) << ','
              << fmt(row.integral) << '\n';
  }
  {
    auto out = open("trend.csv", paths);
    out << "grid,L,h,lower,B\n";
    for (std::size_t gi = 0; gi < r.grids.size(); ++gi) {
      const auto& g = r.grids[gi];
      double L = 0.0;
      for (std::size_t k = 0; k < g.grid.lo.size(); ++k) L = std::max(L, 0.5 * (g.grid.hi[k] - g.grid.lo[k]));
      out << gi << ',' << fmt(L) << ',' << fmt(g.spacing) << ',' << fmt(g.lower) << ',' << fmt(g.B) << '\n';
    }
  }
  {
    auto out = open("capacity_checks.csv", paths);
    out << "property,lhs,rhs,pass\n";
    for (const auto& c : r.capacity_checks) out << c.property << ',' << fmt(c.lhs) << ',' << fmt(c.rhs) << ',' << (c.pass ? 1 : 0) << '\n';
  }
  return paths;
}

inline void write_timing(const PipelineTiming& t, const std::string& dir) {
  nlohmann::json j{{"total_seconds", t.total}, {"stages", nlohmann::json::array()}};
  for (const auto& [name, s] : t.stages) j["stages"].push_back({{"stage", name}, {"seconds", s}});
  std::filesystem::create_directories(dir);
  std::ofstream out(std::filesystem::path(dir) / "timing.json");
  if (!out) throw std::runtime_error("cannot write timing.json in " + dir);
  out << j.dump(2) << '\n';
}

}  // namespace hardy
