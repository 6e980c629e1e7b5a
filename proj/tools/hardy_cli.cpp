// Command-line front end: one subcommand per library module plus the full
// pipeline. Exit codes: 0 success, 2 invalid input, 3 solver non-convergence.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "hardy/hardy.hpp"

namespace fs = std::filesystem;
using namespace hardy;
using namespace hardy::io;

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitNoConvergence = 3;

struct Globals {
  double p = 2.0;
  std::vector<std::string> grids;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out_dir;
  std::string config;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json read_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

/// "gallery:name", a JSON file, or inline JSON.
PotentialSpec load_potential(const std::string& arg) {
  if (arg.rfind("gallery:", 0) == 0) return gallery_entry(arg.substr(8));
  if (fs::exists(arg)) return potential_from_json(read_json(arg));
  try {
    return potential_from_json(nlohmann::json::parse(arg));
  } catch (const nlohmann::json::parse_error&) {
    throw InvalidInput("'" + arg + "' is neither a file, inline JSON nor gallery:<name>");
  }
}

std::vector<double> parse_list(const std::string& text, char sep = ',') {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, sep);) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      require(used == item.size(), "bad number '" + item + "'");
    } catch (const std::logic_error&) {
      throw InvalidInput("bad number '" + item + "' in '" + text + "'");
    }
  }
  return out;
}

/// "x,y,z;x,y,z".
std::vector<Point> parse_points(const std::string& text) {
  std::vector<Point> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ';');) out.push_back(parse_list(item));
  return out;
}

/// "R:K" gives R 2^{-k}, k < K; otherwise a comma list.
std::vector<double> parse_radii(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) return parse_list(text);
  const auto R = parse_list(text.substr(0, colon));
  const auto K = parse_list(text.substr(colon + 1));
  require(R.size() == 1 && K.size() == 1 && R[0] > 0.0 && K[0] >= 1.0, "radii must read R:K with R > 0, K >= 1");
  std::vector<double> out;
  for (int k = 0; k < static_cast<int>(K[0]); ++k) out.push_back(R[0] * std::pow(0.5, k));
  return out;
}

DomainPtr first_grid(const Globals& g) {
  require(!g.grids.empty(), "--grid is required, e.g. --grid 3:-2:2:32:far_field");
  return parse_grid(g.grids.front()).make();
}

/// Writes to out_dir/name when an output directory is set, else to stdout.
void deliver(const Globals& g, const std::string& name, const std::string& text) {
  if (g.out_dir.empty()) {
    std::cout << text;
    return;
  }
  fs::create_directories(g.out_dir);
  const auto path = fs::path(g.out_dir) / name;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  std::cerr << "wrote " << path.string() << '\n';
}

std::string csv_number(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------------------

int run_capacity(const Globals& g, SolverConfig cfg, const std::string& domain_file, const std::string& obstacle, const std::string& ball,
                 const std::string& out, bool checks) {
  DomainPtr d;
  if (!domain_file.empty()) {
    auto j = read_json(domain_file);
    std::string mask;
    if (j.contains("mask")) {
      mask = j.at("mask").get<std::string>();
      j.erase("mask");
    }
    auto spec = grid_spec_from_json(j);
    GridDomain dom = spec.node_aligned ? GridDomain::node_aligned(spec.lo, spec.hi, spec.cells) : GridDomain(spec.lo, spec.hi, spec.cells);
    dom.set_closure(spec.closure);
    if (!mask.empty()) dom.set_mask(read_mask(mask, dom.size()));
    d = share(dom);
  } else {
    d = first_grid(g);
  }
  require(obstacle.empty() != ball.empty(), "give exactly one of --obstacle and --ball");
  CompactSet F = [&] {
    if (!obstacle.empty()) return CompactSet(d, read_mask(obstacle, d->size()));
    const auto colon = ball.find(':');
    require(colon != std::string::npos, "--ball must read x,y,...:r");
    const auto c = parse_list(ball.substr(0, colon));
    const auto r = parse_list(ball.substr(colon + 1));
    require(static_cast<int>(c.size()) == d->dim() && r.size() == 1, "--ball center has the wrong dimension");
    return CompactSet::ball(d, c, r[0]);
  }();
  cfg.seed = g.seed;
  const auto res = capacity({d, F, g.p, cfg});
  nlohmann::json j{{"capacity", res.value}, {"converged", res.converged}, {"iterations", res.iterations},
                   {"obstacle_cells", F.count()}, {"p", g.p}};
  if (!ball.empty() && g.p < d->dim()) j["ball_in_R^N"] = capacity_ball_analytic(d->dim(), g.p, parse_list(ball.substr(ball.find(':') + 1))[0]);
  if (checks) {
    const auto rep = check_capacity_properties(detail::standard_capacity_checks(d, g.p, cfg));
    std::string csv = "property,lhs,rhs,pass\n";
    for (const auto& row : rep.rows) {
      csv += row.property + ',' + csv_number(row.lhs) + ',' + csv_number(row.rhs) + ',' + (row.pass ? "1" : "0") + '\n';
      j["checks"].push_back({{"property", row.property}, {"lhs", row.lhs}, {"rhs", row.rhs}, {"pass", row.pass}});
    }
    j["measure_constant"] = rep.measure_constant;
    if (!g.out_dir.empty()) deliver(g, "capacity_checks.csv", csv);
  }
  if (!out.empty()) write_grid_function(out, res.minimizer);
  deliver(g, "capacity.json", j.dump(2) + '\n');
  return res.converged ? 0 : kExitNoConvergence;
}

int run_rearrange(const Globals& g, const std::string& f_path, const std::string& mask, bool distribution_only,
                  const std::string& symmetrize) {
  const auto f = read_grid_function(f_path, mask);
  const auto fstar = decreasing_rearrangement(f);
  if (!symmetrize.empty()) {
    const auto s = schwarz_symmetrization(f, f.domain_ptr());
    write_grid_function(symmetrize, s.u);
    std::cerr << "symmetrization measure error " << s.measure_error << '\n';
  }
  if (distribution_only) deliver(g, "distribution.csv", distribution(f).to_csv());
  else deliver(g, "rearrangement.csv", fstar.to_csv());
  return 0;
}

int run_lorentz(const Globals& g, const std::string& f_path, const std::string& mask, const std::string& steps, double P,
                const std::string& Q_text, bool radial) {
  require(f_path.empty() != steps.empty(), "give exactly one of --f and --steps");
  const StepFunction fstar = steps.empty() ? decreasing_rearrangement(read_grid_function(f_path, mask))
                                           : StepFunction::from_csv(read_file(steps));
  nlohmann::json j;
  if (radial) {
    j = {{"radial_I_norm", radial_I_norm(fstar, g.p)}, {"p", g.p}};
  } else {
    const double Q = Q_text == "inf" ? kInf : parse_list(Q_text).at(0);
    const LorentzIndex idx(P, Q);
    j = {{"P", P}, {"Q", Q_text}, {"quasinorm", detail::num(lorentz_quasinorm(fstar, idx))}};
    if (P > 1.0) j["norm"] = detail::num(lorentz_norm(fstar, idx));
  }
  deliver(g, "lorentz.json", j.dump(2) + '\n');
  return 0;
}

int run_mazya(const Globals& g, const std::string& pot, const std::string& centers, const std::string& radii, int levels,
              int lattice, bool grid_route, bool lower) {
  const auto spec = load_potential(pot);
  const auto d = first_grid(g);
  validate(spec, d->dim(), g.p);
  ConcentrationOptions opt = concentration_options_for(spec);
  if (!centers.empty() && centers != "auto") opt.centers = parse_points(centers);
  if (!radii.empty()) opt.radii = parse_radii(radii);
  opt.levels = levels;
  opt.lattice_per_axis = lattice;
  opt.threads = g.threads;
  opt.solver.seed = g.seed;
  const auto gf = sample_potential(spec, d);
  const auto map = grid_route ? concentration_function(gf, g.p, opt) : concentration_function(spec, d, g.p, opt);
  std::string csv = "center,r,ratio,capacity,integral\n";
  for (const auto& L : map.centers)
    for (const auto& e : L.ladder)
      csv += '"' + L.label() + "\"," + csv_number(e.r) + ',' + csv_number(e.value) + ',' + csv_number(e.capacity) + ',' +
             csv_number(e.integral) + '\n';
  deliver(g, "mazya.csv", csv);
  nlohmann::json summary{{"noise_floor", map.noise_floor},
                         {"warnings", map.warnings},
                         {"singular_set", singular_set(map)},
                         {"limit", "not extrapolated"},
                         {"compactness", to_string(compactness_verdict(map).verdict)}};
  if (lower) {
    FamilyOptions fo;
    fo.lattice_per_axis = 1;
    const auto est = mazya_lower_bound(gf, g.p, default_family(gf, fo), opt.solver, g.threads);
    summary["lower"] = est.lower;
    if (est.best) summary["best_set"] = est.family_log[*est.best].descriptor;
  }
  if (!g.out_dir.empty()) deliver(g, "mazya.json", summary.dump(2) + '\n');
  else std::cerr << summary.dump() << '\n';
  return 0;
}

int run_rayleigh(const Globals& g, SolverConfig cfg, const std::string& pot, const std::string& Ls, double h, int dim, int snapshots,
                 const std::string& out_grid) {
  const auto spec = load_potential(pot);
  cfg.seed = g.seed;
  nlohmann::json j{{"p", g.p}};
  bool converged = true;
  auto trace_json = [&](const BestConstant& bc) {
    nlohmann::json snaps = nlohmann::json::array();
    for (const auto& s : bc.trace.snapshots) snaps.push_back({{"iteration", s.iteration}, {"quotient", s.quotient}});
    converged = converged && bc.trace.converged;
    return nlohmann::json{{"B", bc.B},
                          {"quotient", bc.quotient},
                          {"residual", bc.residual},
                          {"iterations", bc.trace.iterations},
                          {"converged", bc.trace.converged},
                          {"reseeds", bc.trace.reseeds},
                          {"quotients", bc.trace.quotients},
                          {"snapshots", snaps}};
  };
  if (!Ls.empty()) {
    require(dim >= 1, "--dim is required with --L");
    require(h > 0.0, "--spacing must be positive");
    const auto ladder = box_ladder(spec, dim, g.p, parse_list(Ls), h, cfg);
    for (const auto& s : ladder.steps) {
      auto t = trace_json(s.result);
      t["L"] = s.L;
      t["interior_cells"] = s.interior_cells;
      j["boxes"].push_back(t);
    }
    j["min_quotient"] = ladder.min_quotient;
    j["best_quotient"] = ladder.best_quotient;
    nlohmann::json series = nlohmann::json::array();
    for (const auto& s : ladder.diagnostic.series)
      series.push_back({{"center", s.center}, {"fraction", s.fraction}, {"concentrating", s.concentrating}});
    j["diagnostic"] = {{"verdict", to_string(ladder.diagnostic.verdict)}, {"series", series}};
    if (!out_grid.empty() && !ladder.steps.empty()) write_grid_function(out_grid, ladder.steps.back().result.u);
  } else {
    const auto d = first_grid(g);
    const auto gf = sample_potential(spec, d);
    const auto bc = best_constant({d, gf, g.p, cfg, std::nullopt, snapshots});
    j["boxes"].push_back(trace_json(bc));
    if (!out_grid.empty()) write_grid_function(out_grid, bc.u);
  }
  deliver(g, "rayleigh.json", j.dump(2) + '\n');
  return converged ? 0 : kExitNoConvergence;
}

PipelineConfig apply_globals(PipelineConfig cfg, const Globals& g, bool p_given, bool seed_given, bool threads_given) {
  if (p_given) cfg.p = g.p;
  if (seed_given) cfg.seed = g.seed;
  if (threads_given) cfg.threads = g.threads;
  if (!g.grids.empty()) {
    cfg.grids.clear();
    for (const auto& s : g.grids) cfg.grids.push_back(parse_grid(s));
  }
  return cfg;
}

int run_verdict(const Globals& g, const std::string& pot, PipelineConfig cfg) {
  cfg.potential = load_potential(pot);
  const auto d = first_grid(g);
  const auto gf = sample_potential(cfg.potential, d, cfg.sampling);
  if (gf.min_value() < 0.0) {
    // Signed weights: the criterion is applied to the positive part.
    ConcentrationOptions opt = concentration_options_for(cfg.potential);
    opt.lattice_per_axis = cfg.concentration.lattice_per_axis;
    opt.threads = cfg.threads;
    const auto v = positive_part_criterion(gf, cfg.p, opt);
    nlohmann::json j{{"potential", to_json(cfg.potential)}, {"p", cfg.p}, {"verdict", to_string(v.verdict)}};
    if (v.positive_part)
      j["positive_part"] = {{"compactness", to_string(v.positive_part->verdict)}, {"witnesses", v.positive_part->witnesses}};
    deliver(g, "verdict.json", j.dump(2) + '\n');
    return 0;
  }
  const auto rep = run_pipeline(cfg);
  deliver(g, "report.json", to_json(rep).dump(2) + '\n');
  return 0;
}

int run_pipeline_command(const Globals& g, const PipelineConfig& cfg) {
  PipelineTiming timing;
  const auto rep = run_pipeline(cfg, &timing);
  const std::string dir = g.out_dir.empty() ? "hardy_out" : g.out_dir;
  for (const auto& path : emit(rep, EmitFormat::json, dir)) std::cerr << "wrote " << path << '\n';
  for (const auto& path : emit(rep, EmitFormat::csv, dir)) std::cerr << "wrote " << path << '\n';
  write_timing(timing, dir);
  const auto& f = rep.finest();
  std::cout << "interval [" << f.lower << ", " << f.B << "]  compactness " << to_string(f.compactness) << "  attainment "
            << to_string(f.attainment.verdict) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hardy-Sobolev inequality toolkit: capacities, rearrangements, Lorentz norms, Maz'ya norms, best constants"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  auto* p_opt = app.add_option("--p", g.p, "exponent p")->capture_default_str();
  app.add_option("--grid", g.grids, "grid N:lo:hi:cells[:closure[:node]]; repeat for a resolution ladder");
  auto* seed_opt = app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  auto* threads_opt = app.add_option("--threads", g.threads, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--out-dir", g.out_dir, "write outputs here instead of stdout");
  app.add_option("--config", g.config, "JSON pipeline configuration")->check(CLI::ExistingFile);

  auto* cap = app.add_subcommand("capacity", "variational p-capacity of an obstacle");
  std::string domain_file, obstacle, ball, cap_out;
  bool checks = false;
  cap->add_option("--domain", domain_file, "domain JSON (lo, hi, cells, closure, node_aligned, mask)")->check(CLI::ExistingFile);
  cap->add_option("--obstacle", obstacle, "obstacle mask file")->check(CLI::ExistingFile);
  cap->add_option("--ball", ball, "ball obstacle x,y,...:r");
  cap->add_option("--out", cap_out, "write the capacitary potential");
  cap->add_flag("--checks", checks, "run the capacity property suite");

  auto* rea = app.add_subcommand("rearrange", "decreasing rearrangement of a grid function");
  std::string f_path, mask_path, sym_out;
  bool dist_only = false;
  rea->add_option("--f", f_path, "grid function file")->required()->check(CLI::ExistingFile);
  rea->add_option("--mask", mask_path, "mask file")->check(CLI::ExistingFile);
  rea->add_flag("--distribution", dist_only, "emit the distribution function instead");
  rea->add_option("--symmetrize", sym_out, "write the Schwarz symmetrization");

  auto* lor = app.add_subcommand("lorentz", "Lorentz norms and the radial I-norm");
  std::string steps, Q_text = "inf";
  double P = 2.0;
  bool radial = false;
  lor->add_option("--f", f_path, "grid function file")->check(CLI::ExistingFile);
  lor->add_option("--mask", mask_path, "mask file")->check(CLI::ExistingFile);
  lor->add_option("--steps", steps, "step function CSV (t_start,level)")->check(CLI::ExistingFile);
  lor->add_option("--P", P, "Lorentz P")->capture_default_str();
  lor->add_option("--Q", Q_text, "Lorentz Q or inf")->capture_default_str();
  lor->add_flag("--radial-I", radial, "treat --steps as a radial profile and report its I-norm");

  auto* maz = app.add_subcommand("mazya", "concentration ladders and Maz'ya lower bounds");
  std::string pot, centers = "auto", radii;
  int levels = 3, lattice = 0;
  bool grid_route = false, lower = false;
  maz->add_option("--g", pot, "potential: JSON file, inline JSON or gallery:<name>")->required();
  maz->add_option("--centers", centers, "auto or x,y,z;x,y,z")->capture_default_str();
  maz->add_option("--radii", radii, "R:K (R 2^-k) or a comma list");
  maz->add_option("--levels", levels, "rungs when --radii is absent")->capture_default_str();
  maz->add_option("--lattice", lattice, "lattice points per axis (0: default)")->capture_default_str();
  maz->add_flag("--grid-route", grid_route, "use the sampled grid instead of windows sampled per rung");
  maz->add_flag("--lower", lower, "also report the family lower bound");

  auto* ray = app.add_subcommand("rayleigh", "best constant by Rayleigh quotient descent");
  std::string Ls, ray_out;
  double h = 0.125;
  int dim = 0, snapshots = 10;
  ray->add_option("--g", pot, "potential: JSON file, inline JSON or gallery:<name>")->required();
  ray->add_option("--L", Ls, "box half-widths, e.g. 2,4,8 (boxes (-L, L)^N)");
  ray->add_option("--spacing", h, "grid spacing for --L")->capture_default_str();
  ray->add_option("--dim", dim, "dimension for --L");
  ray->add_option("--snapshots", snapshots, "iterates kept in the trace")->capture_default_str();
  ray->add_option("--out-grid", ray_out, "write the minimizer (largest box)");

  auto* ver = app.add_subcommand("verdict", "single-grid HardyReport for a potential");
  ver->add_option("--g", pot, "potential: JSON file, inline JSON or gallery:<name>")->required();

  auto* pip = app.add_subcommand("pipeline", "full pipeline over a resolution ladder");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }

  try {
    PipelineConfig cfg;
    if (!g.config.empty()) cfg = pipeline_config_from_json(read_json(g.config));
    cfg = apply_globals(cfg, g, p_opt->count() > 0, seed_opt->count() > 0, threads_opt->count() > 0);
    if (p_opt->count() == 0) g.p = cfg.p;
    if (*cap) return run_capacity(g, cfg.capacity, domain_file, obstacle, ball, cap_out, checks);
    if (*rea) return run_rearrange(g, f_path, mask_path, dist_only, sym_out);
    if (*lor) return run_lorentz(g, f_path, mask_path, steps, P, Q_text, radial);
    if (*maz) return run_mazya(g, pot, centers, radii, levels, lattice, grid_route, lower);
    if (*ray) return run_rayleigh(g, cfg.rayleigh, pot, Ls, h, dim, snapshots, ray_out);
    if (*ver) return run_verdict(g, pot, cfg);
    if (*pip) {
      require(!g.config.empty() || !cfg.grids.empty(), "pipeline needs --config or --grid");
      return run_pipeline_command(g, cfg);
    }
  } catch (const InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const SolverFailure& e) {
    std::cerr << "solver did not converge: " << e.what() << '\n';
    return kExitNoConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
