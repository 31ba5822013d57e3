#include "perpetual/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <boost/version.hpp>
#include <json.hpp>

#include "perpetual/pde.hpp"

namespace perpetual::cli {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Formatting and small parsers

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_row(const Row& r) {
  std::string s = format_double(r.t);
  for (const auto& v : {r.cdf, r.density, r.err_est}) {
    s += ',';
    if (v) s += format_double(*v);
  }
  return s;
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double to_double(const std::string& text, const std::string& what) {
  const std::string s = trim(text);
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw ConfigError("invalid number for " + what + ": '" + text + "'");
  }
  if (pos != s.size()) throw ConfigError("invalid number for " + what + ": '" + text + "'");
  return v;
}

model::BoundaryKind parse_kind(const std::string& s) {
  static const std::map<std::string, model::BoundaryKind> kinds{
      {"natural", model::BoundaryKind::Natural},
      {"entrance", model::BoundaryKind::EntranceNotExit},
      {"exit", model::BoundaryKind::ExitNotEntrance},
      {"reflecting", model::BoundaryKind::RegularReflecting},
      {"killing", model::BoundaryKind::RegularKilling}};
  auto it = kinds.find(s);
  if (it == kinds.end()) throw ConfigError("unknown boundary kind '" + s + "'");
  return it->second;
}

model::Params parse_params(const std::string& s) {
  model::Params p;
  if (trim(s).empty()) return p;
  for (const auto& item : split(s, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("parameter '" + item + "' is not of the form name=value");
    p[trim(item.substr(0, eq))] = to_double(item.substr(eq + 1), trim(item.substr(0, eq)));
  }
  return p;
}

}  // namespace

std::vector<double> TGrid::points() const {
  validate();
  std::vector<double> t(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    const double u = double(i) / (steps - 1);
    t[static_cast<std::size_t>(i)] =
        log ? t_min * std::pow(t_max / t_min, u) : t_min + (t_max - t_min) * u;
  }
  t.back() = t_max;
  return t;
}

void TGrid::validate() const {
  if (!(t_min > 0.0)) throw ConfigError("t grid requires t_min > 0");
  if (!(t_max > t_min)) throw ConfigError("t grid requires t_max > t_min");
  if (steps < 2) throw ConfigError("t grid requires at least 2 steps");
}

TGrid parse_tgrid(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() < 3 || parts.size() > 4) throw ConfigError("t grid must be tmin:tmax:steps[:linear|log]");
  TGrid g;
  g.t_min = to_double(parts[0], "t_min");
  g.t_max = to_double(parts[1], "t_max");
  const double steps = to_double(parts[2], "steps");
  if (steps != std::floor(steps) || steps > 1e7) throw ConfigError("t grid steps must be an integer");
  g.steps = static_cast<int>(steps);
  if (parts.size() == 4) {
    if (parts[3] == "log") g.log = true;
    else if (parts[3] != "linear") throw ConfigError("t grid spacing must be linear or log");
  }
  g.validate();
  return g;
}

void RunConfig::validate() const {
  static const std::vector<std::string> known{"invert", "pde", "mc", "compare"};
  if (std::find(known.begin(), known.end(), method) == known.end()) throw ConfigError("unknown method '" + method + "'");
  if (example && custom) throw ConfigError("choose either --example or a custom problem");
  if (!example && !custom) throw ConfigError("no problem given: use --example or --f/--drift");
  if (example) catalog::complete_params(*example, params);
  if (untransformed && (!example || *example != catalog::Id::I6))
    throw ConfigError("--untransformed applies to the bessel example only");
  t.validate();
  euler.validate();
  if (T && !(*T >= t.t_max)) throw ConfigError("PDE horizon T must cover t_max");
  pde::GridSpec g{0.0, 1.0, N, T.value_or(t.t_max), M, be_substeps};
  g.validate();
  sim.validate();
  for (const auto& m : methods)
    if (m != "invert" && m != "pde" && m != "mc") throw ConfigError("unknown method '" + m + "' in --methods");
}

// ---------------------------------------------------------------------------
// Command line

std::optional<RunConfig> parse_command_line(int argc, const char* const* argv, std::ostream& out) {
  RunConfig cfg;
  for (int i = 0; i < argc; ++i) cfg.argv.emplace_back(i == 0 ? fs::path(argv[0]).filename().string() : argv[i]);

  CLI::App app{"Distributions of perpetual integral functionals of diffusions", "perpetual"};
  app.set_config("--config", "", "TOML file with option values; command-line flags take precedence");
  app.set_version_flag("--version", std::string("perpetual ") + kVersion);
  app.require_subcommand(1);
  for (const char* name : {"invert", "pde", "mc", "compare"}) {
    static const std::map<std::string, std::string> help{
        {"invert", "Laplace inversion of the closed-form transform"},
        {"pde", "Crank-Nicolson solve of the hitting-time problem"},
        {"mc", "Monte Carlo simulation of the functional"},
        {"compare", "run every available method and report discrepancies"}};
    app.add_subcommand(name, help.at(name))->fallthrough();
  }

  std::string example, tgrid = "0.05:10:200:linear", interval, params_text, left_kind = "natural",
                       right_kind = "natural", methods, one_sided_mode = "indicator";
  std::optional<double> mu, sigma, delta, T, far_cutoff;
  CustomProblem custom;
  bool one_sided = false, no_plot = false;
  std::string sigma_expr, drift_expr, f_expr, g_expr;
  std::optional<double> start;

  app.add_option("--example", example, "catalog problem: cosh, dufresne, translated, onesided, onesided-translated, bessel (or I1..I6)");
  app.add_option("--mu", mu, "drift parameter mu");
  app.add_option("--sigma", sigma, "volatility parameter sigma");
  app.add_option("--delta", delta, "Bessel dimension delta");
  app.add_flag("--untransformed", cfg.untransformed, "bessel: solve the untransformed Z instead of the h-transform");
  app.add_option("--sigma-expr", sigma_expr, "custom: diffusion coefficient sigma(x)");
  app.add_option("--drift-expr", drift_expr, "custom: drift b(x)");
  app.add_option("--f-expr", f_expr, "custom: integrand f(x)");
  app.add_option("--g-expr", g_expr, "custom: closed-form transform g(x) with (g' sigma)^2 = f");
  app.add_option("--params", params_text, "custom: parameter values, name=value[,name=value...]");
  app.add_option("--interval", interval, "custom: lo:hi (inf allowed)");
  app.add_option("--start", start, "custom: starting point");
  app.add_flag("--one-sided", one_sided, "custom: integrate only while the path is positive");
  app.add_option("--left-kind", left_kind, "custom: natural, entrance, exit, reflecting, killing");
  app.add_option("--right-kind", right_kind, "custom: natural, entrance, exit, reflecting, killing");
  app.add_option("--t", tgrid, "output times tmin:tmax:steps[:linear|log]");
  app.add_option("--euler-A", cfg.euler.A, "Euler inversion: A");
  app.add_option("--euler-m", cfg.euler.m, "Euler inversion: binomial order m");
  app.add_option("--euler-n", cfg.euler.n, "Euler inversion: partial sums n");
  app.add_option("-N,--space-intervals", cfg.N, "PDE: space intervals");
  app.add_option("-M,--time-steps", cfg.M, "PDE: time steps");
  app.add_option("-T,--horizon", T, "PDE: time horizon (default t_max)");
  app.add_option("--be-substeps", cfg.be_substeps, "PDE: backward-Euler substeps in the first step");
  app.add_flag("--richardson", cfg.richardson, "PDE: also compute the N vs 2N convergence estimate");
  app.add_option("--paths", cfg.sim.paths, "MC: number of paths");
  app.add_option("--dt", cfg.sim.dt, "MC: Euler-Maruyama step");
  app.add_option("--t-cap", cfg.sim.t_cap, "MC: time cap per path");
  app.add_option("--far-cutoff", far_cutoff, "MC: level where paths stop (default from --tail-tol)");
  app.add_option("--tail-tol", cfg.sim.tail_tol, "MC: tail bound for the automatic cutoff");
  app.add_option("--seed", cfg.sim.seed, "MC: random seed");
  app.add_option("--one-sided-mode", one_sided_mode, "MC: indicator or reflected");
  app.add_option("--threads", cfg.sim.threads, "MC: worker threads (0 = all cores)");
  app.add_option("--methods", methods, "compare: comma-separated subset of invert,pde,mc");
  app.add_option("-o,--output", cfg.output, "CSV output path (default: $" + std::string(kOutputDirEnv) + " or .)");
  app.add_flag("--no-plot", no_plot, "do not write the gnuplot script");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return std::nullopt;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return std::nullopt;
  } catch (const CLI::CallForVersion& e) {
    out << "perpetual " << kVersion << "\n";
    return std::nullopt;
  } catch (const CLI::ParseError& e) {
    throw ConfigError(e.what());
  }
  for (auto* sub : app.get_subcommands()) cfg.method = sub->get_name();

  cfg.plot = !no_plot;
  cfg.t = parse_tgrid(tgrid);
  cfg.T = T;
  if (far_cutoff) cfg.sim.far_cutoff = *far_cutoff;
  if (one_sided_mode == "indicator") cfg.sim.one_sided_mode = mc::OneSidedMode::Indicator;
  else if (one_sided_mode == "reflected") cfg.sim.one_sided_mode = mc::OneSidedMode::Reflected;
  else throw ConfigError("--one-sided-mode must be indicator or reflected");
  if (!methods.empty())
    for (const auto& m : split(methods, ',')) cfg.methods.push_back(trim(m));

  const bool any_custom = !f_expr.empty() || !drift_expr.empty() || !sigma_expr.empty() || !g_expr.empty() ||
                          !interval.empty() || start || one_sided || !params_text.empty();
  if (!example.empty()) {
    if (any_custom) throw ConfigError("custom problem options cannot be combined with --example");
    cfg.example = catalog::parse_id(example);
    if (!cfg.example) throw ConfigError("unknown example '" + example + "'");
    if (mu) cfg.params["mu"] = *mu;
    if (sigma) cfg.params["sigma"] = *sigma;
    if (delta) cfg.params["delta"] = *delta;
  } else if (any_custom) {
    if (mu || sigma || delta) throw ConfigError("--mu/--sigma/--delta apply to catalog examples; use --params");
    if (!sigma_expr.empty()) custom.sigma = sigma_expr;
    if (!drift_expr.empty()) custom.drift = drift_expr;
    if (!f_expr.empty()) custom.f = f_expr;
    custom.g = g_expr;
    if (!interval.empty()) {
      const auto parts = split(interval, ':');
      if (parts.size() != 2) throw ConfigError("--interval must be lo:hi");
      custom.lo = to_double(parts[0], "interval lo");
      custom.hi = to_double(parts[1], "interval hi");
    }
    custom.start = start.value_or(0.0);
    custom.one_sided = one_sided;
    custom.left_kind = parse_kind(left_kind);
    custom.right_kind = parse_kind(right_kind);
    custom.params = parse_params(params_text);
    cfg.custom = custom;
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Problems and methods

namespace {

struct Problem {
  std::string name;
  std::string description;
  std::optional<std::function<special::Cplx(special::Cplx)>> lt;
  std::optional<std::function<double(double)>> exact_cdf;
  model::DiffusionSpec y;
  model::FunctionalSpec fs;
  std::function<model::HittingProblem()> hitting;
};

std::string describe_params(const model::Params& p) {
  std::string s;
  for (const auto& [k, v] : p) s += (s.empty() ? "" : " ") + k + "=" + format_double(v);
  return s;
}

Problem resolve(const RunConfig& cfg) {
  Problem pr;
  if (cfg.example) {
    const catalog::Id id = *cfg.example;
    const model::Params p = catalog::complete_params(id, cfg.params);
    pr.name = std::string(catalog::cli_name(id));
    pr.description = std::string(catalog::to_string(id)) + " " + describe_params(p);
    pr.y = catalog::diffusion_spec(id, p);
    pr.fs = catalog::functional_spec(id, p);
    if (id == catalog::Id::I1) pr.lt = [mu = p.at("mu")](special::Cplx r) { return catalog::lt_I1(r, mu); };
    if (id == catalog::Id::I2 || id == catalog::Id::I4) {
      const double mu = p.at("mu"), s = p.at("sigma");
      if (id == catalog::Id::I2) {
        pr.lt = [mu, s](special::Cplx r) { return catalog::lt_I2(r, mu, s); };
        pr.exact_cdf = [mu, s](double t) { return catalog::exact_cdf_I2(t, mu, s); };
      } else {
        pr.lt = [mu, s](special::Cplx r) { return catalog::lt_I4(r, mu, s); };
      }
    }
    if (id == catalog::Id::I3) pr.lt = [mu = p.at("mu")](special::Cplx r) { return catalog::lt_I3(r, mu); };
    if (id == catalog::Id::I6 && p.at("delta") == 3.0) pr.lt = [](special::Cplx r) { return catalog::lt_I6_delta3(r); };
    const bool untransformed = cfg.untransformed;
    pr.hitting = [id, p, untransformed] {
      if (id == catalog::Id::I6 && !untransformed) return catalog::htransform_I6(p.at("delta"));
      return catalog::zspec(id, p);
    };
    if (id == catalog::Id::I6) pr.description += untransformed ? " (untransformed Z)" : " (h-transform)";
    return pr;
  }
  const CustomProblem& c = *cfg.custom;
  pr.name = "custom";
  pr.y.interval = {c.lo, c.hi};
  pr.y.params = c.params;
  pr.y.sigma = expr::parse(c.sigma, c.params);
  pr.y.drift = expr::parse(c.drift, c.params);
  pr.y.left_boundary = c.left_kind;
  pr.y.right_boundary = c.right_kind;
  pr.y.start = c.start;
  pr.fs.f = expr::parse(c.f, c.params);
  pr.fs.one_sided = c.one_sided;
  if (!c.g.empty()) pr.fs.g = expr::parse(c.g, c.params);
  pr.description = "sigma(x) = " + c.sigma + ", b(x) = " + c.drift + ", f(x) = " + c.f +
                   (c.one_sided ? " (one-sided)" : "") + (c.params.empty() ? "" : ", " + describe_params(c.params));
  pr.y.validate();
  const model::DiffusionSpec y = pr.y;
  const model::FunctionalSpec fs = pr.fs;
  pr.hitting = [y, fs] { return fs.one_sided ? model::reduce_one_sided(y, fs) : model::reduce(y, fs); };
  return pr;
}

struct Curve {
  std::string method;
  std::vector<Row> rows;
  std::vector<std::string> notes;  // header lines
  json diagnostics = json::object();
  std::function<double(double)> cdf;  // for KS against the MC sample
  std::vector<double> sample;         // MC only
  bool failed_reliability = false;
};

Curve run_invert(const Problem& pr, const RunConfig& cfg) {
  if (!pr.lt)
    throw UnavailableMethod("no Laplace transform is available for " + pr.name +
                            (pr.name == "onesided-translated" ? " (its transform is not known)" : ""));
  Curve c;
  c.method = "invert";
  const auto ts = cfg.t.points();
  const auto ccdf = laplace::invert_on_grid(laplace::ccdf_transform(*pr.lt), ts, cfg.euler);
  const auto dens = laplace::invert_on_grid(laplace::density_transform(*pr.lt), ts, cfg.euler);
  double max_err = 0.0;
  int flagged = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    c.rows.push_back({ts[i], 1.0 - ccdf[i].value, dens[i].value, ccdf[i].err_est});
    max_err = std::max(max_err, ccdf[i].err_est);
    flagged += ccdf[i].flagged;
  }
  const auto mono = laplace::monotonicity_violations(ccdf);
  // Direct density against central differences of the inverted CDF.
  double dens_gap = 0.0;
  for (std::size_t i = 1; i + 1 < ts.size(); ++i) {
    const double fd = (ccdf[i - 1].raw - ccdf[i + 1].raw) / (ts[i + 1] - ts[i - 1]);
    dens_gap = std::max(dens_gap, std::abs(fd - dens[i].value));
  }
  c.diagnostics = {{"max_err_est", max_err}, {"flagged_points", flagged}, {"monotonicity_violations", mono.size()},
                   {"density_fd_discrepancy", dens_gap}, {"A", cfg.euler.A}, {"m", cfg.euler.m}, {"n", cfg.euler.n}};
  c.notes.push_back("Euler inversion A=" + format_double(cfg.euler.A) + " m=" + std::to_string(cfg.euler.m) +
                    " n=" + std::to_string(cfg.euler.n));
  c.notes.push_back("max err_est " + format_double(max_err) + "; points with err_est > 1e-6: " + std::to_string(flagged) +
                    "; monotonicity violations: " + std::to_string(mono.size()));
  c.notes.push_back("density vs central difference of the CDF: max gap " + format_double(dens_gap));
  const auto lt = *pr.lt;
  const laplace::EulerParams ep = cfg.euler;
  c.cdf = [lt, ep](double t) {
    if (t <= 0.0) return 0.0;
    return 1.0 - std::clamp(laplace::euler_invert(laplace::ccdf_transform(lt), t, ep).value, 0.0, 1.0);
  };
  return c;
}

Curve run_pde(const Problem& pr, const RunConfig& cfg) {
  const model::HittingProblem hp = pr.hitting();
  if (!std::isfinite(hp.target))
    throw UnavailableMethod("the hitting target g(r) is infinite; the PDE route needs a finite target");
  Curve c;
  c.method = "pde";
  const double T = cfg.T.value_or(cfg.t.t_max);
  const pde::GridSpec grid = pde::make_grid(hp, cfg.N, cfg.M, T, cfg.be_substeps);
  pde::SolveOptions opt;
  opt.keep_lattice = false;
  auto sol = std::make_shared<pde::GridSolution>(pde::solve(hp, grid, opt));
  const double dt = grid.dt();
  for (double t : cfg.t.points()) {
    const double a = std::max(0.0, t - dt), b = std::min(T, t + dt);
    c.rows.push_back({t, pde::cdf_at(*sol, t), (pde::cdf_at(*sol, b) - pde::cdf_at(*sol, a)) / (b - a), std::nullopt});
  }
  c.diagnostics = {{"x_lo", grid.x_lo},       {"x_hi", grid.x_hi},          {"N", grid.N},
                   {"M", grid.M},             {"T", grid.T},                {"be_substeps", grid.be_substeps},
                   {"start", hp.start},       {"target", hp.target},        {"min_value", sol->min_value},
                   {"max_value", sol->max_value}, {"excursion_flag", sol->excursion_flag}};
  c.notes.push_back("grid x in [" + format_double(grid.x_lo) + ", " + format_double(grid.x_hi) +
                    "] N=" + std::to_string(grid.N) + " M=" + std::to_string(grid.M) + " T=" + format_double(T) +
                    " be_substeps=" + std::to_string(grid.be_substeps) + " start=" + format_double(hp.start) +
                    " target=" + format_double(hp.target));
  c.notes.push_back("lattice range [" + format_double(sol->min_value) + ", " + format_double(sol->max_value) +
                    "] excursion_flag=" + (sol->excursion_flag ? "1" : "0"));
  const bool truncated = std::isfinite(hp.target) &&
                         !std::isfinite(hp.target_side() == model::Side::Right ? hp.interval.lo : hp.interval.hi);
  if (truncated) {
    const double sens = pde::truncation_sensitivity(hp, grid);
    c.diagnostics["truncation_sensitivity"] = sens;
    c.notes.push_back("truncation sensitivity (cut moved 25% out) " + format_double(sens));
  }
  if (cfg.richardson || cfg.method == "compare") {
    const pde::ConvergenceReport r = pde::richardson(hp, grid);
    c.diagnostics["richardson_estimate"] = r.richardson_estimate;
    c.diagnostics["observed_order"] = r.observed_order;
    c.diagnostics["slow_convergence"] = r.slow;
    c.notes.push_back("richardson estimate " + format_double(r.richardson_estimate) + " observed order " +
                      format_double(r.observed_order) + " slow_convergence=" + (r.slow ? "1" : "0"));
  }
  c.cdf = [sol, T](double t) { return t <= 0.0 ? 0.0 : pde::cdf_at(*sol, std::min(t, T)); };
  return c;
}

Curve run_mc(const Problem& pr, const RunConfig& cfg) {
  Curve c;
  c.method = "mc";
  const mc::SimResult r = mc::simulate_functional(pr.y, pr.fs, cfg.sim);
  auto sorted = std::make_shared<std::vector<double>>(r.samples);
  std::sort(sorted->begin(), sorted->end());
  const double n = static_cast<double>(sorted->size());
  for (double t : cfg.t.points()) {
    const double F = mc::empirical_cdf(*sorted, t);
    c.rows.push_back({t, F, std::nullopt, std::sqrt(F * (1.0 - F) / n)});
  }
  c.sample = r.samples;
  c.cdf = [sorted](double t) { return mc::empirical_cdf(*sorted, t); };
  c.failed_reliability = r.unreliable;
  c.diagnostics = {{"paths", cfg.sim.paths},     {"dt", cfg.sim.dt},          {"seed", cfg.sim.seed},
                   {"far_cutoff", r.far_cutoff}, {"tail_bound", r.tail_bound}, {"capped", r.capped},
                   {"unreliable", r.unreliable}, {"mean", r.mean},          {"std_error", r.std_error},
                   {"rng", r.rng}};
  c.notes.push_back("rng " + r.rng + " seed=" + std::to_string(cfg.sim.seed));
  c.notes.push_back("paths=" + std::to_string(cfg.sim.paths) + " dt=" + format_double(cfg.sim.dt) +
                    " far_cutoff=" + format_double(r.far_cutoff) + " tail_bound=" + format_double(r.tail_bound) +
                    " capped=" + std::to_string(r.capped) + (r.unreliable ? " UNRELIABLE" : ""));
  c.notes.push_back("mean " + format_double(r.mean) + " +/- " + format_double(r.std_error));
  return c;
}

json config_echo(const RunConfig& cfg) {
  json j;
  j["method"] = cfg.method;
  if (cfg.example) {
    j["example"] = std::string(catalog::cli_name(*cfg.example));
    j["params"] = catalog::complete_params(*cfg.example, cfg.params);
    j["untransformed"] = cfg.untransformed;
  }
  if (cfg.custom) {
    const auto& c = *cfg.custom;
    j["custom"] = {{"sigma", c.sigma}, {"drift", c.drift}, {"f", c.f}, {"g", c.g},
                   {"interval", {format_double(c.lo), format_double(c.hi)}}, {"start", c.start},
                   {"one_sided", c.one_sided}, {"left_kind", model::to_string(c.left_kind)},
                   {"right_kind", model::to_string(c.right_kind)}, {"params", c.params}};
  }
  j["t"] = {{"min", cfg.t.t_min}, {"max", cfg.t.t_max}, {"steps", cfg.t.steps}, {"spacing", cfg.t.log ? "log" : "linear"}};
  j["euler"] = {{"A", cfg.euler.A}, {"m", cfg.euler.m}, {"n", cfg.euler.n}};
  j["grid"] = {{"N", cfg.N}, {"M", cfg.M}, {"T", cfg.T.value_or(cfg.t.t_max)}, {"be_substeps", cfg.be_substeps}};
  j["sim"] = {{"paths", cfg.sim.paths}, {"dt", cfg.sim.dt}, {"t_cap", cfg.sim.t_cap},
              {"far_cutoff", std::isnan(cfg.sim.far_cutoff) ? json("auto") : json(cfg.sim.far_cutoff)},
              {"tail_tol", cfg.sim.tail_tol}, {"seed", cfg.sim.seed},
              {"one_sided_mode", cfg.sim.one_sided_mode == mc::OneSidedMode::Indicator ? "indicator" : "reflected"},
              {"batches", cfg.sim.batches}};
  if (!cfg.methods.empty()) j["methods"] = cfg.methods;
  return j;
}

std::vector<std::string> provenance(const RunConfig& cfg, const Problem& pr) {
  std::string cmd;
  for (const auto& a : cfg.argv) cmd += (cmd.empty() ? "" : " ") + a;
  return {std::string("perpetual ") + kVersion + " (boost " + std::to_string(BOOST_VERSION / 100000) + "." +
              std::to_string(BOOST_VERSION / 100 % 1000) + ", " + __VERSION__ + ")",
          "command: " + cmd, "config: " + config_echo(cfg).dump(), "problem: " + pr.description};
}

fs::path output_stem(const RunConfig& cfg, const Problem& pr) {
  if (!cfg.output.empty()) {
    fs::path p(cfg.output);
    if (p.extension() == ".csv") p.replace_extension();
    return p;
  }
  const char* env = std::getenv(kOutputDirEnv);
  const fs::path dir = (env && *env) ? fs::path(env) : fs::path(".");
  return dir / (pr.name + "_" + cfg.method);
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_csv(const fs::path& path, const std::vector<std::string>& header, const Curve& c) {
  ensure_parent(path);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path.string());
  for (const auto& h : header) os << "# " << h << '\n';
  os << "# method: " << c.method << '\n';
  for (const auto& n : c.notes) os << "# " << n << '\n';
  os << "t,cdf,density,err_est\n";
  for (const auto& r : c.rows) os << format_row(r) << '\n';
  if (!os) throw ConfigError("failed writing " + path.string());
}

void write_plot(const fs::path& script, const std::vector<std::pair<std::string, fs::path>>& csvs, bool density) {
  std::ofstream os(script, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + script.string());
  os << "# gnuplot script; run: gnuplot -p " << script.filename().string() << "\n";
  os << "set datafile separator ','\nset datafile commentschars '#'\nset key autotitle columnhead\n";
  os << "set xlabel 't'\nset ylabel 'P(A <= t)'\nset grid\n";
  os << "plot ";
  for (std::size_t i = 0; i < csvs.size(); ++i)
    os << (i ? ", \\\n     " : "") << "'" << csvs[i].second.filename().string() << "' using 1:2 with lines title '"
       << csvs[i].first << " cdf'";
  os << "\n";
  if (density) {
    os << "pause -1 'press enter for the density'\nset ylabel 'density'\nplot ";
    bool first = true;
    for (const auto& [name, path] : csvs) {
      if (name == "mc") continue;
      os << (first ? "" : ", \\\n     ") << "'" << path.filename().string() << "' using 1:3 with lines title '" << name
         << " density'";
      first = false;
    }
    os << "\n";
  }
}

double sup_difference(const Curve& a, const Curve& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < std::min(a.rows.size(), b.rows.size()); ++i)
    if (a.rows[i].cdf && b.rows[i].cdf) d = std::max(d, std::abs(*a.rows[i].cdf - *b.rows[i].cdf));
  return d;
}

}  // namespace

int run(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const Problem pr = resolve(cfg);
  const auto header = provenance(cfg, pr);
  const fs::path stem = output_stem(cfg, pr);

  auto runner = [&](const std::string& m) -> Curve {
    if (m == "invert") return run_invert(pr, cfg);
    if (m == "pde") return run_pde(pr, cfg);
    return run_mc(pr, cfg);
  };

  if (cfg.method != "compare") {
    const Curve c = runner(cfg.method);
    fs::path csv = stem;
    csv += ".csv";
    write_csv(csv, header, c);
    if (cfg.plot) {
      fs::path gp = stem;
      gp += ".gp";
      write_plot(gp, {{c.method, csv}}, c.method != "mc");
    }
    log << "wrote " << csv.string() << "\n";
    for (const auto& n : c.notes) log << "  " << n << "\n";
    if (c.failed_reliability) {
      log << "error: more than 1% of the paths hit t_cap; the Monte Carlo oracle is unreliable here\n";
      return kNumericalFailure;
    }
    return kOk;
  }

  std::vector<std::string> methods = cfg.methods;
  if (methods.empty()) {
    if (pr.lt) methods.push_back("invert");
    methods.push_back("pde");
    methods.push_back("mc");
  }
  if (std::find(methods.begin(), methods.end(), "invert") != methods.end() && !pr.lt)
    throw UnavailableMethod("no Laplace transform is available for " + pr.name);

  std::vector<std::future<Curve>> jobs;
  for (const auto& m : methods) jobs.push_back(std::async(std::launch::async, runner, m));
  std::vector<Curve> curves;
  for (auto& j : jobs) curves.push_back(j.get());

  json report;
  report["version"] = kVersion;
  report["problem"] = pr.description;
  report["config"] = config_echo(cfg);
  std::vector<std::pair<std::string, fs::path>> csvs;
  for (const auto& c : curves) {
    fs::path csv = stem;
    csv += "_" + c.method + ".csv";
    write_csv(csv, header, c);
    csvs.emplace_back(c.method, csv);
    report["methods"][c.method] = c.diagnostics;
    report["outputs"][c.method] = csv.filename().string();
  }
  json pairs = json::array();
  for (std::size_t i = 0; i < curves.size(); ++i)
    for (std::size_t j = i + 1; j < curves.size(); ++j)
      pairs.push_back({{"a", curves[i].method}, {"b", curves[j].method}, {"sup_cdf_difference", sup_difference(curves[i], curves[j])}});
  report["pairs"] = pairs;
  for (const auto& c : curves) {
    if (c.method != "mc") continue;
    for (const auto& o : curves)
      if (o.method != "mc") report["methods"]["mc"]["ks_vs_" + o.method] = mc::ks_distance(c.sample, o.cdf);
    if (pr.exact_cdf) {
      const auto ex = *pr.exact_cdf;
      report["methods"]["mc"]["ks_vs_exact"] = mc::ks_distance(c.sample, [ex](double t) { return t > 0 ? ex(t) : 0.0; });
    }
  }
  if (pr.exact_cdf) {
    for (const auto& c : curves) {
      double d = 0.0;
      for (const auto& r : c.rows) d = std::max(d, std::abs(*r.cdf - (*pr.exact_cdf)(r.t)));
      report["methods"][c.method]["sup_vs_exact"] = d;
    }
  }
  fs::path rep = stem;
  rep += "_report.json";
  ensure_parent(rep);
  {
    std::ofstream os(rep, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + rep.string());
    os << report.dump(2) << '\n';
  }
  if (cfg.plot) {
    fs::path gp = stem;
    gp += ".gp";
    write_plot(gp, csvs, true);
  }
  log << "wrote " << rep.string() << "\n";
  for (const auto& p : pairs)
    log << "  " << p["a"].get<std::string>() << " vs " << p["b"].get<std::string>() << ": sup |dF| = "
        << format_double(p["sup_cdf_difference"].get<double>()) << "\n";
  for (const auto& c : curves)
    if (c.failed_reliability) {
      log << "error: more than 1% of the paths hit t_cap; the Monte Carlo oracle is unreliable here\n";
      return kNumericalFailure;
    }
  return kOk;
}

int main(int argc, const char* const* argv) {
  try {
    const auto cfg = parse_command_line(argc, argv, std::cout);
    if (!cfg) return kOk;
    return run(*cfg, std::cerr);
  } catch (const UnavailableMethod& e) {
    std::cerr << "unavailable: " << e.what() << "\n";
    return kUnavailable;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const UnboundParameter& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  }
}

}  // namespace perpetual::cli
