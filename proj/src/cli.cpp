#include "heavyflow/cli.hpp"

#include "heavyflow/field_io.hpp"
#include "heavyflow/forces.hpp"
#include "heavyflow/operators.hpp"
#include "heavyflow/selftest.hpp"

#include "CLI11.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace heavyflow {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration table
// ---------------------------------------------------------------------------
const std::vector<std::pair<std::string, std::string>>& ConfigTable::defaults() {
  static const std::vector<std::pair<std::string, std::string>> d = {
      {"grid.nx", "64"},
      {"grid.ny", "64"},
      {"grid.lx", "1"},
      {"grid.ly", "1"},
      {"grid.walls", "box"},
      {"model.m", "1000"},
      {"model.masses", "100,316.22776601683796,1000,3162.2776601683795,10000"},
      {"model.gamma", "2"},
      {"model.friction", "1"},
      {"model.p", "4"},
      {"force.preset", "vortex"},
      {"force.amplitude", "1"},
      {"force.file", ""},
      {"loop.tol_inner", "1e-10"},
      {"loop.tol_density", "1e-9"},
      {"loop.tol_outer", "1e-8"},
      {"loop.max_inner", "60"},
      {"loop.max_density", "60"},
      {"loop.max_outer", "100"},
      {"loop.damping", "1"},
      {"bounds.C_f", "calibrate"},
      {"bounds.E", "calibrate"},
      {"bounds.alpha", "0.1"},
      {"output.dir", "heavyflow-out"},
      {"run.strict", "false"},
      {"run.seed", "1"},
      {"run.threads", "0"},
      {"run.probes", "true"},
      {"run.reference", "false"},
      {"run.checkpoint", "true"},
  };
  return d;
}

ConfigTable ConfigTable::with_defaults() {
  ConfigTable t;
  for (const auto& [k, v] : defaults())
    t.values[k] = v;
  return t;
}

void ConfigTable::set(const std::string& key, const std::string& value) {
  if (!values.count(key))
    throw ConfigError("unknown configuration key '" + key + "'");
  values[key] = value;
}

const std::string& ConfigTable::get(const std::string& key) const {
  const auto it = values.find(key);
  if (it == values.end())
    throw ConfigError("unknown configuration key '" + key + "'");
  return it->second;
}

void ConfigTable::load_ini(const std::string& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("cannot read config: " + std::string(e.what()));
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) // top-level key outside any section
      throw ConfigError(path + ": key '" + section + "' must be inside a [section]");
    for (const auto& [key, value] : body)
      set(section + "." + key, value.get_value<std::string>());
  }
}

std::string ConfigTable::fingerprint() const {
  Fingerprint fp;
  for (const auto& [k, v] : values)
    if (k != "output.dir" && k != "run.threads" && k != "run.checkpoint")
      fp.add(k + "=" + v);
  return fp.hex();
}

// ---------------------------------------------------------------------------
// Typed configuration
// ---------------------------------------------------------------------------
namespace {

double to_double(const ConfigTable& t, const std::string& key) {
  const std::string& s = t.get(key);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError(key + " = '" + s + "' is not a number");
  return v;
}

long to_long(const ConfigTable& t, const std::string& key) {
  const std::string& s = t.get(key);
  long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError(key + " = '" + s + "' is not an integer");
  return v;
}

bool to_bool(const ConfigTable& t, const std::string& key) {
  const std::string& s = t.get(key);
  if (s == "true" || s == "1" || s == "yes" || s == "on")
    return true;
  if (s == "false" || s == "0" || s == "no" || s == "off")
    return false;
  throw ConfigError(key + " = '" + s + "' is not a boolean");
}

std::vector<double> to_list(const ConfigTable& t, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(t.get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
    if (b == std::string::npos)
      continue;
    item = item.substr(b, e - b + 1);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || p != item.data() + item.size())
      throw ConfigError(key + ": '" + item + "' is not a number");
    out.push_back(v);
  }
  return out;
}

void require(bool ok, const std::string& msg) {
  if (!ok)
    throw ConfigError(msg);
}

} // namespace

RunConfig RunConfig::from(const ConfigTable& t) {
  RunConfig c;
  const long nx = to_long(t, "grid.nx"), ny = to_long(t, "grid.ny");
  require(nx >= 8 && ny >= 8 && nx <= 4096 && ny <= 4096, "grid.nx and grid.ny must lie in [8, 4096]");
  const double lx = to_double(t, "grid.lx"), ly = to_double(t, "grid.ly");
  require(lx > 0 && ly > 0 && std::isfinite(lx) && std::isfinite(ly), "grid.lx and grid.ly must be positive");
  const std::string walls = t.get("grid.walls");
  WallMode mode;
  if (walls == "box")
    mode = WallMode::AllSlipWalls;
  else if (walls == "channel")
    mode = WallMode::PeriodicXSlipWallsY;
  else
    throw ConfigError("grid.walls = '" + walls + "' must be 'box' or 'channel'");
  c.grid = GridSpec(static_cast<int>(nx), static_cast<int>(ny), lx, ly, mode);

  c.params.m = to_double(t, "model.m");
  c.params.gamma = to_double(t, "model.gamma");
  c.params.f_friction = to_double(t, "model.friction");
  c.params.p_exp = to_double(t, "model.p");
  c.masses = to_list(t, "model.masses");
  c.force_preset = t.get("force.preset");
  c.amplitude = to_double(t, "force.amplitude");
  c.force_file = t.get("force.file");

  c.loop.tol_inner = to_double(t, "loop.tol_inner");
  c.loop.tol_density = to_double(t, "loop.tol_density");
  c.loop.tol_outer = to_double(t, "loop.tol_outer");
  c.loop.max_inner = static_cast<int>(to_long(t, "loop.max_inner"));
  c.loop.max_density = static_cast<int>(to_long(t, "loop.max_density"));
  c.loop.max_outer = static_cast<int>(to_long(t, "loop.max_outer"));
  c.loop.damping = to_double(t, "loop.damping");
  require(c.loop.tol_inner > 0 && c.loop.tol_density > 0 && c.loop.tol_outer > 0, "loop tolerances must be positive");
  require(c.loop.max_inner > 0 && c.loop.max_density > 0 && c.loop.max_outer > 0, "loop caps must be positive");
  require(c.loop.damping > 0 && c.loop.damping <= 1, "loop.damping must lie in (0, 1]");

  c.calibrate_cf = t.get("bounds.C_f") == "calibrate";
  c.calibrate_e = t.get("bounds.E") == "calibrate";
  if (!c.calibrate_cf)
    c.bounds.C_f = to_double(t, "bounds.C_f");
  if (!c.calibrate_e)
    c.bounds.E = to_double(t, "bounds.E");
  c.bounds.alpha = to_double(t, "bounds.alpha");
  require(c.bounds.alpha > 0 && c.bounds.C_f > 0 && c.bounds.E > 0, "bounds must be positive");

  c.output_dir = t.get("output.dir");
  c.strict = to_bool(t, "run.strict");
  c.seed = static_cast<std::uint64_t>(to_long(t, "run.seed"));
  c.threads = static_cast<int>(to_long(t, "run.threads"));
  c.probes = to_bool(t, "run.probes");
  c.reference = to_bool(t, "run.reference");
  c.checkpoint = to_bool(t, "run.checkpoint");
  c.loop.strict = c.strict;

  // Parameter constraints of the existence theory, checked before any work.
  c.params.force = VectorField(c.grid);
  try {
    c.params.validate();
    for (double m : c.masses) {
      ModelParams q = c.params;
      q.m = m;
      q.validate();
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  if (!c.force_file.empty()) {
    try {
      c.params.force = read_vector_field(c.force_file);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("force.file: ") + e.what());
    }
    require(c.params.force.grid() == c.grid, "force.file: field grid differs from the configured grid");
  } else {
    try {
      c.params.force = make_force(c.force_preset, c.grid, c.amplitude, c.params.p_exp);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("force.preset: ") + e.what());
    }
  }
  c.fingerprint = t.fingerprint();
  return c;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------
namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i)
    s += (i ? "," : "") + num(v[i]);
  return s;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t fp_value(const std::string& hex) { return std::stoull(hex, nullptr, 16); }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw std::runtime_error("cannot create output directory '" + dir + "': " + ec.message());
}

void write_state(const std::string& dir, const std::string& prefix, const IterationState& s,
                 const ModelParams& p, std::uint64_t fp) {
  write_field(dir + "/" + prefix + "r.hvf", s.r, fp);
  ScalarField rho = s.r;
  rho.values() += p.m;
  write_field(dir + "/" + prefix + "rho.hvf", rho, fp);
  write_field(dir + "/" + prefix + "u.hvf", s.u, fp);
}

void write_loop_csv(const std::string& path, const LoopReport& rep, const std::string& fp) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "# heavyflow outer loop, config " << fp << "\n";
  out << "iterate,error,ratio\n";
  for (std::size_t k = 0; k < rep.errors_per_iterate.size(); ++k)
    out << k + 1 << "," << num(rep.errors_per_iterate[k]) << ","
        << (k ? num(rep.contraction_ratios[k - 1]) : std::string("nan")) << "\n";
}

} // namespace

int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const std::uint64_t fp = fp_value(cfg.fingerprint);
  ensure_dir(cfg.output_dir);
  const bool calibrate = cfg.calibrate_cf || cfg.calibrate_e;
  AdmissibleBounds run_bounds = cfg.bounds;
  if (calibrate) {
    run_bounds.C_f = INFINITY;
    run_bounds.E = INFINITY;
  }
  LoopOptions lo = cfg.loop;
  if (calibrate)
    lo.strict = false; // bounds are unknown until the run has finished
  if (cfg.checkpoint)
    lo.on_outer_iterate = [&](int k, const IterationState& s, const LoopReport&) {
      write_state(cfg.output_dir, "checkpoint_", s, cfg.params, fp);
      write_sidecar(cfg.output_dir + "/checkpoint.txt",
                    {{"config_fingerprint", cfg.fingerprint}, {"outer_iterate", std::to_string(k)}});
    };

  LoopResult res;
  try {
    res = outer_loop(cfg.params, run_bounds, lo);
  } catch (const AdmissibilityError& e) {
    err << "solve: " << e.what() << "\n";
    return 2;
  } catch (const SolverError& e) {
    err << "solve: " << e.what() << " (residual " << e.residual() << ")\n";
    return 2;
  }

  AdmissibleBounds bounds = cfg.bounds;
  if (calibrate) {
    const AdmissibleBounds cal = calibrate_bounds(res.state, cfg.params, cfg.bounds.alpha);
    if (cfg.calibrate_cf)
      bounds.C_f = cal.C_f;
    if (cfg.calibrate_e)
      bounds.E = cal.E;
  }
  const auto adm = check_admissible(res.state, bounds, cfg.params);
  const auto gate = smallness_gate(bounds, cfg.params);
  const auto nr = nonlinear_residual(res.state, cfg.params);
  const auto& c = res.state.certificates;

  write_state(cfg.output_dir, "", res.state, cfg.params, fp);
  write_loop_csv(cfg.output_dir + "/loop_report.csv", res.report, cfg.fingerprint);
  Sidecar sc = {
      {"config_fingerprint", cfg.fingerprint},
      {"params_fingerprint", hex64(cfg.params.fingerprint())},
      {"grid", std::to_string(cfg.grid.nx()) + "x" + std::to_string(cfg.grid.ny()) + " " +
                   to_string(cfg.grid.wall_mode())},
      {"m", num(cfg.params.m)},
      {"gamma", num(cfg.params.gamma)},
      {"converged", res.report.converged ? "true" : "false"},
      {"outer_iterates", std::to_string(res.report.iterates)},
      {"density_iterates", std::to_string(res.report.nested_iterates)},
      {"linear_solves", std::to_string(res.report.linear_solves)},
      {"outer_errors", join(res.report.errors_per_iterate)},
      {"outer_ratios", join(res.report.contraction_ratios)},
      {"residual_mass", num(nr.relative_mass())},
      {"residual_momentum", num(nr.relative_momentum())},
      {"residual_bc", num(nr.bc)},
      {"residual_mean", num(nr.mean)},
      {"xi", num(xi(res.state, cfg.params))},
      {"cert_density", num(c.density)},
      {"cert_energy", num(c.energy)},
      {"cert_velocity", num(c.velocity)},
      {"cert_divergence", num(c.divergence)},
      {"cert_mass", num(c.mass)},
      {"bounds_C_f", num(bounds.C_f) + (cfg.calibrate_cf ? " (calibrated on this run)" : "")},
      {"bounds_E", num(bounds.E) + (cfg.calibrate_e ? " (calibrated on this run)" : "")},
      {"bounds_alpha", num(bounds.alpha)},
      {"admissible", adm.all_pass() ? "true" : "false (" + adm.failures() + ")"},
      {"gate_lhs", num(gate.lhs)},
      {"gate_rhs", num(gate.rhs)},
      {"gate_pass", gate.pass ? "true" : "false"},
  };
  for (std::size_t i = 0; i < res.report.warnings.size(); ++i)
    sc.emplace_back("warning_" + std::to_string(i + 1), res.report.warnings[i]);
  write_sidecar(cfg.output_dir + "/solve.txt", sc);

  out << (res.report.converged ? "converged" : "NOT converged") << " after " << res.report.iterates
      << " outer iterates; momentum residual " << num(nr.relative_momentum()) << ", mass residual "
      << num(nr.relative_mass()) << "\n";
  if (!gate.pass)
    err << "warning: smallness gate fails (" << num(gate.lhs) << " <= " << num(gate.rhs) << ")\n";
  if (cfg.strict && (!gate.pass || !adm.all_pass())) {
    err << "solve: strict mode: " << (gate.pass ? "iterate not admissible: " + adm.failures()
                                                : std::string("smallness gate fails"))
        << "\n";
    return 2;
  }
  return res.report.converged ? 0 : 2;
}

int cmd_study(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.masses.size() < 3) {
    err << "study: need ≥ 3 points to fit (model.masses has " << cfg.masses.size() << ")\n";
    return 1;
  }
  StudyOptions so;
  so.grid = cfg.grid;
  so.masses = cfg.masses;
  so.gamma = cfg.params.gamma;
  so.friction = cfg.params.f_friction;
  so.p_exp = cfg.params.p_exp;
  so.force = cfg.params.force;
  so.loop = cfg.loop;
  so.calibrate = cfg.calibrate_cf || cfg.calibrate_e;
  so.bounds = cfg.bounds;
  so.probes = cfg.probes;
  so.reference = cfg.reference;
  so.threads = cfg.threads;

  StudyReport rep;
  try {
    rep = run_study(so);
  } catch (const AdmissibilityError& e) {
    err << "study: " << e.what() << "\n";
    return 2;
  }
  add_standard_fits(rep, so);

  ensure_dir(cfg.output_dir);
  write_study_csv(rep, cfg.output_dir + "/study.csv", cfg.fingerprint);
  for (const auto& fit : rep.fits)
    write_study_svg(rep, fit.quantity, cfg.output_dir + "/plot_" + fit.quantity + ".svg", cfg.fingerprint);
  const std::string summary = fit_summary(rep);
  {
    std::ofstream s(cfg.output_dir + "/summary.txt");
    s << "# heavyflow study, config " << cfg.fingerprint << "\n" << summary;
    for (const auto& r : rep.rows)
      for (const auto& w : r.warnings)
        s << "warning (m = " << num(r.m) << "): " << w << "\n";
    if (!s)
      throw std::runtime_error("write failed: summary.txt");
  }
  out << summary;
  return rep.all_converged() ? 0 : 2;
}

int cmd_verify(std::uint64_t seed, const std::string& fault, std::ostream& out) {
  const auto results = verify_suite(seed, fault_from_string(fault));
  bool ok = true;
  char buf[256];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof buf, "%-4s  %-52s %.3e  (limit %.1e)  %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                  r.value, r.threshold, r.detail.c_str());
    out << buf;
    ok = ok && r.pass;
  }
  if (!ok) {
    out << "verify failed:";
    for (const auto& r : results)
      if (!r.pass)
        out << " [" << r.name << "]";
    out << "\n";
  }
  return ok ? 0 : 3;
}

int cmd_dump(const std::string& field_path, const std::string& csv_path, std::ostream& out, std::ostream& err) {
  FieldHeader h;
  AnyField f;
  try {
    f = read_field(field_path, &h);
  } catch (const std::exception& e) {
    err << "dump: " << e.what() << "\n";
    return 1;
  }
  const std::string comment = "heavyflow field " + field_path + ", fingerprint " + hex64(h.fingerprint);
  if (csv_path.empty())
    write_field_csv(out, f, comment);
  else
    write_field_csv(csv_path, f, comment);
  return 0;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------
int run_cli(int argc, char** argv) {
  CLI::App app{"heavyflow: steady compressible flow at large mass"};
  app.require_subcommand(1);

  std::map<std::string, std::string> overrides;
  std::string config_path;
  auto add_run_options = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "INI configuration file");
    for (const auto& [key, def] : ConfigTable::defaults())
      sub->add_option("--" + key, overrides[key], "overrides " + key + " (default " + (def.empty() ? "''" : def) + ")");
  };
  CLI::App* solve = app.add_subcommand("solve", "solve at one mass value");
  add_run_options(solve);
  CLI::App* study = app.add_subcommand("study", "sweep over model.masses and fit scaling slopes");
  add_run_options(study);
  CLI::App* verify = app.add_subcommand("verify", "operator and solver self-test");
  std::uint64_t seed = 1;
  std::string fault;
  verify->add_option("--seed", seed, "random seed");
  verify->add_option("--inject-fault", fault, "test hook: none | gradient-sign");
  CLI::App* dump = app.add_subcommand("dump", "print a field file as CSV");
  std::string field_path, csv_path;
  dump->add_option("field", field_path, "field file (.hvf)")->required();
  dump->add_option("-o,--out", csv_path, "write CSV here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (verify->parsed())
      return cmd_verify(seed, fault, std::cout);
    if (dump->parsed())
      return cmd_dump(field_path, csv_path, std::cout, std::cerr);
    ConfigTable table = ConfigTable::with_defaults();
    if (!config_path.empty())
      table.load_ini(config_path);
    CLI::App* sub = solve->parsed() ? solve : study;
    for (const auto& [key, value] : overrides)
      if (sub->count("--" + key))
        table.set(key, value);
    const RunConfig cfg = RunConfig::from(table);
    return solve->parsed() ? cmd_solve(cfg, std::cout, std::cerr) : cmd_study(cfg, std::cout, std::cerr);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

} // namespace heavyflow
