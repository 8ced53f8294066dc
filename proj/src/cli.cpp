#include "perihelion/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

namespace perihelion::cli {

namespace fs = std::filesystem;

namespace {

class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

const std::vector<Real> default_h_values = {0.1,         0.05,         0.025,         0.0125,
                                            0.00625,     0.003125,     0.0015625,     0.00078125,
                                            0.000390625, 0.0001953125};
const std::vector<Real> default_beta_values = {1, 2, 5, 10, 20, 50, 100};
const std::vector<Real> default_ecc_values = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
const std::vector<Real> default_dx_values = {1e-3, 3.16e-3, 1e-2, 3.16e-2, 1e-1, 1};
constexpr Real paper_fig3_h = 0.0002;
constexpr Real mesh_tol = 8e-11;
constexpr Real exact_force_tol = 1e-10;

bool is_sweep(const std::string &command) { return command.rfind("sweep-", 0) == 0; }
bool has_mesh(const RunConfig &c) { return c.scheme != "none"; }

OrbitSpec make_orbit(const RunConfig &c) {
  OrbitSpec spec;
  spec.gm = c.gm;
  spec.r_sch = c.r_sch;
  spec.reference = ReferenceOrbit::make(c.ref_r_per, c.ref_v_per, c.gm, c.r_sch);
  spec.beta = c.beta;
  spec.ecc = c.ecc.value_or(spec.reference.ecc);
  spec.theta = c.theta_deg * pi / 180;
  spec.retrograde = c.retrograde;
  spec.validate();
  return spec;
}

IntegratorChoice make_integrator(const std::string &name, const RunConfig &c, bool mesh,
                                 std::optional<Real> default_h) {
  if (name == "adaptive" || name == "dop853")
    return IntegratorChoice::adaptive(c.tol.value_or(mesh ? mesh_tol : exact_force_tol));
  const FixedStepMethod method = parse_method(name);
  const std::optional<Real> h = c.h ? c.h : default_h;
  if (!h) throw std::invalid_argument(fmt::format("fixed-step method {} needs --h", name));
  if (mesh && !c.allow_fixed_step_mesh)
    throw std::invalid_argument(
        "mesh forces use the adaptive integrator; pass --allow-fixed-step-mesh to override");
  return IntegratorChoice::fixed(method, *h);
}

/// Integrator names for the beta/ecc/h sweeps.
std::vector<std::string> sweep_methods(const RunConfig &c, const std::string &command) {
  if (!c.methods.empty()) return c.methods;
  if (command != "sweep-h" && c.integrator != "adaptive") return {c.integrator};
  if (command != "sweep-h" && has_mesh(c)) return {"adaptive"};
  return {"euler", "leapfrog", "rk2", "rk4"};
}

void check_precision(const RunConfig &c) {
  const bool extended = sizeof(Real) > sizeof(double);
  if (c.precision == "double" && extended)
    throw std::invalid_argument("this build uses extended precision; pass --precision extended");
  if (c.precision == "extended" && !extended)
    throw std::invalid_argument(
        "extended precision requested but this build uses double; rebuild with "
        "-DPERIHELION_EXTENDED_PRECISION=ON");
  if (c.precision != "double" && c.precision != "extended")
    throw std::invalid_argument(fmt::format("unknown precision mode '{}'", c.precision));
}

/// Resolves the output path: relative paths (and an omitted path) go under
/// $PERIHELION_OUTPUT_DIR when it is set.
std::optional<fs::path> resolve_output(const std::string &given, const std::string &fallback_name,
                                       bool required) {
  const char *env = std::getenv(output_dir_env);
  const bool have_env = env != nullptr && *env != '\0';
  if (given.empty()) {
    if (have_env) return fs::path(env) / fallback_name;
    if (required)
      throw std::invalid_argument(
          fmt::format("--out is required (or set {} for a default directory)", output_dir_env));
    return std::nullopt;
  }
  fs::path p(given);
  if (p.is_relative() && have_env) p = fs::path(env) / p;
  return p;
}

/// Writes to "<path>.partial" and renames on commit, so a failed run never
/// leaves a truncated result behind.
class AtomicOutput {
 public:
  explicit AtomicOutput(fs::path path) : path_(std::move(path)), tmp_(path_) {
    tmp_ += ".partial";
    stream_.open(tmp_, std::ios::out | std::ios::trunc | std::ios::binary);
    if (!stream_)
      throw OutputError(fmt::format("cannot write '{}': directory missing or not writable",
                                    path_.string()));
  }
  AtomicOutput(const AtomicOutput &) = delete;
  AtomicOutput &operator=(const AtomicOutput &) = delete;
  ~AtomicOutput() {
    if (!committed_) {
      stream_.close();
      std::error_code ec;
      fs::remove(tmp_, ec);
    }
  }
  std::ostream &stream() { return stream_; }
  void commit() {
    stream_.close();
    if (!stream_) throw OutputError(fmt::format("failed while writing '{}'", path_.string()));
    std::error_code ec;
    fs::rename(tmp_, path_, ec);
    if (ec) throw OutputError(fmt::format("cannot move output into '{}': {}", path_.string(), ec.message()));
    committed_ = true;
  }
  const fs::path &path() const { return path_; }

 private:
  fs::path path_;
  fs::path tmp_;
  std::ofstream stream_;
  bool committed_ = false;
};

void emit(AtomicOutput &sink, std::span<const SweepRecord> rows, const RunConfig &c) {
  const CsvOptions opts{c.timing};
  if (c.format == "jsonl")
    write_jsonl(sink.stream(), rows, opts);
  else
    write_csv(sink.stream(), rows, opts);
  sink.commit();
}

std::string fmt_opt(const std::optional<Real> &v) {
  return v ? fmt::format("{:.6e}", *v) : std::string("n/a");
}

std::string sweep_summary(const std::string &command, std::span<const SweepRecord> rows) {
  std::size_t failed = 0;
  std::size_t detectable = 0;
  std::optional<Real> max_shift;
  std::optional<Real> advance;
  for (const SweepRecord &r : rows) {
    if (r.failed()) ++failed;
    if (r.detectable) ++detectable;
    if (const auto a = r.abs_shift_rad(); a && (!max_shift || *a > *max_shift)) max_shift = a;
    if (!advance) advance = r.predicted_advance_rad;
  }
  return fmt::format("{}: {} points, {} failed, max |shift| {} rad, predicted {} rad, {} detectable",
                     command, rows.size(), failed, fmt_opt(max_shift), fmt_opt(advance),
                     detectable);
}

bool all_failed(std::span<const SweepRecord> rows) {
  return !rows.empty() &&
         std::all_of(rows.begin(), rows.end(), [](const SweepRecord &r) { return r.failed(); });
}

std::string fit_summary(const FitResult &fit) {
  std::string s(to_string(fit.model));
  for (const auto &[name, value] : fit.coefficients) s += fmt::format(" {}={:.6g}", name, value);
  return s + fmt::format(" rms={:.3g} n={}", fit.residual_rms, fit.sample_count);
}

int execute(const std::string &command, const RunConfig &c, std::ostream &out, std::ostream &err) {
  check_precision(c);
  if (c.format != "csv" && c.format != "jsonl")
    throw std::invalid_argument(fmt::format("unknown output format '{}'", c.format));
  const std::string ext = c.format == "jsonl" ? ".jsonl" : ".csv";
  const PointConfig base = make_point_config(c, command);
  const SweepOptions sweep_opts{c.workers, {}};

  // Open the destination before any work so a bad path fails fast.
  const auto out_path = resolve_output(c.out, command + ext, is_sweep(command));
  std::optional<AtomicOutput> sink;
  if (out_path) sink.emplace(*out_path);

  std::vector<SweepRecord> rows;
  if (command == "predict-advance") {
    const Real adv = relativistic_advance_prediction(base.orbit.semi_major_axis(), base.orbit.ecc,
                                                     base.orbit.r_sch);
    fmt::print(out, "predicted advance {:.6e} rad per revolution ({:.6f} arcsec)\n", adv,
               adv * arcsec_per_radian);
    if (sink) {
      SweepRecord r;
      r.sweep_id = "predict:0";
      r.theta_deg = c.theta_deg;
      r.beta = base.orbit.beta;
      r.ecc = base.orbit.ecc;
      r.predicted_advance_rad = adv;
      r.status = "ok";
      rows.push_back(r);
      emit(*sink, rows, c);
    }
    return ok;
  }

  if (command == "simulate") {
    const PointResult res = run_point(base, "simulate:0");
    const SweepRecord &r = res.record;
    fmt::print(out, "shift {} rad per revolution, predicted {} rad, detectable {}, status {}\n",
               fmt_opt(r.shift_rad), fmt_opt(r.predicted_advance_rad), r.detectable, r.status);
    if (!r.message.empty()) fmt::print(err, "simulate: {}\n", r.message);
    rows.push_back(r);
    if (sink) emit(*sink, rows, c);
    return r.failed() ? all_points_failed : ok;
  }

  if (command == "sweep-h") {
    std::vector<FixedStepMethod> methods;
    for (const std::string &m : sweep_methods(c, command)) methods.push_back(parse_method(m));
    const std::vector<Real> hs = c.h_values.empty() ? default_h_values : c.h_values;
    rows = sweep_timestep(methods, hs, base, sweep_opts);
  } else if (command == "sweep-beta" || command == "sweep-ecc") {
    const bool beta = command == "sweep-beta";
    const std::vector<Real> values =
        beta ? (c.beta_values.empty() ? default_beta_values : c.beta_values)
             : (c.ecc_values.empty() ? default_ecc_values : c.ecc_values);
    for (const std::string &m : sweep_methods(c, command)) {
      PointConfig point = base;
      point.integrator = make_integrator(m, c, has_mesh(c), paper_fig3_h);
      std::vector<SweepRecord> block = beta ? sweep_beta(values, point, sweep_opts)
                                            : sweep_ecc(values, point, sweep_opts);
      for (SweepRecord &r : block) {
        r.sweep_id = fmt::format("{}:{}", beta ? "beta" : "ecc", rows.size());
        rows.push_back(std::move(r));
      }
    }
  } else if (command == "sweep-theta") {
    rows = sweep_theta(c.angles, base, sweep_opts);
    try {
      fmt::print(out, "{}\n", fit_summary(summarize_theta(rows, base.mesh->scheme, base.mesh->dx)));
    } catch (const FitError &e) {
      fmt::print(err, "sweep-theta: no summary fit: {}\n", e.what());
    }
  } else if (command == "sweep-dx") {
    const std::vector<Real> dxs = c.dx_values.empty() ? default_dx_values : c.dx_values;
    std::optional<AtomicOutput> per_angle;
    if (!c.per_angle_out.empty()) per_angle.emplace(*resolve_output(c.per_angle_out, "", false));
    DxSweepResult res = sweep_dx(dxs, c.angles, base, sweep_opts);
    if (res.scaling) fmt::print(out, "dx scaling: {}\n", fit_summary(*res.scaling));
    if (per_angle) emit(*per_angle, res.per_angle, c);
    rows = std::move(res.rows);
  } else {
    throw std::invalid_argument(fmt::format("unknown command '{}'", command));
  }

  for (const SweepRecord &r : rows)
    if (!r.message.empty()) fmt::print(err, "{}: {}: {}\n", r.sweep_id, r.status, r.message);
  if (sink) emit(*sink, rows, c);
  fmt::print(out, "{}\n", sweep_summary(command, rows));
  if (all_failed(rows)) {
    fmt::print(err, "{}: every point failed\n", command);
    return all_points_failed;
  }
  return ok;
}

}  // namespace

PointConfig make_point_config(const RunConfig &c, const std::string &command) {
  if (c.revs < 1) throw std::invalid_argument("--revs must be at least 1");
  if (c.angles < 1) throw std::invalid_argument("--angles must be at least 1");
  PointConfig p;
  p.orbit = make_orbit(c);
  p.revolutions = c.revs;
  p.max_steps = c.max_steps;
  p.wall_clock_budget_s = c.budget_s;

  const bool mesh = has_mesh(c);
  if (mesh) {
    if (c.force && *c.force != "mesh")
      throw std::invalid_argument(
          fmt::format("--force {} conflicts with --scheme {}", *c.force, c.scheme));
    if (command == "sweep-h")
      throw std::invalid_argument("sweep-h uses the exact Newtonian force; drop --scheme");
    p.force = ForceKind::Mesh;
    p.mesh = MeshSpec::kepler(p.orbit.gm, c.dx, parse_scheme(c.scheme), parse_variant(c.variant),
                              {c.offset_x, c.offset_y}, parse_indexing(c.indexing));
  } else {
    if (command == "sweep-theta" || command == "sweep-dx")
      throw std::invalid_argument(fmt::format("{} needs --scheme linear|bilinear", command));
    p.force = parse_force(c.force.value_or("newtonian"));
    if (p.force == ForceKind::Mesh) throw std::invalid_argument("--force mesh needs --scheme");
    if (command == "sweep-h" && p.force != ForceKind::Newtonian)
      throw std::invalid_argument("sweep-h uses the exact Newtonian force");
  }

  if (command == "sweep-h") {
    // Placeholder; every point sets its own method and step.
    p.integrator = IntegratorChoice::fixed(FixedStepMethod::RK4, 1);
  } else if (command == "sweep-beta" || command == "sweep-ecc") {
    p.integrator = make_integrator(sweep_methods(c, command).front(), c, mesh, paper_fig3_h);
  } else {
    p.integrator = make_integrator(c.integrator, c, mesh, std::nullopt);
  }
  p.validate();
  return p;
}

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  RunConfig c;
  std::string dump_path;
  CLI::App app{"Perihelion-shift experiments for the two-body problem", "perihelion"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.set_config("--config", "", "Read flat key = value settings; flags override them");
  app.require_subcommand(1, 1);

  auto *orbit = "Orbit";
  app.add_option("--beta", c.beta, "Relativistic scale Upsilon / Upsilon_0")->group(orbit);
  app.add_option("--ecc", c.ecc, "Eccentricity at fixed semi-major axis (default: reference)")
      ->group(orbit);
  app.add_option("--theta-deg", c.theta_deg, "Perihelion angle to the lattice x axis, degrees")
      ->group(orbit);
  app.add_option("--gm", c.gm, "GM of the central mass, Gm^3/Ms^2")->group(orbit);
  app.add_option("--r-sch", c.r_sch, "Schwarzschild radius, Gm")->group(orbit);
  app.add_option("--ref-r-per", c.ref_r_per, "Reference perihelion distance, Gm")->group(orbit);
  app.add_option("--ref-v-per", c.ref_v_per, "Reference perihelion speed, Gm/Ms")->group(orbit);
  app.add_flag("--retrograde", c.retrograde, "Start with clockwise motion")->group(orbit);

  auto *integ = "Force and integrator";
  app.add_option("--force", c.force, "newtonian | relativistic (mesh implied by --scheme)")
      ->group(integ);
  app.add_option("--integrator,--method", c.integrator, "adaptive | euler | leapfrog | rk2 | rk4")
      ->group(integ);
  app.add_option("--h", c.h, "Fixed step, Ms")->group(integ);
  app.add_option("--tol", c.tol, "Adaptive tolerance (rtol = atol)")->group(integ);
  app.add_flag("--allow-fixed-step-mesh", c.allow_fixed_step_mesh,
               "Permit fixed-step methods with mesh forces")
      ->group(integ);

  auto *mesh = "Mesh";
  app.add_option("--scheme", c.scheme, "none | linear | bilinear")->group(mesh);
  app.add_option("--dx", c.dx, "Lattice spacing, Gm")->group(mesh);
  app.add_option("--variant", c.variant, "Linear scheme y component: symmetric | as-printed")
      ->group(mesh);
  app.add_option("--indexing", c.indexing, "Cell index of a coordinate: floor | toward-zero")
      ->group(mesh);
  app.add_option("--offset-x", c.offset_x, "Lattice registration, fraction of dx")->group(mesh);
  app.add_option("--offset-y", c.offset_y, "Lattice registration, fraction of dx")->group(mesh);

  auto *meas = "Measurement and sweeps";
  app.add_option("--revs", c.revs, "Revolutions per measurement")->group(meas);
  app.add_option("--methods", c.methods, "Integrators for sweep-h/-beta/-ecc")
      ->delimiter(',')
      ->group(meas);
  app.add_option("--h-values", c.h_values, "Step sizes for sweep-h")->delimiter(',')->group(meas);
  app.add_option("--beta-values", c.beta_values, "Values for sweep-beta")
      ->delimiter(',')
      ->group(meas);
  app.add_option("--ecc-values", c.ecc_values, "Values for sweep-ecc")
      ->delimiter(',')
      ->group(meas);
  app.add_option("--dx-values", c.dx_values, "Spacings for sweep-dx")
      ->delimiter(',')
      ->group(meas);
  app.add_option("--angles", c.angles, "Lattice angles per theta sweep")->group(meas);
  app.add_option("--max-steps", c.max_steps, "Step budget per point (0: automatic)")
      ->group(meas);
  app.add_option("--budget-s", c.budget_s, "Wall-clock budget per point, s (0: none)")
      ->group(meas);

  auto *output = "Output";
  app.add_option("--out", c.out, "Result file")->group(output);
  app.add_option("--per-angle-out", c.per_angle_out, "sweep-dx: also write every angle")
      ->group(output);
  app.add_option("--format", c.format, "csv | jsonl")->group(output);
  app.add_option("--workers", c.workers, "Worker threads (0: one per core)")->group(output);
  app.add_option("--precision", c.precision, "double | extended; must match the build")
      ->group(output);
  app.add_flag("--timing", c.timing, "Fill the runtime_s column")->group(output);
  app.add_option("--dump-config", dump_path,
                 "Write the explicitly given settings to a file ('-' for stdout) and exit")
      ->group(output);

  for (const char *name : {"simulate", "sweep-h", "sweep-beta", "sweep-ecc", "sweep-theta",
                           "sweep-dx", "predict-advance"})
    app.add_subcommand(name)->fallthrough();
  app.get_subcommand("simulate")->description("Measure the perihelion shift of one orbit");
  app.get_subcommand("sweep-h")->description("Spurious shift against step size (exact force)");
  app.get_subcommand("sweep-beta")->description("Shift against the relativistic scale beta");
  app.get_subcommand("sweep-ecc")->description("Shift against eccentricity");
  app.get_subcommand("sweep-theta")->description("Mesh shift against the lattice angle");
  app.get_subcommand("sweep-dx")->description("Theta sweeps aggregated over lattice spacings");
  app.get_subcommand("predict-advance")->description("Leading-order relativistic advance");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ok : usage_error;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    if (!dump_path.empty()) {
      // Dump only what was given explicitly: defaults are resolved in code,
      // so the dump reproduces the same run without freezing them.
      app.get_option("--dump-config")->clear();
      const std::string text =
          fmt::format("# perihelion {}\n{}", command, app.config_to_str(false, false));
      if (dump_path == "-") {
        out << text;
      } else {
        AtomicOutput sink{fs::path(dump_path)};
        sink.stream() << text;
        sink.commit();
      }
      return ok;
    }
    return execute(command, c, out, err);
  } catch (const OutputError &e) {
    fmt::print(err, "output error: {}\n", e.what());
    return output_error;
  } catch (const std::invalid_argument &e) {
    fmt::print(err, "configuration error: {}\n", e.what());
    return config_error;
  } catch (const std::domain_error &e) {
    fmt::print(err, "configuration error: {}\n", e.what());
    return config_error;
  }
}

int run(int argc, const char *const *argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace perihelion::cli
