#include "perihelion/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

namespace perihelion {

namespace {

constexpr Real degrees_per_radian = 180 / pi;
constexpr int adaptive_horizon_periods = 10;

struct WallClockExceeded {};

class Stopwatch {
 public:
  explicit Stopwatch(double budget_s) : budget_s_(budget_s) {}
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }
  void check() const {
    if (budget_s_ > 0 && elapsed() > budget_s_) throw WallClockExceeded{};
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
  double budget_s_;
};

SweepRecord describe(const PointConfig &config) {
  SweepRecord rec;
  if (config.force == ForceKind::Mesh) {
    rec.scheme = std::string(to_string(config.mesh->scheme));
    rec.dx = config.mesh->dx;
  }
  rec.method = config.integrator.name();
  if (config.integrator.is_adaptive())
    rec.tol = config.integrator.tol;
  else
    rec.h = config.integrator.h;
  rec.theta_deg = config.orbit.theta * degrees_per_radian;
  rec.beta = config.orbit.beta;
  rec.ecc = config.orbit.ecc;
  rec.predicted_advance_rad = relativistic_advance_prediction(
      config.orbit.semi_major_axis(), config.orbit.ecc, config.orbit.r_sch);
  return rec;
}

std::vector<PerihelionEvent> track_fixed(const PointConfig &config, const OrbitState &s0,
                                         const ForceModel &force, const Stopwatch &clock) {
  const FixedStepMethod method = *config.integrator.method;
  const Real h = config.integrator.h;
  std::size_t max_steps = config.max_steps;
  if (max_steps == 0) {
    const Real steps = std::ceil((config.revolutions + 1) * config.orbit.period() / h) + 16;
    if (!(steps < 4e9))
      throw std::invalid_argument(
          fmt::format("step h = {} needs {:.3g} steps; set a step budget explicitly", h, steps));
    max_steps = static_cast<std::size_t>(steps);
  }
  FixedStepPerihelionTracker tracker(default_fit_window, default_fit_order(method));
  std::size_t n = 0;
  propagate_fixed(s0, h, max_steps, method, force, [&](const OrbitState &s) {
    tracker.observe(s);
    if ((++n & 0xfff) == 0) clock.check();
    return tracker.events().size() < static_cast<std::size_t>(config.revolutions);
  });
  if (tracker.events().size() < static_cast<std::size_t>(config.revolutions))
    throw StepBudgetExceeded(fmt::format("found {} of {} perihelia within {} steps",
                                         tracker.events().size(), config.revolutions, max_steps));
  return tracker.events();
}

std::vector<PerihelionEvent> track_adaptive(const PointConfig &config, const OrbitState &s0,
                                            const ForceModel &force, const Stopwatch &clock) {
  AdaptiveOptions options = AdaptiveOptions::with_tolerance(config.integrator.tol);
  if (config.max_steps > 0) options.max_steps = config.max_steps;
  DensePerihelionTracker tracker;
  std::size_t n = 0;
  // Non-conservative lattice forces can change the period a lot from one
  // passage to the next; the run stops as soon as enough perihelia are seen.
  const Real t_end = s0.t + adaptive_horizon_periods * (config.revolutions + 1) * config.orbit.period();
  integrate_adaptive_stream(s0, t_end, options, force, [&](const AcceptedStep &step) {
    tracker.observe(step);
    if ((++n & 0xff) == 0) clock.check();
    return tracker.events().size() < static_cast<std::size_t>(config.revolutions);
  });
  if (tracker.events().size() < static_cast<std::size_t>(config.revolutions))
    throw MetrologyError(fmt::format("found {} of {} perihelia within {} periods",
                                     tracker.events().size(), config.revolutions,
                                     adaptive_horizon_periods * (config.revolutions + 1)));
  return tracker.events();
}

}  // namespace

std::string_view to_string(ForceKind kind) {
  switch (kind) {
    case ForceKind::Newtonian: return "newtonian";
    case ForceKind::Relativistic: return "relativistic";
    case ForceKind::Mesh: return "mesh";
  }
  return "unknown";
}

ForceKind parse_force(std::string_view name) {
  if (name == "newtonian") return ForceKind::Newtonian;
  if (name == "relativistic") return ForceKind::Relativistic;
  if (name == "mesh") return ForceKind::Mesh;
  throw std::invalid_argument(fmt::format("unknown force model '{}'", name));
}

std::string IntegratorChoice::name() const {
  return method ? std::string(to_string(*method)) : std::string("dop853");
}

void IntegratorChoice::validate() const {
  if (method) {
    if (!(h > 0) || !std::isfinite(h)) throw std::invalid_argument("step h must be positive");
  } else if (!(tol > 0) || !std::isfinite(tol)) {
    throw std::invalid_argument("adaptive tolerance must be positive");
  }
}

void PointConfig::validate() const {
  orbit.validate();
  integrator.validate();
  if (revolutions < 1) throw std::invalid_argument("need at least one revolution");
  if (force == ForceKind::Mesh) {
    if (!mesh) throw std::invalid_argument("mesh force selected but no mesh given");
    mesh->validate();
  }
  if (wall_clock_budget_s < 0) throw std::invalid_argument("wall-clock budget must be >= 0");
}

ForceModel PointConfig::make_force() const {
  switch (force) {
    case ForceKind::Newtonian: return make_newtonian_force(orbit.gm);
    case ForceKind::Relativistic: return make_relativistic_force(orbit.gm, orbit.r_sch);
    case ForceKind::Mesh: return make_mesh_force(*mesh);
  }
  throw std::invalid_argument("unknown force model");
}

std::optional<Real> SweepRecord::abs_shift_rad() const {
  if (!shift_rad) return std::nullopt;
  return std::abs(*shift_rad);
}

bool classify_detectability(const SweepRecord &record) {
  if (!record.shift_rad || !record.predicted_advance_rad) return false;
  return std::abs(*record.shift_rad) < *record.predicted_advance_rad;
}

PointResult run_point(const PointConfig &config, std::string sweep_id) {
  config.validate();
  PointResult result;
  SweepRecord &rec = result.record;
  rec = describe(config);
  rec.sweep_id = std::move(sweep_id);

  const Stopwatch clock(config.wall_clock_budget_s);
  const OrbitState s0 = initial_conditions(config.orbit);
  const ForceModel force = config.make_force();
  const auto fail = [&](std::string_view status, std::string message) {
    rec.status = status;
    rec.message = std::move(message);
  };
  try {
    std::vector<PerihelionEvent> events{starting_event(s0)};
    const std::vector<PerihelionEvent> found = config.integrator.is_adaptive()
                                                   ? track_adaptive(config, s0, force, clock)
                                                   : track_fixed(config, s0, force, clock);
    events.insert(events.end(), found.begin(), found.end());
    const ShiftMeasurement m = measure_shift(events, config.revolutions, config.integrator.name());
    if (m.degenerate) throw MetrologyError("orbit is circular; perihelion direction undefined");
    rec.shift_rad = m.shift_per_rev;
    result.events = m.events;
    if (config.force == ForceKind::Mesh && config.mesh->scheme == MeshScheme::Bilinear &&
        config.mesh->dx <= bilinear_reliable_dx)
      rec.status = "unreliable";
  } catch (const CollisionError &e) {
    fail("collision", e.what());
  } catch (const StepSizeUnderflow &e) {
    fail("step_underflow", e.what());
  } catch (const StepBudgetExceeded &e) {
    fail("step_budget", e.what());
  } catch (const WallClockExceeded &) {
    fail("timeout", fmt::format("exceeded wall-clock budget of {} s", config.wall_clock_budget_s));
  } catch (const MetrologyError &e) {
    fail("metrology_error", e.what());
  } catch (const std::invalid_argument &) {
    throw;
  } catch (const std::exception &e) {
    fail("error", e.what());
  }
  rec.detectable = classify_detectability(rec);
  rec.runtime_s = clock.elapsed();
  return result;
}

std::vector<SweepRecord> run_parallel(std::size_t count,
                                      const std::function<SweepRecord(std::size_t)> &job,
                                      const SweepOptions &options) {
  std::vector<SweepRecord> rows(count);
  unsigned workers = options.workers == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                          : options.workers;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(count, 1)));

  std::atomic<std::size_t> next{0};
  std::mutex report;
  std::exception_ptr first_error;
  const auto worker = [&] {
    for (std::size_t k = next++; k < count; k = next++) {
      try {
        rows[k] = job(k);
      } catch (...) {
        const std::lock_guard lock(report);
        if (!first_error) first_error = std::current_exception();
        next = count;
        return;
      }
      if (options.progress) {
        const std::lock_guard lock(report);
        options.progress(rows[k]);
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
  return rows;
}

std::vector<SweepRecord> sweep_timestep(std::span<const FixedStepMethod> methods,
                                        std::span<const Real> h_values, const PointConfig &base,
                                        const SweepOptions &options) {
  for (Real h : h_values)
    if (!(h > 0)) throw std::invalid_argument("step sizes must be positive");
  PointConfig cfg = base;
  cfg.force = ForceKind::Newtonian;
  cfg.mesh.reset();
  const std::size_t nh = h_values.size();
  return run_parallel(
      methods.size() * nh,
      [&](std::size_t k) {
        PointConfig point = cfg;
        point.integrator = IntegratorChoice::fixed(methods[k / nh], h_values[k % nh]);
        return run_point(point, fmt::format("h:{}", k)).record;
      },
      options);
}

std::vector<SweepRecord> sweep_beta(std::span<const Real> beta_values, const PointConfig &base,
                                    const SweepOptions &options) {
  for (Real b : beta_values)
    if (!(b > 0)) throw std::invalid_argument("beta values must be positive");
  return run_parallel(
      beta_values.size(),
      [&](std::size_t k) {
        PointConfig point = base;
        point.orbit.beta = beta_values[k];
        return run_point(point, fmt::format("beta:{}", k)).record;
      },
      options);
}

std::vector<SweepRecord> sweep_ecc(std::span<const Real> ecc_values, const PointConfig &base,
                                   const SweepOptions &options) {
  for (Real e : ecc_values)
    if (!(e > 0 && e < 1)) throw std::invalid_argument("eccentricities must lie in (0, 1)");
  return run_parallel(
      ecc_values.size(),
      [&](std::size_t k) {
        PointConfig point = base;
        point.orbit.ecc = ecc_values[k];
        return run_point(point, fmt::format("ecc:{}", k)).record;
      },
      options);
}

std::vector<Real> theta_grid_deg(int n_angles) {
  if (n_angles < 1) throw std::invalid_argument("need at least one angle");
  std::vector<Real> out(static_cast<std::size_t>(n_angles));
  for (int k = 0; k < n_angles; ++k) out[static_cast<std::size_t>(k)] = Real(360) * k / n_angles;
  return out;
}

std::vector<SweepRecord> sweep_theta(int n_angles, const PointConfig &base,
                                     const SweepOptions &options) {
  if (base.force != ForceKind::Mesh || !base.mesh)
    throw std::invalid_argument("theta sweep needs a mesh force");
  const std::vector<Real> grid = theta_grid_deg(n_angles);
  return run_parallel(
      grid.size(),
      [&](std::size_t k) {
        PointConfig point = base;
        point.orbit.theta = grid[k] / degrees_per_radian;
        SweepRecord rec = run_point(point, fmt::format("theta:{}", k)).record;
        rec.theta_deg = grid[k];
        return rec;
      },
      options);
}

FitResult summarize_theta(std::span<const SweepRecord> rows, MeshScheme scheme, Real dx) {
  std::vector<Real> thetas;
  std::vector<Real> values;
  for (const SweepRecord &r : rows) {
    if (!r.shift_rad || !r.theta_deg) continue;
    thetas.push_back(*r.theta_deg / degrees_per_radian);
    values.push_back(*r.shift_rad / dx);
  }
  return scheme == MeshScheme::Linear ? fit_cosine(thetas, values) : fit_gaussian(values);
}

DxSweepResult sweep_dx(std::span<const Real> dx_values, int n_angles, const PointConfig &base,
                       const SweepOptions &options) {
  if (base.force != ForceKind::Mesh || !base.mesh)
    throw std::invalid_argument("dx sweep needs a mesh force");
  for (Real dx : dx_values)
    if (!(dx > 0)) throw std::invalid_argument("lattice spacings must be positive");
  const std::vector<Real> grid = theta_grid_deg(n_angles);
  const std::size_t na = grid.size();
  const MeshScheme scheme = base.mesh->scheme;

  DxSweepResult result;
  result.per_angle = run_parallel(
      dx_values.size() * na,
      [&](std::size_t k) {
        PointConfig point = base;
        point.mesh->dx = dx_values[k / na];
        point.orbit.theta = grid[k % na] / degrees_per_radian;
        SweepRecord rec = run_point(point, fmt::format("dx:{}/theta:{}", k / na, k % na)).record;
        rec.theta_deg = grid[k % na];
        return rec;
      },
      options);

  std::vector<Real> xs;
  std::vector<Real> ys;
  for (std::size_t d = 0; d < dx_values.size(); ++d) {
    const std::span<const SweepRecord> rows(result.per_angle.data() + d * na, na);
    PointConfig point = base;
    point.mesh->dx = dx_values[d];
    SweepRecord agg = describe(point);
    agg.sweep_id = fmt::format("dx:{}", d);
    agg.theta_deg.reset();
    for (const SweepRecord &r : rows) agg.runtime_s += r.runtime_s;
    const auto failed = std::count_if(rows.begin(), rows.end(),
                                      [](const SweepRecord &r) { return r.failed(); });
    std::optional<FitResult> fit;
    try {
      fit = summarize_theta(rows, scheme, dx_values[d]);
    } catch (const FitError &e) {
      agg.status = "error";
      agg.message = fmt::format("{} of {} angles failed: {}", failed, na, e.what());
    }
    if (fit) {
      const Real stat = scheme == MeshScheme::Linear ? fit->coefficient("amplitude")
                                                     : fit->coefficient("std");
      agg.shift_rad = stat * dx_values[d];
      if (scheme == MeshScheme::Bilinear && dx_values[d] <= bilinear_reliable_dx)
        agg.status = "unreliable";
      if (failed > 0) agg.message = fmt::format("{} of {} angles failed", failed, na);
      if (agg.status == "ok" && *agg.shift_rad > 0) {
        xs.push_back(dx_values[d]);
        ys.push_back(*agg.shift_rad);
      }
    }
    agg.detectable = classify_detectability(agg);
    result.rows.push_back(agg);
    result.summaries.push_back(fit);
  }
  if (xs.size() >= 3) result.scaling = fit_powerlaw(xs, ys);
  return result;
}

// ---------------------------------------------------------------------------

std::string format_real(Real value) { return fmt::format("{:.17g}", value); }

namespace {

std::string opt(const std::optional<Real> &v) { return v ? format_real(*v) : std::string(); }

std::string csv_text(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

std::string to_csv_row(const SweepRecord &r, const CsvOptions &options) {
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}", csv_text(r.sweep_id),
                     csv_text(r.scheme), csv_text(r.method), opt(r.h), opt(r.tol), opt(r.dx),
                     opt(r.theta_deg), opt(r.beta), opt(r.ecc), opt(r.shift_rad),
                     opt(r.abs_shift_rad()), opt(r.predicted_advance_rad),
                     r.detectable ? "true" : "false", csv_text(r.status),
                     options.timing ? fmt::format("{:.6f}", r.runtime_s) : std::string());
}

void write_csv(std::ostream &out, std::span<const SweepRecord> rows, const CsvOptions &options) {
  out << csv_header << '\n';
  for (const SweepRecord &r : rows) out << to_csv_row(r, options) << '\n';
}

std::string to_json_line(const SweepRecord &r, const CsvOptions &options) {
  nlohmann::ordered_json j;
  const auto num = [](const std::optional<Real> &v) {
    return v ? nlohmann::json(static_cast<double>(*v)) : nlohmann::json(nullptr);
  };
  const auto text = [](const std::string &s) {
    return s.empty() ? nlohmann::json(nullptr) : nlohmann::json(s);
  };
  j["sweep_id"] = r.sweep_id;
  j["scheme"] = text(r.scheme);
  j["method"] = text(r.method);
  j["h"] = num(r.h);
  j["tol"] = num(r.tol);
  j["dx"] = num(r.dx);
  j["theta_deg"] = num(r.theta_deg);
  j["beta"] = num(r.beta);
  j["ecc"] = num(r.ecc);
  j["shift_rad"] = num(r.shift_rad);
  j["abs_shift_rad"] = num(r.abs_shift_rad());
  j["predicted_advance_rad"] = num(r.predicted_advance_rad);
  j["detectable"] = r.detectable;
  j["status"] = r.status;
  j["runtime_s"] = options.timing ? nlohmann::json(r.runtime_s) : nlohmann::json(nullptr);
  return j.dump();
}

void write_jsonl(std::ostream &out, std::span<const SweepRecord> rows, const CsvOptions &options) {
  for (const SweepRecord &r : rows) out << to_json_line(r, options) << '\n';
}

}  // namespace perihelion
