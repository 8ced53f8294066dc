#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "perihelion/dynamics.hpp"
#include "perihelion/fitting.hpp"
#include "perihelion/integrators.hpp"
#include "perihelion/mesh.hpp"
#include "perihelion/metrology.hpp"

namespace perihelion {

enum class ForceKind { Newtonian, Relativistic, Mesh };

std::string_view to_string(ForceKind kind);
ForceKind parse_force(std::string_view name);

/// Either a fixed-step method with step h, or the adaptive integrator with
/// tolerance tol.
struct IntegratorChoice {
  std::optional<FixedStepMethod> method;
  Real h = 0;
  Real tol = 0;

  static IntegratorChoice fixed(FixedStepMethod m, Real step) { return {m, step, 0}; }
  static IntegratorChoice adaptive(Real tolerance) { return {std::nullopt, 0, tolerance}; }
  bool is_adaptive() const { return !method.has_value(); }
  /// "euler", "leapfrog", "rk2", "rk4" or "dop853".
  std::string name() const;
  void validate() const;
};

/// Everything needed to run one measurement.
struct PointConfig {
  OrbitSpec orbit;
  ForceKind force = ForceKind::Newtonian;
  /// Required when force == Mesh. Its potential must use orbit.gm.
  std::optional<MeshSpec> mesh;
  IntegratorChoice integrator = IntegratorChoice::adaptive(1e-10);
  int revolutions = 3;
  /// Fixed steps or accepted adaptive steps allowed per point; 0 picks a
  /// generous bound from the period.
  std::size_t max_steps = 0;
  /// Per-point wall-clock budget in seconds; 0 disables it. Runs that hit
  /// it are recorded with status "timeout". Enabling this makes the status
  /// column depend on machine speed.
  double wall_clock_budget_s = 0;

  void validate() const;
  ForceModel make_force() const;
};

/// One CSV row. Unused parameters stay empty.
struct SweepRecord {
  std::string sweep_id;
  std::string scheme;
  std::string method;
  std::optional<Real> h;
  std::optional<Real> tol;
  std::optional<Real> dx;
  std::optional<Real> theta_deg;
  std::optional<Real> beta;
  std::optional<Real> ecc;
  /// Empty when the point failed.
  std::optional<Real> shift_rad;
  std::optional<Real> predicted_advance_rad;
  bool detectable = false;
  /// ok | unreliable | collision | step_underflow | step_budget | timeout |
  /// metrology_error | error
  std::string status = "ok";
  double runtime_s = 0;
  /// Human-readable failure detail; not part of the CSV schema.
  std::string message;

  std::optional<Real> abs_shift_rad() const;
  bool failed() const { return !shift_rad.has_value(); }
};

/// Strict: |shift| < predicted advance. False when either value is missing.
bool classify_detectability(const SweepRecord &record);

/// Outcome of a single measurement, with the perihelion events used.
struct PointResult {
  SweepRecord record;
  std::vector<PerihelionEvent> events;
};

/// Runs one point. Never throws for numerical failures: they end up in
/// record.status. Invalid configurations throw std::invalid_argument.
PointResult run_point(const PointConfig &config, std::string sweep_id = {});

struct SweepOptions {
  unsigned workers = 1;
  /// Called after each finished point (from worker threads, serialized).
  std::function<void(const SweepRecord &)> progress;
};

/// Runs `count` independent jobs on a pool of workers and returns the rows
/// in job order, independent of the number of workers.
std::vector<SweepRecord> run_parallel(std::size_t count,
                                      const std::function<SweepRecord(std::size_t)> &job,
                                      const SweepOptions &options = {});

/// Exact Newtonian force, one row per (method, h) in the given order.
std::vector<SweepRecord> sweep_timestep(std::span<const FixedStepMethod> methods,
                                        std::span<const Real> h_values, const PointConfig &base,
                                        const SweepOptions &options = {});

/// One row per beta; all other settings from `base`.
std::vector<SweepRecord> sweep_beta(std::span<const Real> beta_values, const PointConfig &base,
                                    const SweepOptions &options = {});

/// One row per eccentricity; the orbit keeps its semi-major axis.
std::vector<SweepRecord> sweep_ecc(std::span<const Real> ecc_values, const PointConfig &base,
                                   const SweepOptions &options = {});

/// Angles k * 360 / n_angles degrees, k = 0 .. n_angles - 1.
std::vector<Real> theta_grid_deg(int n_angles);

/// One row per lattice angle. `base` must carry a mesh.
std::vector<SweepRecord> sweep_theta(int n_angles, const PointConfig &base,
                                     const SweepOptions &options = {});

/// Cosine fit (linear scheme) or Gaussian summary (bilinear scheme) of the
/// successful rows of a theta sweep, with shifts divided by dx.
FitResult summarize_theta(std::span<const SweepRecord> rows, MeshScheme scheme, Real dx);

struct DxSweepResult {
  /// One aggregated row per dx: shift_rad holds the cosine amplitude
  /// (linear) or the standard deviation (bilinear) of the theta sweep.
  std::vector<SweepRecord> rows;
  /// Every theta-sweep row, ids "dx:<k>/theta:<m>".
  std::vector<SweepRecord> per_angle;
  /// Per-dx summary fits, same order as rows (empty fit when too few ok angles).
  std::vector<std::optional<FitResult>> summaries;
  /// Power law of the aggregate against dx over rows that are ok.
  std::optional<FitResult> scaling;
};

/// Bilinear rows with dx at or below this are flagged "unreliable".
inline constexpr Real bilinear_reliable_dx = 1e-3;

DxSweepResult sweep_dx(std::span<const Real> dx_values, int n_angles, const PointConfig &base,
                       const SweepOptions &options = {});

// ---------------------------------------------------------------------------
// Output

inline constexpr std::string_view csv_header =
    "sweep_id,scheme,method,h,tol,dx,theta_deg,beta,ecc,shift_rad,abs_shift_rad,"
    "predicted_advance_rad,detectable,status,runtime_s";

struct CsvOptions {
  /// Fill runtime_s. Off by default so repeated runs are byte-identical.
  bool timing = false;
};

/// Decimal notation with 17 significant digits.
std::string format_real(Real value);

std::string to_csv_row(const SweepRecord &record, const CsvOptions &options = {});
void write_csv(std::ostream &out, std::span<const SweepRecord> rows, const CsvOptions &options = {});
std::string to_json_line(const SweepRecord &record, const CsvOptions &options = {});
void write_jsonl(std::ostream &out, std::span<const SweepRecord> rows,
                 const CsvOptions &options = {});

}  // namespace perihelion
