#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "perihelion/harness.hpp"

namespace perihelion::cli {

/// Flat run configuration. Every field maps to one `--key` flag and to one
/// `key = value` line of a config file. Empty optionals resolve to the
/// per-command defaults listed in the README.
struct RunConfig {
  // orbit
  Real beta = 1;
  std::optional<Real> ecc;  // reference eccentricity when empty
  Real theta_deg = 0;
  Real gm = UnitSystem::gm_sun;
  Real r_sch = UnitSystem::schwarzschild_radius_sun;
  Real ref_r_per = mercury::perihelion_distance;
  Real ref_v_per = mercury::perihelion_speed;
  bool retrograde = false;

  // force and integrator
  std::optional<std::string> force;  // newtonian | relativistic; mesh implied by --scheme
  std::string integrator = "adaptive";  // adaptive | euler | leapfrog | rk2 | rk4
  std::optional<Real> h;
  std::optional<Real> tol;
  bool allow_fixed_step_mesh = false;

  // mesh
  std::string scheme = "none";  // none | linear | bilinear
  Real dx = 0.1;
  std::string variant = "symmetric";
  std::string indexing = "floor";
  Real offset_x = 0;
  Real offset_y = 0;

  // measurement and sweeps
  int revs = 3;
  std::vector<std::string> methods;
  std::vector<Real> h_values;
  std::vector<Real> beta_values;
  std::vector<Real> ecc_values;
  std::vector<Real> dx_values;
  int angles = 180;
  std::size_t max_steps = 0;
  double budget_s = 0;

  // output
  std::string out;
  std::string per_angle_out;
  std::string format = "csv";  // csv | jsonl
  unsigned workers = 1;
  // double | extended; defaults to what the build uses
  std::string precision = sizeof(Real) > sizeof(double) ? "extended" : "double";
  bool timing = false;
};

/// Name of the environment variable giving the directory for relative (or
/// omitted) output paths.
inline constexpr const char *output_dir_env = "PERIHELION_OUTPUT_DIR";

/// Exit codes.
enum ExitCode : int {
  ok = 0,
  usage_error = 2,
  config_error = 3,
  output_error = 4,
  all_points_failed = 5,
};

/// Entry point shared by the executable and the tests.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);
int run(int argc, const char *const *argv);

/// Build the point configuration implied by a resolved RunConfig for the
/// given command. Throws std::invalid_argument on inconsistent settings.
PointConfig make_point_config(const RunConfig &config, const std::string &command);

}  // namespace perihelion::cli
