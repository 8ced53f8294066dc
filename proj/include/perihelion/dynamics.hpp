#pragma once

#include <functional>

#include "perihelion/vec2.hpp"

namespace perihelion {

/// Code units: lengths in Gm (1e9 m), times in Ms (1e6 s), masses in Earth
/// masses. Velocities are therefore in Gm/Ms = km/s.
struct UnitSystem {
  static constexpr double length_unit_m = 1e9;
  static constexpr double time_unit_s = 1e6;
  static constexpr double mass_unit_kg = 5.972e24;

  /// GM of the Sun, Gm^3 / Ms^2.
  static constexpr Real gm_sun = 132733;
  /// Schwarzschild radius of the Sun, Gm (2.95 km).
  static constexpr Real schwarzschild_radius_sun = 2.95e-6;
};

inline constexpr Real arcsec_per_radian = 180 * 3600 / pi;

/// Mercury at perihelion, as used for every reference orbit.
namespace mercury {
inline constexpr Real perihelion_distance = 46.001272;  // Gm
inline constexpr Real perihelion_speed = 58.98;         // Gm/Ms
/// Quoted eccentricity; the reference state above has eccentricity
/// 0.2055923 by vis-viva, which is what `ReferenceOrbit` uses.
inline constexpr Real quoted_eccentricity = 0.205630;
}  // namespace mercury

/// Phase-space point of the test particle. The central mass sits at the origin.
struct OrbitState {
  Real t{};
  Vec2 pos;
  Vec2 vel;
};

/// Acceleration evaluator. Receives the full state because the relativistic
/// correction depends on the velocity; lattice forces only read `pos`.
using ForceModel = std::function<Vec2(const OrbitState &)>;

/// Constants of motion of the exact Kepler problem.
struct Diagnostics {
  Real energy{};   // (Gm/Ms)^2
  Real ang_mom{};  // Gm^2/Ms
  Vec2 ecc_vector; // Runge-Lenz vector divided by GM; points at perihelion
};

/// Perihelion state of the orbit every other orbit is derived from.
struct ReferenceOrbit {
  Real r_per{};
  Real v_per{};
  Real ecc{};      // derived from r_per, v_per and GM
  Real upsilon{};  // r_sch / r_per

  static ReferenceOrbit make(Real r_per, Real v_per, Real gm, Real r_sch);
  static ReferenceOrbit mercury();
};

/// Orbit described by relativistic scale, eccentricity and lattice angle.
///
/// The reference orbit is rescaled in three steps: by `beta` (perihelion
/// distance divided by beta, speed multiplied by sqrt(beta)), then to
/// eccentricity `ecc` at fixed semi-major axis, then rotated so the
/// perihelion lies at angle `theta`.
struct OrbitSpec {
  Real beta = 1;
  Real ecc = 0;
  Real theta = 0;
  Real gm = UnitSystem::gm_sun;
  Real r_sch = UnitSystem::schwarzschild_radius_sun;
  ReferenceOrbit reference;
  /// Start with the velocity reversed (clockwise motion).
  bool retrograde = false;

  static OrbitSpec mercury(Real theta = 0);

  /// Spec whose perihelion relativistic parameter r_sch / r_per equals
  /// `upsilon` after the eccentricity change.
  static OrbitSpec from_upsilon(Real upsilon, Real ecc, Real theta = 0);

  Real upsilon() const { return beta * reference.upsilon; }
  Real perihelion_distance() const;
  Real perihelion_speed() const;
  Real semi_major_axis() const;
  Real period() const;
  Real perihelion_upsilon() const { return r_sch / perihelion_distance(); }

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
};

Vec2 newtonian_acceleration(const OrbitState &state, Real gm);

/// Newtonian attraction plus the Schwarzschild correction
/// (3/2) r_sch l^2 / r^4 along -pos/r.
Vec2 relativistic_acceleration(const OrbitState &state, Real gm, Real r_sch);

ForceModel make_newtonian_force(Real gm);
ForceModel make_relativistic_force(Real gm, Real r_sch);

OrbitState initial_conditions(const OrbitSpec &spec);

Diagnostics diagnostics(const OrbitState &state, Real gm);

/// Leading-order relativistic perihelion advance per revolution, radians.
Real relativistic_advance_prediction(Real semi_major_axis, Real ecc, Real r_sch);

/// Osculating semi-major axis from the orbital energy.
Real osculating_semi_major_axis(const OrbitState &state, Real gm);

/// Kepler period of an orbit with the given semi-major axis.
Real kepler_period(Real semi_major_axis, Real gm);

}  // namespace perihelion
