#include "perihelion/dynamics.hpp"

#include <stdexcept>
#include <string>

namespace perihelion {

namespace {

Real checked_radius(const Vec2 &pos) {
  const Real r = norm(pos);
  if (!(r > 0)) throw std::domain_error("force evaluated at the central singularity");
  return r;
}

}  // namespace

ReferenceOrbit ReferenceOrbit::make(Real r_per, Real v_per, Real gm, Real r_sch) {
  if (!(r_per > 0) || !(v_per > 0) || !(gm > 0) || !(r_sch >= 0))
    throw std::invalid_argument("reference orbit needs r_per, v_per, GM > 0 and r_sch >= 0");
  ReferenceOrbit ref;
  ref.r_per = r_per;
  ref.v_per = v_per;
  // At perihelion the velocity is perpendicular to the radius, so vis-viva
  // gives e = r v^2 / GM - 1.
  ref.ecc = r_per * v_per * v_per / gm - 1;
  ref.upsilon = r_sch / r_per;
  if (!(ref.ecc >= 0 && ref.ecc < 1))
    throw std::invalid_argument("reference state is not at the perihelion of a bound orbit");
  return ref;
}

ReferenceOrbit ReferenceOrbit::mercury() {
  return make(mercury::perihelion_distance, mercury::perihelion_speed, UnitSystem::gm_sun,
              UnitSystem::schwarzschild_radius_sun);
}

OrbitSpec OrbitSpec::mercury(Real theta) {
  OrbitSpec spec;
  spec.reference = ReferenceOrbit::mercury();
  spec.ecc = spec.reference.ecc;
  spec.theta = theta;
  return spec;
}

OrbitSpec OrbitSpec::from_upsilon(Real upsilon, Real ecc, Real theta) {
  OrbitSpec spec = mercury(theta);
  spec.ecc = ecc;
  const Real target_r_per = spec.r_sch / upsilon;
  spec.beta = spec.reference.r_per * (1 - ecc) / ((1 - spec.reference.ecc) * target_r_per);
  return spec;
}

Real OrbitSpec::perihelion_distance() const {
  return reference.r_per / beta * (1 - ecc) / (1 - reference.ecc);
}

Real OrbitSpec::perihelion_speed() const {
  // Keeping the semi-major axis fixed while changing e requires
  // v^2 ~ (1 + e) / (1 - e), which is what makes the resulting orbit have
  // eccentricity exactly `ecc`.
  const Real e0 = reference.ecc;
  return reference.v_per * std::sqrt(beta) *
         std::sqrt((1 + ecc) * (1 - e0) / ((1 + e0) * (1 - ecc)));
}

Real OrbitSpec::semi_major_axis() const { return perihelion_distance() / (1 - ecc); }

Real OrbitSpec::period() const { return kepler_period(semi_major_axis(), gm); }

void OrbitSpec::validate() const {
  if (!(ecc >= 0 && ecc < 1)) throw std::invalid_argument("eccentricity must lie in [0, 1)");
  if (!(beta > 0)) throw std::invalid_argument("beta must be positive");
  const Real ups = upsilon();
  if (!(ups > 0 && ups < 1))
    throw std::invalid_argument("relativistic parameter must lie in (0, 1), got " +
                                std::to_string(static_cast<double>(ups)));
  if (!(gm > 0)) throw std::invalid_argument("GM must be positive");
  if (!std::isfinite(theta)) throw std::invalid_argument("theta must be finite");
  if (!(perihelion_distance() > r_sch))
    throw std::invalid_argument("perihelion lies inside the Schwarzschild radius");
}

Vec2 newtonian_acceleration(const OrbitState &state, Real gm) {
  const Real r = checked_radius(state.pos);
  return state.pos * (-gm / (r * r * r));
}

// The orbit equation u'' + u = GM/l^2 + (3/2) r_sch u^2 (u = 1/r) belongs to
// a central force f(r) with f = l^2 u^2 (GM/l^2 + (3/2) r_sch u^2), i.e.
// f = GM/r^2 + (3/2) r_sch l^2 / r^4. l is conserved by any central force, so
// evaluating it from the instantaneous state is consistent.
Vec2 relativistic_acceleration(const OrbitState &state, Real gm, Real r_sch) {
  const Real r = checked_radius(state.pos);
  const Real l = cross(state.pos, state.vel);
  const Real r2 = r * r;
  // Newtonian part computed exactly as newtonian_acceleration does, so that
  // r_sch = 0 reproduces it bit for bit.
  const Vec2 newton = state.pos * (-gm / (r2 * r));
  if (r_sch == 0) return newton;
  const Real correction = Real(1.5) * r_sch * l * l / (r2 * r2);
  return newton + state.pos * (-correction / r);
}

ForceModel make_newtonian_force(Real gm) {
  return [gm](const OrbitState &s) { return newtonian_acceleration(s, gm); };
}

ForceModel make_relativistic_force(Real gm, Real r_sch) {
  return [gm, r_sch](const OrbitState &s) { return relativistic_acceleration(s, gm, r_sch); };
}

OrbitState initial_conditions(const OrbitSpec &spec) {
  spec.validate();
  const Real r = spec.perihelion_distance();
  const Real v = spec.perihelion_speed();
  const Real c = std::cos(spec.theta);
  const Real s = std::sin(spec.theta);
  OrbitState state;
  state.pos = {r * c, r * s};
  state.vel = {-v * s, v * c};
  if (spec.retrograde) state.vel = -state.vel;
  return state;
}

Diagnostics diagnostics(const OrbitState &state, Real gm) {
  const Real r = checked_radius(state.pos);
  Diagnostics d;
  d.energy = norm2(state.vel) / 2 - gm / r;
  d.ang_mom = cross(state.pos, state.vel);
  const Vec2 v_cross_l{state.vel.y * d.ang_mom, -state.vel.x * d.ang_mom};
  d.ecc_vector = v_cross_l / gm - state.pos / r;
  return d;
}

Real relativistic_advance_prediction(Real semi_major_axis, Real ecc, Real r_sch) {
  if (!(semi_major_axis > 0)) throw std::invalid_argument("semi-major axis must be positive");
  if (!(ecc >= 0 && ecc < 1)) throw std::invalid_argument("eccentricity must lie in [0, 1)");
  return 3 * pi * r_sch / (semi_major_axis * (1 - ecc * ecc));
}

Real osculating_semi_major_axis(const OrbitState &state, Real gm) {
  const Real energy = diagnostics(state, gm).energy;
  if (!(energy < 0)) throw std::domain_error("state is not on a bound orbit");
  return -gm / (2 * energy);
}

Real kepler_period(Real semi_major_axis, Real gm) {
  return two_pi * std::sqrt(semi_major_axis * semi_major_axis * semi_major_axis / gm);
}

}  // namespace perihelion
