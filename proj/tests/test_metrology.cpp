#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "perihelion/harness.hpp"
#include "perihelion/metrology.hpp"
#include "support.hpp"

using namespace perihelion;
using test_support::rel_diff;

namespace {

// Conic r(phi) = p / (1 + e cos(phi - omega)) sampled on a uniform grid.
std::vector<RadialSample> ellipse_samples(Real omega, Real e, Real first, Real dphi, int n) {
  const Real p = 40;
  std::vector<RadialSample> out;
  for (int k = 0; k < n; ++k) {
    const Real phi = first + k * dphi;
    out.push_back({2 * phi, p / (1 + e * std::cos(phi - omega)), phi});
  }
  return out;
}

Trajectory as_trajectory(const std::vector<RadialSample> &samples) {
  Trajectory traj;
  traj.h = samples[1].t - samples[0].t;
  for (const auto &s : samples)
    traj.states.push_back({s.t, {s.r * std::cos(s.phi), s.r * std::sin(s.phi)}, {}});
  return traj;
}

std::vector<PerihelionEvent> events_with_advance(Real phi0, Real advance, int n, Real direction) {
  std::vector<PerihelionEvent> ev;
  for (int k = 0; k <= n; ++k)
    ev.push_back({Real(k), 46, phi0 + direction * (two_pi * k + advance * k), k, false});
  return ev;
}

// Fixed-step Mercury run over a little more than `revs` periods.
std::vector<PerihelionEvent> fixed_events(FixedStepMethod method, Real h, int revs, int window,
                                          int order) {
  const OrbitSpec spec = OrbitSpec::mercury();
  const OrbitState s0 = initial_conditions(spec);
  const auto n = static_cast<std::size_t>(std::ceil((revs + 0.2) * spec.period() / h));
  const auto traj = integrate_fixed(s0, h, n, method, make_newtonian_force(spec.gm));
  std::vector<PerihelionEvent> events{starting_event(s0)};
  for (const auto &e : find_perihelia_fixed(traj, window, order)) events.push_back(e);
  return events;
}

}  // namespace

TEST_CASE("radial velocity and starting event") {
  const OrbitState s{2, {3, 4}, {1, 2}};
  CHECK(radial_velocity(s) == doctest::Approx((3 + 8) / 5.0));
  const PerihelionEvent e = starting_event(s);
  CHECK(e.t == 2);
  CHECK(e.r == 5);
  CHECK(e.phi == doctest::Approx(std::atan2(4.0, 3.0)));
  CHECK(e.revolution_index == 0);
  CHECK(default_fit_order(FixedStepMethod::RK2) == 4);
  CHECK(default_fit_order(FixedStepMethod::RK4) == 4);
  CHECK(default_fit_order(FixedStepMethod::Euler) == 2);
  CHECK(default_fit_order(FixedStepMethod::Leapfrog) == 2);
}

TEST_CASE("unwrapped angles grow through the branch cut") {
  std::vector<OrbitState> states;
  for (int k = 0; k < 40; ++k) {
    const Real a = 0.5 * k;
    states.push_back({Real(k), {std::cos(a), std::sin(a)}, {}});
  }
  const auto samples = unwrap_samples(states);
  for (std::size_t k = 0; k < samples.size(); ++k)
    CHECK(samples[k].phi == doctest::Approx(0.5 * static_cast<Real>(k)).epsilon(1e-12));
}

TEST_CASE("polynomial fit recovers the perihelion of a synthetic ellipse") {
  for (Real omega : {0.3, 2.0, -1.7}) {
    // Grid deliberately off the true minimum.
    const Real first = omega - 0.0337;
    const auto samples = ellipse_samples(omega, 0.2, first, 0.01, 7);
    for (int order : {2, 4}) {
      const PerihelionEvent e = fit_perihelion(samples, order);
      INFO("order ", order, " omega ", omega);
      CHECK(std::abs(e.phi - omega) < 1e-6);
      CHECK(e.r == doctest::Approx(40 / 1.2).epsilon(1e-9));
      CHECK(e.t == doctest::Approx(2 * omega).epsilon(1e-6));
      CHECK_FALSE(e.degenerate);
    }
    const auto traj = as_trajectory(ellipse_samples(omega, 0.2, omega - 0.5, 0.01, 101));
    CHECK(std::abs(find_perihelion_fixed(traj).phi - omega) < 1e-6);
  }
}

TEST_CASE("circular orbit gives a degenerate event") {
  const auto samples = ellipse_samples(0, 0, 0, 0.01, 7);
  const PerihelionEvent e = fit_perihelion(samples, 2);
  CHECK(e.degenerate);
  CHECK(e.r == doctest::Approx(40));
  std::vector<PerihelionEvent> events{e, e};
  events[1].revolution_index = 1;
  events[1].phi += two_pi;
  CHECK(measure_shift(events, 1).degenerate);
}

TEST_CASE("fits without a minimum are errors") {
  // Monotone branch of the ellipse: no interior minimum.
  const auto rising = ellipse_samples(0, 0.2, 0.5, 0.01, 7);
  CHECK_THROWS_AS(fit_perihelion(rising, 2), MetrologyError);
  CHECK_THROWS_AS(find_perihelion_fixed(as_trajectory(ellipse_samples(0, 0.2, 0.5, 0.01, 50))),
                  MetrologyError);
  const auto few = ellipse_samples(0, 0.2, -0.02, 0.01, 4);
  CHECK_THROWS_AS(fit_perihelion(few, 4), MetrologyError);
  CHECK_THROWS_AS(fit_perihelion(few, 1), std::invalid_argument);
  auto repeated = ellipse_samples(0, 0.2, -0.03, 0.01, 7);
  repeated[3].phi = repeated[2].phi;
  CHECK_THROWS_AS(fit_perihelion(repeated, 2), MetrologyError);
}

TEST_CASE("measure_shift divides the total angle") {
  CHECK(measure_shift(events_with_advance(0.4, 0, 3, 1), 3).shift_per_rev == doctest::Approx(0).epsilon(1e-15));
  const auto m = measure_shift(events_with_advance(0.4, 1e-5, 3, 1), 3, "test");
  CHECK(std::abs(m.shift_per_rev - 1e-5) < 1e-14);
  CHECK(m.revolutions_used == 3);
  CHECK(m.method == "test");
  CHECK(m.events.size() == 4);
  // Clockwise motion: the angle decreases and the shift keeps its sign
  // relative to the motion.
  CHECK(std::abs(measure_shift(events_with_advance(0.4, 1e-5, 3, -1), 3).shift_per_rev + 1e-5) <
        1e-14);
  // Total-angle division ignores wobble in the intermediate events.
  auto wobbly = events_with_advance(0.4, 1e-5, 3, 1);
  wobbly[1].phi += 1e-3;
  wobbly[2].phi -= 2e-3;
  CHECK(std::abs(measure_shift(wobbly, 3).shift_per_rev - 1e-5) < 1e-14);
}

TEST_CASE("measure_shift preconditions") {
  const auto ev = events_with_advance(0, 1e-5, 2, 1);
  CHECK_THROWS_AS(measure_shift(ev, 3), MetrologyError);
  CHECK_THROWS_AS(measure_shift(ev, 0), std::invalid_argument);
  auto skipped = events_with_advance(0, 1e-5, 3, 1);
  skipped[2].revolution_index = 5;
  CHECK_THROWS_AS(measure_shift(skipped, 3), MetrologyError);
}

TEST_CASE("dense perihelia of a closed Kepler orbit repeat") {
  const OrbitSpec spec = OrbitSpec::mercury(0.9);
  const OrbitState s0 = initial_conditions(spec);
  const auto sol = integrate_adaptive(s0, 3.2 * spec.period(), 1e-12, make_newtonian_force(spec.gm));
  const auto events = find_perihelia_dense(sol, spec.period());
  REQUIRE(events.size() == 3);
  Real prev = starting_event(s0).phi;
  for (const auto &e : events) {
    CHECK(std::abs(e.phi - prev - two_pi) < 1e-9);
    CHECK(rel_diff(e.r, spec.perihelion_distance()) < 1e-11);
    prev = e.phi;
  }
}

TEST_CASE("dense perihelia of the relativistic orbit advance") {
  const OrbitSpec spec = OrbitSpec::mercury();
  const OrbitState s0 = initial_conditions(spec);
  const auto sol = integrate_adaptive(s0, 3.2 * spec.period(), 1e-10,
                                      make_relativistic_force(spec.gm, spec.r_sch));
  auto events = find_perihelia_dense(sol, spec.period());
  REQUIRE(events.size() == 3);
  const Real predicted = relativistic_advance_prediction(spec.semi_major_axis(), spec.ecc, spec.r_sch);
  Real prev = starting_event(s0).phi;
  for (const auto &e : events) {
    CHECK(rel_diff(e.phi - prev - two_pi, predicted) < 0.01);
    prev = e.phi;
  }
  events.insert(events.begin(), starting_event(s0));
  CHECK(rel_diff(measure_shift(events, 3).shift_per_rev, predicted) < 0.01);

  // The streaming tracker finds the same events.
  DensePerihelionTracker tracker;
  integrate_adaptive_stream(s0, 3.2 * spec.period(), AdaptiveOptions::with_tolerance(1e-10),
                            make_relativistic_force(spec.gm, spec.r_sch),
                            [&](const AcceptedStep &step) {
                              tracker.observe(step);
                              return true;
                            });
  REQUIRE(tracker.events().size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(std::abs(tracker.events()[k].phi - events[k + 1].phi) < 1e-12);
    CHECK(tracker.events()[k].revolution_index == static_cast<int>(k) + 1);
  }
}

TEST_CASE("dense bracket contract") {
  const OrbitSpec spec = OrbitSpec::mercury();
  const OrbitState s0 = initial_conditions(spec);
  const Real T = spec.period();
  const auto sol = integrate_adaptive(s0, 2.5 * T, 1e-10, make_newtonian_force(spec.gm));
  // Receding half-orbit: no sign change.
  CHECK_THROWS_AS(find_perihelion_dense(sol, 0.1 * T, 0.4 * T), MetrologyError);
  // Aphelion only.
  CHECK_THROWS_AS(find_perihelion_dense(sol, 0.3 * T, 0.7 * T), MetrologyError);
  // Perihelion and aphelion in one bracket.
  CHECK_THROWS_AS(find_perihelion_dense(sol, 0.3 * T, 1.2 * T), MetrologyError);
  CHECK_THROWS_AS(find_perihelion_dense(sol, 0.9 * T, 3 * T), std::out_of_range);
  CHECK_THROWS_AS(find_perihelion_dense(sol, 0.9 * T, 0.8 * T), std::invalid_argument);
  const PerihelionEvent e = find_perihelion_dense(sol, 0.9 * T, 1.1 * T);
  CHECK(rel_diff(e.t, T) < 1e-9);
  CHECK(std::abs(radial_velocity(sol.eval(e.t))) < 1e-9);
}

TEST_CASE("fixed-step and dense perihelia agree for small steps") {
  const OrbitSpec spec = OrbitSpec::mercury(0.6);
  const OrbitState s0 = initial_conditions(spec);
  const auto force = make_newtonian_force(spec.gm);
  const auto sol = integrate_adaptive(s0, 1.2 * spec.period(), 1e-12, force);
  const PerihelionEvent dense = find_perihelia_dense(sol, spec.period()).at(0);
  for (auto method : {FixedStepMethod::Leapfrog, FixedStepMethod::RK4}) {
    const Real h = 1e-4;
    const auto n = static_cast<std::size_t>(1.2 * spec.period() / h);
    const auto traj = integrate_fixed(s0, h, n, method, force);
    const PerihelionEvent fixed = find_perihelion_fixed(traj, 7, default_fit_order(method));
    INFO(to_string(method));
    // Leapfrog carries its own O(h^2) orbit error; RK4 only the fit error.
    CHECK(std::abs(fixed.phi - dense.phi) < (method == FixedStepMethod::RK4 ? 1e-9 : 1e-6));
  }
}

TEST_CASE("streaming fixed-step tracker matches the batch search") {
  const OrbitSpec spec = OrbitSpec::mercury();
  const OrbitState s0 = initial_conditions(spec);
  const auto traj = integrate_fixed(s0, 0.01, 2000, FixedStepMethod::RK2,
                                    make_newtonian_force(spec.gm));
  const auto batch = find_perihelia_fixed(traj, 7, 4);
  FixedStepPerihelionTracker tracker(7, 4);
  for (const auto &s : traj.states) tracker.observe(s);
  REQUIRE(batch.size() == tracker.events().size());
  REQUIRE(batch.size() >= 2);
  for (std::size_t k = 0; k < batch.size(); ++k) CHECK(batch[k].phi == tracker.events()[k].phi);
}

TEST_CASE("fit window size barely moves the RK2 shift") {
  const auto narrow = fixed_events(FixedStepMethod::RK2, 0.00625, 3, 7, 4);
  const auto wide = fixed_events(FixedStepMethod::RK2, 0.00625, 3, 15, 4);
  const Real a = measure_shift(narrow, 3).shift_per_rev;
  const Real b = measure_shift(wide, 3).shift_per_rev;
  CHECK(rel_diff(a, b) < 0.05);
}

TEST_CASE("reversing the velocity flips the linear-mesh shift") {
  PointConfig base;
  base.force = ForceKind::Mesh;
  base.mesh = MeshSpec::kepler(UnitSystem::gm_sun, 0.1, MeshScheme::Linear,
                               LinearVariant::AsPrinted);
  base.integrator = IntegratorChoice::adaptive(8e-11);
  const Real dx = 0.1;
  int compared = 0;
  for (Real theta_deg : theta_grid_deg(12)) {
    PointConfig pro = base;
    pro.orbit = OrbitSpec::mercury(theta_deg * pi / 180);
    PointConfig retro = pro;
    retro.orbit.retrograde = true;
    const auto a = run_point(pro).record;
    const auto b = run_point(retro).record;
    REQUIRE(a.status == "ok");
    REQUIRE(b.status == "ok");
    const Real sa = *a.shift_rad;
    const Real sb = *b.shift_rad;
    INFO("theta ", theta_deg, " prograde ", sa, " retrograde ", sb);
    // Near the zeros of the cosine only the noise floor remains.
    if (std::max(std::abs(sa), std::abs(sb)) < 0.03 * dx) continue;
    ++compared;
    CHECK((sa > 0) != (sb > 0));
    CHECK(std::abs(sa + sb) < 0.2 * std::max(std::abs(sa), std::abs(sb)));
  }
  CHECK(compared >= 6);
}
