#pragma once

#include <deque>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "perihelion/integrators.hpp"

namespace perihelion {

class MetrologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PerihelionEvent {
  Real t{};
  Real r{};
  /// Polar angle, unwrapped continuously from the start of the run.
  Real phi{};
  int revolution_index = 0;
  /// Set when the radial profile is flat (near-circular orbit) and the
  /// perihelion direction is not meaningful.
  bool degenerate = false;
};

struct ShiftMeasurement {
  Real shift_per_rev{};
  int revolutions_used = 0;
  std::string method;
  std::vector<PerihelionEvent> events;
  bool degenerate = false;
};

/// d|pos|/dt.
Real radial_velocity(const OrbitState &s);

/// Event for a run that starts exactly at perihelion (revolution 0).
PerihelionEvent starting_event(const OrbitState &s);

/// Polynomial degree used by default for a method: quartic for the
/// Runge-Kutta methods, parabola otherwise.
int default_fit_order(FixedStepMethod method);

inline constexpr int default_fit_window = 7;

/// Sample of the radial profile, with the polar angle already unwrapped.
struct RadialSample {
  Real t{};
  Real r{};
  Real phi{};
};

std::vector<RadialSample> unwrap_samples(std::span<const OrbitState> states);

/// Least-squares polynomial r(phi) through the window; the event sits at
/// the minimum of the polynomial.
PerihelionEvent fit_perihelion(std::span<const RadialSample> window, int fit_order);

/// Event for the first interior minimum of r in the trajectory.
PerihelionEvent find_perihelion_fixed(const Trajectory &traj, int window = default_fit_window,
                                      int fit_order = 2);
/// Events for every interior minimum of r that has a full window around it.
std::vector<PerihelionEvent> find_perihelia_fixed(const Trajectory &traj,
                                                  int window = default_fit_window,
                                                  int fit_order = 2);

/// Streaming version of find_perihelia_fixed used as an integrator observer.
class FixedStepPerihelionTracker {
 public:
  explicit FixedStepPerihelionTracker(int window = default_fit_window, int fit_order = 2);
  void observe(const OrbitState &s);
  const std::vector<PerihelionEvent> &events() const { return events_; }

 private:
  int window_;
  int fit_order_;
  std::deque<RadialSample> buffer_;
  bool have_last_ = false;
  Real last_angle_ = 0;
  Real phi_ = 0;
  std::vector<PerihelionEvent> events_;
};

/// Perihelion inside [t_lo, t_hi]: root of the radial velocity located on
/// the dense output. The bracket must contain exactly one sign change, from
/// approaching to receding.
PerihelionEvent find_perihelion_dense(const DenseSolution &solution, Real t_lo, Real t_hi);

/// All perihelia after the start, bracketed by sampling ~100 points per
/// `period_estimate`.
std::vector<PerihelionEvent> find_perihelia_dense(const DenseSolution &solution,
                                                  Real period_estimate);

/// Unwrapped polar angle at time t, accumulated over the step mesh.
Real unwrapped_angle(const DenseSolution &solution, Real t);

/// Detects perihelia step by step while the adaptive integrator runs.
class DensePerihelionTracker {
 public:
  void observe(const AcceptedStep &step);
  const std::vector<PerihelionEvent> &events() const { return events_; }

 private:
  bool started_ = false;
  bool armed_ = false;
  Real phi_begin_ = 0;
  std::vector<PerihelionEvent> events_;
};

/// Per-revolution shift from the total angle after k revolutions:
/// (phi_k - phi_0 - 2 pi k) / k, with the sign of 2 pi k following the
/// direction of motion. events[0] is the starting perihelion.
ShiftMeasurement measure_shift(std::span<const PerihelionEvent> events, int k,
                               std::string method = {});

}  // namespace perihelion
