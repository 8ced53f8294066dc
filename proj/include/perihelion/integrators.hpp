#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "perihelion/dynamics.hpp"

namespace perihelion {

enum class FixedStepMethod { Euler, Leapfrog, RK2, RK4 };

/// Declared global convergence order of each fixed-step method.
int nominal_order(FixedStepMethod method);
std::string_view to_string(FixedStepMethod method);
/// Accepts "euler", "leapfrog", "rk2", "rk4" (case-insensitive).
FixedStepMethod parse_method(std::string_view name);

/// Semi-implicit Euler: the velocity is updated first and the position
/// update uses the new velocity.
OrbitState step_euler(const OrbitState &state, Real h, const ForceModel &accel);
/// Kick-drift-kick leapfrog.
OrbitState step_leapfrog(const OrbitState &state, Real h, const ForceModel &accel);
/// Explicit midpoint rule.
OrbitState step_rk2(const OrbitState &state, Real h, const ForceModel &accel);
/// Classical four-stage Runge-Kutta.
OrbitState step_rk4(const OrbitState &state, Real h, const ForceModel &accel);
OrbitState step(FixedStepMethod method, const OrbitState &state, Real h, const ForceModel &accel);

struct Trajectory {
  FixedStepMethod method{};
  Real h{};
  std::vector<OrbitState> states;
};

/// Raised when the particle falls inside the collision radius.
class CollisionError : public std::runtime_error {
 public:
  CollisionError(const std::string &what, OrbitState state)
      : std::runtime_error(what), state_(state) {}
  const OrbitState &state() const { return state_; }

 private:
  OrbitState state_;
};

struct FixedStepOptions {
  /// Integration aborts when |pos| drops below this radius; 0 selects
  /// 1e-6 * |pos0|.
  Real collision_radius = 0;
};

/// Integrates `n_steps` steps and keeps every state. The observer sees each
/// state including the initial one.
Trajectory integrate_fixed(const OrbitState &state0, Real h, std::size_t n_steps,
                           FixedStepMethod method, const ForceModel &accel,
                           const std::function<void(const OrbitState &)> &observer = {},
                           const FixedStepOptions &options = {});

/// Streaming variant of integrate_fixed: nothing is stored, and the observer
/// may stop the run early by returning false. Returns the last state.
OrbitState propagate_fixed(const OrbitState &state0, Real h, std::size_t max_steps,
                           FixedStepMethod method, const ForceModel &accel,
                           const std::function<bool(const OrbitState &)> &observer,
                           const FixedStepOptions &options = {});

// ---------------------------------------------------------------------------
// Adaptive integration with dense output.

using PhaseVector = std::array<Real, 4>;  // x, y, vx, vy

/// One accepted step of the adaptive integrator together with the
/// coefficients of its order-7 continuous extension.
struct DenseSegment {
  Real t_begin{};
  Real t_end{};
  PhaseVector y_begin{};
  PhaseVector y_end{};
  std::array<PhaseVector, 7> coeffs{};

  Real h() const { return t_end - t_begin; }
  /// State at t in [t_begin, t_end]; exact at both ends.
  OrbitState eval(Real t) const;
  OrbitState begin_state() const;
  OrbitState end_state() const;
};

class StepSizeUnderflow : public std::runtime_error {
 public:
  StepSizeUnderflow(const std::string &what, OrbitState state, Real h)
      : std::runtime_error(what), state_(state), h_(h) {}
  const OrbitState &state() const { return state_; }
  Real step() const { return h_; }

 private:
  OrbitState state_;
  Real h_;
};

class StepBudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdaptiveOptions {
  Real rtol = 1e-10;
  Real atol = 1e-10;
  /// Smallest admissible step; 0 selects 1e-14 * span.
  Real h_min = 0;
  /// Largest admissible step; 0 means unbounded.
  Real h_max = 0;
  /// First trial step; 0 selects it automatically.
  Real h_initial = 0;
  std::size_t max_steps = 200'000'000;
  Real safety = 0.9;
  Real min_factor = 0.2;
  Real max_factor = 10;
  /// Collision radius as in FixedStepOptions.
  Real collision_radius = 0;

  static AdaptiveOptions with_tolerance(Real tol) {
    AdaptiveOptions o;
    o.rtol = tol;
    o.atol = tol;
    return o;
  }
};

struct AdaptiveStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t evaluations = 0;
  OrbitState final_state;
  bool stopped_by_observer = false;
};

/// View of one accepted step handed to streaming observers. The dense
/// coefficients cost three extra force evaluations and are only computed
/// when `dense()` is called.
class AcceptedStep {
 public:
  AcceptedStep(Real t_begin, Real t_end, const PhaseVector &y_begin, const PhaseVector &y_end,
               std::function<void(DenseSegment &)> build)
      : t_begin_(t_begin), t_end_(t_end), y_begin_(y_begin), y_end_(y_end),
        build_(std::move(build)) {}

  Real t_begin() const { return t_begin_; }
  Real t_end() const { return t_end_; }
  OrbitState begin_state() const;
  OrbitState end_state() const;
  const DenseSegment &dense() const;

 private:
  Real t_begin_;
  Real t_end_;
  const PhaseVector &y_begin_;
  const PhaseVector &y_end_;
  std::function<void(DenseSegment &)> build_;
  mutable bool built_ = false;
  mutable DenseSegment segment_;
};

/// Receives each accepted step; returning false stops the integration.
using SegmentObserver = std::function<bool(const AcceptedStep &)>;

/// Explicit Runge-Kutta 8(5,3) pair of Dormand and Prince with step-size
/// control and dense output, streaming every accepted step to `on_step`.
AdaptiveStats integrate_adaptive_stream(const OrbitState &state0, Real t_end,
                                        const AdaptiveOptions &options,
                                        const ForceModel &accel,
                                        const SegmentObserver &on_step);

/// Piecewise continuous solution over the accepted-step mesh. Immutable once
/// built; safe to query from several threads.
class DenseSolution {
 public:
  DenseSolution(std::vector<DenseSegment> segments, Real tol, AdaptiveStats stats);

  Real t_begin() const { return segments_.front().t_begin; }
  Real t_end() const { return segments_.back().t_end; }
  Real tolerance() const { return tol_; }
  const AdaptiveStats &stats() const { return stats_; }
  std::span<const DenseSegment> segments() const { return segments_; }
  /// Index of the segment containing t (the earlier one at mesh points).
  std::size_t segment_index(Real t) const;

  /// Throws std::out_of_range outside [t_begin, t_end].
  OrbitState eval(Real t) const;

 private:
  std::vector<DenseSegment> segments_;
  Real tol_;
  AdaptiveStats stats_;
};

DenseSolution integrate_adaptive(const OrbitState &state0, Real t_end, Real tol,
                                 const ForceModel &accel);
DenseSolution integrate_adaptive(const OrbitState &state0, Real t_end,
                                 const AdaptiveOptions &options, const ForceModel &accel);

inline OrbitState dense_eval(const DenseSolution &solution, Real t) { return solution.eval(t); }

}  // namespace perihelion
