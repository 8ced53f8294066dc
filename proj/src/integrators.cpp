#include "perihelion/integrators.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "dop853_tableau.hpp"

namespace perihelion {

int nominal_order(FixedStepMethod method) {
  switch (method) {
    case FixedStepMethod::Euler: return 1;
    case FixedStepMethod::Leapfrog: return 2;
    case FixedStepMethod::RK2: return 2;
    case FixedStepMethod::RK4: return 4;
  }
  return 0;
}

std::string_view to_string(FixedStepMethod method) {
  switch (method) {
    case FixedStepMethod::Euler: return "euler";
    case FixedStepMethod::Leapfrog: return "leapfrog";
    case FixedStepMethod::RK2: return "rk2";
    case FixedStepMethod::RK4: return "rk4";
  }
  return "unknown";
}

FixedStepMethod parse_method(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "euler") return FixedStepMethod::Euler;
  if (lower == "leapfrog") return FixedStepMethod::Leapfrog;
  if (lower == "rk2") return FixedStepMethod::RK2;
  if (lower == "rk4") return FixedStepMethod::RK4;
  throw std::invalid_argument(fmt::format("unknown integration method '{}'", name));
}

OrbitState step_euler(const OrbitState &s, Real h, const ForceModel &accel) {
  const Vec2 a = accel(s);
  OrbitState next;
  next.t = s.t + h;
  next.vel = s.vel + a * h;
  next.pos = s.pos + next.vel * h;
  return next;
}

OrbitState step_leapfrog(const OrbitState &s, Real h, const ForceModel &accel) {
  const Vec2 v_half = s.vel + accel(s) * (h / 2);
  OrbitState next;
  next.t = s.t + h;
  next.pos = s.pos + v_half * h;
  // Velocity-dependent forces see the half-step velocity at the new position.
  next.vel = v_half + accel({next.t, next.pos, v_half}) * (h / 2);
  return next;
}

OrbitState step_rk2(const OrbitState &s, Real h, const ForceModel &accel) {
  const Vec2 k1x = s.vel;
  const Vec2 k1v = accel(s);
  const OrbitState mid{s.t + h / 2, s.pos + k1x * (h / 2), s.vel + k1v * (h / 2)};
  const Vec2 k2x = mid.vel;
  const Vec2 k2v = accel(mid);
  return {s.t + h, s.pos + k2x * h, s.vel + k2v * h};
}

OrbitState step_rk4(const OrbitState &s, Real h, const ForceModel &accel) {
  const Real half = h / 2;
  const Vec2 k1x = s.vel;
  const Vec2 k1v = accel(s);
  const OrbitState s2{s.t + half, s.pos + k1x * half, s.vel + k1v * half};
  const Vec2 k2x = s2.vel;
  const Vec2 k2v = accel(s2);
  const OrbitState s3{s.t + half, s.pos + k2x * half, s.vel + k2v * half};
  const Vec2 k3x = s3.vel;
  const Vec2 k3v = accel(s3);
  const OrbitState s4{s.t + h, s.pos + k3x * h, s.vel + k3v * h};
  const Vec2 k4x = s4.vel;
  const Vec2 k4v = accel(s4);
  return {s.t + h, s.pos + (k1x + 2 * k2x + 2 * k3x + k4x) * (h / 6),
          s.vel + (k1v + 2 * k2v + 2 * k3v + k4v) * (h / 6)};
}

OrbitState step(FixedStepMethod method, const OrbitState &state, Real h, const ForceModel &accel) {
  switch (method) {
    case FixedStepMethod::Euler: return step_euler(state, h, accel);
    case FixedStepMethod::Leapfrog: return step_leapfrog(state, h, accel);
    case FixedStepMethod::RK2: return step_rk2(state, h, accel);
    case FixedStepMethod::RK4: return step_rk4(state, h, accel);
  }
  throw std::invalid_argument("unknown integration method");
}

namespace {

Real resolve_collision_radius(Real configured, const OrbitState &state0) {
  return configured > 0 ? configured : Real(1e-6) * norm(state0.pos);
}

void check_collision(const OrbitState &s, Real radius) {
  if (!(norm(s.pos) >= radius)) {
    throw CollisionError(
        fmt::format("particle entered the collision radius {} at t = {} (r = {})",
                    static_cast<double>(radius), static_cast<double>(s.t),
                    static_cast<double>(norm(s.pos))),
        s);
  }
}

}  // namespace

OrbitState propagate_fixed(const OrbitState &state0, Real h, std::size_t max_steps,
                           FixedStepMethod method, const ForceModel &accel,
                           const std::function<bool(const OrbitState &)> &observer,
                           const FixedStepOptions &options) {
  if (!(h > 0)) throw std::invalid_argument("step size must be positive");
  if (max_steps < 1) throw std::invalid_argument("at least one step is required");
  const Real radius = resolve_collision_radius(options.collision_radius, state0);
  OrbitState s = state0;
  if (observer && !observer(s)) return s;
  for (std::size_t n = 0; n < max_steps; ++n) {
    const Real t_next = state0.t + static_cast<Real>(n + 1) * h;
    s = step(method, s, h, accel);
    s.t = t_next;
    check_collision(s, radius);
    if (observer && !observer(s)) break;
  }
  return s;
}

Trajectory integrate_fixed(const OrbitState &state0, Real h, std::size_t n_steps,
                           FixedStepMethod method, const ForceModel &accel,
                           const std::function<void(const OrbitState &)> &observer,
                           const FixedStepOptions &options) {
  if (n_steps < 1) throw std::invalid_argument("at least one step is required");
  Trajectory traj;
  traj.method = method;
  traj.h = h;
  traj.states.reserve(n_steps + 1);
  propagate_fixed(
      state0, h, n_steps, method, accel,
      [&](const OrbitState &s) {
        traj.states.push_back(s);
        if (observer) observer(s);
        return true;
      },
      options);
  return traj;
}

// ---------------------------------------------------------------------------

namespace {

OrbitState to_state(Real t, const PhaseVector &y) { return {t, {y[0], y[1]}, {y[2], y[3]}}; }

}  // namespace

OrbitState DenseSegment::begin_state() const { return to_state(t_begin, y_begin); }
OrbitState DenseSegment::end_state() const { return to_state(t_end, y_end); }

OrbitState DenseSegment::eval(Real t) const {
  if (t == t_begin) return begin_state();
  if (t == t_end) return end_state();
  const Real x = (t - t_begin) / h();
  PhaseVector y{};
  for (int i = 0; i < 7; ++i) {
    const PhaseVector &f = coeffs[6 - i];
    const Real w = (i % 2 == 0) ? x : 1 - x;
    for (int k = 0; k < 4; ++k) y[k] = (y[k] + f[k]) * w;
  }
  for (int k = 0; k < 4; ++k) y[k] += y_begin[k];
  return to_state(t, y);
}

OrbitState AcceptedStep::begin_state() const { return to_state(t_begin_, y_begin_); }
OrbitState AcceptedStep::end_state() const { return to_state(t_end_, y_end_); }

const DenseSegment &AcceptedStep::dense() const {
  if (!built_) {
    build_(segment_);
    built_ = true;
  }
  return segment_;
}

namespace {

struct Rhs {
  const ForceModel &accel;
  std::size_t evaluations = 0;

  PhaseVector operator()(Real t, const PhaseVector &y) {
    ++evaluations;
    const Vec2 a = accel(to_state(t, y));
    return {y[2], y[3], a.x, a.y};
  }
};

Real rms_norm(const PhaseVector &v, const PhaseVector &scale) {
  Real sum = 0;
  for (int k = 0; k < 4; ++k) {
    const Real q = v[k] / scale[k];
    sum += q * q;
  }
  return std::sqrt(sum / 4);
}

constexpr int error_estimator_order = 7;

Real initial_step(Rhs &rhs, Real t0, const PhaseVector &y0, const PhaseVector &f0, Real span,
                  const AdaptiveOptions &o) {
  PhaseVector scale{};
  for (int k = 0; k < 4; ++k) scale[k] = o.atol + std::abs(y0[k]) * o.rtol;
  const Real d0 = rms_norm(y0, scale);
  const Real d1 = rms_norm(f0, scale);
  Real h0 = (d0 < 1e-5 || d1 < 1e-5) ? Real(1e-6) : Real(0.01) * d0 / d1;
  h0 = std::min(h0, span);
  PhaseVector y1{};
  for (int k = 0; k < 4; ++k) y1[k] = y0[k] + h0 * f0[k];
  const PhaseVector f1 = rhs(t0 + h0, y1);
  PhaseVector df{};
  for (int k = 0; k < 4; ++k) df[k] = f1[k] - f0[k];
  const Real d2 = rms_norm(df, scale) / h0;
  Real h1;
  if (d1 <= 1e-15 && d2 <= 1e-15) {
    h1 = std::max(Real(1e-6), h0 * Real(1e-3));
  } else {
    h1 = std::pow(Real(0.01) / std::max(d1, d2), Real(1) / (error_estimator_order + 1));
  }
  return std::min({100 * h0, h1, span});
}

}  // namespace

AdaptiveStats integrate_adaptive_stream(const OrbitState &state0, Real t_end,
                                        const AdaptiveOptions &o, const ForceModel &accel,
                                        const SegmentObserver &on_step) {
  using namespace dop853;
  if (!(o.rtol > 0) || !(o.atol > 0)) throw std::invalid_argument("tolerance must be positive");
  if (!(t_end > state0.t)) throw std::invalid_argument("t_end must exceed the initial time");

  const Real span = t_end - state0.t;
  const Real h_min = o.h_min > 0 ? o.h_min : Real(1e-14) * span;
  const Real h_max = o.h_max > 0 ? o.h_max : std::numeric_limits<Real>::infinity();
  const Real radius = resolve_collision_radius(o.collision_radius, state0);
  const Real exponent = Real(-1) / (error_estimator_order + 1);

  Rhs rhs{accel};
  AdaptiveStats stats;

  Real t = state0.t;
  PhaseVector y{state0.pos.x, state0.pos.y, state0.vel.x, state0.vel.y};
  PhaseVector f = rhs(t, y);
  Real h = o.h_initial > 0 ? o.h_initial : initial_step(rhs, t, y, f, span, o);
  h = std::min(h, h_max);

  std::array<PhaseVector, n_stages_extended> K{};
  PhaseVector y_new{};

  while (t < t_end) {
    if (stats.accepted >= o.max_steps)
      throw StepBudgetExceeded(fmt::format("step budget of {} accepted steps exhausted at t = {}",
                                           o.max_steps, static_cast<double>(t)));
    bool rejected = false;
    Real t_new = t;
    Real step = h;
    for (;;) {
      const Real remaining = t_end - t;
      const bool last = step >= remaining;
      if (last) step = remaining;
      if (step < h_min && !last) {
        throw StepSizeUnderflow(
            fmt::format("step size {} fell below h_min = {} at t = {}, r = {}",
                        static_cast<double>(step), static_cast<double>(h_min),
                        static_cast<double>(t),
                        static_cast<double>(std::hypot(y[0], y[1]))),
            to_state(t, y), step);
      }

      K[0] = f;
      for (int s = 1; s < n_stages; ++s) {
        PhaseVector ys = y;
        for (int j = 0; j < s; ++j) {
          const Real w = a[s][j] * step;
          if (w == 0) continue;
          for (int k = 0; k < 4; ++k) ys[k] += w * K[j][k];
        }
        K[s] = rhs(t + c[s] * step, ys);
      }
      y_new = y;
      for (int j = 0; j < n_stages; ++j) {
        const Real w = a[n_stages][j] * step;
        if (w == 0) continue;
        for (int k = 0; k < 4; ++k) y_new[k] += w * K[j][k];
      }
      t_new = last ? t_end : t + step;
      K[n_stages] = rhs(t_new, y_new);

      // Error estimate of the 8(5,3) pair.
      Real err5 = 0;
      Real err3 = 0;
      for (int k = 0; k < 4; ++k) {
        const Real scale = o.atol + std::max(std::abs(y[k]), std::abs(y_new[k])) * o.rtol;
        Real est5 = 0;
        Real est3 = 0;
        for (int j = 0; j <= n_stages; ++j) {
          est5 += e5[j] * K[j][k];
          est3 += e3[j] * K[j][k];
        }
        est5 /= scale;
        est3 /= scale;
        err5 += est5 * est5;
        err3 += est3 * est3;
      }
      Real error_norm = 0;
      if (err5 > 0 || err3 > 0) {
        const Real denom = err5 + Real(0.01) * err3;
        error_norm = std::abs(step) * err5 / std::sqrt(denom * 4);
      }

      if (error_norm < 1) {
        Real factor = error_norm == 0 ? o.max_factor
                                      : std::min(o.max_factor,
                                                 o.safety * std::pow(error_norm, exponent));
        if (rejected) factor = std::min(Real(1), factor);
        h = std::min(step * factor, h_max);
        break;
      }
      step *= std::max(o.min_factor, o.safety * std::pow(error_norm, exponent));
      rejected = true;
      ++stats.rejected;
    }

    const Real t_old = t;
    const PhaseVector y_old = y;
    const Real h_used = t_new - t_old;
    auto build = [&](DenseSegment &seg) {
      for (int s = n_stages + 1; s < n_stages_extended; ++s) {
        PhaseVector ys = y_old;
        for (int j = 0; j < s; ++j) {
          const Real w = a[s][j] * h_used;
          if (w == 0) continue;
          for (int k = 0; k < 4; ++k) ys[k] += w * K[j][k];
        }
        K[s] = rhs(t_old + c[s] * h_used, ys);
      }
      seg.t_begin = t_old;
      seg.t_end = t_new;
      seg.y_begin = y_old;
      seg.y_end = y_new;
      for (int k = 0; k < 4; ++k) {
        const Real dy = y_new[k] - y_old[k];
        seg.coeffs[0][k] = dy;
        seg.coeffs[1][k] = h_used * K[0][k] - dy;
        seg.coeffs[2][k] = 2 * dy - h_used * (K[n_stages][k] + K[0][k]);
        for (int r = 0; r < 4; ++r) {
          Real acc = 0;
          for (int j = 0; j < n_stages_extended; ++j) acc += d[r][j] * K[j][k];
          seg.coeffs[3 + r][k] = h_used * acc;
        }
      }
    };

    ++stats.accepted;
    t = t_new;
    y = y_new;
    f = K[n_stages];
    check_collision(to_state(t, y), radius);

    if (on_step) {
      const AcceptedStep view(t_old, t_new, y_old, y_new, build);
      if (!on_step(view)) {
        stats.stopped_by_observer = true;
        break;
      }
    }
  }

  stats.evaluations = rhs.evaluations;
  stats.final_state = to_state(t, y);
  return stats;
}

DenseSolution::DenseSolution(std::vector<DenseSegment> segments, Real tol, AdaptiveStats stats)
    : segments_(std::move(segments)), tol_(tol), stats_(stats) {
  if (segments_.empty()) throw std::invalid_argument("dense solution needs at least one step");
}

std::size_t DenseSolution::segment_index(Real t) const {
  if (!(t >= t_begin() && t <= t_end()))
    throw std::out_of_range(fmt::format("t = {} outside the solution span [{}, {}]",
                                        static_cast<double>(t), static_cast<double>(t_begin()),
                                        static_cast<double>(t_end())));
  auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                             [](Real value, const DenseSegment &s) { return value < s.t_end; });
  if (it == segments_.end()) return segments_.size() - 1;
  return static_cast<std::size_t>(it - segments_.begin());
}

OrbitState DenseSolution::eval(Real t) const { return segments_[segment_index(t)].eval(t); }

DenseSolution integrate_adaptive(const OrbitState &state0, Real t_end,
                                 const AdaptiveOptions &options, const ForceModel &accel) {
  std::vector<DenseSegment> segments;
  const AdaptiveStats stats =
      integrate_adaptive_stream(state0, t_end, options, accel, [&](const AcceptedStep &step) {
        segments.push_back(step.dense());
        return true;
      });
  return DenseSolution(std::move(segments), std::max(options.rtol, options.atol), stats);
}

DenseSolution integrate_adaptive(const OrbitState &state0, Real t_end, Real tol,
                                 const ForceModel &accel) {
  return integrate_adaptive(state0, t_end, AdaptiveOptions::with_tolerance(tol), accel);
}

}  // namespace perihelion
