#include "perihelion/metrology.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "perihelion/root_finding.hpp"

namespace perihelion {

namespace {

Real polar_angle(const OrbitState &s) { return std::atan2(s.pos.y, s.pos.x); }

using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

Real poly_eval(const Vector &c, Real s) {
  Real v = 0;
  for (Eigen::Index k = c.size() - 1; k >= 0; --k) v = v * s + c[k];
  return v;
}

Real poly_derivative(const Vector &c, Real s) {
  Real v = 0;
  for (Eigen::Index k = c.size() - 1; k >= 1; --k) v = v * s + static_cast<Real>(k) * c[k];
  return v;
}

}  // namespace

Real radial_velocity(const OrbitState &s) { return dot(s.pos, s.vel) / norm(s.pos); }

PerihelionEvent starting_event(const OrbitState &s) {
  return {s.t, norm(s.pos), polar_angle(s), 0, false};
}

int default_fit_order(FixedStepMethod method) {
  return (method == FixedStepMethod::RK2 || method == FixedStepMethod::RK4) ? 4 : 2;
}

std::vector<RadialSample> unwrap_samples(std::span<const OrbitState> states) {
  std::vector<RadialSample> out;
  out.reserve(states.size());
  Real phi = 0;
  Real last = 0;
  for (std::size_t k = 0; k < states.size(); ++k) {
    const Real angle = polar_angle(states[k]);
    phi = k == 0 ? angle : phi + wrap_angle(angle - last);
    last = angle;
    out.push_back({states[k].t, norm(states[k].pos), phi});
  }
  return out;
}

PerihelionEvent fit_perihelion(std::span<const RadialSample> window, int fit_order) {
  const auto n = static_cast<Eigen::Index>(window.size());
  if (fit_order < 2) throw std::invalid_argument("fit order must be at least 2");
  if (n < fit_order + 1)
    throw MetrologyError(fmt::format("fit of order {} needs at least {} samples, got {}",
                                     fit_order, fit_order + 1, n));

  const RadialSample &mid = window[window.size() / 2];
  Real r_min = window[0].r;
  Real r_max = window[0].r;
  Real scale = 0;
  for (const RadialSample &s : window) {
    r_min = std::min(r_min, s.r);
    r_max = std::max(r_max, s.r);
    scale = std::max(scale, std::abs(s.phi - mid.phi));
  }
  for (std::size_t k = 1; k < window.size(); ++k) {
    if (!(window[k].phi != window[k - 1].phi))
      throw MetrologyError("ill-conditioned perihelion fit: repeated polar angles in window");
  }
  if (!(scale > 0)) throw MetrologyError("ill-conditioned perihelion fit: window has zero width");

  if (r_max - r_min <= 1e-12 * r_max) {
    return {mid.t, mid.r, mid.phi, 0, true};
  }

  Matrix vander(n, fit_order + 1);
  Vector rs(n);
  Vector ts(n);
  for (Eigen::Index row = 0; row < n; ++row) {
    const RadialSample &s = window[static_cast<std::size_t>(row)];
    const Real x = (s.phi - mid.phi) / scale;
    Real p = 1;
    for (int k = 0; k <= fit_order; ++k) {
      vander(row, k) = p;
      p *= x;
    }
    rs[row] = s.r - mid.r;
    ts[row] = s.t - mid.t;
  }
  const Eigen::ColPivHouseholderQR<Matrix> qr(vander);
  if (qr.rank() < fit_order + 1)
    throw MetrologyError("ill-conditioned perihelion fit: Vandermonde matrix is rank deficient");
  const Vector rc = qr.solve(rs);
  const Vector tc = qr.solve(ts);

  Real lo = 0;
  Real hi = 0;
  for (const RadialSample &s : window) {
    lo = std::min(lo, (s.phi - mid.phi) / scale);
    hi = std::max(hi, (s.phi - mid.phi) / scale);
  }

  // Stationary points of the fitted polynomial inside the window; keep the
  // lowest minimum.
  constexpr int grid = 256;
  bool found = false;
  Real best_x = 0;
  Real best_r = 0;
  Real x_prev = lo;
  Real d_prev = poly_derivative(rc, lo);
  for (int g = 1; g <= grid; ++g) {
    const Real x = lo + (hi - lo) * static_cast<Real>(g) / grid;
    const Real d = poly_derivative(rc, x);
    if (d_prev < 0 && d >= 0) {
      const Real root =
          d == 0 ? x : find_root([&](Real s) { return poly_derivative(rc, s); }, x_prev, x).root;
      const Real r = poly_eval(rc, root);
      if (!found || r < best_r) {
        found = true;
        best_x = root;
        best_r = r;
      }
    }
    x_prev = x;
    d_prev = d;
  }
  if (!found) throw MetrologyError("fitted radial profile has no minimum inside the window");

  return {mid.t + poly_eval(tc, best_x), mid.r + best_r, mid.phi + best_x * scale, 0, false};
}

std::vector<PerihelionEvent> find_perihelia_fixed(const Trajectory &traj, int window,
                                                  int fit_order) {
  if (window < 3) throw std::invalid_argument("fit window must hold at least 3 samples");
  const std::vector<RadialSample> samples = unwrap_samples(traj.states);
  const auto half = static_cast<std::size_t>(window / 2);
  std::vector<PerihelionEvent> events;
  for (std::size_t m = 1; m + 1 < samples.size(); ++m) {
    if (!(samples[m - 1].r > samples[m].r && samples[m].r <= samples[m + 1].r)) continue;
    if (m < half || m + half >= samples.size()) continue;
    const std::span<const RadialSample> win(samples.data() + (m - half),
                                            static_cast<std::size_t>(2 * half + 1));
    PerihelionEvent ev = fit_perihelion(win, fit_order);
    ev.revolution_index = static_cast<int>(events.size()) + 1;
    events.push_back(ev);
  }
  return events;
}

PerihelionEvent find_perihelion_fixed(const Trajectory &traj, int window, int fit_order) {
  const std::vector<PerihelionEvent> events = find_perihelia_fixed(traj, window, fit_order);
  if (events.empty()) throw MetrologyError("trajectory contains no interior radial minimum");
  return events.front();
}

FixedStepPerihelionTracker::FixedStepPerihelionTracker(int window, int fit_order)
    : window_(window | 1), fit_order_(fit_order) {
  if (window < 3) throw std::invalid_argument("fit window must hold at least 3 samples");
}

void FixedStepPerihelionTracker::observe(const OrbitState &s) {
  const Real angle = polar_angle(s);
  phi_ = have_last_ ? phi_ + wrap_angle(angle - last_angle_) : angle;
  last_angle_ = angle;
  have_last_ = true;
  buffer_.push_back({s.t, norm(s.pos), phi_});
  if (buffer_.size() > static_cast<std::size_t>(window_)) buffer_.pop_front();
  if (buffer_.size() < static_cast<std::size_t>(window_)) return;

  const std::size_t m = buffer_.size() / 2;
  if (!(buffer_[m - 1].r > buffer_[m].r && buffer_[m].r <= buffer_[m + 1].r)) return;
  const std::vector<RadialSample> win(buffer_.begin(), buffer_.end());
  PerihelionEvent ev = fit_perihelion(win, fit_order_);
  ev.revolution_index = static_cast<int>(events_.size()) + 1;
  events_.push_back(ev);
}

// ---------------------------------------------------------------------------

Real unwrapped_angle(const DenseSolution &solution, Real t) {
  const std::size_t idx = solution.segment_index(t);
  const auto segments = solution.segments();
  Real phi = polar_angle(segments[0].begin_state());
  for (std::size_t k = 0; k < idx; ++k) {
    phi += wrap_angle(polar_angle(segments[k].end_state()) - polar_angle(segments[k].begin_state()));
  }
  const DenseSegment &seg = segments[idx];
  return phi + wrap_angle(polar_angle(seg.eval(t)) - polar_angle(seg.begin_state()));
}

PerihelionEvent find_perihelion_dense(const DenseSolution &solution, Real t_lo, Real t_hi) {
  if (!(t_lo < t_hi)) throw std::invalid_argument("perihelion bracket must have t_lo < t_hi");
  if (t_lo < solution.t_begin() || t_hi > solution.t_end())
    throw std::out_of_range("perihelion bracket extends beyond the dense solution");

  // Probe the bracket at every step boundary and step midpoint it covers.
  std::vector<Real> probes{t_lo};
  const auto segments = solution.segments();
  for (std::size_t k = solution.segment_index(t_lo); k < segments.size(); ++k) {
    const DenseSegment &seg = segments[k];
    if (seg.t_begin >= t_hi) break;
    const Real mid = (seg.t_begin + seg.t_end) / 2;
    if (mid > t_lo && mid < t_hi) probes.push_back(mid);
    if (seg.t_end > t_lo && seg.t_end < t_hi) probes.push_back(seg.t_end);
  }
  probes.push_back(t_hi);

  const auto rdot = [&](Real t) { return radial_velocity(solution.eval(t)); };
  int changes = 0;
  std::size_t at = 0;
  bool rising = false;
  Real prev = rdot(probes[0]);
  std::size_t prev_index = 0;
  for (std::size_t k = 1; k < probes.size(); ++k) {
    const Real v = rdot(probes[k]);
    if (v == 0 && k + 1 < probes.size()) continue;
    if (prev != 0 && v != 0 && (prev > 0) != (v > 0)) {
      ++changes;
      at = prev_index;
      rising = v > 0;
    } else if (prev == 0 && k == 1) {
      // bracket starts on a stationary point; nothing to count
    }
    prev = v;
    prev_index = k;
  }
  if (changes == 0) throw MetrologyError("no sign change of the radial velocity in bracket");
  if (changes > 1)
    throw MetrologyError(fmt::format(
        "bracket contains {} sign changes of the radial velocity; narrow it", changes));
  if (!rising) throw MetrologyError("bracket holds an aphelion, not a perihelion");

  std::size_t next = at + 1;
  while (next + 1 < probes.size() && rdot(probes[next]) == 0) ++next;
  const Real t_root = find_root(rdot, probes[at], probes[next]).root;
  const OrbitState s = solution.eval(t_root);
  return {t_root, norm(s.pos), unwrapped_angle(solution, t_root), 0, false};
}

std::vector<PerihelionEvent> find_perihelia_dense(const DenseSolution &solution,
                                                  Real period_estimate) {
  if (!(period_estimate > 0)) throw std::invalid_argument("period estimate must be positive");
  const Real span = solution.t_end() - solution.t_begin();
  const auto n = static_cast<std::size_t>(std::ceil(100 * span / period_estimate)) + 1;
  const Real dt = span / static_cast<Real>(n);
  std::vector<PerihelionEvent> events;
  Real t_prev = solution.t_begin() + dt;
  Real v_prev = radial_velocity(solution.eval(t_prev));
  for (std::size_t k = 2; k <= n; ++k) {
    const Real t = k == n ? solution.t_end() : solution.t_begin() + dt * static_cast<Real>(k);
    const Real v = radial_velocity(solution.eval(t));
    if (v_prev < 0 && v >= 0) {
      PerihelionEvent ev = find_perihelion_dense(solution, t_prev, t);
      ev.revolution_index = static_cast<int>(events.size()) + 1;
      events.push_back(ev);
    }
    t_prev = t;
    v_prev = v;
  }
  return events;
}

void DensePerihelionTracker::observe(const AcceptedStep &step) {
  const OrbitState b = step.begin_state();
  const OrbitState e = step.end_state();
  if (!started_) {
    phi_begin_ = polar_angle(b);
    started_ = true;
  }
  const Real rd0 = radial_velocity(b);
  const Real rd1 = radial_velocity(e);
  if (armed_ && rd0 < 0 && rd1 >= 0) {
    const DenseSegment &seg = step.dense();
    const auto rdot = [&](Real t) { return radial_velocity(seg.eval(t)); };
    const Real t_root = find_root(rdot, seg.t_begin, seg.t_end).root;
    const OrbitState s = seg.eval(t_root);
    const Real phi = phi_begin_ + wrap_angle(polar_angle(s) - polar_angle(b));
    events_.push_back({t_root, norm(s.pos), phi, static_cast<int>(events_.size()) + 1, false});
    armed_ = false;
  }
  if (rd1 < 0) armed_ = true;
  phi_begin_ += wrap_angle(polar_angle(e) - polar_angle(b));
}

ShiftMeasurement measure_shift(std::span<const PerihelionEvent> events, int k, std::string method) {
  if (k < 1) throw std::invalid_argument("shift needs at least one revolution");
  if (events.size() < static_cast<std::size_t>(k) + 1)
    throw MetrologyError(fmt::format("shift over {} revolutions needs {} events, got {}", k,
                                     k + 1, events.size()));
  for (int i = 1; i <= k; ++i) {
    if (events[static_cast<std::size_t>(i)].revolution_index != events[0].revolution_index + i)
      throw MetrologyError("perihelion events are not consecutive revolutions");
  }
  const Real total = events[static_cast<std::size_t>(k)].phi - events[0].phi;
  const Real direction = total >= 0 ? 1 : -1;
  ShiftMeasurement m;
  m.shift_per_rev = (total - direction * two_pi * k) / k;
  m.revolutions_used = k;
  m.method = std::move(method);
  m.events.assign(events.begin(), events.begin() + k + 1);
  m.degenerate = std::any_of(m.events.begin(), m.events.end(),
                             [](const PerihelionEvent &e) { return e.degenerate; });
  return m;
}

}  // namespace perihelion
