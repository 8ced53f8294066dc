#pragma once

#include <cmath>
#include <numbers>

namespace perihelion {

#ifdef PERIHELION_EXTENDED_PRECISION
using Real = long double;
#else
using Real = double;
#endif

inline constexpr Real pi = std::numbers::pi_v<Real>;
inline constexpr Real two_pi = 2 * pi;

/// Planar vector used for positions, velocities and accelerations.
struct Vec2 {
  Real x{};
  Real y{};

  constexpr Vec2 &operator+=(const Vec2 &o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2 &operator-=(const Vec2 &o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr Vec2 &operator*=(Real s) {
    x *= s;
    y *= s;
    return *this;
  }

  friend constexpr Vec2 operator+(Vec2 a, const Vec2 &b) { return a += b; }
  friend constexpr Vec2 operator-(Vec2 a, const Vec2 &b) { return a -= b; }
  friend constexpr Vec2 operator-(const Vec2 &a) { return {-a.x, -a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, Real s) { return a *= s; }
  friend constexpr Vec2 operator*(Real s, Vec2 a) { return a *= s; }
  friend constexpr Vec2 operator/(const Vec2 &a, Real s) { return {a.x / s, a.y / s}; }
  friend constexpr bool operator==(const Vec2 &, const Vec2 &) = default;
};

constexpr Real dot(const Vec2 &a, const Vec2 &b) { return a.x * b.x + a.y * b.y; }

/// z-component of the 3D cross product of two planar vectors.
constexpr Real cross(const Vec2 &a, const Vec2 &b) { return a.x * b.y - a.y * b.x; }

inline Real norm(const Vec2 &a) { return std::hypot(a.x, a.y); }

constexpr Real norm2(const Vec2 &a) { return dot(a, a); }

inline bool is_finite(const Vec2 &a) { return std::isfinite(a.x) && std::isfinite(a.y); }

/// Counterclockwise rotation by `angle` radians.
inline Vec2 rotate(const Vec2 &a, Real angle) {
  const Real c = std::cos(angle);
  const Real s = std::sin(angle);
  return {c * a.x - s * a.y, s * a.x + c * a.y};
}

/// Maps an angle to (-pi, pi].
inline Real wrap_angle(Real angle) {
  Real w = std::remainder(angle, two_pi);
  if (w <= -pi) w += two_pi;
  return w;
}

}  // namespace perihelion
