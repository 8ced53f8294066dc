#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "perihelion/dynamics.hpp"

namespace test_support {

using perihelion::Real;

inline Real rel_diff(Real a, Real b) {
  const Real scale = std::max(std::abs(a), std::abs(b));
  return scale == 0 ? 0 : std::abs(a - b) / scale;
}

inline Real vec_rel_diff(const perihelion::Vec2 &a, const perihelion::Vec2 &b) {
  const Real scale = std::max(perihelion::norm(a), perihelion::norm(b));
  return scale == 0 ? 0 : perihelion::norm(a - b) / scale;
}

// Every randomized test seeds its own engine so failures replay exactly.
inline std::mt19937_64 rng(unsigned seed) { return std::mt19937_64(seed); }

}  // namespace test_support
