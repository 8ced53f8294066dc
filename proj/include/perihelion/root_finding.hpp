#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "perihelion/vec2.hpp"

namespace perihelion {

struct RootResult {
  Real root{};
  int iterations = 0;
};

/// Brent's zeroin: bisection safeguarded by secant and inverse quadratic
/// interpolation. Requires f(a) and f(b) of opposite sign (or zero). The
/// bracket is shrunk until its half-width is below
/// rel_tol * |x| + abs_tol / 2.
template <typename F>
RootResult find_root(F &&f, Real a, Real b,
                     Real rel_tol = 4 * std::numeric_limits<Real>::epsilon(), Real abs_tol = 0,
                     int max_iterations = 200) {
  Real fa = f(a);
  Real fb = f(b);
  if (fa == 0) return {a, 0};
  if (fb == 0) return {b, 0};
  if ((fa > 0) == (fb > 0)) throw std::domain_error("root is not bracketed");

  Real c = a;
  Real fc = fa;
  Real d = b - a;
  Real e = d;
  for (int iter = 1; iter <= max_iterations; ++iter) {
    if ((fb > 0) == (fc > 0)) {
      c = a;
      fc = fa;
      d = b - a;
      e = d;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const Real tol = rel_tol * std::abs(b) + abs_tol / 2;
    const Real m = (c - b) / 2;
    if (std::abs(m) <= tol || fb == 0) return {b, iter};

    if (std::abs(e) >= tol && std::abs(fa) > std::abs(fb)) {
      Real p;
      Real q;
      const Real s = fb / fa;
      if (a == c) {
        p = 2 * m * s;
        q = 1 - s;
      } else {
        const Real qa = fa / fc;
        const Real r = fb / fc;
        p = s * (2 * m * qa * (qa - r) - (b - a) * (r - 1));
        q = (qa - 1) * (r - 1) * (s - 1);
      }
      if (p > 0)
        q = -q;
      else
        p = -p;
      if (2 * p < std::min(3 * m * q - std::abs(tol * q), std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = m;
        e = m;
      }
    } else {
      d = m;
      e = m;
    }
    a = b;
    fa = fb;
    b += std::abs(d) > tol ? d : (m > 0 ? tol : -tol);
    fb = f(b);
  }
  throw std::runtime_error("root finder did not converge");
}

}  // namespace perihelion
