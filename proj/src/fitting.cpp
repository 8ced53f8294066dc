#include "perihelion/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace perihelion {

namespace {

using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

void require_finite(std::span<const Real> xs, std::string_view what) {
  for (Real x : xs)
    if (!std::isfinite(x)) throw FitError(fmt::format("{} contain a non-finite value", what));
}

}  // namespace

std::string_view to_string(FitModel model) {
  switch (model) {
    case FitModel::Gaussian: return "gaussian";
    case FitModel::Cosine: return "cosine";
    case FitModel::PowerLaw: return "powerlaw";
  }
  return "unknown";
}

Real FitResult::coefficient(std::string_view name) const {
  for (const auto &[key, value] : coefficients)
    if (key == name) return value;
  throw std::out_of_range(fmt::format("{} fit has no coefficient '{}'", to_string(model), name));
}

FitResult fit_gaussian(std::span<const Real> samples) {
  const std::size_t n = samples.size();
  if (n < 8) throw FitError(fmt::format("Gaussian fit needs at least 8 samples, got {}", n));
  require_finite(samples, "samples");

  Real mean = 0;
  for (Real x : samples) mean += x;
  mean /= static_cast<Real>(n);
  Real m2 = 0;
  Real m3 = 0;
  Real m4 = 0;
  for (Real x : samples) {
    const Real d = x - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  const auto nr = static_cast<Real>(n);
  m2 /= nr;
  m3 /= nr;
  m4 /= nr;

  FitResult fit;
  fit.model = FitModel::Gaussian;
  fit.sample_count = n;
  fit.residual_rms = std::sqrt(m2);
  const Real std_unbiased = std::sqrt(m2 * nr / (nr - 1));
  // A spread at rounding level relative to the mean counts as constant.
  fit.degenerate = !(std::sqrt(m2) > 64 * std::numeric_limits<Real>::epsilon() * std::abs(mean)) ||
                   m2 == 0;
  const Real skew = fit.degenerate ? 0 : m3 / std::pow(m2, Real(1.5));
  const Real kurt = fit.degenerate ? 0 : m4 / (m2 * m2) - 3;
  fit.coefficients = {{"mean", mean},
                      {"std", fit.degenerate ? Real(0) : std_unbiased},
                      {"skewness", skew},
                      {"excess_kurtosis", kurt}};
  return fit;
}

FitResult fit_cosine(std::span<const Real> thetas, std::span<const Real> values) {
  if (thetas.size() != values.size())
    throw FitError("cosine fit needs as many angles as values");
  require_finite(thetas, "angles");
  require_finite(values, "values");
  std::vector<Real> distinct;
  for (Real t : thetas) {
    const Real w = wrap_angle(t);
    if (std::none_of(distinct.begin(), distinct.end(),
                     [&](Real d) { return std::abs(wrap_angle(d - w)) < 1e-12; }))
      distinct.push_back(w);
  }
  if (distinct.size() < 4)
    throw FitError(fmt::format("cosine fit needs at least 4 distinct angles, got {}",
                               distinct.size()));

  const auto n = static_cast<Eigen::Index>(thetas.size());
  Matrix basis(n, 3);
  Vector rhs(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Real t = thetas[static_cast<std::size_t>(k)];
    basis(k, 0) = std::cos(t);
    basis(k, 1) = std::sin(t);
    basis(k, 2) = 1;
    rhs[k] = values[static_cast<std::size_t>(k)];
  }
  const Vector coef = basis.colPivHouseholderQr().solve(rhs);
  const Real p = coef[0];
  const Real q = coef[1];
  const Real c = coef[2];
  const Vector resid = rhs - basis * coef;

  FitResult fit;
  fit.model = FitModel::Cosine;
  fit.sample_count = thetas.size();
  fit.residual_rms = std::sqrt(resid.squaredNorm() / static_cast<Real>(n));
  const Real amplitude = std::hypot(p, q);
  Real scale = 0;
  for (Real v : values) scale = std::max(scale, std::abs(v));
  fit.degenerate = !(amplitude > 1e-12 * scale) || amplitude == 0;
  // p cos t + q sin t = A cos(t + phase) with A cos(phase) = p, A sin(phase) = -q.
  fit.coefficients = {{"amplitude", fit.degenerate ? Real(0) : amplitude},
                      {"phase", fit.degenerate ? Real(0) : std::atan2(-q, p)},
                      {"offset", c},
                      {"p", p},
                      {"q", q}};
  return fit;
}

FitResult fit_powerlaw(std::span<const Real> xs, std::span<const Real> ys) {
  if (xs.size() != ys.size()) throw FitError("power-law fit needs as many xs as ys");
  if (xs.size() < 3)
    throw FitError(fmt::format("power-law fit needs at least 3 points, got {}", xs.size()));
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (!(xs[k] > 0) || !(ys[k] > 0) || !std::isfinite(xs[k]) || !std::isfinite(ys[k]))
      throw FitError("power-law fit needs finite positive xs and ys");
  }
  const auto n = static_cast<Eigen::Index>(xs.size());
  Matrix basis(n, 2);
  Vector rhs(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    basis(k, 0) = 1;
    basis(k, 1) = std::log(xs[static_cast<std::size_t>(k)]);
    rhs[k] = std::log(ys[static_cast<std::size_t>(k)]);
  }
  const Eigen::ColPivHouseholderQR<Matrix> qr(basis);
  if (qr.rank() < 2) throw FitError("power-law fit needs at least two distinct xs");
  const Vector coef = qr.solve(rhs);
  const Vector resid = rhs - basis * coef;

  FitResult fit;
  fit.model = FitModel::PowerLaw;
  fit.sample_count = xs.size();
  fit.residual_rms = std::sqrt(resid.squaredNorm() / static_cast<Real>(n));
  fit.coefficients = {{"exponent", coef[1]}, {"prefactor", std::exp(coef[0])}};
  return fit;
}

}  // namespace perihelion
