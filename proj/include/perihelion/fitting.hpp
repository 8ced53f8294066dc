#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "perihelion/vec2.hpp"

namespace perihelion {

class FitError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class FitModel { Gaussian, Cosine, PowerLaw };

std::string_view to_string(FitModel model);

struct FitResult {
  FitModel model{};
  /// Named coefficients in a fixed, model-specific order.
  std::vector<std::pair<std::string, Real>> coefficients;
  Real residual_rms = 0;
  std::size_t sample_count = 0;
  /// Zero spread (Gaussian) or zero amplitude (cosine): shape parameters
  /// such as skewness or phase carry no information.
  bool degenerate = false;

  /// Throws std::out_of_range for an unknown name.
  Real coefficient(std::string_view name) const;
};

/// Sample mean, unbiased standard deviation, skewness and excess kurtosis.
/// Needs at least 8 samples. residual_rms is the RMS deviation from the mean.
FitResult fit_gaussian(std::span<const Real> samples);

/// values ~ p cos(theta) + q sin(theta) + c, reported as
/// amplitude * cos(theta + phase) + offset. Needs 4 distinct angles.
FitResult fit_cosine(std::span<const Real> thetas, std::span<const Real> values);

/// ys ~ prefactor * xs^exponent by least squares on log-log axes.
/// residual_rms is measured in natural-log units.
FitResult fit_powerlaw(std::span<const Real> xs, std::span<const Real> ys);

}  // namespace perihelion
