#pragma once

#include <optional>
#include <span>
#include <vector>

#include "maser/errors.hpp"

namespace maser {

/// Result of an exponential-decay fit y = K exp(-D t) + C.
struct DecayFit {
    double k = 0.0;
    double d = 0.0;
    double c = 0.0;
    double rms_residual = 0.0;
    int n_points = 0;
};

/// Least-squares fit of K exp(-D t) + C by damped Gauss-Newton, initialized
/// from a log-linear regression of |y - C_guess|. If fixed_offset is given, C
/// is held at that value. Optional per-point standard errors weight the
/// residuals as r_i / sigma_i.
/// Throws FitError on non-convergence or D <= 0, DegenerateDataError when y
/// is constant within 1e-12.
DecayFit fit_offset_exponential(std::span<const double> t, std::span<const double> y,
                                std::optional<double> fixed_offset = std::nullopt,
                                std::span<const double> sigma = {});

/// One-parameter fit of amplitude * (1 - exp(-D t)) with the amplitude known
/// a priori. Throws DegenerateDataError when y is identically zero.
DecayFit fit_saturating_exponential(std::span<const double> t, std::span<const double> y,
                                    double amplitude);

namespace detail {
/// Log-linear initializer: regresses log|y - offset| on t and returns the
/// implied (K, D). Exposed for direct verification.
std::pair<double, double> loglinear_init(std::span<const double> t, std::span<const double> y,
                                         double offset);
}  // namespace detail

}  // namespace maser
