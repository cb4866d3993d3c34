#pragma once

#include <span>

namespace fdelab {

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double rms_residual = 0.0;
};

/// Ordinary least squares y ≈ slope * x + intercept. Needs at least two
/// distinct abscissae.
LinearFit linear_fit(std::span<const double> xs, std::span<const double> ys);

/// Richardson extrapolation of a quantity with error ~ C h^order from values
/// at spacing h and h/2.
double richardson(double coarse, double fine, double order);

}  // namespace fdelab
