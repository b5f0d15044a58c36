#pragma once

#include <functional>

namespace cusplab {

struct QuadResult {
    double value = 0.0;
    double error = 0.0;        // estimated absolute error
    long evaluations = 0;
    bool converged = false;
};

struct QuadOptions {
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    int max_depth = 60;
    long max_evaluations = 20'000'000;
};

// Adaptive Gauss-Kronrod 7/15 with interval bisection on [a, b].
// The per-interval error is |K15 - G7|; an interval is accepted once its
// error fits within the tolerance budget prorated by interval length.
QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                     const QuadOptions& opts = {});

// Integral over [a, infinity) for integrands with eventually monotone,
// regularly varying decay (exponential or power-law with exponent < -1).
// Marches panels of doubling width and stops when the geometric-ratio
// tail estimate drops below tolerance; the tail estimate is charged to
// the reported error, not the value.
QuadResult integrate_half_inf(const std::function<double(double)>& f, double a,
                              const QuadOptions& opts = {});

}  // namespace cusplab
