#include "cusplab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cusplab/sparse_form.hpp"  // for Error

namespace cusplab {
namespace {

// Kronrod 15 abscissae (positive half) and weights; Gauss 7 weights sit on
// the odd-indexed abscissae. Values match the classical QUADPACK tables.
constexpr double kXgk[8] = {
    0.9914553711208126, 0.9491079123427585, 0.8648644233597691, 0.7415311855993944,
    0.5860872354676911, 0.4058451513773972, 0.2077849550078985, 0.0,
};
constexpr double kWgk[8] = {
    0.0229353220105292, 0.0630920926299785, 0.1047900103222502, 0.1406532597155259,
    0.1690047266392679, 0.1903505780647854, 0.2044329400752989, 0.2094821410847278,
};
constexpr double kWg[4] = {
    0.1294849661688697, 0.2797053914892767, 0.3818300505051189, 0.4179591836734694,
};

struct PanelEstimate {
    double k15;
    double err;
};

PanelEstimate gk15(const std::function<double(double)>& f, double a, double b, long& evals) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double k15 = 0.0, g7 = 0.0;
    for (int i = 0; i < 7; ++i) {
        const double x = h * kXgk[i];
        const double fsum = f(c - x) + f(c + x);
        evals += 2;
        if (!std::isfinite(fsum))
            throw Error("quadrature: integrand non-finite near x=" + std::to_string(c - x) +
                        " or x=" + std::to_string(c + x));
        k15 += kWgk[i] * fsum;
        if (i % 2 == 1) g7 += kWg[i / 2] * fsum;
    }
    const double fc = f(c);
    evals += 1;
    if (!std::isfinite(fc)) throw Error("quadrature: integrand non-finite near x=" + std::to_string(c));
    k15 += kWgk[7] * fc;
    g7 += kWg[3] * fc;
    return {h * k15, h * std::abs(k15 - g7)};
}

void refine(const std::function<double(double)>& f, double a, double b, double tol_per_len,
            int depth, const QuadOptions& opts, QuadResult& out) {
    const PanelEstimate est = gk15(f, a, b, out.evaluations);
    const double budget = tol_per_len * (b - a);
    if (est.err <= budget || depth >= opts.max_depth || out.evaluations > opts.max_evaluations) {
        out.value += est.k15;
        out.error += est.err;
        if (est.err > budget && depth >= opts.max_depth) out.converged = false;
        if (out.evaluations > opts.max_evaluations) out.converged = false;
        return;
    }
    const double c = 0.5 * (a + b);
    refine(f, a, c, tol_per_len, depth + 1, opts, out);
    refine(f, c, b, tol_per_len, depth + 1, opts, out);
}

}  // namespace

QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                     const QuadOptions& opts) {
    if (!(a < b)) {
        if (a == b) return {0.0, 0.0, 0, true};
        throw Error("quadrature: empty or reversed interval");
    }
    // First pass to scale the relative tolerance.
    long pre_evals = 0;
    const PanelEstimate whole = gk15(f, a, b, pre_evals);
    const double scale = std::max(opts.abs_tol, opts.rel_tol * std::abs(whole.k15));
    QuadResult out;
    out.converged = true;
    out.evaluations = pre_evals;
    refine(f, a, b, scale / (b - a), 0, opts, out);
    if (out.error > std::max(opts.abs_tol, opts.rel_tol * std::abs(out.value)) * 4.0)
        out.converged = false;
    return out;
}

QuadResult integrate_half_inf(const std::function<double(double)>& f, double a,
                              const QuadOptions& opts) {
    QuadResult total;
    total.converged = true;
    double left = a;
    double width = 1.0;
    double prev_mag = 0.0;
    bool have_prev = false;
    const int max_panels = 140;
    for (int panel = 0; panel < max_panels; ++panel) {
        QuadOptions popt = opts;
        popt.abs_tol = std::max(opts.abs_tol * 0.25,
                                opts.rel_tol * 0.25 * std::abs(total.value));
        QuadResult part = integrate(f, left, left + width, popt);
        total.value += part.value;
        total.error += part.error;
        total.evaluations += part.evaluations;
        total.converged = total.converged && part.converged;

        const double mag = std::abs(part.value);
        const double tol_here = std::max(opts.abs_tol, opts.rel_tol * std::abs(total.value));
        if (have_prev && prev_mag > 0.0 && mag < prev_mag) {
            const double r = mag / prev_mag;
            const double tail = mag * r / (1.0 - r);
            if (tail < tol_here) {
                total.error += tail;
                return total;
            }
        } else if (have_prev && mag == 0.0 && prev_mag == 0.0) {
            return total;  // integrand fell identically to zero
        }
        prev_mag = mag;
        have_prev = true;
        left += width;
        width *= 2.0;
    }
    total.converged = false;
    return total;
}

}  // namespace cusplab
