#pragma once

#include <cstdint>
#include <vector>

#include "cusplab/sparse_form.hpp"

namespace cusplab {

// Boundary profile g over the base interval [-1/2, 1/2], even in x'.
// Canonical form: g(r) = A |log|r||^(-alpha), g(0) = 0. A sampled profile
// interpolates (x_i, y_i) linearly on [0, 1/2] and is extended evenly.
class CuspProfile {
  public:
    static CuspProfile canonical(double A, double alpha);
    // xs nondecreasing, xs.front() == 0, xs.back() == 0.5, ys >= 0. A repeated
    // abscissa with distinct ordinates encodes a jump discontinuity.
    static CuspProfile sampled(std::vector<double> xs, std::vector<double> ys);

    bool is_canonical() const { return canonical_; }
    double modulus_constant() const { return A_; }  // canonical only
    double exponent() const { return alpha_; }      // canonical only

    // g(|r|); r must lie in [-1/2, 1/2].
    double eval(double r) const;

    // dg/dx at x = |r| > 0 (canonical: closed form; sampled: segment slope).
    double slope(double r) const;

    // Smallest x > 0 with g(x) = y. Canonical closed form; sampled profiles
    // must be nondecreasing for this to be well defined.
    double inverse(double y) const;

    double max_height() const;  // g(1/2)

    bool invertible() const;  // true for canonical and strictly increasing sampled

    // Sample arrays; empty for canonical profiles.
    const std::vector<double>& sample_x() const { return xs_; }
    const std::vector<double>& sample_y() const { return ys_; }

    struct ModulusReport {
        double a_eff = 0.0;          // max |g(x)-g(y)| |log|x-y||^alpha over pairs
        double worst_x = 0.0, worst_y = 0.0;
        double a_eff_close = 0.0;    // same max over pairs closer than 1e-6
        std::size_t pairs_used = 0;
        bool bounded = true;         // false for a genuine jump: there a_eff grows without bound in n_pairs
    };
    // Monte Carlo estimate of the logarithmic modulus constant; deterministic
    // for a fixed seed. Half the pairs are drawn at separations down to 1e-14
    // so the large-log regime is exercised. A jump (zero-width sampled step)
    // makes the supremum infinite, so bounded is cleared structurally rather
    // than by waiting for a sampled pair to straddle the step.
    ModulusReport modulus_check(std::size_t n_pairs, double alpha_for_check,
                                std::uint64_t seed = 20240501) const;
    ModulusReport modulus_check(std::size_t n_pairs) const;

    std::uint64_t hash() const;

  private:
    CuspProfile() = default;
    bool canonical_ = true;
    double A_ = 1.0;
    double alpha_ = 2.0;
    std::vector<double> xs_, ys_;
};

}  // namespace cusplab
