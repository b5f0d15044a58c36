#include "cusplab/cusp_profile.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace cusplab {

CuspProfile CuspProfile::canonical(double A, double alpha) {
    if (!(A > 0.0) || !(alpha > 0.0)) throw Error("profile: A and alpha must be positive");
    CuspProfile p;
    p.canonical_ = true;
    p.A_ = A;
    p.alpha_ = alpha;
    return p;
}

CuspProfile CuspProfile::sampled(std::vector<double> xs, std::vector<double> ys) {
    if (xs.size() < 2 || xs.size() != ys.size()) throw Error("profile: bad sample arrays");
    if (xs.front() != 0.0 || xs.back() != 0.5) throw Error("profile: samples must span [0, 1/2]");
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (!(xs[i] >= xs[i - 1])) throw Error("profile: sample abscissae must be nondecreasing");
    for (double y : ys)
        if (!(y >= 0.0) || !std::isfinite(y)) throw Error("profile: sample values must be finite and >= 0");
    CuspProfile p;
    p.canonical_ = false;
    p.xs_ = std::move(xs);
    p.ys_ = std::move(ys);
    return p;
}

double CuspProfile::eval(double r) const {
    const double x = std::abs(r);
    if (x > 0.5) throw Error("profile: abscissa outside [-1/2, 1/2]");
    if (canonical_) {
        if (x == 0.0) return 0.0;
        return A_ * std::pow(-std::log(x), -alpha_);
    }
    const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    const std::size_t hi = std::min(static_cast<std::size_t>(it - xs_.begin()), xs_.size() - 1);
    const std::size_t lo = hi == 0 ? 0 : hi - 1;
    if (hi == lo || xs_[hi] == xs_[lo]) return ys_[hi];
    const double t = (x - xs_[lo]) / (xs_[hi] - xs_[lo]);
    return ys_[lo] + t * (ys_[hi] - ys_[lo]);
}

double CuspProfile::slope(double r) const {
    const double x = std::abs(r);
    if (!(x > 0.0) || x > 0.5) throw Error("profile: slope needs 0 < |r| <= 1/2");
    if (canonical_) {
        const double L = -std::log(x);
        return A_ * alpha_ * std::pow(L, -alpha_ - 1.0) / x;
    }
    const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    std::size_t hi = std::min(static_cast<std::size_t>(it - xs_.begin()), xs_.size() - 1);
    if (hi == 0) hi = 1;
    while (hi + 1 < xs_.size() && xs_[hi] == xs_[hi - 1]) ++hi;
    if (xs_[hi] == xs_[hi - 1]) throw Error("profile: slope undefined at a jump");
    return (ys_[hi] - ys_[hi - 1]) / (xs_[hi] - xs_[hi - 1]);
}

bool CuspProfile::invertible() const {
    if (canonical_) return true;
    for (std::size_t i = 1; i < ys_.size(); ++i)
        if (!(ys_[i] > ys_[i - 1])) return false;
    return true;
}

double CuspProfile::inverse(double y) const {
    if (!(y > 0.0)) throw Error("profile: inverse needs y > 0");
    if (canonical_) {
        if (y >= max_height()) return 0.5;
        return std::exp(-std::pow(A_ / y, 1.0 / alpha_));
    }
    if (!invertible()) throw Error("profile: sampled profile is not strictly increasing");
    if (y <= ys_.front()) return xs_.front();
    if (y >= ys_.back()) return xs_.back();
    const auto it = std::upper_bound(ys_.begin(), ys_.end(), y);
    const std::size_t hi = static_cast<std::size_t>(it - ys_.begin());
    const std::size_t lo = hi - 1;
    const double t = (y - ys_[lo]) / (ys_[hi] - ys_[lo]);
    return xs_[lo] + t * (xs_[hi] - xs_[lo]);
}

double CuspProfile::max_height() const {
    if (canonical_) return A_ * std::pow(std::log(2.0), -alpha_);
    return *std::max_element(ys_.begin(), ys_.end());
}

CuspProfile::ModulusReport CuspProfile::modulus_check(std::size_t n_pairs,
                                                      double alpha_for_check,
                                                      std::uint64_t seed) const {
    if (n_pairs < 1) throw Error("profile: modulus check needs at least one pair");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-0.5, 0.5);
    ModulusReport rep;
    rep.pairs_used = 0;
    for (std::size_t k = 0; k < n_pairs; ++k) {
        double x = unif(rng), y = unif(rng);
        // Half the pairs are drawn close together so the small-separation
        // regime, where the log factor is large, is actually exercised.
        if (k % 2 == 1) {
            std::uniform_real_distribution<double> expo(1.0, 14.0);
            const double delta = std::pow(10.0, -expo(rng));
            y = std::clamp(x + delta, -0.5, 0.5);
        }
        if (x == y) continue;
        rep.pairs_used += 1;
        const double sep = std::abs(x - y);
        const double val = std::abs(eval(x) - eval(y)) * std::pow(std::abs(std::log(sep)), alpha_for_check);
        if (val > rep.a_eff) {
            rep.a_eff = val;
            rep.worst_x = x;
            rep.worst_y = y;
        }
        if (sep < 1e-6) rep.a_eff_close = std::max(rep.a_eff_close, val);
    }
    // Pairs straddling a jump score |jump| * |log sep|^alpha, which is
    // unbounded as sep shrinks, so any zero-width step disqualifies the
    // profile outright. Every positive-width sampled segment is Lipschitz and
    // the canonical profile carries the log modulus by construction.
    rep.bounded = true;
    if (!canonical_) {
        for (std::size_t i = 1; i < xs_.size(); ++i)
            if (xs_[i] == xs_[i - 1] && ys_[i] != ys_[i - 1]) rep.bounded = false;
    }
    return rep;
}

CuspProfile::ModulusReport CuspProfile::modulus_check(std::size_t n_pairs) const {
    return modulus_check(n_pairs, canonical_ ? alpha_ : 2.0);
}

std::uint64_t CuspProfile::hash() const {
    std::uint64_t h = fnv1a_u64(canonical_ ? 1 : 2, 0xcbf29ce484222325ull);
    if (canonical_) {
        h = fnv1a_f64(A_, h);
        h = fnv1a_f64(alpha_, h);
    } else {
        for (double v : xs_) h = fnv1a_f64(v, h);
        for (double v : ys_) h = fnv1a_f64(v, h);
    }
    return h;
}

}  // namespace cusplab
