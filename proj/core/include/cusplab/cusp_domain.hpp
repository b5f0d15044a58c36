#pragma once

#include <cstdint>
#include <vector>

#include "cusplab/cusp_profile.hpp"

namespace cusplab {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

// One interior sample with its vertical gap, boundary distance, and the two
// candidate lower bounds exp(-e^{-1/alpha}/(1+a)) and exp(-((1+a)/e)^{1/alpha}).
struct DistanceSample {
    Point2 point;
    double e_val = 0.0;
    double d_gamma = 0.0;
    double lower_paper = 0.0;
    double lower_repaired = 0.0;
};

struct EdReport {
    std::vector<DistanceSample> samples;
    std::size_t n_requested = 0;
    std::size_t n_retained = 0;
    std::size_t viol_upper = 0;           // d_gamma > e_val
    std::size_t viol_lower_paper = 0;     // lower_paper > d_gamma
    std::size_t viol_lower_repaired = 0;  // lower_repaired > d_gamma
    double min_margin_repaired = 0.0;     // min of d_gamma - lower_repaired
    double a_used = 0.0;
    double e_max_used = 0.0;
};

// Region under the graph of an even profile over the base interval
// (-1/2, 1/2), with the part where the channel width drops below w_min
// removed. For a pinched profile the truncation leaves two mirrored lobes,
// each closed off by a short vertical stub at |x| = tip_cut().
class CuspDomain {
  public:
    CuspDomain(CuspProfile profile, double w_min);

    const CuspProfile& profile() const { return profile_; }
    double w_min() const { return w_min_; }
    double tip_cut() const { return x_cut_; }  // 0 when nothing was removed
    bool truncated() const { return x_cut_ > 0.0; }
    double max_height() const { return profile_.max_height(); }

    // Strict interior test: boundary points are not contained.
    bool contains(Point2 p) const;

    // e(x) = g(x') - x_N; throws when p is not interior.
    double vertical_gap(Point2 p) const;

    // Distance to the boundary of the truncated domain, within 1e-6 of the
    // true value (exact for sampled profiles, whose boundary is polygonal).
    double boundary_distance(Point2 p) const;

    // Closed loops tracing the boundary counterclockwise, densely sampled and
    // refined toward the tip; at least 1e3 points in total.
    std::vector<std::vector<Point2>> boundary_polyline() const;

    // Draws interior points with gap e log-uniform in [1e-4 * e_max, e_max]
    // and abscissa log-uniform across the retained base, then scores the
    // upper bound d <= e and both lower bounds built from a_for_bounds.
    EdReport lemma_ed_check(std::size_t n_samples, double e_max, double a_for_bounds,
                            std::uint64_t seed = 20240502) const;

    std::uint64_t hash() const;

  private:
    double curve_distance(double ax, double ay) const;

    CuspProfile profile_;
    double w_min_ = 0.0;
    double x_cut_ = 0.0;
    // Boundary pieces of the right half (everything is even in x), used for
    // exact point-segment distances; the first n_straight_ are bottom, right
    // edge, and stub, the rest trace a sampled graph.
    std::vector<std::pair<Point2, Point2>> segments_;
    std::size_t n_straight_ = 0;
    // Prescan grid along the curved wall, canonical profiles only.
    std::vector<double> pre_s_, pre_g_;
};

}  // namespace cusplab
