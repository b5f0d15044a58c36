#include "cusplab/cusp_domain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace cusplab {

namespace {

double seg_dist2(double ax, double ay, Point2 p, Point2 q) {
    const double vx = q.x - p.x, vy = q.y - p.y;
    const double wx = ax - p.x, wy = ay - p.y;
    const double vv = vx * vx + vy * vy;
    double t = vv > 0.0 ? (wx * vx + wy * vy) / vv : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = wx - t * vx, dy = wy - t * vy;
    return dx * dx + dy * dy;
}

void append_seg(std::vector<Point2>& loop, Point2 p, Point2 q, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(n);
        loop.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
    }
}

}  // namespace

CuspDomain::CuspDomain(CuspProfile profile, double w_min)
    : profile_(std::move(profile)), w_min_(w_min) {
    if (!(w_min > 0.0)) throw Error("domain: w_min must be positive");
    if (!(w_min < profile_.max_height())) throw Error("domain: w_min at or above the profile maximum leaves nothing");

    if (profile_.is_canonical()) {
        x_cut_ = profile_.inverse(w_min_);
        if (!(x_cut_ > 1e-290))
            throw Error("domain: tip cutoff underflows for this profile; raise w_min");
    } else {
        const auto& xs = profile_.sample_x();
        const auto& ys = profile_.sample_y();
        if (ys.front() >= w_min_) {
            x_cut_ = 0.0;
            for (double y : ys)
                if (y < w_min_) throw Error("domain: profile dips below w_min away from the tip");
        } else {
            std::size_t k = 0;
            while (k < ys.size() && ys[k] < w_min_) ++k;
            if (k == ys.size()) throw Error("domain: w_min at or above the profile maximum leaves nothing");
            for (std::size_t j = k; j < ys.size(); ++j)
                if (ys[j] < w_min_) throw Error("domain: profile dips below w_min away from the tip");
            if (xs[k] == xs[k - 1]) {
                x_cut_ = xs[k];
            } else {
                const double t = (w_min_ - ys[k - 1]) / (ys[k] - ys[k - 1]);
                x_cut_ = xs[k - 1] + t * (xs[k] - xs[k - 1]);
            }
        }
    }

    // Straight pieces of the right half. The curved wall of a canonical
    // profile is handled by curve_distance; a sampled graph is itself
    // polygonal and goes in as segments after the straight ones.
    const double top = profile_.eval(0.5);
    segments_.push_back({{x_cut_, 0.0}, {0.5, 0.0}});
    segments_.push_back({{0.5, 0.0}, {0.5, top}});
    if (truncated()) segments_.push_back({{x_cut_, 0.0}, {x_cut_, w_min_}});
    n_straight_ = segments_.size();

    if (profile_.is_canonical()) {
        const double sig_lo = std::log(x_cut_);
        const double sig_hi = std::log(0.05);
        const std::size_t n_log = 3000, n_uni = 1500;
        pre_s_.reserve(n_log + n_uni + 1);
        for (std::size_t i = 0; i < n_log; ++i)
            pre_s_.push_back(std::exp(sig_lo + (sig_hi - sig_lo) * static_cast<double>(i) / n_log));
        for (std::size_t i = 0; i <= n_uni; ++i)
            pre_s_.push_back(0.05 + 0.45 * static_cast<double>(i) / n_uni);
        pre_g_.reserve(pre_s_.size());
        for (double s : pre_s_) pre_g_.push_back(profile_.eval(s));
    } else {
        const auto& xs = profile_.sample_x();
        const auto& ys = profile_.sample_y();
        bool have_prev = truncated();
        Point2 prev{x_cut_, w_min_};
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (xs[i] < x_cut_) continue;
            if (truncated() && ys[i] < w_min_) continue;
            const Point2 cur{xs[i], ys[i]};
            if (have_prev && (cur.x != prev.x || cur.y != prev.y)) segments_.push_back({prev, cur});
            prev = cur;
            have_prev = true;
        }
    }
}

bool CuspDomain::contains(Point2 p) const {
    const double ax = std::abs(p.x);
    if (!(ax < 0.5) || !(p.y > 0.0)) return false;
    if (truncated() && ax <= x_cut_) return false;
    return p.y < profile_.eval(ax);
}

double CuspDomain::vertical_gap(Point2 p) const {
    if (!contains(p)) throw Error("domain: point is not interior");
    return profile_.eval(std::abs(p.x)) - p.y;
}

double CuspDomain::curve_distance(double ax, double ay) const {
    const std::size_t n = pre_s_.size();
    std::vector<double> f(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = pre_s_[i] - ax, dy = pre_g_[i] - ay;
        f[i] = dx * dx + dy * dy;
    }
    auto value = [&](double sigma) {
        const double s = std::exp(sigma);
        const double dx = s - ax, dy = profile_.eval(std::min(s, 0.5)) - ay;
        return dx * dx + dy * dy;
    };
    double best = std::numeric_limits<double>::infinity();
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const bool lo_ok = i == 0 || f[i] <= f[i - 1];
        const bool hi_ok = i + 1 == n || f[i] <= f[i + 1];
        if (!(lo_ok && hi_ok)) continue;
        // Golden-section refinement of this local minimum, in log-abscissa so
        // the tip region keeps relative resolution.
        double a = std::log(pre_s_[i == 0 ? 0 : i - 1]);
        double b = std::log(pre_s_[i + 1 == n ? n - 1 : i + 1]);
        double c = b - gr * (b - a), d = a + gr * (b - a);
        double fc = value(c), fd = value(d);
        for (int it = 0; it < 90 && b - a > 1e-14; ++it) {
            if (fc < fd) {
                b = d; d = c; fd = fc;
                c = b - gr * (b - a);
                fc = value(c);
            } else {
                a = c; c = d; fc = fd;
                d = a + gr * (b - a);
                fd = value(d);
            }
        }
        best = std::min({best, f[i], fc, fd});
    }
    return best;
}

double CuspDomain::boundary_distance(Point2 p) const {
    if (!contains(p)) throw Error("domain: point is not interior");
    const double ax = std::abs(p.x), ay = p.y;
    // The wall point straight above is on the boundary, so the vertical gap
    // caps the distance; the final clamp keeps d <= e exact in floating point.
    const double e = profile_.eval(ax) - ay;
    double best = e * e;
    for (const auto& s : segments_) best = std::min(best, seg_dist2(ax, ay, s.first, s.second));
    if (profile_.is_canonical()) best = std::min(best, curve_distance(ax, ay));
    return std::min(std::sqrt(best), e);
}

std::vector<std::vector<Point2>> CuspDomain::boundary_polyline() const {
    const double top = profile_.eval(0.5);
    std::vector<std::vector<Point2>> loops;
    std::vector<Point2> right;

    append_seg(right, {x_cut_, 0.0}, {0.5, 0.0}, 48);
    append_seg(right, {0.5, 0.0}, {0.5, top}, 48);
    if (profile_.is_canonical()) {
        const std::size_t n_uni = 400, n_log = 800;
        for (std::size_t i = 0; i < n_uni; ++i) {
            const double s = 0.5 - 0.45 * static_cast<double>(i) / n_uni;
            right.push_back({s, profile_.eval(s)});
        }
        const double sig_hi = std::log(0.05), sig_lo = std::log(x_cut_);
        for (std::size_t i = 0; i < n_log; ++i) {
            const double s = std::exp(sig_hi + (sig_lo - sig_hi) * static_cast<double>(i) / n_log);
            right.push_back({s, profile_.eval(s)});
        }
    } else {
        // Walk the graph right to left, subdividing so the loop stays dense;
        // graph segments sit after the straight pieces in the segment list.
        const std::size_t n_graph = segments_.size() - n_straight_;
        const std::size_t per = std::max<std::size_t>(24, (600 + n_graph - 1) / n_graph);
        for (std::size_t k = segments_.size(); k > n_straight_; --k) {
            const auto& s = segments_[k - 1];
            append_seg(right, s.second, s.first, per);
        }
    }
    if (truncated()) append_seg(right, {x_cut_, w_min_}, {x_cut_, 0.0}, 8);

    if (truncated()) {
        std::vector<Point2> left(right.size());
        // Mirroring flips orientation, so reverse to stay counterclockwise.
        for (std::size_t i = 0; i < right.size(); ++i) {
            left[i] = {-right[right.size() - 1 - i].x, right[right.size() - 1 - i].y};
        }
        loops.push_back(std::move(right));
        loops.push_back(std::move(left));
    } else {
        // One loop: bottom across the full base, up the right edge, back along
        // the graph (right half then mirrored left half), down the left edge.
        std::vector<Point2> loop;
        append_seg(loop, {-0.5, 0.0}, {0.5, 0.0}, 300);
        append_seg(loop, {0.5, 0.0}, {0.5, top}, 150);
        std::vector<Point2> graph;
        const std::size_t n_graph = segments_.size() - n_straight_;
        const std::size_t per = std::max<std::size_t>(24, (600 + n_graph - 1) / n_graph);
        for (std::size_t k = segments_.size(); k > n_straight_; --k) {
            const auto& s = segments_[k - 1];
            append_seg(graph, s.second, s.first, per);
        }
        graph.push_back({0.0, profile_.eval(0.0)});
        for (const Point2& q : graph) loop.push_back(q);
        for (auto it = graph.rbegin(); it != graph.rend(); ++it)
            if (it->x != 0.0) loop.push_back({-it->x, it->y});
        append_seg(loop, {-0.5, top}, {-0.5, 0.0}, 150);
        loops.push_back(std::move(loop));
    }
    return loops;
}

EdReport CuspDomain::lemma_ed_check(std::size_t n_samples, double e_max, double a_for_bounds,
                                    std::uint64_t seed) const {
    if (!(e_max > 0.0)) throw Error("domain: e_max must be positive");
    if (!(a_for_bounds >= 0.0)) throw Error("domain: modulus constant must be nonnegative");
    const double alpha = profile_.is_canonical() ? profile_.exponent() : 2.0;

    EdReport rep;
    rep.n_requested = n_samples;
    rep.a_used = a_for_bounds;
    rep.e_max_used = e_max;
    rep.min_margin_repaired = std::numeric_limits<double>::infinity();
    rep.samples.reserve(n_samples);

    std::mt19937_64 rng(seed);
    const double x_lo = std::max(x_cut_ * (1.0 + 1e-9), 1e-6);
    std::uniform_real_distribution<double> ux(std::log(x_lo), std::log(0.4999));
    const double e_lo = 1e-4 * e_max;

    for (std::size_t k = 0; k < n_samples; ++k) {
        const double x = std::exp(ux(rng));
        const double g = profile_.eval(x);
        const double e_hi = std::min(e_max, 0.99 * g);
        if (!(e_hi > e_lo)) continue;
        std::uniform_real_distribution<double> ue(std::log(e_lo), std::log(e_hi));
        const double e = std::exp(ue(rng));
        const Point2 p{x, g - e};
        if (!contains(p)) continue;

        DistanceSample s;
        s.point = p;
        // Recomputed from the stored ordinate so the gap agrees bitwise with
        // what boundary_distance clamps against.
        s.e_val = profile_.eval(x) - p.y;
        s.d_gamma = boundary_distance(p);
        s.lower_paper = std::exp(-std::pow(s.e_val, -1.0 / alpha) / (1.0 + a_for_bounds));
        s.lower_repaired = std::exp(-std::pow((1.0 + a_for_bounds) / s.e_val, 1.0 / alpha));
        if (s.d_gamma > s.e_val) rep.viol_upper += 1;
        if (s.lower_paper > s.d_gamma) rep.viol_lower_paper += 1;
        if (s.lower_repaired > s.d_gamma) rep.viol_lower_repaired += 1;
        rep.min_margin_repaired = std::min(rep.min_margin_repaired, s.d_gamma - s.lower_repaired);
        rep.n_retained += 1;
        rep.samples.push_back(s);
    }
    return rep;
}

std::uint64_t CuspDomain::hash() const {
    std::uint64_t h = profile_.hash();
    h = fnv1a_f64(w_min_, h);
    h = fnv1a_f64(x_cut_, h);
    return h;
}

}  // namespace cusplab
