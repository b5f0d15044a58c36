#include "cusplab/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "cusplab/quadrature.hpp"

namespace cusplab {
namespace {

constexpr double kNodesPerDecade = 2000.0;
constexpr double kLn10 = 2.302585092994045684;

// 4-point Gauss-Legendre on [0, 1].
constexpr std::array<double, 4> kGx = {
    0.069431844202973712388, 0.33000947820757186760,
    0.66999052179242813240, 0.93056815579702628761};
constexpr std::array<double, 4> kGw = {
    0.173927422568726928687, 0.326072577431273071313,
    0.326072577431273071313, 0.173927422568726928687};

void check_alpha(double alpha) {
    if (!(alpha >= 0.0)) throw Error("manifold: alpha must be nonnegative");
}

// d(log g)/du = -(2/u + alpha/(u log u)); g' = g * that.
double log_metric_slope(double alpha, double u) {
    return -(2.0 / u + alpha / (u * std::log(u)));
}

struct CellWeights {
    // Integrals of w(v) phi_a phi_b over one cell [vl, vl + dv] for the two
    // P1 hat restrictions phi_0 = 1 - t, phi_1 = t.
    double w00 = 0.0, w01 = 0.0, w11 = 0.0;
};

template <class W>
CellWeights cell_mass(double vl, double dv, W&& w) {
    CellWeights c;
    for (int q = 0; q < 4; ++q) {
        const double t = kGx[static_cast<std::size_t>(q)];
        const double wq = kGw[static_cast<std::size_t>(q)] * dv * w(vl + t * dv);
        c.w00 += wq * (1.0 - t) * (1.0 - t);
        c.w01 += wq * (1.0 - t) * t;
        c.w11 += wq * t * t;
    }
    return c;
}

void add_cell(SparseSymmetricForm* form, std::ptrdiff_t a, std::ptrdiff_t b,
              const CellWeights& c) {
    // a, b are free-node indices of the cell ends; -1 marks a constrained end.
    if (a >= 0) form->accumulate(static_cast<std::size_t>(a), static_cast<std::size_t>(a), c.w00);
    if (b >= 0) form->accumulate(static_cast<std::size_t>(b), static_cast<std::size_t>(b), c.w11);
    if (a >= 0 && b >= 0)
        form->accumulate(static_cast<std::size_t>(a), static_cast<std::size_t>(b), c.w01);
}

void validate(const ManifoldModel& m) {
    check_alpha(m.alpha);
    if (!(m.u_min > 1.0)) throw Error("manifold: u_min must exceed 1");
    if (!(m.U_max > m.u_min)) throw Error("manifold: U_max must exceed u_min");
    if (m.n_grid != 0 && m.n_grid < 10) throw Error("manifold: n_grid below 10");
    if (m.n_mode < 0) throw Error("manifold: n_mode must be nonnegative");
}

// Integral of an exponentially concentrated integrand over [a, b] with its
// mass within `width` of a. A single adaptive call on the full interval can
// sample only the flat tail and accept zero, so the boundary layer gets its
// own call.
double integrate_left_layer(const std::function<double(double)>& f, double a, double b,
                            double width) {
    if (b - a <= width) return integrate(f, a, b).value;
    return integrate(f, a, a + width).value + integrate(f, a + width, b).value;
}

// log of int_{u_min}^U f^2 g du for f = e^{nu}, accumulated as
// 2 n U + log int_0^{U-u_min} e^{-2nt} g(U - t) dt so the exponential never
// leaves the representable range.
double log_growth_norm2(double alpha, int n, double u_min, double U) {
    const auto integrand = [&](double t) {
        return std::exp(-2.0 * n * t) * metric_eval(alpha, U - t);
    };
    const double r = integrate_left_layer(integrand, 0.0, U - u_min, 20.0 / n);
    return 2.0 * n * U + std::log(r);
}

}  // namespace

std::size_t default_n_grid(double u_min, double U_max) {
    const double decades = (std::log(U_max) - std::log(u_min)) / kLn10;
    const auto n = static_cast<std::size_t>(std::llround(kNodesPerDecade * decades)) + 1;
    return std::max<std::size_t>(n, 16);
}

double metric_eval(double alpha, double u) {
    check_alpha(alpha);
    if (!(u > 1.0)) throw Error("metric_eval: u must exceed 1");
    return std::pow(u, -2.0) * std::pow(std::log(u), -alpha);
}

double cusp_distance(double alpha, double u0) {
    if (!(alpha > 2.0))
        throw Error("cusp_distance: infinite for alpha <= 2, the cusp end is unbounded");
    if (!(u0 > 1.0)) throw Error("cusp_distance: u0 must exceed 1");
    return 2.0 / (alpha - 2.0) * std::pow(std::log(u0), 1.0 - alpha / 2.0);
}

BallVolume ball_volume(double alpha, double eps, double u_min) {
    if (!(alpha > 2.0)) throw Error("ball_volume: needs alpha > 2");
    const double reach = cusp_distance(alpha, u_min);
    if (!(eps > 0.0) || eps >= reach)
        throw Error("ball_volume: eps must lie in (0, " + std::to_string(reach) +
                    "), the distance from u_min to the tip");
    const double kappa = (alpha - 2.0) / 2.0;
    BallVolume b;
    b.eps = eps;
    b.log_eta = std::pow(kappa * eps, -1.0 / kappa);
    // The integral is of order e^-log_eta, far below any fixed absolute
    // tolerance; run the tail rule in pure relative mode.
    QuadOptions qopts;
    qopts.abs_tol = 0.0;
    const QuadResult q = integrate_half_inf(
        [alpha](double v) { return std::exp(-v) * std::pow(v, -alpha); }, b.log_eta, qopts);
    const double two_pi = 2.0 * std::numbers::pi;
    b.quad_value = two_pi * q.value;
    b.quad_error = two_pi * q.error;
    b.asymptotic_tail = two_pi * std::pow(b.log_eta, -alpha) * std::exp(-b.log_eta);
    b.asymptotic_compact = b.log_eta * std::exp(-b.log_eta);
    b.ratio_tail = b.quad_value / b.asymptotic_tail;
    b.ratio_compact = b.quad_value / b.asymptotic_compact;
    return b;
}

Point3 embed_r3(double alpha, double u, double theta, double u_min) {
    check_alpha(alpha);
    if (!(u_min > 1.0)) throw Error("embed_r3: u_min must exceed 1");
    if (!(u >= u_min)) throw Error("embed_r3: u below u_min");
    // |g'|/g decreases in u, so the profile condition |g'| < 2g needs
    // checking at u_min only.
    if (-log_metric_slope(alpha, u_min) >= 2.0)
        throw Error("embed_r3: profile too steep, |g'| >= 2g at u = " + std::to_string(u_min));
    const auto zslope = [&](double t) {
        const double g = metric_eval(alpha, t);
        const double gp = g * log_metric_slope(alpha, t);
        return std::sqrt(g - gp * gp / (4.0 * g));
    };
    const double r = std::sqrt(metric_eval(alpha, u));
    Point3 p;
    p.x = r * std::cos(theta);
    p.y = r * std::sin(theta);
    p.z = integrate(zslope, u_min, u).value;
    return p;
}

RadialPencil radial_discretize(const ManifoldModel& m) {
    validate(m);
    const std::size_t n_nodes = m.n_grid ? m.n_grid : default_n_grid(m.u_min, m.U_max);
    const double v0 = std::log(m.u_min);
    const double V = std::log(m.U_max);
    const double dv = (V - v0) / static_cast<double>(n_nodes - 1);

    const std::size_t first_free = m.bc == RadialBc::dirichlet ? 1 : 0;
    const std::size_t n_free = n_nodes - 1 - first_free;  // U_max node removed
    if (n_free < 2) throw Error("manifold: grid leaves fewer than 2 free nodes");

    RadialPencil p;
    p.dv = dv;
    p.v_free.resize(n_free);
    for (std::size_t i = 0; i < n_free; ++i)
        p.v_free[i] = v0 + static_cast<double>(i + first_free) * dv;

    p.stiffness = SparseSymmetricForm(n_free);
    p.metric_mass = SparseSymmetricForm(n_free);
    p.hardy_mass = SparseSymmetricForm(n_free);
    p.stiffness.reserve(2 * n_free);
    p.metric_mass.reserve(2 * n_free);
    p.hardy_mass.reserve(2 * n_free);

    const double alpha = m.alpha;
    const double nsq = static_cast<double>(m.n_mode) * static_cast<double>(m.n_mode);
    for (std::size_t cell = 0; cell + 1 < n_nodes; ++cell) {
        const double vl = v0 + static_cast<double>(cell) * dv;
        const auto a = static_cast<std::ptrdiff_t>(cell) - static_cast<std::ptrdiff_t>(first_free);
        const std::ptrdiff_t b =
            cell + 1 == n_nodes - 1 ? -1 : a + 1;  // truncation end stays constrained

        // int e^-v phi_a' phi_b' dv = -expm1(-dv) e^-vl / dv^2 with sign from
        // the hat slopes.
        const double ks = -std::expm1(-dv) * std::exp(-vl) / (dv * dv);
        CellWeights stiff{ks, -ks, ks};
        if (m.n_mode != 0) {
            const CellWeights ang =
                cell_mass(vl, dv, [](double v) { return std::exp(v); });
            stiff.w00 += nsq * ang.w00;
            stiff.w01 += nsq * ang.w01;
            stiff.w11 += nsq * ang.w11;
        }
        add_cell(&p.stiffness, a, b, stiff);
        add_cell(&p.metric_mass, a, b, cell_mass(vl, dv, [alpha](double v) {
                     return std::exp(-v) * std::pow(v, -alpha);
                 }));
        add_cell(&p.hardy_mass, a, b,
                 cell_mass(vl, dv, [](double v) { return std::exp(-v); }));
    }
    p.stiffness.compress();
    p.metric_mass.compress();
    p.hardy_mass.compress();

    std::uint64_t h = fnv1a_f64(m.alpha, 0xcbf29ce484222325ull);
    h = fnv1a_u64(static_cast<std::uint64_t>(m.n_mode), h);
    h = fnv1a_u64(m.bc == RadialBc::dirichlet ? 1 : 2, h);
    h = fnv1a_f64(v0, h);
    h = fnv1a_f64(V, h);
    h = fnv1a_u64(n_nodes, h);
    p.grid_hash = h;
    return p;
}

EndpointClassification endpoint_classify(const ManifoldModel& m) {
    validate(m);
    EndpointClassification out;
    out.truncations = {1e3, 1e4, 1e5, 1e6};
    const double alpha = m.alpha;
    const double u_min = m.u_min;
    const int n = m.n_mode;
    out.candidates[0].name = n == 0 ? "1" : "exp(-n u)";
    out.candidates[1].name = n == 0 ? "u" : "exp(n u)";

    for (const double U : out.truncations) {
        double l0, l1;
        if (n == 0) {
            l0 = std::log(
                integrate([&](double u) { return metric_eval(alpha, u); }, u_min, U).value);
            l1 = std::log(
                integrate([&](double u) { return u * u * metric_eval(alpha, u); }, u_min, U)
                    .value);
        } else {
            l0 = std::log(integrate_left_layer(
                     [&](double u) {
                         return std::exp(-2.0 * n * (u - u_min)) * metric_eval(alpha, u);
                     },
                     u_min, U, 20.0 / n)) -
                 2.0 * n * u_min;
            l1 = log_growth_norm2(alpha, n, u_min, U);
        }
        out.candidates[0].log_norm2.push_back(l0);
        out.candidates[1].log_norm2.push_back(l1);
    }
    for (auto& c : out.candidates) {
        const std::size_t k = c.log_norm2.size();
        const double dlog = c.log_norm2[k - 1] - c.log_norm2[k - 2];
        c.last_rel_change = std::expm1(std::min(dlog, 700.0));
        c.square_integrable = c.last_rel_change < 0.01;
    }
    out.limit_point =
        out.candidates[0].square_integrable != out.candidates[1].square_integrable;
    return out;
}

double hardy_manifold_constant(const ManifoldModel& m) {
    const RadialPencil p = radial_discretize(m);
    SolverOptions opts;
    opts.grid_hash = p.grid_hash;
    return rayleigh_min(p.stiffness, p.hardy_mass, opts);
}

double hardy_test_vector_quotient(double U, double u_min) {
    if (!(u_min > 1.0) || !(U > u_min)) throw Error("hardy quotient: need U > u_min > 1");
    const double c = 2.0 * std::pow(u_min, 0.25);
    const auto dphi = [c](double u) {
        return 0.5 / std::sqrt(u) - 0.25 * c * std::pow(u, -0.75);
    };
    const auto phi = [c](double u) { return std::sqrt(u) - c * std::pow(u, 0.25); };
    const double num = integrate([&](double u) { const double d = dphi(u); return d * d; },
                                 u_min, U)
                           .value;
    const double den =
        integrate([&](double u) { const double f = phi(u); return f * f / (u * u); }, u_min, U)
            .value;
    return num / den;
}

RadialEigenSolution supnorm_trace(double alpha, std::size_t branch,
                                  const std::vector<double>& truncations,
                                  std::size_t n_grid) {
    if (!(alpha >= 1.0 && alpha <= 2.0))
        throw Error("supnorm_trace: alpha must lie in [1, 2]");
    if (branch < 1 || branch > 5) throw Error("supnorm_trace: branch must lie in [1, 5]");
    if (truncations.size() < 2) throw Error("supnorm_trace: need at least two truncations");
    for (std::size_t i = 0; i + 1 < truncations.size(); ++i)
        if (!(truncations[i] < truncations[i + 1]))
            throw Error("supnorm_trace: truncations must be ascending");

    RadialEigenSolution out;
    out.alpha = alpha;
    out.branch = branch;
    const std::size_t k = 6;

    // Followed branch on the previous grid, for the overlap match.
    std::vector<double> prev_vec;
    double prev_v0 = 0.0, prev_dv = 0.0, prev_vlast = 0.0;
    std::size_t col = branch;

    for (const double U : truncations) {
        ManifoldModel m;
        m.alpha = alpha;
        m.U_max = U;
        m.n_grid = n_grid;
        const RadialPencil p = radial_discretize(m);
        SolverOptions opts;
        opts.grid_hash = p.grid_hash;
        EigenPairSet pairs = solve_lowest(p.stiffness, p.metric_mass, k, opts);

        TruncationSample sample;
        sample.U_max = U;
        sample.values = pairs.values;
        sample.sup_norms = pairs.sup_norms;

        if (prev_vec.empty()) {
            sample.tracked_column = col;
        } else {
            // Normalized overlap against every column in the metric inner
            // product over the previous radial window, previous vector
            // interpolated onto the current grid.
            double best = -1.0, second = -1.0;
            std::size_t best_col = col;
            std::vector<double> weights, prev_here;
            for (std::size_t i = 0;
                 i < p.v_free.size() && p.v_free[i] <= prev_vlast + 1e-12; ++i) {
                const double v = p.v_free[i];
                const double s = (v - prev_v0) / prev_dv;
                const auto cell = static_cast<std::size_t>(std::clamp(
                    s, 0.0, static_cast<double>(prev_vec.size()) - 2.0));
                const double t = s - static_cast<double>(cell);
                prev_here.push_back(prev_vec[cell] * (1.0 - t) +
                                    prev_vec[cell + 1] * std::clamp(t, 0.0, 1.0));
                weights.push_back(std::exp(-v) * std::pow(v, -alpha) * p.dv);
            }
            double np = 0.0;
            for (std::size_t i = 0; i < weights.size(); ++i)
                np += weights[i] * prev_here[i] * prev_here[i];
            for (std::size_t l = 0; l < pairs.values.size(); ++l) {
                double dot = 0.0, nl = 0.0;
                for (std::size_t i = 0; i < weights.size(); ++i) {
                    const double f = pairs.vectors[l][i];
                    dot += weights[i] * prev_here[i] * f;
                    nl += weights[i] * f * f;
                }
                const double ov = std::abs(dot) / std::sqrt(std::max(np * nl, 1e-300));
                if (ov > best) {
                    second = best;
                    best = ov;
                    best_col = l;
                } else if (ov > second) {
                    second = ov;
                }
            }
            sample.tracked_column = best_col;
            sample.overlap = best;
            if (best < 0.7 || best - second < 0.1) out.tracking_ok = false;
            col = best_col;
        }

        out.lambda_trace.push_back(pairs.values[col]);
        out.sup_norm_trace.push_back(pairs.sup_norms[col]);
        prev_vec = pairs.vectors[col];
        prev_v0 = p.v_free.front();
        prev_dv = p.dv;
        prev_vlast = p.v_free.back();
        out.samples.push_back(std::move(sample));
        out.last = std::move(pairs);
    }

    // Least-squares slope of log sup against log log U; at alpha = 1 the
    // asymptotic sup ~ (log U)^lambda makes this an estimate of lambda.
    const std::size_t nt = truncations.size();
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < nt; ++i) {
        const double x = std::log(std::log(truncations[i]));
        const double y = std::log(out.sup_norm_trace[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = static_cast<double>(nt) * sxx - sx * sx;
    out.fitted_exponent = (static_cast<double>(nt) * sxy - sx * sy) / denom;
    const double lam_last = out.lambda_trace.back();
    out.exponent_rel_dev = std::abs(out.fitted_exponent - lam_last) / lam_last;
    out.sup_last_rel_change =
        std::abs(out.sup_norm_trace[nt - 1] - out.sup_norm_trace[nt - 2]) /
        out.sup_norm_trace[nt - 1];
    return out;
}

}  // namespace cusplab
