#include "cusplab/bounds.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

namespace cusplab {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using SpMat = Eigen::SparseMatrix<double>;

SpMat to_eigen_sum(const SparseSymmetricForm& M, const SparseSymmetricForm& K, double t) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(2 * (M.nonzeros() + K.nonzeros()));
    auto push = [&trip](const SparseSymmetricForm& F, double s) {
        for (const auto& e : F.entries()) {
            trip.emplace_back(e.row, e.col, s * e.value);
            if (e.row != e.col) trip.emplace_back(e.col, e.row, s * e.value);
        }
    };
    push(M, 1.0);
    push(K, t);
    SpMat out(static_cast<Eigen::Index>(M.dimension()), static_cast<Eigen::Index>(M.dimension()));
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

struct LineFit {
    double a = 0.0;  // intercept
    double b = 0.0;  // slope
    double sse = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LineFit out;
    out.b = sxx > 0.0 ? sxy / sxx : 0.0;
    out.a = my - out.b * mx;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - out.a - out.b * x[i];
        out.sse += r * r;
    }
    return out;
}

// Misfit of predictions yhat against y, relative to the data scale.
double data_scale_residual(const std::vector<double>& y, const std::vector<double>& yhat) {
    double scale = 0.0, mis = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        scale = std::max(scale, std::abs(y[i]));
        mis = std::max(mis, std::abs(y[i] - yhat[i]));
    }
    return mis / std::max(scale, 1e-300);
}

// Minimizes f on [lo, hi] by golden-section search; f must be unimodal on
// the bracket, which the preceding coarse grid guarantees well enough.
double golden_min(const std::function<double(double)>& f, double lo, double hi) {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 90 && (b - a) > 1e-13 * (1.0 + std::abs(a)); ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

// Coarse grid plus golden polish of a 1-d profile objective.
double profile_min(const std::function<double(double)>& f, double lo, double hi, int n_grid) {
    double best = lo, best_val = kInf;
    for (int i = 0; i <= n_grid; ++i) {
        const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_grid);
        const double v = f(x);
        if (v < best_val) {
            best_val = v;
            best = x;
        }
    }
    const double cell = (hi - lo) / static_cast<double>(n_grid);
    return golden_min(f, std::max(lo, best - cell), std::min(hi, best + cell));
}

struct GrowthWindow {
    std::vector<double> log_rank;  // log of the 1-based rank
    std::vector<double> log_lam;
    std::size_t first_rank = 0;
};

GrowthWindow growth_window(const EigenPairSet& pairs) {
    GrowthWindow w;
    for (std::size_t i = 0; i < pairs.values.size(); ++i) {
        const std::size_t rank = i + 1;
        if (rank < 3 || !(pairs.values[i] >= 1.0)) continue;
        if (w.log_rank.empty()) w.first_rank = rank;
        w.log_rank.push_back(std::log(static_cast<double>(rank)));
        w.log_lam.push_back(std::log(pairs.values[i]));
    }
    if (w.log_rank.size() < 20)
        throw Error("bounds: growth fit needs at least 20 eigenvalues with lambda >= 1 beyond rank 2");
    return w;
}

// log lambda = log c6 + alpha log log(c7 r) is linear once log c7 is fixed.
LineFit growth_line_at(const GrowthWindow& w, double log_c7, std::vector<double>* xs = nullptr) {
    std::vector<double> x(w.log_rank.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::log(log_c7 + w.log_rank[i]);
    LineFit f = fit_line(x, w.log_lam);
    if (xs) *xs = std::move(x);
    return f;
}

// Same model with the exponent pinned; only log c6 is free.
double pinned_growth_sse(const GrowthWindow& w, double alpha, double log_c7) {
    double mean = 0.0;
    std::vector<double> r(w.log_rank.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        r[i] = w.log_lam[i] - alpha * std::log(log_c7 + w.log_rank[i]);
        mean += r[i];
    }
    mean /= static_cast<double>(r.size());
    double sse = 0.0;
    for (double v : r) sse += (v - mean) * (v - mean);
    return sse;
}

// Profiled inner constant with the exponent pinned at alpha, plus the
// window-minimum c6 so the certified law has zero violations there.
void growth_envelope(const GrowthWindow& w, double alpha, double* c6, double* c7) {
    const double lo = std::log(1.0 + 1e-6) - w.log_rank.front();
    const double hi = 30.0;
    const double log_c7 = profile_min(
        [&](double L) { return pinned_growth_sse(w, alpha, L); }, lo, hi, 256);
    double ratio_min = kInf;
    for (std::size_t i = 0; i < w.log_rank.size(); ++i) {
        const double lc = log_c7 + w.log_rank[i];
        ratio_min = std::min(ratio_min, std::exp(w.log_lam[i] - alpha * std::log(lc)));
    }
    *c6 = ratio_min;
    *c7 = std::exp(log_c7);
}

struct SupWindow {
    std::vector<double> lam;      // clamped at zero
    std::vector<double> log_sup;
};

SupWindow sup_window(const EigenPairSet& pairs) {
    if (pairs.sup_norms.size() != pairs.values.size())
        throw Error("bounds: sup-norm fit needs a sup norm for every pair");
    SupWindow w;
    for (std::size_t i = 0; i < pairs.values.size(); ++i) {
        const double s = pairs.sup_norms[i];
        if (!(s > 0.0) || !std::isfinite(s))
            throw Error("bounds: sup-norm fit needs positive finite sup norms");
        w.lam.push_back(std::max(pairs.values[i], 0.0));
        w.log_sup.push_back(std::log(s));
    }
    if (w.lam.size() < 8) throw Error("bounds: sup-norm fit needs at least 8 pairs");
    return w;
}

LineFit sup_line_at(const SupWindow& w, double p, std::vector<double>* xs = nullptr) {
    std::vector<double> x(w.lam.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::pow(w.lam[i], p);
    LineFit f = fit_line(x, w.log_sup);
    if (xs) *xs = std::move(x);
    return f;
}

// Envelope at the asserted exponent 1/alpha: slope clamped at zero, then the
// prefactor lifted until every point sits under the bound.
void sup_envelope(const SupWindow& w, double alpha, double* c8, double* c9) {
    LineFit pinned = sup_line_at(w, 1.0 / alpha);
    *c9 = std::max(pinned.b, 0.0);
    double a = -kInf;
    for (std::size_t i = 0; i < w.lam.size(); ++i)
        a = std::max(a, w.log_sup[i] - *c9 * std::pow(w.lam[i], 1.0 / alpha));
    *c8 = std::exp(a);
}

// Tail of sum_{r > k} exp(-beta (log(c7 r))^alpha) with a closed-form cap on
// the unsummed stretch: in v = log(c7 x) the integrand is exp(v - beta v^alpha)
// whose exponent is concave, so once it decays at v_M the integral beyond is
// at most exp(psi(v_M)) / (c7 |psi'(v_M)|).  Returns +inf when the series
// cannot be certified within the iteration cap.
double log_law_tail(double beta, double c7, double alpha, std::size_t k_from,
                    std::size_t* terms_used = nullptr) {
    if (!(beta > 0.0) || !(c7 > 0.0)) return kInf;
    constexpr std::size_t kCap = 2'000'000;
    // The decay rate only improves with r; if the summand still grows at the
    // iteration cap there is nothing to certify, so skip the walk entirely.
    {
        const double v_cap = std::log(c7 * static_cast<double>(k_from + kCap));
        if (v_cap <= 0.0 || 1.0 - beta * alpha * std::pow(v_cap, alpha - 1.0) >= 0.0) return kInf;
    }
    double acc = 0.0;
    std::size_t r = k_from;
    std::size_t used = 0;
    while (true) {
        const double v = std::log(c7 * static_cast<double>(r));
        if (v <= 0.0) return kInf;  // law vacuous at this rank
        const double slope = 1.0 - beta * alpha * std::pow(v, alpha - 1.0);
        if (slope < 0.0) {
            const double psi = v - beta * std::pow(v, alpha);
            if (psi > 700.0) return kInf;
            const double remainder = std::exp(psi) * (1.0 + 1.0 / (c7 * (-slope)));
            if (remainder <= 1e-3 * acc || used >= kCap) {
                if (terms_used) *terms_used = used;
                return acc + remainder;
            }
        } else if (used >= kCap) {
            return kInf;  // still growing at the cap; nothing to certify
        }
        acc += std::exp(-beta * std::pow(v, alpha));
        ++r;
        ++used;
    }
}

double estbasic_c10(double c9, double alpha) {
    return std::pow(2.0, (alpha + 1.0) / (alpha - 1.0)) * std::pow(c9, alpha / (alpha - 1.0));
}

// log of the tail prefactor c8^2 exp(c10 t^(-1/(alpha-1))) and the summed
// series bound; +inf when uncertifiable.
double tail_bound_log(const TailModel& tail, double t, std::size_t k_have) {
    if (!(tail.alpha > 1.0)) throw Error("bounds: tail model needs alpha > 1");
    if (!(tail.c6 > 0.0) || !(tail.c7 > 0.0))
        throw Error("bounds: tail model lacks a positive growth law");
    const double series = log_law_tail(0.5 * tail.c6 * t, tail.c7, tail.alpha, k_have + 1);
    if (!std::isfinite(series) || series <= 0.0) return series <= 0.0 ? -kInf : kInf;
    const double c10 = estbasic_c10(tail.c9, tail.alpha);
    return 2.0 * std::log(tail.c8) + c10 * std::pow(t, -1.0 / (tail.alpha - 1.0)) +
           std::log(series);
}

struct DeficitTerms {
    double s = 0.0;  // entropy of the normalized trial
    double q = 0.0;  // Dirichlet form, clamped at zero
    double w = 0.0;  // log-distance mass, clamped at zero
};

void require_forms(const DeficitForms& forms, bool need_weight, const char* who) {
    if (!forms.mesh || !forms.stiffness || !forms.mass)
        throw Error(std::string(who) + ": forms need mesh, stiffness and mass");
    const std::size_t n = forms.mesh->nodes.size();
    if (forms.stiffness->dimension() != n || forms.mass->dimension() != n)
        throw Error(std::string(who) + ": form dimensions do not match the mesh");
    if (need_weight && (!forms.log_weight || forms.log_weight->dimension() != n))
        throw Error(std::string(who) + ": the weighted term needs the log-distance mass form");
}

// p^2 log p above 1, zero below; continuous with a kink at p = 1.
inline double entropy_density(double p) { return p > 1.0 ? p * p * std::log(p) : 0.0; }

// Degree 5 rule on a triangle with linear vertex data.
double entropy_rule(double v0, double v1, double v2, double area) {
    constexpr double a1 = 0.05971587178976982;   // (6 - sqrt 15)/21
    constexpr double a2 = 0.47014206410511509;   // (6 + sqrt 15)/21
    constexpr double w0 = 9.0 / 40.0;
    constexpr double w1 = 0.12593918054482715;   // (155 - sqrt 15)/1200
    constexpr double w2 = 0.13239415278850618;   // (155 + sqrt 15)/1200
    const double c = (v0 + v1 + v2) / 3.0;
    double acc = w0 * entropy_density(c);
    const double b1 = 1.0 - 2.0 * a1, b2 = 1.0 - 2.0 * a2;
    acc += w1 * (entropy_density(b1 * v0 + a1 * v1 + a1 * v2) +
                 entropy_density(a1 * v0 + b1 * v1 + a1 * v2) +
                 entropy_density(a1 * v0 + a1 * v1 + b1 * v2));
    acc += w2 * (entropy_density(b2 * v0 + a2 * v1 + a2 * v2) +
                 entropy_density(a2 * v0 + b2 * v1 + a2 * v2) +
                 entropy_density(a2 * v0 + a2 * v1 + b2 * v2));
    return area * acc;
}

// Adaptive quartering on vertex values; linear data makes midpoint values
// exact, so no geometry is carried.  Triangles straddling p = 1 refuse the
// early exit for a few levels because the kink defeats the error estimate
// on coarse cells.
double entropy_adaptive(double v0, double v1, double v2, double area, double tol, int depth) {
    const double vmax = std::max({v0, v1, v2});
    if (vmax <= 1.0) return 0.0;
    const double vmin = std::min({v0, v1, v2});
    const double coarse = entropy_rule(v0, v1, v2, area);
    const double m01 = 0.5 * (v0 + v1), m12 = 0.5 * (v1 + v2), m02 = 0.5 * (v0 + v2);
    const double qa = 0.25 * area;
    const double fine = entropy_rule(v0, m01, m02, qa) + entropy_rule(m01, v1, m12, qa) +
                        entropy_rule(m02, m12, v2, qa) + entropy_rule(m01, m12, m02, qa);
    const bool straddle = vmin < 1.0;
    if (depth >= 24) return fine;
    if ((!straddle || depth >= 3) && std::abs(fine - coarse) <= tol) return fine;
    const double ct = 0.25 * tol;
    return entropy_adaptive(v0, m01, m02, qa, ct, depth + 1) +
           entropy_adaptive(m01, v1, m12, qa, ct, depth + 1) +
           entropy_adaptive(m02, m12, v2, qa, ct, depth + 1) +
           entropy_adaptive(m01, m12, m02, qa, ct, depth + 1);
}

double triangle_area(const Mesh& mesh, const std::array<std::uint32_t, 3>& tri) {
    const Point2& p0 = mesh.nodes[tri[0]];
    const Point2& p1 = mesh.nodes[tri[1]];
    const Point2& p2 = mesh.nodes[tri[2]];
    return 0.5 * ((p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y));
}

double entropy_total(const Mesh& mesh, const std::vector<double>& fhat) {
    double total_area = 0.0;
    for (const auto& tri : mesh.triangles) total_area += triangle_area(mesh, tri);
    double s = 0.0;
    for (const auto& tri : mesh.triangles) {
        const double area = triangle_area(mesh, tri);
        const double tol = 1e-12 + 1e-10 * area / total_area;
        s += entropy_adaptive(fhat[tri[0]], fhat[tri[1]], fhat[tri[2]], area, tol, 0);
    }
    return s;
}

DeficitTerms deficit_terms(std::span<const double> f, const DeficitForms& forms,
                           bool need_weight) {
    const std::size_t n = forms.mesh->nodes.size();
    if (f.size() != n) throw Error("deficit: trial length does not match the mesh");
    for (double v : f)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw Error("deficit: trial functions must be nonnegative and finite");
    const double m2 = forms.mass->quadratic(f);
    if (!(m2 > 0.0)) throw Error("deficit: trial has zero mass norm");
    std::vector<double> fhat(f.begin(), f.end());
    const double inv = 1.0 / std::sqrt(m2);
    for (double& v : fhat) v *= inv;
    DeficitTerms out;
    out.s = entropy_total(*forms.mesh, fhat);
    // Both forms are positive semidefinite; a rounded-negative quadratic
    // would silently break the exact monotonicity of the deficit curves.
    out.q = std::max(forms.stiffness->quadratic(f), 0.0) / m2;
    if (need_weight) out.w = std::max(forms.log_weight->quadratic(f), 0.0) / m2;
    return out;
}

BoundFit linear_law_fit(const std::vector<double>& x, const std::vector<double>& y,
                        std::size_t window_first) {
    LineFit line = fit_line(x, y);
    std::vector<double> yhat(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) yhat[i] = line.a + line.b * x[i];
    BoundFit out;
    out.fitted_exponent = line.b;
    out.c_mult_fit = line.a;
    out.c_mult_cert = line.a;
    out.residual = data_scale_residual(y, yhat);
    out.window_first = window_first;
    out.window_count = x.size();
    return out;
}

}  // namespace

BoundFit eigen_growth_fit(const EigenPairSet& pairs, double alpha) {
    if (!(alpha > 0.0)) throw Error("bounds: growth fit needs alpha > 0");
    GrowthWindow w = growth_window(pairs);
    const double lo = std::log(1.0 + 1e-6) - std::log(static_cast<double>(w.first_rank));
    const double hi = 30.0;
    const double log_c7 = profile_min(
        [&](double L) { return growth_line_at(w, L).sse; }, lo, hi, 256);
    std::vector<double> xs;
    LineFit line = growth_line_at(w, log_c7, &xs);

    BoundFit out;
    out.asserted_exponent = alpha;
    out.fitted_exponent = line.b;
    out.c_mult_fit = std::exp(line.a);
    out.c_arg_fit = std::exp(log_c7);
    growth_envelope(w, alpha, &out.c_mult_cert, &out.c_arg_cert);
    std::vector<double> yhat(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) yhat[i] = line.a + line.b * xs[i];
    out.residual = data_scale_residual(w.log_lam, yhat);
    out.window_first = w.first_rank;
    out.window_count = w.log_rank.size();
    return out;
}

BoundFit supnorm_bound_fit(const EigenPairSet& pairs, double alpha) {
    if (!(alpha > 0.0)) throw Error("bounds: sup-norm fit needs alpha > 0");
    SupWindow w = sup_window(pairs);
    const double p = profile_min(
        [&](double q) { return sup_line_at(w, q).sse; }, 0.02, 1.5, 150);
    std::vector<double> xs;
    LineFit line = sup_line_at(w, p, &xs);

    BoundFit out;
    out.asserted_exponent = 1.0 / alpha;
    if (std::abs(line.b) < 1e-14) {
        // Flat sup norms leave the exponent unidentifiable; report the
        // asserted one and a zero rate.
        out.fitted_exponent = 1.0 / alpha;
        out.c_arg_fit = 0.0;
        out.c_mult_fit = std::exp(fit_line(std::vector<double>(w.lam.size(), 0.0), w.log_sup).a);
        std::vector<double> yhat(w.lam.size(), std::log(out.c_mult_fit));
        out.residual = data_scale_residual(w.log_sup, yhat);
    } else {
        out.fitted_exponent = p;
        out.c_arg_fit = line.b;
        out.c_mult_fit = std::exp(line.a);
        std::vector<double> yhat(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) yhat[i] = line.a + line.b * xs[i];
        out.residual = data_scale_residual(w.log_sup, yhat);
    }
    sup_envelope(w, alpha, &out.c_mult_cert, &out.c_arg_cert);
    out.window_first = 1;
    out.window_count = w.lam.size();
    return out;
}

std::size_t growth_violations(const EigenPairSet& pairs, double alpha, double c6, double c7,
                              std::size_t first_rank) {
    std::size_t count = 0;
    for (std::size_t i = std::max<std::size_t>(first_rank, 1) - 1; i < pairs.values.size(); ++i) {
        const double lc = std::log(c7 * static_cast<double>(i + 1));
        if (lc <= 0.0) continue;  // bound vacuous below c7 r = 1
        if (pairs.values[i] < c6 * std::pow(lc, alpha) * (1.0 - 1e-12)) ++count;
    }
    return count;
}

std::size_t supnorm_violations(const EigenPairSet& pairs, double alpha, double c8, double c9) {
    if (pairs.sup_norms.size() != pairs.values.size())
        throw Error("bounds: sup-norm check needs a sup norm for every pair");
    std::size_t count = 0;
    for (std::size_t i = 0; i < pairs.values.size(); ++i) {
        const double lam = std::max(pairs.values[i], 0.0);
        const double bound = c8 * std::exp(c9 * std::pow(lam, 1.0 / alpha));
        if (pairs.sup_norms[i] > bound * (1.0 + 1e-12)) ++count;
    }
    return count;
}

TailModel fit_tail_model(const EigenPairSet& pairs, double alpha) {
    if (!(alpha > 0.0)) throw Error("bounds: tail model needs alpha > 0");
    GrowthWindow gw = growth_window(pairs);
    SupWindow sw = sup_window(pairs);
    TailModel tail;
    tail.alpha = alpha;
    growth_envelope(gw, alpha, &tail.c6, &tail.c7);
    sup_envelope(sw, alpha, &tail.c8, &tail.c9);
    tail.n_start = gw.first_rank;
    return tail;
}

HeatKernelSample heat_kernel_diag(const EigenPairSet& pairs, const TailModel& tail, double t,
                                  std::size_t node, double rel_tol) {
    if (!(t > 0.0)) throw Error("bounds: heat kernel needs t > 0");
    if (node >= pairs.dimension) throw Error("bounds: node index out of range");
    if (!(rel_tol > 0.0)) throw Error("bounds: rel_tol must be positive");
    const std::size_t k = pairs.values.size();
    if (k == 0) throw Error("bounds: heat kernel needs at least one pair");
    if (k + 1 < tail.n_start) {
        std::ostringstream os;
        os << "bounds: tail law starts at rank " << tail.n_start
           << ", beyond the " << k << " computed pairs";
        throw Error(os.str());
    }

    HeatKernelSample out;
    out.t = t;
    out.node = node;
    out.n_terms = k;
    for (std::size_t r = 0; r < k; ++r) {
        const double v = pairs.vectors[r][node];
        out.value += std::exp(-pairs.values[r] * t) * v * v;
    }

    const double log_bound = tail_bound_log(tail, t, k);
    out.truncation_bound = log_bound > 700.0 ? kInf : std::exp(log_bound);
    if (!(out.truncation_bound <= rel_tol * out.value)) {
        // Walk the tail forward to estimate how many pairs the certificate
        // would need at this t.
        const double beta = 0.5 * tail.c6 * t;
        std::size_t need = k;
        double series = std::isfinite(log_bound)
                            ? std::exp(log_bound - 2.0 * std::log(tail.c8) -
                                       estbasic_c10(tail.c9, tail.alpha) *
                                           std::pow(t, -1.0 / (tail.alpha - 1.0)))
                            : kInf;
        const double pre_log = 2.0 * std::log(tail.c8) +
                               estbasic_c10(tail.c9, tail.alpha) *
                                   std::pow(t, -1.0 / (tail.alpha - 1.0));
        std::ostringstream os;
        os << "bounds: heat kernel truncation not certified at t = " << t << ": tail bound "
           << out.truncation_bound << " vs tolerance " << rel_tol * out.value << "; ";
        if (std::isfinite(series)) {
            while (need < 4'000'000) {
                const double lc = std::log(tail.c7 * static_cast<double>(need + 1));
                if (lc > 0.0) {
                    if (pre_log + std::log(std::max(series, 1e-300)) <=
                        std::log(rel_tol * std::max(out.value, 1e-300)))
                        break;
                    series -= std::exp(-beta * std::pow(lc, tail.alpha));
                }
                ++need;
            }
            os << "about " << need << " pairs needed, have " << k;
        } else {
            os << "no pair count certifies this t under the fitted law; have " << k << " pairs";
        }
        throw Error(os.str());
    }
    out.certified = true;
    return out;
}

UltraFit ultracontractivity_fit(const EigenPairSet& pairs, const TailModel& tail,
                                double alpha_beta, std::span<const double> t_grid) {
    if (!(alpha_beta > 1.0)) throw Error("bounds: ultracontractivity fit needs alpha*beta > 1");
    if (t_grid.empty()) throw Error("bounds: ultracontractivity fit needs a t grid");
    const std::size_t k = pairs.values.size();
    const std::size_t n = pairs.dimension;
    if (k == 0 || n == 0) throw Error("bounds: ultracontractivity fit needs computed pairs");

    UltraFit out;
    out.t.assign(t_grid.begin(), t_grid.end());
    std::vector<double> diag(n);
    auto sup_at = [&](double t) {
        std::fill(diag.begin(), diag.end(), 0.0);
        for (std::size_t r = 0; r < k; ++r) {
            const double w = std::exp(-pairs.values[r] * t);
            const std::vector<double>& v = pairs.vectors[r];
            for (std::size_t i = 0; i < n; ++i) diag[i] += w * v[i] * v[i];
        }
        return *std::max_element(diag.begin(), diag.end());
    };
    for (double t : out.t) {
        if (!(t > 0.0)) throw Error("bounds: ultracontractivity fit needs positive t");
        out.sup_diag.push_back(sup_at(t));
        out.norm_2inf.push_back(std::sqrt(sup_at(2.0 * t)));
        const double lb = tail_bound_log(tail, t, k);
        out.tail_rel.push_back(lb > 700.0 ? kInf : std::exp(lb) / out.sup_diag.back());
    }

    std::vector<double> xs, ys;
    std::size_t first = 0;
    for (std::size_t i = 0; i < out.t.size(); ++i) {
        if (!(out.sup_diag[i] > 1.0 + 1e-9)) continue;
        if (xs.empty()) first = i + 1;
        xs.push_back(std::log(1.0 / out.t[i]));
        ys.push_back(std::log(std::log(out.sup_diag[i])));
    }
    if (xs.size() < 3)
        throw Error("bounds: ultracontractivity fit needs at least 3 grid points with sup K > 1");
    LineFit line = fit_line(xs, ys);
    out.fit.asserted_exponent = 1.0 / (alpha_beta - 1.0);
    out.fit.fitted_exponent = line.b;
    out.fit.c_mult_fit = 1.0;
    out.fit.c_arg_fit = std::exp(line.a);
    // Pinned-exponent certificate: log log sup K <= log c5 + q log(1/t) on
    // the window, then the prefactor soaks up whatever is left.
    const double q = out.fit.asserted_exponent;
    double a_pin = -kInf;
    for (std::size_t i = 0; i < xs.size(); ++i) a_pin = std::max(a_pin, ys[i] - q * xs[i]);
    out.fit.c_arg_cert = std::exp(a_pin);
    double c4 = 1.0;
    for (std::size_t i = 0; i < out.t.size(); ++i) {
        const double env = out.fit.c_arg_cert * std::pow(out.t[i], -q);
        if (env < 700.0) c4 = std::max(c4, out.sup_diag[i] / std::exp(env));
    }
    out.fit.c_mult_cert = c4;
    std::vector<double> yhat(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) yhat[i] = line.a + line.b * xs[i];
    out.fit.residual = data_scale_residual(ys, yhat);
    out.fit.window_first = first;
    out.fit.window_count = xs.size();
    return out;
}

EstBasicReport estbasic_check(double c9, double alpha, std::span<const double> lambdas,
                              std::span<const double> ts) {
    if (!(alpha > 1.0)) throw Error("bounds: the exponent comparison needs alpha > 1");
    if (!(c9 >= 0.0)) throw Error("bounds: c9 must be nonnegative");
    EstBasicReport out;
    out.c10 = estbasic_c10(c9, alpha);
    out.max_exponent_gap = -kInf;
    for (double t : ts) {
        if (!(t > 0.0)) throw Error("bounds: t grid must be positive");
        const double rhs = out.c10 * std::pow(t, -1.0 / (alpha - 1.0));
        for (double lam : lambdas) {
            if (!(lam >= 0.0)) throw Error("bounds: lambda grid must be nonnegative");
            const double lhs = -0.5 * lam * t + 2.0 * c9 * std::pow(lam, 1.0 / alpha);
            const double gap = lhs - rhs;
            out.max_exponent_gap = std::max(out.max_exponent_gap, gap);
            if (gap > 0.0) ++out.n_violations;
            ++out.n_checked;
        }
    }
    return out;
}

double lsi_deficit(std::span<const double> f, const DeficitForms& forms, double eps, double b0) {
    require_forms(forms, b0 != 0.0, "deficit");
    if (!(eps >= 0.0)) throw Error("deficit: eps must be nonnegative");
    DeficitTerms terms = deficit_terms(f, forms, b0 != 0.0);
    return terms.s - eps * terms.q - b0 * terms.w;
}

TrialFamily trial_family_from_pairs(const EigenPairSet& pairs, std::size_t max_eigs,
                                    bool pair_maxima) {
    if (max_eigs == 0 || max_eigs > pairs.vectors.size())
        throw Error("bounds: trial family needs 1 <= max_eigs <= computed pairs");
    TrialFamily fam;
    for (std::size_t r = 0; r < max_eigs; ++r) {
        std::vector<double> f = pairs.vectors[r];
        for (double& v : f) v = std::abs(v);
        fam.functions.push_back(std::move(f));
        fam.names.push_back("abs_eig_" + std::to_string(r));
    }
    if (pair_maxima) {
        for (std::size_t i = 0; i < max_eigs; ++i) {
            for (std::size_t j = i + 1; j < max_eigs; ++j) {
                std::vector<double> f = fam.functions[i];
                for (std::size_t p = 0; p < f.size(); ++p)
                    f[p] = std::max(f[p], fam.functions[j][p]);
                fam.functions.push_back(std::move(f));
                fam.names.push_back("max_" + std::to_string(i) + "_" + std::to_string(j));
            }
        }
    }
    return fam;
}

std::vector<double> smoothed_indicator(const DeficitForms& forms,
                                       std::span<const double> indicator, double t) {
    require_forms(forms, false, "bounds");
    if (indicator.size() != forms.mass->dimension())
        throw Error("bounds: indicator length does not match the mesh");
    if (!(t > 0.0)) throw Error("bounds: smoothing time must be positive");
    std::vector<double> rhs(indicator.size());
    forms.mass->apply(indicator, rhs);
    SpMat S = to_eigen_sum(*forms.mass, *forms.stiffness, t);
    Eigen::SimplicialLDLT<SpMat> ldlt(S);
    if (ldlt.info() != Eigen::Success) throw Error("bounds: smoothing solve failed to factorize");
    Eigen::Map<const Eigen::VectorXd> b(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
    Eigen::VectorXd u = ldlt.solve(b);
    std::vector<double> out(indicator.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(u[static_cast<Eigen::Index>(i)], 0.0);
    return out;
}

DeficitStudy eta_lower_bound(const TrialFamily& family, const DeficitForms& forms,
                             std::span<const double> eps_grid, double alpha_beta, double b0) {
    if (family.functions.empty()) throw Error("bounds: deficit study needs a nonempty family");
    if (eps_grid.size() < 2) throw Error("bounds: deficit study needs at least 2 eps values");
    for (std::size_t i = 0; i < eps_grid.size(); ++i) {
        if (!(eps_grid[i] > 0.0)) throw Error("bounds: eps grid must be positive");
        if (i > 0 && !(eps_grid[i] < eps_grid[i - 1]))
            throw Error("bounds: eps grid must be strictly decreasing");
    }
    if (!(alpha_beta > 1.0)) throw Error("bounds: deficit study needs alpha*beta > 1");
    if (!(b0 >= 0.0)) throw Error("bounds: b0 must be nonnegative");
    require_forms(forms, b0 != 0.0, "bounds");

    std::vector<DeficitTerms> terms;
    terms.reserve(family.functions.size());
    for (const auto& f : family.functions) terms.push_back(deficit_terms(f, forms, b0 != 0.0));

    DeficitStudy out;
    out.eta.eps.assign(eps_grid.begin(), eps_grid.end());
    out.beta.eps = out.eta.eps;
    for (double eps : eps_grid) {
        double best_eta = -kInf, best_beta = -kInf;
        std::size_t arg_eta = 0, arg_beta = 0;
        for (std::size_t i = 0; i < terms.size(); ++i) {
            const double e = terms[i].s - eps * terms[i].q;
            const double b = e - b0 * terms[i].w;
            if (e > best_eta) {
                best_eta = e;
                arg_eta = i;
            }
            if (b > best_beta) {
                best_beta = b;
                arg_beta = i;
            }
        }
        out.eta.value.push_back(best_eta);
        out.eta.argmax.push_back(arg_eta);
        out.beta.value.push_back(best_beta);
        out.beta.argmax.push_back(arg_beta);
    }

    // With cached terms and clamped quadratic forms, each trial's deficit is
    // monotone in eps even in floating point, and so is the family max.
    auto check_curve = [](const DeficitCurve& c, const char* name) {
        for (std::size_t i = 1; i < c.value.size(); ++i) {
            if (c.value[i] < c.value[i - 1]) {
                std::ostringstream os;
                os << "bounds: " << name << " curve lost monotonicity at eps = " << c.eps[i];
                throw Error(os.str());
            }
        }
        for (std::size_t i = 1; i + 1 < c.value.size(); ++i) {
            const double span = c.eps[i + 1] - c.eps[i - 1];
            const double th = (c.eps[i] - c.eps[i - 1]) / span;
            const double chord = c.value[i - 1] + th * (c.value[i + 1] - c.value[i - 1]);
            const double slack =
                1e-10 * (1.0 + std::abs(c.value[i - 1]) + std::abs(c.value[i + 1]));
            if (c.value[i] > chord + slack) {
                std::ostringstream os;
                os << "bounds: " << name << " curve lost convexity at eps = " << c.eps[i];
                throw Error(os.str());
            }
        }
    };
    check_curve(out.eta, "eta");
    check_curve(out.beta, "beta");

    std::vector<double> xs, ys;
    std::size_t first = 0;
    for (std::size_t i = 0; i < out.eta.value.size(); ++i) {
        if (!(out.eta.value[i] > 0.0)) continue;
        if (xs.empty()) first = i + 1;
        xs.push_back(std::log(1.0 / out.eta.eps[i]));
        ys.push_back(std::log(out.eta.value[i]));
    }
    if (xs.size() >= 3) {
        LineFit line = fit_line(xs, ys);
        out.eta_fit.asserted_exponent = 1.0 / (alpha_beta - 1.0);
        out.eta_fit.fitted_exponent = line.b;
        out.eta_fit.c_mult_fit = std::exp(line.a);
        double a_pin = -kInf;
        for (std::size_t i = 0; i < xs.size(); ++i)
            a_pin = std::max(a_pin, ys[i] - out.eta_fit.asserted_exponent * xs[i]);
        out.eta_fit.c_mult_cert = std::exp(a_pin);
        std::vector<double> yhat(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) yhat[i] = line.a + line.b * xs[i];
        out.eta_fit.residual = data_scale_residual(ys, yhat);
        out.eta_fit.window_first = first;
        out.eta_fit.window_count = xs.size();
        out.eta_fit_ok = true;
    }

    std::vector<double> bx(out.beta.eps.size());
    for (std::size_t i = 0; i < bx.size(); ++i) bx[i] = -std::log(out.beta.eps[i]);
    out.beta_fit = linear_law_fit(bx, out.beta.value, 1);
    return out;
}

EpsCheckReport lemma_eps_check(const DeficitForms& forms, double alpha, double b6,
                               std::span<const double> eps_grid, const TrialFamily& family) {
    require_forms(forms, true, "bounds");
    if (!(alpha > 1.0)) throw Error("bounds: the eps trade-off needs alpha > 1");
    if (!(b6 > 0.0)) throw Error("bounds: the eps trade-off needs a positive Hardy constant");
    if (family.functions.empty()) throw Error("bounds: the eps check needs a nonempty family");

    EpsCheckReport out;
    out.max_rel_excess = -kInf;
    for (const auto& f : family.functions) {
        std::span<const double> fv(f);
        if (fv.size() != forms.mass->dimension())
            throw Error("bounds: trial length does not match the mesh");
        const double m2 = forms.mass->quadratic(fv);
        if (!(m2 > 0.0)) throw Error("bounds: the eps check needs nonzero trials");
        const double lhs = std::max(forms.log_weight->quadratic(fv), 0.0);
        const double q = std::max(forms.stiffness->quadratic(fv), 0.0);
        for (double eps : eps_grid) {
            if (!(eps > 0.0)) throw Error("bounds: eps grid must be positive");
            const double rhs =
                eps * q + (std::pow(eps / b6, -1.0 / (alpha - 1.0)) + eps) * m2;
            out.max_rel_excess = std::max(out.max_rel_excess, (lhs - rhs) / rhs);
            if (lhs > rhs * (1.0 + 1e-12)) ++out.n_violations;
            ++out.n_checked;
        }
    }
    return out;
}

}  // namespace cusplab
