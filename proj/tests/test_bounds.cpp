#include "cusplab/bounds.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "cusplab/cusp_domain.hpp"
#include "cusplab/cusp_profile.hpp"
#include "cusplab/eigen_solver.hpp"
#include "cusplab/fem.hpp"
#include "cusplab/mesh.hpp"
#include "doctest.h"

using cusplab::AssembledForms;
using cusplab::BoundFit;
using cusplab::CuspDomain;
using cusplab::CuspProfile;
using cusplab::DeficitForms;
using cusplab::DeficitStudy;
using cusplab::EigenPairSet;
using cusplab::Error;
using cusplab::Mesh;
using cusplab::NodeKind;
using cusplab::TailModel;
using cusplab::TrialFamily;
using cusplab::WeightSpec;
using cusplab::assemble;
using cusplab::build_graded_mesh;
using cusplab::eigen_growth_fit;
using cusplab::estbasic_check;
using cusplab::eta_lower_bound;
using cusplab::fit_tail_model;
using cusplab::growth_violations;
using cusplab::heat_kernel_diag;
using cusplab::lemma_eps_check;
using cusplab::lsi_deficit;
using cusplab::smoothed_indicator;
using cusplab::solve_lowest;
using cusplab::supnorm_bound_fit;
using cusplab::supnorm_violations;
using cusplab::trial_family_from_pairs;
using cusplab::ultracontractivity_fit;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kPi2 = kPi * kPi;

CuspDomain flat_domain(double height) {
    return CuspDomain(CuspProfile::sampled({0.0, 0.5}, {height, height}), height / 2.0);
}

// lambda_r = (log 2r)^2 and sup_r = e^0.3 * 2r, which satisfy the growth and
// sup-norm laws exactly with alpha = 2, c6 = 1, c7 = 2, c8 = e^0.3, c9 = 1.
EigenPairSet synthetic_log_pairs(std::size_t k, double lam_noise, double sup_noise,
                                 unsigned seed) {
    EigenPairSet pairs;
    pairs.dimension = 1;
    std::mt19937 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::size_t r = 1; r <= k; ++r) {
        double lam = std::pow(std::log(2.0 * static_cast<double>(r)), 2.0);
        double sup = std::exp(0.3) * 2.0 * static_cast<double>(r);
        if (lam_noise > 0.0) lam *= 1.0 + lam_noise * g(rng);
        if (sup_noise > 0.0) sup *= 1.0 + sup_noise * g(rng);
        pairs.values.push_back(lam);
        pairs.vectors.push_back({1.0});
        pairs.sup_norms.push_back(sup);
    }
    return pairs;
}

// First k Neumann modes of the unit square sampled on a (g+1)^2 grid,
// ordered by eigenvalue with a lexicographic tie-break.
EigenPairSet square_grid_pairs(std::size_t g, std::size_t k) {
    struct Mode {
        double lam;
        int m, n;
    };
    std::vector<Mode> modes;
    for (int m = 0; m <= 9; ++m)
        for (int n = 0; n <= 9; ++n)
            modes.push_back({kPi2 * static_cast<double>(m * m + n * n), m, n});
    std::sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) {
        if (a.lam != b.lam) return a.lam < b.lam;
        if (a.m != b.m) return a.m < b.m;
        return a.n < b.n;
    });
    EigenPairSet pairs;
    pairs.dimension = (g + 1) * (g + 1);
    for (std::size_t r = 0; r < k; ++r) {
        const Mode& mo = modes[r];
        const double cm = mo.m == 0 ? 1.0 : std::numbers::sqrt2;
        const double cn = mo.n == 0 ? 1.0 : std::numbers::sqrt2;
        std::vector<double> v(pairs.dimension);
        for (std::size_t i = 0; i <= g; ++i) {
            const double x = static_cast<double>(i) / static_cast<double>(g);
            for (std::size_t j = 0; j <= g; ++j) {
                const double y = static_cast<double>(j) / static_cast<double>(g);
                v[i * (g + 1) + j] =
                    cm * cn * std::cos(mo.m * kPi * x) * std::cos(mo.n * kPi * y);
            }
        }
        pairs.values.push_back(mo.lam);
        pairs.vectors.push_back(std::move(v));
        pairs.sup_norms.push_back(cm * cn);
    }
    return pairs;
}

Mesh triangle_mesh(double x1, double y2) {
    Mesh m;
    m.nodes = {{0.0, 0.0}, {x1, 0.0}, {0.0, y2}};
    m.kinds = {NodeKind::interior, NodeKind::interior, NodeKind::interior};
    m.triangles = {{0, 1, 2}};
    return m;
}

// Structured unit-square mesh with the diagonal running (i,j) -> (i+1,j+1).
Mesh structured_square(std::size_t n) {
    Mesh m;
    const auto idx = [n](std::size_t i, std::size_t j) {
        return static_cast<std::uint32_t>(i * (n + 1) + j);
    };
    for (std::size_t i = 0; i <= n; ++i)
        for (std::size_t j = 0; j <= n; ++j)
            m.nodes.push_back({static_cast<double>(i) / static_cast<double>(n),
                               static_cast<double>(j) / static_cast<double>(n)});
    m.kinds.assign(m.nodes.size(), NodeKind::interior);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            m.triangles.push_back({idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)});
            m.triangles.push_back({idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)});
        }
    }
    return m;
}

DeficitForms forms_of(const Mesh& mesh, const AssembledForms& f,
                      const cusplab::SparseSymmetricForm* w = nullptr) {
    DeficitForms out;
    out.mesh = &mesh;
    out.stiffness = &f.stiffness;
    out.mass = &f.mass;
    out.log_weight = w;
    return out;
}

}  // namespace

TEST_CASE("growth fit recovers an exact log-power law to nearly machine precision") {
    const EigenPairSet pairs = synthetic_log_pairs(200, 0.0, 0.0, 1);
    const BoundFit fit = eigen_growth_fit(pairs, 2.0);
    CHECK(std::abs(fit.fitted_exponent - 2.0) <= 1e-6);
    CHECK(fit.c_mult_fit == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(fit.c_arg_fit == doctest::Approx(2.0).epsilon(1e-3));
    CHECK(fit.residual <= 1e-8);
    CHECK(fit.window_first == 3);
    CHECK(fit.window_count == 198);
    CHECK(fit.asserted_exponent == 2.0);
    // Certified constants must reproduce zero violations on their own window.
    CHECK(fit.c_mult_cert > 0.0);
    CHECK(growth_violations(pairs, 2.0, fit.c_mult_cert, fit.c_arg_cert, fit.window_first) == 0);
}

TEST_CASE("growth fit stays within five percent under one percent noise") {
    for (unsigned seed : {7u, 8u, 9u}) {
        CAPTURE(seed);
        const EigenPairSet pairs = synthetic_log_pairs(200, 0.01, 0.0, seed);
        const BoundFit fit = eigen_growth_fit(pairs, 2.0);
        CHECK(std::abs(fit.fitted_exponent - 2.0) <= 0.1);
    }
}

TEST_CASE("growth fit on a weyl spectrum runs the exponent far above any log law") {
    EigenPairSet pairs;
    pairs.dimension = 1;
    for (std::size_t r = 1; r <= 400; ++r) {
        pairs.values.push_back(3.0 * static_cast<double>(r));
        pairs.vectors.push_back({1.0});
        pairs.sup_norms.push_back(1.0);
    }
    const BoundFit fit = eigen_growth_fit(pairs, 2.0);
    // lambda ~ r has no log-power law; the profiled inner constant walks to
    // the bracket edge and the exponent blows past any fixed alpha.
    CHECK(fit.fitted_exponent > 5.0);
    CHECK(growth_violations(pairs, 2.0, fit.c_mult_cert, fit.c_arg_cert, fit.window_first) == 0);
}

TEST_CASE("growth fit refuses windows below twenty usable eigenvalues") {
    EigenPairSet pairs;
    pairs.dimension = 1;
    for (std::size_t r = 1; r <= 21; ++r) {
        pairs.values.push_back(0.5);  // nothing reaches lambda = 1
        pairs.vectors.push_back({1.0});
        pairs.sup_norms.push_back(1.0);
    }
    CHECK_THROWS_AS((void)eigen_growth_fit(pairs, 2.0), Error);
}

TEST_CASE("sup-norm fit recovers the synthetic envelope and its certificate holds") {
    const EigenPairSet pairs = synthetic_log_pairs(200, 0.0, 0.0, 1);
    const BoundFit fit = supnorm_bound_fit(pairs, 2.0);
    CHECK(std::abs(fit.fitted_exponent - 0.5) <= 1e-6);
    CHECK(fit.c_arg_fit == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(fit.c_mult_fit == doctest::Approx(std::exp(0.3)).epsilon(1e-3));
    CHECK(fit.residual <= 1e-8);
    CHECK(supnorm_violations(pairs, 2.0, fit.c_mult_cert, fit.c_arg_cert) == 0);

    for (unsigned seed : {11u, 12u, 13u}) {
        CAPTURE(seed);
        const EigenPairSet noisy = synthetic_log_pairs(200, 0.0, 0.01, seed);
        const BoundFit nf = supnorm_bound_fit(noisy, 2.0);
        CHECK(std::abs(nf.fitted_exponent - 0.5) <= 0.025);
    }
}

TEST_CASE("constant sup norms pin the prefactor and report a zero rate") {
    EigenPairSet pairs = synthetic_log_pairs(50, 0.0, 0.0, 1);
    for (double& s : pairs.sup_norms) s = 1.0 / std::numbers::sqrt2;
    const BoundFit fit = supnorm_bound_fit(pairs, 2.0);
    CHECK(fit.fitted_exponent == 0.5);  // unidentifiable, echoes 1/alpha
    CHECK(fit.c_arg_fit == 0.0);
    CHECK(fit.c_mult_fit == doctest::Approx(1.0 / std::numbers::sqrt2).epsilon(1e-12));
    CHECK(fit.c_arg_cert == 0.0);
    CHECK(fit.c_mult_cert == doctest::Approx(1.0 / std::numbers::sqrt2).epsilon(1e-12));
    CHECK(fit.residual == 0.0);
    CHECK(supnorm_violations(pairs, 2.0, fit.c_mult_cert, fit.c_arg_cert) == 0);
}

TEST_CASE("square cosine products admit the flat envelope sup <= 2") {
    const EigenPairSet pairs = square_grid_pairs(32, 40);
    CHECK(supnorm_violations(pairs, 2.0, 2.0, 0.0) == 0);
    CHECK(supnorm_violations(pairs, 2.0, 0.9, 0.0) > 0);
}

TEST_CASE("the exponent comparison for the kernel tail never fails on its grid") {
    std::vector<double> lambdas, ts;
    for (int i = 0; i <= 60; ++i) lambdas.push_back(std::pow(10.0, 6.0 * i / 60.0));
    for (int i = 0; i <= 40; ++i) ts.push_back(std::pow(10.0, -4.0 + 4.0 * i / 40.0));

    auto one = estbasic_check(1.0, 2.0, std::vector<double>{4.0}, std::vector<double>{1.0});
    CHECK(one.c10 == 8.0);
    CHECK(one.n_checked == 1);
    CHECK(one.n_violations == 0);
    CHECK(one.max_exponent_gap == doctest::Approx(-6.0).epsilon(1e-14));

    for (double alpha : {1.5, 2.0, 3.0}) {
        for (double c9 : {0.5, 1.0, 2.0}) {
            CAPTURE(alpha);
            CAPTURE(c9);
            const auto rep = estbasic_check(c9, alpha, lambdas, ts);
            CHECK(rep.n_checked == lambdas.size() * ts.size());
            CHECK(rep.n_violations == 0);
            CHECK(rep.max_exponent_gap < 0.0);
        }
    }
    const auto zero = estbasic_check(0.0, 2.0, lambdas, ts);
    CHECK(zero.c10 == 0.0);
    CHECK(zero.n_violations == 0);
}

TEST_CASE("a single constant pair gives a flat certified kernel diagonal") {
    EigenPairSet pairs;
    pairs.dimension = 3;
    pairs.values = {0.0};
    pairs.vectors = {{2.0, 2.0, 2.0}};  // domain volume 1/4
    pairs.sup_norms = {2.0};
    TailModel tail;
    tail.alpha = 2.0;
    tail.c6 = 1e4;
    tail.c7 = 1.0;
    tail.c8 = 2.0;
    tail.c9 = 0.0;
    tail.n_start = 1;
    for (double t : {0.01, 1.0, 10.0}) {
        CAPTURE(t);
        const auto s = heat_kernel_diag(pairs, tail, t, 1);
        CHECK(s.value == doctest::Approx(4.0).epsilon(1e-12));
        CHECK(s.n_terms == 1);
        CHECK(s.certified);
        CHECK(s.truncation_bound <= 1e-6 * 4.0);
    }
}

TEST_CASE("heat kernel refuses a tail law starting beyond the computed pairs") {
    EigenPairSet pairs;
    pairs.dimension = 1;
    pairs.values = {0.0, 1.0};
    pairs.vectors = {{1.0}, {1.0}};
    pairs.sup_norms = {1.0, 1.0};
    TailModel tail;
    tail.alpha = 2.0;
    tail.c6 = 1.0;
    tail.c7 = 1.0;
    tail.n_start = 5;
    CHECK_THROWS_WITH_AS((void)heat_kernel_diag(pairs, tail, 1.0, 0),
                         doctest::Contains("rank"), Error);
}

TEST_CASE("heat kernel diagonal matches the separable square series") {
    const auto t0 = std::chrono::steady_clock::now();
    const CuspDomain d = flat_domain(1.0);
    const Mesh m = build_graded_mesh(d, 1.0 / 128.0, 0.25);
    const AssembledForms f = assemble(m, d, WeightSpec{});
    const EigenPairSet pairs = solve_lowest(f.stiffness, f.mass, 40);
    const TailModel tail = fit_tail_model(pairs, 2.0);
    MESSAGE("40-pair tail law: c6 = ", tail.c6, ", c7 = ", tail.c7, ", c8 = ", tail.c8,
            ", c9 = ", tail.c9);

    std::size_t center = m.nodes.size();
    for (std::size_t i = 0; i < m.nodes.size(); ++i)
        if (std::abs(m.nodes[i].x) < 1e-12 && std::abs(m.nodes[i].y - 0.5) < 1e-12) center = i;
    REQUIRE(center < m.nodes.size());

    // Value frozen from the separable cosine series of the unit square.
    const auto sample = heat_kernel_diag(pairs, tail, 0.1, center, 1e-3);
    CHECK(sample.value == doctest::Approx(1.0786751768406496).epsilon(2.5e-4));
    CHECK(sample.certified);
    CHECK(sample.n_terms == 40);
    CHECK(sample.truncation_bound < 1e-3 * sample.value);

    // Strict decay in t; the huge rel_tol only disables the certificate gate.
    double prev = std::numeric_limits<double>::infinity();
    for (double t : {0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 10.0}) {
        CAPTURE(t);
        const auto s = heat_kernel_diag(pairs, tail, t, center, 1e300);
        CHECK(s.value < prev);
        prev = s.value;
    }

    // Long-time limit is 1/|Omega| = 1, certified at the default tolerance.
    const auto late = heat_kernel_diag(pairs, tail, 10.0, center);
    CHECK(late.certified);
    CHECK(late.value == doctest::Approx(1.0).epsilon(1e-8));

    // 40 pairs cannot certify t = 0.05 at the default tolerance; the error
    // says how many pairs would.
    CHECK_THROWS_WITH_AS((void)heat_kernel_diag(pairs, tail, 0.05, center),
                         doctest::Contains("pairs"), Error);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    MESSAGE("square kernel reconstruction in ", secs, " s");
}

TEST_CASE("ultracontractivity slope on a synthetic log spectrum") {
    EigenPairSet pairs;
    pairs.dimension = 1;
    for (std::size_t n = 1; n <= 100000; ++n) {
        pairs.values.push_back(std::pow(std::log(2.0 * static_cast<double>(n)), 2.0));
        pairs.vectors.push_back({std::sqrt(2.0 * static_cast<double>(n))});
        pairs.sup_norms.push_back(std::sqrt(2.0 * static_cast<double>(n)));
    }
    const TailModel tail = fit_tail_model(pairs, 2.0);
    std::vector<double> ts(8);
    for (int i = 0; i < 8; ++i)
        ts[i] = std::exp(std::log(0.3) * (1.0 - static_cast<double>(i) / 7.0));
    const auto ultra = ultracontractivity_fit(pairs, tail, 2.0, ts);

    CHECK(ultra.sup_diag.front() == doctest::Approx(2925.476910484).epsilon(1e-9));
    CHECK(ultra.sup_diag.back() == doctest::Approx(8.463871421561).epsilon(1e-9));
    CHECK(ultra.fit.asserted_exponent == 1.0);
    CHECK(ultra.fit.fitted_exponent == doctest::Approx(1.08959154611).epsilon(1e-6));
    CHECK(std::abs(ultra.fit.fitted_exponent - 1.0) < 0.3);
    CHECK(ultra.fit.window_count == 8);
    // The pinned certificate covers every grid point.
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double env =
            ultra.fit.c_mult_cert * std::exp(ultra.fit.c_arg_cert / ts[i]);
        CHECK(ultra.sup_diag[i] <= env * (1.0 + 1e-9));
    }
    // The doubled-time operator norms decay along the increasing grid.
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
        CHECK(ultra.norm_2inf[i] > 0.0);
        CHECK(ultra.norm_2inf[i + 1] < ultra.norm_2inf[i]);
    }
}

TEST_CASE("ultracontractivity slope on a weyl spectrum stays well below the log law") {
    EigenPairSet pairs;
    pairs.dimension = 1;
    for (std::size_t n = 0; n <= 5000; ++n) {
        pairs.values.push_back(static_cast<double>(n));
        pairs.vectors.push_back({1.0});
        pairs.sup_norms.push_back(1.0);
    }
    const TailModel tail = fit_tail_model(pairs, 2.0);
    std::vector<double> ts(10);
    for (int i = 0; i < 10; ++i)
        ts[i] = std::exp(std::log(0.01) + (std::log(0.3) - std::log(0.01)) *
                                              static_cast<double>(i) / 9.0);
    const auto ultra = ultracontractivity_fit(pairs, tail, 2.0, ts);
    CHECK(ultra.fit.fitted_exponent == doctest::Approx(0.352656436888).epsilon(1e-6));
    CHECK(ultra.fit.fitted_exponent < 0.7);
    // No log-power growth law certifies a Weyl tail.
    for (double r : ultra.tail_rel) CHECK(std::isinf(r));
}

TEST_CASE("random trials stay below the two-to-infinity norm and reach it after ascent") {
    const std::size_t g = 32;
    const EigenPairSet pairs = square_grid_pairs(g, 40);
    const TailModel tail = fit_tail_model(pairs, 2.0);
    const std::vector<double> ts{0.02, 0.035, 0.05, 0.1};
    const auto ultra = ultracontractivity_fit(pairs, tail, 2.0, ts);
    const double t = 0.05;
    const double norm = ultra.norm_2inf[2];

    const std::size_t k = pairs.values.size();
    const std::size_t nn = pairs.dimension;
    std::mt19937 rng(123);
    std::normal_distribution<double> gauss(0.0, 1.0);
    // e^{-Ht} applied to sum c_r f_r, evaluated on the grid; the ratio to
    // ||c|| can never beat sup_x K(2t,x,x)^{1/2}, and one ascent step from
    // the argmax (the kernel column there) should nearly attain it.
    auto apply_ratio = [&](const std::vector<double>& c, std::size_t* argmax) {
        double c2 = 0.0;
        for (double v : c) c2 += v * v;
        double best = 0.0;
        std::size_t arg = 0;
        for (std::size_t y = 0; y < nn; ++y) {
            double s = 0.0;
            for (std::size_t r = 0; r < k; ++r)
                s += c[r] * std::exp(-pairs.values[r] * t) * pairs.vectors[r][y];
            if (std::abs(s) > best) {
                best = std::abs(s);
                arg = y;
            }
        }
        if (argmax) *argmax = arg;
        return best / std::sqrt(c2);
    };

    double best_ratio = 0.0;
    for (int draw = 0; draw < 100; ++draw) {
        std::vector<double> c(k);
        for (double& v : c) v = gauss(rng);
        std::size_t arg = 0;
        const double r0 = apply_ratio(c, &arg);
        CHECK(r0 <= norm * (1.0 + 1e-10));
        std::vector<double> col(k);
        for (std::size_t r = 0; r < k; ++r)
            col[r] = std::exp(-pairs.values[r] * t) * pairs.vectors[r][arg];
        const double r1 = apply_ratio(col, nullptr);
        CHECK(r1 <= norm * (1.0 + 1e-10));
        best_ratio = std::max(best_ratio, std::max(r0, r1));
    }
    CHECK(best_ratio >= 0.98 * norm);
}

TEST_CASE("deficit on single triangles matches the analytic entropy integral") {
    // p stays above 1: (1.2, 2.0, 4.0) on the unit right triangle.
    {
        const Mesh m = triangle_mesh(1.0, 1.0);
        const CuspDomain d = flat_domain(2.0);
        const AssembledForms f = assemble(m, d, WeightSpec{});
        const DeficitForms forms = forms_of(m, f);
        const std::vector<double> v{1.2, 2.0, 4.0};
        CHECK(lsi_deficit(v, forms, 0.0) == doctest::Approx(0.409018587595618).epsilon(1e-7));
        CHECK(lsi_deficit(v, forms, 1.0) == doctest::Approx(-0.979627700613989).epsilon(1e-7));
        // Affine in eps with slope -Q(f^).
        const double d0 = lsi_deficit(v, forms, 0.0);
        const double d1 = lsi_deficit(v, forms, 1.0);
        const double d2 = lsi_deficit(v, forms, 2.0);
        CHECK(d2 - d0 == doctest::Approx(2.0 * (d1 - d0)).epsilon(1e-10));
    }
    // The normalized trial crosses p = 1 inside the element.
    {
        const Mesh m = triangle_mesh(1.0, 0.74);
        const CuspDomain d = flat_domain(2.0);
        const AssembledForms f = assemble(m, d, WeightSpec{});
        const DeficitForms forms = forms_of(m, f);
        const std::vector<double> v{0.5, 1.5, 3.0};
        CHECK(lsi_deficit(v, forms, 0.2) == doctest::Approx(-0.22908910725375).epsilon(1e-7));
    }
}

TEST_CASE("deficit input contracts reject bad trials") {
    const Mesh m = triangle_mesh(1.0, 1.0);
    const CuspDomain d = flat_domain(2.0);
    const AssembledForms f = assemble(m, d, WeightSpec{});
    const DeficitForms forms = forms_of(m, f);
    CHECK_THROWS_AS((void)lsi_deficit(std::vector<double>{1.0, -0.1, 1.0}, forms, 1.0), Error);
    CHECK_THROWS_AS((void)lsi_deficit(std::vector<double>{0.0, 0.0, 0.0}, forms, 1.0), Error);
    CHECK_THROWS_AS((void)lsi_deficit(std::vector<double>{1.0, 1.0}, forms, 1.0), Error);
    CHECK_THROWS_AS((void)lsi_deficit(std::vector<double>{1.0, 1.0, 1.0}, forms, -1.0), Error);
    // b0 > 0 without the weighted form.
    CHECK_THROWS_AS((void)lsi_deficit(std::vector<double>{1.0, 1.0, 1.0}, forms, 1.0, 1.0),
                    Error);
}

TEST_CASE("the normalized constant carries the volume entropy") {
    // |Omega| = 1/2: entropy of the constant is -log sqrt(1/2), flat in eps.
    const Mesh m = triangle_mesh(1.0, 1.0);
    const CuspDomain d = flat_domain(2.0);
    const AssembledForms f = assemble(m, d, WeightSpec{});
    const DeficitForms forms = forms_of(m, f);
    const std::vector<double> ones{1.0, 1.0, 1.0};
    const double expect = 0.5 * std::log(2.0);
    CHECK(lsi_deficit(ones, forms, 0.0) == doctest::Approx(expect).epsilon(1e-10));
    CHECK(lsi_deficit(ones, forms, 3.0) == doctest::Approx(expect).epsilon(1e-10));

    // |Omega| = 1: the normalized constant sits exactly at p = 1 and every
    // term vanishes, including the clamped roundoff of Q.
    const Mesh sq = structured_square(8);
    const AssembledForms fs = assemble(sq, d, WeightSpec{});
    const DeficitForms sforms = forms_of(sq, fs);
    const std::vector<double> one(sq.nodes.size(), 1.0);
    CHECK(lsi_deficit(one, sforms, 0.0) == 0.0);
    CHECK(lsi_deficit(one, sforms, 1.0) == 0.0);
}

TEST_CASE("square interpolant entropy matches the high-order reference") {
    const Mesh m = structured_square(16);
    const CuspDomain d = flat_domain(2.0);
    const AssembledForms f = assemble(m, d, WeightSpec{});
    const DeficitForms forms = forms_of(m, f);
    std::vector<double> v(m.nodes.size());
    for (std::size_t i = 0; i < m.nodes.size(); ++i)
        v[i] = std::numbers::sqrt2 * std::cos(kPi * m.nodes[i].x);
    for (double& x : v) x = std::abs(x);
    CHECK(lsi_deficit(v, forms, 0.0) == doctest::Approx(0.104557960257427).epsilon(1e-6));
    CHECK(lsi_deficit(v, forms, 1.0) == doctest::Approx(-9.7967957181415).epsilon(1e-7));
}

TEST_CASE("smoothing an indicator conserves mass and stays nonnegative") {
    const CuspDomain d = flat_domain(1.0);
    const Mesh m = build_graded_mesh(d, 1.0 / 16.0, 0.25);
    const AssembledForms f = assemble(m, d, WeightSpec{});
    const DeficitForms forms = forms_of(m, f);
    std::vector<double> ind(m.nodes.size(), 0.0);
    for (std::size_t i = 0; i < m.nodes.size(); ++i)
        if (m.nodes[i].x < 0.0) ind[i] = 1.0;
    const std::vector<double> u = smoothed_indicator(forms, ind, 1e-2);
    REQUIRE(u.size() == ind.size());
    double mx = 0.0;
    for (double x : u) {
        CHECK(x >= 0.0);
        mx = std::max(mx, x);
    }
    CHECK(mx <= 1.2);
    // Constants are in the stiffness kernel, so backward Euler conserves the
    // mass integral exactly up to the linear solve.
    std::vector<double> Mu(u.size()), Mi(u.size());
    forms.mass->apply(u, Mu);
    forms.mass->apply(ind, Mi);
    double su = 0.0, si = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        su += Mu[i];
        si += Mi[i];
    }
    CHECK(su == doctest::Approx(si).epsilon(1e-10));
}

TEST_CASE("trial families carry absolute eigenvectors and their maxima") {
    const CuspDomain d = flat_domain(1.0);
    const Mesh m = build_graded_mesh(d, 0.125, 0.25);
    const AssembledForms f = assemble(m, d, WeightSpec{});
    const EigenPairSet pairs = solve_lowest(f.stiffness, f.mass, 4);
    const TrialFamily fam = trial_family_from_pairs(pairs, 3, true);
    CHECK(fam.functions.size() == 6);
    CHECK(fam.names[0] == "abs_eig_0");
    CHECK(fam.names[3] == "max_0_1");
    for (const auto& fn : fam.functions)
        for (double x : fn) CHECK(x >= 0.0);
    for (std::size_t p = 0; p < fam.functions[3].size(); ++p)
        CHECK(fam.functions[3][p] >=
              std::max(fam.functions[0][p], fam.functions[1][p]) - 1e-15);
    CHECK_THROWS_AS((void)trial_family_from_pairs(pairs, 9, false), Error);
}

TEST_CASE("deficit study on the unit square recovers the log trade-off") {
    const CuspDomain d = flat_domain(1.0);
    const Mesh m = build_graded_mesh(d, 1.0 / 24.0, 0.25);
    const AssembledForms f = assemble(m, d, WeightSpec{});
    const AssembledForms fw = assemble(m, d, WeightSpec{WeightSpec::Kind::log_dist_power, 1.0});
    const DeficitForms forms = forms_of(m, f, &fw.weighted_mass);
    const EigenPairSet pairs = solve_lowest(f.stiffness, f.mass, 7);
    const TrialFamily fam = trial_family_from_pairs(pairs, 6, true);

    std::vector<double> eps(13);
    for (int i = 0; i < 13; ++i) eps[i] = std::pow(10.0, -static_cast<double>(i) / 3.0);
    const DeficitStudy study = eta_lower_bound(fam, forms, eps, 2.0, 1.0);

    // At eps = 1 the constant-like ground trial wins with a flat zero; the
    // curve rises as the oscillatory trials take over.
    CHECK(study.eta.value.front() == 0.0);
    CHECK(study.eta.argmax.front() == 0);
    CHECK(study.eta.value.back() > 0.3);
    CHECK(study.eta.value.back() < 0.6);
    CHECK(study.eta.argmax.back() != 0);

    // The plateau of the corrected curve is -int |log d| for the constant,
    // identical across eps while the winner's energy is exactly zero.
    CHECK(study.beta.value[0] == study.beta.value[1]);
    CHECK(std::abs(study.beta.value.front() + 2.15483) < 0.02);
    CHECK(study.beta.value.back() > study.beta.value.front());

    // beta_lb ~ b1 + b2 log(1/eps) with a positive, modest slope.
    CHECK(study.beta_fit.fitted_exponent > 0.01);
    CHECK(study.beta_fit.fitted_exponent < 0.3);
    CHECK(study.beta_fit.c_mult_fit > -2.6);
    CHECK(study.beta_fit.c_mult_fit < -1.9);
    CHECK(study.eta_fit_ok);
    MESSAGE("square: b2 = ", study.beta_fit.fitted_exponent,
            ", eta exponent = ", study.eta_fit.fitted_exponent);
}

TEST_CASE("deficit study on the truncated cusp keeps its assertions and fits") {
    const CuspDomain d(CuspProfile::canonical(1.0, 2.0), 1e-2);
    const Mesh m = build_graded_mesh(d, 0.125, 0.25);
    const AssembledForms f = assemble(m, d, WeightSpec{});
    const AssembledForms fw = assemble(m, d, WeightSpec{WeightSpec::Kind::log_dist_power, 1.0});
    const DeficitForms forms = forms_of(m, f, &fw.weighted_mass);
    const EigenPairSet pairs = solve_lowest(f.stiffness, f.mass, 6);
    TrialFamily fam = trial_family_from_pairs(pairs, 6, true);

    // A smoothed tip indicator joins the family as a localized bump.
    std::vector<double> ind(m.nodes.size(), 0.0);
    for (std::size_t i = 0; i < m.nodes.size(); ++i)
        if (std::abs(m.nodes[i].x) < 0.05) ind[i] = 1.0;
    fam.functions.push_back(smoothed_indicator(forms, ind, 1e-3));
    fam.names.push_back("tip_bump");

    std::vector<double> eps(9);
    for (int i = 0; i < 9; ++i) eps[i] = std::pow(10.0, -static_cast<double>(i) / 2.0);
    const DeficitStudy study = eta_lower_bound(fam, forms, eps, 1.5, 1.0);

    // |Omega| < 1 keeps even the flat trial strictly positive, so the whole
    // grid feeds the power-law fit.
    CHECK(study.eta.value.front() > 0.0);
    CHECK(study.eta_fit_ok);
    CHECK(study.eta_fit.window_count == eps.size());
    CHECK(study.eta_fit.fitted_exponent > 0.0);
    CHECK(study.eta_fit.asserted_exponent == 2.0);
    MESSAGE("cusp: eta exponent = ", study.eta_fit.fitted_exponent,
            " (asserted ", study.eta_fit.asserted_exponent, "), b2 = ",
            study.beta_fit.fitted_exponent);
}

TEST_CASE("deficit study rejects unsorted or nonpositive eps grids") {
    const Mesh m = triangle_mesh(1.0, 1.0);
    const CuspDomain d = flat_domain(2.0);
    const AssembledForms f = assemble(m, d, WeightSpec{});
    const DeficitForms forms = forms_of(m, f);
    TrialFamily fam;
    fam.functions.push_back({1.0, 1.0, 1.0});
    fam.names.push_back("const");
    CHECK_THROWS_AS((void)eta_lower_bound(fam, forms, std::vector<double>{0.1, 1.0}, 2.0, 0.0),
                    Error);
    CHECK_THROWS_AS((void)eta_lower_bound(fam, forms, std::vector<double>{1.0, -0.5}, 2.0, 0.0),
                    Error);
    CHECK_THROWS_AS((void)eta_lower_bound(fam, forms, std::vector<double>{1.0}, 2.0, 0.0),
                    Error);
}

TEST_CASE("the certified hardy constant survives the eps trade-off and a shrunk one fails") {
    const CuspDomain d(CuspProfile::canonical(1.0, 2.0), 1e-2);
    const Mesh m = build_graded_mesh(d, 0.125, 0.25);
    const AssembledForms f = assemble(m, d, WeightSpec{});
    const AssembledForms w1 = assemble(m, d, WeightSpec{WeightSpec::Kind::log_dist_power, 1.0});
    const AssembledForms w2 = assemble(m, d, WeightSpec{WeightSpec::Kind::log_dist_power, 2.0});
    const DeficitForms forms = forms_of(m, f, &w1.weighted_mass);

    // x' W2 x <= b6 x' (K + M) x certified by the smallest pencil eigenvalue.
    auto km = f.stiffness;
    km.add_scaled(f.mass, 1.0);
    const double b6 = 1.0 / cusplab::rayleigh_min(km, w2.weighted_mass);
    MESSAGE("discrete log-weight constant b6 = ", b6);

    const EigenPairSet pairs = solve_lowest(f.stiffness, f.mass, 6);
    const TrialFamily fam = trial_family_from_pairs(pairs, 6, true);
    const std::vector<double> eps{1e6, 1e2, 1.0, 1e-2};
    const auto rep = lemma_eps_check(forms, 2.0, b6, eps, fam);
    CHECK(rep.n_checked == fam.functions.size() * eps.size());
    CHECK(rep.n_violations == 0);
    CHECK(rep.max_rel_excess < 0.0);

    // Cutting the constant must bite: the right side shrinks pointwise.
    const auto half = lemma_eps_check(forms, 2.0, 0.5 * b6, eps, fam);
    CHECK(half.max_rel_excess > rep.max_rel_excess);
    MESSAGE("halved-b6 excess: ", half.max_rel_excess, " (violations ", half.n_violations,
            ")");
}
