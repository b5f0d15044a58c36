#include "cusplab/eigen_solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"

using cusplab::EigenPairSet;
using cusplab::SolverOptions;
using cusplab::SparseSymmetricForm;
using cusplab::solve_lowest;

namespace {

// Independent dense route for small problems.
Eigen::VectorXd dense_spectrum(const SparseSymmetricForm& A, const SparseSymmetricForm& B) {
    const auto n = static_cast<Eigen::Index>(A.dimension());
    Eigen::MatrixXd Ad = Eigen::MatrixXd::Zero(n, n), Bd = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : A.entries()) {
        Ad(e.row, e.col) += e.value;
        if (e.row != e.col) Ad(e.col, e.row) += e.value;
    }
    for (const auto& e : B.entries()) {
        Bd(e.row, e.col) += e.value;
        if (e.row != e.col) Bd(e.col, e.row) += e.value;
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(Ad, Bd);
    return ges.eigenvalues();
}

// 1-D free-endpoint Laplacian on [0,1]: stiffness/mass from linear elements.
void interval_pencil(std::size_t cells, SparseSymmetricForm& K, SparseSymmetricForm& M) {
    const std::size_t n = cells + 1;
    const double h = 1.0 / static_cast<double>(cells);
    K = SparseSymmetricForm(n);
    M = SparseSymmetricForm(n);
    for (std::size_t c = 0; c < cells; ++c) {
        K.accumulate(c, c, 1.0 / h);
        K.accumulate(c + 1, c + 1, 1.0 / h);
        K.accumulate(c, c + 1, -1.0 / h);
        M.accumulate(c, c, h / 3.0);
        M.accumulate(c + 1, c + 1, h / 3.0);
        M.accumulate(c, c + 1, h / 6.0);
    }
    K.compress();
    M.compress();
}

}  // namespace

TEST_CASE("diagonal pencil returns exact lowest pairs") {
    SparseSymmetricForm A(3), B(3);
    A.accumulate(0, 0, 1.0);
    A.accumulate(1, 1, 2.0);
    A.accumulate(2, 2, 3.0);
    for (std::size_t i = 0; i < 3; ++i) B.accumulate(i, i, 1.0);
    A.compress();
    B.compress();
    auto pairs = solve_lowest(A, B, 2);
    REQUIRE(pairs.values.size() == 2);
    CHECK(pairs.values[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(pairs.values[1] == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(pairs.vectors[0][0] == doctest::Approx(1.0));  // B-normalized basis vector
}

TEST_CASE("random pencils match a dense generalized eigensolver") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> val(-1.0, 1.0);
    for (int trial = 0; trial < 6; ++trial) {
        const std::size_t n = 25 + 5 * static_cast<std::size_t>(trial);
        SparseSymmetricForm A(n), B(n);
        // Diagonally dominant PSD stiffness plus positive diagonal mass.
        for (std::size_t i = 0; i < n; ++i) {
            double row = 0.0;
            for (int off = 1; off <= 2; ++off) {
                if (i + off < n) {
                    const double v = val(rng);
                    A.accumulate(i, i + off, v);
                    row += std::abs(v);
                }
            }
            A.accumulate(i, i, row + 2.0 + std::abs(val(rng)));
            B.accumulate(i, i, 0.5 + 0.4 * std::abs(val(rng)));
        }
        A.compress();
        B.compress();
        const auto dense = dense_spectrum(A, B);
        auto pairs = solve_lowest(A, B, 4);
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(pairs.values[j] ==
                  doctest::Approx(dense[static_cast<Eigen::Index>(j)]).epsilon(1e-8));
    }
}

TEST_CASE("free interval spectrum approaches k^2 pi^2") {
    SparseSymmetricForm K, M;
    interval_pencil(200, K, M);
    auto pairs = solve_lowest(K, M, 3);
    CHECK(std::abs(pairs.values[0]) < 1e-8);  // constant mode
    CHECK(pairs.values[1] == doctest::Approx(M_PI * M_PI).epsilon(1e-3));
    CHECK(pairs.values[2] == doctest::Approx(4.0 * M_PI * M_PI).epsilon(1e-3));
}

TEST_CASE("eigenvectors are mass-normalized, sign-fixed, with recorded sup norms") {
    SparseSymmetricForm K, M;
    interval_pencil(64, K, M);
    auto pairs = solve_lowest(K, M, 3);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(M.quadratic(pairs.vectors[j]) == doctest::Approx(1.0).epsilon(1e-9));
        double sup = 0.0, signed_max = 0.0;
        for (double v : pairs.vectors[j]) {
            if (std::abs(v) > sup) {
                sup = std::abs(v);
                signed_max = v;
            }
        }
        CHECK(signed_max > 0.0);
        CHECK(pairs.sup_norms[j] == doctest::Approx(sup));
    }
}

TEST_CASE("identical seeds reproduce bit-identical results") {
    SparseSymmetricForm K, M;
    interval_pencil(80, K, M);
    SolverOptions opts;
    opts.seed = 999;
    auto p1 = solve_lowest(K, M, 2, opts);
    auto p2 = solve_lowest(K, M, 2, opts);
    CHECK(p1.values == p2.values);
    CHECK(p1.vectors == p2.vectors);

    SolverOptions other = opts;
    other.seed = 1000;
    auto p3 = solve_lowest(K, M, 2, other);
    CHECK(p1.values[1] == doctest::Approx(p3.values[1]).epsilon(1e-9));
}

TEST_CASE("eigenvalues are invariant under index permutation") {
    SparseSymmetricForm K, M;
    interval_pencil(60, K, M);
    const std::size_t n = K.dimension();
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(5));
    SparseSymmetricForm Kp(n), Mp(n);
    for (const auto& e : K.entries()) Kp.accumulate(perm[e.row], perm[e.col], e.value);
    for (const auto& e : M.entries()) Mp.accumulate(perm[e.row], perm[e.col], e.value);
    Kp.compress();
    Mp.compress();
    auto a = solve_lowest(K, M, 3);
    auto b = solve_lowest(Kp, Mp, 3);
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(a.values[j] == doctest::Approx(b.values[j]).epsilon(1e-8));
}

TEST_CASE("rayleigh_min lower-bounds random Rayleigh quotients") {
    SparseSymmetricForm K, M;
    interval_pencil(50, K, M);
    const double lam0 = cusplab::rayleigh_min(K, M);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> gauss;
    const std::size_t n = K.dimension();
    for (int t = 0; t < 100; ++t) {
        std::vector<double> x(n);
        for (auto& v : x) v = gauss(rng);
        const double q = K.quadratic(x) / M.quadratic(x);
        CHECK(q >= lam0 - 1e-9);
    }
}

TEST_CASE("indefinite or semidefinite mass is rejected") {
    SparseSymmetricForm A(2), B(2);
    A.accumulate(0, 0, 1.0);
    A.accumulate(1, 1, 1.0);
    B.accumulate(0, 0, 1.0);
    B.accumulate(1, 1, -1.0);
    A.compress();
    B.compress();
    CHECK_THROWS_AS(solve_lowest(A, B, 1), cusplab::Error);

    SparseSymmetricForm Bz(2);
    Bz.accumulate(0, 0, 1.0);
    Bz.compress();  // second diagonal entry absent -> singular
    CHECK_THROWS_AS(solve_lowest(A, Bz, 1), cusplab::Error);
}

TEST_CASE("requesting more pairs than the dimension is rejected") {
    SparseSymmetricForm A(2), B(2);
    A.accumulate(0, 0, 1.0);
    A.accumulate(1, 1, 1.0);
    B.accumulate(0, 0, 1.0);
    B.accumulate(1, 1, 1.0);
    A.compress();
    B.compress();
    CHECK_THROWS_AS(solve_lowest(A, B, 3), cusplab::Error);
    CHECK_THROWS_AS(solve_lowest(A, B, 0), cusplab::Error);
}

TEST_CASE("problem hash folds both operators, count, and tolerance") {
    SparseSymmetricForm A(2), B(2);
    A.accumulate(0, 0, 1.0);
    B.accumulate(0, 0, 1.0);
    B.accumulate(1, 1, 2.0);
    A.compress();
    B.compress();
    const auto h1 = cusplab::problem_hash(A, B, 1, 1e-9);
    CHECK(h1 != cusplab::problem_hash(A, B, 2, 1e-9));
    CHECK(h1 != cusplab::problem_hash(A, B, 1, 1e-8));
    CHECK(h1 != cusplab::problem_hash(B, A, 1, 1e-9));
}
