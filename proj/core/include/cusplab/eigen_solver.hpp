#pragma once

#include <cstdint>
#include <vector>

#include "cusplab/sparse_form.hpp"

namespace cusplab {

struct SolveMeta {
    std::uint64_t problem_hash = 0;  // hash of (A, B, k, tol)
    std::uint64_t grid_hash = 0;     // caller-supplied provenance (mesh/grid)
    double tol = 0.0;
    std::uint32_t k = 0;
};

struct EigenPairSet {
    std::size_t dimension = 0;
    std::vector<double> values;                 // ascending
    std::vector<std::vector<double>> vectors;   // B-normalized, sign-fixed
    std::vector<double> sup_norms;              // max_i |v[i]| per vector
    SolveMeta meta;
};

struct SolverOptions {
    double tol = 1e-9;           // B-norm residual of the shift-inverted operator,
                                 // ||(A+shift B)^-1 B v - v/theta||_B <= tol/theta;
                                 // eigenvalues land within about tol*(lambda+shift)
    std::uint64_t seed = 0x5eedcab1u;
    int max_iter = 600;
    double shift = 1.0;          // factorizes A + shift*B; must keep the pencil PD
    int block_extra = 8;         // guard vectors beyond k
    std::uint64_t grid_hash = 0; // recorded in meta
};

// Lowest k eigenpairs of A v = lambda B v with A symmetric positive
// semidefinite and B symmetric positive definite. Shift-invert block
// subspace iteration on a sparse LDLT factorization of A + shift*B;
// deterministic for a fixed seed. Throws Error if B is not positive
// definite or the iteration fails to converge.
EigenPairSet solve_lowest(const SparseSymmetricForm& A, const SparseSymmetricForm& B,
                          std::size_t k, const SolverOptions& opts = {});

// Smallest generalized eigenvalue only.
double rayleigh_min(const SparseSymmetricForm& A, const SparseSymmetricForm& B,
                    const SolverOptions& opts = {});

std::uint64_t problem_hash(const SparseSymmetricForm& A, const SparseSymmetricForm& B,
                           std::size_t k, double tol);

}  // namespace cusplab
