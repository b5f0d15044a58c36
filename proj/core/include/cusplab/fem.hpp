#pragma once

#include <cstddef>
#include <vector>

#include "cusplab/mesh.hpp"
#include "cusplab/sparse_form.hpp"

namespace cusplab {

// Weight for the weighted mass form: 1, or |log d_Gamma(x)|^s.
struct WeightSpec {
    enum class Kind { unit, log_dist_power };
    Kind kind = Kind::unit;
    double s = 0.0;  // exponent, must be finite and >= 0
};

struct AssembledForms {
    SparseSymmetricForm stiffness;      // int grad u . grad v
    SparseSymmetricForm mass;           // int u v, exact closed form
    SparseSymmetricForm weighted_mass;  // int w u v, 3-point interior quadrature
    std::size_t boundary_nudges = 0;    // quadrature points found exactly on the boundary
};

// P1 assembly over a mesh of d. The distance weight is sampled at strictly
// interior quadrature points (barycentric 2/3,1/6,1/6), so d = 0 cannot
// occur for valid triangles; if it does, the point is nudged toward the
// centroid by 1e-12 and counted in boundary_nudges. Cells bulging past a
// convex stretch of the wall can put a point marginally outside the domain;
// the distance magnitude is used there.
AssembledForms assemble(const Mesh& m, const CuspDomain& d, const WeightSpec& w);

struct Hardy2dParams {
    double h0 = 0.125;
    double ratio = 0.25;
    int levels = 3;  // refinement levels per w_min
    std::vector<double> w_mins = {1e-2, 1e-3, 1e-4};
    double solver_tol = 1e-8;
};

struct Hardy2dRow {
    double w_min = 0.0;
    int level = 0;
    double h = 0.0;  // h0 of that level's mesh
    std::size_t n_nodes = 0;
    double b_inv = 0.0;  // min Rayleigh quotient of (K + M, W_s)
};

struct Hardy2dStudy {
    std::vector<Hardy2dRow> rows;
    double b_inv_final = 0.0;  // last w_min, finest level
    double kappa_final = 0.0;  // 1 / b_inv_final
};

// Discrete Hardy constant study: for each tip cutoff in p.w_mins a graded
// mesh is built and refined p.levels times, and b_inv is the smallest
// eigenvalue of (K + M) v = b W_s v. For an untruncated domain the cutoff
// sweep degenerates to the domain's own w_min.
Hardy2dStudy hardy_constant_2d(const CuspDomain& d, double s, const Hardy2dParams& p = {});

}  // namespace cusplab
