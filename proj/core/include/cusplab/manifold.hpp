#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include "cusplab/eigen_solver.hpp"
#include "cusplab/sparse_form.hpp"

namespace cusplab {

// Rotationally invariant surface (u_min, inf) x S^1 carrying the conformal
// metric ds^2 = g(u) (du^2 + dtheta^2) with g(u) = u^-2 (log u)^-alpha.
// Separation in the angle reduces the Laplacian on mode n to the radial
// pencil  -f'' + n^2 f = lambda g f  on (u_min, U_max), which everything
// below discretizes in the stretched coordinate v = log u.

enum class RadialBc { dirichlet, neumann };

struct ManifoldModel {
    double alpha = 1.0;                   // metric exponent, >= 0
    int n_mode = 0;                       // angular mode
    RadialBc bc = RadialBc::neumann;      // condition at u_min
    double u_min = 2.0 * std::numbers::pi;
    double U_max = 1e4;                   // truncation radius; always Dirichlet
    std::size_t n_grid = 0;               // node count; 0 picks the density default
};

// Node count giving kNodesPerDecade points per decade of u. Used whenever
// ManifoldModel::n_grid is zero.
std::size_t default_n_grid(double u_min, double U_max);

// g(alpha, u). Requires u > 1 so log u > 0; alpha >= 0.
double metric_eval(double alpha, double u);

// Riemannian distance from u = u0 to the cusp end, int_u0^inf sqrt(g) du.
// Finite only for alpha > 2, where it equals
// (2/(alpha-2)) (log u0)^(1-alpha/2); alpha <= 2 throws.
double cusp_distance(double alpha, double u0);

// Volume of the metric ball of radius eps centered at the cusp tip.
// The ball is the region beyond eta(eps) with log eta = (kappa eps)^(-1/kappa),
// kappa = (alpha-2)/2, so its volume is 2 pi int_{log eta}^inf e^-v v^-alpha dv.
// quad_value is that integral by adaptive quadrature; the two closed forms
// bracket the small-eps literature around this quantity:
//   asymptotic_tail    = 2 pi (log eta)^-alpha / eta   (leading term of the
//                        tail integral, integration by parts)
//   asymptotic_compact = (log eta) / eta               (same exponential scale
//                        with the power-log prefactor simplified away)
struct BallVolume {
    double eps = 0.0;
    double log_eta = 0.0;
    double quad_value = 0.0;
    double quad_error = 0.0;
    double asymptotic_tail = 0.0;
    double asymptotic_compact = 0.0;
    double ratio_tail = 0.0;      // quad_value / asymptotic_tail
    double ratio_compact = 0.0;   // quad_value / asymptotic_compact
};
// Requires alpha > 2 and 0 < eps < cusp_distance(alpha, u_min): a larger ball
// would reach past the u_min boundary of the surface.
BallVolume ball_volume(double alpha, double eps, double u_min = 2.0 * std::numbers::pi);

struct Point3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

// Isometric embedding of the surface of revolution into R^3: the circle at
// radius u has euclidean radius sqrt(g(u)) and sits at height
// z(u) = int_{u_min}^u sqrt(g - g'^2 / (4g)) dt. Requires |g'| < 2 g on
// [u_min, u], which fails at u_min once alpha exceeds about 19.4; the throw
// names the offending radius.
Point3 embed_r3(double alpha, double u, double theta, double u_min = 2.0 * std::numbers::pi);

// P1 discretization of the radial pencil on a uniform grid in v = log u.
// In v the quadratic forms read
//   stiffness   a(h) = int e^-v h'^2 dv + n^2 int e^v h^2 dv
//   metric_mass b(h) = int e^-v v^-alpha h^2 dv        (L^2(g du) pulled back)
//   hardy_mass  q(h) = int e^-v h^2 dv                 ((log u)^alpha g du;
//                        the v^-alpha factors cancel exactly)
// Forms live on the free nodes only: the U_max node is always removed and the
// u_min node is removed when bc is Dirichlet. Weighted cell integrals use
// 4-point Gauss-Legendre; the stiffness coefficient integrates in closed form.
struct RadialPencil {
    std::vector<double> v_free;   // free nodes, ascending, uniform spacing dv
    double dv = 0.0;
    SparseSymmetricForm stiffness;
    SparseSymmetricForm metric_mass;
    SparseSymmetricForm hardy_mass;
    std::uint64_t grid_hash = 0;
};
// Requires 1 < u_min < U_max, alpha >= 0, and n_grid either 0 (density
// default) or at least 10.
RadialPencil radial_discretize(const ManifoldModel& m);

// Weyl endpoint classification at the cusp end. For lambda = 0 the radial
// equation has the explicit solution pair 1, u on mode 0 and e^{-nu}, e^{nu}
// on mode n >= 1. Each candidate's truncated L^2(g du) norm is accumulated in
// the log domain over U in {1e3, 1e4, 1e5, 1e6}; a candidate counts as square
// integrable when the last relative increment stays below 1%. Exactly one
// integrable candidate per pair means limit point at infinity.
struct EndpointCandidate {
    const char* name = "";
    std::vector<double> log_norm2;   // log int_{u_min}^U f^2 g du per truncation
    double last_rel_change = 0.0;
    bool square_integrable = false;
};
struct EndpointClassification {
    std::vector<double> truncations;
    std::array<EndpointCandidate, 2> candidates;
    bool limit_point = false;
};
EndpointClassification endpoint_classify(const ManifoldModel& m);

// Smallest eigenvalue of stiffness against hardy_mass at the model's bc and
// mode: the best constant q(U) in  int (f'^2 + n^2 f^2) du >= q int f^2
// (log u)^alpha g du  over the truncated interval. Extension by zero makes
// q nonincreasing in U_max. Neither form depends on alpha, so neither does
// the constant; alpha = 0 exhibits it as the lowest pencil eigenvalue itself.
double hardy_manifold_constant(const ManifoldModel& m);

// Rayleigh quotient on [u_min, U] of the explicit trial function
// phi(u) = sqrt(u) - 2 u_min^{1/4} u^{1/4}, which satisfies phi'(u_min) = 0
// and whose quotient tends to 1/4 as U grows. Computed by adaptive
// quadrature; reported alongside the truncated constant for context.
double hardy_test_vector_quotient(double U, double u_min = 2.0 * std::numbers::pi);

// Sup-norm growth of L^2(g du)-normalized eigenfunctions as the truncation
// recedes. For each U the lowest branches of the mode-0 Neumann pencil are
// solved and the requested branch is followed across truncations by maximal
// normalized eigenvector overlap in the metric inner product on the common
// radial window. At alpha = 1 the sup norm of every nonconstant branch grows
// like (log U)^lambda, so the log-log fit of sup against log U should
// reproduce the branch eigenvalue.
struct TruncationSample {
    double U_max = 0.0;
    std::vector<double> values;      // lowest eigenvalues, ascending
    std::vector<double> sup_norms;   // sup |f| per eigenvector, B-normalized
    std::size_t tracked_column = 0;  // column continuing the followed branch
    double overlap = 1.0;            // normalized overlap behind that match
};
struct RadialEigenSolution {
    double alpha = 0.0;
    std::size_t branch = 1;
    std::vector<TruncationSample> samples;
    std::vector<double> lambda_trace;     // followed branch, per truncation
    std::vector<double> sup_norm_trace;
    bool tracking_ok = true;              // every match unambiguous
    double fitted_exponent = std::numeric_limits<double>::quiet_NaN();
    double exponent_rel_dev = std::numeric_limits<double>::quiet_NaN();
    double sup_last_rel_change = std::numeric_limits<double>::quiet_NaN();
    EigenPairSet last;                    // eigenpairs at the largest truncation
};
// Requires 1 <= alpha <= 2, branch in [1, 5], and at least two ascending
// truncations above u_min. n_grid = 0 picks the density default per trunc.
RadialEigenSolution supnorm_trace(double alpha, std::size_t branch,
                                  const std::vector<double>& truncations,
                                  std::size_t n_grid = 0);

}  // namespace cusplab
