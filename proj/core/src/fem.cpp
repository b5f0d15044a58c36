#include "cusplab/fem.hpp"

#include <cmath>

#include "cusplab/eigen_solver.hpp"

namespace cusplab {

AssembledForms assemble(const Mesh& m, const CuspDomain& d, const WeightSpec& w) {
    if (!std::isfinite(w.s) || w.s < 0.0)
        throw Error("assemble: weight exponent must be finite and >= 0");
    const std::size_t n = m.nodes.size();
    AssembledForms out{SparseSymmetricForm(n), SparseSymmetricForm(n), SparseSymmetricForm(n), 0};
    out.stiffness.reserve(m.triangles.size() * 6);
    out.mass.reserve(m.triangles.size() * 6);
    out.weighted_mass.reserve(m.triangles.size() * 6);

    static constexpr double qb[3][3] = {{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0},
                                        {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
                                        {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0}};

    for (const auto& t : m.triangles) {
        const Point2 a = m.nodes[t[0]], b = m.nodes[t[1]], c = m.nodes[t[2]];
        const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
        if (!(det > 0.0)) throw Error("assemble: degenerate or misoriented triangle");
        const double area = 0.5 * det;
        const double gx[3] = {(b.y - c.y) / det, (c.y - a.y) / det, (a.y - b.y) / det};
        const double gy[3] = {(c.x - b.x) / det, (a.x - c.x) / det, (b.x - a.x) / det};

        double wq[3] = {1.0, 1.0, 1.0};
        if (w.kind == WeightSpec::Kind::log_dist_power) {
            for (int q = 0; q < 3; ++q) {
                Point2 pq{qb[q][0] * a.x + qb[q][1] * b.x + qb[q][2] * c.x,
                          qb[q][0] * a.y + qb[q][1] * b.y + qb[q][2] * c.y};
                double dist = d.boundary_distance(pq);
                if (dist == 0.0) {
                    pq.x += 1e-12 * ((a.x + b.x + c.x) / 3.0 - pq.x);
                    pq.y += 1e-12 * ((a.y + b.y + c.y) / 3.0 - pq.y);
                    dist = d.boundary_distance(pq);
                    ++out.boundary_nudges;
                }
                wq[q] = std::pow(std::abs(std::log(std::abs(dist))), w.s);
            }
        }

        for (int i = 0; i < 3; ++i)
            for (int j = i; j < 3; ++j) {
                out.stiffness.accumulate(t[i], t[j], area * (gx[i] * gx[j] + gy[i] * gy[j]));
                out.mass.accumulate(t[i], t[j], area / 12.0 * (i == j ? 2.0 : 1.0));
                double ww = 0.0;
                for (int q = 0; q < 3; ++q) ww += wq[q] * qb[q][i] * qb[q][j];
                out.weighted_mass.accumulate(t[i], t[j], area / 3.0 * ww);
            }
    }
    out.stiffness.compress();
    out.mass.compress();
    out.weighted_mass.compress();
    return out;
}

Hardy2dStudy hardy_constant_2d(const CuspDomain& d, double s, const Hardy2dParams& p) {
    if (p.levels < 1 || p.w_mins.empty())
        throw Error("hardy_constant_2d: need at least one refinement level and one w_min");
    const std::vector<double> wmins =
        d.truncated() ? p.w_mins : std::vector<double>{d.w_min()};

    Hardy2dStudy study;
    for (const double wm : wmins) {
        const CuspDomain dw(d.profile(), wm);
        Mesh mesh = build_graded_mesh(dw, p.h0, p.ratio);
        for (int lvl = 0; lvl < p.levels; ++lvl) {
            if (lvl > 0) mesh = refine_uniform(mesh, dw);
            const AssembledForms f =
                assemble(mesh, dw, WeightSpec{WeightSpec::Kind::log_dist_power, s});
            SparseSymmetricForm a = f.stiffness;
            a.add_scaled(f.mass, 1.0);
            SolverOptions opts;
            opts.tol = p.solver_tol;
            opts.grid_hash = mesh.hash();
            study.rows.push_back(
                {wm, lvl, mesh.grading.h0, mesh.nodes.size(), rayleigh_min(a, f.weighted_mass, opts)});
        }
    }
    study.b_inv_final = study.rows.back().b_inv;
    study.kappa_final = 1.0 / study.b_inv_final;
    return study;
}

}  // namespace cusplab
