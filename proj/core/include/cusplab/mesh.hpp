#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "cusplab/cusp_domain.hpp"

namespace cusplab {

enum class NodeKind : std::uint8_t {
    interior = 0,
    straight = 1,  // base, right edge, stub, or chamfer lid
    wall = 2,      // exactly on the profile graph
};

struct MeshGrading {
    double h0 = 0.0;
    double ratio = 0.0;
    double w_min = 0.0;
    // Mouth wedge is cut off above this height once it is thinner than h0/8;
    // 0 when the build needed no chamfer (flat profiles).
    double chamfer_y = 0.0;
    // Outline vertex count per lobe (or grid row count for flat profiles).
    std::uint32_t n_rows = 0;
    std::uint32_t tip_rows = 0;     // stub subdivisions resolving w_min
    std::uint32_t graded_rows = 0;  // wall outline points spaced finer than h0
};

// Conforming triangle mesh. Triangles are counterclockwise index triples;
// every node lies in the closed domain, wall nodes exactly on the graph.
// A pinched domain gets two mirrored lobes, so the mesh (like the domain)
// is disconnected. After refine_uniform the grading block still describes
// the originating march except h0, which halves per refinement.
struct Mesh {
    std::vector<Point2> nodes;
    std::vector<std::array<std::uint32_t, 3>> triangles;
    std::vector<NodeKind> kinds;
    MeshGrading grading;
    double min_angle_deg = 0.0;

    std::uint64_t hash() const;
};

// Flat profiles get a structured grid over the full base. A tip-truncated
// domain with an invertible profile is meshed by Delaunay refinement of a
// graded boundary outline: outline spacing shrinks geometrically from h0
// down to ratio*w_min approaching the stub, the mouth wedge is chamfered
// once thinner than h0/8 so every outline corner is near a right angle, and
// triangles are split until the 15 degree floor and an h0 size cap hold.
// Element diameter near the tip therefore scales with the local channel
// width. Anything else throws, as does a configuration where fewer than 3
// graded layers fit between w_min and h0 (the offending layer is named).
Mesh build_graded_mesh(const CuspDomain& d, double h0, double ratio);

// Red refinement: each triangle splits into 4 via edge midpoints. Midpoints
// of wall boundary edges are snapped back onto the graph so node containment
// survives where the profile is convex. Conformity and orientation are
// preserved; angles change only by the snap perturbation.
Mesh refine_uniform(const Mesh& m, const CuspDomain& d);

double mesh_min_angle_deg(const Mesh& m);

// Throws Error when orientation, edge conformity, the angle floor, node
// containment in the closed domain, or wall-node placement fails.
void validate_mesh(const Mesh& m, const CuspDomain& d, double min_angle_deg = 15.0);

// "node,x,y,kind" rows followed by "tri,a,b,c" rows, full double precision.
void write_mesh_csv(const Mesh& m, std::ostream& out);

}  // namespace cusplab
