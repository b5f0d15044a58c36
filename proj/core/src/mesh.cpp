#include "cusplab/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace cusplab {

namespace {

constexpr double kAngleFloorDeg = 15.0;

double tri_min_angle(const Point2& a, const Point2& b, const Point2& c) {
    auto angle = [](double x1, double y1, double x2, double y2) {
        const double n1 = std::hypot(x1, y1), n2 = std::hypot(x2, y2);
        if (n1 == 0.0 || n2 == 0.0) return 0.0;
        return std::acos(std::clamp((x1 * x2 + y1 * y2) / (n1 * n2), -1.0, 1.0));
    };
    const double aa = angle(b.x - a.x, b.y - a.y, c.x - a.x, c.y - a.y);
    const double ab = angle(a.x - b.x, a.y - b.y, c.x - b.x, c.y - b.y);
    const double ac = std::numbers::pi - aa - ab;
    return std::min({aa, ab, ac}) * 180.0 / std::numbers::pi;
}

double orient2(const Point2& a, const Point2& b, const Point2& c) {
    return (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
}

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
    if (a > b) std::swap(a, b);
    return (std::uint64_t(a) << 32) | b;
}

std::uint32_t add_node(Mesh& m, Point2 p, NodeKind k) {
    m.nodes.push_back(p);
    m.kinds.push_back(k);
    return std::uint32_t(m.nodes.size() - 1);
}

// Delaunay refinement (Ruppert) working set for one lobe. The boundary
// polyline is held as constrained subsegments whose diametral circles stay
// empty; interior quality is driven to the 15 degree floor with a
// circumradius cap, which terminates because every input corner after the
// mouth chamfer is close to a right angle.
struct Refiner {
    struct Tri {
        std::array<int, 3> v{};   // CCW
        std::array<int, 3> n{};   // neighbor opposite v[i], -1 on hull
        bool alive = false;
        int stamp = 0;  // creation id; dead slots get reused
    };
    struct Seg {
        int a = 0, b = 0;
        bool wall = false;
    };

    const CuspProfile* prof = nullptr;
    bool curved_wall = false;  // snap wall splits onto the graph
    std::vector<Point2> pts;
    std::vector<NodeKind> kind;
    std::vector<Tri> tris;
    std::vector<Seg> segs;
    std::unordered_map<std::uint64_t, std::size_t> segmap;
    int last_tri = 0;
    int stamp_counter = 0;
    double inside_xlo = 0.0, inside_xhi = 0.5;
    double inside_ytop = 1e300;  // mouth chamfer height

    double gval(double x) const { return prof->eval(std::min(std::abs(x), 0.5)); }

    bool inside_domain(Point2 p) const {
        if (p.y <= 0.0 || p.y >= inside_ytop || p.x <= inside_xlo || p.x >= inside_xhi)
            return false;
        return p.y < gval(p.x);
    }

    int add_pt(Point2 p, NodeKind k) {
        pts.push_back(p);
        kind.push_back(k);
        return int(pts.size()) - 1;
    }

    int make_tri(int a, int b, int c) {
        tris.push_back({{a, b, c}, {-1, -1, -1}, true, ++stamp_counter});
        return int(tris.size()) - 1;
    }

    bool in_circumcircle(const Tri& t, Point2 p) const {
        const Point2 &a = pts[t.v[0]], &b = pts[t.v[1]], &c = pts[t.v[2]];
        const double ax = a.x - p.x, ay = a.y - p.y;
        const double bx = b.x - p.x, by = b.y - p.y;
        const double cx = c.x - p.x, cy = c.y - p.y;
        const double det = (ax * ax + ay * ay) * (bx * cy - cx * by) -
                           (bx * bx + by * by) * (ax * cy - cx * ay) +
                           (cx * cx + cy * cy) * (ax * by - bx * ay);
        return det > 0.0;
    }

    int locate(Point2 p) const {
        int cur = last_tri;
        if (cur < 0 || cur >= int(tris.size()) || !tris[cur].alive) {
            cur = -1;
            for (int i = int(tris.size()) - 1; i >= 0; --i)
                if (tris[i].alive) {
                    cur = i;
                    break;
                }
        }
        for (int step = 0; step < 20000 && cur >= 0; ++step) {
            const Tri& t = tris[cur];
            int next = -1;
            for (int e = 0; e < 3; ++e) {
                const Point2 &u = pts[t.v[(e + 1) % 3]], &v = pts[t.v[(e + 2) % 3]];
                if (orient2(u, v, p) < 0.0) {
                    next = t.n[e];
                    break;
                }
            }
            if (next < 0) return cur;
            cur = next;
        }
        for (int i = 0; i < int(tris.size()); ++i) {
            if (!tris[i].alive) continue;
            const Tri& t = tris[i];
            bool ok = true;
            for (int e = 0; e < 3 && ok; ++e)
                ok = orient2(pts[t.v[(e + 1) % 3]], pts[t.v[(e + 2) % 3]], p) >= 0.0;
            if (ok) return i;
        }
        throw Error("mesh refinement: point location failed");
    }

    // Bowyer-Watson insertion; returns the new vertex index or an existing
    // one when p coincides with it. New triangle indices are appended to
    // fresh so quality checks can pick them up.
    int insert(Point2 p, NodeKind k, std::vector<int>* fresh) {
        const int t0 = locate(p);
        for (int vi : tris[t0].v) {
            const Point2 q = pts[vi];
            if (std::abs(q.x - p.x) <= 1e-14 && std::abs(q.y - p.y) <= 1e-14) return vi;
        }
        // grow cavity
        std::vector<int> cavity{t0};
        std::vector<char> in_cavity(tris.size(), 0);
        in_cavity[t0] = 1;
        for (std::size_t head = 0; head < cavity.size(); ++head) {
            const Tri t = tris[cavity[head]];
            for (int e = 0; e < 3; ++e) {
                const int nb = t.n[e];
                if (nb < 0 || in_cavity[nb]) continue;
                if (in_circumcircle(tris[nb], p)) {
                    in_cavity[nb] = 1;
                    cavity.push_back(nb);
                }
            }
        }
        // collect directed boundary edges (u, v) with outer neighbor; expand
        // the cavity when p is (numerically) on a boundary edge.
        struct BEdge {
            int u, v, outer;
        };
        std::vector<BEdge> boundary;
        for (bool again = true; again;) {
            again = false;
            boundary.clear();
            for (const int ti : cavity) {
                const Tri& t = tris[ti];
                for (int e = 0; e < 3; ++e) {
                    const int nb = t.n[e];
                    if (nb >= 0 && in_cavity[nb]) continue;
                    const int u = t.v[(e + 1) % 3], v = t.v[(e + 2) % 3];
                    const double det = orient2(pts[u], pts[v], p);
                    const double span = std::hypot(pts[v].x - pts[u].x, pts[v].y - pts[u].y) *
                                        (std::hypot(p.x - pts[u].x, p.y - pts[u].y) + 1e-300);
                    if (det <= 1e-14 * span) {
                        if (nb < 0) return -1;  // degenerate against the hull: reject
                        in_cavity[nb] = 1;
                        cavity.push_back(nb);
                        again = true;
                        break;
                    }
                    boundary.push_back({u, v, nb});
                }
                if (again) break;
            }
        }
        const int pi = add_pt(p, k);
        std::unordered_map<std::uint64_t, int> half;
        half.reserve(boundary.size() * 2);
        std::vector<int> created;
        created.reserve(boundary.size());
        std::size_t reuse = 0;
        for (const BEdge& be : boundary) {
            int ti;
            if (reuse < cavity.size()) {
                ti = cavity[reuse++];
                tris[ti] = {{be.u, be.v, pi}, {-1, -1, -1}, true, ++stamp_counter};
            } else {
                ti = make_tri(be.u, be.v, pi);
            }
            created.push_back(ti);
            // outer adjacency
            tris[ti].n[2] = be.outer;
            if (be.outer >= 0) {
                Tri& o = tris[be.outer];
                for (int e = 0; e < 3; ++e) {
                    const int ou = o.v[(e + 1) % 3], ov = o.v[(e + 2) % 3];
                    if ((ou == be.v && ov == be.u) || (ou == be.u && ov == be.v)) o.n[e] = ti;
                }
            }
        }
        for (std::size_t i = reuse; i < cavity.size(); ++i) tris[cavity[i]].alive = false;
        // stitch fan neighbors through the shared edges at p
        for (const int ti : created) {
            Tri& t = tris[ti];
            for (int e = 0; e < 3; ++e) {
                if (t.n[e] >= 0) continue;
                const int u = t.v[(e + 1) % 3], v = t.v[(e + 2) % 3];
                const std::uint64_t key = edge_key(std::uint32_t(u), std::uint32_t(v));
                auto it = half.find(key);
                if (it == half.end()) {
                    half.emplace(key, ti);
                } else {
                    const int other = it->second;
                    t.n[e] = other;
                    Tri& o = tris[other];
                    for (int oe = 0; oe < 3; ++oe) {
                        const int ou = o.v[(oe + 1) % 3], ov = o.v[(oe + 2) % 3];
                        if ((ou == v && ov == u) || (ou == u && ov == v)) o.n[oe] = ti;
                    }
                }
            }
        }
        if (!created.empty()) last_tri = created.back();
        if (fresh)
            for (const int ti : created) fresh->push_back(ti);
        return pi;
    }

    bool encroached(const Seg& s, Point2 p) const {
        const Point2 a = pts[s.a], b = pts[s.b];
        const double mx = 0.5 * (a.x + b.x), my = 0.5 * (a.y + b.y);
        const double r2 = 0.25 * ((b.x - a.x) * (b.x - a.x) + (b.y - a.y) * (b.y - a.y));
        const double d2 = (p.x - mx) * (p.x - mx) + (p.y - my) * (p.y - my);
        return d2 < r2 * (1.0 - 1e-12);
    }

    Point2 seg_split_point(const Seg& s) const {
        const Point2 a = pts[s.a], b = pts[s.b];
        Point2 m{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
        if (s.wall && curved_wall) {
            // project onto the graph; the wall is y-major everywhere here
            if (std::abs(b.y - a.y) >= std::abs(b.x - a.x)) {
                const double sign = a.x < 0.0 || b.x < 0.0 ? -1.0 : 1.0;
                m.x = sign * prof->inverse(m.y);
            } else {
                m.y = gval(m.x);
            }
        }
        return m;
    }

    void seg_push(Seg s) {
        segmap[edge_key(std::uint32_t(s.a), std::uint32_t(s.b))] = segs.size();
        segs.push_back(s);
    }

    // Splits segment si, re-queueing follow-up work; returns new vertex.
    int split_segment(std::size_t si, std::vector<int>* fresh, std::deque<std::size_t>* seg_queue) {
        const Seg s = segs[si];
        const Point2 m = seg_split_point(s);
        const int vi = insert(m, s.wall ? NodeKind::wall : NodeKind::straight, fresh);
        if (vi < 0 || vi == s.a || vi == s.b) return -1;
        segmap.erase(edge_key(std::uint32_t(s.a), std::uint32_t(s.b)));
        segs[si] = {s.a, vi, s.wall};
        segmap[edge_key(std::uint32_t(s.a), std::uint32_t(vi))] = si;
        seg_push({vi, s.b, s.wall});
        // either half may now be encroached by existing vertices, and the
        // projected split point may encroach unrelated segments
        for (const std::size_t sj : {si, segs.size() - 1}) {
            const Seg& t = segs[sj];
            for (int q = 3; q < int(pts.size()); ++q) {
                if (q == t.a || q == t.b) continue;
                if (encroached(t, pts[q])) {
                    seg_queue->push_back(sj);
                    break;
                }
            }
        }
        for (std::size_t sj = 0; sj < segs.size(); ++sj) {
            if (sj == si || sj == segs.size() - 1) continue;
            if (segs[sj].a != vi && segs[sj].b != vi && encroached(segs[sj], pts[vi]))
                seg_queue->push_back(sj);
        }
        return vi;
    }
};

struct LoopPoint {
    Point2 p;
    NodeKind k;
    bool wall_edge_to_next = false;
};

}  // namespace

double mesh_min_angle_deg(const Mesh& m) {
    double worst = 180.0;
    for (const auto& t : m.triangles)
        worst = std::min(worst, tri_min_angle(m.nodes[t[0]], m.nodes[t[1]], m.nodes[t[2]]));
    return worst;
}

Mesh build_graded_mesh(const CuspDomain& d, double h0, double ratio) {
    const CuspProfile& prof = d.profile();
    const double top = d.max_height();
    if (!(h0 > 0.0) || !(h0 < std::hypot(1.0, top)))
        throw Error("build_graded_mesh: h0 must lie in (0, domain diameter)");
    if (!(ratio > 0.0) || !(ratio < 1.0))
        throw Error("build_graded_mesh: grading ratio must lie in (0, 1)");

    Mesh m;
    m.grading.h0 = h0;
    m.grading.ratio = ratio;
    m.grading.w_min = d.w_min();

    const auto& ys = prof.sample_y();
    const bool flat = !prof.is_canonical() && !ys.empty() &&
                      std::all_of(ys.begin(), ys.end(), [&](double v) { return v == ys.front(); });

    if (flat) {
        const int ny = std::max(1, int(std::ceil(top / h0 - 1e-9)));
        const int nx = std::max(1, int(std::ceil(1.0 / h0 - 1e-9)));
        std::vector<std::vector<std::uint32_t>> rows;
        for (int j = 0; j <= ny; ++j) {
            std::vector<std::uint32_t> row;
            for (int i = 0; i <= nx; ++i) {
                NodeKind k = NodeKind::interior;
                if (i == 0 || i == nx || j == 0)
                    k = NodeKind::straight;
                else if (j == ny)
                    k = NodeKind::wall;
                row.push_back(add_node(m, {-0.5 + double(i) / nx, top * j / ny}, k));
            }
            rows.push_back(std::move(row));
        }
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const auto &lo = rows[j], &up = rows[j + 1];
                m.triangles.push_back({lo[i], lo[i + 1], up[i]});
                m.triangles.push_back({lo[i + 1], up[i + 1], up[i]});
            }
        m.grading.n_rows = std::uint32_t(ny + 1);
        m.min_angle_deg = mesh_min_angle_deg(m);
        return m;
    }

    if (!d.truncated())
        throw Error("build_graded_mesh: only flat profiles and tip-truncated domains are meshable; "
                    "this profile pinches nowhere below w_min");
    if (!prof.invertible())
        throw Error("build_graded_mesh: a pinched profile must be invertible to trace the wall");

    const double w_min = d.w_min();
    const double x_cut = d.tip_cut();
    {
        // The geometric band between w_min scale and h0 must hold >= 3 layers.
        int layers = 0;
        double y = w_min;
        while (y < top && ratio * y < h0 * 0.999 && layers <= 3) {
            y += ratio * y;
            ++layers;
        }
        if (layers < 3) {
            std::ostringstream os;
            os << "build_graded_mesh: only " << layers << " graded layers fit between w_min="
               << w_min << " and h0=" << h0 << "; layer " << layers + 1 << " near height " << y
               << " already leaves the graded band (lower w_min or shrink h0/ratio)";
            throw Error(os.str());
        }
    }

    // Mouth chamfer height: cut the wedge once it is thinner than h0/8, so
    // every polyline corner is near a right angle.
    double y_cham;
    {
        double lo = w_min * (1.0 + 1e-12), hi = top * (1.0 - 1e-12);
        if (0.5 - prof.inverse(lo) <= h0 / 8.0)
            throw Error("build_graded_mesh: mouth wedge already thinner than h0/8 at w_min");
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (0.5 - prof.inverse(mid) > h0 / 8.0 ? lo : hi) = mid;
        }
        y_cham = lo;
    }
    m.grading.chamfer_y = y_cham;

    // Target spacing: w_min scale at the stub, growing with the distance
    // from the tip at the given ratio, capped by h0.
    const double dmin = ratio * w_min;
    auto spacing = [&](Point2 p) {
        const double rho = std::hypot(p.x - x_cut, p.y - w_min);
        return std::clamp(ratio * (w_min + rho), dmin, h0);
    };

    // Closed CCW lobe outline: bottom, right edge, chamfer lid, wall, stub.
    std::vector<LoopPoint> loop;
    {
        // bottom, left to right
        double x = x_cut;
        while (true) {
            loop.push_back({{x, 0.0}, NodeKind::straight, false});
            const double step = 0.8 * spacing({x, 0.0});
            if (x + 1.45 * step >= 0.5) break;
            x += step;
        }
        // right edge, chamfer corner included
        const int ne = std::max(1, int(std::ceil(y_cham / (0.8 * h0) - 1e-9)));
        for (int j = 0; j <= ne; ++j) loop.push_back({{0.5, y_cham * j / ne}, NodeKind::straight, false});
        // wall, top down to the stub corner; sampled profiles contribute
        // their kinks so every wall subsegment is straight in the input
        std::vector<double> wy{y_cham};
        double yw = y_cham;
        while (true) {
            const double step = 0.7 * spacing({prof.inverse(yw), yw});
            const double yn = yw - step;
            if (yn <= w_min * (1.0 + 1e-9) + dmin * 0.2) break;
            wy.push_back(yn);
            yw = yn;
        }
        if (!prof.is_canonical())
            for (std::size_t i = 0; i + 1 < prof.sample_x().size(); ++i) {
                const double sy = prof.sample_y()[i];
                if (sy > w_min * (1.0 + 1e-9) && sy < y_cham * (1.0 - 1e-12)) wy.push_back(sy);
            }
        std::sort(wy.begin(), wy.end(), std::greater<>());
        wy.erase(std::unique(wy.begin(), wy.end(),
                             [&](double a, double b) { return a - b < 1e-3 * dmin; }),
                 wy.end());
        for (const double y : wy) loop.push_back({{prof.inverse(y), y}, NodeKind::wall, true});
        loop.back().wall_edge_to_next = true;  // edge down to the stub corner
        loop.push_back({{x_cut, w_min}, NodeKind::wall, false});
        // stub, downward (closing edge back to the first bottom point)
        const int ns = std::max(3, int(std::ceil(1.0 / ratio - 1e-9)));
        m.grading.tip_rows = std::uint32_t(ns);
        for (int j = 1; j < ns; ++j)
            loop.push_back({{x_cut, w_min * (ns - j) / ns}, NodeKind::straight, false});
    }
    m.grading.n_rows = std::uint32_t(loop.size());
    {
        std::uint32_t graded = 0;
        for (const auto& lp : loop)
            if (lp.k == NodeKind::wall && spacing(lp.p) < h0 * 0.999) ++graded;
        m.grading.graded_rows = graded;
    }

    // Refine one lobe between the hull box and the constrained outline.
    Refiner R;
    R.prof = &prof;
    R.curved_wall = prof.is_canonical();
    R.inside_xlo = x_cut;
    R.inside_ytop = y_cham;
    const int s0 = R.add_pt({-40.0, -30.0}, NodeKind::interior);
    const int s1 = R.add_pt({40.0, -30.0}, NodeKind::interior);
    const int s2 = R.add_pt({0.0, 60.0}, NodeKind::interior);
    R.make_tri(s0, s1, s2);

    std::vector<int> loop_idx(loop.size());
    for (std::size_t i = 0; i < loop.size(); ++i) {
        const int vi = R.insert(loop[i].p, loop[i].k, nullptr);
        if (vi < 0) throw Error("build_graded_mesh: failed to insert outline vertex");
        loop_idx[i] = vi;
    }
    for (std::size_t i = 0; i < loop.size(); ++i) {
        const std::size_t j = (i + 1) % loop.size();
        const bool wall = (loop[i].k == NodeKind::wall && loop[j].k == NodeKind::wall) ||
                          loop[i].wall_edge_to_next;
        R.seg_push({loop_idx[i], loop_idx[j], wall});
    }

    std::deque<std::size_t> seg_queue;
    for (std::size_t si = 0; si < R.segs.size(); ++si)
        for (int q = 3; q < int(R.pts.size()); ++q) {
            if (q == R.segs[si].a || q == R.segs[si].b) continue;
            if (R.encroached(R.segs[si], R.pts[q])) {
                seg_queue.push_back(si);
                break;
            }
        }

    auto drain_segments = [&](std::vector<int>* fresh) {
        while (!seg_queue.empty()) {
            const std::size_t si = seg_queue.front();
            seg_queue.pop_front();
            bool enc = false;
            for (int q = 3; q < int(R.pts.size()) && !enc; ++q) {
                if (q == R.segs[si].a || q == R.segs[si].b) continue;
                enc = R.encroached(R.segs[si], R.pts[q]);
            }
            if (!enc) continue;
            R.split_segment(si, fresh, &seg_queue);
            if (R.pts.size() > 400000) throw Error("build_graded_mesh: refinement budget exceeded");
        }
    };

    std::vector<int> fresh;
    drain_segments(&fresh);

    // Interior quality: the angle floor plus a circumradius cap resolving the
    // bulk at the h0 scale. Deciding which triangles count as interior is the
    // caller's job (the peel flood), not a centroid test: wall chords of the
    // convex part of the graph bulge slightly past the curve, so point-in-curve
    // tests misclassify slivers on both sides of those chords.
    auto tri_bad = [&](const Refiner::Tri& t) {
        const Point2 &a = R.pts[t.v[0]], &b = R.pts[t.v[1]], &c = R.pts[t.v[2]];
        if (tri_min_angle(a, b, c) < kAngleFloorDeg) return true;
        const double la = std::hypot(b.x - c.x, b.y - c.y);
        const double lb = std::hypot(a.x - c.x, a.y - c.y);
        const double lc = std::hypot(a.x - b.x, a.y - b.y);
        const double s4 = 2.0 * std::abs(orient2(a, b, c));
        return la * lb * lc / std::max(s4, 1e-300) > 0.6 * h0;
    };
    auto circumcenter = [&](const Refiner::Tri& t) {
        const Point2 &a = R.pts[t.v[0]], &b = R.pts[t.v[1]], &c = R.pts[t.v[2]];
        const double d2 = 2.0 * orient2(a, b, c);
        const double a2 = a.x * a.x + a.y * a.y;
        const double b2 = b.x * b.x + b.y * b.y;
        const double c2 = c.x * c.x + c.y * c.y;
        return Point2{(a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d2,
                      (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d2};
    };

    // Attempt to place p; on encroachment the offending segments are split
    // instead (classical Ruppert deferral; the rejected point itself is the
    // witness that their diametral circles are not empty). Returns whether any
    // vertex was actually added.
    auto try_insert = [&](Point2 p, std::vector<int>* out) {
        std::vector<std::size_t> enc;
        for (std::size_t si = 0; si < R.segs.size(); ++si)
            if (R.encroached(R.segs[si], p)) enc.push_back(si);
        if (!enc.empty()) {
            const std::size_t before = R.pts.size();
            for (const std::size_t si : enc) R.split_segment(si, out, &seg_queue);
            drain_segments(out);
            return R.pts.size() > before;
        }
        if (!R.inside_domain(p)) return false;
        const int before = int(R.pts.size());
        return R.insert(p, NodeKind::interior, out) >= before;
    };

    // Peel classification: flood from the hull through unconstrained edges.
    auto flood_outside = [&]() {
        std::vector<char> outside(R.tris.size(), 0);
        std::deque<int> flood;
        for (int ti = 0; ti < int(R.tris.size()); ++ti) {
            if (!R.tris[ti].alive) continue;
            const auto& v = R.tris[ti].v;
            if (v[0] <= s2 || v[1] <= s2 || v[2] <= s2) {
                outside[ti] = 1;
                flood.push_back(ti);
            }
        }
        while (!flood.empty()) {
            const int ti = flood.front();
            flood.pop_front();
            const Refiner::Tri& t = R.tris[ti];
            for (int e = 0; e < 3; ++e) {
                const int nb = t.n[e];
                if (nb < 0 || !R.tris[nb].alive || outside[nb]) continue;
                const std::uint32_t u = std::uint32_t(t.v[(e + 1) % 3]);
                const std::uint32_t v = std::uint32_t(t.v[(e + 2) % 3]);
                if (R.segmap.count(edge_key(u, v))) continue;
                outside[nb] = 1;
                flood.push_back(nb);
            }
        }
        return outside;
    };

    auto seg_dist2 = [&](const Refiner::Seg& s, Point2 p) {
        const Point2 a = R.pts[s.a], b = R.pts[s.b];
        const double dx = b.x - a.x, dy = b.y - a.y;
        const double l2 = dx * dx + dy * dy;
        const double u =
            l2 > 0.0 ? std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / l2, 0.0, 1.0) : 0.0;
        const double qx = a.x + u * dx - p.x, qy = a.y + u * dy - p.y;
        return qx * qx + qy * qy;
    };

    // Quality passes. Each pass classifies triangles with the peel flood and
    // gives every bad interior one exactly one treatment; whatever gets
    // created waits for the next pass. Exterior caps hugging the boundary
    // from the far side of a wall chord are never refined (their angles only
    // shrink under splitting); they are peeled at the end. A pass that cannot
    // add a single vertex has done all it can, and the angle floor check
    // below has the last word.
    for (int pass = 0;; ++pass) {
        if (pass >= 400) throw Error("build_graded_mesh: quality refinement did not converge");
        const std::vector<char> outs = flood_outside();
        std::vector<std::pair<int, int>> bad;  // triangle index, creation stamp
        for (int ti = 0; ti < int(R.tris.size()); ++ti)
            if (R.tris[ti].alive && !outs[ti] && tri_bad(R.tris[ti]))
                bad.push_back({ti, R.tris[ti].stamp});
        if (bad.empty()) break;
        const std::size_t pts_before = R.pts.size();
        for (const auto& [ti, stamp] : bad) {
            if (!R.tris[ti].alive || R.tris[ti].stamp != stamp) continue;
            fresh.clear();
            if (!try_insert(circumcenter(R.tris[ti]), &fresh) && R.tris[ti].alive &&
                R.tris[ti].stamp == stamp) {
                // circumcenter unusable: split a constrained edge of the
                // triangle (curved-boundary sliver), else try the longest
                // edge, else split the nearest segment for a sliver that
                // rides a wall chord without owning it
                const Refiner::Tri t = R.tris[ti];
                std::size_t best_seg = SIZE_MAX;
                double best_len = -1.0;
                for (int e = 0; e < 3; ++e) {
                    const int u = t.v[(e + 1) % 3], v = t.v[(e + 2) % 3];
                    auto it = R.segmap.find(edge_key(std::uint32_t(u), std::uint32_t(v)));
                    if (it == R.segmap.end()) continue;
                    const double len =
                        std::hypot(R.pts[u].x - R.pts[v].x, R.pts[u].y - R.pts[v].y);
                    if (len > best_len) {
                        best_len = len;
                        best_seg = it->second;
                    }
                }
                if (best_seg == SIZE_MAX) {
                    int lu = -1, lv = -1;
                    double llen = -1.0;
                    for (int e = 0; e < 3; ++e) {
                        const int u = t.v[(e + 1) % 3], v = t.v[(e + 2) % 3];
                        const double len =
                            std::hypot(R.pts[u].x - R.pts[v].x, R.pts[u].y - R.pts[v].y);
                        if (len > llen) {
                            llen = len;
                            lu = u;
                            lv = v;
                        }
                    }
                    if (!try_insert({0.5 * (R.pts[lu].x + R.pts[lv].x),
                                     0.5 * (R.pts[lu].y + R.pts[lv].y)},
                                    &fresh)) {
                        const Point2 cen{
                            (R.pts[t.v[0]].x + R.pts[t.v[1]].x + R.pts[t.v[2]].x) / 3.0,
                            (R.pts[t.v[0]].y + R.pts[t.v[1]].y + R.pts[t.v[2]].y) / 3.0};
                        double best_d = 1e300;
                        for (std::size_t si = 0; si < R.segs.size(); ++si) {
                            const double d2 = seg_dist2(R.segs[si], cen);
                            if (d2 < best_d) {
                                best_d = d2;
                                best_seg = si;
                            }
                        }
                    }
                }
                if (best_seg != SIZE_MAX) {
                    R.split_segment(best_seg, &fresh, &seg_queue);
                    drain_segments(&fresh);
                }
            }
            if (R.pts.size() > 400000)
                throw Error("build_graded_mesh: refinement budget exceeded");
        }
        if (R.pts.size() == pts_before) break;
    }
    const std::vector<char> outside = flood_outside();

    // Emit the lobe, then its mirror image.
    std::vector<int> remap(R.pts.size(), -1);
    std::vector<std::array<std::uint32_t, 3>> lobe;
    for (int ti = 0; ti < int(R.tris.size()); ++ti) {
        if (!R.tris[ti].alive || outside[ti]) continue;
        std::array<std::uint32_t, 3> tv{};
        for (int e = 0; e < 3; ++e) {
            const int v = R.tris[ti].v[e];
            if (remap[v] < 0) remap[v] = int(add_node(m, R.pts[v], R.kind[v]));
            tv[e] = std::uint32_t(remap[v]);
        }
        lobe.push_back(tv);
    }
    if (lobe.empty()) throw Error("build_graded_mesh: refinement produced no interior triangles");
    m.triangles = lobe;
    const std::size_t n0 = m.nodes.size(), t0 = m.triangles.size();
    for (std::size_t i = 0; i < n0; ++i) {
        m.nodes.push_back({-m.nodes[i].x, m.nodes[i].y});
        m.kinds.push_back(m.kinds[i]);
    }
    for (std::size_t t = 0; t < t0; ++t) {
        const auto tr = m.triangles[t];
        m.triangles.push_back(
            {std::uint32_t(tr[0] + n0), std::uint32_t(tr[2] + n0), std::uint32_t(tr[1] + n0)});
    }

    m.min_angle_deg = mesh_min_angle_deg(m);
    if (m.min_angle_deg < kAngleFloorDeg - 1e-9) {
        std::ostringstream os;
        os << "build_graded_mesh: refinement stopped at min angle " << m.min_angle_deg
           << " deg, below the 15 deg floor";
        throw Error(os.str());
    }
    return m;
}

Mesh refine_uniform(const Mesh& m, const CuspDomain& d) {
    std::unordered_map<std::uint64_t, int> ecount;
    for (const auto& t : m.triangles)
        for (int e = 0; e < 3; ++e) ++ecount[edge_key(t[e], t[(e + 1) % 3])];

    Mesh r;
    r.nodes = m.nodes;
    r.kinds = m.kinds;
    r.grading = m.grading;
    r.grading.h0 *= 0.5;

    std::unordered_map<std::uint64_t, std::uint32_t> mid;
    mid.reserve(ecount.size());
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
        const std::uint64_t key = edge_key(a, b);
        if (auto it = mid.find(key); it != mid.end()) return it->second;
        const Point2 pa = m.nodes[a], pb = m.nodes[b];
        Point2 pm{0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y)};
        NodeKind kind = NodeKind::interior;
        if (ecount.at(key) == 1) {
            if (m.kinds[a] == NodeKind::wall && m.kinds[b] == NodeKind::wall) {
                pm.y = d.profile().eval(pm.x);
                kind = NodeKind::wall;
            } else {
                kind = NodeKind::straight;
            }
        }
        const std::uint32_t idx = add_node(r, pm, kind);
        mid.emplace(key, idx);
        return idx;
    };

    r.triangles.reserve(m.triangles.size() * 4);
    for (const auto& t : m.triangles) {
        const std::uint32_t ab = midpoint(t[0], t[1]);
        const std::uint32_t bc = midpoint(t[1], t[2]);
        const std::uint32_t ca = midpoint(t[2], t[0]);
        r.triangles.push_back({t[0], ab, ca});
        r.triangles.push_back({ab, t[1], bc});
        r.triangles.push_back({ca, bc, t[2]});
        r.triangles.push_back({ab, bc, ca});
    }
    r.min_angle_deg = mesh_min_angle_deg(r);
    return r;
}

void validate_mesh(const Mesh& m, const CuspDomain& d, double min_angle_deg) {
    if (m.nodes.size() != m.kinds.size()) throw Error("validate_mesh: node/kind size mismatch");
    std::unordered_map<std::uint64_t, int> ecount;
    for (const auto& t : m.triangles) {
        if (t[0] >= m.nodes.size() || t[1] >= m.nodes.size() || t[2] >= m.nodes.size())
            throw Error("validate_mesh: triangle index out of range");
        if (!(orient2(m.nodes[t[0]], m.nodes[t[1]], m.nodes[t[2]]) > 0.0))
            throw Error("validate_mesh: triangle with nonpositive orientation");
        for (int e = 0; e < 3; ++e) ++ecount[edge_key(t[e], t[(e + 1) % 3])];
    }
    for (const auto& [key, cnt] : ecount)
        if (cnt > 2) throw Error("validate_mesh: edge shared by more than two triangles");

    const double ang = mesh_min_angle_deg(m);
    if (ang < min_angle_deg - 1e-9) {
        std::ostringstream os;
        os << "validate_mesh: min angle " << ang << " deg below floor " << min_angle_deg;
        throw Error(os.str());
    }

    const double top = d.max_height();
    for (std::size_t i = 0; i < m.nodes.size(); ++i) {
        const Point2 p = m.nodes[i];
        const double ax = std::abs(p.x);
        if (ax > 0.5 + 1e-12 || p.y < -1e-12 || p.y > top * (1.0 + 1e-9))
            throw Error("validate_mesh: node outside the bounding box of the domain");
        const double g = d.profile().eval(std::min(ax, 0.5));
        if (p.y > g + 1e-9 * (1.0 + g))
            throw Error("validate_mesh: node above the profile graph");
        if (d.truncated() && ax < d.tip_cut() * (1.0 - 1e-12))
            throw Error("validate_mesh: node inside the truncated tip region");
        if (m.kinds[i] == NodeKind::wall && std::abs(p.y - g) > 1e-9 * (1.0 + g))
            throw Error("validate_mesh: wall node off the profile graph");
    }
}

void write_mesh_csv(const Mesh& m, std::ostream& out) {
    out.precision(17);
    for (std::size_t i = 0; i < m.nodes.size(); ++i)
        out << "node," << m.nodes[i].x << ',' << m.nodes[i].y << ',' << int(m.kinds[i]) << '\n';
    for (const auto& t : m.triangles) out << "tri," << t[0] << ',' << t[1] << ',' << t[2] << '\n';
}

std::uint64_t Mesh::hash() const {
    std::uint64_t h = fnv1a_u64(nodes.size(), 0xcbf29ce484222325ull);
    h = fnv1a_u64(triangles.size(), h);
    for (const auto& p : nodes) {
        h = fnv1a_f64(p.x, h);
        h = fnv1a_f64(p.y, h);
    }
    for (const auto k : kinds) h = fnv1a_u64(std::uint64_t(k), h);
    for (const auto& t : triangles) {
        h = fnv1a_u64(t[0], h);
        h = fnv1a_u64(t[1], h);
        h = fnv1a_u64(t[2], h);
    }
    h = fnv1a_f64(grading.h0, h);
    h = fnv1a_f64(grading.ratio, h);
    h = fnv1a_f64(grading.w_min, h);
    return h;
}

}  // namespace cusplab
