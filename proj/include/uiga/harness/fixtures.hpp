#pragma once

// Benchmark geometries: two overlapping squares, quarter disk (annulus + rectangle) in both
// orderings, and three overlapping rectangles with a triple-overlap region.

#include <cmath>
#include <numbers>

#include "uiga/problem.hpp"

namespace uiga {

/// Bottom [0,1]^2 (4x3 elements) under top [0.5+eps,1]x[0,1] (2x2). Dirichlet on the left side.
inline Problem unit_square_fixture(int degree, double eps = 1e-6) {
    Problem p;
    p.name = "unit_square";
    p.patches.push_back(rectangle_patch(degree, 4, 3, 0.0, 1.0, 0.0, 1.0));
    p.patches.push_back(rectangle_patch(degree, 2, 2, 0.5 + eps, 1.0, 0.0, 1.0));
    p.bcs.push_back({0, Side::left, BcType::dirichlet});
    p.solution = "sin_cos";
    return p;
}

/// Quarter annulus r in [1,2] in the first quadrant as a NURBS patch: u runs along the arcs
/// (angle 0 to pi/2), v along the radius. Degree raised to `degree` in both directions,
/// then split into n x n elements.
inline SplinePatch quarter_annulus(int degree, int n, double r0 = 1.0, double r1 = 2.0) {
    TensorBasis tb(KnotVector::uniform(2, 1), KnotVector::uniform(1, 1));
    const double w = std::numbers::sqrt2 / 2.0;
    std::vector<Point2> c;
    std::vector<double> ws;
    for (double r : {r0, r1}) {
        c.insert(c.end(), {Point2(r, 0.0), Point2(r, r), Point2(0.0, r)});
        ws.insert(ws.end(), {1.0, w, 1.0});
    }
    SplinePatch p = SplinePatch::create(tb, c, ws);
    p = elevate_bezier(p, 0, degree - 2);
    p = elevate_bezier(p, 1, degree - 1);
    return p.h_refine(n);
}

/// Quarter disk of radius 2: annulus (5x5) and rectangle [0,1.13]x[0,1.17] (4x4).
/// Dirichlet on the outer arc; the axes carry homogeneous Neumann data.
inline Problem disk_fixture(int degree, bool annulus_on_top) {
    Problem p;
    p.name = annulus_on_top ? "disk_annulus_top" : "disk_rectangle_top";
    SplinePatch ann = quarter_annulus(degree, 5);
    SplinePatch rect = rectangle_patch(degree, 4, 4, 0.0, 1.13, 0.0, 1.17);
    if (annulus_on_top) {
        p.patches = {rect, ann};
        p.bcs.push_back({1, Side::top, BcType::dirichlet});
    } else {
        p.patches = {ann, rect};
        p.bcs.push_back({0, Side::top, BcType::dirichlet});
    }
    p.solution = "disk";
    return p;
}

/// Rectangle of size a x b centred at c and rotated by `angle` radians.
inline SplinePatch rotated_rectangle(int degree, int nx, int ny, const Point2& c, double a, double b, double angle) {
    const Vec2 eu(std::cos(angle), std::sin(angle));
    const Vec2 ev(-std::sin(angle), std::cos(angle));
    const Point2 origin = c - 0.5 * a * eu - 0.5 * b * ev;
    return affine_patch(KnotVector::uniform(degree, nx), KnotVector::uniform(degree, ny), origin, a * eu, b * ev);
}

/// Blue's edges cross orange elements at one third of their width on every dyadic level, so
/// only the rotated green edges produce small cut pieces.
struct ThreePatchLayout {
    Point2 blue_center{13.0 / 12.0, 7.0 / 12.0};
    double blue_w = 1.0, blue_h = 0.5, blue_angle_deg = 0.0;
    Point2 green_center{11.0 / 12.0, 11.0 / 12.0};
    double green_w = 0.4, green_h = 0.4, green_angle_deg = 15.0;
    int orange_n = 4, blue_nx = 4, blue_ny = 2, green_nx = 3, green_ny = 3;
};

/// Orange [0,1]^2 at the bottom, a blue rectangle overlapping its right edge, and a
/// rotated green square on top overlapping both. Dirichlet on orange's left and bottom.
inline Problem three_patch_fixture(int degree, const ThreePatchLayout& L = {}) {
    constexpr double deg = std::numbers::pi / 180.0;
    Problem p;
    p.name = "three_patch";
    p.patches.push_back(rectangle_patch(degree, L.orange_n, L.orange_n, 0.0, 1.0, 0.0, 1.0));
    p.patches.push_back(
        rotated_rectangle(degree, L.blue_nx, L.blue_ny, L.blue_center, L.blue_w, L.blue_h, L.blue_angle_deg * deg));
    p.patches.push_back(rotated_rectangle(degree, L.green_nx, L.green_ny, L.green_center, L.green_w, L.green_h,
                                          L.green_angle_deg * deg));
    p.bcs.push_back({0, Side::left, BcType::dirichlet});
    p.bcs.push_back({0, Side::bottom, BcType::dirichlet});
    p.solution = "sin_sin";
    return p;
}

}  // namespace uiga
