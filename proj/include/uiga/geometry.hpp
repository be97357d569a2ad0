#pragma once

// Point inversion, containment, boundary curves, projection and normals.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>

#include "uiga/common.hpp"
#include "uiga/splines.hpp"

namespace uiga {

struct InversionResult {
    Point2 uv = Point2::Zero();
    double residual = std::numeric_limits<double>::infinity();
    bool converged = false;
};

struct InversionOptions {
    int grid = 5;          ///< multistart grid per direction
    int max_iter = 30;
    double max_step = 0.5; ///< largest Newton step in parameter units
};

namespace detail {

inline Point2 clamp_unit(const Point2& uv) { return uv.cwiseMax(0.0).cwiseMin(1.0); }

/// Newton on F(uv) = x from one start, projected onto [0,1]^2. Returns the best iterate.
inline InversionResult newton_invert(const SplinePatch& patch, const Point2& x, Point2 uv, double abs_tol,
                                     const InversionOptions& opt) {
    InversionResult best;
    int stall = 0;
    for (int it = 0; it <= opt.max_iter; ++it) {
        const MapPoint m = patch.map_point(uv);
        const Vec2 r = x - m.x;
        const double res = r.norm();
        if (res < best.residual) {
            best.residual = res;
            best.uv = uv;
            stall = 0;
        } else if (++stall >= 3) {
            break;
        }
        if (res <= 1e-3 * abs_tol) break;
        const double det = m.jac.determinant();
        if (det == 0.0) break;
        Vec2 step = m.jac.inverse() * r;
        if (step.norm() > opt.max_step) step *= opt.max_step / step.norm();
        // Coordinates that would leave [0,1] are moved onto the bound; the other one takes a
        // least-squares step for the remaining residual.
        int n_out = 0, out_dir = 0;
        for (int d = 0; d < 2; ++d) {
            const double nd = uv[d] + step[d];
            if (nd < 0.0 || nd > 1.0) {
                ++n_out;
                out_dir = d;
                step[d] = (nd < 0.0 ? 0.0 : 1.0) - uv[d];
            }
        }
        if (n_out == 1) {
            const int f = 1 - out_dir;
            const Vec2 col = m.jac.col(f);
            step[f] = col.dot(r - m.jac.col(out_dir) * step[out_dir]) / col.squaredNorm();
        }
        const Point2 next = clamp_unit(uv + step);
        // stuck on the boundary of the parameter square, or converged to roundoff
        if ((next - uv).norm() < 1e-16) break;
        uv = next;
    }
    best.converged = best.residual <= abs_tol;
    return best;
}

}  // namespace detail

/// Newton inversion of the patch map with multistart on a uniform grid.
/// `guess` (if any) is tried first. Converged iff residual <= 1e-11 * patch diameter.
inline InversionResult invert_point(const SplinePatch& patch, const Point2& x,
                                    std::optional<Point2> guess = std::nullopt, const InversionOptions& opt = {}) {
    const double abs_tol = tol::inversion_rel * patch.diameter();
    InversionResult best;
    if (guess) {
        best = detail::newton_invert(patch, x, detail::clamp_unit(*guess), abs_tol, opt);
        if (best.converged) return best;
    }
    struct Start {
        double dist;
        Point2 uv;
    };
    std::vector<Start> starts;
    starts.reserve(opt.grid * opt.grid);
    for (int j = 0; j < opt.grid; ++j) {
        for (int i = 0; i < opt.grid; ++i) {
            const Point2 uv((i + 0.5) / opt.grid, (j + 0.5) / opt.grid);
            starts.push_back({(patch.point(uv) - x).norm(), uv});
        }
    }
    std::stable_sort(starts.begin(), starts.end(), [](const Start& a, const Start& b) { return a.dist < b.dist; });
    for (const Start& s : starts) {
        const InversionResult r = detail::newton_invert(patch, x, s.uv, abs_tol, opt);
        if (r.residual < best.residual) best = r;
        if (best.converged) break;
    }
    return best;
}

/// How points within the boundary tolerance of the parameter square are classified.
enum class BoundaryRule { exclude, include };

inline bool inside_bbox(const SplinePatch& patch, const Point2& x, double margin) {
    const auto [lo, hi] = patch.control_bbox();
    return (x.array() >= lo.array() - margin).all() && (x.array() <= hi.array() + margin).all();
}

/// Distance of uv to the boundary of [0,1]^2 (positive inside).
inline double boundary_gap(const Point2& uv) {
    return std::min({uv.x(), 1.0 - uv.x(), uv.y(), 1.0 - uv.y()});
}

/// Membership of a physical point in the patch image. With `exclude` the point must be
/// strictly inside by the parametric tolerance (upper-patch rule); `include` admits it.
inline bool contains(const SplinePatch& patch, const Point2& x, BoundaryRule rule = BoundaryRule::exclude,
                     std::optional<Point2> guess = std::nullopt) {
    if (!inside_bbox(patch, x, 1e-9 * patch.diameter())) return false;
    const InversionResult r = invert_point(patch, x, guess);
    if (!r.converged) return false;
    if (rule == BoundaryRule::include) return true;
    return boundary_gap(r.uv) > tol::boundary_param;
}

/// One parametric side of a patch viewed as a curve t in [0,1].
struct BoundaryCurve {
    int patch_index = -1;
    Side side = Side::bottom;
    const SplinePatch* patch = nullptr;
    SplineCurve curve;

    BoundaryCurve() = default;
    BoundaryCurve(int index, Side s, const SplinePatch& p)
        : patch_index(index), side(s), patch(&p), curve(extract_side(p, s)) {}

    [[nodiscard]] Point2 point(double t) const { return curve.point(t); }
    [[nodiscard]] Vec2 tangent(double t) const { return curve.eval(t)[1]; }
    [[nodiscard]] Point2 uv(double t) const { return side_uv(side, t); }
};

/// Unit outward normal of the owner patch on its side curve.
inline Vec2 normal_on_boundary(const BoundaryCurve& c, double t) {
    const Vec2 tan = c.tangent(t);
    const double len = tan.norm();
    if (len < 1e-14) throw Error("degenerate boundary parameterization");
    Vec2 n(tan.y() / len, -tan.x() / len);
    const MapPoint m = c.patch->map_point(c.uv(t));
    const Vec2 inward = m.jac * side_inward(c.side);
    if (n.dot(inward) > 0.0) n = -n;
    return n;
}

struct CurveProjection {
    double t = 0.0;
    Point2 foot = Point2::Zero();
    double distance = std::numeric_limits<double>::infinity();
};

/// Closest point on the curve: Newton on (C(t) - x) . C'(t) = 0 from sampled starts.
inline CurveProjection project_to_curve(const BoundaryCurve& c, const Point2& x, int n_samples = 16) {
    std::vector<double> starts;
    for (int i = 0; i <= n_samples; ++i) starts.push_back(static_cast<double>(i) / n_samples);
    for (double k : c.curve.knots().breakpoints()) starts.push_back(k);
    std::sort(starts.begin(), starts.end());
    // Only refine from the few best samples.
    std::vector<std::pair<double, double>> ranked;
    for (double t : starts) ranked.emplace_back((c.point(t) - x).norm(), t);
    std::stable_sort(ranked.begin(), ranked.end());
    CurveProjection best;
    const std::size_t n_try = std::min<std::size_t>(4, ranked.size());
    for (std::size_t s = 0; s < n_try; ++s) {
        double t = ranked[s].second;
        for (int it = 0; it < 50; ++it) {
            const auto d = c.curve.eval(t);
            const Vec2 r = d[0] - x;
            const double f = r.dot(d[1]);
            const double df = d[1].squaredNorm() + r.dot(d[2]);
            double next = t - (df > 0.0 ? f / df : f / (d[1].squaredNorm() + 1e-300));
            next = std::clamp(next, 0.0, 1.0);
            if (std::abs(next - t) < 1e-16) {
                t = next;
                break;
            }
            t = next;
        }
        const Point2 foot = c.point(t);
        const double dist = (foot - x).norm();
        if (dist < best.distance) best = {t, foot, dist};
    }
    return best;
}

}  // namespace uiga
