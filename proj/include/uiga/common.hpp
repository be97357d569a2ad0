#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace uiga {

using Point2 = Eigen::Vector2d;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Base error for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Geometric and algebraic tolerances shared across modules.
namespace tol {
inline constexpr double inversion_rel = 1e-11;   ///< residual / patch diameter
inline constexpr double boundary_param = 1e-10;  ///< containment margin in [0,1]^2
inline constexpr double breakpoint_dedup = 1e-10;
inline constexpr double dof_visible_area = 1e-14;
}  // namespace tol

/// Parametric side of a patch. Sides are traversed with increasing u (bottom, top)
/// or increasing v (right, left).
enum class Side : int { bottom = 0, right = 1, top = 2, left = 3 };

inline constexpr Side all_sides[4] = {Side::bottom, Side::right, Side::top, Side::left};

inline const char* side_name(Side s) {
    switch (s) {
        case Side::bottom: return "bottom";
        case Side::right: return "right";
        case Side::top: return "top";
        case Side::left: return "left";
    }
    return "?";
}

inline Side side_from_name(const std::string& name) {
    for (Side s : all_sides)
        if (name == side_name(s)) return s;
    throw Error("unknown side '" + name + "'");
}

/// Parametric point of side s at curve parameter t.
inline Point2 side_uv(Side s, double t) {
    switch (s) {
        case Side::bottom: return {t, 0.0};
        case Side::right: return {1.0, t};
        case Side::top: return {t, 1.0};
        case Side::left: return {0.0, t};
    }
    return {0.0, 0.0};
}

/// Unit parametric direction pointing into the patch from side s.
inline Vec2 side_inward(Side s) {
    switch (s) {
        case Side::bottom: return {0.0, 1.0};
        case Side::right: return {-1.0, 0.0};
        case Side::top: return {0.0, -1.0};
        case Side::left: return {1.0, 0.0};
    }
    return {0.0, 0.0};
}

/// Parametric direction (0 = u, 1 = v) along which side s runs.
inline int side_direction(Side s) { return (s == Side::bottom || s == Side::top) ? 0 : 1; }

}  // namespace uiga
