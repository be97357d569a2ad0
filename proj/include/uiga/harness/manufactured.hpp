#pragma once

// Analytic solutions of the Poisson problem with their gradients and forcing f = -Laplace(u).

#include <cmath>
#include <functional>
#include <numbers>
#include <string>

#include "uiga/common.hpp"

namespace uiga {

struct ManufacturedSolution {
    std::string id;
    std::function<double(const Point2&)> u;
    std::function<Vec2(const Point2&)> grad;
    std::function<double(const Point2&)> f;
};

inline ManufacturedSolution sine_cosine_solution() {
    constexpr double pi = std::numbers::pi;
    return {"sin_cos",
            [](const Point2& x) { return std::sin(pi * x.x() / 2) * std::cos(pi * x.y()); },
            [](const Point2& x) {
                return Vec2(0.5 * pi * std::cos(pi * x.x() / 2) * std::cos(pi * x.y()),
                            -pi * std::sin(pi * x.x() / 2) * std::sin(pi * x.y()));
            },
            [](const Point2& x) { return 1.25 * pi * pi * std::sin(pi * x.x() / 2) * std::cos(pi * x.y()); }};
}

inline ManufacturedSolution quarter_disk_solution() {
    constexpr double pi = std::numbers::pi;
    auto h = [](const Point2& x) { return std::cos(pi * x.x()) * std::cos(pi * x.y() / 2); };
    auto grad_h = [](const Point2& x) {
        return Vec2(-pi * std::sin(pi * x.x()) * std::cos(pi * x.y() / 2),
                    -0.5 * pi * std::cos(pi * x.x()) * std::sin(pi * x.y() / 2));
    };
    return {"disk",
            [h](const Point2& x) { return (4.0 - x.squaredNorm()) * h(x); },
            [h, grad_h](const Point2& x) -> Vec2 { return -2.0 * x * h(x) + (4.0 - x.squaredNorm()) * grad_h(x); },
            [h, grad_h](const Point2& x) {
                // -Laplace(g h) = -(Laplace(g) h + 2 grad g . grad h + g Laplace(h)), g = 4 - |x|^2
                const double g = 4.0 - x.squaredNorm();
                const double lap_h = -1.25 * pi * pi * h(x);
                return -(-4.0 * h(x) + 2.0 * (-2.0 * x).dot(grad_h(x)) + g * lap_h);
            }};
}

inline ManufacturedSolution sine_product_solution() {
    constexpr double pi = std::numbers::pi;
    return {"sin_sin",
            [](const Point2& x) { return std::sin(2 * pi * x.x()) * std::sin(pi * x.y()); },
            [](const Point2& x) {
                return Vec2(2 * pi * std::cos(2 * pi * x.x()) * std::sin(pi * x.y()),
                            pi * std::sin(2 * pi * x.x()) * std::cos(pi * x.y()));
            },
            [](const Point2& x) { return 5 * pi * pi * std::sin(2 * pi * x.x()) * std::sin(pi * x.y()); }};
}

/// Polynomial a + b x + c y + d x^2 + e x y + g y^2, used for patch tests.
inline ManufacturedSolution quadratic_solution(double a, double b, double c, double d, double e, double g) {
    return {"quadratic",
            [=](const Point2& x) {
                return a + b * x.x() + c * x.y() + d * x.x() * x.x() + e * x.x() * x.y() + g * x.y() * x.y();
            },
            [=](const Point2& x) {
                return Vec2(b + 2 * d * x.x() + e * x.y(), c + e * x.x() + 2 * g * x.y());
            },
            [=](const Point2&) { return -2.0 * (d + g); }};
}

inline ManufacturedSolution zero_solution() {
    return {"zero", [](const Point2&) { return 0.0; }, [](const Point2&) { return Vec2(0.0, 0.0); },
            [](const Point2&) { return 0.0; }};
}

/// Lookup by identifier: sin_cos, disk, sin_sin, linear, quadratic, zero.
inline ManufacturedSolution solution_by_id(const std::string& id) {
    if (id == "sin_cos") return sine_cosine_solution();
    if (id == "disk") return quarter_disk_solution();
    if (id == "sin_sin") return sine_product_solution();
    if (id == "linear") {
        auto s = quadratic_solution(0.3, 1.0, -0.7, 0.0, 0.0, 0.0);
        s.id = "linear";
        return s;
    }
    if (id == "quadratic") return quadratic_solution(0.3, 1.0, -0.7, 0.4, 0.25, -0.6);
    if (id == "zero") return zero_solution();
    throw Error("unknown manufactured solution '" + id + "'");
}

}  // namespace uiga
