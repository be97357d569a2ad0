#pragma once

// Quadrature on the visible part of a parametric cell whose trimming curves are given as
// polynomial (Chebyshev) pieces. The cell is cut into slabs along one axis so that every
// trimming piece is the graph of a smooth function over each slab; bands between
// consecutive graphs are visible or hidden as a whole and receive tensor Gauss rules.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "uiga/common.hpp"
#include "uiga/quadrature.hpp"

namespace uiga {

/// Planar polynomial curve in Chebyshev form on s in [-1,1].
class ChebCurve {
public:
    ChebCurve() = default;

    /// Interpolates samples taken at the Chebyshev-Lobatto nodes cos(pi k / q), k = 0..q.
    static ChebCurve from_lobatto_values(const std::vector<Vec2>& values) {
        const int q = static_cast<int>(values.size()) - 1;
        ChebCurve c;
        c.coef_.assign(q + 1, Vec2::Zero());
        if (q == 0) {
            c.coef_[0] = values[0];
            return c;
        }
        for (int j = 0; j <= q; ++j) {
            Vec2 s = Vec2::Zero();
            for (int k = 0; k <= q; ++k) {
                const double f = (k == 0 || k == q) ? 0.5 : 1.0;
                s += f * values[k] * std::cos(std::numbers::pi * j * k / q);
            }
            c.coef_[j] = (2.0 / q) * s;
        }
        c.coef_[0] *= 0.5;
        c.coef_[q] *= 0.5;
        c.build_derivative();
        return c;
    }

    static double lobatto_node(int k, int q) { return std::cos(std::numbers::pi * k / q); }

    [[nodiscard]] int degree() const { return static_cast<int>(coef_.size()) - 1; }

    [[nodiscard]] Vec2 eval(double s) const { return clenshaw(coef_, s); }
    [[nodiscard]] Vec2 deriv(double s) const { return dcoef_.empty() ? Vec2::Zero() : clenshaw(dcoef_, s); }

private:
    static Vec2 clenshaw(const std::vector<Vec2>& c, double s) {
        Vec2 b1 = Vec2::Zero(), b2 = Vec2::Zero();
        for (int j = static_cast<int>(c.size()) - 1; j >= 1; --j) {
            const Vec2 b0 = 2.0 * s * b1 - b2 + c[j];
            b2 = b1;
            b1 = b0;
        }
        return s * b1 - b2 + c[0];
    }

    void build_derivative() {
        const int n = degree();
        dcoef_.assign(std::max(n, 1), Vec2::Zero());
        if (n == 0) return;
        // c'_{k-1} = c'_{k+1} + 2 k c_k
        std::vector<Vec2> d(n + 2, Vec2::Zero());
        for (int k = n; k >= 1; --k) d[k - 1] = d[k + 1] + 2.0 * k * coef_[k];
        d[0] *= 0.5;
        for (int k = 0; k < n; ++k) dcoef_[k] = d[k];
    }

    std::vector<Vec2> coef_;
    std::vector<Vec2> dcoef_;
};

/// A trimming piece: the restriction of a Chebyshev curve to [s0, s1].
struct TrimPiece {
    const ChebCurve* curve = nullptr;
    double s0 = -1.0, s1 = 1.0;

    [[nodiscard]] Vec2 at(double s) const { return curve->eval(s); }
    [[nodiscard]] Vec2 d(double s) const { return curve->deriv(s); }
};

/// Parametric quadrature rule (points in [0,1]^2, weights in parametric measure).
struct ParamRule {
    std::vector<Point2> points;
    std::vector<double> weights;
    [[nodiscard]] double area() const {
        double a = 0.0;
        for (double w : weights) a += w;
        return a;
    }
};

struct Box {
    double lo[2], hi[2];
    [[nodiscard]] double width(int d) const { return hi[d] - lo[d]; }
    [[nodiscard]] Point2 center() const { return {0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])}; }
};

namespace detail {

/// Root of a continuous scalar function on [a,b] with f(a), f(b) of opposite sign (Illinois).
template <class F>
double bracket_root(F&& f, double a, double b, double fa, double fb, double xtol = 1e-15, int max_iter = 200) {
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    int side = 0;
    for (int it = 0; it < max_iter; ++it) {
        double c = (a * fb - b * fa) / (fb - fa);
        if (!(c > std::min(a, b) && c < std::max(a, b))) c = 0.5 * (a + b);
        // Bisect every few steps to guarantee progress.
        if (it % 4 == 3) c = 0.5 * (a + b);
        const double fc = f(c);
        if (fc == 0.0) return c;
        if ((fc > 0) == (fb > 0)) {
            b = c;
            fb = fc;
            if (side == 1) fa *= 0.5;
            side = 1;
        } else {
            a = c;
            fa = fc;
            if (side == -1) fb *= 0.5;
            side = -1;
        }
        if (std::abs(b - a) <= xtol * std::max(1.0, std::abs(a))) break;
    }
    return std::abs(fa) < std::abs(fb) ? a : b;
}

/// All roots of g on [s0,s1] found by sampling sign changes.
template <class G>
std::vector<double> sampled_roots(G&& g, double s0, double s1, int n_samples = 24) {
    std::vector<double> roots;
    double prev_s = s0, prev_g = g(s0);
    for (int k = 1; k <= n_samples; ++k) {
        const double s = s0 + (s1 - s0) * k / n_samples;
        const double gs = g(s);
        if ((prev_g < 0 && gs > 0) || (prev_g > 0 && gs < 0)) roots.push_back(bracket_root(g, prev_s, s, prev_g, gs));
        prev_s = s;
        prev_g = gs;
    }
    return roots;
}

struct Graph {
    TrimPiece piece;  ///< monotone in the slab axis on [s0,s1]
    double xa, xb;    ///< axis range, xa <= xb
};

/// Solves piece_axis(s) = x on a monotone piece.
inline double graph_param(const Graph& g, int axis, double x) {
    const TrimPiece& p = g.piece;
    double a = p.s0, b = p.s1;
    double fa = p.at(a)[axis] - x, fb = p.at(b)[axis] - x;
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if ((fa > 0) == (fb > 0)) return std::abs(fa) < std::abs(fb) ? a : b;
    return bracket_root([&](double s) { return p.at(s)[axis] - x; }, a, b, fa, fb, 1e-16);
}

inline double graph_height(const Graph& g, int axis, double x) {
    return g.piece.at(graph_param(g, axis, x))[1 - axis];
}

class SlabIntegrator {
public:
    using Visible = std::function<bool(const Point2&)>;

    SlabIntegrator(const Visible& visible, int n_gauss, ParamRule& out) : visible_(visible), n_(n_gauss), out_(out) {}

    void integrate(const Box& box, std::vector<TrimPiece> pieces, int depth) {
        if (pieces.empty()) {
            if (visible_(box.center())) add_tensor(box);
            return;
        }
        double q[2];
        for (int d = 0; d < 2; ++d) q[d] = direction_quality(box, pieces, d);
        const int axis = q[0] >= q[1] ? 0 : 1;
        if (std::max(q[0], q[1]) < 0.05 && depth < max_depth) {
            subdivide(box, pieces, depth);
            return;
        }
        slabs(box, pieces, axis);
    }

    static constexpr int max_depth = 10;

private:
    static bool degenerate(const Box& box, const TrimPiece& p, int d) {
        return std::abs(p.at(p.s1)[d] - p.at(p.s0)[d]) <= 1e-13 * box.width(d) &&
               std::abs(p.at(0.5 * (p.s0 + p.s1))[d] - p.at(p.s0)[d]) <= 1e-13 * box.width(d);
    }

    /// min |x'| / max |x'| over each non-degenerate piece; 0 when a tangent is parallel to the
    /// height direction inside or at the end of a piece.
    static double direction_quality(const Box& box, const std::vector<TrimPiece>& pieces, int d) {
        double q = 1.0;
        for (const auto& p : pieces) {
            if (degenerate(box, p, d)) continue;
            double mn = 1e300, mx = 0.0;
            double sign = 0.0;
            bool flips = false;
            for (int k = 0; k <= 16; ++k) {
                const double s = p.s0 + (p.s1 - p.s0) * k / 16.0;
                const double v = p.d(s)[d];
                if (sign != 0.0 && v * sign < 0.0) flips = true;
                if (v != 0.0 && sign == 0.0) sign = v;
                mn = std::min(mn, std::abs(v));
                mx = std::max(mx, std::abs(v));
            }
            q = std::min(q, (flips || mx == 0.0) ? 0.0 : mn / mx);
        }
        return q;
    }

    void add_tensor(const Box& box) {
        const GaussRule& g = gauss_rule(n_);
        for (std::size_t j = 0; j < g.size(); ++j)
            for (std::size_t i = 0; i < g.size(); ++i) {
                out_.points.emplace_back(box.lo[0] + box.width(0) * g.points[i], box.lo[1] + box.width(1) * g.points[j]);
                out_.weights.push_back(g.weights[i] * g.weights[j] * box.width(0) * box.width(1));
            }
    }

    /// Splits a piece at every s where its coordinate d equals c; returns the sub-pieces.
    static std::vector<TrimPiece> split_at(const TrimPiece& p, int d, double c) {
        auto f = [&](double s) { return p.at(s)[d] - c; };
        std::vector<double> cuts = sampled_roots(f, p.s0, p.s1, 32);
        std::vector<TrimPiece> out;
        double s_prev = p.s0;
        for (double s : cuts) {
            if (s - s_prev > 1e-15) out.push_back({p.curve, s_prev, s});
            s_prev = s;
        }
        if (p.s1 - s_prev > 1e-15) out.push_back({p.curve, s_prev, p.s1});
        return out;
    }

    void subdivide(const Box& box, const std::vector<TrimPiece>& pieces, int depth) {
        const Point2 c = box.center();
        std::vector<TrimPiece> parts;
        for (const auto& p : pieces)
            for (const auto& a : split_at(p, 0, c.x()))
                for (const auto& b : split_at(a, 1, c.y())) parts.push_back(b);
        for (int qy = 0; qy < 2; ++qy) {
            for (int qx = 0; qx < 2; ++qx) {
                Box child;
                child.lo[0] = qx == 0 ? box.lo[0] : c.x();
                child.hi[0] = qx == 0 ? c.x() : box.hi[0];
                child.lo[1] = qy == 0 ? box.lo[1] : c.y();
                child.hi[1] = qy == 0 ? c.y() : box.hi[1];
                std::vector<TrimPiece> mine;
                for (const auto& p : parts) {
                    const Vec2 m = p.at(0.5 * (p.s0 + p.s1));
                    const bool in_x = qx == 0 ? m.x() <= c.x() : m.x() > c.x();
                    const bool in_y = qy == 0 ? m.y() <= c.y() : m.y() > c.y();
                    if (in_x && in_y) mine.push_back(p);
                }
                integrate(child, std::move(mine), depth + 1);
            }
        }
    }

    void slabs(const Box& box, const std::vector<TrimPiece>& pieces, int axis) {
        const int h = 1 - axis;
        const double x0 = box.lo[axis], x1 = box.hi[axis];
        const double scale = x1 - x0;
        std::vector<double> breaks{x0, x1};
        std::vector<Graph> graphs;
        for (const auto& p : pieces) {
            if (degenerate(box, p, axis)) {
                breaks.push_back(p.at(p.s0)[axis]);
                continue;
            }
            // Split into monotone sub-pieces at the extrema of the axis coordinate.
            std::vector<double> ext = sampled_roots([&](double s) { return p.d(s)[axis]; }, p.s0, p.s1, 32);
            std::vector<double> cuts{p.s0};
            cuts.insert(cuts.end(), ext.begin(), ext.end());
            cuts.push_back(p.s1);
            for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
                if (cuts[k + 1] - cuts[k] <= 1e-15) continue;
                const TrimPiece sub{p.curve, cuts[k], cuts[k + 1]};
                const double xa = sub.at(sub.s0)[axis], xb = sub.at(sub.s1)[axis];
                breaks.push_back(xa);
                breaks.push_back(xb);
                graphs.push_back({sub, std::min(xa, xb), std::max(xa, xb)});
            }
        }
        for (double& b : breaks) b = std::clamp(b, x0, x1);
        std::sort(breaks.begin(), breaks.end());
        std::vector<double> uniq;
        for (double b : breaks)
            if (uniq.empty() || b - uniq.back() > 1e-14 * scale) uniq.push_back(b);
        if (uniq.back() < x1) uniq.back() = x1;

        for (std::size_t k = 0; k + 1 < uniq.size(); ++k) slab(box, graphs, axis, uniq[k], uniq[k + 1], 0);
        (void)h;
    }

    void slab(const Box& box, const std::vector<Graph>& graphs, int axis, double a, double b, int guard) {
        const int h = 1 - axis;
        if (!(b > a)) return;
        const double y0 = box.lo[h], y1 = box.hi[h];
        const double eps = 1e-12 * box.width(axis);
        std::vector<const Graph*> span;
        for (const auto& g : graphs)
            if (g.xa <= a + eps && g.xb >= b - eps) span.push_back(&g);

        auto heights = [&](double x) {
            std::vector<double> y(span.size());
            for (std::size_t k = 0; k < span.size(); ++k) y[k] = graph_height(*span[k], axis, x);
            return y;
        };
        const double xm = 0.5 * (a + b);
        std::vector<std::size_t> order(span.size());
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        const std::vector<double> ym = heights(xm);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) { return ym[p] < ym[q]; });

        // Graphs that cross inside the slab split it further.
        if (span.size() > 1 && guard < 40) {
            for (double frac : {0.02, 0.25, 0.75, 0.98}) {
                const double xs = a + frac * (b - a);
                const std::vector<double> ys = heights(xs);
                for (std::size_t k = 0; k + 1 < order.size(); ++k) {
                    const std::size_t lo = order[k], hi = order[k + 1];
                    const double tol = 1e-13 * box.width(h);
                    if (ys[lo] > ys[hi] + tol) {
                        auto diff = [&](double x) {
                            return graph_height(*span[hi], axis, x) - graph_height(*span[lo], axis, x);
                        };
                        const double xc = bracket_root(diff, std::min(xs, xm), std::max(xs, xm), diff(std::min(xs, xm)),
                                                       diff(std::max(xs, xm)));
                        if (xc > a && xc < b) {
                            slab(box, graphs, axis, a, xc, guard + 1);
                            slab(box, graphs, axis, xc, b, guard + 1);
                            return;
                        }
                    }
                }
            }
        } else if (span.size() > 1) {
            throw Error("degenerate cut reparameterization");
        }

        // Band boundaries: the cell edges and the graphs, bottom to top. Consecutive visible
        // bands merge into one.
        const int nb = static_cast<int>(order.size()) + 1;
        auto boundary_at = [&](int k, double x) -> double {
            if (k == 0) return y0;
            if (k == nb) return y1;
            return std::clamp(graph_height(*span[order[k - 1]], axis, x), y0, y1);
        };
        int k = 0;
        while (k < nb) {
            const double lo = boundary_at(k, xm), hi = boundary_at(k + 1, xm);
            if (!(hi > lo) || !visible_(make_point(axis, xm, 0.5 * (lo + hi)))) {
                ++k;
                continue;
            }
            int k_end = k + 1;
            while (k_end < nb) {
                const double l2 = boundary_at(k_end, xm), h2 = boundary_at(k_end + 1, xm);
                if (h2 > l2 && !visible_(make_point(axis, xm, 0.5 * (l2 + h2)))) break;
                ++k_end;
            }
            add_band(axis, a, b, [&](double x) { return boundary_at(k, x); },
                     [&](double x) { return boundary_at(k_end, x); });
            k = k_end;
        }
    }

    static Point2 make_point(int axis, double x, double y) { return axis == 0 ? Point2(x, y) : Point2(y, x); }

    template <class Lo, class Hi>
    void add_band(int axis, double a, double b, Lo&& lower, Hi&& upper) {
        const GaussRule& g = gauss_rule(n_);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double x = a + (b - a) * g.points[i];
            const double lo = lower(x), hi = upper(x);
            if (!(hi > lo)) continue;
            for (std::size_t j = 0; j < g.size(); ++j) {
                const double y = lo + (hi - lo) * g.points[j];
                const double w = g.weights[i] * (b - a) * g.weights[j] * (hi - lo);
                if (w > 0.0) {
                    out_.points.push_back(make_point(axis, x, y));
                    out_.weights.push_back(w);
                }
            }
        }
    }

    const Visible& visible_;
    int n_;
    ParamRule& out_;
};

}  // namespace detail

/// Quadrature (n_gauss points per direction per band) for the visible part of a box.
/// `visible` classifies parametric points off the trimming pieces.
inline ParamRule integrate_trimmed_box(const Box& box, const std::vector<TrimPiece>& pieces,
                                       const std::function<bool(const Point2&)>& visible, int n_gauss) {
    ParamRule rule;
    detail::SlabIntegrator integ(visible, n_gauss, rule);
    integ.integrate(box, pieces, 0);
    return rule;
}

}  // namespace uiga
