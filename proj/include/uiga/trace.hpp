#pragma once

// Splitting a patch side curve into segments with a uniform visibility state relative to
// other patches, with extra breakpoints at knot-line images.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "uiga/cutcell.hpp"
#include "uiga/geometry.hpp"

namespace uiga {

/// A requirement on the points of a traced segment: inside (or outside) a patch image.
struct TraceCondition {
    int patch = 0;
    bool inside = true;
    BoundaryRule rule = BoundaryRule::exclude;
};

struct TraceRequest {
    std::vector<TraceCondition> conditions;
    std::vector<int> split_patches;  ///< patches whose interior knot lines add breakpoints
    bool split_own_knots = true;     ///< break at the knot values of the curve itself
    double h_ref = 0.0;              ///< sampling length scale (smallest relevant element size)
};

struct TracedSegment {
    double t0 = 0.0, t1 = 0.0;
};

namespace detail {

class CurveTracer {
public:
    CurveTracer(const std::vector<SplinePatch>& patches, const BoundaryCurve& curve, const TraceRequest& req)
        : patches_(patches), curve_(curve), req_(req) {
        for (const auto& c : req.conditions) add_involved(c.patch);
        for (int s : req.split_patches) add_involved(s);
    }

    std::vector<TracedSegment> run() {
        sample();
        std::vector<double> breaks{0.0, 1.0};
        if (req_.split_own_knots)
            for (double k : curve_.curve.knots().breakpoints()) breaks.push_back(k);

        // Visibility transitions.
        std::vector<Sample> refined;
        for (std::size_t k = 0; k < samples_.size(); ++k) {
            refined.push_back(samples_[k]);
            if (k + 1 == samples_.size()) break;
            const Sample& a = samples_[k];
            const Sample& b = samples_[k + 1];
            for (const auto& c : req_.conditions) {
                const int slot = slot_of(c.patch);
                if (flag(c, a.inv[slot]) == flag(c, b.inv[slot])) continue;
                const double t = transition(c, slot, a, b);
                breaks.push_back(t);
                refined.push_back(make_sample(t, a));
            }
        }
        std::sort(refined.begin(), refined.end(), [](const Sample& a, const Sample& b) { return a.t < b.t; });

        // Knot-line crossings of the split patches.
        for (int s : req_.split_patches) knot_crossings(slot_of(s), refined, breaks);

        std::sort(breaks.begin(), breaks.end());
        std::vector<double> uniq;
        for (double t : breaks) {
            t = std::clamp(t, 0.0, 1.0);
            if (uniq.empty() || t - uniq.back() > tol::breakpoint_dedup) uniq.push_back(t);
        }
        if (uniq.back() != 1.0) {
            if (uniq.size() > 1 && 1.0 - uniq.back() <= tol::breakpoint_dedup) uniq.back() = 1.0;
            else uniq.push_back(1.0);
        }

        std::vector<TracedSegment> out;
        for (std::size_t k = 0; k + 1 < uniq.size(); ++k) {
            const double t0 = uniq[k], t1 = uniq[k + 1];
            if (t1 - t0 <= 1e-14) continue;
            const double tm = 0.5 * (t0 + t1);
            const Sample& near = nearest_sample(refined, tm);
            const Sample m = make_sample(tm, near);
            bool ok = true;
            for (const auto& c : req_.conditions) ok = ok && flag(c, m.inv[slot_of(c.patch)]) == c.inside;
            if (ok) out.push_back({t0, t1});
        }
        return out;
    }

private:
    struct Sample {
        double t = 0.0;
        Point2 x;
        std::vector<InversionResult> inv;
    };

    void add_involved(int p) {
        if (std::find(involved_.begin(), involved_.end(), p) == involved_.end()) involved_.push_back(p);
    }
    int slot_of(int p) const {
        return static_cast<int>(std::find(involved_.begin(), involved_.end(), p) - involved_.begin());
    }

    InversionResult invert(int slot, const Point2& x, const std::optional<Point2>& guess) const {
        const SplinePatch& P = patches_[involved_[slot]];
        if (!inside_bbox(P, x, 1e-9 * P.diameter())) return {};
        return invert_point(P, x, guess);
    }

    Sample make_sample(double t, const Sample& hint) const {
        Sample s;
        s.t = t;
        s.x = curve_.point(t);
        s.inv.resize(involved_.size());
        for (std::size_t k = 0; k < involved_.size(); ++k) {
            std::optional<Point2> g;
            if (k < hint.inv.size() && hint.inv[k].converged) g = hint.inv[k].uv;
            s.inv[k] = invert(static_cast<int>(k), s.x, g);
        }
        return s;
    }

    static bool flag(const TraceCondition& c, const InversionResult& r) {
        if (!r.converged) return false;
        return c.rule == BoundaryRule::include || boundary_gap(r.uv) > tol::boundary_param;
    }

    /// Sharp membership test used to locate transitions: strictly inside the parameter
    /// square for `exclude`, on the image to near roundoff for `include`.
    bool sharp_inside(const TraceCondition& c, int slot, double t, const Sample& hint) const {
        std::optional<Point2> g;
        if (hint.inv[slot].converged) g = hint.inv[slot].uv;
        const InversionResult r = invert(slot, curve_.point(t), g);
        if (c.rule == BoundaryRule::include) return r.residual <= 1e-13 * patches_[involved_[slot]].diameter();
        return r.converged && boundary_gap(r.uv) > 0.0;
    }

    double transition(const TraceCondition& c, int slot, const Sample& a, const Sample& b) const {
        const bool pa = sharp_inside(c, slot, a.t, a), pb = sharp_inside(c, slot, b.t, b);
        // Equal sharp states: one endpoint sits within the tolerance band of the boundary.
        if (pa == pb) return flag(c, a.inv[slot]) != pa ? a.t : b.t;
        double lo = a.t, hi = b.t;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            const Sample& hint = (mid - a.t < b.t - mid) ? a : b;
            if (sharp_inside(c, slot, mid, hint) == pa)
                lo = mid;
            else
                hi = mid;
        }
        return pa ? lo : hi;
    }

    void knot_crossings(int slot, const std::vector<Sample>& s, std::vector<double>& breaks) const {
        const SplinePatch& P = patches_[involved_[slot]];
        constexpr double side_tol = 1e-12;
        for (int d = 0; d < 2; ++d) {
            const auto& bp = P.basis().knots(d).breakpoints();
            for (std::size_t q = 1; q + 1 < bp.size(); ++q) {
                const double kappa = bp[q];
                for (std::size_t k = 0; k < s.size(); ++k) {
                    if (!s[k].inv[slot].converged) continue;
                    const double va = s[k].inv[slot].uv[d] - kappa;
                    if (std::abs(va) <= side_tol) {
                        // A sample on the knot line counts when a neighbour leaves it.
                        const bool prev_off = k > 0 && s[k - 1].inv[slot].converged &&
                                              std::abs(s[k - 1].inv[slot].uv[d] - kappa) > side_tol;
                        const bool next_off = k + 1 < s.size() && s[k + 1].inv[slot].converged &&
                                              std::abs(s[k + 1].inv[slot].uv[d] - kappa) > side_tol;
                        if (prev_off || next_off) breaks.push_back(s[k].t);
                        continue;
                    }
                    if (k + 1 == s.size() || !s[k + 1].inv[slot].converged) continue;
                    const double vb = s[k + 1].inv[slot].uv[d] - kappa;
                    if (std::abs(vb) <= side_tol || (va > 0) == (vb > 0)) continue;
                    const Sample& a = s[k];
                    const Sample& b = s[k + 1];
                    auto f = [&](double t) {
                        const Sample& hint = (t - a.t < b.t - t) ? a : b;
                        const InversionResult r = invert(slot, curve_.point(t), hint.inv[slot].uv);
                        return r.uv[d] - kappa;
                    };
                    breaks.push_back(bracket_root(f, a.t, b.t, va, vb, 1e-16));
                }
            }
        }
    }

    const Sample& nearest_sample(const std::vector<Sample>& s, double t) const {
        auto it = std::lower_bound(s.begin(), s.end(), t, [](const Sample& a, double v) { return a.t < v; });
        if (it == s.end()) return s.back();
        if (it != s.begin() && t - std::prev(it)->t < it->t - t) return *std::prev(it);
        return *it;
    }

    void sample() {
        const auto& bp = curve_.curve.knots().breakpoints();
        std::vector<double> ts;
        for (std::size_t e = 0; e + 1 < bp.size(); ++e) {
            const double a = bp[e], b = bp[e + 1];
            double len = 0.0;
            Point2 prev = curve_.point(a);
            for (int k = 1; k <= 8; ++k) {
                const Point2 x = curve_.point(a + (b - a) * k / 8.0);
                len += (x - prev).norm();
                prev = x;
            }
            const double h = req_.h_ref > 0.0 ? req_.h_ref : len;
            const int m = std::clamp(static_cast<int>(std::ceil(4.0 * len / h)) + 2, 4, 4096);
            for (int k = 0; k < m; ++k) ts.push_back(a + (b - a) * k / m);
        }
        ts.push_back(1.0);
        Sample prev;
        for (double t : ts) {
            Sample s = make_sample(t, prev);
            samples_.push_back(s);
            prev = std::move(s);
        }
    }

    const std::vector<SplinePatch>& patches_;
    const BoundaryCurve& curve_;
    const TraceRequest& req_;
    std::vector<int> involved_;
    std::vector<Sample> samples_;
};

}  // namespace detail

/// Segments [t0,t1] of the curve whose points satisfy every condition, split at the curve's
/// own knots and at crossings with the interior knot lines of the split patches.
inline std::vector<TracedSegment> trace_curve(const std::vector<SplinePatch>& patches, const BoundaryCurve& curve,
                                              const TraceRequest& req) {
    return detail::CurveTracer(patches, curve, req).run();
}

}  // namespace uiga
