#pragma once

// Union of overlapping patches ordered bottom (0) to top (N): element visibility,
// cut-element quadrature, interface and external boundary quadrature meshes.

#include <deque>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "uiga/cutcell.hpp"
#include "uiga/geometry.hpp"
#include "uiga/trace.hpp"

namespace uiga {

struct ElementStatus {
    enum class Kind { interior, covered, cut };
    Kind kind = Kind::interior;
    double ratio = 1.0;  ///< visible parametric area / element area
};

inline const char* kind_name(ElementStatus::Kind k) {
    switch (k) {
        case ElementStatus::Kind::interior: return "interior";
        case ElementStatus::Kind::covered: return "covered";
        case ElementStatus::Kind::cut: return "cut";
    }
    return "?";
}

/// Quadrature node on a patch side.
struct CurveNode {
    double t = 0.0;       ///< side curve parameter
    Point2 x;             ///< physical point
    double w = 0.0;       ///< Gauss weight times |C'(t)|
    Vec2 normal;          ///< unit outward normal of the side's patch
    Point2 uv;            ///< parametric point in the side's patch
    int elem = -1;        ///< element of the side's patch
};

struct InterfaceNode : CurveNode {
    Point2 uv_j;          ///< parametric point in the lower patch
    int elem_j = -1;
    double h_i = 0.0, h_j = 0.0, h_ij = 0.0;
};

struct InterfaceSegment {
    Side side = Side::bottom;  ///< side of the upper patch i
    double t0 = 0.0, t1 = 0.0;
    std::vector<InterfaceNode> nodes;
};

struct InterfaceQuadMesh {
    int i = -1, j = -1;
    std::vector<InterfaceSegment> segments;
    [[nodiscard]] bool empty() const { return segments.empty(); }
    [[nodiscard]] double length() const {
        double s = 0.0;
        for (const auto& seg : segments)
            for (const auto& n : seg.nodes) s += n.w;
        return s;
    }
    [[nodiscard]] std::size_t num_nodes() const {
        std::size_t n = 0;
        for (const auto& s : segments) n += s.nodes.size();
        return n;
    }
};

/// Visible portion of a patch side on the external boundary of the union.
struct BoundarySegment {
    Side side = Side::bottom;
    double t0 = 0.0, t1 = 0.0;
    std::vector<CurveNode> nodes;
};

struct UnionOptions {
    int cheb_degree = 6;          ///< trim-curve interpolation degree
    double cheb_tol = 1e-11;      ///< max interpolation error in parameter units
    int ratio_gauss = 8;          ///< Gauss points per band used for visible-area ratios
    int interface_gauss = 0;      ///< nodes per interface segment; 0 = max degree + 1
};

struct AssumptionReport {
    double max_h_ratio = 0.0;       ///< max over interface nodes of h_i / h_j (or its inverse)
    double max_measure_ratio = 0.0; ///< max over lower elements of meas(Gamma_ij in K) / h_j|K
    std::vector<std::string> warnings;
};

class MultiPatchUnion {
public:
    explicit MultiPatchUnion(std::vector<SplinePatch> patches, UnionOptions opt = {})
        : patches_(std::move(patches)), opt_(opt) {
        if (patches_.empty()) throw Error("union needs at least one patch");
        build();
    }
    MultiPatchUnion(const MultiPatchUnion&) = delete;
    MultiPatchUnion& operator=(const MultiPatchUnion&) = delete;

    [[nodiscard]] int num_patches() const { return static_cast<int>(patches_.size()); }
    [[nodiscard]] const SplinePatch& patch(int i) const { return patches_.at(i); }
    [[nodiscard]] const std::vector<SplinePatch>& patches() const { return patches_; }
    [[nodiscard]] const UnionOptions& options() const { return opt_; }
    [[nodiscard]] int max_degree() const {
        int p = 0;
        for (const auto& P : patches_) p = std::max(p, P.basis().max_degree());
        return p;
    }

    [[nodiscard]] const std::vector<ElementStatus>& status(int i) const { return status_.at(i); }
    [[nodiscard]] double element_h(int i, int e) const { return h_[i][e]; }

    /// True when x is hidden from patch i by some higher patch.
    [[nodiscard]] bool hidden(int i, const Point2& x) const {
        for (int l = i + 1; l < num_patches(); ++l)
            if (contains(patches_[l], x, BoundaryRule::exclude)) return true;
        return false;
    }
    [[nodiscard]] bool visible_param(int i, const Point2& uv) const { return !hidden(i, patches_[i].point(uv)); }

    /// Topmost patch whose closed image contains x, or -1.
    [[nodiscard]] int owner(const Point2& x) const {
        for (int l = num_patches() - 1; l >= 0; --l)
            if (contains(patches_[l], x, BoundaryRule::include)) return l;
        return -1;
    }

    /// Quadrature on the visible part of a cut element with n Gauss points per direction and band.
    [[nodiscard]] ParamRule cut_rule(int i, int e, int n) const {
        const ParamElement pe = patches_[i].basis().element(e);
        Box box{{pe.u0, pe.v0}, {pe.u1, pe.v1}};
        auto it = pieces_[i].find(e);
        static const std::vector<TrimPiece> none;
        const auto& pieces = it == pieces_[i].end() ? none : it->second;
        return integrate_trimmed_box(box, pieces, [&](const Point2& uv) { return visible_param(i, uv); }, n);
    }

    /// Cached rule for assembly (n = patch degree + 1).
    [[nodiscard]] const ParamRule& assembly_rule(int i, int e) const { return cut_rules_[i].at(e); }

    [[nodiscard]] const std::vector<TrimPiece>* trim_pieces(int i, int e) const {
        auto it = pieces_[i].find(e);
        return it == pieces_[i].end() ? nullptr : &it->second;
    }

    [[nodiscard]] const InterfaceQuadMesh& interface(int i, int j) const { return interfaces_.at({i, j}); }
    [[nodiscard]] bool delta(int i, int j) const { return !interface(i, j).empty(); }
    [[nodiscard]] int n_gamma() const {
        int n = 0;
        for (const auto& [key, m] : interfaces_) n += m.empty() ? 0 : 1;
        return n;
    }
    [[nodiscard]] const std::map<std::pair<int, int>, InterfaceQuadMesh>& interfaces() const { return interfaces_; }

    [[nodiscard]] const std::vector<BoundarySegment>& boundary(int i) const { return boundary_.at(i); }

    /// True when side s of patch i lies entirely on the external boundary.
    [[nodiscard]] bool side_fully_external(int i, Side s) const {
        double len = 0.0;
        for (const auto& b : boundary_[i])
            if (b.side == s) len += b.t1 - b.t0;
        return std::abs(len - 1.0) <= 1e-12;
    }

    /// Physical area of the visible part of patch i.
    [[nodiscard]] double visible_area(int i, int n_gauss = 8) const {
        double area = 0.0;
        const SplinePatch& P = patches_[i];
        const GaussRule& g = gauss_rule(n_gauss);
        for (int e = 0; e < P.basis().num_elements(); ++e) {
            const ElementStatus& st = status_[i][e];
            if (st.kind == ElementStatus::Kind::covered) continue;
            if (st.kind == ElementStatus::Kind::cut) {
                const ParamRule r = cut_rule(i, e, n_gauss);
                for (std::size_t q = 0; q < r.points.size(); ++q)
                    area += r.weights[q] * std::abs(P.map_point(r.points[q]).jac.determinant());
                continue;
            }
            const ParamElement pe = P.basis().element(e);
            for (std::size_t a = 0; a < g.size(); ++a)
                for (std::size_t b = 0; b < g.size(); ++b) {
                    const Point2 uv(pe.u0 + (pe.u1 - pe.u0) * g.points[a], pe.v0 + (pe.v1 - pe.v0) * g.points[b]);
                    area += g.weights[a] * g.weights[b] * pe.area() * std::abs(P.map_point(uv).jac.determinant());
                }
        }
        return area;
    }

    /// Quadrature nodes on one interface segment with n Gauss points.
    [[nodiscard]] std::vector<InterfaceNode> interface_nodes(int i, int j, Side side, double t0, double t1,
                                                             int n) const {
        const BoundaryCurve& c = curves_[i][static_cast<int>(side)];
        const GaussRule& g = gauss_rule(n);
        std::vector<InterfaceNode> out;
        std::optional<Point2> guess;
        for (std::size_t q = 0; q < g.size(); ++q) {
            InterfaceNode nd;
            fill_curve_node(nd, c, t0 + (t1 - t0) * g.points[q], (t1 - t0) * g.weights[q]);
            const InversionResult r = invert_point(patches_[j], nd.x, guess);
            if (!r.converged) {
                std::ostringstream msg;
                msg.precision(17);
                msg << "interface preimage failure at (" << nd.x.x() << ", " << nd.x.y() << ")";
                throw Error(msg.str());
            }
            guess = r.uv;
            nd.uv_j = r.uv;
            nd.elem_j = patches_[j].basis().element_of(r.uv);
            nd.h_i = h_[i][nd.elem];
            nd.h_j = h_[j][nd.elem_j];
            nd.h_ij = 1.0 / (1.0 / nd.h_i + 1.0 / nd.h_j);
            out.push_back(nd);
        }
        return out;
    }

    [[nodiscard]] std::vector<CurveNode> boundary_nodes(int i, Side side, double t0, double t1, int n) const {
        const BoundaryCurve& c = curves_[i][static_cast<int>(side)];
        const GaussRule& g = gauss_rule(n);
        std::vector<CurveNode> out(g.size());
        for (std::size_t q = 0; q < g.size(); ++q)
            fill_curve_node(out[q], c, t0 + (t1 - t0) * g.points[q], (t1 - t0) * g.weights[q]);
        return out;
    }

    [[nodiscard]] const BoundaryCurve& side_curve(int i, Side s) const { return curves_[i][static_cast<int>(s)]; }

    /// Mesh-compatibility diagnostics along the interfaces. Warnings only.
    [[nodiscard]] AssumptionReport check_assumptions(double h_ratio_limit = 10.0, double measure_limit = 4.0) const {
        AssumptionReport rep;
        for (const auto& [key, m] : interfaces_) {
            std::map<int, double> meas;
            for (const auto& seg : m.segments) {
                for (const auto& n : seg.nodes) {
                    rep.max_h_ratio = std::max({rep.max_h_ratio, n.h_i / n.h_j, n.h_j / n.h_i});
                    meas[n.elem_j] += n.w;
                }
            }
            for (const auto& [e, len] : meas)
                rep.max_measure_ratio = std::max(rep.max_measure_ratio, len / h_[key.second][e]);
        }
        if (rep.max_h_ratio > h_ratio_limit) {
            std::ostringstream s;
            s << "interface mesh size ratio " << rep.max_h_ratio << " exceeds " << h_ratio_limit;
            rep.warnings.push_back(s.str());
        }
        if (rep.max_measure_ratio > measure_limit) {
            std::ostringstream s;
            s << "interface measure per element ratio " << rep.max_measure_ratio << " exceeds " << measure_limit;
            rep.warnings.push_back(s.str());
        }
        return rep;
    }

    /// SVG picture of element classification, interfaces and the external boundary.
    void write_svg(const std::string& path) const;

private:
    void fill_curve_node(CurveNode& nd, const BoundaryCurve& c, double t, double w) const {
        const auto d = c.curve.eval(t);
        nd.t = t;
        nd.x = d[0];
        nd.w = w * d[1].norm();
        nd.normal = normal_on_boundary(c, t);
        nd.uv = c.uv(t);
        nd.elem = c.patch->basis().element_of(nd.uv);
    }

    void build() {
        const int n = num_patches();
        curves_.resize(n);
        h_.resize(n);
        hmin_.resize(n);
        for (int i = 0; i < n; ++i) {
            for (Side s : all_sides) curves_[i].emplace_back(i, s, patches_[i]);
            const int ne = patches_[i].basis().num_elements();
            h_[i].resize(ne);
            hmin_[i] = std::numeric_limits<double>::infinity();
            for (int e = 0; e < ne; ++e) {
                h_[i][e] = patches_[i].element_diameter(e);
                hmin_[i] = std::min(hmin_[i], h_[i][e]);
            }
        }
        status_.resize(n);
        pieces_.resize(n);
        cheb_.resize(n);
        cut_rules_.resize(n);
        for (int i = 0; i < n; ++i) classify(i);
        for (int i = 1; i < n; ++i)
            for (int j = 0; j < i; ++j) build_interface(i, j);
        boundary_.resize(n);
        for (int i = 0; i < n; ++i) build_boundary(i);
    }

    double h_ref(std::initializer_list<int> ids) const {
        double h = std::numeric_limits<double>::infinity();
        for (int k : ids) h = std::min(h, hmin_[k]);
        return h;
    }

    /// Chebyshev interpolants of the preimage in patch i of curve segment [t0,t1].
    void fit_trim(int i, const BoundaryCurve& c, double t0, double t1, int depth) {
        const SplinePatch& P = patches_[i];
        for (int q : {opt_.cheb_degree, 2 * opt_.cheb_degree}) {
            auto tau = [&](double s) { return t0 + 0.5 * (s + 1.0) * (t1 - t0); };
            std::vector<Vec2> vals(q + 1);
            std::optional<Point2> guess;
            bool ok = true;
            for (int k = q; k >= 0; --k) {
                const InversionResult r = invert_point(P, c.point(tau(ChebCurve::lobatto_node(k, q))), guess);
                ok = ok && r.converged;
                vals[k] = r.uv;
                guess = r.uv;
            }
            if (!ok) break;
            ChebCurve cc = ChebCurve::from_lobatto_values(vals);
            double err = 0.0;
            for (int k = 0; k < q; ++k) {
                const double s = std::cos(std::numbers::pi * (k + 0.5) / q);
                const InversionResult r = invert_point(P, c.point(tau(s)), vals[k]);
                err = std::max(err, (cc.eval(s) - r.uv).norm());
            }
            if (err <= opt_.cheb_tol) {
                cheb_[i].push_back(std::move(cc));
                const ChebCurve* ptr = &cheb_[i].back();
                const Vec2 mid = ptr->eval(0.0);
                const int e = P.basis().element_of(mid.cwiseMax(0.0).cwiseMin(1.0));
                pieces_[i][e].push_back({ptr, -1.0, 1.0});
                return;
            }
        }
        if (depth >= 8) throw Error("degenerate cut reparameterization");
        const double tm = 0.5 * (t0 + t1);
        fit_trim(i, c, t0, tm, depth + 1);
        fit_trim(i, c, tm, t1, depth + 1);
    }

    void classify(int i) {
        const int n = num_patches();
        const SplinePatch& P = patches_[i];
        const int ne = P.basis().num_elements();
        status_[i].assign(ne, ElementStatus{});
        if (i == n - 1) return;

        // Trim curves: sides of higher patches strictly inside patch i and not hidden by
        // another higher patch.
        for (int l = i + 1; l < n; ++l) {
            for (const BoundaryCurve& c : curves_[l]) {
                TraceRequest req;
                req.conditions.push_back({i, true, BoundaryRule::exclude});
                for (int m = i + 1; m < n; ++m)
                    if (m != l) req.conditions.push_back({m, false, BoundaryRule::exclude});
                req.split_patches = {i};
                req.h_ref = h_ref({i, l});
                for (const auto& seg : trace_curve(patches_, c, req)) fit_trim(i, c, seg.t0, seg.t1, 0);
            }
        }

        const int ng = P.basis().max_degree() + 1;
        for (int e = 0; e < ne; ++e) {
            ElementStatus& st = status_[i][e];
            const ParamElement pe = P.basis().element(e);
            if (pieces_[i].find(e) == pieces_[i].end()) {
                const bool vis = visible_param(i, pe.center());
                st.kind = vis ? ElementStatus::Kind::interior : ElementStatus::Kind::covered;
                st.ratio = vis ? 1.0 : 0.0;
                continue;
            }
            const double r = cut_rule(i, e, opt_.ratio_gauss).area() / pe.area();
            if (r > 1.0 - 1e-14) {
                st = {ElementStatus::Kind::interior, 1.0};
            } else if (r * pe.area() <= tol::dof_visible_area) {
                st = {ElementStatus::Kind::covered, 0.0};
            } else {
                st = {ElementStatus::Kind::cut, r};
                cut_rules_[i][e] = cut_rule(i, e, ng);
            }
        }
    }

    void build_interface(int i, int j) {
        InterfaceQuadMesh m;
        m.i = i;
        m.j = j;
        const int n = num_patches();
        const int ng = opt_.interface_gauss > 0
                           ? opt_.interface_gauss
                           : std::max(patches_[i].basis().max_degree(), patches_[j].basis().max_degree()) + 1;
        for (const BoundaryCurve& c : curves_[i]) {
            TraceRequest req;
            req.conditions.push_back({j, true, BoundaryRule::exclude});
            for (int k = j + 1; k < n; ++k)
                if (k != i) req.conditions.push_back({k, false, BoundaryRule::exclude});
            req.split_patches = {j};
            req.h_ref = h_ref({i, j});
            for (const auto& seg : trace_curve(patches_, c, req)) {
                InterfaceSegment s;
                s.side = c.side;
                s.t0 = seg.t0;
                s.t1 = seg.t1;
                s.nodes = interface_nodes(i, j, c.side, seg.t0, seg.t1, ng);
                m.segments.push_back(std::move(s));
            }
        }
        interfaces_[{i, j}] = std::move(m);
    }

    void build_boundary(int i) {
        const int n = num_patches();
        const int ng = patches_[i].basis().max_degree() + 1;
        for (const BoundaryCurve& c : curves_[i]) {
            TraceRequest req;
            for (int m = 0; m < n; ++m) {
                if (m == i) continue;
                // The closure of a higher patch hides the side; a lower patch only when strictly inside.
                req.conditions.push_back({m, false, m > i ? BoundaryRule::include : BoundaryRule::exclude});
            }
            req.h_ref = hmin_[i];
            for (const auto& seg : trace_curve(patches_, c, req)) {
                BoundarySegment b;
                b.side = c.side;
                b.t0 = seg.t0;
                b.t1 = seg.t1;
                b.nodes = boundary_nodes(i, c.side, seg.t0, seg.t1, ng);
                boundary_[i].push_back(std::move(b));
            }
        }
    }

    std::vector<SplinePatch> patches_;
    UnionOptions opt_;
    std::vector<std::vector<BoundaryCurve>> curves_;
    std::vector<std::vector<double>> h_;
    std::vector<double> hmin_;
    std::vector<std::vector<ElementStatus>> status_;
    std::vector<std::map<int, std::vector<TrimPiece>>> pieces_;
    std::vector<std::deque<ChebCurve>> cheb_;
    std::vector<std::map<int, ParamRule>> cut_rules_;
    std::map<std::pair<int, int>, InterfaceQuadMesh> interfaces_;
    std::vector<std::vector<BoundarySegment>> boundary_;
};

inline void MultiPatchUnion::write_svg(const std::string& path) const {
    Point2 lo = patches_[0].control_bbox().first, hi = patches_[0].control_bbox().second;
    for (const auto& P : patches_) {
        lo = lo.cwiseMin(P.control_bbox().first);
        hi = hi.cwiseMax(P.control_bbox().second);
    }
    const double size = 800.0;
    const double scale = size / std::max(hi.x() - lo.x(), hi.y() - lo.y());
    auto px = [&](const Point2& x) {
        std::ostringstream s;
        s << (x.x() - lo.x()) * scale + 10 << ',' << (hi.y() - x.y()) * scale + 10;
        return s.str();
    };
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 20 << "\" height=\"" << size + 20 << "\">\n";
    const char* fill[3] = {"#cfe8cf", "none", "#f3d27a"};
    for (int i = 0; i < num_patches(); ++i) {
        const SplinePatch& P = patches_[i];
        for (int e = 0; e < P.basis().num_elements(); ++e) {
            const ParamElement pe = P.basis().element(e);
            const int kind = static_cast<int>(status_[i][e].kind);
            out << "<polygon fill=\"" << fill[kind] << "\" fill-opacity=\"0.4\" stroke=\"#888\" stroke-width=\"0.5\" points=\"";
            const int m = 8;
            for (int k = 0; k < m; ++k) out << px(P.point({pe.u0 + (pe.u1 - pe.u0) * k / m, pe.v0})) << ' ';
            for (int k = 0; k < m; ++k) out << px(P.point({pe.u1, pe.v0 + (pe.v1 - pe.v0) * k / m})) << ' ';
            for (int k = 0; k < m; ++k) out << px(P.point({pe.u1 - (pe.u1 - pe.u0) * k / m, pe.v1})) << ' ';
            for (int k = 0; k < m; ++k) out << px(P.point({pe.u0, pe.v1 - (pe.v1 - pe.v0) * k / m})) << ' ';
            out << "\"/>\n";
        }
    }
    auto polyline = [&](const BoundaryCurve& c, double t0, double t1, const char* color) {
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (int k = 0; k <= 32; ++k) out << px(c.point(t0 + (t1 - t0) * k / 32.0)) << ' ';
        out << "\"/>\n";
    };
    for (const auto& [key, m] : interfaces_)
        for (const auto& s : m.segments) polyline(side_curve(key.first, s.side), s.t0, s.t1, "#c0392b");
    for (int i = 0; i < num_patches(); ++i)
        for (const auto& b : boundary_[i]) polyline(side_curve(i, b.side), b.t0, b.t1, "#2c3e50");
    out << "</svg>\n";
}

}  // namespace uiga
