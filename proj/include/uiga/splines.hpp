#pragma once

// Univariate and tensor-product B-spline / NURBS bases and patches on the
// parametric square [0,1]^2, with knot-insertion refinement.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uiga/common.hpp"
#include "uiga/quadrature.hpp"

namespace uiga {

/// Nonzero basis functions of one knot span and their derivatives.
/// ders[k][r] is the k-th derivative of basis function span-p+r.
struct BasisDerivs {
    int span = 0;
    std::vector<std::vector<double>> ders;
};

/// Open knot vector on [0,1].
class KnotVector {
public:
    KnotVector() = default;

    KnotVector(int degree, std::vector<double> knots) : degree_(degree), knots_(std::move(knots)) {
        validate();
        build_elements();
    }

    /// Affinely maps an open knot vector on [a,b] onto [0,1].
    static KnotVector rescaled(int degree, std::vector<double> knots) {
        if (knots.size() < 2) throw Error("knot vector too short");
        const double a = knots.front(), b = knots.back();
        if (!(b > a)) throw Error("degenerate knot vector range");
        for (double& k : knots) k = (k - a) / (b - a);
        knots.front() = 0.0;
        knots.back() = 1.0;
        return KnotVector(degree, std::move(knots));
    }

    /// Open uniform knot vector with the given number of elements.
    static KnotVector uniform(int degree, int n_elements) {
        std::vector<double> k(degree + 1, 0.0);
        for (int e = 1; e < n_elements; ++e) k.push_back(static_cast<double>(e) / n_elements);
        k.insert(k.end(), degree + 1, 1.0);
        return KnotVector(degree, std::move(k));
    }

    [[nodiscard]] int degree() const { return degree_; }
    [[nodiscard]] const std::vector<double>& knots() const { return knots_; }
    [[nodiscard]] int num_basis() const { return static_cast<int>(knots_.size()) - degree_ - 1; }
    [[nodiscard]] int num_elements() const { return static_cast<int>(breaks_.size()) - 1; }
    /// Distinct knot values (element boundaries), increasing.
    [[nodiscard]] const std::vector<double>& breakpoints() const { return breaks_; }

    /// Span index s with knots[s] <= u < knots[s+1]; u >= 1 maps to the last non-empty span.
    [[nodiscard]] int find_span(double u) const {
        const int n = num_basis();
        if (u >= knots_[n]) return n - 1;
        if (u <= knots_[degree_]) return degree_;
        int lo = degree_, hi = n;
        while (hi - lo > 1) {
            const int mid = (lo + hi) / 2;
            if (u < knots_[mid])
                hi = mid;
            else
                lo = mid;
        }
        return lo;
    }

    /// Element (non-empty span) containing u, same right-endpoint convention as find_span.
    [[nodiscard]] int element_of(double u) const { return span_element_[find_span(u)]; }
    [[nodiscard]] int element_span(int e) const { return element_span_[e]; }
    [[nodiscard]] double element_lo(int e) const { return breaks_[e]; }
    [[nodiscard]] double element_hi(int e) const { return breaks_[e + 1]; }

    /// Basis values and derivatives up to order n_derivs (<= 2) at u.
    [[nodiscard]] BasisDerivs eval(double u, int n_derivs) const {
        BasisDerivs out;
        eval(u, n_derivs, out);
        return out;
    }

    void eval(double u, int n_derivs, BasisDerivs& out) const {
        if (n_derivs < 0 || n_derivs > 2) throw Error("basis derivatives beyond order 2 are not supported");
        const int p = degree_;
        const int span = find_span(u);
        out.span = span;
        out.ders.assign(n_derivs + 1, std::vector<double>(p + 1, 0.0));

        // Piegl & Tiller, algorithm A2.3.
        std::vector<std::vector<double>> ndu(p + 1, std::vector<double>(p + 1, 0.0));
        std::vector<double> left(p + 1), right(p + 1);
        ndu[0][0] = 1.0;
        for (int j = 1; j <= p; ++j) {
            left[j] = u - knots_[span + 1 - j];
            right[j] = knots_[span + j] - u;
            double saved = 0.0;
            for (int r = 0; r < j; ++r) {
                ndu[j][r] = right[r + 1] + left[j - r];
                const double temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }
        for (int j = 0; j <= p; ++j) out.ders[0][j] = ndu[j][p];

        const int nd = std::min(n_derivs, p);
        std::array<std::vector<double>, 2> a{std::vector<double>(p + 1), std::vector<double>(p + 1)};
        for (int r = 0; r <= p; ++r) {
            int s1 = 0, s2 = 1;
            a[0].assign(p + 1, 0.0);
            a[1].assign(p + 1, 0.0);
            a[0][0] = 1.0;
            for (int k = 1; k <= nd; ++k) {
                double d = 0.0;
                const int rk = r - k, pk = p - k;
                if (r >= k) {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                    d = a[s2][0] * ndu[rk][pk];
                }
                const int j1 = (rk >= -1) ? 1 : -rk;
                const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
                for (int j = j1; j <= j2; ++j) {
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
                    d += a[s2][j] * ndu[rk + j][pk];
                }
                if (r <= pk) {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                out.ders[k][r] = d;
                std::swap(s1, s2);
            }
        }
        double fac = p;
        for (int k = 1; k <= nd; ++k) {
            for (double& v : out.ders[k]) v *= fac;
            fac *= (p - k);
        }
    }

    /// Greville abscissae, one per basis function.
    [[nodiscard]] std::vector<double> greville() const {
        std::vector<double> g(num_basis());
        for (int k = 0; k < num_basis(); ++k) {
            if (degree_ == 0) {
                g[k] = 0.5 * (knots_[k] + knots_[k + 1]);
                continue;
            }
            double s = 0.0;
            for (int r = 1; r <= degree_; ++r) s += knots_[k + r];
            g[k] = s / degree_;
        }
        return g;
    }

    /// Knots to insert so that every element is split into n_subdiv equal parts.
    [[nodiscard]] std::vector<double> subdivision_knots(int n_subdiv) const {
        std::vector<double> extra;
        for (int e = 0; e < num_elements(); ++e)
            for (int s = 1; s < n_subdiv; ++s)
                extra.push_back(breaks_[e] + (breaks_[e + 1] - breaks_[e]) * s / n_subdiv);
        return extra;
    }

    friend bool operator==(const KnotVector& a, const KnotVector& b) {
        return a.degree_ == b.degree_ && a.knots_ == b.knots_;
    }

private:
    void validate() const {
        const int p = degree_;
        if (p < 0) throw Error("negative spline degree");
        const int m = static_cast<int>(knots_.size());
        if (m < 2 * (p + 1)) throw Error("knot vector too short for its degree");
        for (int i = 1; i < m; ++i)
            if (knots_[i] < knots_[i - 1]) throw Error("knot vector is not non-decreasing");
        if (knots_.front() != 0.0 || knots_.back() != 1.0) throw Error("knot vector must span [0,1]");
        for (int i = 0; i <= p; ++i)
            if (knots_[i] != 0.0 || knots_[m - 1 - i] != 1.0) throw Error("knot vector is not open");
        if (knots_[p + 1] == 0.0 || knots_[m - p - 2] == 1.0)
            throw Error("end knots repeated more than degree+1 times");
        int mult = 1;
        for (int i = p + 2; i < m - p - 1; ++i) {
            mult = (knots_[i] == knots_[i - 1]) ? mult + 1 : 1;
            if (mult > p) throw Error("interior knot multiplicity exceeds the degree");
        }
    }

    void build_elements() {
        breaks_.clear();
        element_span_.clear();
        span_element_.assign(knots_.size(), -1);
        for (int s = degree_; s < num_basis(); ++s) {
            if (knots_[s + 1] > knots_[s]) {
                if (breaks_.empty()) breaks_.push_back(knots_[s]);
                breaks_.push_back(knots_[s + 1]);
                element_span_.push_back(s);
            }
        }
        int last = 0;
        for (std::size_t s = 0; s < knots_.size(); ++s) {
            const auto it = std::find(element_span_.begin(), element_span_.end(), static_cast<int>(s));
            if (it != element_span_.end()) last = static_cast<int>(it - element_span_.begin());
            span_element_[s] = last;
        }
    }

    int degree_ = 0;
    std::vector<double> knots_;
    std::vector<double> breaks_;
    std::vector<int> element_span_;
    std::vector<int> span_element_;
};

/// Parametric element of a tensor basis.
struct ParamElement {
    int eu = 0, ev = 0;
    double u0 = 0, u1 = 0, v0 = 0, v1 = 0;
    [[nodiscard]] double area() const { return (u1 - u0) * (v1 - v0); }
    [[nodiscard]] Point2 center() const { return {0.5 * (u0 + u1), 0.5 * (v0 + v1)}; }
};

/// Tensor-product basis on [0,1]^2. Flat basis index a + nu*b, element id eu + neu*ev.
class TensorBasis {
public:
    TensorBasis() = default;
    TensorBasis(KnotVector ku, KnotVector kv) : k_{std::move(ku), std::move(kv)} {}

    [[nodiscard]] const KnotVector& knots(int dir) const { return k_[dir]; }
    [[nodiscard]] int degree(int dir) const { return k_[dir].degree(); }
    [[nodiscard]] int max_degree() const { return std::max(degree(0), degree(1)); }
    [[nodiscard]] int num_basis(int dir) const { return k_[dir].num_basis(); }
    [[nodiscard]] int num_basis() const { return num_basis(0) * num_basis(1); }
    [[nodiscard]] int num_elements(int dir) const { return k_[dir].num_elements(); }
    [[nodiscard]] int num_elements() const { return num_elements(0) * num_elements(1); }
    [[nodiscard]] int basis_index(int a, int b) const { return a + num_basis(0) * b; }
    [[nodiscard]] int element_id(int eu, int ev) const { return eu + num_elements(0) * ev; }
    [[nodiscard]] int element_of(const Point2& uv) const {
        return element_id(k_[0].element_of(uv.x()), k_[1].element_of(uv.y()));
    }

    [[nodiscard]] ParamElement element(int id) const {
        ParamElement e;
        e.eu = id % num_elements(0);
        e.ev = id / num_elements(0);
        e.u0 = k_[0].element_lo(e.eu);
        e.u1 = k_[0].element_hi(e.eu);
        e.v0 = k_[1].element_lo(e.ev);
        e.v1 = k_[1].element_hi(e.ev);
        return e;
    }

    /// Flat indices of the (p+1)(q+1) basis functions supported on an element.
    [[nodiscard]] std::vector<int> element_basis(int id) const {
        const ParamElement e = element(id);
        const int su = k_[0].element_span(e.eu), sv = k_[1].element_span(e.ev);
        std::vector<int> out;
        for (int b = 0; b <= degree(1); ++b)
            for (int a = 0; a <= degree(0); ++a) out.push_back(basis_index(su - degree(0) + a, sv - degree(1) + b));
        return out;
    }

    /// Element index range [first, last] in one direction covered by the support of 1D function k.
    [[nodiscard]] std::pair<int, int> support_elements(int dir, int k) const {
        const auto& kn = k_[dir].knots();
        const int p = degree(dir);
        const double lo = kn[k], hi = kn[k + p + 1];
        return {k_[dir].element_of(lo), k_[dir].element_of(std::nextafter(hi, 0.0))};
    }

private:
    std::array<KnotVector, 2> k_;
};

/// Evaluated basis at one parametric point: rational when the patch has weights.
struct BasisEval {
    int span_u = 0, span_v = 0;
    std::vector<int> index;          ///< flat basis indices
    std::vector<double> value;
    std::vector<Vec2> grad_param;    ///< derivatives w.r.t. (u,v)
    std::vector<Vec2> grad;          ///< physical gradients (filled when requested)
    Point2 x = Point2::Zero();
    Mat2 jac = Mat2::Zero();         ///< jac(r,c) = d x_r / d uv_c
    double det = 0.0;
};

/// Image point and Jacobian of the patch map.
struct MapPoint {
    Point2 x;
    Mat2 jac;
};

/// Tensor-product B-spline or NURBS patch in the plane.
class SplinePatch {
public:
    SplinePatch() = default;

    /// Validates dimensions, weights, and a strict Jacobian sign at all Gauss points.
    static SplinePatch create(TensorBasis basis, std::vector<Point2> control, std::vector<double> weights = {}) {
        SplinePatch p;
        p.basis_ = std::move(basis);
        p.ctrl_ = std::move(control);
        p.w_ = std::move(weights);
        p.validate();
        return p;
    }

    [[nodiscard]] const TensorBasis& basis() const { return basis_; }
    [[nodiscard]] const std::vector<Point2>& control() const { return ctrl_; }
    [[nodiscard]] const std::vector<double>& weights() const { return w_; }
    [[nodiscard]] bool rational() const { return !w_.empty(); }
    [[nodiscard]] double weight(int k) const { return w_.empty() ? 1.0 : w_[k]; }
    [[nodiscard]] int orientation() const { return orientation_; }

    /// Axis-aligned box of the control net (contains the image by the convex hull property).
    [[nodiscard]] std::pair<Point2, Point2> control_bbox() const {
        Point2 lo = ctrl_.front(), hi = ctrl_.front();
        for (const auto& c : ctrl_) {
            lo = lo.cwiseMin(c);
            hi = hi.cwiseMax(c);
        }
        return {lo, hi};
    }

    [[nodiscard]] double diameter() const {
        const auto [lo, hi] = control_bbox();
        return (hi - lo).norm();
    }

    /// Basis values and parametric (and optionally physical) first derivatives at uv.
    void eval_basis(const Point2& uv, BasisEval& out, bool physical_grad = true) const {
        const int p = basis_.degree(0), q = basis_.degree(1);
        thread_local BasisDerivs bu, bv;
        basis_.knots(0).eval(uv.x(), 1, bu);
        basis_.knots(1).eval(uv.y(), 1, bv);
        const int n = (p + 1) * (q + 1);
        out.span_u = bu.span;
        out.span_v = bv.span;
        out.index.resize(n);
        out.value.resize(n);
        out.grad_param.resize(n);
        double W = 0.0, Wu = 0.0, Wv = 0.0;
        int r = 0;
        for (int b = 0; b <= q; ++b) {
            for (int a = 0; a <= p; ++a, ++r) {
                const int k = basis_.basis_index(bu.span - p + a, bv.span - q + b);
                const double w = weight(k);
                out.index[r] = k;
                out.value[r] = bu.ders[0][a] * bv.ders[0][b] * w;
                out.grad_param[r] = Vec2(bu.ders[1][a] * bv.ders[0][b] * w, bu.ders[0][a] * bv.ders[1][b] * w);
                W += out.value[r];
                Wu += out.grad_param[r].x();
                Wv += out.grad_param[r].y();
            }
        }
        if (rational()) {
            const Vec2 dW(Wu, Wv);
            for (int i = 0; i < n; ++i) {
                const double R = out.value[i] / W;
                out.grad_param[i] = (out.grad_param[i] - R * dW) / W;
                out.value[i] = R;
            }
        }
        out.x.setZero();
        out.jac.setZero();
        for (int i = 0; i < n; ++i) {
            const Point2& c = ctrl_[out.index[i]];
            out.x += out.value[i] * c;
            out.jac += c * out.grad_param[i].transpose();
        }
        out.det = out.jac.determinant();
        if (physical_grad) {
            out.grad.resize(n);
            const Mat2 jinv_t = out.jac.inverse().transpose();
            for (int i = 0; i < n; ++i) out.grad[i] = jinv_t * out.grad_param[i];
        }
    }

    /// Physical point and Jacobian at uv (rational quotient rule when weighted).
    [[nodiscard]] MapPoint map_point(const Point2& uv) const {
        thread_local BasisEval ev;
        eval_basis(uv, ev, false);
        return {ev.x, ev.jac};
    }

    [[nodiscard]] Point2 point(const Point2& uv) const { return map_point(uv).x; }

    /// Physical diameter surrogate of an element: diagonal of the bounding box of its corner images.
    [[nodiscard]] double element_diameter(int id) const {
        const ParamElement e = basis_.element(id);
        const auto [lo, hi] = element_corner_bbox(e);
        return (hi - lo).norm();
    }

    [[nodiscard]] std::pair<Point2, Point2> element_corner_bbox(const ParamElement& e) const {
        const Point2 c[4] = {point({e.u0, e.v0}), point({e.u1, e.v0}), point({e.u1, e.v1}), point({e.u0, e.v1})};
        Point2 lo = c[0], hi = c[0];
        for (const auto& x : c) {
            lo = lo.cwiseMin(x);
            hi = hi.cwiseMax(x);
        }
        return {lo, hi};
    }

    /// Knot insertion along one direction (Boehm), in homogeneous coordinates.
    [[nodiscard]] SplinePatch insert_knots(int dir, const std::vector<double>& new_knots) const;

    /// Splits every Bezier element into n_subdiv x n_subdiv equal parts; geometry is preserved.
    [[nodiscard]] SplinePatch h_refine(int n_subdiv) const {
        if (n_subdiv < 1) throw Error("h_refine needs n_subdiv >= 1");
        if (n_subdiv == 1) return *this;
        return insert_knots(0, basis_.knots(0).subdivision_knots(n_subdiv))
            .insert_knots(1, basis_.knots(1).subdivision_knots(n_subdiv));
    }

    friend bool operator==(const SplinePatch& a, const SplinePatch& b) {
        return a.basis_.knots(0) == b.basis_.knots(0) && a.basis_.knots(1) == b.basis_.knots(1) &&
               a.ctrl_ == b.ctrl_ && a.w_ == b.w_;
    }

private:
    void validate() {
        if (static_cast<int>(ctrl_.size()) != basis_.num_basis())
            throw Error("control grid dimensions do not match the basis");
        if (!w_.empty()) {
            if (w_.size() != ctrl_.size()) throw Error("weight count does not match control grid");
            for (double w : w_)
                if (!(w > 0.0)) throw Error("NURBS weights must be positive");
        }
        const int n = basis_.max_degree() + 1;
        const GaussRule& g = gauss_rule(n);
        int sign = 0;
        for (int id = 0; id < basis_.num_elements(); ++id) {
            const ParamElement e = basis_.element(id);
            for (std::size_t i = 0; i < g.size(); ++i) {
                for (std::size_t j = 0; j < g.size(); ++j) {
                    const Point2 uv(e.u0 + (e.u1 - e.u0) * g.points[i], e.v0 + (e.v1 - e.v0) * g.points[j]);
                    const double d = map_point(uv).jac.determinant();
                    const int s = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
                    if (s == 0 || (sign != 0 && s != sign))
                        throw Error("patch map is not bi-Lipschitz: Jacobian determinant changes sign");
                    sign = s;
                }
            }
        }
        orientation_ = sign;
    }

    TensorBasis basis_;
    std::vector<Point2> ctrl_;
    std::vector<double> w_;
    int orientation_ = 1;
};

namespace detail {

/// Boehm insertion of one knot into a 1D sequence of homogeneous points.
inline void insert_one(int p, std::vector<double>& knots, std::vector<Eigen::Vector3d>& pts, double u) {
    const int n = static_cast<int>(pts.size());
    int k = p;
    while (k + 1 < static_cast<int>(knots.size()) && knots[k + 1] <= u) ++k;
    if (k >= n) k = n - 1;
    std::vector<Eigen::Vector3d> q(n + 1);
    for (int i = 0; i <= k - p; ++i) q[i] = pts[i];
    for (int i = k - p + 1; i <= k; ++i) {
        const double alpha = (u - knots[i]) / (knots[i + p] - knots[i]);
        q[i] = alpha * pts[i] + (1.0 - alpha) * pts[i - 1];
    }
    for (int i = k + 1; i <= n; ++i) q[i] = pts[i - 1];
    knots.insert(knots.begin() + k + 1, u);
    pts = std::move(q);
}

}  // namespace detail

inline SplinePatch SplinePatch::insert_knots(int dir, const std::vector<double>& new_knots) const {
    const int nu = basis_.num_basis(0), nv = basis_.num_basis(1);
    const int p = basis_.degree(dir);
    const int n_lines = dir == 0 ? nv : nu;
    const int n_along = dir == 0 ? nu : nv;
    std::vector<double> knots_out;
    std::vector<std::vector<Eigen::Vector3d>> lines(n_lines);
    for (int l = 0; l < n_lines; ++l) {
        std::vector<double> kn = basis_.knots(dir).knots();
        auto& pts = lines[l];
        pts.resize(n_along);
        for (int s = 0; s < n_along; ++s) {
            const int k = dir == 0 ? basis_.basis_index(s, l) : basis_.basis_index(l, s);
            const double w = weight(k);
            pts[s] = Eigen::Vector3d(ctrl_[k].x() * w, ctrl_[k].y() * w, w);
        }
        for (double u : new_knots) detail::insert_one(p, kn, pts, u);
        knots_out = kn;
    }
    KnotVector refined(p, knots_out);
    TensorBasis nb = dir == 0 ? TensorBasis(refined, basis_.knots(1)) : TensorBasis(basis_.knots(0), refined);
    std::vector<Point2> c(nb.num_basis());
    std::vector<double> w(rational() ? nb.num_basis() : 0);
    const int m_along = static_cast<int>(lines.empty() ? 0 : lines[0].size());
    for (int l = 0; l < n_lines; ++l) {
        for (int s = 0; s < m_along; ++s) {
            const int k = dir == 0 ? nb.basis_index(s, l) : nb.basis_index(l, s);
            const Eigen::Vector3d& h = lines[l][s];
            c[k] = Point2(h.x() / h.z(), h.y() / h.z());
            if (rational()) w[k] = h.z();
        }
    }
    SplinePatch out;
    out.basis_ = std::move(nb);
    out.ctrl_ = std::move(c);
    out.w_ = std::move(w);
    out.orientation_ = orientation_;
    return out;
}

/// 1D NURBS curve in the plane; used for patch sides.
class SplineCurve {
public:
    SplineCurve() = default;
    SplineCurve(KnotVector kv, std::vector<Point2> ctrl, std::vector<double> w)
        : kv_(std::move(kv)), ctrl_(std::move(ctrl)), w_(std::move(w)) {}

    [[nodiscard]] const KnotVector& knots() const { return kv_; }

    /// Point, first and second derivative at t.
    [[nodiscard]] std::array<Vec2, 3> eval(double t) const {
        thread_local BasisDerivs b;
        kv_.eval(t, 2, b);
        const int p = kv_.degree();
        Eigen::Vector3d a[3] = {Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()};
        for (int r = 0; r <= p; ++r) {
            const int k = b.span - p + r;
            const double w = w_.empty() ? 1.0 : w_[k];
            const Eigen::Vector3d h(ctrl_[k].x() * w, ctrl_[k].y() * w, w);
            for (int d = 0; d < 3; ++d) a[d] += b.ders[d][r] * h;
        }
        // Quotient rule for A(t)/w(t).
        const double w0 = a[0].z(), w1 = a[1].z(), w2 = a[2].z();
        const Vec2 A0 = a[0].head<2>(), A1 = a[1].head<2>(), A2 = a[2].head<2>();
        const Vec2 c0 = A0 / w0;
        const Vec2 c1 = (A1 - w1 * c0) / w0;
        const Vec2 c2 = (A2 - 2.0 * w1 * c1 - w2 * c0) / w0;
        return {c0, c1, c2};
    }

    [[nodiscard]] Point2 point(double t) const { return eval(t)[0]; }

private:
    KnotVector kv_;
    std::vector<Point2> ctrl_;
    std::vector<double> w_;
};

/// Restriction of a patch map to one parametric side.
inline SplineCurve extract_side(const SplinePatch& patch, Side s) {
    const TensorBasis& tb = patch.basis();
    const int dir = side_direction(s);
    const int n = tb.num_basis(dir);
    std::vector<Point2> c(n);
    std::vector<double> w(patch.rational() ? n : 0);
    for (int k = 0; k < n; ++k) {
        int idx = 0;
        switch (s) {
            case Side::bottom: idx = tb.basis_index(k, 0); break;
            case Side::top: idx = tb.basis_index(k, tb.num_basis(1) - 1); break;
            case Side::left: idx = tb.basis_index(0, k); break;
            case Side::right: idx = tb.basis_index(tb.num_basis(0) - 1, k); break;
        }
        c[k] = patch.control()[idx];
        if (patch.rational()) w[k] = patch.weight(idx);
    }
    return SplineCurve(tb.knots(dir), std::move(c), std::move(w));
}

/// Flat basis indices whose trace on side s is nonzero, ordered along the side.
inline std::vector<int> side_basis(const TensorBasis& tb, Side s) {
    const int dir = side_direction(s);
    std::vector<int> out;
    for (int k = 0; k < tb.num_basis(dir); ++k) {
        switch (s) {
            case Side::bottom: out.push_back(tb.basis_index(k, 0)); break;
            case Side::top: out.push_back(tb.basis_index(k, tb.num_basis(1) - 1)); break;
            case Side::left: out.push_back(tb.basis_index(0, k)); break;
            case Side::right: out.push_back(tb.basis_index(tb.num_basis(0) - 1, k)); break;
        }
    }
    return out;
}

/// Patch whose map is the affine image of [0,1]^2 spanned by origin + u*e_u + v*e_v.
/// Control points sit at the images of the Greville abscissae, which makes the map exactly affine.
inline SplinePatch affine_patch(const KnotVector& ku, const KnotVector& kv, const Point2& origin, const Vec2& e_u,
                                const Vec2& e_v) {
    TensorBasis tb(ku, kv);
    const auto gu = ku.greville(), gv = kv.greville();
    std::vector<Point2> c(tb.num_basis());
    for (int b = 0; b < tb.num_basis(1); ++b)
        for (int a = 0; a < tb.num_basis(0); ++a) c[tb.basis_index(a, b)] = origin + gu[a] * e_u + gv[b] * e_v;
    return SplinePatch::create(std::move(tb), std::move(c));
}

/// Raises the degree in one direction by `times` for a patch with a single element in that
/// direction (Bezier elevation in homogeneous coordinates; the map is unchanged).
inline SplinePatch elevate_bezier(const SplinePatch& patch, int dir, int times) {
    const TensorBasis& tb = patch.basis();
    if (tb.num_elements(dir) != 1) throw Error("degree elevation needs a single element in that direction");
    SplinePatch cur = patch;
    for (int t = 0; t < times; ++t) {
        const TensorBasis& b = cur.basis();
        const int p = b.degree(dir);
        const KnotVector up = KnotVector::uniform(p + 1, 1);
        TensorBasis nb = dir == 0 ? TensorBasis(up, b.knots(1)) : TensorBasis(b.knots(0), up);
        const int n_lines = b.num_basis(1 - dir);
        std::vector<Point2> c(nb.num_basis());
        std::vector<double> w(cur.rational() ? nb.num_basis() : 0);
        for (int l = 0; l < n_lines; ++l) {
            auto old_index = [&](int s) { return dir == 0 ? b.basis_index(s, l) : b.basis_index(l, s); };
            auto new_index = [&](int s) { return dir == 0 ? nb.basis_index(s, l) : nb.basis_index(l, s); };
            auto hom = [&](int s) {
                const int k = old_index(s);
                const double wk = cur.weight(k);
                return Eigen::Vector3d(cur.control()[k].x() * wk, cur.control()[k].y() * wk, wk);
            };
            for (int i = 0; i <= p + 1; ++i) {
                const double a = static_cast<double>(i) / (p + 1);
                Eigen::Vector3d h = Eigen::Vector3d::Zero();
                if (i > 0) h += a * hom(i - 1);
                if (i <= p) h += (1.0 - a) * hom(i);
                const int k = new_index(i);
                c[k] = Point2(h.x() / h.z(), h.y() / h.z());
                if (cur.rational()) w[k] = h.z();
            }
        }
        cur = SplinePatch::create(std::move(nb), std::move(c), std::move(w));
    }
    return cur;
}

/// Axis-aligned rectangle [x0,x1] x [y0,y1] with uniform open knots.
inline SplinePatch rectangle_patch(int degree, int nx, int ny, double x0, double x1, double y0, double y1) {
    return affine_patch(KnotVector::uniform(degree, nx), KnotVector::uniform(degree, ny), {x0, y0}, {x1 - x0, 0.0},
                        {0.0, y1 - y0});
}

}  // namespace uiga
