#pragma once

// Good/bad classification of cut elements, good-neighbour pairing, local L2 projection onto
// tensor Bernstein polynomials and the stabilized normal flux.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "uiga/multimesh.hpp"

namespace uiga {

/// Tensor Bernstein polynomials of degree p on an axis-aligned box.
class BernsteinBox {
public:
    BernsteinBox() = default;
    BernsteinBox(const Point2& lo, const Point2& hi, int degree) : lo_(lo), hi_(hi), p_(degree) {}

    [[nodiscard]] int degree() const { return p_; }
    [[nodiscard]] int size() const { return (p_ + 1) * (p_ + 1); }
    [[nodiscard]] const Point2& lo() const { return lo_; }
    [[nodiscard]] const Point2& hi() const { return hi_; }

    /// Values and physical gradients of all (p+1)^2 polynomials; index a + (p+1) b.
    void eval(const Point2& x, std::vector<double>& val, std::vector<Vec2>& grad) const {
        double bu[8], du[8], bv[8], dv[8];
        const double wu = hi_.x() - lo_.x(), wv = hi_.y() - lo_.y();
        univariate((x.x() - lo_.x()) / wu, bu, du);
        univariate((x.y() - lo_.y()) / wv, bv, dv);
        val.resize(size());
        grad.resize(size());
        for (int b = 0; b <= p_; ++b)
            for (int a = 0; a <= p_; ++a) {
                const int k = a + (p_ + 1) * b;
                val[k] = bu[a] * bv[b];
                grad[k] = Vec2(du[a] * bv[b] / wu, bu[a] * dv[b] / wv);
            }
    }

private:
    /// Bernstein values and derivatives at t, built from the degree p-1 basis.
    void univariate(double t, double* b, double* d) const {
        const int p = p_;
        double low[8] = {1.0, 0, 0, 0, 0, 0, 0, 0};
        for (int q = 1; q < p; ++q)
            for (int k = q; k >= 0; --k) low[k] = (k > 0 ? t * low[k - 1] : 0.0) + (1.0 - t) * low[k];
        for (int k = 0; k <= p; ++k) {
            const double lm = k > 0 ? low[k - 1] : 0.0;
            const double lk = k < p ? low[k] : 0.0;
            d[k] = p * (lm - lk);
            b[k] = p == 0 ? 1.0 : t * lm + (1.0 - t) * lk;
        }
    }

    Point2 lo_ = Point2::Zero(), hi_ = Point2::Ones();
    int p_ = 0;
};

struct NeighborPairing {
    int patch = -1, elem = -1;         ///< bad element K
    int nb_patch = -1, nb_elem = -1;   ///< good neighbour K'
    int step = 0;                      ///< 1 = same patch, 2 = higher patch
    int ring = 0;                      ///< ring (step 1) or radius doublings (step 2)
    double ratio = 0.0;                ///< visible ratio of K
};

/// Projection of the basis functions supported on K' onto Bernstein polynomials on a box.
struct BernsteinExtension {
    int patch = -1, elem = -1;
    BernsteinBox box;
    std::vector<int> basis;   ///< flat basis indices (patch-local) of the functions on K'
    Eigen::MatrixXd coef;     ///< |basis| x (p+1)^2
};

struct FluxEntry {
    int patch = -1;
    int basis = -1;
    double value = 0.0;
};

struct StabilizationOptions {
    double theta = 0.1;
    double step2_radius = 2.0;   ///< search radius for higher patches, in units of h_i|K
    double max_condition = 1e12; ///< reject local projections beyond this conditioning
};

class Stabilizer {
public:
    Stabilizer(const MultiPatchUnion& U, StabilizationOptions opt = {}) : U_(U), opt_(opt) {
        if (!(opt_.theta > 0.0 && opt_.theta <= 1.0)) throw Error("theta must lie in (0,1]");
        classify();
        pair_interface_elements();
    }

    [[nodiscard]] const StabilizationOptions& options() const { return opt_; }
    [[nodiscard]] bool is_bad(int i, int e) const { return bad_[i][e]; }
    [[nodiscard]] bool is_good(int i, int e) const {
        return U_.status(i)[e].kind != ElementStatus::Kind::covered && !bad_[i][e];
    }
    [[nodiscard]] int num_cut() const { return n_cut_; }
    [[nodiscard]] int num_bad() const { return n_bad_; }
    /// Bad elements among cut elements (0 when nothing is cut).
    [[nodiscard]] double bad_fraction() const { return n_cut_ == 0 ? 0.0 : static_cast<double>(n_bad_) / n_cut_; }

    [[nodiscard]] const std::map<std::pair<int, int>, NeighborPairing>& pairings() const { return pairings_; }
    [[nodiscard]] const NeighborPairing& pairing(int i, int e) const { return pairings_.at({i, e}); }
    [[nodiscard]] const BernsteinExtension& extension(int i, int e) const { return extensions_.at({i, e}); }

    /// Good neighbour of a bad element: same patch rings 1 and 2, then higher patches.
    [[nodiscard]] NeighborPairing find_good_neighbor(int i, int e) const {
        NeighborPairing best;
        BernsteinExtension ext;
        if (!try_pairing(i, e, best, ext)) throw Error(isolated_message(i, e));
        return best;
    }

    /// Normal flux stencil of the field of patch `patch` at a point of element `elem`:
    /// plain dB/dn on good elements (and always on the top patch), otherwise the normal
    /// derivative of the extended projection from the good neighbour.
    void flux(int patch, int elem, const Point2& uv, const Point2& x, const Vec2& n, bool stabilize,
              std::vector<FluxEntry>& out) const {
        out.clear();
        if (!stabilize || patch == U_.num_patches() - 1 || !bad_[patch][elem]) {
            thread_local BasisEval ev;
            U_.patch(patch).eval_basis(uv, ev, true);
            for (std::size_t r = 0; r < ev.index.size(); ++r) out.push_back({patch, ev.index[r], ev.grad[r].dot(n)});
            return;
        }
        const BernsteinExtension& ext = extensions_.at({patch, elem});
        thread_local std::vector<double> bv;
        thread_local std::vector<Vec2> bg;
        ext.box.eval(x, bv, bg);
        for (std::size_t r = 0; r < ext.basis.size(); ++r) {
            double v = 0.0;
            for (int l = 0; l < ext.box.size(); ++l) v += ext.coef(r, l) * bg[l].dot(n);
            out.push_back({ext.patch, ext.basis[r], v});
        }
    }

    /// Projection of the basis functions of K' onto Bernstein polynomials of the box
    /// enclosing K' and K (corner images plus a 10% margin).
    [[nodiscard]] BernsteinExtension build_extension(int k, int ek, int i, int e) const {
        const SplinePatch& P = U_.patch(k);
        const int p = P.basis().max_degree();
        auto [lo, hi] = P.element_corner_bbox(P.basis().element(ek));
        const auto [lo2, hi2] = U_.patch(i).element_corner_bbox(U_.patch(i).basis().element(e));
        lo = lo.cwiseMin(lo2);
        hi = hi.cwiseMax(hi2);
        const Vec2 margin = 0.1 * (hi - lo);
        BernsteinExtension ext;
        ext.patch = k;
        ext.elem = ek;
        ext.box = BernsteinBox(lo - margin, hi + margin, p);
        ext.basis = P.basis().element_basis(ek);

        const int nb = ext.box.size();
        const int nf = static_cast<int>(ext.basis.size());
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nb, nb);
        Eigen::MatrixXd F = Eigen::MatrixXd::Zero(nb, nf);
        std::vector<double> bv;
        std::vector<Vec2> bg;
        BasisEval ev;
        auto add = [&](const Point2& uv, double w) {
            P.eval_basis(uv, ev, false);
            const double dx = w * std::abs(ev.det);
            ext.box.eval(ev.x, bv, bg);
            for (int m = 0; m < nb; ++m) {
                for (int l = 0; l < nb; ++l) M(m, l) += dx * bv[m] * bv[l];
                for (int r = 0; r < nf; ++r) F(m, r) += dx * bv[m] * ev.value[r];
            }
        };
        const int nq = p + 2;
        if (U_.status(k)[ek].kind == ElementStatus::Kind::cut) {
            const ParamRule rule = U_.cut_rule(k, ek, nq);
            for (std::size_t q = 0; q < rule.points.size(); ++q) add(rule.points[q], rule.weights[q]);
        } else {
            const ParamElement pe = P.basis().element(ek);
            const GaussRule& g = gauss_rule(nq);
            for (std::size_t a = 0; a < g.size(); ++a)
                for (std::size_t b = 0; b < g.size(); ++b)
                    add({pe.u0 + (pe.u1 - pe.u0) * g.points[a], pe.v0 + (pe.v1 - pe.v0) * g.points[b]},
                        g.weights[a] * g.weights[b] * pe.area());
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M, Eigen::EigenvaluesOnly);
        const double lmin = eig.eigenvalues().minCoeff(), lmax = eig.eigenvalues().maxCoeff();
        if (!(lmin > 0.0) || lmax / lmin > opt_.max_condition) throw Error("ill-conditioned local projection");
        Eigen::LLT<Eigen::MatrixXd> llt(M);
        ext.coef = llt.solve(F).transpose();
        return ext;
    }

    /// One row per paired bad element.
    void write_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw Error("cannot write " + path);
        out << "patch,element,ratio,neighbor_patch,neighbor_element,step\n";
        out.precision(17);
        for (const auto& [key, p] : pairings_)
            out << p.patch << ',' << p.elem << ',' << p.ratio << ',' << p.nb_patch << ',' << p.nb_elem << ',' << p.step
                << '\n';
    }

private:
    void classify() {
        const int n = U_.num_patches();
        bad_.resize(n);
        for (int i = 0; i < n; ++i) {
            const auto& st = U_.status(i);
            bad_[i].assign(st.size(), false);
            if (i == n - 1) continue;
            for (std::size_t e = 0; e < st.size(); ++e) {
                if (st[e].kind != ElementStatus::Kind::cut) continue;
                ++n_cut_;
                if (st[e].ratio < opt_.theta) {
                    bad_[i][e] = true;
                    ++n_bad_;
                }
            }
        }
    }

    void pair_interface_elements() {
        for (const auto& [key, m] : U_.interfaces()) {
            for (const auto& seg : m.segments) {
                for (const auto& nd : seg.nodes) {
                    for (auto [q, e] : {std::pair{key.first, nd.elem}, std::pair{key.second, nd.elem_j}}) {
                        if (q == U_.num_patches() - 1 || !bad_[q][e] || pairings_.count({q, e})) continue;
                        NeighborPairing p;
                        BernsteinExtension ext;
                        if (!try_pairing(q, e, p, ext)) throw Error(isolated_message(q, e));
                        pairings_[{q, e}] = p;
                        extensions_[{q, e}] = std::move(ext);
                    }
                }
            }
        }
    }

    std::string isolated_message(int i, int e) const {
        return "isolated bad element (patch " + std::to_string(i) + ", element " + std::to_string(e) + ")";
    }

    static double box_distance(const std::pair<Point2, Point2>& a, const std::pair<Point2, Point2>& b) {
        const Vec2 gap = (a.first - b.second).cwiseMax(b.first - a.second).cwiseMax(0.0);
        return gap.norm();
    }

    /// Tries candidates in order and keeps the first with a well-conditioned projection.
    bool try_pairing(int i, int e, NeighborPairing& out, BernsteinExtension& ext_out) const {
        const SplinePatch& P = U_.patch(i);
        const TensorBasis& tb = P.basis();
        const ParamElement pe = tb.element(e);
        out = {};
        out.patch = i;
        out.elem = e;
        out.ratio = U_.status(i)[e].ratio;

        auto accept = [&](int k, int ek, int step, int ring) {
            try {
                ext_out = build_extension(k, ek, i, e);
                out.nb_patch = k;
                out.nb_elem = ek;
                out.step = step;
                out.ring = ring;
                return true;
            } catch (const Error&) {
                return false;
            }
        };

        // Step 1: rings in the same patch.
        for (int ring = 1; ring <= 2; ++ring) {
            std::vector<std::tuple<int, double, int>> cand;  // manhattan, -ratio, id
            for (int dv = -ring; dv <= ring; ++dv)
                for (int du = -ring; du <= ring; ++du) {
                    if (std::max(std::abs(du), std::abs(dv)) != ring) continue;
                    const int eu = pe.eu + du, ev = pe.ev + dv;
                    if (eu < 0 || ev < 0 || eu >= tb.num_elements(0) || ev >= tb.num_elements(1)) continue;
                    const int id = tb.element_id(eu, ev);
                    if (!is_good(i, id)) continue;
                    cand.emplace_back(std::abs(du) + std::abs(dv), -U_.status(i)[id].ratio, id);
                }
            std::sort(cand.begin(), cand.end());
            for (const auto& [man, negr, id] : cand)
                if (accept(i, id, 1, ring)) return true;
        }

        // Step 2: good elements of higher patches near K.
        const auto kb = P.element_corner_bbox(pe);
        const Point2 kc = 0.5 * (kb.first + kb.second);
        const double h = U_.element_h(i, e);
        for (int attempt = 0; attempt < 2; ++attempt) {
            const double radius = opt_.step2_radius * h * (attempt == 0 ? 1.0 : 2.0);
            std::vector<std::tuple<double, double, int, double, int>> cand;  // dist, -ratio, patch, centre dist, id
            for (int k = i + 1; k < U_.num_patches(); ++k) {
                const SplinePatch& Q = U_.patch(k);
                for (int id = 0; id < Q.basis().num_elements(); ++id) {
                    if (!is_good(k, id)) continue;
                    const auto bb = Q.element_corner_bbox(Q.basis().element(id));
                    const double d = box_distance(kb, bb);
                    if (d > radius) continue;
                    const double cd = (0.5 * (bb.first + bb.second) - kc).norm();
                    cand.emplace_back(d, -U_.status(k)[id].ratio, k, cd, id);
                }
            }
            std::sort(cand.begin(), cand.end());
            for (const auto& [d, negr, k, cd, id] : cand)
                if (accept(k, id, 2, attempt)) return true;
        }
        return false;
    }

    const MultiPatchUnion& U_;
    StabilizationOptions opt_;
    std::vector<std::vector<bool>> bad_;
    int n_cut_ = 0, n_bad_ = 0;
    std::map<std::pair<int, int>, NeighborPairing> pairings_;
    std::map<std::pair<int, int>, BernsteinExtension> extensions_;
};

}  // namespace uiga
