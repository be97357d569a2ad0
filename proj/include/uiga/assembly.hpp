#pragma once

// Degrees of freedom, Nitsche system assembly over the visible parts of the patches,
// Dirichlet elimination and Neumann data.

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "uiga/harness/manufactured.hpp"
#include "uiga/multimesh.hpp"
#include "uiga/problem.hpp"
#include "uiga/stabilization.hpp"

namespace uiga {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

enum class FluxKind { one_sided, symmetric };

inline double flux_weight(FluxKind k) { return k == FluxKind::one_sided ? 1.0 : 0.5; }

struct AssemblyOptions {
    FluxKind flux = FluxKind::one_sided;
    bool stabilize = true;
    double beta = 0.0;   ///< <= 0 selects 6 p^2 with p the largest degree
    double theta = 0.1;
};

inline double penalty_beta(const AssemblyOptions& opt, int max_degree) {
    return opt.beta > 0.0 ? opt.beta : 6.0 * max_degree * max_degree;
}

/// Global numbering of the basis functions whose support meets the visible region.
struct DofMap {
    std::vector<std::vector<int>> index;       ///< [patch][flat basis] -> global or -1
    std::vector<std::pair<int, int>> owner;    ///< global -> (patch, flat basis)
    std::vector<char> fixed;                   ///< Dirichlet-constrained
    std::vector<double> value;                 ///< prescribed values of fixed DOFs
    std::vector<int> free_index;               ///< global -> free index or -1
    int n_free = 0;

    [[nodiscard]] int size() const { return static_cast<int>(owner.size()); }
};

inline DofMap build_dofs(const MultiPatchUnion& U) {
    DofMap d;
    d.index.resize(U.num_patches());
    for (int i = 0; i < U.num_patches(); ++i) {
        const TensorBasis& tb = U.patch(i).basis();
        const auto& st = U.status(i);
        d.index[i].assign(tb.num_basis(), -1);
        for (int b = 0; b < tb.num_basis(1); ++b) {
            const auto [v0, v1] = tb.support_elements(1, b);
            for (int a = 0; a < tb.num_basis(0); ++a) {
                const auto [u0, u1] = tb.support_elements(0, a);
                double area = 0.0;
                for (int ev = v0; ev <= v1; ++ev)
                    for (int eu = u0; eu <= u1; ++eu) {
                        const int e = tb.element_id(eu, ev);
                        area += st[e].ratio * tb.element(e).area();
                    }
                if (area > tol::dof_visible_area) {
                    const int k = tb.basis_index(a, b);
                    d.index[i][k] = static_cast<int>(d.owner.size());
                    d.owner.emplace_back(i, k);
                }
            }
        }
    }
    d.fixed.assign(d.owner.size(), 0);
    d.value.assign(d.owner.size(), 0.0);
    return d;
}

struct LinearSystem {
    DofMap dofs;
    SparseMatrix full;   ///< all DOFs, before boundary conditions
    Vector full_rhs;
    SparseMatrix K;      ///< free DOFs
    Vector rhs;
    int iface_nodes = 0;

    /// Global coefficient vector from free values plus prescribed Dirichlet values.
    [[nodiscard]] Vector expand(const Vector& free) const {
        Vector u(dofs.size());
        for (int g = 0; g < dofs.size(); ++g) u[g] = dofs.fixed[g] ? dofs.value[g] : free[dofs.free_index[g]];
        return u;
    }
};

namespace detail {

struct Triplets {
    std::vector<Eigen::Triplet<double>> t;
    void add(int r, int c, double v) {
        if (r >= 0 && c >= 0 && v != 0.0) t.emplace_back(r, c, v);
    }
};

inline void assemble_volume(const MultiPatchUnion& U, const DofMap& dofs, const ManufacturedSolution& sol,
                            Triplets& A, Vector& b) {
    BasisEval ev;
    for (int i = 0; i < U.num_patches(); ++i) {
        const SplinePatch& P = U.patch(i);
        const TensorBasis& tb = P.basis();
        const GaussRule& g = gauss_rule(tb.max_degree() + 1);
        ParamRule interior;
        for (int e = 0; e < tb.num_elements(); ++e) {
            const ElementStatus& st = U.status(i)[e];
            if (st.kind == ElementStatus::Kind::covered) continue;
            const ParamRule* rule = nullptr;
            if (st.kind == ElementStatus::Kind::cut) {
                rule = &U.assembly_rule(i, e);
            } else {
                const ParamElement pe = tb.element(e);
                interior.points.clear();
                interior.weights.clear();
                for (std::size_t qb = 0; qb < g.size(); ++qb)
                    for (std::size_t qa = 0; qa < g.size(); ++qa) {
                        interior.points.emplace_back(pe.u0 + (pe.u1 - pe.u0) * g.points[qa],
                                                     pe.v0 + (pe.v1 - pe.v0) * g.points[qb]);
                        interior.weights.push_back(g.weights[qa] * g.weights[qb] * pe.area());
                    }
                rule = &interior;
            }
            const std::vector<int> fns = tb.element_basis(e);
            const int n = static_cast<int>(fns.size());
            Eigen::MatrixXd Ke = Eigen::MatrixXd::Zero(n, n);
            Eigen::VectorXd fe = Eigen::VectorXd::Zero(n);
            for (std::size_t q = 0; q < rule->points.size(); ++q) {
                P.eval_basis(rule->points[q], ev, true);
                const double dx = rule->weights[q] * std::abs(ev.det);
                const double f = sol.f(ev.x);
                for (int a = 0; a < n; ++a) {
                    fe[a] += dx * f * ev.value[a];
                    for (int c = 0; c < n; ++c) Ke(a, c) += dx * ev.grad[a].dot(ev.grad[c]);
                }
            }
            for (int a = 0; a < n; ++a) {
                const int ga = dofs.index[i][fns[a]];
                if (ga < 0) continue;
                b[ga] += fe[a];
                for (int c = 0; c < n; ++c) A.add(ga, dofs.index[i][fns[c]], Ke(a, c));
            }
        }
    }
}

/// Interface terms: -(<R u>_t [v] + [u] <R v>_t) + beta / h_ij [u][v].
inline int assemble_interface(const MultiPatchUnion& U, const DofMap& dofs, const AssemblyOptions& opt,
                              const Stabilizer* stab, Triplets& A) {
    const double t = flux_weight(opt.flux);
    const double beta = penalty_beta(opt, U.max_degree());
    std::vector<FluxEntry> fi, fj;
    std::vector<std::pair<int, double>> J, F;
    BasisEval ev;
    int count = 0;
    auto plain_flux = [&](int patch, int elem, const Point2& uv, const Vec2& n, std::vector<FluxEntry>& out) {
        out.clear();
        U.patch(patch).eval_basis(uv, ev, true);
        for (std::size_t r = 0; r < ev.index.size(); ++r) out.push_back({patch, ev.index[r], ev.grad[r].dot(n)});
        (void)elem;
    };
    for (const auto& [key, m] : U.interfaces()) {
        const auto [i, j] = key;
        for (const auto& seg : m.segments) {
            for (const auto& nd : seg.nodes) {
                ++count;
                J.clear();
                F.clear();
                U.patch(i).eval_basis(nd.uv, ev, false);
                for (std::size_t r = 0; r < ev.index.size(); ++r) J.emplace_back(dofs.index[i][ev.index[r]], ev.value[r]);
                U.patch(j).eval_basis(nd.uv_j, ev, false);
                for (std::size_t r = 0; r < ev.index.size(); ++r) J.emplace_back(dofs.index[j][ev.index[r]], -ev.value[r]);

                if (stab && opt.stabilize) {
                    stab->flux(i, nd.elem, nd.uv, nd.x, nd.normal, true, fi);
                    if (t < 1.0) stab->flux(j, nd.elem_j, nd.uv_j, nd.x, nd.normal, true, fj);
                } else {
                    plain_flux(i, nd.elem, nd.uv, nd.normal, fi);
                    if (t < 1.0) plain_flux(j, nd.elem_j, nd.uv_j, nd.normal, fj);
                }
                for (const auto& e : fi) F.emplace_back(dofs.index[e.patch][e.basis], t * e.value);
                if (t < 1.0)
                    for (const auto& e : fj) F.emplace_back(dofs.index[e.patch][e.basis], (1.0 - t) * e.value);

                const double w = nd.w;
                const double pen = beta * w / nd.h_ij;
                for (const auto& [ra, va] : J) {
                    for (const auto& [rb, vb] : J) A.add(ra, rb, pen * va * vb);
                    for (const auto& [rb, vb] : F) {
                        A.add(ra, rb, -w * va * vb);
                        A.add(rb, ra, -w * va * vb);
                    }
                }
            }
        }
    }
    return count;
}

inline bool is_dirichlet(const Problem& pr, int i, Side s) {
    for (const auto& bc : pr.bcs)
        if (bc.patch == i && bc.side == s && bc.type == BcType::dirichlet) return true;
    return false;
}

inline void assemble_neumann(const MultiPatchUnion& U, const DofMap& dofs, const Problem& pr,
                             const ManufacturedSolution& sol, Vector& b) {
    BasisEval ev;
    for (int i = 0; i < U.num_patches(); ++i) {
        for (const auto& seg : U.boundary(i)) {
            if (is_dirichlet(pr, i, seg.side)) continue;
            for (const auto& nd : seg.nodes) {
                const double gn = sol.grad(nd.x).dot(nd.normal);
                U.patch(i).eval_basis(nd.uv, ev, false);
                for (std::size_t r = 0; r < ev.index.size(); ++r) {
                    const int g = dofs.index[i][ev.index[r]];
                    if (g >= 0) b[g] += nd.w * gn * ev.value[r];
                }
            }
        }
    }
}

/// Greville collocation of the Dirichlet data on full untrimmed sides.
inline void apply_dirichlet(const MultiPatchUnion& U, const Problem& pr, const ManufacturedSolution& sol,
                            DofMap& dofs) {
    BasisEval ev;
    for (const auto& bc : pr.bcs) {
        if (bc.type != BcType::dirichlet) continue;
        if (bc.patch < 0 || bc.patch >= U.num_patches()) throw Error("boundary condition on unknown patch");
        if (!U.side_fully_external(bc.patch, bc.side)) throw Error("Dirichlet on trimmed side unsupported");
        const SplinePatch& P = U.patch(bc.patch);
        const std::vector<int> fns = side_basis(P.basis(), bc.side);
        const auto gre = P.basis().knots(side_direction(bc.side)).greville();
        const int n = static_cast<int>(fns.size());
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
        Eigen::VectorXd g(n);
        for (int m = 0; m < n; ++m) {
            P.eval_basis(side_uv(bc.side, gre[m]), ev, false);
            g[m] = sol.u(ev.x);
            for (std::size_t r = 0; r < ev.index.size(); ++r) {
                const auto it = std::find(fns.begin(), fns.end(), ev.index[r]);
                if (it != fns.end()) A(m, it - fns.begin()) += ev.value[r];
            }
        }
        const Eigen::VectorXd c = A.partialPivLu().solve(g);
        for (int k = 0; k < n; ++k) {
            const int gi = dofs.index[bc.patch][fns[k]];
            if (gi < 0) throw Error("Dirichlet side carries an inactive basis function");
            dofs.fixed[gi] = 1;
            dofs.value[gi] = c[k];
        }
    }
    dofs.free_index.assign(dofs.size(), -1);
    dofs.n_free = 0;
    for (int g = 0; g < dofs.size(); ++g)
        if (!dofs.fixed[g]) dofs.free_index[g] = dofs.n_free++;
}

}  // namespace detail

/// Full assembly: volume, interface, Neumann data, Dirichlet elimination with lifting.
inline LinearSystem assemble(const MultiPatchUnion& U, const Problem& pr, const ManufacturedSolution& sol,
                             const AssemblyOptions& opt, const Stabilizer* stab = nullptr) {
    LinearSystem sys;
    sys.dofs = build_dofs(U);
    const int n = sys.dofs.size();
    detail::Triplets A;
    sys.full_rhs = Vector::Zero(n);
    detail::assemble_volume(U, sys.dofs, sol, A, sys.full_rhs);
    sys.iface_nodes = detail::assemble_interface(U, sys.dofs, opt, stab, A);
    detail::assemble_neumann(U, sys.dofs, pr, sol, sys.full_rhs);
    sys.full.resize(n, n);
    sys.full.setFromTriplets(A.t.begin(), A.t.end());
    sys.full.makeCompressed();

    detail::apply_dirichlet(U, pr, sol, sys.dofs);
    const DofMap& d = sys.dofs;
    std::vector<Eigen::Triplet<double>> kf;
    sys.rhs = Vector::Zero(d.n_free);
    for (int g = 0; g < n; ++g)
        if (!d.fixed[g]) sys.rhs[d.free_index[g]] = sys.full_rhs[g];
    for (int col = 0; col < n; ++col) {
        for (SparseMatrix::InnerIterator it(sys.full, col); it; ++it) {
            const int row = static_cast<int>(it.row());
            if (d.fixed[row]) continue;
            if (d.fixed[col])
                sys.rhs[d.free_index[row]] -= it.value() * d.value[col];
            else
                kf.emplace_back(d.free_index[row], d.free_index[col], it.value());
        }
    }
    sys.K.resize(d.n_free, d.n_free);
    sys.K.setFromTriplets(kf.begin(), kf.end());
    sys.K.makeCompressed();
    return sys;
}

/// Lower triangle in coordinate format (1-based), 17 significant digits.
inline void export_matrix(const SparseMatrix& K, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out.precision(17);
    std::size_t nnz = 0;
    for (int c = 0; c < K.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(K, c); it; ++it)
            if (it.row() >= it.col()) ++nnz;
    out << "%%MatrixMarket matrix coordinate real symmetric\n" << K.rows() << ' ' << K.cols() << ' ' << nnz << '\n';
    for (int c = 0; c < K.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(K, c); it; ++it)
            if (it.row() >= it.col()) out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
}

/// Value and gradient of the discrete field of patch i at uv.
inline std::pair<double, Vec2> eval_field(const MultiPatchUnion& U, const DofMap& d, const Vector& u, int i,
                                          const Point2& uv) {
    thread_local BasisEval ev;
    U.patch(i).eval_basis(uv, ev, true);
    double v = 0.0;
    Vec2 g = Vec2::Zero();
    for (std::size_t r = 0; r < ev.index.size(); ++r) {
        const int k = d.index[i][ev.index[r]];
        if (k < 0) continue;
        v += u[k] * ev.value[r];
        g += u[k] * ev.grad[r];
    }
    return {v, g};
}

}  // namespace uiga
