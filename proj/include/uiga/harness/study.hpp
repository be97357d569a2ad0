#pragma once

// Error norms, single solves, and convergence / conditioning studies with CSV output.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "uiga/assembly.hpp"
#include "uiga/harness/manufactured.hpp"
#include "uiga/linsolve.hpp"
#include "uiga/multimesh.hpp"
#include "uiga/problem.hpp"
#include "uiga/stabilization.hpp"

namespace uiga {

struct ErrorNorms {
    double l2 = 0.0, h1 = 0.0, jump = 0.0;
};

/// Broken L2 and H1-seminorm errors over the visible regions and the h-weighted jump norm.
inline ErrorNorms error_norms(const MultiPatchUnion& U, const DofMap& d, const Vector& u,
                              const ManufacturedSolution& exact) {
    double l2 = 0.0, h1 = 0.0, jump = 0.0;
    BasisEval ev;
    for (int i = 0; i < U.num_patches(); ++i) {
        const SplinePatch& P = U.patch(i);
        const TensorBasis& tb = P.basis();
        const int nq = tb.max_degree() + 2;
        const GaussRule& g = gauss_rule(nq);
        for (int e = 0; e < tb.num_elements(); ++e) {
            const ElementStatus& st = U.status(i)[e];
            if (st.kind == ElementStatus::Kind::covered) continue;
            ParamRule rule;
            if (st.kind == ElementStatus::Kind::cut) {
                rule = U.cut_rule(i, e, nq);
            } else {
                const ParamElement pe = tb.element(e);
                for (std::size_t b = 0; b < g.size(); ++b)
                    for (std::size_t a = 0; a < g.size(); ++a) {
                        rule.points.emplace_back(pe.u0 + (pe.u1 - pe.u0) * g.points[a],
                                                 pe.v0 + (pe.v1 - pe.v0) * g.points[b]);
                        rule.weights.push_back(g.weights[a] * g.weights[b] * pe.area());
                    }
            }
            for (std::size_t q = 0; q < rule.points.size(); ++q) {
                P.eval_basis(rule.points[q], ev, true);
                double v = 0.0;
                Vec2 gr = Vec2::Zero();
                for (std::size_t r = 0; r < ev.index.size(); ++r) {
                    const int k = d.index[i][ev.index[r]];
                    if (k < 0) continue;
                    v += u[k] * ev.value[r];
                    gr += u[k] * ev.grad[r];
                }
                const double dx = rule.weights[q] * std::abs(ev.det);
                const double ev_u = v - exact.u(ev.x);
                l2 += dx * ev_u * ev_u;
                h1 += dx * (gr - exact.grad(ev.x)).squaredNorm();
            }
        }
    }
    for (const auto& [key, m] : U.interfaces()) {
        for (const auto& seg : m.segments)
            for (const auto& nd : seg.nodes) {
                const double ui = eval_field(U, d, u, key.first, nd.uv).first;
                const double uj = eval_field(U, d, u, key.second, nd.uv_j).first;
                jump += nd.w / nd.h_ij * (ui - uj) * (ui - uj);
            }
    }
    return {std::sqrt(l2), std::sqrt(h1), std::sqrt(jump)};
}

/// Mesh-size indicator: largest element diameter over all patches.
inline double mesh_h(const std::vector<SplinePatch>& patches) {
    double h = 0.0;
    for (const auto& P : patches)
        for (int e = 0; e < P.basis().num_elements(); ++e) h = std::max(h, P.element_diameter(e));
    return h;
}

struct LevelResult {
    int level = 0;
    double h = 0.0;
    int dofs = 0;
    double l2 = std::nan(""), h1 = std::nan(""), jump = std::nan("");
    double kappa = std::nan("");
    double bad_fraction = 0.0;
    int iterations = 0;
    double wall_ms = std::nan("");
    std::string failure;  ///< non-empty when the level aborted
};

struct LevelOptions {
    AssemblyOptions assembly;
    bool solve = true;
    bool kappa = false;
    bool timing = false;
    std::string export_matrix;  ///< path, empty = none
    double pcg_tol = 1e-12;
    unsigned seed = 12345;  ///< Lanczos start vector
};

struct LevelOutput {
    LevelResult result;
    std::unique_ptr<MultiPatchUnion> U;
    std::unique_ptr<Stabilizer> stab;
    LinearSystem sys;
    Vector u;  ///< global coefficients (empty when not solved)
    ConditionEstimate cond;
};

/// Builds, assembles and (optionally) solves one problem instance.
inline LevelOutput run_level(const Problem& pr, const LevelOptions& opt, int level = 0) {
    const auto t0 = std::chrono::steady_clock::now();
    LevelOutput out;
    LevelResult& r = out.result;
    r.level = level;
    r.h = mesh_h(pr.patches);
    const ManufacturedSolution sol = solution_by_id(pr.solution);
    out.U = std::make_unique<MultiPatchUnion>(pr.patches);
    StabilizationOptions so;
    so.theta = opt.assembly.theta;
    if (opt.assembly.stabilize) {
        out.stab = std::make_unique<Stabilizer>(*out.U, so);
        r.bad_fraction = out.stab->bad_fraction();
    } else {
        // Bad-element statistics do not depend on pairing.
        int cut = 0, bad = 0;
        for (int i = 0; i + 1 < out.U->num_patches(); ++i)
            for (const auto& st : out.U->status(i))
                if (st.kind == ElementStatus::Kind::cut) {
                    ++cut;
                    if (st.ratio < so.theta) ++bad;
                }
        r.bad_fraction = cut == 0 ? 0.0 : static_cast<double>(bad) / cut;
    }
    out.sys = assemble(*out.U, pr, sol, opt.assembly, out.stab.get());
    r.dofs = out.sys.dofs.n_free;
    if (!opt.export_matrix.empty()) export_matrix(out.sys.K, opt.export_matrix);
    if (opt.kappa) {
        out.cond = estimate_condition(out.sys.K, 4000, 1e-6, opt.seed);
        r.kappa = out.cond.kappa;
    }
    if (opt.solve) {
        try {
            const SolveReport rep = pcg_solve(out.sys.K, out.sys.rhs, opt.pcg_tol);
            r.iterations = rep.iterations;
            out.u = out.sys.expand(rep.x);
            const ErrorNorms en = error_norms(*out.U, out.sys.dofs, out.u, sol);
            r.l2 = en.l2;
            r.h1 = en.h1;
            r.jump = en.jump;
        } catch (const Error& e) {
            r.failure = e.what();
        }
    }
    if (opt.timing) r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

inline const char* csv_header() { return "level,h,dofs,l2_error,h1_error,jump_norm,kappa,bad_fraction,iterations,wall_ms"; }

inline std::string csv_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_row(const LevelResult& r) {
    std::string s = std::to_string(r.level) + ',' + csv_number(r.h) + ',' + std::to_string(r.dofs) + ',' +
                    csv_number(r.l2) + ',' + csv_number(r.h1) + ',' + csv_number(r.jump) + ',' + csv_number(r.kappa) +
                    ',' + csv_number(r.bad_fraction) + ',' + std::to_string(r.iterations) + ',' + csv_number(r.wall_ms);
    return s;
}

inline void write_csv(const std::string& path, const std::vector<LevelResult>& rows) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << csv_header() << '\n';
    for (const auto& r : rows) out << csv_row(r) << '\n';
}

/// Observed rates log2(e_k / e_{k+1}) between consecutive levels.
inline std::vector<double> observed_rates(const std::vector<double>& errors) {
    std::vector<double> r;
    for (std::size_t k = 0; k + 1 < errors.size(); ++k) r.push_back(std::log2(errors[k] / errors[k + 1]));
    return r;
}

using ProblemFactory = std::function<Problem(int degree)>;

/// Nested refinements of the degree-p base problem: level k splits every element 2^k times.
/// A failing level is recorded and ends the study for that degree.
inline std::vector<LevelResult> run_convergence(const ProblemFactory& make, int degree, int levels,
                                                const LevelOptions& opt) {
    std::vector<LevelResult> rows;
    Problem pr = make(degree);
    for (int k = 0; k < levels; ++k) {
        if (k > 0) pr = refined(pr, 2);
        try {
            rows.push_back(run_level(pr, opt, k).result);
        } catch (const Error& e) {
            LevelResult r;
            r.level = k;
            r.h = mesh_h(pr.patches);
            r.failure = e.what();
            rows.push_back(r);
        }
        if (!rows.back().failure.empty()) break;
    }
    return rows;
}

struct ConditioningCase {
    std::string name;
    FluxKind flux;
    bool stabilize;
};

inline std::vector<ConditioningCase> conditioning_cases() {
    return {{"symmetric-unstabilized", FluxKind::symmetric, false},
            {"symmetric-stabilized", FluxKind::symmetric, true},
            {"one-sided", FluxKind::one_sided, true}};
}

inline ConditioningCase conditioning_case(const std::string& name) {
    for (const auto& c : conditioning_cases())
        if (c.name == name) return c;
    throw Error("unknown conditioning case '" + name + "'");
}

/// Condition numbers on a fixed mesh for each value of a geometry parameter (rows indexed
/// by position in `params`). Singular or failing rows carry kappa = inf and continue.
inline std::vector<LevelResult> run_conditioning(const std::function<Problem(double)>& make,
                                                 const std::vector<double>& params, const ConditioningCase& c,
                                                 LevelOptions opt) {
    opt.assembly.flux = c.flux;
    opt.assembly.stabilize = c.stabilize;
    opt.kappa = true;
    opt.solve = false;
    std::vector<LevelResult> rows;
    for (std::size_t k = 0; k < params.size(); ++k) {
        const Problem pr = make(params[k]);
        try {
            rows.push_back(run_level(pr, opt, static_cast<int>(k)).result);
        } catch (const Error& e) {
            LevelResult r;
            r.level = static_cast<int>(k);
            r.h = mesh_h(pr.patches);
            r.kappa = std::numeric_limits<double>::infinity();
            r.failure = e.what();
            rows.push_back(r);
        }
    }
    return rows;
}

}  // namespace uiga
