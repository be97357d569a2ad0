#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <memory>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>

#include "uiga/assembly.hpp"
#include "uiga/harness/fixtures.hpp"
#include "uiga/linsolve.hpp"

using namespace uiga;

namespace {

double max_abs(const SparseMatrix& A) {
    double m = 0.0;
    for (int c = 0; c < A.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(A, c); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
}

double asymmetry(const SparseMatrix& A) {
    const SparseMatrix At = A.transpose();
    return max_abs(A - At) / max_abs(A);
}

Problem with_solution(Problem pr, const std::string& id) {
    pr.solution = id;
    return pr;
}

struct Solved {
    std::unique_ptr<MultiPatchUnion> U;
    LinearSystem sys;
    Vector u;
};

Solved solve(const Problem& pr, AssemblyOptions opt = {}) {
    Solved s;
    s.U = std::make_unique<MultiPatchUnion>(pr.patches);
    const Stabilizer stab(*s.U);
    s.sys = assemble(*s.U, pr, solution_by_id(pr.solution), opt, &stab);
    s.u = s.sys.expand(pcg_solve(s.sys.K, s.sys.rhs, 1e-13).x);
    return s;
}

// Discrete field at a physical point, taken from the topmost patch containing it.
double field_at(const Solved& s, const Point2& x) {
    const int i = s.U->owner(x);
    if (i < 0) throw Error("point outside the union");
    const InversionResult r = invert_point(s.U->patch(i), x);
    return eval_field(*s.U, s.sys.dofs, s.u, i, r.uv).first;
}

std::vector<Problem> affine_fixtures(int p) {
    return {unit_square_fixture(p, 1e-6), unit_square_fixture(p, 1e-2), three_patch_fixture(p),
            refined(three_patch_fixture(p), 2)};
}

}  // namespace

TEST(Volume, BilinearStiffnessOnUnitSquare) {
    Problem pr;
    pr.patches.push_back(rectangle_patch(1, 1, 1, 0.0, 1.0, 0.0, 1.0));
    const MultiPatchUnion U(pr.patches);
    const LinearSystem sys = assemble(U, pr, zero_solution(), {});
    ASSERT_EQ(sys.full.rows(), 4);
    const Eigen::MatrixXd K(sys.full);
    // Corners 0:(0,0) 1:(1,0) 2:(0,1) 3:(1,1).
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(K(k, k), 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(K(0, 3), -1.0 / 3.0, 1e-15);
    EXPECT_NEAR(K(1, 2), -1.0 / 3.0, 1e-15);
    EXPECT_NEAR(K(0, 1), -1.0 / 6.0, 1e-15);
    EXPECT_NEAR(K(0, 2), -1.0 / 6.0, 1e-15);
    EXPECT_NEAR(sys.full_rhs.norm(), 0.0, 1e-15);
}

TEST(Volume, ConstantsInKernelOfSinglePatch) {
    Problem pr;
    pr.patches.push_back(quarter_annulus(3, 3));
    const MultiPatchUnion U(pr.patches);
    const LinearSystem sys = assemble(U, pr, zero_solution(), {});
    const Vector ones = Vector::Ones(sys.full.rows());
    EXPECT_LE((sys.full * ones).cwiseAbs().maxCoeff(), 1e-12 * max_abs(sys.full));
}

TEST(DofMap, CoveredFunctionsExcludedAndIndicesDisjoint) {
    const MultiPatchUnion U(unit_square_fixture(2, 1e-6).patches);
    const DofMap d = build_dofs(U);
    const TensorBasis& tb = U.patch(0).basis();
    for (int b = 0; b < tb.num_basis(1); ++b)
        for (int a = 0; a < tb.num_basis(0); ++a) {
            const auto [u0, u1] = tb.support_elements(0, a);
            // Support inside the covered column x in [0.75, 1] only.
            const bool covered_only = u0 == 3;
            EXPECT_EQ(d.index[0][tb.basis_index(a, b)] < 0, covered_only);
        }
    std::vector<int> seen(d.size(), 0);
    for (int i = 0; i < U.num_patches(); ++i)
        for (int g : d.index[i])
            if (g >= 0) ++seen[g];
    for (int g = 0; g < d.size(); ++g) {
        EXPECT_EQ(seen[g], 1);
        EXPECT_EQ(d.index[d.owner[g].first][d.owner[g].second], g);
    }
    // All functions of the top patch are active.
    for (int g : d.index[1]) EXPECT_GE(g, 0);
}

TEST(SystemProperty, SymmetryBothFluxes) {
    for (int p : {2, 3})
        for (FluxKind f : {FluxKind::one_sided, FluxKind::symmetric})
            for (bool stab : {true, false})
                for (const Problem& pr : {unit_square_fixture(p), disk_fixture(p, true), disk_fixture(p, false),
                                          three_patch_fixture(p), refined(three_patch_fixture(p), 2)}) {
                    const MultiPatchUnion U(pr.patches);
                    const Stabilizer S(U);
                    AssemblyOptions o;
                    o.flux = f;
                    o.stabilize = stab;
                    const LinearSystem sys = assemble(U, pr, solution_by_id(pr.solution), o, &S);
                    EXPECT_LE(asymmetry(sys.full), 1e-12) << pr.name;
                    EXPECT_LE(asymmetry(sys.K), 1e-12) << pr.name;
                }
}

TEST(SystemProperty, ConstantsInKernelWithInterfaces) {
    for (int p : {2, 3})
        for (FluxKind f : {FluxKind::one_sided, FluxKind::symmetric})
            for (const Problem& pr : {unit_square_fixture(p), disk_fixture(p, true), refined(three_patch_fixture(p), 2)}) {
                const MultiPatchUnion U(pr.patches);
                const Stabilizer S(U);
                AssemblyOptions o;
                o.flux = f;
                const LinearSystem sys = assemble(U, pr, zero_solution(), o, &S);
                const Vector ones = Vector::Ones(sys.full.rows());
                EXPECT_LE((sys.full * ones).cwiseAbs().maxCoeff(), 1e-10 * max_abs(sys.full)) << pr.name;
            }
}

TEST(SystemProperty, CoercivityOnShippedFixtures) {
    for (int p : {2, 3})
        for (FluxKind f : {FluxKind::one_sided, FluxKind::symmetric})
            for (const Problem& pr : {unit_square_fixture(p), disk_fixture(p, true), disk_fixture(p, false), three_patch_fixture(p)}) {
                const MultiPatchUnion U(pr.patches);
                const Stabilizer stab(U);
                AssemblyOptions o;
                o.flux = f;
                const LinearSystem sys = assemble(U, pr, solution_by_id(pr.solution), o, &stab);
                // Functions living only on a thin strip have tiny diagonals; measure after Jacobi scaling.
                const Eigen::VectorXd d = Eigen::VectorXd(sys.K.diagonal()).cwiseSqrt().cwiseInverse();
                const Eigen::MatrixXd S = d.asDiagonal() * Eigen::MatrixXd(sys.K) * d.asDiagonal();
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
                EXPECT_GT(es.eigenvalues().minCoeff(), 1e-10) << pr.name << " p=" << p;
            }
}

TEST(Interface, PenaltyLinearInBetaAndWeightedByHarmonicMean) {
    // Element diameters 0.5 (0.3 x 0.4 elements) on both sides, so h_ij = 0.25.
    Problem pr;
    pr.patches.push_back(rectangle_patch(2, 4, 2, 0.0, 1.2, 0.0, 0.8));
    pr.patches.push_back(rectangle_patch(2, 4, 2, 0.6, 1.8, 0.0, 0.8));
    const MultiPatchUnion U(pr.patches);
    for (const auto& seg : U.interface(1, 0).segments)
        for (const auto& nd : seg.nodes) {
            EXPECT_NEAR(nd.h_i, 0.5, 1e-15);
            EXPECT_NEAR(nd.h_j, 0.5, 1e-15);
            EXPECT_NEAR(nd.h_ij, 0.25, 1e-15);
        }
    const Stabilizer S(U);
    auto K = [&](double beta) {
        AssemblyOptions o;
        o.beta = beta;
        return assemble(U, pr, zero_solution(), o, &S).full;
    };
    const SparseMatrix K1 = K(10.0), K2 = K(20.0), K4 = K(40.0);
    const SparseMatrix P = K2 - K1;
    EXPECT_LE(max_abs(SparseMatrix(K4 - K2 - 2.0 * P)), 1e-12 * max_abs(K4));

    // Oracle for the penalty block: 10 * sum_nodes w / h_ij [B_a][B_b].
    const DofMap d = build_dofs(U);
    Eigen::MatrixXd oracle = Eigen::MatrixXd::Zero(d.size(), d.size());
    BasisEval ev;
    for (const auto& seg : U.interface(1, 0).segments)
        for (const auto& nd : seg.nodes) {
            Eigen::VectorXd jump = Eigen::VectorXd::Zero(d.size());
            U.patch(1).eval_basis(nd.uv, ev, false);
            for (std::size_t r = 0; r < ev.index.size(); ++r) jump[d.index[1][ev.index[r]]] += ev.value[r];
            // Functions covered by the top patch vanish on its boundary.
            U.patch(0).eval_basis(nd.uv_j, ev, false);
            for (std::size_t r = 0; r < ev.index.size(); ++r) {
                const int g = d.index[0][ev.index[r]];
                if (g >= 0) jump[g] -= ev.value[r];
                else EXPECT_NEAR(ev.value[r], 0.0, 1e-14);
            }
            oracle += 10.0 * nd.w / 0.25 * jump * jump.transpose();
        }
    EXPECT_LE((Eigen::MatrixXd(P) - oracle).cwiseAbs().maxCoeff(), 1e-11 * oracle.cwiseAbs().maxCoeff());
}

TEST(Interface, DefaultBetaIsSixPSquared) {
    AssemblyOptions o;
    EXPECT_DOUBLE_EQ(penalty_beta(o, 3), 54.0);
    o.beta = 7.0;
    EXPECT_DOUBLE_EQ(penalty_beta(o, 3), 7.0);
}

TEST(Interface, ContinuousFieldHasNoJumpContribution) {
    // A global polynomial represented on both patches of a conforming split: the penalty block
    // annihilates it and the coupled solve reproduces the single-patch solve.
    Problem split;
    split.patches.push_back(rectangle_patch(2, 4, 4, 0.0, 1.0, 0.0, 1.0));
    split.patches.push_back(rectangle_patch(2, 2, 4, 0.5, 1.0, 0.0, 1.0));
    split.bcs = {{0, Side::left, BcType::dirichlet}};
    split.solution = "quadratic";
    const MultiPatchUnion U(split.patches);
    const Stabilizer S(U);
    auto K = [&](double beta) {
        AssemblyOptions o;
        o.beta = beta;
        return assemble(U, split, zero_solution(), o, &S).full;
    };
    const SparseMatrix P = K(2.0) - K(1.0);
    const DofMap d = build_dofs(U);
    const ManufacturedSolution q = solution_by_id("quadratic");
    Vector u = Vector::Zero(d.size());
    for (int i = 0; i < 2; ++i) {
        const TensorBasis& tb = U.patch(i).basis();
        const auto gu = tb.knots(0).greville(), gv = tb.knots(1).greville();
        const int n = tb.num_basis();
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
        Eigen::VectorXd b(n);
        BasisEval ev;
        for (int jb = 0; jb < tb.num_basis(1); ++jb)
            for (int ia = 0; ia < tb.num_basis(0); ++ia) {
                U.patch(i).eval_basis({gu[ia], gv[jb]}, ev, false);
                for (std::size_t r = 0; r < ev.index.size(); ++r) A(tb.basis_index(ia, jb), ev.index[r]) = ev.value[r];
                b[tb.basis_index(ia, jb)] = q.u(ev.x);
            }
        const Eigen::VectorXd c = A.partialPivLu().solve(b);
        for (int k = 0; k < n; ++k)
            if (d.index[i][k] >= 0) u[d.index[i][k]] = c[k];
    }
    EXPECT_LE((P * u).cwiseAbs().maxCoeff(), 1e-12 * max_abs(P) * u.cwiseAbs().maxCoeff());

    Problem single;
    single.patches.push_back(rectangle_patch(2, 4, 4, 0.0, 1.0, 0.0, 1.0));
    single.bcs = split.bcs;
    single.solution = "quadratic";
    const Solved a = solve(split), b = solve(single);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U01(0.0, 1.0);
    for (int s = 0; s < 100; ++s) {
        const Point2 x(U01(rng), U01(rng));
        EXPECT_NEAR(field_at(a, x), field_at(b, x), 1e-9);
    }
}

TEST(SystemProperty, PatchTestPolynomialReproduction) {
    std::mt19937_64 rng(42);
    for (int p : {2, 3})
        for (FluxKind f : {FluxKind::one_sided, FluxKind::symmetric})
            for (Problem pr : affine_fixtures(p)) {
                pr.solution = "quadratic";
                AssemblyOptions o;
                o.flux = f;
                const Solved s = solve(pr, o);
                const ManufacturedSolution q = solution_by_id("quadratic");
                std::uniform_real_distribution<double> X(0.0, 1.0);
                double worst = 0.0;
                for (int k = 0; k < 200; ++k) {
                    // Sample the bounding box and keep points inside the union.
                    Point2 x;
                    do {
                        x = Point2(-0.1 + 1.8 * X(rng), -0.1 + 1.4 * X(rng));
                    } while (s.U->owner(x) < 0);
                    worst = std::max(worst, std::abs(field_at(s, x) - q.u(x)));
                }
                EXPECT_LE(worst, 1e-8) << pr.name << " p=" << p;
            }
}

TEST(Dirichlet, ZeroDataGivesZeroValues) {
    const Problem pr = with_solution(three_patch_fixture(2), "zero");
    const MultiPatchUnion U(pr.patches);
    const LinearSystem sys = assemble(U, pr, zero_solution(), {});
    int fixed = 0;
    for (int g = 0; g < sys.dofs.size(); ++g)
        if (sys.dofs.fixed[g]) {
            ++fixed;
            EXPECT_EQ(sys.dofs.value[g], 0.0);
        }
    EXPECT_EQ(fixed, 2 * 6 - 1);
}

TEST(Dirichlet, LinearTraceReproduced) {
    for (int p : {1, 2, 4}) {
        const Problem pr = with_solution(unit_square_fixture(p), "linear");
        const MultiPatchUnion U(pr.patches);
        const ManufacturedSolution lin = solution_by_id("linear");
        const LinearSystem sys = assemble(U, pr, lin, {});
        const Vector u = sys.expand(Vector::Zero(sys.dofs.n_free));
        for (int k = 0; k <= 20; ++k) {
            const double t = k / 20.0;
            const double v = eval_field(U, sys.dofs, u, 0, side_uv(Side::left, t)).first;
            EXPECT_NEAR(v, lin.u(U.patch(0).point(side_uv(Side::left, t))), 1e-12);
        }
    }
}

TEST(Dirichlet, TrimmedSideRejected) {
    Problem pr = unit_square_fixture(2);
    pr.bcs.push_back({0, Side::bottom, BcType::dirichlet});
    const MultiPatchUnion U(pr.patches);
    try {
        (void)assemble(U, pr, solution_by_id(pr.solution), {});
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("Dirichlet on trimmed side unsupported"), std::string::npos);
    }
}

TEST(Dirichlet, SquareSystemSolvableAndPositiveDefinite) {
    const Problem pr = unit_square_fixture(3);
    const MultiPatchUnion U(pr.patches);
    const Stabilizer S(U);
    const LinearSystem sys = assemble(U, pr, solution_by_id(pr.solution), {}, &S);
    const Eigen::LLT<Eigen::MatrixXd> llt{Eigen::MatrixXd(sys.K)};
    EXPECT_EQ(llt.info(), Eigen::Success);
}

TEST(Export, SymmetricCoordinateFormat) {
    const Problem pr = unit_square_fixture(2);
    const MultiPatchUnion U(pr.patches);
    const Stabilizer S(U);
    const LinearSystem sys = assemble(U, pr, solution_by_id(pr.solution), {}, &S);
    const auto path = std::filesystem::temp_directory_path() / "uiga_matrix.mtx";
    export_matrix(sys.K, path.string());
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "%%MatrixMarket matrix coordinate real symmetric");
    int rows = 0, cols = 0;
    long nnz = 0;
    in >> rows >> cols >> nnz;
    EXPECT_EQ(rows, sys.K.rows());
    SparseMatrix R(rows, cols);
    std::vector<Eigen::Triplet<double>> t;
    for (long k = 0; k < nnz; ++k) {
        int r, c;
        double v;
        in >> r >> c >> v;
        ASSERT_GE(r, c);
        t.emplace_back(r - 1, c - 1, v);
        if (r != c) t.emplace_back(c - 1, r - 1, v);
    }
    R.setFromTriplets(t.begin(), t.end());
    EXPECT_LE(max_abs(SparseMatrix(R - sys.K)), 1e-15 * max_abs(sys.K) + 1e-300);
    std::filesystem::remove(path);
}

TEST(Determinism, RepeatedAssemblyIsBitIdentical) {
    const Problem pr = refined(three_patch_fixture(3), 2);
    auto run = [&] {
        const MultiPatchUnion U(pr.patches);
        const Stabilizer S(U);
        return assemble(U, pr, solution_by_id(pr.solution), {}, &S);
    };
    const LinearSystem a = run(), b = run();
    ASSERT_EQ(a.K.nonZeros(), b.K.nonZeros());
    EXPECT_EQ(std::memcmp(a.K.valuePtr(), b.K.valuePtr(), sizeof(double) * a.K.nonZeros()), 0);
    EXPECT_EQ(std::memcmp(a.rhs.data(), b.rhs.data(), sizeof(double) * a.rhs.size()), 0);
}
