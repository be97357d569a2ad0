#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "uiga/harness/fixtures.hpp"
#include "uiga/multimesh.hpp"

using namespace uiga;

namespace {

constexpr double kEps = 1e-6;

double total_visible_area(const MultiPatchUnion& U) {
    double a = 0.0;
    for (int i = 0; i < U.num_patches(); ++i) a += U.visible_area(i);
    return a;
}

double physical_rule_area(const SplinePatch& P, const ParamRule& r) {
    double a = 0.0;
    for (std::size_t q = 0; q < r.points.size(); ++q) a += r.weights[q] * std::abs(P.map_point(r.points[q]).jac.determinant());
    return a;
}

// Area of the polar box r in [r0,r1], angle in [a0,a1] lying outside [0,W]x[0,H]:
// integral over the angle of (r1^2 - max(r0, rho)^2)_+ / 2 with rho the ray exit distance.
double polar_area_outside_rect(double r0, double r1, double a0, double a1, double W, double H) {
    auto rho = [&](double a) { return std::min(W / std::cos(a), H / std::sin(a)); };
    auto f = [&](double a) {
        const double lo = std::max(r0, rho(a));
        return lo >= r1 ? 0.0 : 0.5 * (r1 * r1 - lo * lo);
    };
    std::vector<double> cuts{a0, a1, std::atan2(H, W)};
    for (double r : {r0, r1}) {
        if (r > W) cuts.push_back(std::acos(W / r));
        if (r > H) cuts.push_back(std::asin(H / r));
    }
    std::sort(cuts.begin(), cuts.end());
    const GaussRule& g = gauss_rule(20);
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double lo = std::max(cuts[k], a0), hi = std::min(cuts[k + 1], a1);
        if (hi <= lo) continue;
        const int n = 64;
        for (int m = 0; m < n; ++m) {
            const double x0 = lo + (hi - lo) * m / n, x1 = lo + (hi - lo) * (m + 1) / n;
            for (std::size_t q = 0; q < g.size(); ++q) s += (x1 - x0) * g.weights[q] * f(x0 + (x1 - x0) * g.points[q]);
        }
    }
    return s;
}

void expect_interface_invariants(const MultiPatchUnion& U) {
    double diam = 0.0;
    for (int i = 0; i < U.num_patches(); ++i) diam = std::max(diam, U.patch(i).diameter());
    for (const auto& [key, m] : U.interfaces()) {
        const auto [i, j] = key;
        ASSERT_GT(i, j);
        EXPECT_EQ(U.delta(i, j), !m.empty());
        for (const auto& seg : m.segments)
            for (const auto& nd : seg.nodes) {
                const double gap = std::min({nd.uv.x(), 1 - nd.uv.x(), nd.uv.y(), 1 - nd.uv.y()});
                EXPECT_LE(gap, 1e-14) << "node not on a side of patch " << i;
                EXPECT_LE((U.patch(i).point(nd.uv) - U.patch(j).point(nd.uv_j)).norm(), 1e-9 * diam);
                EXPECT_NEAR(nd.h_ij, 1.0 / (1.0 / nd.h_i + 1.0 / nd.h_j), 1e-15);
                for (int l = i + 1; l < U.num_patches(); ++l) EXPECT_FALSE(contains(U.patch(l), nd.x));
                const double off = 1e-6 * nd.h_i;
                EXPECT_TRUE(contains(U.patch(j), nd.x + off * nd.normal, BoundaryRule::include));
                EXPECT_FALSE(contains(U.patch(i), nd.x + off * nd.normal, BoundaryRule::include));
            }
    }
}

}  // namespace

TEST(Classify, SquareColumns) {
    const Problem pr = unit_square_fixture(2, kEps);
    const MultiPatchUnion U(pr.patches);
    const TensorBasis& tb = U.patch(0).basis();
    for (int ev = 0; ev < 3; ++ev)
        for (int eu = 0; eu < 4; ++eu) {
            const ElementStatus& st = U.status(0)[tb.element_id(eu, ev)];
            if (eu < 2) {
                EXPECT_EQ(st.kind, ElementStatus::Kind::interior);
                EXPECT_EQ(st.ratio, 1.0);
            } else if (eu == 2) {
                EXPECT_EQ(st.kind, ElementStatus::Kind::cut);
                EXPECT_NEAR(st.ratio, 4 * kEps, 1e-8 * 4 * kEps);
            } else {
                EXPECT_EQ(st.kind, ElementStatus::Kind::covered);
                EXPECT_EQ(st.ratio, 0.0);
            }
        }
}

TEST(Classify, TopPatchIsInterior) {
    for (const Problem& pr : {unit_square_fixture(3), disk_fixture(2, true), disk_fixture(2, false), three_patch_fixture(2)}) {
        const MultiPatchUnion U(pr.patches);
        for (const auto& st : U.status(U.num_patches() - 1)) {
            EXPECT_EQ(st.kind, ElementStatus::Kind::interior);
            EXPECT_EQ(st.ratio, 1.0);
        }
    }
}

TEST(CutQuadrature, SquareStripArea) {
    const Problem pr = unit_square_fixture(2, kEps);
    const MultiPatchUnion U(pr.patches);
    for (int ev = 0; ev < 3; ++ev) {
        const int e = U.patch(0).basis().element_id(2, ev);
        for (int n : {1, 3, 5}) {
            const ParamRule r = U.cut_rule(0, e, n);
            EXPECT_NEAR(physical_rule_area(U.patch(0), r), kEps / 3, 1e-14);
            for (double w : r.weights) EXPECT_GT(w, 0.0);
            for (const Point2& uv : r.points) EXPECT_LE(U.patch(0).point(uv).x(), 0.5 + kEps + 1e-15);
        }
    }
}

TEST(CutQuadrature, AnnulusElementsMatchPolarOracle) {
    // Rectangle on top: annulus elements are polar boxes (radius linear in v).
    const Problem pr = disk_fixture(2, false);
    const MultiPatchUnion U(pr.patches);
    const SplinePatch& A = U.patch(0);
    int n_cut = 0;
    for (int e = 0; e < A.basis().num_elements(); ++e) {
        if (U.status(0)[e].kind != ElementStatus::Kind::cut) continue;
        ++n_cut;
        const ParamElement pe = A.basis().element(e);
        const Point2 p0 = A.point({pe.u0, 0.0}), p1 = A.point({pe.u1, 0.0});
        const double a0 = std::atan2(p0.y(), p0.x()), a1 = std::atan2(p1.y(), p1.x());
        const double oracle = polar_area_outside_rect(1.0 + pe.v0, 1.0 + pe.v1, a0, a1, 1.13, 1.17);
        const double area = physical_rule_area(A, U.cut_rule(0, e, 6));
        EXPECT_NEAR(area, oracle, 1e-7 * oracle) << "element " << e;
    }
    EXPECT_GT(n_cut, 0);
}

TEST(MeasureProperty, DiskAreaBothOrderings) {
    for (bool annulus_top : {true, false})
        for (int level : {0, 1}) {
            Problem pr = disk_fixture(3, annulus_top);
            if (level) pr = refined(pr, 2);
            const MultiPatchUnion U(pr.patches);
            EXPECT_NEAR(total_visible_area(U), std::numbers::pi, 1e-7 * std::numbers::pi);
        }
}

TEST(MeasureProperty, SquareAndThreePatchAreas) {
    for (double eps : {1e-2, 1e-6}) {
        const MultiPatchUnion U(unit_square_fixture(2, eps).patches);
        EXPECT_NEAR(total_visible_area(U), 1.0, 1e-7);
        EXPECT_NEAR(U.visible_area(0), 0.5 + eps, 1e-12);
    }
    // Polygon-union area of the three rectangles (frozen from an independent polygon clipper).
    const double union_area = 1.3577777777777778;
    const MultiPatchUnion U(three_patch_fixture(2).patches);
    EXPECT_NEAR(total_visible_area(U), union_area, 1e-7 * union_area);
    EXPECT_NEAR(U.visible_area(2), 0.16, 1e-12);
    EXPECT_NEAR(U.visible_area(1), 0.45450920601366923, 1e-9);
}

TEST(Interface, SquareSegments) {
    const Problem pr = unit_square_fixture(2, kEps);
    const MultiPatchUnion U(pr.patches);
    ASSERT_TRUE(U.delta(1, 0));
    EXPECT_EQ(U.n_gamma(), 1);
    const InterfaceQuadMesh& m = U.interface(1, 0);
    ASSERT_EQ(m.segments.size(), 4u);
    const double expected[5] = {0.0, 1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0};
    for (int s = 0; s < 4; ++s) {
        EXPECT_EQ(m.segments[s].side, Side::left);
        EXPECT_NEAR(m.segments[s].t0, expected[s], 1e-12);
        EXPECT_NEAR(m.segments[s].t1, expected[s + 1], 1e-12);
        EXPECT_EQ(m.segments[s].nodes.size(), 3u);
        for (const auto& nd : m.segments[s].nodes) {
            EXPECT_NEAR(nd.x.x(), 0.5 + kEps, 1e-15);
            EXPECT_NEAR((nd.normal - Vec2(-1, 0)).norm(), 0.0, 1e-15);
        }
    }
    EXPECT_NEAR(m.length(), 1.0, 1e-12);
}

TEST(Interface, DisjointPatchesGiveEmptyMesh) {
    const MultiPatchUnion U({rectangle_patch(2, 2, 2, 0, 1, 0, 1), rectangle_patch(2, 2, 2, 2, 3, 0, 1)});
    EXPECT_TRUE(U.interface(1, 0).empty());
    EXPECT_FALSE(U.delta(1, 0));
    EXPECT_EQ(U.n_gamma(), 0);
}

TEST(Interface, DiskLengths) {
    const MultiPatchUnion Ua(disk_fixture(2, true).patches);
    EXPECT_NEAR(Ua.interface(1, 0).length(), std::numbers::pi / 2, 1e-8 * std::numbers::pi / 2);
    const MultiPatchUnion Ur(disk_fixture(2, false).patches);
    EXPECT_NEAR(Ur.interface(1, 0).length(), 1.13 + 1.17, 1e-8 * 2.3);
}

TEST(Interface, ThreePatchLengthsAndCounts) {
    const MultiPatchUnion U(three_patch_fixture(2).patches);
    EXPECT_EQ(U.n_gamma(), 3);
    // Boundary-curve clipping lengths frozen from an independent polygon clipper:
    // green inside blue, green inside orange but outside blue, blue inside orange but outside green.
    EXPECT_NEAR(U.interface(2, 1).length(), 0.6274539699316534, 1e-9);
    EXPECT_NEAR(U.interface(2, 0).length(), 0.17254603006834715, 1e-9);
    EXPECT_NEAR(U.interface(1, 0).length(), 1.0652738632872434, 1e-9);
}

TEST(InterfaceProperty, OrientationConsistencyHierarchy) {
    for (const Problem& pr : {unit_square_fixture(3), disk_fixture(2, true), disk_fixture(3, false), three_patch_fixture(2),
                              refined(three_patch_fixture(3), 2)}) {
        SCOPED_TRACE(pr.name);
        expect_interface_invariants(MultiPatchUnion(pr.patches));
    }
}

TEST(Boundary, SquareExternalSides) {
    const MultiPatchUnion U(unit_square_fixture(2, kEps).patches);
    EXPECT_TRUE(U.side_fully_external(0, Side::left));
    EXPECT_FALSE(U.side_fully_external(0, Side::bottom));
    EXPECT_TRUE(U.side_fully_external(1, Side::right));
    EXPECT_FALSE(U.side_fully_external(1, Side::left));
    double len = 0.0;
    for (int i = 0; i < 2; ++i)
        for (const auto& seg : U.boundary(i))
            for (const auto& nd : seg.nodes) len += nd.w;
    EXPECT_NEAR(len, 4.0, 1e-12);
}

TEST(Assumptions, EqualMeshesNoWarning) {
    const MultiPatchUnion U({rectangle_patch(2, 4, 4, 0, 1, 0, 1), rectangle_patch(2, 4, 4, 0.5, 1.5, 0, 1)});
    const AssumptionReport r = U.check_assumptions();
    EXPECT_NEAR(r.max_h_ratio, 1.0, 1e-12);
    EXPECT_TRUE(r.warnings.empty());
}

TEST(Assumptions, SquarePairNoWarning) {
    const AssumptionReport r = MultiPatchUnion(unit_square_fixture(2).patches).check_assumptions();
    EXPECT_LT(r.max_h_ratio, 10.0);
    EXPECT_TRUE(r.warnings.empty());
}

TEST(Assumptions, RefinedTopWarns) {
    Problem pr = unit_square_fixture(1);
    pr.patches[1] = pr.patches[1].h_refine(64);
    const AssumptionReport r = MultiPatchUnion(pr.patches).check_assumptions();
    EXPECT_GT(r.max_h_ratio, 10.0);
    EXPECT_FALSE(r.warnings.empty());
}

TEST(Svg, WritesPolylines) {
    const MultiPatchUnion U(three_patch_fixture(2).patches);
    const auto path = std::filesystem::temp_directory_path() / "uiga_three_patch.svg";
    U.write_svg(path.string());
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_NE(ss.str().find("<svg"), std::string::npos);
    EXPECT_NE(ss.str().find("polyline"), std::string::npos);
    std::filesystem::remove(path);
}
