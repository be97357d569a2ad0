// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "uiga/uiga.hpp"

using namespace uiga;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [violated: " << what << "]";
        }
    }
};

std::string fmt(double v, int prec = 3) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

std::vector<double> column(const std::vector<LevelResult>& rows, double LevelResult::*m) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(r.*m);
    return v;
}

bool all_ok(const std::vector<LevelResult>& rows, int expected) {
    if (static_cast<int>(rows.size()) != expected) return false;
    for (const auto& r : rows)
        if (!r.failure.empty()) return false;
    return true;
}

LevelOptions solve_options(FluxKind flux, bool stabilize = true) {
    LevelOptions o;
    o.assembly.flux = flux;
    o.assembly.stabilize = stabilize;
    return o;
}

constexpr int kLevels = 5;

// Last-step L2 >= p + 0.8 and H1 >= p - 0.2.
void check_rates(Outcome& out, const std::vector<LevelResult>& rows, int p, const std::string& label,
                 int levels = kLevels) {
    if (!all_ok(rows, levels)) {
        out.require(false, label + " study incomplete" + (rows.empty() ? "" : ": " + rows.back().failure));
        return;
    }
    const double l2 = observed_rates(column(rows, &LevelResult::l2)).back();
    const double h1 = observed_rates(column(rows, &LevelResult::h1)).back();
    out.detail << ' ' << label << " p=" << p << " L2 " << fmt(l2) << " H1 " << fmt(h1);
    out.require(l2 >= p + 0.8, label + " p=" + std::to_string(p) + " L2 rate");
    out.require(h1 >= p - 0.2, label + " p=" + std::to_string(p) + " H1 rate");
}

std::vector<LevelResult> square_study(int p, FluxKind flux) {
    return run_convergence([](int d) { return unit_square_fixture(d, 1e-6); }, p, kLevels, solve_options(flux));
}

std::vector<std::vector<LevelResult>> c1_rows;

Outcome criterion1() {
    Outcome out;
    for (int p : {2, 3, 4}) {
        const auto t0 = Clock::now();
        c1_rows.push_back(square_study(p, FluxKind::one_sided));
        const double t = seconds_since(t0);
        check_rates(out, c1_rows.back(), p, "one-sided");
        out.detail << " (" << fmt(t, 2) << " s)";
        out.require(t <= 300.0, "runtime p=" + std::to_string(p));
    }
    return out;
}

Outcome criterion2() {
    Outcome out;
    double worst = 0.0;
    for (int k = 0; k < 3; ++k) {
        const int p = k + 2;
        const auto sym = square_study(p, FluxKind::symmetric);
        const auto& one = c1_rows.at(k);
        if (!all_ok(sym, kLevels) || !all_ok(one, kLevels)) {
            out.require(false, "study incomplete p=" + std::to_string(p));
            continue;
        }
        for (int l = 0; l < kLevels; ++l) worst = std::max(worst, std::abs(sym[l].l2 - one[l].l2) / one[l].l2);
    }
    out.detail << " max relative L2 difference " << fmt(worst);
    out.require(worst <= 0.10, "symmetric vs one-sided within 10%");
    return out;
}

Outcome criterion3() {
    Outcome out;
    const auto t0 = Clock::now();
    const std::vector<double> eps{1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
    for (int p : {2, 3, 4}) {
        auto make = [p](double e) { return unit_square_fixture(p, e); };
        const auto stab = run_conditioning(make, eps, conditioning_case("symmetric-stabilized"), {});
        const auto one = run_conditioning(make, eps, conditioning_case("one-sided"), {});
        const auto unst = run_conditioning(make, eps, conditioning_case("symmetric-unstabilized"), {});
        const auto ks = column(stab, &LevelResult::kappa), ko = column(one, &LevelResult::kappa),
                   ku = column(unst, &LevelResult::kappa);
        auto spread = [](const std::vector<double>& k) {
            return *std::max_element(k.begin(), k.end()) / *std::min_element(k.begin(), k.end());
        };
        double agree = 0.0;
        bool monotone = true;
        for (std::size_t i = 0; i < eps.size(); ++i) {
            agree = std::max(agree, std::abs(ks[i] - ko[i]) / std::min(ks[i], ko[i]));
            if (i > 0 && !(ku[i] > ku[i - 1])) monotone = false;
        }
        const double growth = ku.back() / ku.front();
        const std::string P = " p=" + std::to_string(p);
        out.detail << P << ": spread " << fmt(spread(ks)) << '/' << fmt(spread(ko)) << " agree " << fmt(agree)
                   << " unstab growth " << fmt(growth);
        out.require(std::isfinite(spread(ks)) && spread(ks) <= 2.0, "stabilized spread" + P);
        out.require(std::isfinite(spread(ko)) && spread(ko) <= 2.0, "one-sided spread" + P);
        out.require(agree <= 0.10, "stabilized vs one-sided" + P);
        out.require(monotone, "unstabilized monotone" + P);
        out.require(growth >= 10.0, "unstabilized growth" + P);
    }
    const double t = seconds_since(t0);
    out.detail << " (" << fmt(t, 2) << " s)";
    out.require(t <= 600.0, "runtime");
    return out;
}

Outcome criterion4() {
    Outcome out;
    // Levels 2..5: three halvings of the element size.
    const std::vector<double> levels{2, 3, 4, 5};
    auto make = [](double level) {
        Problem pr = unit_square_fixture(2, 1e-6);
        for (int k = 0; k < static_cast<int>(level); ++k) pr = refined(pr, 2);
        return pr;
    };
    const auto rows = run_conditioning(make, levels, conditioning_case("symmetric-stabilized"), {});
    for (std::size_t k = 1; k < rows.size(); ++k) {
        const double g = rows[k].kappa / rows[k - 1].kappa;
        out.detail << " " << fmt(g);
        out.require(g >= 2.5 && g <= 6.0, "growth per halving at level " + fmt(levels[k]));
    }
    return out;
}

Outcome criterion5() {
    Outcome out;
    for (int p : {2, 3, 4}) {
        // p = 4 gets one extra level so the finest errors fall below 1e-9.
        const int levels = p == 4 ? kLevels + 1 : kLevels;
        std::vector<std::vector<LevelResult>> both;
        for (bool annulus_top : {true, false}) {
            both.push_back(run_convergence([&](int d) { return disk_fixture(d, annulus_top); }, p, levels,
                                           solve_options(FluxKind::one_sided)));
            check_rates(out, both.back(), p, annulus_top ? "annulus-top" : "rectangle-top", levels);
        }
        if (!all_ok(both[0], levels) || !all_ok(both[1], levels)) continue;
        double diff = 0.0;
        for (int l = 0; l < levels; ++l)
            diff = std::max(diff, std::abs(both[0][l].l2 - both[1][l].l2) / std::min(both[0][l].l2, both[1][l].l2));
        out.detail << " orderings differ " << fmt(diff);
        out.require(diff <= 0.25, "orderings within 25% p=" + std::to_string(p));
        if (p == 4) {
            const double finest = std::max(both[0].back().l2, both[1].back().l2);
            out.detail << " finest L2 " << fmt(finest);
            out.require(finest <= 1e-9, "p=4 reaches L2 error 1e-9");
        }
    }
    return out;
}

Outcome criterion6() {
    Outcome out;
    for (int p : {2, 3, 4}) {
        const auto rows = run_convergence([](int d) { return three_patch_fixture(d); }, p, kLevels,
                                          solve_options(FluxKind::one_sided));
        check_rates(out, rows, p, "three-patch");
        double worst = 0.0;
        for (const auto& r : rows) worst = std::max(worst, r.bad_fraction);
        out.detail << " bad<=" << fmt(worst);
        out.require(worst <= 0.10, "bad fraction p=" + std::to_string(p));
    }
    return out;
}

template <class F>
Eigen::VectorXd interpolate(const SplinePatch& P, F f) {
    const TensorBasis& tb = P.basis();
    const auto gu = tb.knots(0).greville(), gv = tb.knots(1).greville();
    const int n = tb.num_basis();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd b(n);
    BasisEval ev;
    for (int j = 0; j < tb.num_basis(1); ++j)
        for (int i = 0; i < tb.num_basis(0); ++i) {
            P.eval_basis({gu[i], gv[j]}, ev, false);
            for (std::size_t r = 0; r < ev.index.size(); ++r) A(tb.basis_index(i, j), ev.index[r]) = ev.value[r];
            b[tb.basis_index(i, j)] = f(ev.x);
        }
    return A.partialPivLu().solve(b);
}

double max_abs(const SparseMatrix& A) {
    double m = 0.0;
    for (int c = 0; c < A.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(A, c); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
}

Outcome criterion7() {
    Outcome out;
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> U01(0.0, 1.0);

    double pu = 0.0;
    for (int p : {1, 2, 3, 4, 5}) {
        const KnotVector kv = KnotVector::uniform(p, 7);
        for (int s = 0; s < 2000; ++s) {
            const BasisDerivs N = kv.eval(U01(rng), 0);
            double sum = 0.0;
            for (double v : N.ders[0]) sum += v;
            pu = std::max(pu, std::abs(sum - 1.0));
        }
    }
    out.detail << " PU " << fmt(pu);
    out.require(pu <= 1e-13, "partition of unity");

    double inv = 0.0;
    for (const SplinePatch& P : {quarter_annulus(2, 1), quarter_annulus(4, 3), rotated_rectangle(3, 4, 2, {0.3, -0.2}, 1.7, 0.6, 0.9)})
        for (int s = 0; s < 1000; ++s) {
            const Point2 uv(U01(rng), U01(rng));
            const InversionResult r = invert_point(P, P.point(uv));
            inv = std::max(inv, r.converged ? (r.uv - uv).norm() : 1.0);
        }
    out.detail << " inversion " << fmt(inv);
    out.require(inv <= 1e-9, "inversion round trip");

    double area = 0.0;
    const std::vector<std::pair<Problem, double>> areas{{unit_square_fixture(3, 1e-6), 1.0},
                                                        {disk_fixture(3, true), std::numbers::pi},
                                                        {disk_fixture(3, false), std::numbers::pi},
                                                        {three_patch_fixture(3), 1.3577777777777778}};
    for (const auto& [pr, exact] : areas) {
        const MultiPatchUnion Uni(pr.patches);
        double a = 0.0;
        for (int i = 0; i < Uni.num_patches(); ++i) a += Uni.visible_area(i);
        area = std::max(area, std::abs(a - exact) / exact);
    }
    out.detail << " area " << fmt(area);
    out.require(area <= 1e-7, "visible-measure partition");

    double flux = 0.0, patch = 0.0, sym = 0.0;
    for (int p : {2, 3}) {
        for (const Problem& pr : {unit_square_fixture(p, 1e-6), three_patch_fixture(p), refined(three_patch_fixture(p), 2)}) {
            const MultiPatchUnion Uni(pr.patches);
            const Stabilizer S(Uni);
            std::vector<double> a;
            for (int k = 0; k < (p + 1) * (p + 2) / 2; ++k) a.push_back(2.0 * U01(rng) - 1.0);
            auto value = [&](const Point2& x) {
                double s = 0.0;
                int k = 0;
                for (int d = 0; d <= p; ++d)
                    for (int i = 0; i <= d; ++i, ++k) s += a[k] * std::pow(x.x(), i) * std::pow(x.y(), d - i);
                return s;
            };
            auto grad = [&](const Point2& x) {
                Vec2 g = Vec2::Zero();
                int k = 0;
                for (int d = 0; d <= p; ++d)
                    for (int i = 0; i <= d; ++i, ++k) {
                        const int j = d - i;
                        if (i > 0) g.x() += a[k] * i * std::pow(x.x(), i - 1) * std::pow(x.y(), j);
                        if (j > 0) g.y() += a[k] * j * std::pow(x.x(), i) * std::pow(x.y(), j - 1);
                    }
                return g;
            };
            std::vector<Eigen::VectorXd> coef;
            for (int i = 0; i < Uni.num_patches(); ++i) coef.push_back(interpolate(Uni.patch(i), value));
            std::vector<FluxEntry> entries;
            auto eval = [&](int patch_id, int elem, const Point2& uv, const InterfaceNode& nd) {
                S.flux(patch_id, elem, uv, nd.x, nd.normal, true, entries);
                double v = 0.0;
                for (const auto& fe : entries) v += fe.value * coef[fe.patch][fe.basis];
                return v;
            };
            for (const auto& [key, m] : Uni.interfaces())
                for (const auto& seg : m.segments)
                    for (const auto& nd : seg.nodes) {
                        const double exact = grad(nd.x).dot(nd.normal);
                        const double scale = std::max(1.0, grad(nd.x).norm());
                        flux = std::max(flux, std::abs(eval(key.first, nd.elem, nd.uv, nd) - exact) / scale);
                        flux = std::max(flux, std::abs(eval(key.second, nd.elem_j, nd.uv_j, nd) - exact) / scale);
                    }

            Problem q = pr;
            q.solution = "quadratic";
            for (FluxKind f : {FluxKind::one_sided, FluxKind::symmetric}) {
                const LevelOutput lo = run_level(q, solve_options(f));
                patch = std::max({patch, lo.result.l2, lo.result.h1});
                const SparseMatrix Kt = lo.sys.K.transpose();
                sym = std::max(sym, max_abs(SparseMatrix(lo.sys.K - Kt)) / max_abs(lo.sys.K));
            }
        }
    }
    out.detail << " flux " << fmt(flux) << " patch " << fmt(patch) << " symmetry " << fmt(sym);
    out.require(flux <= 1e-9, "stabilized flux exactness");
    out.require(patch <= 1e-8, "patch test");
    out.require(sym <= 1e-12, "symmetry");

    auto csv = [] {
        std::string s;
        for (const auto& r : run_convergence([](int d) { return three_patch_fixture(d); }, 3, 3,
                                             solve_options(FluxKind::one_sided)))
            s += csv_row(r) + '\n';
        return s;
    };
    const bool same = csv() == csv();
    out.detail << " reruns " << (same ? "identical" : "differ");
    out.require(same, "byte-identical reruns");
    return out;
}

Outcome criterion8() {
    Outcome out;
    const MultiPatchUnion Uni(unit_square_fixture(2, 1e-6).patches);
    const InterfaceQuadMesh& m = Uni.interface(1, 0);
    out.detail << " segments " << m.segments.size() << " length " << fmt(m.length(), 17);
    out.require(m.segments.size() == 4, "4 segments");
    const double expected[] = {0.0, 1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0};
    if (m.segments.size() == 4)
        for (int s = 0; s < 4; ++s)
            out.require(std::abs(m.segments[s].t0 - expected[s]) <= 1e-12 &&
                            std::abs(m.segments[s].t1 - expected[s + 1]) <= 1e-12,
                        "breakpoints");
    out.require(std::abs(m.length() - 1.0) <= 1e-12, "total length");
    return out;
}

}  // namespace

// Optional arguments select criteria by number; criterion 2 reuses the runs of criterion 1.
int main(int argc, char** argv) {
    std::vector<bool> selected(9, argc == 1);
    for (int a = 1; a < argc; ++a) {
        const int k = std::atoi(argv[a]);
        if (k < 1 || k > 8) {
            std::fprintf(stderr, "unknown criterion '%s'\n", argv[a]);
            return 2;
        }
        selected[k] = true;
    }
    if (selected[2]) selected[1] = true;
    const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                         criterion5, criterion6, criterion7, criterion8};
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        if (!selected[k + 1]) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = criteria[k]();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << " [exception: " << e.what() << "]";
        }
        std::printf("%s criterion %zu:%s (%.1f s)\n", o.pass ? "PASS" : "FAIL", k + 1, o.detail.str().c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
