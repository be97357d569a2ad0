#pragma once

// JSON problem and study configuration.
//
// {
//   "name": "...",
//   "fixture": {"name": "unit_square", "eps": 1e-6}        (or "disk", "three_patch")
//   "patches": [{"degrees": [p, q], "knots": [[...], [...]],
//                "control_points": [[x, y], ...], "weights": [...],
//                "subdivide": [nx, ny]}],
//   "boundary_conditions": [{"patch": 0, "side": "left", "type": "dirichlet"}],
//   "solution": "sin_cos",
//   "study": {...}
// }
//
// Either "fixture" or "patches" defines the geometry. Explicit patches are given in Bezier
// form (one element per direction) when the study asks for other degrees: they are elevated
// to each requested degree and then subdivided. Control points run u-fastest.

#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "uiga/harness/fixtures.hpp"
#include "uiga/harness/study.hpp"
#include "uiga/problem.hpp"

namespace uiga {

using Json = nlohmann::json;

struct PatchSpec {
    int degree[2] = {1, 1};
    std::vector<double> knots[2];
    std::vector<Point2> control;
    std::vector<double> weights;
    int subdivide[2] = {1, 1};
};

struct StudySpec {
    std::string type = "convergence";  ///< convergence | conditioning
    int levels = 4;
    std::vector<int> degrees{2};
    FluxKind flux = FluxKind::one_sided;
    bool stabilize = true;
    double theta = 0.1;
    double beta = 0.0;  ///< <= 0 means 6 p^2
    bool kappa = false;
    bool timing = false;
    std::string parameter = "eps";      ///< conditioning: eps | level
    std::vector<double> values;         ///< conditioning parameter values
    std::vector<std::string> cases;     ///< conditioning cases
    int base_level = 0;                 ///< conditioning vs eps: refinements of the base mesh
    double eps = 1e-6;                  ///< conditioning vs level: fixed eps
};

struct Config {
    std::string name = "problem";
    std::string fixture;  ///< empty when patches are explicit
    double eps = 1e-6;
    std::vector<PatchSpec> patches;
    std::vector<BoundaryCondition> bcs;
    bool bcs_given = false;
    std::string solution = "zero";
    StudySpec study;
};

namespace detail {

inline FluxKind parse_flux(const std::string& s) {
    if (s == "onesided" || s == "one-sided" || s == "one_sided") return FluxKind::one_sided;
    if (s == "symmetric") return FluxKind::symmetric;
    throw Error("unknown flux '" + s + "' (onesided|symmetric)");
}

inline double parse_beta(const Json& j) {
    if (j.is_number()) {
        const double b = j.get<double>();
        if (!(b > 0.0)) throw Error("beta must be positive");
        return b;
    }
    const std::string s = j.get<std::string>();
    if (s == "6p2") return 0.0;
    return parse_beta(Json(std::stod(s)));
}

inline PatchSpec parse_patch(const Json& j) {
    PatchSpec p;
    const auto deg = j.at("degrees").get<std::vector<int>>();
    const auto knots = j.at("knots").get<std::vector<std::vector<double>>>();
    if (deg.size() != 2 || knots.size() != 2) throw Error("patch needs two degrees and two knot vectors");
    for (int d = 0; d < 2; ++d) {
        p.degree[d] = deg[d];
        p.knots[d] = knots[d];
    }
    for (const auto& c : j.at("control_points")) {
        if (c.size() != 2) throw Error("control points are [x, y] pairs");
        p.control.emplace_back(c[0].get<double>(), c[1].get<double>());
    }
    if (j.contains("weights")) p.weights = j.at("weights").get<std::vector<double>>();
    if (j.contains("subdivide")) {
        const auto s = j.at("subdivide").get<std::vector<int>>();
        if (s.size() != 2 || s[0] < 1 || s[1] < 1) throw Error("subdivide needs two positive counts");
        p.subdivide[0] = s[0];
        p.subdivide[1] = s[1];
    }
    return p;
}

}  // namespace detail

inline Config parse_config(const Json& j) {
    Config c;
    c.name = j.value("name", std::string("problem"));
    if (j.contains("fixture")) {
        const Json& f = j.at("fixture");
        c.fixture = f.is_string() ? f.get<std::string>() : f.at("name").get<std::string>();
        if (f.is_object()) c.eps = f.value("eps", 1e-6);
    }
    if (j.contains("patches"))
        for (const auto& p : j.at("patches")) c.patches.push_back(detail::parse_patch(p));
    if (c.fixture.empty() == c.patches.empty()) throw Error("config needs exactly one of 'fixture' or 'patches'");
    if (j.contains("boundary_conditions")) {
        c.bcs_given = true;
        for (const auto& b : j.at("boundary_conditions")) {
            BoundaryCondition bc;
            bc.patch = b.at("patch").get<int>();
            bc.side = side_from_name(b.at("side").get<std::string>());
            const std::string t = b.value("type", std::string("dirichlet"));
            if (t == "dirichlet") bc.type = BcType::dirichlet;
            else if (t == "neumann") bc.type = BcType::neumann;
            else throw Error("unknown boundary condition type '" + t + "'");
            c.bcs.push_back(bc);
        }
    }
    c.solution = j.value("solution", std::string(c.fixture.empty() ? "zero" : ""));
    if (c.solution == "none") c.solution = "zero";
    if (j.contains("study")) {
        const Json& s = j.at("study");
        StudySpec& st = c.study;
        st.type = s.value("type", st.type);
        st.levels = s.value("levels", st.levels);
        if (s.contains("degrees")) st.degrees = s.at("degrees").get<std::vector<int>>();
        if (s.contains("flux")) st.flux = detail::parse_flux(s.at("flux").get<std::string>());
        st.stabilize = s.value("stabilize", st.stabilize);
        st.theta = s.value("theta", st.theta);
        if (s.contains("beta")) st.beta = detail::parse_beta(s.at("beta"));
        st.kappa = s.value("kappa", st.kappa);
        st.timing = s.value("timing", st.timing);
        st.parameter = s.value("parameter", st.parameter);
        if (s.contains("values")) st.values = s.at("values").get<std::vector<double>>();
        if (s.contains("cases")) st.cases = s.at("cases").get<std::vector<std::string>>();
        st.base_level = s.value("base_level", st.base_level);
        st.eps = s.value("eps", st.eps);
        if (st.type != "convergence" && st.type != "conditioning") throw Error("unknown study type '" + st.type + "'");
        if (st.parameter != "eps" && st.parameter != "level") throw Error("conditioning parameter must be eps or level");
        if (!(st.theta > 0.0 && st.theta <= 1.0)) throw Error("theta must lie in (0, 1]");
    }
    return c;
}

inline Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read config " + path);
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::exception& e) {
        throw Error("config " + path + ": " + e.what());
    }
    try {
        return parse_config(j);
    } catch (const Json::exception& e) {
        throw Error("config " + path + ": " + e.what());
    }
}

/// Patch of a degree-p instance; degree < 0 keeps the given degrees.
inline SplinePatch build_patch(const PatchSpec& s, int degree) {
    KnotVector k0 = KnotVector::rescaled(s.degree[0], s.knots[0]);
    KnotVector k1 = KnotVector::rescaled(s.degree[1], s.knots[1]);
    SplinePatch P = SplinePatch::create(TensorBasis(k0, k1), s.control, s.weights);
    if (degree >= 0) {
        for (int d = 0; d < 2; ++d) {
            if (degree == s.degree[d]) continue;
            if (degree < s.degree[d]) throw Error("cannot lower patch degree");
            P = elevate_bezier(P, d, degree - s.degree[d]);
        }
    }
    for (int d = 0; d < 2; ++d)
        if (s.subdivide[d] > 1) P = P.insert_knots(d, P.basis().knots(d).subdivision_knots(s.subdivide[d]));
    return P;
}

/// Problem instance for one degree (and, for the square fixture, one eps value).
inline Problem make_problem(const Config& c, int degree, std::optional<double> eps = std::nullopt) {
    Problem pr;
    if (!c.fixture.empty()) {
        if (degree < 1) throw Error("fixture needs a degree >= 1");
        const double e = eps.value_or(c.eps);
        if (c.fixture == "unit_square") pr = unit_square_fixture(degree, e);
        else if (c.fixture == "disk" || c.fixture == "disk_annulus_top") pr = disk_fixture(degree, true);
        else if (c.fixture == "disk_rectangle_top") pr = disk_fixture(degree, false);
        else if (c.fixture == "three_patch") pr = three_patch_fixture(degree);
        else throw Error("unknown fixture '" + c.fixture + "'");
    } else {
        for (const auto& s : c.patches) pr.patches.push_back(build_patch(s, degree));
    }
    pr.name = c.name;
    if (c.bcs_given) pr.bcs = c.bcs;
    if (!c.solution.empty()) pr.solution = c.solution;
    for (const auto& bc : pr.bcs)
        if (bc.patch < 0 || bc.patch >= static_cast<int>(pr.patches.size()))
            throw Error("boundary condition refers to patch " + std::to_string(bc.patch));
    return pr;
}

inline LevelOptions level_options(const StudySpec& s) {
    LevelOptions o;
    o.assembly.flux = s.flux;
    o.assembly.stabilize = s.stabilize;
    o.assembly.theta = s.theta;
    o.assembly.beta = s.beta;
    o.kappa = s.kappa;
    o.timing = s.timing;
    return o;
}

}  // namespace uiga
