#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "uiga/uiga.hpp"

namespace fs = std::filesystem;
using namespace uiga;

namespace {

struct Overrides {
    std::string flux, stabilize, beta;
    std::optional<double> theta;
    std::optional<int> levels;
    std::string degrees;
    std::string out = "results";
    std::optional<unsigned> seed;
    bool timing = false;
    bool kappa = false;
};

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) v.push_back(std::stoi(tok));
    if (v.empty()) throw Error("empty list '" + s + "'");
    return v;
}

void apply(const Overrides& o, StudySpec& s) {
    if (!o.flux.empty()) s.flux = detail::parse_flux(o.flux);
    if (!o.stabilize.empty()) {
        if (o.stabilize != "on" && o.stabilize != "off") throw Error("--stabilize expects on|off");
        s.stabilize = o.stabilize == "on";
    }
    if (!o.beta.empty()) s.beta = detail::parse_beta(nlohmann::json(o.beta));
    if (o.theta) {
        if (!(*o.theta > 0.0 && *o.theta <= 1.0)) throw Error("--theta must lie in (0, 1]");
        s.theta = *o.theta;
    }
    if (o.levels) s.levels = *o.levels;
    if (!o.degrees.empty()) s.degrees = parse_int_list(o.degrees);
    if (o.timing) s.timing = true;
    if (o.kappa) s.kappa = true;
}

LevelOptions options_for(const StudySpec& s, const Overrides& o) {
    LevelOptions lo = level_options(s);
    if (o.seed) lo.seed = *o.seed;
    return lo;
}

void print_rows(const std::vector<LevelResult>& rows) {
    std::cout << csv_header() << '\n';
    for (const auto& r : rows) {
        std::cout << csv_row(r);
        if (!r.failure.empty()) std::cout << "   # " << r.failure;
        std::cout << '\n';
    }
}

nlohmann::json rates_json(const std::vector<LevelResult>& rows) {
    std::vector<double> l2, h1;
    for (const auto& r : rows)
        if (r.failure.empty()) {
            l2.push_back(r.l2);
            h1.push_back(r.h1);
        }
    nlohmann::json j;
    j["l2_rates"] = observed_rates(l2);
    j["h1_rates"] = observed_rates(h1);
    std::vector<std::string> failures;
    for (const auto& r : rows)
        if (!r.failure.empty()) failures.push_back("level " + std::to_string(r.level) + ": " + r.failure);
    j["failures"] = failures;
    return j;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

int cmd_solve(const std::string& cfg_path, const Overrides& o, int degree, int level, const std::string& matrix) {
    Config c = load_config(cfg_path);
    apply(o, c.study);
    const int p = degree > 0 ? degree : (c.fixture.empty() ? -1 : c.study.degrees.front());
    Problem pr = make_problem(c, p);
    for (int k = 0; k < level; ++k) pr = refined(pr, 2);
    LevelOptions lo = options_for(c.study, o);
    lo.export_matrix = matrix;
    const LevelOutput out = run_level(pr, lo, level);
    print_rows({out.result});
    if (out.result.failure.empty()) {
        std::cout << "pcg iterations " << out.result.iterations << ", interface nodes " << out.sys.iface_nodes;
        if (out.stab) std::cout << ", bad elements " << out.stab->num_bad() << '/' << out.stab->num_cut();
        std::cout << '\n';
    }
    if (lo.kappa)
        std::cout << "kappa " << csv_number(out.cond.kappa) << " (" << out.cond.method
                  << (out.cond.indefinite ? ", indefinite" : "") << (out.cond.singular ? ", singular" : "") << ")\n";
    return out.result.failure.empty() ? 0 : 1;
}

int cmd_convergence(const std::string& cfg_path, const Overrides& o) {
    Config c = load_config(cfg_path);
    apply(o, c.study);
    fs::create_directories(o.out);
    nlohmann::json summary;
    summary["name"] = c.name;
    summary["type"] = "convergence";
    summary["flux"] = c.study.flux == FluxKind::one_sided ? "onesided" : "symmetric";
    summary["stabilize"] = c.study.stabilize;
    summary["theta"] = c.study.theta;
    summary["levels"] = c.study.levels;
    bool ok = true;
    for (int p : c.study.degrees) {
        const auto rows = run_convergence([&](int d) { return make_problem(c, d); }, p, c.study.levels,
                                          options_for(c.study, o));
        const std::string file = c.name + "_p" + std::to_string(p) + ".csv";
        write_csv((fs::path(o.out) / file).string(), rows);
        std::cout << "# degree " << p << " -> " << (fs::path(o.out) / file).string() << '\n';
        print_rows(rows);
        nlohmann::json d = rates_json(rows);
        d["csv"] = file;
        summary["degrees"][std::to_string(p)] = d;
        ok = ok && d["failures"].empty();
    }
    write_json(fs::path(o.out) / "study.json", summary);
    return ok ? 0 : 1;
}

int cmd_conditioning(const std::string& cfg_path, const Overrides& o, const std::vector<std::string>& cases_cli) {
    Config c = load_config(cfg_path);
    apply(o, c.study);
    StudySpec& s = c.study;
    std::vector<std::string> cases = !cases_cli.empty() ? cases_cli : s.cases;
    if (cases.empty())
        for (const auto& cc : conditioning_cases()) cases.push_back(cc.name);
    std::vector<double> values = s.values;
    if (values.empty()) {
        if (s.parameter == "eps") values = {1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
        else
            for (int k = 0; k < s.levels; ++k) values.push_back(k);
    }
    if (s.parameter == "eps" && c.fixture != "unit_square") throw Error("eps conditioning needs the unit_square fixture");
    fs::create_directories(o.out);
    nlohmann::json summary;
    summary["name"] = c.name;
    summary["type"] = "conditioning";
    summary["parameter"] = s.parameter;
    summary["values"] = values;
    for (int p : s.degrees) {
        for (const auto& name : cases) {
            const ConditioningCase cc = conditioning_case(name);
            auto make = [&](double v) {
                Problem pr;
                int refinements = s.base_level;
                if (s.parameter == "eps") {
                    pr = make_problem(c, p, v);
                } else {
                    pr = make_problem(c, p, s.eps);
                    refinements = static_cast<int>(std::lround(v));
                }
                for (int k = 0; k < refinements; ++k) pr = refined(pr, 2);
                return pr;
            };
            const auto rows = run_conditioning(make, values, cc, options_for(s, o));
            const std::string file = c.name + "_" + name + "_p" + std::to_string(p) + ".csv";
            write_csv((fs::path(o.out) / file).string(), rows);
            std::cout << "# degree " << p << ", " << name << " -> " << (fs::path(o.out) / file).string() << '\n';
            print_rows(rows);
            std::vector<double> kappa;
            for (const auto& r : rows) kappa.push_back(r.kappa);
            summary["runs"].push_back({{"degree", p}, {"case", name}, {"csv", file}, {"kappa", kappa}});
        }
    }
    write_json(fs::path(o.out) / "study.json", summary);
    return 0;
}

int cmd_dump(const std::string& cfg_path, const Overrides& o, int degree, int level) {
    Config c = load_config(cfg_path);
    apply(o, c.study);
    const int p = degree > 0 ? degree : (c.fixture.empty() ? -1 : c.study.degrees.front());
    Problem pr = make_problem(c, p);
    for (int k = 0; k < level; ++k) pr = refined(pr, 2);
    fs::create_directories(o.out);
    MultiPatchUnion U(pr.patches);
    const fs::path svg = fs::path(o.out) / (c.name + ".svg");
    U.write_svg(svg.string());
    StabilizationOptions so;
    so.theta = c.study.theta;
    Stabilizer S(U, so);
    const fs::path csv = fs::path(o.out) / (c.name + "_bad_elements.csv");
    S.write_csv(csv.string());
    for (int i = 0; i < U.num_patches(); ++i) {
        int count[3] = {0, 0, 0};
        for (const auto& st : U.status(i)) ++count[static_cast<int>(st.kind)];
        std::printf("patch %d: %d interior, %d covered, %d cut, visible area %.12g\n", i, count[0], count[1], count[2],
                    U.visible_area(i));
    }
    for (const auto& [key, m] : U.interfaces())
        std::printf("interface (%d,%d): %zu segments, length %.15g\n", key.first, key.second, m.segments.size(),
                    m.length());
    std::printf("N_gamma %d, bad elements %d of %d cut\n", U.n_gamma(), S.num_bad(), S.num_cut());
    const AssumptionReport rep = U.check_assumptions();
    std::printf("max h ratio %.4g, max interface measure ratio %.4g\n", rep.max_h_ratio, rep.max_measure_ratio);
    for (const auto& w : rep.warnings) std::printf("warning: %s\n", w.c_str());
    std::cout << "wrote " << svg.string() << " and " << csv.string() << '\n';
    return 0;
}

void add_common(CLI::App* app, Overrides& o) {
    app->add_option("--flux", o.flux, "onesided | symmetric");
    app->add_option("--stabilize", o.stabilize, "on | off");
    app->add_option("--theta", o.theta, "bad-element area ratio threshold");
    app->add_option("--beta", o.beta, "penalty parameter or 6p2");
    app->add_option("--levels", o.levels, "number of nested levels");
    app->add_option("--degrees", o.degrees, "comma-separated degrees");
    app->add_option("--out", o.out, "output directory");
    app->add_option("--seed", o.seed, "Lanczos start-vector seed");
    app->add_flag("--timing", o.timing, "record wall_ms (breaks byte-identical reruns)");
    app->add_flag("--kappa", o.kappa, "compute condition numbers in solves and convergence studies");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Overlapping multi-patch isogeometric Poisson solver"};
    app.require_subcommand(1);
    Overrides o;
    std::string cfg, matrix;
    int degree = 0, level = 0;
    std::vector<std::string> cases;

    auto* solve = app.add_subcommand("solve", "assemble and solve one problem instance");
    solve->add_option("config", cfg, "JSON config")->required();
    solve->add_option("--degree", degree, "degree for fixture or Bezier-patch configs");
    solve->add_option("--level", level, "number of uniform refinements");
    solve->add_option("--export-matrix", matrix, "write the free-DOF matrix (MatrixMarket)");
    add_common(solve, o);

    auto* conv = app.add_subcommand("convergence", "nested-refinement convergence study");
    conv->add_option("config", cfg, "JSON config")->required();
    add_common(conv, o);

    auto* cond = app.add_subcommand("conditioning", "condition numbers versus eps or refinement level");
    cond->add_option("config", cfg, "JSON config")->required();
    cond->add_option("--cases", cases, "symmetric-unstabilized symmetric-stabilized one-sided");
    add_common(cond, o);

    auto* dump = app.add_subcommand("dump-geometry", "SVG of meshes and interfaces, bad-element CSV");
    dump->add_option("config", cfg, "JSON config")->required();
    dump->add_option("--degree", degree, "degree for fixture or Bezier-patch configs");
    dump->add_option("--level", level, "number of uniform refinements");
    add_common(dump, o);

    CLI11_PARSE(app, argc, argv);
    try {
        if (solve->parsed()) return cmd_solve(cfg, o, degree, level, matrix);
        if (conv->parsed()) return cmd_convergence(cfg, o);
        if (cond->parsed()) return cmd_conditioning(cfg, o, cases);
        if (dump->parsed()) return cmd_dump(cfg, o, degree, level);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
