#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "cdanse/bench.hpp"
#include "cdanse/svg_plot.hpp"
#include "cdanse/trace_io.hpp"

namespace fs = std::filesystem;
using namespace cdanse;

namespace {

std::string default_out_dir() {
    if (const char* env = std::getenv("CDANSE_OUT")) return env;
    return "cdanse_out";
}

int exit_code_for(SolveStatus status) {
    switch (status) {
        case SolveStatus::converged: return 0;
        case SolveStatus::max_iters: return 2;
        case SolveStatus::diverged: return 3;
    }
    return 1;
}

int to_nh(double H, int n) {
    const int n_H = static_cast<int>(std::lround(1.0 / H));
    if (n_H < 1 || std::abs(1.0 / H - n_H) > 1e-9)
        throw CLI::ValidationError("--H must be a reciprocal integer (e.g. 0.25)");
    if (n % n_H != 0)
        throw CLI::ValidationError("--H: 1/H must divide n so observation nodes are mesh vertices");
    return n_H;
}

struct SolveOptions {
    double re = 100.0;
    int n = 64;
    std::string method = "picard";
    std::string cda = "off";
    double H = 0.0;
    double mu = 0.0;
    int aa_depth = -1;  // -1 = AA off
    double aa_beta = 1.0;
    double tol = 1e-8;
    int max_iters = 200;
    double lid = 1.0;
    std::string out;
    std::string from_metadata;
    bool plot = false;
    bool force = false;
    bool timings = false;
};

void apply_metadata(SolveOptions& opt, const Metadata& meta) {
    auto get = [&](const char* key) -> const std::string* {
        const auto it = meta.find(key);
        return it == meta.end() ? nullptr : &it->second;
    };
    if (const auto* v = get("re")) opt.re = std::stod(*v);
    if (const auto* v = get("n")) opt.n = std::stoi(*v);
    if (const auto* v = get("method")) opt.method = *v;
    if (const auto* v = get("cda")) opt.cda = *v;
    if (const auto* v = get("H")) opt.H = std::stod(*v);
    if (const auto* v = get("mu")) opt.mu = std::stod(*v);
    if (const auto* v = get("aa_depth")) opt.aa_depth = std::stoi(*v);
    if (const auto* v = get("aa_beta")) opt.aa_beta = std::stod(*v);
    if (const auto* v = get("tol")) opt.tol = std::stod(*v);
    if (const auto* v = get("max_iters")) opt.max_iters = std::stoi(*v);
    if (const auto* v = get("lid")) opt.lid = std::stod(*v);
}

int run_solve(SolveOptions opt) {
    if (!opt.from_metadata.empty()) {
        std::ifstream in(opt.from_metadata);
        if (!in) {
            std::cerr << "cannot open metadata file: " << opt.from_metadata << '\n';
            return 1;
        }
        SolveOptions merged;  // metadata over defaults; explicit flags already in opt
        apply_metadata(merged, read_metadata(in));
        merged.out = opt.out;
        merged.plot = opt.plot;
        merged.force = opt.force;
        merged.timings = opt.timings;
        opt = merged;
    }

    Scenario s;
    s.name = "solve";
    s.Re = opt.re;
    s.n = opt.n;
    s.method = iter_method_from_string(opt.method);
    s.cda = nudging_mode_from_string(opt.cda);
    s.tol = opt.tol;
    s.max_iters = opt.max_iters;
    if (s.cda != NudgingMode::off) {
        if (opt.H <= 0.0) {
            std::cerr << "--cda " << opt.cda << " requires --H\n";
            return 1;
        }
        s.n_H = to_nh(opt.H, opt.n);
    }
    if (s.cda == NudgingMode::penalty) {
        if (opt.mu <= 0.0) {
            std::cerr << "--cda penalty requires --mu > 0\n";
            return 1;
        }
        s.mu = opt.mu;
    }
    if (opt.aa_depth >= 0) {
        AndersonConfig aa;
        aa.depth = opt.aa_depth;
        aa.beta = opt.aa_beta;
        s.anderson = aa;
    }

    const fs::path out_dir = opt.out;
    const fs::path trace_path = out_dir / "trace.csv";
    if (fs::exists(trace_path) && !opt.force) {
        std::cerr << trace_path.string() << " exists; use --force to overwrite\n";
        return 1;
    }
    fs::create_directories(out_dir);

    BenchContext ctx((out_dir / "refcache").string());
    ctx.lid_speed = opt.lid;
    const ScenarioResult result = ctx.run(s);
    if (!result.ran) {
        std::cerr << "run failed: " << result.error << '\n';
        return 1;
    }

    {
        std::ofstream csv(trace_path);
        write_trace_csv(result.trace, csv, /*zero_wall=*/!opt.timings);
        Metadata meta = scenario_metadata(s, result.trace);
        meta["lid"] = format_double(opt.lid);
        std::ofstream metaout(out_dir / "run.meta");
        write_metadata(meta, metaout);
    }
    if (opt.plot) {
        PlotCurve c;
        c.label = "run";
        c.diverged = result.trace.status == SolveStatus::diverged;
        for (const IterationRecord& rec : result.trace.records)
            c.values.push_back(rec.err_star ? *rec.err_star
                                            : (rec.err_h1 ? *rec.err_h1 : rec.residual));
        std::ofstream svg(out_dir / "plot.svg");
        write_convergence_svg("error vs iteration", {c}, svg);
    }

    std::cout << scenario_summary_line(result) << '\n';
    return exit_code_for(result.trace.status);
}

struct SuiteOptions {
    std::string name;
    std::string out;
    double re = 0.0;  // 0 = suite default
    int jobs = 0;
    bool force = false;
    bool no_plot = false;
};

int run_suite(const SuiteOptions& opt) {
    const fs::path out_dir = opt.out;
    const fs::path suite_dir = out_dir / opt.name;
    if (fs::exists(suite_dir / "summary.txt") && !opt.force) {
        std::cerr << (suite_dir / "summary.txt").string()
                  << " exists; use --force to overwrite\n";
        return 1;
    }
    fs::create_directories(out_dir);

    BenchContext ctx((out_dir / "refcache").string());
    const int jobs = opt.jobs > 0 ? opt.jobs
                                  : std::max(1u, std::thread::hardware_concurrency());

    SuiteReport report;
    try {
        if (opt.re > 0.0) {
            if (opt.name == "newtonbasin")
                report = suite_newton_basin(ctx, {opt.re}, 64, {4, 8}, jobs);
            else if (opt.name == "enablement")
                report = suite_enablement(ctx, {opt.re}, 64, {16, 32}, jobs);
            else if (opt.name == "aa")
                report = suite_aa(ctx, opt.re, 64, {8, 16}, 5, 1.0, jobs);
            else if (opt.name == "musweep")
                report = suite_mu_sweep(ctx, opt.re, 64, 8, {1e2, 1e4, 1e6, 1e8, 1e12}, jobs);
            else if (opt.name == "table1")
                report = suite_table1(ctx, 64, opt.re, jobs);
            else
                throw std::invalid_argument("unknown suite: " + opt.name);
        } else {
            report = run_suite_by_name(ctx, opt.name, jobs);
        }
    } catch (const std::exception& err) {
        std::cerr << "suite failed: " << err.what() << '\n';
        return 1;
    }

    emit_suite_report(report, out_dir.string(), !opt.no_plot);

    std::cout << "suite " << report.suite << " — " << report.note << '\n';
    for (const ScenarioResult& r : report.results)
        std::cout << "  " << scenario_summary_line(r) << '\n';
    for (const SuiteAssertion& a : report.assertions)
        std::cout << (a.pass ? "  PASS " : "  FAIL ") << a.name << '\n';
    std::cout << (report.all_pass() ? "ALL PASS" : "FAILURES PRESENT") << '\n';
    return report.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Steady Navier-Stokes nonlinear-solver benchmarks with nudged iterations"};
    app.require_subcommand(1);

    SolveOptions sopt;
    sopt.out = default_out_dir();
    CLI::App* solve = app.add_subcommand("solve", "run one scenario end to end");
    solve->add_option("--re", sopt.re, "Reynolds number");
    solve->add_option("--n", sopt.n, "fine mesh resolution");
    solve->add_option("--method", sopt.method, "picard|newton");
    solve->add_option("--cda", sopt.cda, "off|penalty|direct");
    solve->add_option("--H", sopt.H, "observation spacing (reciprocal integer)");
    solve->add_option("--mu", sopt.mu, "penalty nudging weight");
    solve->add_option("--aa-depth", sopt.aa_depth, "Anderson depth m (omit for no AA)");
    solve->add_option("--aa-beta", sopt.aa_beta, "Anderson relaxation in (0,1]");
    solve->add_option("--tol", sopt.tol, "H1 update stopping tolerance");
    solve->add_option("--max-iters", sopt.max_iters, "iteration cap");
    solve->add_option("--lid", sopt.lid, "lid speed");
    solve->add_option("--out", sopt.out, "output directory");
    solve->add_option("--from-metadata", sopt.from_metadata, "re-run from a run.meta file");
    solve->add_flag("--plot", sopt.plot, "emit plot.svg");
    solve->add_flag("--force", sopt.force, "overwrite existing outputs");
    solve->add_flag("--timings", sopt.timings, "record real per-iteration wall times in the CSV");

    SuiteOptions uopt;
    uopt.out = default_out_dir();
    CLI::App* suite = app.add_subcommand("suite", "run a benchmark suite");
    suite->add_option("name", uopt.name, "table1|musweep|enablement|newtonbasin|aa")->required();
    suite->add_option("--re", uopt.re, "override the suite's Reynolds grid with one value");
    suite->add_option("--out", uopt.out, "output directory");
    suite->add_option("--jobs", uopt.jobs, "scenario worker threads (default: core count)");
    suite->add_flag("--force", uopt.force, "overwrite existing reports");
    suite->add_flag("--no-plot", uopt.no_plot, "skip SVG emission");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (solve->parsed()) return run_solve(sopt);
        if (suite->parsed()) return run_suite(uopt);
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    }
    return 1;
}
