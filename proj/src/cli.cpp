#include "coalesce/cli.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "coalesce/census.hpp"
#include "coalesce/detect.hpp"
#include "coalesce/error.hpp"
#include "coalesce/io.hpp"
#include "coalesce/parallel.hpp"

namespace coalesce::cli {

namespace fs = std::filesystem;
using io::json;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    int workers = default_workers();
    std::string out_dir = ".";
    std::string log_level = "warn";
};

void write_manifest(const Globals& g, const std::string& subcommand, json config) {
    json m{{"tool", "coalesce"},
           {"version", COALESCE_VERSION},
           {"subcommand", subcommand},
           {"config", std::move(config)},
           {"workers", g.workers}};
    if (g.seed) m["seed"] = *g.seed;
    io::write_text_file(fs::path(g.out_dir) / "manifest.json", m.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
    int n = 0;
    std::string b;
    double delta = 0.0;
    std::string out;
};

int cmd_generate(const Globals& g, const GenerateArgs& a, std::ostream& out) {
    SGPlusParams p;
    p.n = a.n;
    p.b = a.b == "full" ? a.n - 1 : Bandwidth::parse(a.b).value;
    p.delta = a.delta;
    p.seed = g.seed.value_or(0);
    (void)sgplus_generate(p);  // validates
    const json d = io::descriptor_to_json(p);
    const fs::path path = a.out.empty() ? fs::path(g.out_dir) / "descriptor.json" : fs::path(a.out);
    io::write_text_file(path, d.dump(2) + "\n");
    write_manifest(g, "generate", {{"descriptor", d}, {"out", path.string()}});
    out << path.string() << '\n';
    return kOk;
}

struct TraceArgs {
    std::string pencil;
    std::string loop;
    double h0 = 1.0 / 64.0;
};

int cmd_trace(const Globals& g, const TraceArgs& a, std::ostream& out) {
    const json pj = io::load_json_arg(a.pencil);
    const json lj = io::load_json_arg(a.loop);
    const auto pencil = io::pencil_from_json(pj);
    const auto path = io::loop_from_json(lj);
    ContinuationOptions opts;
    opts.h0 = a.h0;
    write_manifest(g, "trace", {{"pencil", pj}, {"loop", lj}, {"continuation", io::continuation_to_json(opts)}});

    const TraceResult r = trace_path(pencil, path, opts);
    std::ostringstream csv;
    io::write_trace_csv(csv, r);
    io::write_text_file(fs::path(g.out_dir) / "trace.csv", csv.str());

    json summary{{"accepted_steps", r.stats.accepted}, {"rejected_steps", r.stats.rejected}};
    if (path.closed()) {
        const auto sig = make_signature(r.D);
        json sj = io::signature_to_json(sig, r.D_raw);
        io::write_text_file(fs::path(g.out_dir) / "signature.json", sj.dump(2) + "\n");
        summary["signature"] = sj;
    }
    out << summary.dump() << '\n';
    return kOk;
}

struct SweepArgs {
    std::string pencil;
    std::string grid;
    std::vector<double> domain;
    int nx = 0;
    int ny = 0;
    double h0 = 1.0 / 64.0;
};

int cmd_sweep(const Globals& g, const SweepArgs& a, std::ostream& out) {
    const json pj = io::load_json_arg(a.pencil);
    GridSpec grid;
    if (!a.grid.empty()) {
        grid = io::grid_from_json(io::load_json_arg(a.grid));
    } else {
        if (a.domain.size() != 4 || a.nx < 1 || a.ny < 1) {
            throw Error(ErrorCode::InvalidArgument, "sweep needs --grid or --domain with --nx/--ny");
        }
        grid = io::grid_from_json({{"domain", a.domain}, {"nx", a.nx}, {"ny", a.ny}});
    }
    const auto pencil = io::pencil_from_json(pj);
    ContinuationOptions opts;
    opts.h0 = a.h0;
    RetryPolicy retry;
    if (g.seed) retry.seed = *g.seed;
    write_manifest(g, "sweep",
                   {{"pencil", pj}, {"grid", io::grid_to_json(grid)}, {"continuation", io::continuation_to_json(opts)},
                    {"retry_seed", retry.seed}});

    const BoxGrid result = sweep_grid(pencil, grid, opts, retry, g.workers);
    std::ostringstream csv;
    io::write_ci_csv(csv, result);
    io::write_text_file(fs::path(g.out_dir) / "ci_report.csv", csv.str());
    const json summary = io::sweep_summary(result);
    io::write_text_file(fs::path(g.out_dir) / "summary.json", summary.dump(2) + "\n");
    out << "total=" << result.total_flags() << " failed=" << result.failed_count() << '\n';
    return kOk;
}

struct CensusArgs {
    std::string spec;
    int max_jobs = -1;
};

int cmd_census(const Globals& g, const CensusArgs& a, std::ostream& out) {
    ExperimentSpec spec = io::experiment_from_json(io::load_json_arg(a.spec));
    if (g.seed) spec.seed0 = *g.seed;
    write_manifest(g, "census", io::experiment_to_json(spec));
    const auto report = run_census(spec, fs::path(g.out_dir) / "cells", g.workers,
                                   a.max_jobs >= 0 ? std::optional<int>(a.max_jobs) : std::nullopt);
    write_census_outputs(report, g.out_dir);
    out << "jobs: " << report.jobs_run << " run, " << report.jobs_reused << " reused, " << report.jobs_total
        << " total" << (report.complete ? "" : " (incomplete)") << '\n';
    for (const auto& f : report.fits) {
        if (f.fit) {
            out << "b=" << f.bandwidth << " delta=" << f.delta << " p=" << f.fit->p << " c=" << f.fit->c
                << " rmsd=" << f.fit->rmsd << '\n';
        }
    }
    return report.complete ? kOk : kNumerical;
}

struct FitArgs {
    std::string data;
};

// CSV with a header naming at least the columns n and count (or mean_count);
// an optional bandwidth column groups the rows into separate fits.
int cmd_fit(const Globals& g, const FitArgs& a, std::ostream& out) {
    std::ifstream in(a.data);
    if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open " + a.data);
    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) header.push_back(cell);
        break;
    }
    if (header.empty()) throw Error(ErrorCode::InvalidArgument, "data file is empty");
    auto col = [&](std::initializer_list<const char*> names) -> int {
        for (std::size_t i = 0; i < header.size(); ++i)
            for (const char* nm : names)
                if (header[i] == nm) return static_cast<int>(i);
        return -1;
    };
    const int cn = col({"n", "dimension"});
    const int cc = col({"count", "mean_count", "avg_cis"});
    const int cb = col({"bandwidth"});
    if (cn < 0 || cc < 0) throw Error(ErrorCode::InvalidArgument, "data file needs 'n' and 'count' columns");

    std::vector<std::string> order;
    std::map<std::string, std::vector<std::pair<double, double>>> groups;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        if (static_cast<int>(cells.size()) <= std::max({cn, cc, cb})) {
            throw Error(ErrorCode::InvalidArgument, "short row: " + line);
        }
        const std::string key = cb >= 0 ? cells[cb] : "all";
        if (!groups.count(key)) order.push_back(key);
        groups[key].emplace_back(std::stod(cells[cn]), std::stod(cells[cc]));
    }
    if (groups.empty()) throw Error(ErrorCode::InvalidArgument, "data file has no rows");

    std::ostringstream csv;
    csv << "bandwidth,p,c,rmsd,points\n";
    for (const auto& key : order) {
        const auto fit = fit_power_law(groups[key]);
        csv << key << ',' << io::fmt17(fit.p) << ',' << io::fmt17(fit.c) << ',' << io::fmt17(fit.rmsd) << ','
            << fit.points_used << '\n';
    }
    io::write_text_file(fs::path(g.out_dir) / "fit_summary.csv", csv.str());
    write_manifest(g, "fit", {{"data", a.data}});
    out << csv.str();
    return kOk;
}

void setup_logging(const std::string& level) {
    static std::once_flag once;
    std::call_once(once, [] {
        auto logger = spdlog::stderr_color_mt("coalesce");
        spdlog::set_default_logger(logger);
    });
    spdlog::set_level(spdlog::level::from_str(level));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Smooth eigendecompositions of parametric SPD pencils and conical-intersection search"};
    app.fallthrough();
    app.set_version_flag("--version", COALESCE_VERSION);
    Globals g;
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "master RNG seed");
    app.add_option("--workers", g.workers, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out-dir", g.out_dir, "output directory");
    app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}));
    app.require_subcommand(1);

    GenerateArgs ga;
    auto* gen = app.add_subcommand("generate", "draw an SG+ realization and write its descriptor");
    gen->add_option("--n", ga.n, "dimension")->required()->check(CLI::Range(2, 1 << 20));
    gen->add_option("--b", ga.b, "bandwidth (1..n-1 or 'full')")->required();
    gen->add_option("--delta", ga.delta, "dispersion")->required();
    gen->add_option("--out", ga.out, "descriptor file (default <out-dir>/descriptor.json)");

    TraceArgs ta;
    auto* tr = app.add_subcommand("trace", "continue the decomposition along a path");
    tr->add_option("--pencil", ta.pencil, "pencil spec (JSON file or inline)")->required();
    tr->add_option("--loop", ta.loop, "loop spec (JSON file or inline)")->required();
    tr->add_option("--h0", ta.h0, "initial stepsize")->check(CLI::PositiveNumber);

    SweepArgs sa;
    auto* sw = app.add_subcommand("sweep", "detect conical intersections on a box grid");
    sw->add_option("--pencil", sa.pencil, "pencil spec (JSON file or inline)")->required();
    sw->add_option("--grid", sa.grid, "grid spec (JSON file or inline)");
    sw->add_option("--domain", sa.domain, "x_lo x_hi y_lo y_hi")->expected(4);
    sw->add_option("--nx", sa.nx, "boxes along x");
    sw->add_option("--ny", sa.ny, "boxes along y");
    sw->add_option("--h0", sa.h0, "initial stepsize")->check(CLI::PositiveNumber);

    CensusArgs ca;
    auto* ce = app.add_subcommand("census", "run an ensemble census and fit power laws");
    ce->add_option("--spec", ca.spec, "experiment spec (JSON file or inline)")->required();
    ce->add_option("--max-jobs", ca.max_jobs, "stop after this many new jobs");

    FitArgs fa;
    auto* fi = app.add_subcommand("fit", "fit count = c n^p to a CSV of counts");
    fi->add_option("--data", fa.data, "CSV with n,count[,bandwidth] columns")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }
    if (*seed_opt) g.seed = seed_value;

    try {
        setup_logging(g.log_level);
        fs::create_directories(g.out_dir);
        if (*gen) return cmd_generate(g, ga, out);
        if (*tr) return cmd_trace(g, ta, out);
        if (*sw) return cmd_sweep(g, sa, out);
        if (*ce) return cmd_census(g, ca, out);
        if (*fi) return cmd_fit(g, fa, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return e.is_numerical() ? kNumerical : kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}

}  // namespace coalesce::cli
