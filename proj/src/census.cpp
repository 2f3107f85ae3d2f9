#include "coalesce/census.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

#include <spdlog/spdlog.h>

#include "coalesce/error.hpp"
#include "coalesce/io.hpp"
#include "coalesce/parallel.hpp"
#include "coalesce/rng.hpp"

namespace coalesce {

namespace fs = std::filesystem;

Bandwidth Bandwidth::parse(const std::string& s) {
    if (s == "full") return {0};
    try {
        std::size_t pos = 0;
        const int v = std::stoi(s, &pos);
        if (pos == s.size() && v >= 1) return {v};
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::BandwidthOutOfRange, "bandwidth '" + s + "' is not a positive integer or \"full\"");
}

void ExperimentSpec::validate() const {
    if (realizations < 0) throw Error(ErrorCode::InvalidArgument, "realizations must be >= 0");
    if (grid.nx < 1 || grid.ny < 1) throw Error(ErrorCode::InvalidArgument, "grid resolution must be positive");
    if (pencil_override) return;
    for (int n : n_list) {
        if (n < 2) throw Error(ErrorCode::InvalidArgument, "dimensions must be >= 2");
        for (double d : delta_list) {
            if (!(d > 0.0) || !(d < max_dispersion(n))) {
                throw Error(ErrorCode::DispersionOutOfRange,
                            "delta = " + io::fmt17(d) + " violates 0 < delta < sqrt((n+1)/(n+5)) for n = " +
                                std::to_string(n));
            }
        }
        for (const auto& b : b_list) {
            if (!b.full() && b.value > n - 1) {
                throw Error(ErrorCode::BandwidthOutOfRange,
                            "bandwidth " + b.label() + " exceeds n-1 for n = " + std::to_string(n));
            }
        }
    }
}

PowerLawFit fit_power_law(std::span<const std::pair<double, double>> points) {
    if (points.size() < 2) throw Error(ErrorCode::InvalidArgument, "power-law fit needs at least two points");
    PowerLawFit fit;
    std::vector<double> xs, ys;
    for (const auto& [n, count] : points) {
        if (!(n > 0.0)) throw Error(ErrorCode::InvalidArgument, "dimensions must be positive");
        if (!(count > 0.0)) {
            spdlog::warn("fit_power_law: excluding n = {} with nonpositive count {}", n, count);
            fit.excluded.push_back(n);
            continue;
        }
        xs.push_back(std::log(n));
        ys.push_back(std::log(count));
    }
    if (xs.size() < 2) {
        throw Error(ErrorCode::NonPositiveCount, "fewer than two points with positive counts");
    }
    const auto m = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= m;
    my /= m;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (!(sxx > 0.0)) throw Error(ErrorCode::InvalidArgument, "power-law fit needs distinct dimensions");
    fit.p = sxy / sxx;
    const double intercept = my - fit.p * mx;
    fit.c = std::exp(intercept);
    double ss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (intercept + fit.p * xs[i]);
        ss += r * r;
    }
    fit.rmsd = std::sqrt(ss / m);
    fit.points_used = static_cast<int>(xs.size());
    return fit;
}

std::uint64_t realization_seed(std::uint64_t seed0, Bandwidth b, int delta_index, int n, int realization) {
    return derive_seed({seed0, static_cast<std::uint64_t>(b.value), static_cast<std::uint64_t>(delta_index),
                        static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(realization)});
}

namespace {

struct Job {
    std::string bandwidth;
    Bandwidth b;
    int delta_index = 0;
    double delta = 0.0;
    int n = 0;
    int realization = 0;
    std::uint64_t seed = 0;

    std::string file_name() const {
        return "job_b" + bandwidth + "_d" + std::to_string(delta_index) + "_n" + std::to_string(n) + "_r" +
               std::to_string(realization) + ".json";
    }
};

std::vector<Job> enumerate_jobs(const ExperimentSpec& spec) {
    std::vector<Job> jobs;
    if (spec.pencil_override) {
        const int n = static_cast<int>(io::pencil_from_json(*spec.pencil_override).size());
        const std::string label = spec.pencil_override->value("kind", std::string("custom"));
        for (int r = 0; r < spec.realizations; ++r) {
            jobs.push_back({label, Bandwidth{0}, 0, 0.0, n, r, realization_seed(spec.seed0, {0}, 0, n, r)});
        }
        return jobs;
    }
    for (const auto& b : spec.b_list)
        for (std::size_t d = 0; d < spec.delta_list.size(); ++d)
            for (int n : spec.n_list)
                for (int r = 0; r < spec.realizations; ++r)
                    jobs.push_back({b.label(), b, static_cast<int>(d), spec.delta_list[d], n, r,
                                    realization_seed(spec.seed0, b, static_cast<int>(d), n, r)});
    return jobs;
}

std::optional<JobResult> load_job(const fs::path& file, const Job& job) {
    if (!fs::exists(file)) return std::nullopt;
    try {
        auto r = io::job_from_json(io::read_json_file(file));
        if (r.seed == job.seed && r.n == job.n && r.bandwidth == job.bandwidth) return r;
        spdlog::warn("census: {} does not match the current spec, recomputing", file.string());
    } catch (const std::exception& e) {
        spdlog::warn("census: ignoring unreadable {}: {}", file.string(), e.what());
    }
    return std::nullopt;
}

JobResult run_job(const ExperimentSpec& spec, const Job& job, int workers) {
    const auto t0 = std::chrono::steady_clock::now();
    const ParametricPencil pencil =
        spec.pencil_override
            ? io::pencil_from_json(*spec.pencil_override)
            : sgplus_pencil(sgplus_generate(job.n, job.b.resolve(job.n), job.delta, job.seed));
    RetryPolicy retry = spec.retry;
    retry.seed = derive_seed({job.seed, 0x7265747279ULL});
    const BoxGrid grid = sweep_grid(pencil, spec.grid, spec.continuation, retry, workers);

    JobResult r;
    r.bandwidth = job.bandwidth;
    r.delta_index = job.delta_index;
    r.delta = job.delta;
    r.n = job.n;
    r.realization = job.realization;
    r.seed = job.seed;
    r.pair_totals = grid.pair_totals();
    r.ci_count = grid.total_flags();
    r.failed_boxes = grid.failed_count();
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

}  // namespace

CensusReport run_census(const ExperimentSpec& spec, const fs::path& results_dir, int workers,
                        std::optional<int> max_jobs) {
    spec.validate();
    fs::create_directories(results_dir);
    const auto jobs = enumerate_jobs(spec);

    // Job files are only valid for the grid and tolerances they were run with.
    nlohmann::json settings = io::experiment_to_json(spec);
    for (const char* k : {"n_list", "b_list", "delta_list", "realizations", "seed"}) settings.erase(k);
    const fs::path settings_file = results_dir / "settings.json";
    bool reuse = true;
    if (fs::exists(settings_file)) {
        try {
            reuse = io::read_json_file(settings_file) == settings;
        } catch (const std::exception&) {
            reuse = false;
        }
        if (!reuse) {
            spdlog::warn("census: grid or tolerances changed since {} was written, recomputing", results_dir.string());
            for (const auto& e : fs::directory_iterator(results_dir)) {
                const auto name = e.path().filename().string();
                if (name.starts_with("job_") && e.path().extension() == ".json") fs::remove(e.path());
            }
        }
    }
    io::write_text_file(settings_file, settings.dump(2) + "\n");

    CensusReport report;
    report.jobs_total = static_cast<int>(jobs.size());

    std::vector<std::optional<JobResult>> results(jobs.size());
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (reuse) results[i] = load_job(results_dir / jobs[i].file_name(), jobs[i]);
        if (results[i]) {
            report.jobs_reused++;
        } else {
            pending.push_back(i);
        }
    }
    if (max_jobs && static_cast<int>(pending.size()) > *max_jobs) {
        pending.resize(static_cast<std::size_t>(std::max(0, *max_jobs)));
        report.complete = false;
    }

    const int outer = std::max(1, std::min<int>(workers, static_cast<int>(pending.size())));
    const int inner = std::max(1, workers / outer);
    std::vector<std::string> errors(pending.size());
    parallel_for(pending.size(), outer, [&](std::size_t k) {
        const Job& job = jobs[pending[k]];
        try {
            auto r = run_job(spec, job, inner);
            io::write_text_file(results_dir / job.file_name(), io::job_to_json(r).dump(2) + "\n");
            results[pending[k]] = std::move(r);
        } catch (const std::exception& e) {
            errors[k] = e.what();
        }
    });
    for (std::size_t k = 0; k < pending.size(); ++k) {
        if (!errors[k].empty()) {
            spdlog::error("census job {} failed: {}", jobs[pending[k]].file_name(), errors[k]);
            report.complete = false;
        } else {
            report.jobs_run++;
        }
    }

    // Aggregate in job enumeration order: (b, delta, n), realizations inside.
    std::map<std::tuple<std::string, int, int>, std::size_t> cell_index;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (!results[i]) {
            report.complete = false;
            continue;
        }
        const auto& job = jobs[i];
        const auto& res = *results[i];
        const auto key = std::make_tuple(job.bandwidth, job.delta_index, job.n);
        auto it = cell_index.find(key);
        if (it == cell_index.end()) {
            CellSummary c;
            c.bandwidth = job.bandwidth;
            c.delta_index = job.delta_index;
            c.delta = job.delta;
            c.n = job.n;
            it = cell_index.emplace(key, report.cells.size()).first;
            report.cells.push_back(std::move(c));
        }
        auto& cell = report.cells[it->second];
        cell.counts.push_back(res.ci_count);
        cell.failed_boxes += res.failed_boxes;
        cell.wall_seconds += res.wall_seconds;
    }
    for (auto& c : report.cells) {
        double s = 0.0;
        for (int v : c.counts) s += v;
        c.mean = c.counts.empty() ? 0.0 : s / static_cast<double>(c.counts.size());
    }

    // Fits per (b, delta), in first-appearance order.
    std::vector<std::pair<std::string, int>> groups;
    for (const auto& c : report.cells) {
        const auto g = std::make_pair(c.bandwidth, c.delta_index);
        if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
    }
    for (const auto& [b, d] : groups) {
        FitRow row;
        row.bandwidth = b;
        row.delta_index = d;
        std::vector<std::pair<double, double>> pts;
        for (const auto& c : report.cells) {
            if (c.bandwidth == b && c.delta_index == d) {
                row.delta = c.delta;
                pts.emplace_back(static_cast<double>(c.n), c.mean);
            }
        }
        try {
            row.fit = fit_power_law(pts);
        } catch (const Error& e) {
            row.note = e.what();
        }
        report.fits.push_back(std::move(row));
    }
    return report;
}

std::vector<ExponentRow> summarize_exponents(const CensusReport& report) {
    static const std::map<std::string, std::pair<double, double>> kReported{
        {"full", {2.01, 2.00}}, {"5", {2.46, 2.55}}, {"4", {2.54, 2.66}}, {"3", {2.60, 2.73}}};
    std::vector<ExponentRow> rows;
    for (const auto& f : report.fits) {
        if (!f.fit) continue;
        auto it = std::find_if(rows.begin(), rows.end(), [&](const ExponentRow& r) { return r.bandwidth == f.bandwidth; });
        if (it == rows.end()) {
            ExponentRow r;
            r.bandwidth = f.bandwidth;
            if (auto ref = kReported.find(f.bandwidth); ref != kReported.end()) {
                r.reported_sgplus = ref->second.first;
                r.reported_goe = ref->second.second;
            }
            rows.push_back(r);
            it = rows.end() - 1;
        }
        it->mean_p += f.fit->p;
        it->fits++;
    }
    for (auto& r : rows) r.mean_p /= r.fits;
    return rows;
}

void write_census_outputs(const CensusReport& report, const fs::path& out_dir) {
    using io::fmt17;
    fs::create_directories(out_dir);

    std::ostringstream agg;
    agg << "bandwidth,delta,n,realizations,mean_count,counts,failed_boxes\n";
    for (const auto& c : report.cells) {
        agg << c.bandwidth << ',' << fmt17(c.delta) << ',' << c.n << ',' << c.counts.size() << ','
            << fmt17(c.mean) << ',';
        for (std::size_t i = 0; i < c.counts.size(); ++i) agg << (i ? ";" : "") << c.counts[i];
        agg << ',' << c.failed_boxes << '\n';
    }
    io::write_text_file(out_dir / "aggregated.csv", agg.str());

    std::ostringstream fits;
    fits << "bandwidth,delta,p,c,rmsd,points,note\n";
    for (const auto& f : report.fits) {
        fits << f.bandwidth << ',' << fmt17(f.delta) << ',';
        if (f.fit) {
            fits << fmt17(f.fit->p) << ',' << fmt17(f.fit->c) << ',' << fmt17(f.fit->rmsd) << ',' << f.fit->points_used;
        } else {
            fits << ",,,0";
        }
        fits << ',' << '"' << f.note << '"' << '\n';
    }
    io::write_text_file(out_dir / "fits.csv", fits.str());

    std::ostringstream exps;
    exps << "bandwidth,mean_p,fits,reported_sgplus,reported_goe\n";
    for (const auto& r : summarize_exponents(report)) {
        exps << r.bandwidth << ',' << fmt17(r.mean_p) << ',' << r.fits << ','
             << (r.reported_sgplus ? fmt17(*r.reported_sgplus) : "") << ','
             << (r.reported_goe ? fmt17(*r.reported_goe) : "") << '\n';
    }
    io::write_text_file(out_dir / "exponents.csv", exps.str());

    std::ostringstream ll;
    ll << "# log_n log_count bandwidth delta\n";
    for (const auto& c : report.cells) {
        if (c.mean > 0.0) {
            ll << fmt17(std::log(c.n)) << ' ' << fmt17(std::log(c.mean)) << ' ' << c.bandwidth << ' '
               << fmt17(c.delta) << '\n';
        }
    }
    io::write_text_file(out_dir / "loglog.dat", ll.str());

    nlohmann::json j;
    j["complete"] = report.complete;
    j["jobs"] = {{"total", report.jobs_total}, {"run", report.jobs_run}, {"reused", report.jobs_reused}};
    j["cells"] = nlohmann::json::array();
    for (const auto& c : report.cells) {
        j["cells"].push_back({{"bandwidth", c.bandwidth},
                              {"delta", c.delta},
                              {"n", c.n},
                              {"counts", c.counts},
                              {"mean", c.mean},
                              {"failed_boxes", c.failed_boxes},
                              {"wall_seconds", c.wall_seconds}});
    }
    j["fits"] = nlohmann::json::array();
    for (const auto& f : report.fits) {
        nlohmann::json fj{{"bandwidth", f.bandwidth}, {"delta", f.delta}};
        if (f.fit) {
            fj["p"] = f.fit->p;
            fj["c"] = f.fit->c;
            fj["rmsd"] = f.fit->rmsd;
        } else {
            fj["note"] = f.note;
        }
        j["fits"].push_back(fj);
    }
    io::write_text_file(out_dir / "report.json", j.dump(2) + "\n");
}

}  // namespace coalesce
