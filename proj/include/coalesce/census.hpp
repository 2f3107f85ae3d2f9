#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "coalesce/continuation.hpp"
#include "coalesce/detect.hpp"

namespace coalesce {

/// Bandwidth of an SG+ realization; value 0 stands for "full" (n-1).
struct Bandwidth {
    int value = 0;

    bool full() const { return value == 0; }
    int resolve(int n) const { return full() ? n - 1 : value; }
    std::string label() const { return full() ? "full" : std::to_string(value); }
    static Bandwidth parse(const std::string& s);

    friend bool operator==(const Bandwidth&, const Bandwidth&) = default;
};

struct ExperimentSpec {
    std::vector<int> n_list;
    std::vector<Bandwidth> b_list;
    std::vector<double> delta_list;
    int realizations = 10;
    GridSpec grid{{0.0, 3.14159265358979323846, 0.0, 2.0 * 3.14159265358979323846}, 64, 128};
    std::uint64_t seed0 = 0;
    ContinuationOptions continuation;
    RetryPolicy retry;
    /// Replaces the SG+ ensemble by a fixed pencil (pencil-spec JSON); the
    /// n/b/delta lists are then ignored and only `realizations` repeats run.
    std::optional<nlohmann::json> pencil_override;

    /// Throws DispersionOutOfRange / BandwidthOutOfRange / InvalidArgument.
    void validate() const;
};

struct PowerLawFit {
    double p = 0.0;
    double c = 0.0;
    double rmsd = 0.0;
    int points_used = 0;
    std::vector<double> excluded;  // abscissae of zero-count points
};

/// count = c n^p by ordinary least squares on (log n, log count);
/// rmsd = sqrt(mean squared log residual). Nonpositive counts are excluded
/// with a warning; fewer than two usable points throws NonPositiveCount.
PowerLawFit fit_power_law(std::span<const std::pair<double, double>> points);

struct JobResult {
    std::string bandwidth;
    int delta_index = 0;
    double delta = 0.0;
    int n = 0;
    int realization = 0;
    std::uint64_t seed = 0;
    int ci_count = 0;
    std::vector<int> pair_totals;
    int failed_boxes = 0;
    double wall_seconds = 0.0;
};

struct CellSummary {
    std::string bandwidth;
    int delta_index = 0;
    double delta = 0.0;
    int n = 0;
    std::vector<int> counts;  // per realization
    int failed_boxes = 0;
    double mean = 0.0;
    double wall_seconds = 0.0;
};

struct FitRow {
    std::string bandwidth;
    int delta_index = 0;
    double delta = 0.0;
    std::optional<PowerLawFit> fit;
    std::string note;
};

struct CensusReport {
    std::vector<CellSummary> cells;
    std::vector<FitRow> fits;
    int jobs_total = 0;
    int jobs_run = 0;
    int jobs_reused = 0;
    bool complete = true;
};

/// Per-realization seed: derive_seed(seed0, bandwidth, delta index, n, realization).
std::uint64_t realization_seed(std::uint64_t seed0, Bandwidth b, int delta_index, int n, int realization);

/// Runs every (b, delta, n, realization) job not already persisted in
/// results_dir, one JSON file per job, then assembles the report from the
/// directory. max_jobs bounds the number of new jobs run in this call.
CensusReport run_census(const ExperimentSpec& spec, const std::filesystem::path& results_dir,
                        int workers = 1, std::optional<int> max_jobs = std::nullopt);

struct ExponentRow {
    std::string bandwidth;
    double mean_p = 0.0;
    int fits = 0;
    std::optional<double> reported_sgplus;  // reference values for comparison
    std::optional<double> reported_goe;
};

/// Mean exponent over dispersions per bandwidth.
std::vector<ExponentRow> summarize_exponents(const CensusReport& report);

/// Writes aggregated.csv, fits.csv, exponents.csv, loglog.dat and report.json.
/// Everything except report.json is free of timing data.
void write_census_outputs(const CensusReport& report, const std::filesystem::path& out_dir);

}  // namespace coalesce
