#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "coalesce/cli.hpp"
#include "coalesce/io.hpp"
#include "coalesce/pencil.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = coalesce::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("coalesce_test_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

int count_lines(const std::string& s) {
    int n = 0;
    for (char c : s) n += c == '\n';
    return n;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
    CHECK(run({}).code == coalesce::cli::kUsage);
    CHECK(run({"frobnicate"}).code == coalesce::cli::kUsage);
    CHECK(run({"generate", "--n", "10"}).code == coalesce::cli::kUsage);
    CHECK(run({"--version"}).code == coalesce::cli::kOk);
}

TEST_CASE("generate writes a descriptor and manifest") {
    const auto dir = scratch("generate");
    const auto r = run({"--seed", "42", "--out-dir", dir.string(), "generate", "--n", "10", "--b", "full",
                        "--delta", "0.45"});
    REQUIRE(r.code == 0);
    const auto d = read_json(dir / "descriptor.json");
    CHECK(d["kind"] == "sgplus");
    CHECK(d["n"] == 10);
    CHECK(d["b"] == 9);
    CHECK(d["seed"] == 42);
    const auto m = read_json(dir / "manifest.json");
    CHECK(m["subcommand"] == "generate");
    CHECK(m["seed"] == 42);

    // Flags after the subcommand work too.
    CHECK(run({"generate", "--n", "6", "--b", "2", "--delta", "0.3", "--out-dir", dir.string()}).code == 0);
    CHECK(read_json(dir / "descriptor.json")["b"] == 2);
}

TEST_CASE("generate rejects invalid parameters") {
    const auto dir = scratch("generate_bad");
    auto r = run({"--out-dir", dir.string(), "generate", "--n", "10", "--b", "full", "--delta", "0.9"});
    CHECK(r.code == coalesce::cli::kUsage);
    CHECK(r.err.find("sqrt((n+1)/(n+5))") != std::string::npos);
    r = run({"--out-dir", dir.string(), "generate", "--n", "10", "--b", "10", "--delta", "0.3"});
    CHECK(r.code == coalesce::cli::kUsage);
}

TEST_CASE("trace writes trace.csv and the loop signature") {
    const auto dir = scratch("trace");
    const auto r = run({"--out-dir", dir.string(), "trace", "--pencil", R"({"kind":"analytic_ci","epsilon":0})",
                        "--loop", R"({"kind":"circle","center":[0,0],"radius":1})"});
    REQUIRE(r.code == 0);
    const auto sig = read_json(dir / "signature.json");
    CHECK(sig["D"] == json::array({-1, -1}));
    CHECK(sig["flagged_pairs"] == json::array({1}));
    const auto csv = slurp(dir / "trace.csv");
    CHECK(csv.rfind("t,h,lambda_1,lambda_2,rho_lambda,rho_V,veer\n", 0) == 0);
    CHECK(count_lines(csv) > 5);
    CHECK(fs::exists(dir / "manifest.json"));
}

TEST_CASE("trace of an embedded pencil from a file") {
    const auto dir = scratch("trace_file");
    {
        std::ofstream(dir / "pencil.json")
            << R"({"kind":"embedded","n":4,"j":2,"outer_spectrum":[5,-5],"inner":{"kind":"analytic_ci"}})";
        std::ofstream(dir / "loop.json") << R"({"kind":"box","corner":[-0.5,-0.5],"size":[1,1]})";
    }
    const auto r = run({"--out-dir", dir.string(), "trace", "--pencil", (dir / "pencil.json").string(), "--loop",
                        (dir / "loop.json").string()});
    REQUIRE(r.code == 0);
    CHECK(read_json(dir / "signature.json")["D"] == json::array({1, -1, -1, 1}));
}

TEST_CASE("numerical failure exits with 2") {
    const auto dir = scratch("trace_fail");
    const auto r = run({"--out-dir", dir.string(), "--log-level", "off", "trace", "--pencil",
                        R"({"kind":"analytic_ci"})", "--loop",
                        R"({"kind":"box","corner":[-0.5,0],"size":[1,1]})"});
    CHECK(r.code == coalesce::cli::kNumerical);
    CHECK(r.err.find("LoopUnresolvable") != std::string::npos);
}

TEST_CASE("sweep writes the CI report") {
    const auto dir = scratch("sweep");
    const auto r = run({"--out-dir", dir.string(), "--log-level", "off", "sweep", "--pencil",
                        R"({"kind":"analytic_ci","epsilon":0.1})", "--domain", "-1", "1", "-1", "1", "--nx", "8",
                        "--ny", "8"});
    REQUIRE(r.code == 0);
    const auto csv = slurp(dir / "ci_report.csv");
    CHECK(count_lines(csv) == 2);
    CHECK(csv.find("3,3,") != std::string::npos);
    const auto s = read_json(dir / "summary.json");
    CHECK(s["total"] == 1);
    CHECK(s["failed_boxes"].empty());
}

TEST_CASE("fit reproduces a power law per bandwidth") {
    const auto dir = scratch("fit");
    const auto r = run({"--out-dir", dir.string(), "fit", "--data", std::string(COALESCE_TEST_DATA) + "/published_counts.csv"});
    REQUIRE(r.code == 0);
    const auto csv = slurp(dir / "fit_summary.csv");
    CHECK(count_lines(csv) == 5);
    CHECK(csv.find("full,2.02") != std::string::npos);
    CHECK(run({"--out-dir", dir.string(), "fit", "--data", (dir / "missing.csv").string()}).code ==
          coalesce::cli::kUsage);
}

TEST_CASE("census end to end and resume") {
    const auto dir = scratch("census");
    const std::string spec =
        R"({"n_list":[4,5],"b_list":["full"],"delta_list":[0.45],"realizations":2,)"
        R"("grid":{"domain":[0,3.141592653589793,0,6.283185307179586],"nx":4,"ny":8},"seed":3})";
    auto r = run({"--out-dir", (dir / "a").string(), "census", "--spec", spec});
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "a" / "aggregated.csv"));
    CHECK(fs::exists(dir / "a" / "fits.csv"));
    CHECK(fs::exists(dir / "a" / "manifest.json"));

    r = run({"--out-dir", (dir / "b").string(), "census", "--spec", spec, "--max-jobs", "1"});
    CHECK(r.code == coalesce::cli::kNumerical);
    CHECK(r.out.find("incomplete") != std::string::npos);
    r = run({"--out-dir", (dir / "b").string(), "census", "--spec", spec});
    REQUIRE(r.code == 0);
    CHECK(slurp(dir / "a" / "aggregated.csv") == slurp(dir / "b" / "aggregated.csv"));
}

TEST_CASE("descriptor round-trips to identical matrices") {
    const auto dir = scratch("roundtrip");
    REQUIRE(run({"--seed", "9", "--out-dir", dir.string(), "generate", "--n", "7", "--b", "3", "--delta", "0.5"})
                .code == 0);
    const auto from_file = coalesce::io::pencil_from_json(
        {{"kind", "sgplus"}, {"descriptor", (dir / "descriptor.json").string()}});
    const auto direct = coalesce::sgplus_pencil(coalesce::sgplus_generate(7, 3, 0.5, 9));
    for (double x : {0.1, 2.0})
        for (double y : {0.5, 4.0}) {
            CHECK(from_file.eval(x, y).A.mat() == direct.eval(x, y).A.mat());
            CHECK(from_file.eval(x, y).B.mat() == direct.eval(x, y).B.mat());
        }
    CHECK(run({"--out-dir", dir.string(), "generate", "--n", "7", "--b", "0", "--delta", "0.5"}).code ==
          coalesce::cli::kUsage);
}

TEST_CASE("trace of a loop enclosing nothing and of a path through the intersection") {
    const auto dir = scratch("trace_more");
    REQUIRE(run({"--out-dir", dir.string(), "trace", "--pencil", R"({"kind":"analytic_ci"})", "--loop",
                 R"({"kind":"circle","center":[2,0],"radius":0.5})"})
                .code == 0);
    CHECK(read_json(dir / "signature.json")["D"] == json::array({1, 1}));

    const auto r = run({"--out-dir", dir.string(), "--log-level", "off", "trace", "--pencil",
                        R"({"kind":"analytic_ci"})", "--loop", R"({"kind":"segment","from":[-1,0],"to":[1,0]})"});
    CHECK(r.code == coalesce::cli::kNumerical);
    CHECK(r.err.find("StepUnderflow") != std::string::npos);
}

TEST_CASE("a 1x1 sweep is a single loop over the domain perimeter") {
    const auto dir = scratch("sweep_1x1");
    const std::string pencil = R"({"kind":"embedded","n":4,"j":2,"outer_spectrum":[5,-5],"inner":{"kind":"analytic_ci","epsilon":0.1}})";
    REQUIRE(run({"--out-dir", (dir / "s").string(), "sweep", "--pencil", pencil, "--domain", "-0.5", "0.5", "-0.5",
                 "0.5", "--nx", "1", "--ny", "1"})
                .code == 0);
    REQUIRE(run({"--out-dir", (dir / "t").string(), "trace", "--pencil", pencil, "--loop",
                 R"({"kind":"box","corner":[-0.5,-0.5],"size":[1,1]})"})
                .code == 0);
    const auto s = read_json(dir / "s" / "summary.json");
    const auto t = read_json(dir / "t" / "signature.json");
    CHECK(s["pair_totals"] == json::array({0, 1, 0}));
    CHECK(t["flagged_pairs"] == json::array({2}));
}

TEST_CASE("sweep of an SG+ realization is deterministic") {
    const auto dir = scratch("sweep_sg");
    const std::string pencil = R"({"kind":"sgplus","n":10,"b":"full","delta":0.45,"seed":11})";
    for (const char* sub : {"a", "b"}) {
        REQUIRE(run({"--out-dir", (dir / sub).string(), "--log-level", "off", "sweep", "--pencil", pencil, "--grid",
                     R"({"domain":[0,3.141592653589793,0,6.283185307179586],"nx":16,"ny":32})"})
                    .code == 0);
    }
    const auto a = slurp(dir / "a" / "ci_report.csv");
    CHECK(count_lines(a) > 1);
    CHECK(a == slurp(dir / "b" / "ci_report.csv"));
    CHECK(slurp(dir / "a" / "summary.json") == slurp(dir / "b" / "summary.json"));
    CHECK(read_json(dir / "a" / "summary.json")["total"].get<int>() >= 0);
}

TEST_CASE("fit of an empty data file is a usage error") {
    const auto dir = scratch("fit_empty");
    { std::ofstream(dir / "empty.csv"); }
    { std::ofstream(dir / "header.csv") << "n,count\n"; }
    CHECK(run({"--out-dir", dir.string(), "fit", "--data", (dir / "empty.csv").string()}).code ==
          coalesce::cli::kUsage);
    CHECK(run({"--out-dir", dir.string(), "fit", "--data", (dir / "header.csv").string()}).code ==
          coalesce::cli::kUsage);
}
