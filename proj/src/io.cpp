#include "coalesce/io.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "coalesce/error.hpp"

namespace coalesce::io {

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); }

Point2 point_of(const json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_array() || j.at(key).size() != 2) {
        bad(std::string("expected [x, y] for '") + key + "'");
    }
    return {j.at(key)[0].get<double>(), j.at(key)[1].get<double>()};
}

int bandwidth_of(const json& j, int n) {
    const json& b = j.at("b");
    if (b.is_string()) {
        if (b.get<std::string>() != "full") bad("bandwidth must be an integer or \"full\"");
        return n - 1;
    }
    return b.get<int>();
}

}  // namespace

std::string fmt17(double v) { return fmt::format("{:.17g}", v); }

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) bad("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        bad("malformed JSON in " + path.string() + ": " + e.what());
    }
}

json load_json_arg(const std::string& arg) {
    const auto pos = arg.find_first_not_of(" \t\n");
    if (pos != std::string::npos && (arg[pos] == '{' || arg[pos] == '[')) {
        try {
            return json::parse(arg);
        } catch (const json::exception& e) {
            bad(std::string("malformed inline JSON: ") + e.what());
        }
    }
    return read_json_file(arg);
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) bad("cannot write " + tmp.string());
        out << text;
    }
    std::filesystem::rename(tmp, path);
}

json descriptor_to_json(const SGPlusParams& p) {
    return {{"kind", "sgplus"}, {"n", p.n}, {"b", p.b}, {"delta", p.delta}, {"seed", p.seed}};
}

SGPlusParams descriptor_from_json(const json& j) {
    try {
        SGPlusParams p;
        p.n = j.at("n").get<int>();
        p.b = bandwidth_of(j, p.n);
        p.delta = j.at("delta").get<double>();
        p.seed = j.at("seed").get<std::uint64_t>();
        return p;
    } catch (const json::exception& e) {
        bad(std::string("invalid SG+ descriptor: ") + e.what());
    }
}

ParametricPencil pencil_from_json(const json& j) {
    try {
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "sgplus") {
            const SGPlusParams p =
                j.contains("descriptor") ? descriptor_from_json(load_json_arg(j.at("descriptor").get<std::string>()))
                                         : descriptor_from_json(j);
            return sgplus_pencil(sgplus_generate(p));
        }
        if (kind == "analytic_ci") return analytic_ci_pencil(j.value("epsilon", 0.0));
        if (kind == "embedded") {
            const auto inner = pencil_from_json(j.at("inner"));
            Rect domain{-1.0, 1.0, -1.0, 1.0};
            if (j.contains("domain")) {
                const auto& d = j.at("domain");
                domain = {d[0].get<double>(), d[1].get<double>(), d[2].get<double>(), d[3].get<double>()};
            }
            return embed_2x2(inner, j.at("n").get<int>(), j.at("j").get<int>(),
                             j.at("outer_spectrum").get<std::vector<double>>(), domain);
        }
        bad("unknown pencil kind '" + kind + "'");
    } catch (const json::exception& e) {
        bad(std::string("invalid pencil spec: ") + e.what());
    }
}

LoopPath loop_from_json(const json& j) {
    try {
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "circle") return LoopPath::circle(point_of(j, "center"), j.at("radius").get<double>());
        if (kind == "ellipse") {
            const Point2 r = point_of(j, "radii");
            return LoopPath::ellipse(point_of(j, "center"), r.x, r.y);
        }
        if (kind == "box") {
            const Point2 c = point_of(j, "corner");
            const Point2 s = point_of(j, "size");
            return LoopPath::box_perimeter(c.x, c.y, s.x, s.y);
        }
        if (kind == "segment") return LoopPath::segment(point_of(j, "from"), point_of(j, "to"));
        bad("unknown loop kind '" + kind + "'");
    } catch (const json::exception& e) {
        bad(std::string("invalid loop spec: ") + e.what());
    }
}

GridSpec grid_from_json(const json& j) {
    try {
        GridSpec g;
        const auto& d = j.at("domain");
        if (!d.is_array() || d.size() != 4) bad("grid domain must be [x_lo, x_hi, y_lo, y_hi]");
        g.domain = {d[0].get<double>(), d[1].get<double>(), d[2].get<double>(), d[3].get<double>()};
        g.nx = j.at("nx").get<int>();
        g.ny = j.at("ny").get<int>();
        if (g.nx < 1 || g.ny < 1) bad("grid resolution must be positive");
        if (!(g.domain.width() > 0.0) || !(g.domain.height() > 0.0)) bad("grid domain is empty");
        return g;
    } catch (const json::exception& e) {
        bad(std::string("invalid grid spec: ") + e.what());
    }
}

json grid_to_json(const GridSpec& g) {
    return {{"domain", {g.domain.x_lo, g.domain.x_hi, g.domain.y_lo, g.domain.y_hi}},
            {"nx", g.nx},
            {"ny", g.ny}};
}

ContinuationOptions continuation_from_json(const json& j, ContinuationOptions o) {
    o.h0 = j.value("h0", o.h0);
    o.tolstep = j.value("tolstep", o.tolstep);
    o.h_max = j.value("h_max", o.h_max);
    o.h_min = j.value("h_min", o.h_min);
    o.toldist = j.value("toldist", o.toldist);
    return o;
}

json continuation_to_json(const ContinuationOptions& o) {
    return {{"h0", o.h0}, {"tolstep", o.tolstep}, {"h_max", o.h_max}, {"h_min", o.h_min}, {"toldist", o.toldist}};
}

ExperimentSpec experiment_from_json(const json& j) {
    try {
        ExperimentSpec s;
        s.n_list = j.value("n_list", std::vector<int>{});
        for (const auto& b : j.value("b_list", json::array())) {
            s.b_list.push_back(b.is_string() ? Bandwidth::parse(b.get<std::string>()) : Bandwidth::parse(std::to_string(b.get<int>())));
        }
        s.delta_list = j.value("delta_list", std::vector<double>{});
        s.realizations = j.value("realizations", 10);
        if (j.contains("grid")) s.grid = grid_from_json(j.at("grid"));
        s.seed0 = j.value("seed", std::uint64_t{0});
        if (j.contains("continuation")) s.continuation = continuation_from_json(j.at("continuation"));
        if (j.contains("retry")) {
            const auto& r = j.at("retry");
            s.retry.max_retries = r.value("max_retries", s.retry.max_retries);
            s.retry.shift_fraction = r.value("shift_fraction", s.retry.shift_fraction);
        }
        if (j.contains("pencil")) s.pencil_override = j.at("pencil");
        s.validate();
        return s;
    } catch (const json::exception& e) {
        bad(std::string("invalid experiment spec: ") + e.what());
    }
}

json experiment_to_json(const ExperimentSpec& s) {
    json b = json::array();
    for (const auto& x : s.b_list) {
        if (x.full()) b.push_back("full");
        else b.push_back(x.value);
    }
    json j{{"n_list", s.n_list},
           {"b_list", b},
           {"delta_list", s.delta_list},
           {"realizations", s.realizations},
           {"grid", grid_to_json(s.grid)},
           {"seed", s.seed0},
           {"continuation", continuation_to_json(s.continuation)},
           {"retry", {{"max_retries", s.retry.max_retries}, {"shift_fraction", s.retry.shift_fraction}}}};
    if (s.pencil_override) j["pencil"] = *s.pencil_override;
    return j;
}

json signature_to_json(const LoopSignature& s, const Vector& D_raw) {
    json flags = json::array();
    for (std::size_t i = 0; i < s.pair_flags.size(); ++i)
        if (s.pair_flags[i]) flags.push_back(static_cast<int>(i) + 1);
    json j{{"D", s.D}, {"flagged_pairs", flags}};
    if (D_raw.size() > 0) j["D_raw"] = std::vector<double>(D_raw.data(), D_raw.data() + D_raw.size());
    return j;
}

void write_trace_csv(std::ostream& os, const TraceResult& r) {
    const Eigen::Index n = r.start.lambda.size();
    os << "t,h";
    for (Eigen::Index i = 1; i <= n; ++i) os << ",lambda_" << i;
    os << ",rho_lambda,rho_V,veer\n";
    for (const auto& rec : r.records) {
        os << fmt17(rec.t) << ',' << fmt17(rec.h);
        for (Eigen::Index i = 0; i < n; ++i) os << ',' << fmt17(rec.lambda(i));
        os << ',' << fmt17(rec.rho_lambda) << ',' << fmt17(rec.rho_v) << ',' << (rec.veering ? 1 : 0) << '\n';
    }
}

void write_ci_csv(std::ostream& os, const BoxGrid& g) {
    os << "box_row,box_col,center_x,center_y,pair_index\n";
    for (const auto& r : g.ci_rows()) {
        os << r.ix << ',' << r.iy << ',' << fmt17(r.center.x) << ',' << fmt17(r.center.y) << ',' << r.pair << '\n';
    }
}

json sweep_summary(const BoxGrid& g) {
    json failures = json::array();
    for (const auto& b : g.boxes) {
        if (!b.ok()) failures.push_back({{"box_row", b.ix}, {"box_col", b.iy}, {"attempts", b.attempts}, {"error", b.failure}});
    }
    json retried = json::array();
    for (const auto& b : g.boxes) {
        if (b.ok() && b.attempts > 1) retried.push_back({{"box_row", b.ix}, {"box_col", b.iy}, {"attempts", b.attempts}});
    }
    json cis = json::array();
    for (const auto& c : g.ci_rows()) {
        cis.push_back({{"box_row", c.ix}, {"box_col", c.iy}, {"center", {c.center.x, c.center.y}}, {"pair", c.pair}});
    }
    return {{"n", g.n},
            {"grid", grid_to_json(g.spec)},
            {"intersections", cis},
            {"pair_totals", g.pair_totals()},
            {"total", g.total_flags()},
            {"location_uncertainty", g.uncertainty()},
            {"failed_boxes", failures},
            {"retried_boxes", retried}};
}

json job_to_json(const JobResult& r) {
    return {{"bandwidth", r.bandwidth},     {"delta_index", r.delta_index}, {"delta", r.delta},
            {"n", r.n},                     {"realization", r.realization}, {"seed", r.seed},
            {"ci_count", r.ci_count},       {"pair_totals", r.pair_totals}, {"failed_boxes", r.failed_boxes},
            {"wall_seconds", r.wall_seconds}};
}

JobResult job_from_json(const json& j) {
    JobResult r;
    r.bandwidth = j.at("bandwidth").get<std::string>();
    r.delta_index = j.at("delta_index").get<int>();
    r.delta = j.at("delta").get<double>();
    r.n = j.at("n").get<int>();
    r.realization = j.at("realization").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.ci_count = j.at("ci_count").get<int>();
    r.pair_totals = j.at("pair_totals").get<std::vector<int>>();
    r.failed_boxes = j.at("failed_boxes").get<int>();
    r.wall_seconds = j.value("wall_seconds", 0.0);
    return r;
}

}  // namespace coalesce::io
