#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "coalesce/census.hpp"
#include "coalesce/continuation.hpp"
#include "coalesce/detect.hpp"
#include "coalesce/error.hpp"
#include "coalesce/io.hpp"
#include "coalesce/linalg.hpp"
#include "coalesce/pencil.hpp"

namespace py = pybind11;
using namespace coalesce;
using nlohmann::json;

namespace {

// Pencil, loop and grid specs cross the boundary as JSON text; the Python
// wrapper serializes dicts.
ParametricPencil pencil_of(const std::string& spec) { return io::pencil_from_json(json::parse(spec)); }

py::dict trace_dict(const TraceResult& r) {
    py::dict d;
    std::vector<double> ts;
    std::vector<Vector> lams;
    for (const auto& rec : r.records) {
        ts.push_back(rec.t);
        lams.push_back(rec.lambda);
    }
    d["t"] = ts;
    d["lambda"] = lams;
    d["V_start"] = r.start.V;
    d["V_end"] = r.end.V;
    d["lambda_end"] = r.end.lambda;
    d["accepted"] = r.stats.accepted;
    d["rejected"] = r.stats.rejected;
    d["veering_events"] = r.veering_events.size();
    if (!r.D.empty()) {
        d["D"] = r.D;
        d["D_raw"] = r.D_raw;
        const auto flags = decode_signature(r.D);
        std::vector<int> pairs;
        for (std::size_t i = 0; i < flags.size(); ++i)
            if (flags[i]) pairs.push_back(static_cast<int>(i) + 1);
        d["flagged_pairs"] = pairs;
    }
    return d;
}

}  // namespace

PYBIND11_MODULE(_coalesce, m) {
    m.doc() = "Smooth eigendecompositions of parametric SPD pencils and conical-intersection search";

    py::register_exception<Error>(m, "CoalesceError", PyExc_RuntimeError);

    m.def(
        "gen_eig",
        [](const Matrix& A, const Matrix& B) {
            const auto e = gen_eig_ordered(SymMatrix(A), SymMatrix(B));
            return py::make_tuple(e.values, e.vectors);
        },
        py::arg("A"), py::arg("B"), "Eigenvalues (decreasing) and B-orthonormal eigenvectors of A v = lambda B v.");
    m.def(
        "cholesky", [](const Matrix& B) { return cholesky(SymMatrix(B)).L; }, py::arg("B"));
    m.def(
        "spd_sqrt", [](const Matrix& B) { return spd_sqrt(SymMatrix(B)).mat(); }, py::arg("B"));
    m.def(
        "spd_sqrt_series", [](const Matrix& B, double gamma) { return spd_sqrt_series(SymMatrix(B), gamma).mat(); },
        py::arg("B"), py::arg("gamma"));
    m.def(
        "sqrt_derivative",
        [](const Matrix& S, const Matrix& dB) { return sqrt_derivative(SymMatrix(S), SymMatrix(dB)).mat(); },
        py::arg("S"), py::arg("dB"));
    m.def(
        "eig2x2",
        [](double a, double b, double c, double alpha, double beta, double gamma) {
            const auto r = eig2x2_pencil(a, b, c, alpha, beta, gamma);
            return py::make_tuple(r.lambda1, r.lambda2);
        },
        py::arg("a"), py::arg("b"), py::arg("c"), py::arg("alpha"), py::arg("beta"), py::arg("gamma"));

    m.def("decode_signature", [](const std::vector<int>& D) { return decode_signature(D); }, py::arg("D"));
    m.def(
        "signature_from_counts", [](const std::vector<int>& d) { return signature_from_counts(d); }, py::arg("d"));

    m.def(
        "sgplus_matrices",
        [](int n, int b, double delta, std::uint64_t seed, double x, double y) {
            const auto v = sgplus_pencil(sgplus_generate(n, b, delta, seed)).eval(x, y);
            return py::make_tuple(v.A.mat(), v.B.mat());
        },
        py::arg("n"), py::arg("b"), py::arg("delta"), py::arg("seed"), py::arg("x"), py::arg("y"),
        "A(x, y) and B(x, y) of an SG+ realization.");
    m.def(
        "pencil_eval",
        [](const std::string& spec, double x, double y) {
            const auto v = pencil_of(spec).eval(x, y);
            return py::make_tuple(v.A.mat(), v.B.mat());
        },
        py::arg("spec"), py::arg("x"), py::arg("y"));

    m.def(
        "trace",
        [](const std::string& pencil, const std::string& loop, double h0) {
            const auto p = pencil_of(pencil);
            const auto path = io::loop_from_json(json::parse(loop));
            ContinuationOptions opts;
            opts.h0 = h0;
            TraceResult r;
            {
                py::gil_scoped_release release;
                r = trace_path(p, path, opts);
            }
            return trace_dict(r);
        },
        py::arg("pencil"), py::arg("loop"), py::arg("h0") = 1.0 / 64.0);

    m.def(
        "sweep",
        [](const std::string& pencil, const std::string& grid, int workers, std::uint64_t retry_seed) {
            const auto p = pencil_of(pencil);
            const auto g = io::grid_from_json(json::parse(grid));
            RetryPolicy retry;
            retry.seed = retry_seed;
            BoxGrid res;
            {
                py::gil_scoped_release release;
                res = sweep_grid(p, g, {}, retry, workers);
            }
            return io::sweep_summary(res).dump();
        },
        py::arg("pencil"), py::arg("grid"), py::arg("workers") = 1, py::arg("retry_seed") = RetryPolicy{}.seed);

    m.def(
        "refine",
        [](const std::string& pencil, std::array<double, 4> box, int depth) {
            const auto locs = refine_box(pencil_of(pencil), Rect{box[0], box[1], box[2], box[3]}, depth);
            py::list out;
            for (const auto& l : locs) out.append(py::make_tuple(l.center.x, l.center.y, l.uncertainty, l.pair));
            return out;
        },
        py::arg("pencil"), py::arg("box"), py::arg("depth"));

    m.def(
        "fit_power_law",
        [](const std::vector<double>& n, const std::vector<double>& count) {
            if (n.size() != count.size()) throw Error(ErrorCode::InvalidArgument, "n and count differ in length");
            std::vector<std::pair<double, double>> pts;
            for (std::size_t i = 0; i < n.size(); ++i) pts.emplace_back(n[i], count[i]);
            const auto f = fit_power_law(pts);
            return py::make_tuple(f.p, f.c, f.rmsd);
        },
        py::arg("n"), py::arg("count"), "Returns (p, c, rmsd) of count = c n^p.");

    m.def(
        "census",
        [](const std::string& spec, const std::filesystem::path& out_dir, int workers) {
            const auto s = io::experiment_from_json(json::parse(spec));
            CensusReport rep;
            {
                py::gil_scoped_release release;
                rep = run_census(s, out_dir / "cells", workers);
                write_census_outputs(rep, out_dir);
            }
            py::list fits;
            for (const auto& f : rep.fits) {
                if (f.fit) fits.append(py::make_tuple(f.bandwidth, f.delta, f.fit->p, f.fit->c, f.fit->rmsd));
            }
            return fits;
        },
        py::arg("spec"), py::arg("out_dir"), py::arg("workers") = 1);

    m.attr("__version__") = COALESCE_VERSION;
}
