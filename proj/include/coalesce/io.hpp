#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "coalesce/census.hpp"
#include "coalesce/continuation.hpp"
#include "coalesce/detect.hpp"
#include "coalesce/pencil.hpp"

namespace coalesce::io {

using nlohmann::json;

/// Shortest round-trippable form: 17 significant digits.
std::string fmt17(double v);

/// Parses inline JSON when the argument starts with '{' or '[', otherwise
/// reads the named file.
json load_json_arg(const std::string& arg);
json read_json_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename.
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Realization descriptor: {"kind":"sgplus","n":..,"b":..,"delta":..,"seed":..}.
// Matrices are regenerated from it, never stored.
json descriptor_to_json(const SGPlusParams& p);
SGPlusParams descriptor_from_json(const json& j);

/// Pencil specs:
///   {"kind":"sgplus", "n", "b" (int or "full"), "delta", "seed"}
///   {"kind":"sgplus", "descriptor": "<path>"}
///   {"kind":"analytic_ci", "epsilon": 0.0}
///   {"kind":"embedded", "n", "j", "outer_spectrum": [...], "inner": <pencil spec>}
ParametricPencil pencil_from_json(const json& j);

/// Loop specs:
///   {"kind":"circle", "center":[x,y], "radius":r}
///   {"kind":"ellipse", "center":[x,y], "radii":[rx,ry]}
///   {"kind":"box", "corner":[x0,y0], "size":[sx,sy]}
///   {"kind":"segment", "from":[x,y], "to":[x,y]}          (open)
LoopPath loop_from_json(const json& j);

/// {"domain":[x_lo,x_hi,y_lo,y_hi], "nx":.., "ny":..}
GridSpec grid_from_json(const json& j);
json grid_to_json(const GridSpec& g);

ContinuationOptions continuation_from_json(const json& j, ContinuationOptions base = {});
json continuation_to_json(const ContinuationOptions& o);

ExperimentSpec experiment_from_json(const json& j);
json experiment_to_json(const ExperimentSpec& s);

json signature_to_json(const LoopSignature& s, const Vector& D_raw = {});

/// Columns t,h,lambda_1..lambda_n,rho_lambda,rho_V,veer.
void write_trace_csv(std::ostream& os, const TraceResult& r);

/// Columns box_row,box_col,center_x,center_y,pair_index.
void write_ci_csv(std::ostream& os, const BoxGrid& g);
json sweep_summary(const BoxGrid& g);

json job_to_json(const JobResult& r);
JobResult job_from_json(const json& j);

}  // namespace coalesce::io
