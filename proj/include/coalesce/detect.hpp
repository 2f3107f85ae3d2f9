#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coalesce/continuation.hpp"
#include "coalesce/pencil.hpp"

namespace coalesce {

/// Loop signature: V(1) = V(0) diag(D). pair_flags[i] means eigenvalues i and
/// i+1 (0-based) coalesced an odd number of times inside the loop.
struct LoopSignature {
    std::vector<int> D;
    std::vector<bool> pair_flags;

    int flagged_count() const;
};

/// Pairs the indices with D = -1 in increasing order, (i1,i2), (i3,i4), ...,
/// and flags every pair index i with i_{2k-1} <= i < i_{2k}.
/// Throws OddSignCount on an odd number of -1 entries.
std::vector<bool> decode_signature(std::span<const int> D);

/// Signature predicted by per-pair coalescence counts d (length n-1):
/// D_1 = (-1)^{d_1}, D_i = (-1)^{d_{i-1}+d_i}, D_n = (-1)^{d_{n-1}}.
std::vector<int> signature_from_counts(std::span<const int> d);

LoopSignature make_signature(std::vector<int> D);

/// Closed-loop trace of a box perimeter, decoded.
LoopSignature box_signature(const ParametricPencil& pencil, const Rect& box,
                            const ContinuationOptions& opts = {});

/// nx boxes along x, ny along y.
struct GridSpec {
    Rect domain;
    int nx = 1;
    int ny = 1;

    double x_at(int k) const { return k == nx ? domain.x_hi : domain.x_lo + domain.width() * k / nx; }
    double y_at(int k) const { return k == ny ? domain.y_hi : domain.y_lo + domain.height() * k / ny; }
    Rect box(int ix, int iy) const { return {x_at(ix), x_at(ix + 1), y_at(iy), y_at(iy + 1)}; }
};

/// Boxes whose trace fails are re-traced with the whole failed set shifted by
/// one common random offset of at most shift_fraction * box side, up to
/// max_retries times; then they are recorded as failed.
struct RetryPolicy {
    int max_retries = 3;
    double shift_fraction = 1e-3;
    std::uint64_t seed = 0x5eedULL;
};

struct BoxResult {
    int ix = 0;
    int iy = 0;
    Rect rect;  // perimeter actually traced (shifted after retries)
    std::optional<LoopSignature> signature;
    std::string failure;
    int attempts = 0;
    int steps = 0;

    bool ok() const { return signature.has_value(); }
};

struct CIRow {
    int ix = 0;
    int iy = 0;
    Point2 center;
    int pair = 0;  // 1-based: eigenvalues (pair, pair+1)
};

struct BoxGrid {
    GridSpec spec;
    Eigen::Index n = 0;
    std::vector<BoxResult> boxes;  // index ix * ny + iy

    const BoxResult& at(int ix, int iy) const { return boxes[static_cast<std::size_t>(ix) * spec.ny + iy]; }
    /// Flag totals per pair over all successful boxes (0-based pair index).
    std::vector<int> pair_totals() const;
    int total_flags() const;
    int failed_count() const;
    std::vector<CIRow> ci_rows() const;
    /// Half the box diagonal.
    double uncertainty() const;
};

BoxGrid sweep_grid(const ParametricPencil& pencil, const GridSpec& grid,
                   const ContinuationOptions& opts = {}, const RetryPolicy& retry = {},
                   int workers = 1);

struct CILocation {
    Point2 center;
    double uncertainty = 0.0;  // half diagonal of the smallest flagged box
    int pair = 0;              // 1-based
};

/// Recursive 2×2 subdivision of a flagged box until depth_max or side below
/// min_side; returns the centers of the smallest flagged boxes. Returns an
/// empty list for a box with D = I. Children whose flags do not XOR to the
/// parent's are retried with a shifted split point; persistent mismatch
/// throws RefinementInconsistent.
std::vector<CILocation> refine_box(const ParametricPencil& pencil, const Rect& box, int depth_max,
                                   const ContinuationOptions& opts = {}, double min_side = 0.0);

}  // namespace coalesce
