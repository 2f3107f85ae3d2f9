#include "coalesce/detect.hpp"

#include <array>
#include <cmath>

#include <spdlog/spdlog.h>

#include "coalesce/error.hpp"
#include "coalesce/parallel.hpp"
#include "coalesce/rng.hpp"

namespace coalesce {

int LoopSignature::flagged_count() const {
    int c = 0;
    for (bool f : pair_flags) c += f ? 1 : 0;
    return c;
}

std::vector<bool> decode_signature(std::span<const int> D) {
    std::vector<std::size_t> neg;
    for (std::size_t i = 0; i < D.size(); ++i) {
        if (D[i] == -1) {
            neg.push_back(i);
        } else if (D[i] != 1) {
            throw Error(ErrorCode::InvalidArgument, "signature entries must be +1 or -1");
        }
    }
    if (neg.size() % 2 != 0) {
        throw Error(ErrorCode::OddSignCount, std::to_string(neg.size()) + " negative entries");
    }
    std::vector<bool> flags(D.empty() ? 0 : D.size() - 1, false);
    for (std::size_t k = 0; k < neg.size(); k += 2)
        for (std::size_t i = neg[k]; i < neg[k + 1]; ++i) flags[i] = true;
    return flags;
}

std::vector<int> signature_from_counts(std::span<const int> d) {
    const std::size_t n = d.size() + 1;
    std::vector<int> D(n, 1);
    auto parity = [](int c) { return (c % 2 == 0) ? 1 : -1; };
    for (std::size_t i = 0; i < n; ++i) {
        int c = 0;
        if (i > 0) c += d[i - 1];
        if (i < n - 1) c += d[i];
        D[i] = parity(c);
    }
    return D;
}

LoopSignature make_signature(std::vector<int> D) {
    LoopSignature s;
    s.pair_flags = decode_signature(D);
    s.D = std::move(D);
    return s;
}

namespace {

struct BoxTrace {
    LoopSignature signature;
    int steps = 0;
};

BoxTrace trace_box(const ParametricPencil& pencil, const Rect& box, ContinuationOptions opts) {
    opts.keep_points = false;
    const auto res = trace_loop(pencil, LoopPath::box_perimeter(box), opts);
    return {make_signature(res.D), res.stats.accepted};
}

Rect shifted(const Rect& r, double dx, double dy) {
    return {r.x_lo + dx, r.x_hi + dx, r.y_lo + dy, r.y_hi + dy};
}

}  // namespace

LoopSignature box_signature(const ParametricPencil& pencil, const Rect& box,
                            const ContinuationOptions& opts) {
    return trace_box(pencil, box, opts).signature;
}

std::vector<int> BoxGrid::pair_totals() const {
    std::vector<int> totals(n > 0 ? static_cast<std::size_t>(n - 1) : 0, 0);
    for (const auto& b : boxes) {
        if (!b.ok()) continue;
        for (std::size_t i = 0; i < b.signature->pair_flags.size(); ++i)
            totals[i] += b.signature->pair_flags[i] ? 1 : 0;
    }
    return totals;
}

int BoxGrid::total_flags() const {
    int t = 0;
    for (int c : pair_totals()) t += c;
    return t;
}

int BoxGrid::failed_count() const {
    int f = 0;
    for (const auto& b : boxes) f += b.ok() ? 0 : 1;
    return f;
}

std::vector<CIRow> BoxGrid::ci_rows() const {
    std::vector<CIRow> rows;
    for (const auto& b : boxes) {
        if (!b.ok()) continue;
        for (std::size_t i = 0; i < b.signature->pair_flags.size(); ++i) {
            if (b.signature->pair_flags[i]) rows.push_back({b.ix, b.iy, b.rect.center(), static_cast<int>(i) + 1});
        }
    }
    return rows;
}

double BoxGrid::uncertainty() const {
    return 0.5 * std::hypot(spec.domain.width() / spec.nx, spec.domain.height() / spec.ny);
}

BoxGrid sweep_grid(const ParametricPencil& pencil, const GridSpec& grid,
                   const ContinuationOptions& opts, const RetryPolicy& retry, int workers) {
    if (grid.nx < 1 || grid.ny < 1 || !(grid.domain.width() > 0.0) || !(grid.domain.height() > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "invalid grid specification");
    }
    if (pencil.size() < 2) throw Error(ErrorCode::InvalidArgument, "pencil dimension must be >= 2");

    BoxGrid out;
    out.spec = grid;
    out.n = pencil.size();
    out.boxes.resize(static_cast<std::size_t>(grid.nx) * grid.ny);
    for (int ix = 0; ix < grid.nx; ++ix) {
        for (int iy = 0; iy < grid.ny; ++iy) {
            auto& b = out.boxes[static_cast<std::size_t>(ix) * grid.ny + iy];
            b.ix = ix;
            b.iy = iy;
            b.rect = grid.box(ix, iy);
        }
    }

    auto run = [&](const std::vector<std::size_t>& todo, double dx, double dy) {
        parallel_for(todo.size(), workers, [&](std::size_t k) {
            auto& b = out.boxes[todo[k]];
            const Rect rect = shifted(grid.box(b.ix, b.iy), dx, dy);
            b.rect = rect;
            b.attempts++;
            try {
                auto r = trace_box(pencil, rect, opts);
                b.signature = std::move(r.signature);
                b.steps = r.steps;
                b.failure.clear();
            } catch (const std::exception& e) {
                b.failure = e.what();
            }
        });
    };

    std::vector<std::size_t> todo(out.boxes.size());
    for (std::size_t i = 0; i < todo.size(); ++i) todo[i] = i;
    run(todo, 0.0, 0.0);

    const double side_x = grid.domain.width() / grid.nx;
    const double side_y = grid.domain.height() / grid.ny;
    Rng rng(derive_seed({retry.seed, static_cast<std::uint64_t>(grid.nx), static_cast<std::uint64_t>(grid.ny)}));
    for (int attempt = 1; attempt <= retry.max_retries; ++attempt) {
        todo.clear();
        for (std::size_t i = 0; i < out.boxes.size(); ++i)
            if (!out.boxes[i].ok()) todo.push_back(i);
        if (todo.empty()) break;
        const double dx = retry.shift_fraction * side_x * (2.0 * rng.uniform() - 1.0);
        const double dy = retry.shift_fraction * side_y * (2.0 * rng.uniform() - 1.0);
        spdlog::debug("sweep: retrying {} boxes with shift ({}, {})", todo.size(), dx, dy);
        run(todo, dx, dy);
    }
    for (const auto& b : out.boxes) {
        if (!b.ok()) spdlog::warn("box ({}, {}) failed after {} attempts: {}", b.ix, b.iy, b.attempts, b.failure);
    }
    return out;
}

namespace {

void refine_rec(const ParametricPencil& pencil, const Rect& box, const std::vector<bool>& flags,
                int depth, int depth_max, double min_side, const ContinuationOptions& opts,
                std::vector<CILocation>& out) {
    const double side = std::max(box.width(), box.height());
    if (depth >= depth_max || side < min_side) {
        for (std::size_t i = 0; i < flags.size(); ++i) {
            if (flags[i]) {
                out.push_back({box.center(), 0.5 * std::hypot(box.width(), box.height()), static_cast<int>(i) + 1});
            }
        }
        return;
    }

    // Split-point offsets (fractions of the side) tried in order when a child
    // loop fails or parity is not conserved.
    static constexpr std::array<std::array<double, 2>, 4> kShifts{{
        {0.0, 0.0}, {0.0113, 0.0137}, {-0.0171, 0.0119}, {0.0131, -0.0193}}};
    std::string last_error;
    for (const auto& s : kShifts) {
        const double xm = 0.5 * (box.x_lo + box.x_hi) + s[0] * box.width();
        const double ym = 0.5 * (box.y_lo + box.y_hi) + s[1] * box.height();
        const std::array<Rect, 4> children{{{box.x_lo, xm, box.y_lo, ym},
                                            {xm, box.x_hi, box.y_lo, ym},
                                            {xm, box.x_hi, ym, box.y_hi},
                                            {box.x_lo, xm, ym, box.y_hi}}};
        std::array<std::vector<bool>, 4> child_flags;
        bool ok = true;
        for (std::size_t c = 0; c < 4 && ok; ++c) {
            try {
                child_flags[c] = trace_box(pencil, children[c], opts).signature.pair_flags;
            } catch (const Error& e) {
                last_error = e.what();
                ok = false;
            }
        }
        if (!ok) continue;
        for (std::size_t i = 0; i < flags.size(); ++i) {
            bool x = false;
            for (const auto& cf : child_flags) x = x != cf[i];
            if (x != flags[i]) {
                ok = false;
                last_error = "parity of pair " + std::to_string(i + 1) + " not conserved";
            }
        }
        if (!ok) continue;
        for (std::size_t c = 0; c < 4; ++c) {
            bool any = false;
            for (bool f : child_flags[c]) any = any || f;
            if (any) refine_rec(pencil, children[c], child_flags[c], depth + 1, depth_max, min_side, opts, out);
        }
        return;
    }
    throw Error(ErrorCode::RefinementInconsistent, last_error);
}

}  // namespace

std::vector<CILocation> refine_box(const ParametricPencil& pencil, const Rect& box, int depth_max,
                                   const ContinuationOptions& opts, double min_side) {
    const auto sig = trace_box(pencil, box, opts).signature;
    std::vector<CILocation> out;
    if (sig.flagged_count() == 0) return out;
    refine_rec(pencil, box, sig.pair_flags, 0, depth_max, min_side, opts, out);
    return out;
}

}  // namespace coalesce
