#include "coalesce/pencil.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "coalesce/error.hpp"
#include "coalesce/rng.hpp"

namespace coalesce {

double max_dispersion(int n) { return std::sqrt((n + 1.0) / (n + 5.0)); }

double sgplus_sigma(int n, double delta) { return delta / std::sqrt(n + 1.0); }

double sgplus_shape(int n, double delta, int i) {
    return (n + 1.0) / (2.0 * delta * delta) + (1.0 - i) / 2.0;
}

SGPlusRealization sgplus_generate(int n, int b, double delta, std::uint64_t seed) {
    if (n < 2) throw Error(ErrorCode::InvalidArgument, "SG+ requires n >= 2");
    if (b < 1 || b > n - 1) {
        throw Error(ErrorCode::BandwidthOutOfRange,
                    "bandwidth " + std::to_string(b) + " outside [1, " + std::to_string(n - 1) + "]");
    }
    const double dmax = max_dispersion(n);
    if (!(delta > 0.0) || !(delta < dmax)) {
        std::ostringstream os;
        os.precision(17);
        os << "dispersion " << delta << " must satisfy 0 < delta < sqrt((n+1)/(n+5)) = " << dmax
           << " for n = " << n;
        throw Error(ErrorCode::DispersionOutOfRange, os.str());
    }

    SGPlusRealization r;
    r.params = {n, b, delta, seed};
    const double sigma = sgplus_sigma(n, delta);
    Rng rng(seed);

    auto fill = [&](Matrix& L) {
        L = Matrix::Zero(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = std::max(0, i - b); j < i; ++j) L(i, j) = sigma * rng.normal();
    };
    for (auto& L : r.LA) fill(L);
    for (auto& L : r.LB) fill(L);

    auto diag = [&](Vector& D) {
        D.resize(n);
        for (int i = 1; i <= n; ++i) D(i - 1) = sigma * std::sqrt(2.0 * rng.gamma(sgplus_shape(n, delta, i)));
    };
    diag(r.DA);
    diag(r.DB);
    return r;
}

namespace {

Matrix assemble_factor(const std::array<Matrix, 4>& L, const Vector& D, double x, double y) {
    Matrix F = std::cos(x) * L[0] + std::sin(x) * L[1] + std::cos(y) * L[2] + std::sin(y) * L[3];
    F.diagonal() += D;
    return F;
}

}  // namespace

ParametricPencil sgplus_pencil(SGPlusRealization r) {
    const auto n = static_cast<Eigen::Index>(r.params.n);
    auto shared = std::make_shared<const SGPlusRealization>(std::move(r));
    return ParametricPencil(
        n,
        [shared](Point2 p) {
            const Matrix LA = assemble_factor(shared->LA, shared->DA, p.x, p.y);
            const Matrix LB = assemble_factor(shared->LB, shared->DB, p.x, p.y);
            PencilValue v{SymMatrix(LA.triangularView<Eigen::Lower>() * LA.transpose()),
                          SymMatrix(LB.triangularView<Eigen::Lower>() * LB.transpose())};
#ifndef NDEBUG
            (void)cholesky(v.B);
#endif
            return v;
        },
        "sgplus");
}

ParametricPencil analytic_ci_pencil(double eps) {
    const SymMatrix B(Matrix{{5.0, 3.0}, {3.0, 5.0}});
    return ParametricPencil(
        2,
        [eps, B](Point2 p) {
            Matrix A{{4.0 * p.x + 3.0 * p.y + eps, 5.0 * p.y + eps},
                     {5.0 * p.y + eps, -4.0 * p.x + 3.0 * p.y - eps}};
            return PencilValue{SymMatrix(A), B};
        },
        "analytic_ci");
}

ParametricPencil embed_2x2(const ParametricPencil& inner, int n, int j,
                           std::vector<double> outer_spectrum, Rect domain) {
    if (inner.size() != 2) throw Error(ErrorCode::InvalidArgument, "inner pencil must be 2x2");
    if (n < 2 || j < 1 || j > n - 1) {
        throw Error(ErrorCode::InvalidArgument, "embedding requires 1 <= j <= n-1");
    }
    if (static_cast<int>(outer_spectrum.size()) != n - 2) {
        throw Error(ErrorCode::InvalidArgument, "outer spectrum must have n-2 values");
    }
    if (!std::is_sorted(outer_spectrum.begin(), outer_spectrum.end(), std::greater<>())) {
        throw Error(ErrorCode::SpectrumOverlap, "outer spectrum must be decreasing");
    }

    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    constexpr int kSamples = 9;
    for (int a = 0; a < kSamples; ++a) {
        for (int c = 0; c < kSamples; ++c) {
            const Point2 p{domain.x_lo + domain.width() * a / (kSamples - 1),
                           domain.y_lo + domain.height() * c / (kSamples - 1)};
            const auto v = inner.eval(p);
            const auto e = gen_eig_ordered(v.A, v.B);
            hi = std::max(hi, e.values(0));
            lo = std::min(lo, e.values(1));
        }
    }
    // Outer values 0..j-2 sit above the inner pair, the rest below.
    for (int k = 0; k < n - 2; ++k) {
        const bool above = k < j - 1;
        if ((above && !(outer_spectrum[k] > hi)) || (!above && !(outer_spectrum[k] < lo))) {
            throw Error(ErrorCode::SpectrumOverlap,
                        "outer value " + std::to_string(outer_spectrum[k]) +
                            " overlaps inner eigenvalue range [" + std::to_string(lo) + ", " +
                            std::to_string(hi) + "]");
        }
    }

    Vector diag(n);
    for (int i = 0, k = 0; i < n; ++i) {
        if (i == j - 1 || i == j) continue;
        diag(i) = outer_spectrum[k++];
    }
    const int off = j - 1;
    return ParametricPencil(
        n,
        [inner, diag, off, n](Point2 p) {
            const auto v = inner.eval(p);
            Matrix A = Matrix::Zero(n, n);
            Matrix B = Matrix::Identity(n, n);
            A.diagonal() = diag;
            A.block(off, off, 2, 2) = v.A.mat();
            B.block(off, off, 2, 2) = v.B.mat();
            return PencilValue{SymMatrix(A), SymMatrix(B)};
        },
        "embedded");
}

// ---------------------------------------------------------------------------

namespace {

double wrap_unit(double t) {
    double w = t - std::floor(t);
    return w >= 1.0 ? 0.0 : w;
}

}  // namespace

LoopPath LoopPath::box_perimeter(double x0, double y0, double side_x, double side_y) {
    if (!(side_x > 0.0) || !(side_y > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "box sides must be positive");
    }
    return box_perimeter(Rect{x0, x0 + side_x, y0, y0 + side_y});
}

LoopPath LoopPath::box_perimeter(const Rect& r) {
    if (!(r.x_hi > r.x_lo) || !(r.y_hi > r.y_lo)) {
        throw Error(ErrorCode::InvalidArgument, "box sides must be positive");
    }
    auto fn = [r](double t) -> Point2 {
        const double s = 4.0 * t;
        const int edge = std::min(3, static_cast<int>(s));
        const double f = s - edge;
        switch (edge) {
        case 0: return {r.x_lo + f * (r.x_hi - r.x_lo), r.y_lo};
        case 1: return {r.x_hi, r.y_lo + f * (r.y_hi - r.y_lo)};
        case 2: return {r.x_hi - f * (r.x_hi - r.x_lo), r.y_hi};
        default: return {r.x_lo, r.y_hi - f * (r.y_hi - r.y_lo)};
        }
    };
    return LoopPath(Kind::BoxPerimeter, fn, true, 2.0 * (r.width() + r.height()), {0.25, 0.5, 0.75});
}

LoopPath LoopPath::circle(Point2 center, double radius, double phase) {
    LoopPath path = ellipse(center, radius, radius, phase);
    path.kind_ = Kind::Circle;
    return path;
}

LoopPath LoopPath::ellipse(Point2 center, double rx, double ry, double phase) {
    if (!(rx > 0.0) || !(ry > 0.0)) throw Error(ErrorCode::InvalidArgument, "radii must be positive");
    auto fn = [center, rx, ry, phase](double t) -> Point2 {
        const double a = 2.0 * std::numbers::pi * t + phase;
        return {center.x + rx * std::cos(a), center.y + ry * std::sin(a)};
    };
    // Ramanujan's perimeter approximation; only used to scale steps.
    const double h = std::pow((rx - ry) / (rx + ry), 2);
    const double len = std::numbers::pi * (rx + ry) * (1.0 + 3.0 * h / (10.0 + std::sqrt(4.0 - 3.0 * h)));
    return LoopPath(Kind::Ellipse, fn, true, len, {});
}

LoopPath LoopPath::segment(Point2 a, Point2 b) {
    auto fn = [a, b](double t) -> Point2 { return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)}; };
    return LoopPath(Kind::Segment, fn, false, std::hypot(b.x - a.x, b.y - a.y), {});
}

LoopPath LoopPath::custom(std::function<Point2(double)> fn, bool closed, double length,
                          std::vector<double> breakpoints) {
    std::sort(breakpoints.begin(), breakpoints.end());
    return LoopPath(Kind::Custom, std::move(fn), closed, length, std::move(breakpoints));
}

Point2 LoopPath::point(double t) const {
    if (closed_) return fn_(wrap_unit(t));
    return fn_(std::clamp(t, 0.0, 1.0));
}

}  // namespace coalesce
