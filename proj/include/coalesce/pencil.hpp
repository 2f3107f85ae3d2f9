#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "coalesce/linalg.hpp"

namespace coalesce {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

struct PencilValue {
    SymMatrix A;
    SymMatrix B;  // SPD
};

/// A symmetric-definite pencil (A(x,y), B(x,y)) over the plane. Evaluation is
/// a pure function of the point, so a pencil may be shared across threads.
class ParametricPencil {
public:
    using EvalFn = std::function<PencilValue(Point2)>;

    ParametricPencil(Eigen::Index n, EvalFn fn, std::string kind, std::string smoothness = "C^inf")
        : n_(n), fn_(std::move(fn)), kind_(std::move(kind)), smoothness_(std::move(smoothness)) {}

    PencilValue eval(Point2 p) const { return fn_(p); }
    PencilValue eval(double x, double y) const { return fn_({x, y}); }

    Eigen::Index size() const noexcept { return n_; }
    const std::string& kind() const noexcept { return kind_; }
    const std::string& smoothness() const noexcept { return smoothness_; }

private:
    Eigen::Index n_;
    EvalFn fn_;
    std::string kind_;
    std::string smoothness_;
};

// ---------------------------------------------------------------------------
// SG+ random ensemble

/// Upper bound (exclusive) on the dispersion: sqrt((n+1)/(n+5)).
double max_dispersion(int n);
/// sigma_n = delta / sqrt(n+1).
double sgplus_sigma(int n, double delta);
/// Gamma shape for diagonal index i (1-based): (n+1)/(2 delta^2) + (1-i)/2.
double sgplus_shape(int n, double delta, int i);

struct SGPlusParams {
    int n = 0;
    int b = 0;  // 1 <= b <= n-1; n-1 means full
    double delta = 0.0;
    std::uint64_t seed = 0;

    friend bool operator==(const SGPlusParams&, const SGPlusParams&) = default;
};

struct SGPlusRealization {
    SGPlusParams params;
    std::array<Matrix, 4> LA;  // strictly lower, band b
    std::array<Matrix, 4> LB;
    Vector DA;  // positive
    Vector DB;

    double sigma() const { return sgplus_sigma(params.n, params.delta); }
};

/// Draws a realization. Draw order: band entries of LA1..LA4 then LB1..LB4,
/// each row-major over 0 < i-j <= b; then diag(DA), then diag(DB).
SGPlusRealization sgplus_generate(int n, int b, double delta, std::uint64_t seed);
inline SGPlusRealization sgplus_generate(const SGPlusParams& p) {
    return sgplus_generate(p.n, p.b, p.delta, p.seed);
}

/// A(x,y) = L_A L_Aᵀ, B(x,y) = L_B L_Bᵀ with
/// L(x,y) = cos x L1 + sin x L2 + cos y L3 + sin y L4 + D.
ParametricPencil sgplus_pencil(SGPlusRealization r);

// ---------------------------------------------------------------------------
// Analytic fixtures

/// A(x,y) = [[4x+3y, 5y],[5y, -4x+3y]] + eps [[1,1],[1,-1]], B = [[5,3],[3,5]].
/// Eigenvalues ±sqrt(x²+y²) when eps = 0; conical intersection at (-eps/4, -5eps/16).
ParametricPencil analytic_ci_pencil(double eps);

struct Rect {
    double x_lo = 0.0, x_hi = 0.0;
    double y_lo = 0.0, y_hi = 0.0;

    double width() const { return x_hi - x_lo; }
    double height() const { return y_hi - y_lo; }
    Point2 center() const { return {0.5 * (x_lo + x_hi), 0.5 * (y_lo + y_hi)}; }
    bool contains(Point2 p) const {
        return p.x >= x_lo && p.x <= x_hi && p.y >= y_lo && p.y <= y_hi;
    }
};

/// Test fixture: places a 2×2 pencil at rows/cols (j, j+1) (1-based) of an
/// n×n block-diagonal pencil with B = I and A = diag(outer) elsewhere. The
/// n-2 outer values must be decreasing, the first j-1 above and the rest below
/// the inner eigenvalues on a sample grid of `domain`, else SpectrumOverlap.
ParametricPencil embed_2x2(const ParametricPencil& inner, int n, int j,
                           std::vector<double> outer_spectrum,
                           Rect domain = {-1.0, 1.0, -1.0, 1.0});

// ---------------------------------------------------------------------------
// Paths

/// Parametrized path t in [0,1] -> plane. Closed paths are 1-periodic in t.
class LoopPath {
public:
    enum class Kind { BoxPerimeter, Circle, Ellipse, Segment, Custom };

    /// Counterclockwise perimeter of [x0,x0+sx]×[y0,y0+sy]; corners at t = 0, 1/4, 1/2, 3/4.
    static LoopPath box_perimeter(double x0, double y0, double side_x, double side_y);
    static LoopPath box_perimeter(const Rect& r);
    static LoopPath circle(Point2 center, double radius, double phase = 0.0);
    static LoopPath ellipse(Point2 center, double rx, double ry, double phase = 0.0);
    /// Open straight path from a to b.
    static LoopPath segment(Point2 a, Point2 b);
    /// `length` is used only to scale step limits.
    static LoopPath custom(std::function<Point2(double)> fn, bool closed, double length,
                           std::vector<double> breakpoints = {});

    Point2 point(double t) const;
    bool closed() const noexcept { return closed_; }
    Kind kind() const noexcept { return kind_; }
    double length() const noexcept { return length_; }
    /// Parameters in (0,1) where the path is only continuous (box corners).
    const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }

private:
    LoopPath(Kind kind, std::function<Point2(double)> fn, bool closed, double length,
             std::vector<double> breakpoints)
        : kind_(kind), fn_(std::move(fn)), closed_(closed), length_(length),
          breakpoints_(std::move(breakpoints)) {}

    Kind kind_;
    std::function<Point2(double)> fn_;
    bool closed_;
    double length_;
    std::vector<double> breakpoints_;
};

}  // namespace coalesce
