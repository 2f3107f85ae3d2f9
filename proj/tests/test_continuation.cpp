#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "coalesce/continuation.hpp"
#include "coalesce/error.hpp"
#include "test_support.hpp"

using namespace coalesce;
using coalesce::test::random_spd;
using coalesce::test::random_sym;

namespace {

template <class Fn>
ErrorCode code_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::InvalidArgument;
}

// Quadratic matrix path A(t) = A0 + t A1 + t² A2 (same for B).
struct QuadPencil {
    SymMatrix A0, A1, A2, B0, B1, B2;

    SymMatrix A(double t) const { return SymMatrix(A0.mat() + t * A1.mat() + t * t * A2.mat()); }
    SymMatrix B(double t) const { return SymMatrix(B0.mat() + t * B1.mat() + t * t * B2.mat()); }
};

QuadPencil random_quad(std::mt19937_64& gen, int n) {
    return {random_sym(gen, n), random_sym(gen, n), random_sym(gen, n),
            random_spd(gen, n, n), SymMatrix(0.3 * random_sym(gen, n).mat()),
            SymMatrix(0.3 * random_sym(gen, n).mat())};
}

EigenPoint point_at(const QuadPencil& q, double t) {
    const auto e = gen_eig_ordered(q.A(t), q.B(t));
    return {t, e.vectors, e.values, 0.0};
}

std::vector<int> trace_D(const ParametricPencil& p, const LoopPath& loop) {
    return trace_loop(p, loop).D;
}

}  // namespace

TEST_CASE("predictor is exact for a constant pencil") {
    std::mt19937_64 gen(1);
    const auto A = random_sym(gen, 5);
    const auto B = random_spd(gen, 5, 5.0);
    const auto e = gen_eig_ordered(A, B);
    const EigenPoint s{0.0, e.vectors, e.values, 0.0};
    const auto pr = predict(s, A, B);
    CHECK((pr.lambda - e.values).norm() <= 1e-12);
    CHECK((pr.V - e.vectors).norm() <= 1e-12);
}

TEST_CASE("predictor throws on tied eigenvalues") {
    const EigenPoint s{0.0, Matrix::Identity(3, 3), Vector{{2.0, 1.0, 1.0}}, 0.0};
    CHECK(code_of([&] { predict(s, SymMatrix::identity(3), SymMatrix::identity(3)); }) ==
          ErrorCode::GapTooSmall);
}

TEST_CASE("predictor error is second order in the step") {
    std::mt19937_64 gen(7);
    for (int trial = 0; trial < 5; ++trial) {
        const auto q = random_quad(gen, 6);
        const auto s = point_at(q, 0.0);
        double prev_l = 0.0, prev_v = 0.0;
        for (int k = 0; k < 4; ++k) {
            const double h = 1e-2 / (1 << k);
            const auto pr = predict(s, q.A(h), q.B(h));
            const auto ex = point_at(q, h);
            const auto sc = sign_correct(ex.V, q.B(h), pr.V);
            const double el = (pr.lambda - ex.lambda).cwiseAbs().maxCoeff();
            const double ev = (pr.V - sc.V).norm();
            if (k > 0) {
                CHECK(prev_l / el == doctest::Approx(4.0).epsilon(0.15));
                CHECK(prev_v / ev == doctest::Approx(4.0).epsilon(0.15));
            }
            prev_l = el;
            prev_v = ev;
        }
    }
}

// C = VᵀB V' from central differences of sign-aligned exact eigenvectors:
// its symmetric part is -VᵀB'V / 2, and the predictor's update V⁻¹(V_pred - V)/h
// tends to the whole of C.
TEST_CASE("predictor direction matches the finite-difference derivative") {
    std::mt19937_64 gen(13);
    for (int trial = 0; trial < 5; ++trial) {
        const int n = 5;
        const auto q = random_quad(gen, n);
        const auto s = point_at(q, 0.0);
        const double h = 1e-5;
        auto aligned = [&](double t) {
            const auto e = point_at(q, t);
            return sign_correct(e.V, q.B(t), s.V).V;
        };
        const Matrix Vdot = (aligned(h) - aligned(-h)) / (2 * h);
        const Matrix C = s.V.transpose() * q.B(0.0).mat() * Vdot;
        const Matrix Bdot = s.V.transpose() * q.B1.mat() * s.V;
        CHECK((C + C.transpose() + Bdot).norm() <= 1e-6 * (1.0 + Bdot.norm()));

        const auto pr = predict(s, q.A(h), q.B(h));
        const Matrix C_pred = s.V.inverse() * (pr.V - s.V) / h;
        CHECK((C_pred - C).norm() <= 1e-3 * (1.0 + C.norm()));
    }
}

TEST_CASE("predicted vectors stay B-orthonormal to second order") {
    std::mt19937_64 gen(9);
    const auto q = random_quad(gen, 5);
    const auto s = point_at(q, 0.0);
    const double h = 1e-3;
    const auto pr = predict(s, q.A(h), q.B(h));
    const Matrix G = pr.V.transpose() * q.B(h).mat() * pr.V;
    CHECK((G - Matrix::Identity(5, 5)).norm() <= 100 * h * h);
}

TEST_CASE("sign correction") {
    std::mt19937_64 gen(2);
    const auto B = random_spd(gen, 3, 3.0);
    const auto e = gen_eig_ordered(random_sym(gen, 3), B);
    const Matrix flipped = e.vectors * Vector{{1.0, -1.0, -1.0}}.asDiagonal();
    const auto sc = sign_correct(flipped, B, e.vectors);
    CHECK(sc.S == Vector{{1.0, -1.0, -1.0}});
    CHECK((sc.V - e.vectors).norm() <= 1e-14);
    CHECK(sc.min_abs_diag == doctest::Approx(1.0));
    CHECK_FALSE(sc.ambiguous);

    // Swapping two columns leaves them B-orthogonal to their predictions.
    Matrix swapped = e.vectors;
    swapped.col(0).swap(swapped.col(1));
    CHECK(sign_correct(swapped, B, e.vectors).ambiguous);
}

TEST_CASE("step control") {
    const SymMatrix B = SymMatrix::identity(2);
    const Matrix V = Matrix::Identity(2, 2);
    const Vector lam{{1.0, -1.0}};

    auto d = step_control(lam, lam, V, V, B, 0.1);
    CHECK(d.rho == 0.0);
    CHECK(d.accept);
    CHECK(d.h_new == doctest::Approx(0.2));

    // rho_lambda = 0.02 / 2 = 0.01 -> rho = 1
    d = step_control(Vector{{1.0, -1.0}}, Vector{{1.02, -1.0}}, V, V, B, 0.1);
    CHECK(d.rho_lambda == doctest::Approx(0.01));
    CHECK(d.rho == doctest::Approx(1.0));
    CHECK(d.accept);
    CHECK(d.h_new == doctest::Approx(0.1));

    d = step_control(lam, Vector{{1.06, -1.0}}, V, V, B, 0.1);
    CHECK(d.rho == doctest::Approx(3.0));
    CHECK_FALSE(d.accept);
    CHECK(d.h_new == doctest::Approx(0.1 / 3.0));

    // rho_V = ||dV||_B / sqrt(n)
    Matrix Vp = V;
    Vp(0, 0) += 0.02 * std::sqrt(2.0);
    d = step_control(lam, lam, V, Vp, B, 0.1);
    CHECK(d.rho_v == doctest::Approx(0.02));
    CHECK(d.rho == doctest::Approx(2.0));
    CHECK_FALSE(d.accept);

    CHECK(code_of([&] { step_control(lam, Vector{{2.0, -1.0}}, V, V, B, 1e-14); }) ==
          ErrorCode::StepUnderflow);
}

TEST_CASE("secant guard") {
    // Eigenvalues approach each other at relative speed 2 with gap 1: a step
    // of 1 would cross, so the guard keeps the step below 0.9 * 0.5.
    const Vector l0{{1.0, 0.0}}, l1{{0.9, 0.1}};
    const double h = secant_guard(l0, l1, 0.1, 1.0);
    CHECK(h < 0.9 * 0.8 / 2.0 + 1e-12);
    CHECK(h > 0.0);
    // Diverging eigenvalues leave the step alone.
    CHECK(secant_guard(Vector{{0.9, 0.1}}, Vector{{1.0, 0.0}}, 0.1, 1.0) == 1.0);
    // Far from crossing within h.
    CHECK(secant_guard(l0, l1, 0.1, 0.01) == 0.01);
}

TEST_CASE("init_decomposition uses canonical signs") {
    const auto p = analytic_ci_pencil(0.0);
    const auto loop = LoopPath::circle({0.0, 0.0}, 1.0);
    const auto s = init_decomposition(p, loop, 0.0);
    CHECK(s.lambda(0) == doctest::Approx(1.0));
    CHECK(s.lambda(1) == doctest::Approx(-1.0));
    for (int k = 0; k < 2; ++k) {
        Eigen::Index imax = 0;
        s.V.col(k).cwiseAbs().maxCoeff(&imax);
        CHECK(s.V(imax, k) > 0.0);
    }
    const auto through = LoopPath::circle({1.0, 0.0}, 1.0, std::numbers::pi);
    CHECK(code_of([&] { init_decomposition(p, through, 0.0); }) == ErrorCode::DegenerateStart);
}

TEST_CASE("loops around the analytic conical intersection") {
    const auto p = analytic_ci_pencil(0.0);
    CHECK(trace_D(p, LoopPath::circle({0.0, 0.0}, 1.0)) == std::vector<int>{-1, -1});
    CHECK(trace_D(p, LoopPath::circle({0.3, -0.2}, 0.5)) == std::vector<int>{-1, -1});
    CHECK(trace_D(p, LoopPath::circle({2.0, 0.0}, 0.5)) == std::vector<int>{1, 1});
    CHECK(trace_D(p, LoopPath::box_perimeter(-0.5, -0.5, 1.0, 1.0)) == std::vector<int>{-1, -1});
    CHECK(trace_D(p, LoopPath::box_perimeter(0.1, 0.1, 1.0, 1.0)) == std::vector<int>{1, 1});
    CHECK(trace_D(p, LoopPath::ellipse({0.0, 0.0}, 1e-3, 2.0)) == std::vector<int>{-1, -1});

    const auto q = analytic_ci_pencil(0.1);
    CHECK(trace_D(q, LoopPath::circle({-0.025, -0.03125}, 0.01)) == std::vector<int>{-1, -1});
    CHECK(trace_D(q, LoopPath::circle({0.0, 0.0}, 0.01)) == std::vector<int>{1, 1});
}

TEST_CASE("traced points satisfy the decomposition invariants") {
    const auto r = sgplus_generate(8, 7, 0.45, 12345);
    const auto p = sgplus_pencil(r);
    const auto loop = LoopPath::box_perimeter(1.0, 2.0, 0.4, 0.4);
    double worst_orth = 0.0, worst_res = 0.0;
    bool ordered = true;
    auto obs = [&](const StepRecord&, const EigenPoint& pt, const PencilValue& v) {
        const Matrix& V = pt.V;
        worst_orth = std::max(worst_orth, (V.transpose() * v.B.mat() * V - Matrix::Identity(8, 8)).norm());
        worst_res = std::max(worst_res, (v.A.mat() * V - v.B.mat() * V * pt.lambda.asDiagonal()).norm() /
                                            v.A.mat().norm());
        for (int i = 0; i + 1 < 8; ++i) ordered = ordered && pt.lambda(i) >= pt.lambda(i + 1);
    };
    const auto res = trace_loop(p, loop, {}, obs);
    CHECK(worst_orth <= 1e-9);
    CHECK(worst_res <= 1e-9);
    CHECK(ordered);
    REQUIRE(res.D.size() == 8);
    int neg = 0;
    for (int k = 0; k < 8; ++k) {
        CHECK(std::abs(std::abs(res.D_raw(k)) - 1.0) <= 1e-6);
        neg += res.D[k] < 0;
    }
    CHECK(neg % 2 == 0);
    CHECK(res.stats.accepted > 0);
    CHECK(res.end.t == 1.0);
    // one record per accepted step plus the starting point
    CHECK(res.records.size() == static_cast<std::size_t>(res.stats.accepted) + 1);
}

TEST_CASE("continuation is smooth: consecutive vectors stay close") {
    const auto p = analytic_ci_pencil(0.0);
    ContinuationOptions opts;
    const auto res = trace_loop(p, LoopPath::circle({0.0, 0.0}, 1.0), opts);
    REQUIRE(res.points.size() > 4);
    for (std::size_t k = 1; k < res.points.size(); ++k) {
        const Matrix G = res.points[k - 1].V.transpose() * p.eval(0.0, 0.0).B.mat() * res.points[k].V;
        CHECK(G.diagonal().minCoeff() > 0.5);
    }
    // Eigenvectors of this pencil rotate by half the polar angle, so after one
    // turn each column is its own negative.
    const Matrix& V0 = res.start.V;
    const Matrix& V1 = res.end.V;
    CHECK((V0 + V1).norm() <= 1e-6);
}

TEST_CASE("open path reports no signature") {
    const auto p = analytic_ci_pencil(0.0);
    const auto res = trace_path(p, LoopPath::segment({-1.0, 0.5}, {1.0, 0.5}));
    CHECK(res.D.empty());
    CHECK(code_of([&] { trace_loop(p, LoopPath::segment({-1.0, 0.5}, {1.0, 0.5})); }) ==
          ErrorCode::InvalidArgument);
}

// A straight segment passing at distance d from the intersection and an arc
// of radius 1 on the same side reach the same end decomposition, as the two
// paths enclose no intersection between them. For tiny d the segment can
// only be crossed in veering mode.
TEST_CASE("veering traversal agrees with the semicircle detour") {
    const auto p = analytic_ci_pencil(0.0);
    for (double d : {1e-4, 1e-8, 1e-11, 1e-12}) {
        CAPTURE(d);
        const auto seg = LoopPath::segment({-1.0, d}, {1.0, d});
        const auto arc = LoopPath::custom(
            [d](double t) -> Point2 {
                const double a = std::numbers::pi * (1.0 - t);
                return {std::cos(a), d + std::sin(a)};
            },
            false, std::numbers::pi);
        const auto rs = trace_path(p, seg);
        const auto ra = trace_path(p, arc);
        CHECK((rs.start.V - ra.start.V).norm() <= 1e-12);
        CHECK((rs.end.V - ra.end.V).norm() <= 1e-6);
        CHECK((rs.end.lambda - ra.end.lambda).norm() <= 1e-10);
        if (d <= 1e-11) CHECK_FALSE(rs.veering_events.empty());
    }
}

TEST_CASE("a path through the intersection is unresolvable") {
    const auto p = analytic_ci_pencil(0.0);
    CHECK(code_of([&] { trace_path(p, LoopPath::segment({-1.0, 0.0}, {1.0, 0.0})); }) ==
          ErrorCode::LoopUnresolvable);
    CHECK(code_of([&] { trace_loop(p, LoopPath::box_perimeter(-0.5, 0.0, 1.0, 1.0)); }) ==
          ErrorCode::LoopUnresolvable);
}

TEST_CASE("veering below the intersection flips the opposite way") {
    // Passing below instead of above differs by one loop around the
    // intersection: the end vectors differ by a sign on both columns.
    const auto p = analytic_ci_pencil(0.0);
    const auto above = trace_path(p, LoopPath::segment({-1.0, 1e-12}, {1.0, 1e-12}));
    const auto below = trace_path(p, LoopPath::segment({-1.0, -1e-12}, {1.0, -1e-12}));
    CHECK((above.start.V - below.start.V).norm() <= 1e-9);
    CHECK((above.end.V + below.end.V).norm() <= 1e-6);
}

TEST_CASE("embedded pair gives a local signature") {
    const auto p = embed_2x2(analytic_ci_pencil(0.0), 4, 2, {5.0, -5.0});
    CHECK(trace_D(p, LoopPath::circle({0.0, 0.0}, 0.5)) == std::vector<int>{1, -1, -1, 1});
    CHECK(trace_D(p, LoopPath::circle({0.6, 0.6}, 0.2)) == std::vector<int>{1, 1, 1, 1});
    const auto q = embed_2x2(analytic_ci_pencil(0.0), 5, 1, {-5.0, -6.0, -7.0});
    CHECK(trace_D(q, LoopPath::circle({0.0, 0.0}, 0.5)) == std::vector<int>{-1, -1, 1, 1, 1});
}
