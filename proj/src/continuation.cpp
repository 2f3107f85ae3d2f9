#include "coalesce/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <spdlog/spdlog.h>

#include "coalesce/error.hpp"

namespace coalesce {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double rel_gap(const Vector& lam, Eigen::Index i) {
    return std::abs(lam(i) - lam(i + 1)) / (std::abs(lam(i)) + 1.0);
}

std::vector<int> close_pairs(const Vector& lam, double toldist) {
    std::vector<int> out;
    for (Eigen::Index i = 0; i + 1 < lam.size(); ++i)
        if (rel_gap(lam, i) < toldist) out.push_back(static_cast<int>(i));
    return out;
}

double b_norm_diff(const Matrix& X, const Matrix& Y, const SymMatrix& B) {
    const Matrix E = X - Y;
    const double tr = (E.transpose() * B.mat() * E).trace();
    return std::sqrt(std::max(tr, 0.0));
}

void canonicalize_signs(Matrix& V) {
    for (Eigen::Index k = 0; k < V.cols(); ++k) {
        Eigen::Index imax = 0;
        V.col(k).cwiseAbs().maxCoeff(&imax);
        if (V(imax, k) < 0.0) V.col(k) *= -1.0;
    }
}

// Next parameter value reachable with stepsize h without crossing a path
// breakpoint or the end of the path.
double next_t(const LoopPath& path, double t, double h) {
    double t1 = t + h;
    for (double bp : path.breakpoints()) {
        if (bp > t + 1e-15 && t1 > bp) {
            t1 = bp;
            break;
        }
    }
    if (t1 >= 1.0 - 1e-15) t1 = 1.0;
    return t1;
}

void note_step(StepStats* stats, double h) {
    if (!stats) return;
    stats->accepted++;
    stats->h_min = std::min(stats->h_min, h);
    stats->h_max = std::max(stats->h_max, h);
}

[[noreturn]] void underflow(double t, double h) {
    throw Error(ErrorCode::StepUnderflow,
                "stepsize " + std::to_string(h) + " below minimum at t = " + std::to_string(t));
}

}  // namespace

Prediction predict(const EigenPoint& state, const SymMatrix& A_next, const SymMatrix& B_next) {
    const Matrix& V = state.V;
    const Vector& lam = state.lambda;
    const Eigen::Index n = lam.size();

    const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        if (!(lam(i) - lam(i + 1) > 10.0 * kEps * scale)) {
            throw Error(ErrorCode::GapTooSmall, "eigenvalues " + std::to_string(i + 1) + " and " +
                                                    std::to_string(i + 2) + " are not separated");
        }
    }

    const Matrix AV = V.transpose() * A_next.mat() * V;
    const Matrix BV = V.transpose() * B_next.mat() * V;

    Prediction out;
    out.lambda = AV.diagonal() - lam.cwiseProduct(BV.diagonal() - Vector::Ones(n));

    // Euler step of V' = V C: the symmetric part of C is -VᵀB'V/2, the
    // antisymmetric part follows from the off-diagonal equations.
    Matrix K = 0.5 * (Matrix::Identity(n, n) - 0.5 * (BV + BV.transpose()));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = i + 1; k < n; ++k) {
            const double d = lam(k) - lam(i);
            const double a = 0.5 * (AV(i, k) + AV(k, i));
            const double b = 0.5 * (BV(i, k) + BV(k, i));
            const double hik = a / d - 0.5 * (lam(i) + lam(k)) / d * b;
            K(i, k) += hik;
            K(k, i) -= hik;
        }
    }
    out.V = V + V * K;
    return out;
}

SignCorrection sign_correct(const Matrix& V_raw, const SymMatrix& B_next, const Matrix& V_pred,
                            double ambiguous_threshold) {
    const Matrix BVp = B_next.mat() * V_pred;
    const Eigen::Index n = V_raw.cols();
    SignCorrection out;
    out.S.resize(n);
    out.V = V_raw;
    out.min_abs_diag = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < n; ++k) {
        const double d = V_raw.col(k).dot(BVp.col(k));
        out.min_abs_diag = std::min(out.min_abs_diag, std::abs(d));
        if (d == 0.0) spdlog::warn("sign_correct: prediction orthogonal to column {}, using +1", k);
        out.S(k) = d < 0.0 ? -1.0 : 1.0;
        if (out.S(k) < 0.0) out.V.col(k) *= -1.0;
    }
    out.ambiguous = !(out.min_abs_diag >= ambiguous_threshold);
    return out;
}

StepDecision step_control(const Vector& lambda_new, const Vector& lambda_pred, const Matrix& V_new,
                          const Matrix& V_pred, const SymMatrix& B_new, double h,
                          const StepParams& params) {
    if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "stepsize must be positive");
    StepDecision d;
    const auto n = static_cast<double>(lambda_new.size());
    d.rho_lambda = ((lambda_new - lambda_pred).cwiseAbs().array() /
                    (lambda_new.cwiseAbs().array() + 1.0))
                       .maxCoeff();
    d.rho_v = b_norm_diff(V_new, V_pred, B_new) / std::sqrt(n);
    d.rho = std::max(d.rho_lambda, d.rho_v) / params.tolstep;
    if (!std::isfinite(d.rho)) d.rho = 1e3;
    d.h_new = h / std::max(d.rho, 1.0 / params.growth_cap);
    d.accept = d.rho <= params.accept_ratio;
    if (d.h_new < params.h_min) {
        throw Error(ErrorCode::StepUnderflow, "stepsize " + std::to_string(d.h_new) + " below minimum");
    }
    return d;
}

double secant_guard(const Vector& lambda_prev, const Vector& lambda_next, double dt, double h) {
    const Eigen::Index n = lambda_next.size();
    const Vector slope = (lambda_next - lambda_prev) / dt;
    double h_new = h;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        const double si = lambda_next(i) + h * slope(i);
        const double sj = lambda_next(i + 1) + h * slope(i + 1);
        if (si < sj) {
            const double crossing = (lambda_next(i) - lambda_next(i + 1)) / (slope(i + 1) - slope(i));
            h_new = std::min(h_new, 0.9 * crossing);
        }
    }
    return h_new;
}

EigenPoint init_decomposition(const ParametricPencil& pencil, const LoopPath& path, double t,
                              double toldist) {
    const auto pv = pencil.eval(path.point(t));
    auto eig = gen_eig_ordered(pv.A, pv.B);
    const auto close = close_pairs(eig.values, toldist);
    if (eig.degenerate || !close.empty()) {
        throw Error(ErrorCode::DegenerateStart, "eigenvalues tie at the starting point");
    }
    EigenPoint p;
    p.t = t;
    p.V = std::move(eig.vectors);
    canonicalize_signs(p.V);
    p.lambda = std::move(eig.values);
    return p;
}

EigenPoint veering_traverse(const EigenPoint& state, const ParametricPencil& pencil,
                            const LoopPath& path, int pair, const ContinuationOptions& opts,
                            std::vector<StepRecord>* records, StepStats* stats,
                            const StepObserver& observer) {
    const Eigen::Index n = state.lambda.size();
    if (pair < 0 || pair + 1 >= n) throw Error(ErrorCode::InvalidArgument, "pair index out of range");
    const Eigen::Index i0 = pair;
    const double exit_gap = opts.exit_factor * opts.toldist;
    const double h_min = opts.h_min;

    // U: block-diagonalizing basis; columns (i0, i0+1) span the pair's subspace.
    Matrix U = state.V;
    double t = state.t;
    double h = state.h_next > 0.0 ? state.h_next : opts.h0;

    auto projected = [&](const Matrix& Ub, const SymMatrix& A) {
        const Matrix M = Ub.transpose() * A.mat() * Ub;
        return Eigen::Vector2d(0.5 * (M(0, 0) - M(1, 1)), 0.5 * (M(0, 1) + M(1, 0)));
    };

    Eigen::Vector2d p_prev = projected(U.middleCols(i0, 2), pencil.eval(path.point(t)).A);
    double phi = std::atan2(p_prev(1), p_prev(0));
    double gap_prev = rel_gap(state.lambda, i0);
    int block_steps = 0;

    for (;;) {
        if (h < h_min) underflow(t, h);
        const double t1 = next_t(path, t, h);
        const double h_eff = t1 - t;
        const auto pv = pencil.eval(path.point(t1));
        auto eig = gen_eig_ordered(pv.A, pv.B);

        for (int other : close_pairs(eig.values, opts.toldist)) {
            if (other != pair) {
                throw Error(ErrorCode::TripleDegeneracy,
                            "second close pair " + std::to_string(other + 1) + " during veering at t = " +
                                std::to_string(t1));
            }
        }

        // Separated columns: sign match against the previous basis.
        Matrix U_new = eig.vectors;
        const Matrix BU = pv.B.mat() * U;
        bool ambiguous = false;
        for (Eigen::Index k = 0; k < n; ++k) {
            if (k == i0 || k == i0 + 1) continue;
            const double d = U_new.col(k).dot(BU.col(k));
            if (std::abs(d) < opts.ambiguous_sign) ambiguous = true;
            if (d < 0.0) U_new.col(k) *= -1.0;
        }
        // Pair subspace: closest B-orthonormal basis to the previous one.
        const Matrix W = eig.vectors.middleCols(i0, 2);
        const Eigen::Matrix2d M = W.transpose() * BU.middleCols(i0, 2);
        Eigen::JacobiSVD<Eigen::Matrix2d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const Eigen::Matrix2d Q = svd.matrixU() * svd.matrixV().transpose();
        U_new.middleCols(i0, 2) = W * Q;
        if (svd.singularValues()(1) < 0.5) ambiguous = true;

        const Eigen::Vector2d p = projected(U_new.middleCols(i0, 2), pv.A);
        const double dphi = std::atan2(p_prev(0) * p(1) - p_prev(1) * p(0), p_prev.dot(p));
        const double scale = std::abs(eig.values(i0)) + 1.0;
        const bool unresolved = p.norm() <= 1e3 * kEps * scale;

        const double rho_v = b_norm_diff(U_new, U, pv.B) / std::sqrt(static_cast<double>(n));
        const double rho = rho_v / opts.tolstep;
        const double rho_phi = std::abs(dphi) / (std::numbers::pi / 8.0);

        if (ambiguous || unresolved || !std::isfinite(rho) || rho > opts.accept_ratio || rho_phi > 2.0) {
            if (stats) stats->rejected++;
            h = h_eff * 0.5;
            if (std::isfinite(rho) && rho > opts.accept_ratio) h = std::min(h, h_eff / rho);
            continue;
        }

        // Accepted block step.
        t = t1;
        U = std::move(U_new);
        phi += dphi;
        p_prev = p;
        ++block_steps;
        note_step(stats, h_eff);
        h = std::min(h_eff / std::max({rho, rho_phi, 1.0 / opts.growth_cap}), opts.h_max);

        const double gap = rel_gap(eig.values, i0);
        const bool at_end = t >= 1.0;
        const bool separated = gap >= exit_gap && gap > gap_prev && block_steps >= 1;
        gap_prev = gap;

        if (records) {
            records->push_back({t, h_eff, eig.values, 0.0, rho_v, true});
        }
        if (!separated && !at_end) continue;

        // Exit: rotate the subspace basis by the accumulated half-angle to
        // predict the individual eigenvectors, then fix signs of the fresh ones.
        const double theta = 0.5 * phi;
        Eigen::Matrix2d R;
        R << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
        Matrix V_pred = U;
        V_pred.middleCols(i0, 2) = U.middleCols(i0, 2) * R;

        const Matrix Ub = U.middleCols(i0, 2);
        const Eigen::Matrix2d Ab = Ub.transpose() * pv.A.mat() * Ub;
        const Eigen::Matrix2d Bb = Ub.transpose() * pv.B.mat() * Ub;
        const Eig2x2 closed = eig2x2_pencil(Ab(0, 0), 0.5 * (Ab(0, 1) + Ab(1, 0)), Ab(1, 1), Bb(0, 0),
                                            0.5 * (Bb(0, 1) + Bb(1, 0)), Bb(1, 1));

        const auto sc = sign_correct(eig.vectors, pv.B, V_pred, opts.ambiguous_sign);
        if (sc.ambiguous) {
            throw Error(ErrorCode::LoopUnresolvable,
                        "eigenvector signs ambiguous on leaving veering zone at t = " + std::to_string(t));
        }
        EigenPoint out;
        out.t = t;
        out.V = sc.V;
        out.lambda = eig.values;
        out.lambda(i0) = closed.lambda1;
        out.lambda(i0 + 1) = closed.lambda2;
        out.h_next = h;
        if (observer) observer({t, h_eff, out.lambda, 0.0, rho_v, true}, out, pv);
        return out;
    }
}

TraceResult trace_path(const ParametricPencil& pencil, const LoopPath& path,
                       const ContinuationOptions& opts, const StepObserver& observer) {
    TraceResult res;
    try {
        EigenPoint state = init_decomposition(pencil, path, 0.0, opts.toldist);
        res.start = state;
        if (opts.keep_points) {
            res.points.push_back(state);
            res.records.push_back({0.0, 0.0, state.lambda, 0.0, 0.0, false});
        }
        if (observer) observer({0.0, 0.0, state.lambda, 0.0, 0.0, false}, state, pencil.eval(path.point(0.0)));

        const StepParams sp{opts.tolstep, opts.accept_ratio, opts.growth_cap, opts.h_min};
        double h = std::min(opts.h0, opts.h_max);
        std::vector<StepRecord>* recs = opts.keep_points ? &res.records : nullptr;

        while (state.t < 1.0) {
            if (h < opts.h_min) underflow(state.t, h);
            const double t1 = next_t(path, state.t, h);
            const double h_eff = t1 - state.t;
            const auto pv = pencil.eval(path.point(t1));
            const auto eig = gen_eig_ordered(pv.A, pv.B);

            const auto close = close_pairs(eig.values, opts.toldist);
            if (close.size() > 1) {
                throw Error(ErrorCode::TripleDegeneracy,
                            "several close eigenvalue pairs at t = " + std::to_string(t1));
            }
            if (close.size() == 1) {
                state.h_next = h_eff;
                const double t_begin = state.t;
                const Vector lam_before = state.lambda;
                state = veering_traverse(state, pencil, path, close.front(), opts, recs, &res.stats, observer);
                res.veering_events.push_back({t_begin, state.t, close.front()});
                if (opts.keep_points) res.points.push_back(state);
                h = state.h_next;
                continue;
            }

            const Prediction pred = predict(state, pv.A, pv.B);
            const SignCorrection sc = sign_correct(eig.vectors, pv.B, pred.V, opts.ambiguous_sign);
            if (sc.ambiguous) {
                res.stats.rejected++;
                h = 0.5 * h_eff;
                continue;
            }
            const StepDecision dec = step_control(eig.values, pred.lambda, sc.V, pred.V, pv.B, h_eff, sp);
            if (!dec.accept) {
                res.stats.rejected++;
                h = dec.h_new;
                continue;
            }

            EigenPoint next;
            next.t = t1;
            next.V = sc.V;
            next.lambda = eig.values;
            h = std::min(dec.h_new, opts.h_max);
            h = secant_guard(state.lambda, next.lambda, h_eff, h);
            next.h_next = h;
            note_step(&res.stats, h_eff);

            const StepRecord rec{t1, h_eff, next.lambda, dec.rho_lambda, dec.rho_v, false};
            if (observer) observer(rec, next, pv);
            if (opts.keep_points) {
                res.records.push_back(rec);
                res.points.push_back(next);
            }
            state = std::move(next);
        }
        res.end = state;

        if (path.closed()) {
            const auto pv0 = pencil.eval(path.point(0.0));
            const Matrix M = res.start.V.transpose() * pv0.B.mat() * state.V;
            const Eigen::Index n = M.rows();
            res.D_raw = M.diagonal();
            res.D.resize(n);
            int negatives = 0;
            for (Eigen::Index i = 0; i < n; ++i) {
                res.D[i] = M(i, i) < 0.0 ? -1 : 1;
                if (res.D[i] < 0) ++negatives;
                for (Eigen::Index j = 0; j < n; ++j) {
                    const double target = i == j ? res.D[i] : 0.0;
                    if (std::abs(M(i, j) - target) > 1e-6) {
                        throw Error(ErrorCode::LoopUnresolvable,
                                    "loop end does not match start up to column signs");
                    }
                }
            }
            if (negatives % 2 != 0) {
                throw Error(ErrorCode::LoopUnresolvable, "odd number of sign flips around the loop");
            }
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidArgument || e.code() == ErrorCode::LoopUnresolvable) throw;
        throw Error(ErrorCode::LoopUnresolvable, e.what());
    }
    return res;
}

TraceResult trace_loop(const ParametricPencil& pencil, const LoopPath& loop,
                       const ContinuationOptions& opts, const StepObserver& observer) {
    if (!loop.closed()) throw Error(ErrorCode::InvalidArgument, "trace_loop requires a closed path");
    return trace_path(pencil, loop, opts, observer);
}

}  // namespace coalesce
