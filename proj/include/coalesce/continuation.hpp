#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "coalesce/linalg.hpp"
#include "coalesce/pencil.hpp"

namespace coalesce {

/// One sample of the smooth decomposition A(t) V = B(t) V Λ, VᵀB(t)V = I.
struct EigenPoint {
    double t = 0.0;
    Matrix V;
    Vector lambda;  // decreasing
    double h_next = 0.0;
};

struct ContinuationOptions {
    double h0 = 1.0 / 64.0;
    double tolstep = 1e-2;
    double accept_ratio = 1.5;
    double growth_cap = 2.0;
    double h_max = 1.0 / 16.0;  // in units of the path parameter
    double h_min = 1e-14;       // StepUnderflow threshold, path parameter units
    double toldist = 1e6 * std::numeric_limits<double>::epsilon();
    double exit_factor = 10.0;  // veering exit at exit_factor * toldist
    double ambiguous_sign = 0.1;
    bool keep_points = true;
};

struct Prediction {
    Vector lambda;
    Matrix V;
};

/// Euler predictor from the decomposition at t_j, with derivatives replaced by
/// finite differences to (A_next, B_next). Throws GapTooSmall when two
/// eigenvalues at the state are not separated.
Prediction predict(const EigenPoint& state, const SymMatrix& A_next, const SymMatrix& B_next);

struct SignCorrection {
    Matrix V;                   // V_raw · S
    Vector S;                   // ±1
    double min_abs_diag = 0.0;  // smallest |diag(V_rawᵀ B V_pred)|
    bool ambiguous = false;     // min_abs_diag below the threshold
};

SignCorrection sign_correct(const Matrix& V_raw, const SymMatrix& B_next, const Matrix& V_pred,
                            double ambiguous_threshold = 0.1);

struct StepParams {
    double tolstep = 1e-2;
    double accept_ratio = 1.5;
    double growth_cap = 2.0;
    double h_min = 1e-14;
};

struct StepDecision {
    double rho_lambda = 0.0;
    double rho_v = 0.0;
    double rho = 0.0;  // max(rho_lambda, rho_v) / tolstep
    double h_new = 0.0;
    bool accept = false;
};

/// Error estimates of the prediction and the next stepsize h / max(rho, 1/growth_cap).
/// Throws StepUnderflow when the new stepsize drops below h_min.
StepDecision step_control(const Vector& lambda_new, const Vector& lambda_pred, const Matrix& V_new,
                          const Matrix& V_pred, const SymMatrix& B_new, double h,
                          const StepParams& params = {});

/// Shrinks h when the secant extrapolation of the eigenvalues over the next step
/// predicts an ordering violation; otherwise returns h.
double secant_guard(const Vector& lambda_prev, const Vector& lambda_next, double dt, double h);

/// Per-step diagnostics.
struct StepRecord {
    double t = 0.0;
    double h = 0.0;
    Vector lambda;
    double rho_lambda = 0.0;
    double rho_v = 0.0;
    bool veering = false;
};

struct VeeringEvent {
    double t_begin = 0.0;
    double t_end = 0.0;
    int pair = 0;  // 0-based: eigenvalues (pair, pair+1)
};

struct StepStats {
    int accepted = 0;
    int rejected = 0;
    double h_min = std::numeric_limits<double>::infinity();
    double h_max = 0.0;
};

/// Called for each accepted point with the pencil values there.
using StepObserver = std::function<void(const StepRecord&, const EigenPoint&, const PencilValue&)>;

struct TraceResult {
    std::vector<EigenPoint> points;  // empty unless keep_points
    EigenPoint start;
    EigenPoint end;
    std::vector<int> D;  // V(1) = V(0) diag(D); closed paths only
    Vector D_raw;        // diag(V(0)ᵀ B V(1)) before rounding
    std::vector<StepRecord> records;
    StepStats stats;
    std::vector<VeeringEvent> veering_events;
};

/// Ordered decomposition at path(t) with canonical column signs (largest
/// magnitude entry positive). Throws DegenerateStart on tied eigenvalues.
EigenPoint init_decomposition(const ParametricPencil& pencil, const LoopPath& path, double t = 0.0,
                              double toldist = ContinuationOptions{}.toldist);

/// Carries the decomposition across an interval where eigenvalues (pair,
/// pair+1) nearly coalesce, continuing the 2-dim invariant subspace of the
/// pair instead of the individual eigenvectors. Returns the first point past
/// the interval where the pair is separated again, with the eigenvectors
/// re-resolved inside the subspace. Throws TripleDegeneracy or StepUnderflow.
EigenPoint veering_traverse(const EigenPoint& state, const ParametricPencil& pencil,
                            const LoopPath& path, int pair, const ContinuationOptions& opts = {},
                            std::vector<StepRecord>* records = nullptr,
                            StepStats* stats = nullptr, const StepObserver& observer = {});

/// Continues the smooth decomposition from t=0 to t=1 along the path. For
/// closed paths the result carries the loop signature D. Numerical breakdown
/// (StepUnderflow, TripleDegeneracy, bad signature) is rethrown as
/// LoopUnresolvable with the original message.
TraceResult trace_path(const ParametricPencil& pencil, const LoopPath& path,
                       const ContinuationOptions& opts = {}, const StepObserver& observer = {});

/// trace_path restricted to closed paths.
TraceResult trace_loop(const ParametricPencil& pencil, const LoopPath& loop,
                       const ContinuationOptions& opts = {}, const StepObserver& observer = {});

}  // namespace coalesce
