#include "coalesce/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "coalesce/error.hpp"

namespace coalesce {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_square(const Matrix& m, const char* what) {
    if (m.rows() != m.cols()) {
        throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be square");
    }
}

}  // namespace

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::SeriesDiverged: return "SeriesDiverged";
    case ErrorCode::DispersionOutOfRange: return "DispersionOutOfRange";
    case ErrorCode::BandwidthOutOfRange: return "BandwidthOutOfRange";
    case ErrorCode::SpectrumOverlap: return "SpectrumOverlap";
    case ErrorCode::DegenerateStart: return "DegenerateStart";
    case ErrorCode::GapTooSmall: return "GapTooSmall";
    case ErrorCode::StepUnderflow: return "StepUnderflow";
    case ErrorCode::TripleDegeneracy: return "TripleDegeneracy";
    case ErrorCode::LoopUnresolvable: return "LoopUnresolvable";
    case ErrorCode::OddSignCount: return "OddSignCount";
    case ErrorCode::RefinementInconsistent: return "RefinementInconsistent";
    case ErrorCode::NonPositiveCount: return "NonPositiveCount";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

SymMatrix::SymMatrix(const Matrix& m) {
    require_square(m, "SymMatrix");
    m_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::identity(Eigen::Index n) { return SymMatrix(Matrix::Identity(n, n)); }

SymMatrix SymMatrix::diagonal(const Vector& d) { return SymMatrix(Matrix(d.asDiagonal())); }

int SymMatrix::bandwidth() const {
    const Eigen::Index n = size();
    for (Eigen::Index k = n - 1; k > 0; --k) {
        for (Eigen::Index i = k; i < n; ++i) {
            if (m_(i, i - k) != 0.0) return static_cast<int>(k);
        }
    }
    return 0;
}

CholeskyFactor cholesky(const SymMatrix& B) {
    const Eigen::Index n = B.size();
    const Matrix& b = B.mat();
    const int band = B.bandwidth();
    const double floor = 1e3 * kEps * b.diagonal().maxCoeff();

    CholeskyFactor f;
    f.bandwidth = band;
    f.L = Matrix::Zero(n, n);
    Matrix& L = f.L;
    for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::Index k0 = std::max<Eigen::Index>(0, j - band);
        double pivot = b(j, j);
        for (Eigen::Index k = k0; k < j; ++k) pivot -= L(j, k) * L(j, k);
        if (!(pivot > floor)) {
            throw Error(ErrorCode::NotPositiveDefinite,
                        "Cholesky pivot " + std::to_string(pivot) + " at index " + std::to_string(j));
        }
        const double d = std::sqrt(pivot);
        L(j, j) = d;
        const Eigen::Index iend = std::min<Eigen::Index>(n, j + band + 1);
        for (Eigen::Index i = j + 1; i < iend; ++i) {
            double s = b(i, j);
            const Eigen::Index kk = std::max(k0, i - band);
            for (Eigen::Index k = kk; k < j; ++k) s -= L(i, k) * L(j, k);
            L(i, j) = s / d;
        }
    }
    return f;
}

SymMatrix spd_sqrt(const SymMatrix& B) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(B.mat());
    if (es.info() != Eigen::Success) {
        throw Error(ErrorCode::NotPositiveDefinite, "eigensolver failed in spd_sqrt");
    }
    const Vector& s = es.eigenvalues();
    if (!(s.minCoeff() > 1e3 * kEps * std::abs(s.maxCoeff()))) {
        throw Error(ErrorCode::NotPositiveDefinite, "matrix has a nonpositive eigenvalue");
    }
    const Matrix& Q = es.eigenvectors();
    return SymMatrix(Q * s.cwiseSqrt().asDiagonal() * Q.transpose());
}

SymMatrix spd_sqrt_series(const SymMatrix& B, double gamma) {
    if (!(gamma > 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma must be positive");
    const Eigen::Index n = B.size();
    // ||B||_2 for a symmetric matrix is its spectral radius.
    Eigen::SelfAdjointEigenSolver<Matrix> es(B.mat(), Eigen::EigenvaluesOnly);
    const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
    if (norm >= gamma) {
        throw Error(ErrorCode::SeriesDiverged, "gamma must exceed ||B||");
    }
    const Matrix Y = B.mat() / gamma - Matrix::Identity(n, n);

    Matrix sum = Matrix::Identity(n, n);
    Matrix power = Matrix::Identity(n, n);
    double coef = 1.0;
    double prev_norm = std::numeric_limits<double>::infinity();
    constexpr int kMaxTerms = 200000;
    for (int k = 1; k <= kMaxTerms; ++k) {
        coef *= (0.5 - (k - 1)) / k;
        power = power * Y;
        const Matrix term = coef * power;
        const double tn = term.norm();
        if (k > 3 && tn > prev_norm) {
            throw Error(ErrorCode::SeriesDiverged, "term norms stopped decreasing at term " +
                                                       std::to_string(k));
        }
        sum += term;
        prev_norm = tn;
        if (tn < 1e-14) return SymMatrix(std::sqrt(gamma) * sum);
    }
    throw Error(ErrorCode::SeriesDiverged, "series did not converge");
}

SymMatrix sqrt_derivative(const SymMatrix& S, const SymMatrix& dB) {
    if (S.size() != dB.size()) throw Error(ErrorCode::InvalidArgument, "dimension mismatch");
    Eigen::SelfAdjointEigenSolver<Matrix> es(S.mat());
    const Vector& s = es.eigenvalues();
    if (!(s.minCoeff() > 0.0)) {
        throw Error(ErrorCode::NotPositiveDefinite, "square root factor is not SPD");
    }
    const Matrix& Q = es.eigenvectors();
    Matrix X = Q.transpose() * dB.mat() * Q;
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) /= s(i) + s(j);
    return SymMatrix(Q * X * Q.transpose());
}

EigenPair gen_eig_ordered(const SymMatrix& A, const CholeskyFactor& chol) {
    const Eigen::Index n = A.size();
    if (chol.size() != n) throw Error(ErrorCode::InvalidArgument, "dimension mismatch");
    const auto L = chol.L.triangularView<Eigen::Lower>();
    const Matrix LinvA = L.solve(A.mat());
    Matrix At = L.solve(LinvA.transpose());
    At = 0.5 * (At + At.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Matrix> es(At);
    if (es.info() != Eigen::Success) {
        throw Error(ErrorCode::NotPositiveDefinite, "symmetric eigensolver failed");
    }
    // Eigen returns increasing order.
    EigenPair out;
    out.values = es.eigenvalues().reverse();
    const Matrix W = es.eigenvectors().rowwise().reverse();
    out.vectors = chol.L.transpose().triangularView<Eigen::Upper>().solve(W);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        if (std::abs(out.values(i) - out.values(i + 1)) < 4.0 * kEps * std::abs(out.values(i))) {
            out.degenerate = true;
        }
    }
    return out;
}

EigenPair gen_eig_ordered(const SymMatrix& A, const SymMatrix& B) {
    if (A.size() != B.size()) throw Error(ErrorCode::InvalidArgument, "dimension mismatch");
    return gen_eig_ordered(A, cholesky(B));
}

Eig2x2 eig2x2_pencil(double a, double b, double c, double alpha, double beta, double gamma) {
    if (!(alpha > 0.0) || !(alpha * gamma - beta * beta > 0.0)) {
        throw Error(ErrorCode::NotPositiveDefinite, "2x2 B is not SPD");
    }
    const double root = std::sqrt(alpha * gamma);
    const double at = a / alpha;
    const double ct = c / gamma;
    const double bt = b / root;
    const double dt = beta / root;
    const double mid = 0.5 * (at + ct);
    const double ah = 0.5 * (at - ct);
    const double bh = bt - mid * dt;
    const double one_m = 1.0 - dt * dt;
    const double disc = std::sqrt(bh * bh + one_m * ah * ah);

    Eig2x2 r;
    r.mu1 = (-bh * dt + disc) / one_m;
    r.mu2 = (-bh * dt - disc) / one_m;
    r.lambda1 = r.mu1 + mid;
    r.lambda2 = r.mu2 + mid;
    return r;
}

std::array<double, 2> coalescence_residual(double a, double b, double c, double alpha,
                                           double beta, double gamma) {
    return {a * gamma - alpha * c, b * gamma - beta * c};
}

}  // namespace coalesce
