#pragma once

#include <array>

#include <Eigen/Dense>

namespace coalesce {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense real symmetric matrix. Construction symmetrizes (M + Mᵀ)/2, so the
/// stored entries are always exactly symmetric.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(const Matrix& m);

    static SymMatrix identity(Eigen::Index n);
    static SymMatrix diagonal(const Vector& d);

    Eigen::Index size() const noexcept { return m_.rows(); }
    const Matrix& mat() const noexcept { return m_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

    /// Largest |i - j| over nonzero entries (0 for diagonal, n-1 for full).
    int bandwidth() const;

private:
    Matrix m_;
};

struct CholeskyFactor {
    Matrix L;           // lower triangular, positive diagonal
    int bandwidth = 0;  // band of L, equal to the band of the source matrix

    Eigen::Index size() const noexcept { return L.rows(); }
};

/// Banded Cholesky B = L Lᵀ. Throws NotPositiveDefinite when a pivot falls
/// below 1e3 * eps * max(diag(B)).
CholeskyFactor cholesky(const SymMatrix& B);

/// Unique SPD square root by the spectral route.
SymMatrix spd_sqrt(const SymMatrix& B);

/// Square root by the binomial series of (I + Y)^{1/2} applied to C = B/gamma,
/// rescaled by sqrt(gamma). Slow; kept as an independent oracle for spd_sqrt.
/// Requires gamma > ||B||_2.
SymMatrix spd_sqrt_series(const SymMatrix& B, double gamma);

/// Symmetric solution X of X S + S X = dB, i.e. the derivative of sqrt(B) along
/// a direction dB when S = sqrt(B).
SymMatrix sqrt_derivative(const SymMatrix& S, const SymMatrix& dB);

struct EigenPair {
    Vector values;            // decreasing
    Matrix vectors;           // B-orthonormal columns, VᵀBV = I
    bool degenerate = false;  // some adjacent gap below 4 eps |λ_i|
};

/// Ordered generalized eigendecomposition A V = B V Λ via Cholesky reduction
/// to L⁻¹ A L⁻ᵀ. Column signs are whatever the symmetric solver produced.
EigenPair gen_eig_ordered(const SymMatrix& A, const SymMatrix& B);

/// Same, reusing a Cholesky factor of B.
EigenPair gen_eig_ordered(const SymMatrix& A, const CholeskyFactor& chol);

/// Default B-orthonormality tolerance for an n×n decomposition.
inline double tol_orth(Eigen::Index n) { return 1e-10 * static_cast<double>(n); }

struct Eig2x2 {
    double mu1 = 0.0, mu2 = 0.0;          // eigenvalues of the shifted normalized pencil
    double lambda1 = 0.0, lambda2 = 0.0;  // pencil eigenvalues, lambda1 >= lambda2
};

/// Closed-form eigenvalues of [[a,b],[b,c]] - λ [[alpha,beta],[beta,gamma]].
Eig2x2 eig2x2_pencil(double a, double b, double c, double alpha, double beta, double gamma);

/// (a gamma - alpha c, b gamma - beta c); both vanish iff the 2×2 pencil has a
/// double eigenvalue.
std::array<double, 2> coalescence_residual(double a, double b, double c, double alpha,
                                           double beta, double gamma);

}  // namespace coalesce
