#pragma once

#include <cmath>
#include <random>

#include "coalesce/linalg.hpp"

namespace coalesce::test {

inline Matrix random_matrix(std::mt19937_64& gen, Eigen::Index rows, Eigen::Index cols) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = nd(gen);
    return m;
}

inline SymMatrix random_sym(std::mt19937_64& gen, Eigen::Index n) {
    return SymMatrix(random_matrix(gen, n, n));
}

/// M Mᵀ + shift·I.
inline SymMatrix random_spd(std::mt19937_64& gen, Eigen::Index n, double shift) {
    const Matrix M = random_matrix(gen, n, n);
    return SymMatrix(M * M.transpose() + shift * Matrix::Identity(n, n));
}

inline double rel_residual(const Matrix& A, const Matrix& B, const Matrix& V, const Vector& lam) {
    return (A * V - B * V * lam.asDiagonal()).norm() / A.norm();
}

}  // namespace coalesce::test
