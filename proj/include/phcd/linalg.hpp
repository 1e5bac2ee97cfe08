#ifndef PHCD_LINALG_HPP
#define PHCD_LINALG_HPP

// Dense decompositions used across the solvers, backed by LAPACK.

#include <complex>

#include <Eigen/Dense>

namespace phcd::linalg {

struct EighResult {
    Eigen::VectorXd values;   // ascending
    Eigen::MatrixXcd vectors; // orthonormal columns
};

/// Hermitian eigendecomposition (zheevd).  Only the lower triangle of A is
/// referenced.  Throws SolverError on non-convergence.
EighResult eigh(const Eigen::MatrixXcd& A);

struct EigResult {
    Eigen::VectorXcd values;
    Eigen::MatrixXcd vectors;
};

/// General complex eigendecomposition (zgeev), right eigenvectors.
EigResult eig(const Eigen::MatrixXcd& A);

struct SvdSolveResult {
    Eigen::VectorXcd x;
    int rank = 0;
    double sigma_max = 0.0;
    double residual = 0.0; // ||A x - b||
};

/// Minimum-norm least-squares solve via SVD, dropping singular values below
/// rel_tol * sigma_max.  Throws SolverError if the effective rank is zero.
SvdSolveResult svd_least_squares(const Eigen::MatrixXcd& A,
                                 const Eigen::VectorXcd& b, double rel_tol);

} // namespace phcd::linalg

#endif
