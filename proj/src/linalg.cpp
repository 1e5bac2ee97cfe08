#include "phcd/linalg.hpp"

#include <complex>
#include <string>

#define LAPACK_COMPLEX_CUSTOM
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include "phcd/errors.hpp"

namespace phcd::linalg {

EighResult eigh(const Eigen::MatrixXcd& A) {
    const lapack_int n = static_cast<lapack_int>(A.rows());
    EighResult out;
    out.vectors = A;
    out.values.resize(n);
    const lapack_int info =
        LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'L', n, out.vectors.data(), n,
                       out.values.data());
    if (info != 0)
        throw SolverError("zheevd failed to converge (info=" +
                          std::to_string(info) + ", n=" + std::to_string(n) +
                          ", |A|_max=" +
                          std::to_string(A.cwiseAbs().maxCoeff()) + ")");
    return out;
}

EigResult eig(const Eigen::MatrixXcd& A) {
    const lapack_int n = static_cast<lapack_int>(A.rows());
    Eigen::MatrixXcd work = A;
    EigResult out;
    out.values.resize(n);
    out.vectors.resize(n, n);
    const lapack_int info =
        LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'V', n, work.data(), n,
                      out.values.data(), nullptr, 1, out.vectors.data(), n);
    if (info != 0)
        throw SolverError("zgeev failed to converge (info=" +
                          std::to_string(info) + ", n=" + std::to_string(n) +
                          ")");
    return out;
}

SvdSolveResult svd_least_squares(const Eigen::MatrixXcd& A,
                                 const Eigen::VectorXcd& b, double rel_tol) {
    const lapack_int m = static_cast<lapack_int>(A.rows());
    const lapack_int n = static_cast<lapack_int>(A.cols());
    const lapack_int k = std::min(m, n);

    Eigen::MatrixXcd work = A;
    Eigen::VectorXd sigma(k);
    Eigen::MatrixXcd U(m, k), Vt(k, n);
    const lapack_int info =
        LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'S', m, n, work.data(), m,
                       sigma.data(), U.data(), m, Vt.data(), k);
    if (info != 0)
        throw SolverError("zgesdd failed (info=" + std::to_string(info) + ")");

    SvdSolveResult out;
    out.sigma_max = k > 0 ? sigma(0) : 0.0;
    const double cut = rel_tol * out.sigma_max;
    Eigen::VectorXcd c = U.adjoint() * b;
    for (lapack_int i = 0; i < k; ++i) {
        if (sigma(i) > cut) {
            c(i) /= sigma(i);
            ++out.rank;
        } else {
            c(i) = 0.0;
        }
    }
    if (out.rank == 0)
        throw SolverError("SVD solve: effective rank 0 at rel_tol=" +
                          std::to_string(rel_tol));
    out.x = Vt.adjoint() * c;
    out.residual = (A * out.x - b).norm();
    return out;
}

} // namespace phcd::linalg
