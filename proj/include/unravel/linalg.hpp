#pragma once

#include <cmath>
#include <complex>
#include <vector>

#define LAPACK_COMPLEX_CPP
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#define lapack_complex_float_real(z) ((z).real())
#define lapack_complex_float_imag(z) ((z).imag())
#define lapack_complex_double_real(z) ((z).real())
#define lapack_complex_double_imag(z) ((z).imag())
#include <lapacke.h>

#include "unravel/common.hpp"
#include "unravel/rng.hpp"

namespace unravel {

struct HermEig {
  Eigen::VectorXd eigenvalues;  // ascending
  CMatrix eigenvectors;         // columns, same order
};

struct SVDResult {
  CMatrix u;                      // m x k, k = min(m, n)
  Eigen::VectorXd singular_values;  // descending, non-negative
  CMatrix v;                      // n x k; input = u * diag(s) * v.adjoint()
};

inline CMatrix matmul(const CMatrix& a, const CMatrix& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  return a * b;
}

inline bool is_hermitian(const CMatrix& a, double tol = 1e-10) {
  if (a.rows() != a.cols()) return false;
  return (a - a.adjoint()).norm() <= tol * std::max(1.0, a.norm());
}

inline bool is_unitary(const CMatrix& u, double tol = 1e-10) {
  if (u.rows() != u.cols()) return false;
  return (u.adjoint() * u - CMatrix::Identity(u.rows(), u.cols())).norm() <=
         tol;
}

inline HermEig herm_eig(const CMatrix& a) {
  require(a.rows() == a.cols(), "herm_eig: matrix not square");
  require(is_hermitian(a), "herm_eig: matrix not Hermitian");
  const lapack_int n = static_cast<lapack_int>(a.rows());
  HermEig out;
  out.eigenvectors = a;
  out.eigenvalues.resize(n);
  lapack_int info = LAPACKE_zheevd(
      LAPACK_COL_MAJOR, 'V', 'L', n, out.eigenvectors.data(), n,
      out.eigenvalues.data());
  if (info != 0) throw std::runtime_error("herm_eig: zheevd failed");
  return out;
}

// Eigenvalues only (ascending); the cheap path for entropy computations.
inline Eigen::VectorXd herm_eigenvalues(const CMatrix& a) {
  require(a.rows() == a.cols(), "herm_eigenvalues: matrix not square");
  const lapack_int n = static_cast<lapack_int>(a.rows());
  CMatrix work = a;
  Eigen::VectorXd w(n);
  lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'N', 'L', n, work.data(),
                                   n, w.data());
  if (info != 0) throw std::runtime_error("herm_eigenvalues: zheevd failed");
  return w;
}

inline SVDResult svd(const CMatrix& a) {
  const lapack_int m = static_cast<lapack_int>(a.rows());
  const lapack_int n = static_cast<lapack_int>(a.cols());
  require(m > 0 && n > 0, "svd: empty matrix");
  const lapack_int k = std::min(m, n);
  CMatrix work = a;
  SVDResult out;
  out.u.resize(m, k);
  out.singular_values.resize(k);
  CMatrix vt(k, n);
  lapack_int info =
      LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'S', m, n, work.data(), m,
                     out.singular_values.data(), out.u.data(), m, vt.data(), k);
  if (info != 0) {
    // The divide-and-conquer driver can fail to converge on valid input;
    // retry with the slower but more robust QR-iteration driver.
    work = a;
    std::vector<double> superb(static_cast<std::size_t>(k));
    info = LAPACKE_zgesvd(LAPACK_COL_MAJOR, 'S', 'S', m, n, work.data(), m,
                          out.singular_values.data(), out.u.data(), m,
                          vt.data(), k, superb.data());
    if (info != 0)
      throw std::runtime_error("svd: zgesdd and zgesvd both failed");
  }
  out.v = vt.adjoint();
  return out;
}

// QR-derived unitary with the phase convention that makes the R diagonal
// positive-real; on full-rank square input this is the unique such Q.
inline CMatrix qr_unitary(const CMatrix& a) {
  require(a.rows() == a.cols(), "qr_unitary: matrix not square");
  Eigen::HouseholderQR<CMatrix> qr(a);
  CMatrix q = qr.householderQ();
  CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  const double scale = a.norm();
  for (Eigen::Index i = 0; i < a.cols(); ++i) {
    const cplx d = r(i, i);
    const double mag = std::abs(d);
    require(mag > 1e-13 * std::max(1.0, scale), "qr_unitary: rank deficient");
    q.col(i) *= d / mag;
  }
  return q;
}

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Haar-distributed unitary: Ginibre matrix (entries filled row by row,
// real part then imaginary part) followed by the phase-fixed QR above.
inline CMatrix haar_unitary(int n, Rng& rng) {
  CMatrix g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double re = rng.next_gaussian();
      const double im = rng.next_gaussian();
      g(i, j) = cplx(re, im) / std::sqrt(2.0);
    }
  return qr_unitary(g);
}

// exp(-i * h * t) for Hermitian h.
inline CMatrix unitary_from_hermitian(const CMatrix& h, double t) {
  HermEig e = herm_eig(h);
  CVector phases(e.eigenvalues.size());
  for (Eigen::Index i = 0; i < phases.size(); ++i)
    phases(i) = std::exp(cplx(0.0, -e.eigenvalues(i) * t));
  return e.eigenvectors * phases.asDiagonal() * e.eigenvectors.adjoint();
}

// Column-stacking vectorization.
inline CVector vec(const CMatrix& a) {
  return Eigen::Map<const CVector>(a.data(), a.size());
}

}  // namespace unravel
