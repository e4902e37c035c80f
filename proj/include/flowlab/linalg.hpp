#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace flowlab {

using VecD = std::vector<double>;

/// Dense row-major matrix. Small dimensions throughout (d <= 3 is typical),
/// so everything here is plain loops, no blocking.
struct MatD {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  MatD() = default;
  MatD(int r, int c, double fill = 0.0) : rows(r), cols(c), a(static_cast<size_t>(r) * c, fill) {}

  double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

  static MatD identity(int n) {
    MatD m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
VecD add(std::span<const double> a, std::span<const double> b);
VecD sub(std::span<const double> a, std::span<const double> b);
VecD scale(std::span<const double> a, double s);
void axpy(double s, std::span<const double> x, VecD& y);  // y += s*x

VecD matvec(const MatD& m, std::span<const double> x);
MatD matmul(const MatD& a, const MatD& b);
MatD transpose(const MatD& m);
MatD add(const MatD& a, const MatD& b);
MatD scale(const MatD& m, double s);
void symmetrize(MatD& m);  // m <- (m + m^T)/2

double max_abs(const MatD& m);
double max_abs_diff(const MatD& a, const MatD& b);

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix,
/// or nullopt if the factorization breaks down (not SPD).
std::optional<MatD> cholesky(const MatD& spd);

/// Solves L y = b then L^T x = y for a lower-triangular Cholesky factor.
VecD cholesky_solve(const MatD& chol_lower, std::span<const double> b);

/// Inverse via Cholesky; input must be SPD.
MatD spd_inverse(const MatD& spd);

/// log det from a Cholesky factor: 2 * sum log L_ii.
double cholesky_logdet(const MatD& chol_lower);

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
VecD symmetric_eigenvalues(const MatD& sym);

/// Clamps negative eigenvalues of a symmetric matrix to zero and rebuilds it.
MatD psd_floor(const MatD& sym);

}  // namespace flowlab
