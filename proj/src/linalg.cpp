#include "flowlab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flowlab {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

VecD add(std::span<const double> a, std::span<const double> b) {
  VecD r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

VecD sub(std::span<const double> a, std::span<const double> b) {
  VecD r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

VecD scale(std::span<const double> a, double s) {
  VecD r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] * s;
  return r;
}

void axpy(double s, std::span<const double> x, VecD& y) {
  for (size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

VecD matvec(const MatD& m, std::span<const double> x) {
  VecD r(m.rows, 0.0);
  for (int i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < m.cols; ++j) s += m(i, j) * x[j];
    r[i] = s;
  }
  return r;
}

MatD matmul(const MatD& a, const MatD& b) {
  MatD r(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      for (int j = 0; j < b.cols; ++j) r(i, j) += aik * b(k, j);
    }
  return r;
}

MatD transpose(const MatD& m) {
  MatD r(m.cols, m.rows);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) r(j, i) = m(i, j);
  return r;
}

MatD add(const MatD& a, const MatD& b) {
  MatD r = a;
  for (size_t i = 0; i < r.a.size(); ++i) r.a[i] += b.a[i];
  return r;
}

MatD scale(const MatD& m, double s) {
  MatD r = m;
  for (double& v : r.a) v *= s;
  return r;
}

void symmetrize(MatD& m) {
  for (int i = 0; i < m.rows; ++i)
    for (int j = i + 1; j < m.cols; ++j) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      m(i, j) = v;
      m(j, i) = v;
    }
}

double max_abs(const MatD& m) {
  double r = 0.0;
  for (double v : m.a) r = std::max(r, std::fabs(v));
  return r;
}

double max_abs_diff(const MatD& a, const MatD& b) {
  double r = 0.0;
  for (size_t i = 0; i < a.a.size(); ++i) r = std::max(r, std::fabs(a.a[i] - b.a[i]));
  return r;
}

std::optional<MatD> cholesky(const MatD& spd) {
  const int n = spd.rows;
  if (n != spd.cols) return std::nullopt;
  MatD l(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = spd(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (!(s > 0.0)) return std::nullopt;
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return l;
}

VecD cholesky_solve(const MatD& chol_lower, std::span<const double> b) {
  const int n = chol_lower.rows;
  VecD y(n);
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= chol_lower(i, k) * y[k];
    y[i] = s / chol_lower(i, i);
  }
  VecD x(n);
  for (int i = n - 1; i >= 0; --i) {
    double s = y[i];
    for (int k = i + 1; k < n; ++k) s -= chol_lower(k, i) * x[k];
    x[i] = s / chol_lower(i, i);
  }
  return x;
}

MatD spd_inverse(const MatD& spd) {
  auto l = cholesky(spd);
  if (!l) throw std::runtime_error("spd_inverse: matrix is not positive definite");
  const int n = spd.rows;
  MatD inv(n, n);
  VecD e(n, 0.0);
  for (int j = 0; j < n; ++j) {
    e[j] = 1.0;
    VecD col = cholesky_solve(*l, e);
    for (int i = 0; i < n; ++i) inv(i, j) = col[i];
    e[j] = 0.0;
  }
  symmetrize(inv);
  return inv;
}

double cholesky_logdet(const MatD& chol_lower) {
  double s = 0.0;
  for (int i = 0; i < chol_lower.rows; ++i) s += std::log(chol_lower(i, i));
  return 2.0 * s;
}

VecD symmetric_eigenvalues(const MatD& sym) {
  MatD m = sym;
  const int n = m.rows;
  // Cyclic Jacobi; plenty for the tiny matrices used here.
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += m(p, q) * m(p, q);
    if (off < 1e-30) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::fabs(m(p, q)) < 1e-300) continue;
        const double theta = (m(q, q) - m(p, p)) / (2.0 * m(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double mkp = m(k, p), mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (int k = 0; k < n; ++k) {
          const double mpk = m(p, k), mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
      }
    }
  }
  VecD ev(n);
  for (int i = 0; i < n; ++i) ev[i] = m(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

MatD psd_floor(const MatD& sym) {
  const int n = sym.rows;
  // Jacobi with accumulated rotations so the matrix can be rebuilt.
  MatD m = sym;
  MatD v = MatD::identity(n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += m(p, q) * m(p, q);
    if (off < 1e-30) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::fabs(m(p, q)) < 1e-300) continue;
        const double theta = (m(q, q) - m(p, p)) / (2.0 * m(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double mkp = m(k, p), mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (int k = 0; k < n; ++k) {
          const double mpk = m(p, k), mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  bool had_negative = false;
  VecD lam(n);
  for (int i = 0; i < n; ++i) {
    lam[i] = m(i, i);
    if (lam[i] < 0.0) {
      lam[i] = 0.0;
      had_negative = true;
    }
  }
  if (!had_negative) return sym;
  MatD out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += v(i, k) * lam[k] * v(j, k);
      out(i, j) = s;
    }
  symmetrize(out);
  return out;
}

}  // namespace flowlab
