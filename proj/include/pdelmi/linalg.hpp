#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace pdelmi {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using DenseMatrix = Matrix<double>;
using DenseVector = Vector<double>;

/// Symmetric matrix stored as its packed upper triangle (row-major).
template <typename Scalar>
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;
  explicit SymmetricMatrix(Eigen::Index dim) : dim_(dim), packed_(packed_size(dim)) { packed_.setZero(); }

  /// Symmetrizes `m` as (m + mᵀ)/2.
  template <typename Derived>
  static SymmetricMatrix from_dense(const Eigen::MatrixBase<Derived>& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("SymmetricMatrix: matrix is not square");
    SymmetricMatrix s(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = i; j < m.cols(); ++j) s.at(i, j) = (m(i, j) + m(j, i)) / Scalar(2);
    return s;
  }

  static SymmetricMatrix identity(Eigen::Index dim) {
    SymmetricMatrix s(dim);
    for (Eigen::Index i = 0; i < dim; ++i) s.at(i, i) = Scalar(1);
    return s;
  }

  static constexpr Eigen::Index packed_size(Eigen::Index dim) { return dim * (dim + 1) / 2; }

  Eigen::Index dim() const { return dim_; }
  const Vector<Scalar>& packed() const { return packed_; }

  Scalar operator()(Eigen::Index i, Eigen::Index j) const { return packed_[index(i, j)]; }
  Scalar& at(Eigen::Index i, Eigen::Index j) { return packed_[index(i, j)]; }

  Matrix<Scalar> dense() const {
    Matrix<Scalar> m(dim_, dim_);
    for (Eigen::Index i = 0; i < dim_; ++i)
      for (Eigen::Index j = i; j < dim_; ++j) m(i, j) = m(j, i) = (*this)(i, j);
    return m;
  }

  bool operator==(const SymmetricMatrix& other) const {
    return dim_ == other.dim_ && packed_ == other.packed_;
  }

 private:
  Eigen::Index index(Eigen::Index i, Eigen::Index j) const {
    if (i > j) std::swap(i, j);
    return i * dim_ - i * (i - 1) / 2 + (j - i);
  }

  Eigen::Index dim_ = 0;
  Vector<Scalar> packed_;
};

/// Kronecker product a ⊗ b.
template <typename DerivedA, typename DerivedB>
Matrix<typename DerivedA::Scalar> kron(const Eigen::MatrixBase<DerivedA>& a,
                                       const Eigen::MatrixBase<DerivedB>& b) {
  Matrix<typename DerivedA::Scalar> out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

template <typename Scalar>
struct SymEig {
  Vector<Scalar> values;   // ascending
  Matrix<Scalar> vectors;  // columns are orthonormal eigenvectors
};

class EigenNonConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
///
/// Only the upper triangle of `s` is read. Off-diagonal entries at or below
/// `tol`·‖s‖_F are left alone; iteration ends after a sweep with no rotation.
/// Exceeding `max_sweeps` throws EigenNonConvergence.
template <typename Derived>
SymEig<typename Derived::Scalar> sym_eig(const Eigen::MatrixBase<Derived>& s,
                                         typename Derived::Scalar tol = 1e-15, int max_sweeps = 100) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = s.rows();
  if (n < 1 || s.cols() != n) throw std::invalid_argument("sym_eig: expected a nonempty square matrix");

  Matrix<Scalar> a = s.template triangularView<Eigen::Upper>();
  a.template triangularView<Eigen::StrictlyLower>() = a.transpose();
  Matrix<Scalar> v = Matrix<Scalar>::Identity(n, n);

  const Scalar scale = a.norm();
  const Scalar threshold = tol * scale;

  for (int sweep = 0;; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Scalar apq = a(p, q);
        if (!(std::abs(apq) > threshold)) continue;
        rotated = true;
        const Scalar theta = (a(q, q) - a(p, p)) / (Scalar(2) * apq);
        const Scalar t = (theta >= 0 ? Scalar(1) : Scalar(-1)) /
                         (std::abs(theta) + std::sqrt(theta * theta + Scalar(1)));
        const Scalar c = Scalar(1) / std::sqrt(t * t + Scalar(1));
        const Scalar sn = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        a(p, q) = a(q, p) = Scalar(0);
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
    if (!rotated) break;
    if (sweep + 1 >= max_sweeps) throw EigenNonConvergence("sym_eig: Jacobi sweeps exceeded iteration cap");
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });

  SymEig<Scalar> out{Vector<Scalar>(n), Matrix<Scalar>(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values[k] = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    out.vectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
  return out;
}

template <typename Scalar>
SymEig<Scalar> sym_eig(const SymmetricMatrix<Scalar>& s) {
  return sym_eig(s.dense());
}

/// Smallest eigenvalue of a symmetric matrix (upper triangle read).
template <typename Derived>
typename Derived::Scalar lambda_min(const Eigen::MatrixBase<Derived>& s) {
  if (s.rows() == 1) return s(0, 0);
  return sym_eig(s).values[0];
}

/// True iff λ_min(s) > tol, decided by attempting an LDLᵀ factorization of
/// s − tol·I and requiring every pivot to be strictly positive.
template <typename Derived>
bool is_positive_definite(const Eigen::MatrixBase<Derived>& s, typename Derived::Scalar tol = 1e-9) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = s.rows();
  Matrix<Scalar> l = Matrix<Scalar>::Zero(n, n);
  Vector<Scalar> d(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Scalar dj = s(j, j) - tol;
    for (Eigen::Index k = 0; k < j; ++k) dj -= l(j, k) * l(j, k) * d[k];
    if (!(dj > Scalar(0))) return false;
    d[j] = dj;
    l(j, j) = Scalar(1);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      Scalar lij = s(j, i);  // upper triangle
      for (Eigen::Index k = 0; k < j; ++k) lij -= l(i, k) * l(j, k) * d[k];
      l(i, j) = lij / dj;
    }
  }
  return true;
}

template <typename Scalar>
bool is_positive_definite(const SymmetricMatrix<Scalar>& s, Scalar tol = 1e-9) {
  return is_positive_definite(s.dense(), tol);
}

/// Euclidean-induced norm √λ_max(aᵀa).
template <typename Derived>
typename Derived::Scalar operator_norm(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  if (a.size() == 0) return Scalar(0);
  if (a.rows() == 2 && a.cols() == 2) {
    // Closed form: largest singular value of a 2×2 matrix.
    const Scalar e = (a(0, 0) + a(1, 1)) / 2, f = (a(0, 0) - a(1, 1)) / 2;
    const Scalar g = (a(1, 0) + a(0, 1)) / 2, h = (a(1, 0) - a(0, 1)) / 2;
    return std::hypot(e, h) + std::hypot(f, g);
  }
  Matrix<Scalar> gram = a.rows() < a.cols() ? Matrix<Scalar>(a * a.transpose()) : Matrix<Scalar>(a.transpose() * a);
  const Scalar top = sym_eig(gram).values[gram.rows() - 1];
  return std::sqrt(std::max(top, Scalar(0)));
}

}  // namespace pdelmi
