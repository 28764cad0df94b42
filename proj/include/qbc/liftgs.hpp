#pragma once

// Gram-Schmidt orthogonalization with dimensional lifting.
//
// Inputs v_1..v_m in C^n (not necessarily independent) are embedded as
// w_j = (v_j ; c_j) in C^{n + m_max} so that the w_j are mutually orthogonal
// with common norm r, while the coordinate projection onto the first n
// entries returns each v_j unchanged.
//
// Two constructions are provided:
//  * lift_batch: the symmetric form, c = r * sqrt(I - A^H A) with A = M / r.
//  * lift_append: the incremental form. The lifted parts are the columns of
//    the upper Cholesky factor R of r^2 I - G (G the Gram matrix), computed
//    one column at a time, so earlier blocks never change.
//
// All functions are templated on the scalar type; the ledger instantiates
// them with std::complex<double>.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "qbc/error.hpp"

namespace qbc::liftgs {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RealOf = typename Eigen::NumTraits<Scalar>::Real;

using Index = Eigen::Index;

inline constexpr double kPivotFloor = 1e-12;
inline constexpr double kOrthoTol = 1e-9;
inline constexpr double kPsdClamp = 1e-12;

struct LiftingParams {
  Index n = 0;      // base dimension
  Index m_max = 0;  // number of lifted coordinates (chain capacity)
  double r = 0.0;   // common norm of every lifted block

  Index lifted_dim() const { return n + m_max; }

  /// Radius that dominates the spectral norm of any m_max unit columns.
  static double default_radius(Index m_max) { return 2.0 * std::sqrt(static_cast<double>(m_max)); }

  static LiftingParams make(Index n, Index m_max, double r) {
    LiftingParams p{n, m_max, r};
    p.validate();
    return p;
  }

  static LiftingParams with_default_radius(Index n, Index m_max) {
    return make(n, m_max, default_radius(m_max));
  }

  void validate() const {
    if (n < 1) throw Error(Errc::InvalidParams, "base dimension must be positive");
    if (m_max < 1 || (m_max & (m_max - 1)) != 0)
      throw Error(Errc::InvalidParams, "m_max must be a power of two, got " + std::to_string(m_max));
    if (!(r > 0.0) || !std::isfinite(r)) throw Error(Errc::InvalidParams, "radius must be positive and finite");
  }
};

template <typename Scalar>
struct OrthoBlock {
  Vector<Scalar> full;  // dimension n + m_max
  Index index = 0;      // 1-based chain position
};

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw Error(Errc::NonFinite, std::string(what) + " has non-finite entries");
}

template <typename Scalar>
Index common_dim(const std::vector<Vector<Scalar>>& vs) {
  if (vs.empty()) return 0;
  const Index d = vs.front().size();
  for (const auto& v : vs)
    if (v.size() != d) throw Error(Errc::DimensionMismatch, "vectors do not share a dimension");
  return d;
}

template <typename Scalar>
Matrix<Scalar> as_columns(const std::vector<Vector<Scalar>>& vs) {
  const Index d = common_dim(vs);
  Matrix<Scalar> m(d, static_cast<Index>(vs.size()));
  for (std::size_t j = 0; j < vs.size(); ++j) m.col(static_cast<Index>(j)) = vs[j];
  return m;
}

}  // namespace detail

/// Classic Gram-Schmidt: w_{k+1} = (v_{k+1} - sum <w_i, v_{k+1}> w_i) / ||...||.
/// Throws LinearDependence when a residual falls below the pivot floor
/// (relative to the input norm).
template <typename Scalar>
std::vector<Vector<Scalar>> classic_gram_schmidt(const std::vector<Vector<Scalar>>& vs) {
  if (vs.empty()) throw Error(Errc::InvalidParams, "classic_gram_schmidt needs at least one vector");
  detail::common_dim(vs);
  std::vector<Vector<Scalar>> out;
  out.reserve(vs.size());
  for (std::size_t k = 0; k < vs.size(); ++k) {
    const auto& v = vs[k];
    detail::require_finite(v, "input vector");
    Vector<Scalar> residual = v;
    for (const auto& w : out) residual -= w.dot(v) * w;  // dot() conjugates the left operand
    const RealOf<Scalar> norm = residual.norm();
    const RealOf<Scalar> scale = std::max<RealOf<Scalar>>(RealOf<Scalar>(1), v.norm());
    if (!(norm > kPivotFloor * scale))
      throw Error(Errc::LinearDependence, "vector " + std::to_string(k) + " lies in the span of its predecessors");
    out.push_back(residual / norm);
  }
  return out;
}

/// G(i,j) = <v_i, v_j> (conjugate-linear in the first argument).
template <typename Scalar>
Matrix<Scalar> gram_matrix(const std::vector<Vector<Scalar>>& vs) {
  const Matrix<Scalar> m = detail::as_columns(vs);
  detail::require_finite(m, "gram input");
  return m.adjoint() * m;
}

template <typename Derived>
RealOf<typename Derived::Scalar> spectral_norm(const Eigen::MatrixBase<Derived>& m) {
  detail::require_finite(m, "matrix");
  if (m.size() == 0) return 0;
  using S = typename Derived::Scalar;
  Eigen::JacobiSVD<Matrix<S>> svd(m.derived());
  return svd.singularValues()(0);
}

/// Principal square root of a Hermitian positive semidefinite matrix.
template <typename Derived>
Matrix<typename Derived::Scalar> sqrt_psd(const Eigen::MatrixBase<Derived>& h) {
  using S = typename Derived::Scalar;
  using R = RealOf<S>;
  detail::require_finite(h, "matrix");
  if (h.rows() != h.cols()) throw Error(Errc::DimensionMismatch, "sqrt_psd needs a square matrix");
  const R scale = std::max<R>(R(1), h.cwiseAbs().maxCoeff());
  if ((h - h.adjoint()).cwiseAbs().maxCoeff() > kOrthoTol * scale)
    throw Error(Errc::NotPSD, "matrix is not Hermitian");

  Eigen::SelfAdjointEigenSolver<Matrix<S>> eig(h.derived());
  Vector<R> ev = eig.eigenvalues();
  for (Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -kPsdClamp) throw Error(Errc::NotPSD, "negative eigenvalue " + std::to_string(ev(i)));
    ev(i) = std::sqrt(std::max<R>(ev(i), R(0)));
  }
  const auto& u = eig.eigenvectors();
  Matrix<S> s = u * ev.template cast<S>().asDiagonal() * u.adjoint();
  return (s + s.adjoint()) / S(2);
}

/// Symmetric (batch) lifting. Input vectors are copied verbatim into the
/// disclosed coordinates; the lifted coordinates are r * sqrt(I - A^H A)
/// placed in the first m of the m_max lifted slots.
template <typename Scalar>
std::vector<OrthoBlock<Scalar>> lift_batch(const std::vector<Vector<Scalar>>& vs, const LiftingParams& params) {
  params.validate();
  const Index m = static_cast<Index>(vs.size());
  if (m == 0) return {};
  if (m > params.m_max)
    throw Error(Errc::CapacityExceeded, std::to_string(m) + " vectors exceed capacity " + std::to_string(params.m_max));
  if (detail::common_dim(vs) != params.n) throw Error(Errc::DimensionMismatch, "inputs must live in C^n");

  const Matrix<Scalar> mat = detail::as_columns(vs);
  const auto norm = spectral_norm(mat);
  if (!(params.r > norm))
    throw Error(Errc::RadiusTooSmall, "r = " + std::to_string(params.r) + " <= ||M||_2 = " + std::to_string(norm));

  const Matrix<Scalar> a = mat / Scalar(params.r);
  const Matrix<Scalar> b = sqrt_psd(Matrix<Scalar>(Matrix<Scalar>::Identity(m, m) - a.adjoint() * a));

  std::vector<OrthoBlock<Scalar>> out;
  out.reserve(vs.size());
  for (Index j = 0; j < m; ++j) {
    OrthoBlock<Scalar> blk;
    blk.full = Vector<Scalar>::Zero(params.lifted_dim());
    blk.full.head(params.n) = vs[static_cast<std::size_t>(j)];
    blk.full.segment(params.n, m) = Scalar(params.r) * b.col(j);
    blk.index = j + 1;
    out.push_back(std::move(blk));
  }
  return out;
}

/// State for the incremental lifting: appended vectors, their Gram matrix,
/// and the upper Cholesky factor chol with chol^H chol = r^2 I - gram.
/// Exclusively owned; lift_append is its only mutator.
template <typename Scalar>
class LiftingWorkspace {
 public:
  LiftingWorkspace() = default;
  explicit LiftingWorkspace(const LiftingParams& params)
      : params_(params),
        vectors_(Matrix<Scalar>::Zero(params.n, params.m_max)),
        gram_(Matrix<Scalar>::Zero(params.m_max, params.m_max)),
        chol_(Matrix<Scalar>::Zero(params.m_max, params.m_max)) {
    params.validate();
  }

  const LiftingParams& params() const { return params_; }
  Index count() const { return count_; }
  auto gram() const { return gram_.topLeftCorner(count_, count_); }
  auto chol() const { return chol_.topLeftCorner(count_, count_); }

  template <typename S>
  friend OrthoBlock<S> lift_append(LiftingWorkspace<S>& ws, const Vector<S>& v);

 private:
  LiftingParams params_{};
  Matrix<Scalar> vectors_;
  Matrix<Scalar> gram_;
  Matrix<Scalar> chol_;
  Index count_ = 0;
};

/// Appends one vector: extends gram and chol by one column and emits
/// (v ; chol column). Earlier blocks are untouched.
template <typename Scalar>
OrthoBlock<Scalar> lift_append(LiftingWorkspace<Scalar>& ws, const Vector<Scalar>& v) {
  using R = RealOf<Scalar>;
  const LiftingParams& p = ws.params_;
  if (v.size() != p.n) throw Error(Errc::DimensionMismatch, "appended vector must live in C^n");
  detail::require_finite(v, "appended vector");
  const Index k = ws.count_;
  if (k >= p.m_max) throw Error(Errc::CapacityExceeded, "chain capacity " + std::to_string(p.m_max) + " reached");

  const Vector<Scalar> g_col = ws.vectors_.leftCols(k).adjoint() * v;  // <v_j, v> for j < k
  const R g_kk = v.squaredNorm();

  // chol^H x = (r^2 I - G)(0:k, k) = -g_col, lower-triangular solve.
  Vector<Scalar> x(k);
  if (k > 0) {
    x = ws.chol_.topLeftCorner(k, k).template triangularView<Eigen::Upper>().adjoint().solve(
        Vector<Scalar>(-g_col));
  }
  const R pivot_sq = R(p.r * p.r) - g_kk - x.squaredNorm();
  if (!(pivot_sq > R(kPivotFloor * kPivotFloor)) || !(std::sqrt(pivot_sq) > R(kPivotFloor)))
    throw Error(Errc::PivotFailure, "Cholesky pivot collapsed at column " + std::to_string(k + 1) +
                                        "; radius too small for the accumulated Gram matrix");
  const R pivot = std::sqrt(pivot_sq);

  ws.vectors_.col(k) = v;
  ws.gram_.block(0, k, k, 1) = g_col;
  ws.gram_.block(k, 0, 1, k) = g_col.adjoint();
  ws.gram_(k, k) = Scalar(g_kk);
  ws.chol_.block(0, k, k, 1) = x;
  ws.chol_(k, k) = Scalar(pivot);
  ws.count_ = k + 1;

  OrthoBlock<Scalar> blk;
  blk.full = Vector<Scalar>::Zero(p.lifted_dim());
  blk.full.head(p.n) = v;
  blk.full.segment(p.n, k + 1) = ws.chol_.col(k).head(k + 1);
  blk.index = k + 1;
  return blk;
}

/// The partial isometry P: keeps the first n coordinates.
template <typename Scalar>
Vector<Scalar> project(const Vector<Scalar>& w, const LiftingParams& params) {
  if (w.size() != params.lifted_dim())
    throw Error(Errc::DimensionMismatch, "expected dimension " + std::to_string(params.lifted_dim()) + ", got " +
                                             std::to_string(w.size()));
  return w.head(params.n);
}

/// Lifted coordinates n+1 .. n+m_max of a block.
template <typename Scalar>
Vector<Scalar> lifted_part(const Vector<Scalar>& w, const LiftingParams& params) {
  if (w.size() != params.lifted_dim()) throw Error(Errc::DimensionMismatch, "block has wrong dimension");
  return w.tail(params.m_max);
}

/// Completes orthonormal columns to a unitary matrix. The given columns are
/// kept verbatim; canonical basis vectors are tried in index order and those
/// with residual below 1e-9 are skipped.
template <typename Scalar>
Matrix<Scalar> complete_to_orthogonal(const std::vector<Vector<Scalar>>& cols) {
  if (cols.empty()) throw Error(Errc::InvalidParams, "complete_to_orthogonal needs at least one column");
  const Index dim = detail::common_dim(cols);
  const Index c = static_cast<Index>(cols.size());
  if (c > dim) throw Error(Errc::NotOrthonormal, "more columns than the ambient dimension");

  Matrix<Scalar> q(dim, dim);
  for (Index j = 0; j < c; ++j) q.col(j) = cols[static_cast<std::size_t>(j)];
  detail::require_finite(q.leftCols(c), "columns");
  const Matrix<Scalar> residual = q.leftCols(c).adjoint() * q.leftCols(c) - Matrix<Scalar>::Identity(c, c);
  if (residual.cwiseAbs().maxCoeff() > kOrthoTol) throw Error(Errc::NotOrthonormal, "input columns are not orthonormal");

  Index filled = c;
  for (Index k = 0; k < dim && filled < dim; ++k) {
    Vector<Scalar> v = Vector<Scalar>::Unit(dim, k);
    for (int pass = 0; pass < 2; ++pass) v -= q.leftCols(filled) * (q.leftCols(filled).adjoint() * v);
    const auto len = v.norm();
    if (len < kOrthoTol) continue;
    q.col(filled++) = v / len;
  }
  if (filled < dim) throw Error(Errc::NotOrthonormal, "could not complete the basis");
  return q;
}

/// Largest magnitude of an off-diagonal inner product.
template <typename Scalar>
RealOf<Scalar> max_off_diagonal(const Matrix<Scalar>& g) {
  RealOf<Scalar> worst = 0;
  for (Index i = 0; i < g.rows(); ++i)
    for (Index j = 0; j < g.cols(); ++j)
      if (i != j) worst = std::max(worst, std::abs(g(i, j)));
  return worst;
}

}  // namespace qbc::liftgs
