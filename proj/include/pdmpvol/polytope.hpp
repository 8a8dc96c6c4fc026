#ifndef PDMPVOL_POLYTOPE_HPP
#define PDMPVOL_POLYTOPE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace pdmpvol {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

// Polytope {x : A x <= b} with the origin strictly inside.
//
// Construction precomputes the per-facet caches used by the sampler:
// squared row norms and the Gram matrix A A^T, whose column j is A a_j.
// Instances are immutable afterwards.
class HPolytope {
 public:
  HPolytope(Matrix A, Vector b) : A_(std::move(A)), b_(std::move(b)) {
    if (A_.rows() == 0 || A_.cols() == 0)
      throw std::invalid_argument("polytope needs at least one row and one column");
    if (A_.rows() != b_.size())
      throw std::invalid_argument("row count of A does not match length of b");
    for (Index i = 0; i < b_.size(); ++i) {
      if (!std::isfinite(b_[i]) || !A_.row(i).allFinite())
        throw std::invalid_argument("non-finite constraint in row " + std::to_string(i));
      if (!(b_[i] > 0.0))
        throw std::invalid_argument("origin not strictly interior (b[" + std::to_string(i) +
                                    "] <= 0)");
    }
    row_sq_norms_ = A_.rowwise().squaredNorm();
    for (Index i = 0; i < row_sq_norms_.size(); ++i)
      if (!(row_sq_norms_[i] > 0.0))
        throw std::invalid_argument("zero row " + std::to_string(i));
    row_norms_ = row_sq_norms_.cwiseSqrt();
    gram_ = A_ * A_.transpose();
  }

  Index dim() const noexcept { return A_.cols(); }
  Index nrows() const noexcept { return A_.rows(); }

  const Matrix& A() const noexcept { return A_; }
  const Vector& b() const noexcept { return b_; }
  const Vector& row_sq_norms() const noexcept { return row_sq_norms_; }
  const Vector& row_norms() const noexcept { return row_norms_; }
  // Column j equals A * a_j (symmetric, so also row j).
  const Matrix& gram_rows() const noexcept { return gram_; }

  double b_inf_norm() const noexcept { return b_.lpNorm<Eigen::Infinity>(); }

 private:
  Matrix A_;
  Vector b_;
  Vector row_sq_norms_;
  Vector row_norms_;
  Matrix gram_;
};

inline void check_dim(const HPolytope& P, Index n, const char* what) {
  if (n != P.dim())
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (expected " +
                                std::to_string(P.dim()) + ", got " + std::to_string(n) + ")");
}

inline bool contains(const HPolytope& P, const Vector& x, double tol = 0.0) {
  check_dim(P, x.size(), "contains");
  const Matrix& A = P.A();
  const Vector& b = P.b();
  for (Index i = 0; i < P.nrows(); ++i)
    if (A.row(i).dot(x) > b[i] + tol) return false;
  return true;
}

// Same test against a precomputed A x.
inline bool contains_cached(const HPolytope& P, const Vector& Ax, double tol = 0.0) {
  return ((Ax - P.b()).array() <= tol).all();
}

struct BoundaryHit {
  double tau = std::numeric_limits<double>::infinity();
  Index face = -1;

  bool finite() const noexcept { return face >= 0; }
};

// First facet crossed by x + t v, t >= 0, from the cached products A x, A v.
// Rows with (Av)_i <= 1e-14 |a_i| |v| are treated as not approached; times
// are clamped at 0 and ties go to the smallest index.
inline BoundaryHit boundary_hit(const HPolytope& P, const Vector& Ax, const Vector& Av,
                                double v_norm) {
  const Vector& b = P.b();
  const Vector& rn = P.row_norms();
  const double eps_scale = 1e-14 * v_norm;
  BoundaryHit hit;
  const Index k = P.nrows();
  for (Index i = 0; i < k; ++i) {
    const double av = Av[i];
    if (av > eps_scale * rn[i]) {
      double t = (b[i] - Ax[i]) / av;
      if (t < 0.0) t = 0.0;
      if (t < hit.tau) {
        hit.tau = t;
        hit.face = i;
      }
    }
  }
  return hit;
}

inline BoundaryHit boundary_hit(const HPolytope& P, const Vector& Ax, const Vector& Av) {
  if (Ax.size() != P.nrows() || Av.size() != P.nrows())
    throw std::invalid_argument("boundary_hit: cached products must have length k");
  // |v| is not known here; use the largest |Av_i|/|a_i| as a lower bound.
  double v_norm = 0.0;
  for (Index i = 0; i < P.nrows(); ++i)
    v_norm = std::max(v_norm, std::abs(Av[i]) / P.row_norms()[i]);
  return boundary_hit(P, Ax, Av, v_norm);
}

}  // namespace pdmpvol

#endif  // PDMPVOL_POLYTOPE_HPP
