#ifndef PDMPVOL_MODELS_HPP
#define PDMPVOL_MODELS_HPP

#include "pdmpvol/polytope.hpp"
#include "pdmpvol/random.hpp"

#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pdmpvol {

enum class ModelKind { cube, std_simplex, iso_simplex, file };

inline std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::cube: return "cube";
    case ModelKind::std_simplex: return "std-simplex";
    case ModelKind::iso_simplex: return "iso-simplex";
    case ModelKind::file: return "file";
  }
  return "unknown";
}

struct ModelInfo {
  ModelKind kind = ModelKind::file;
  std::optional<double> exact_log_volume;  // natural log
  std::optional<double> bounding_radius;   // max |x| over the polytope
};

struct Model {
  HPolytope polytope;
  ModelInfo info;
};

// [-1, 1]^d.
inline Model make_cube(Index d) {
  if (d < 1) throw std::invalid_argument("make_cube: d must be >= 1");
  Matrix A = Matrix::Zero(2 * d, d);
  for (Index i = 0; i < d; ++i) {
    A(2 * i, i) = 1.0;
    A(2 * i + 1, i) = -1.0;
  }
  Vector b = Vector::Ones(2 * d);
  return {HPolytope(std::move(A), std::move(b)),
          {ModelKind::cube, static_cast<double>(d) * std::log(2.0),
           std::sqrt(static_cast<double>(d))}};
}

// {sum x <= 1, x >= 0} translated so its centroid sits at the origin.
inline Model make_std_simplex(Index d) {
  if (d < 1) throw std::invalid_argument("make_std_simplex: d must be >= 1");
  const double dd = static_cast<double>(d);
  const double c = 1.0 / (dd + 1.0);
  Matrix A = Matrix::Zero(d + 1, d);
  Vector b(d + 1);
  for (Index i = 0; i < d; ++i) {
    A(i, i) = -1.0;
    b[i] = c;  // -(y_i + c) <= 0
  }
  A.row(d).setOnes();
  b[d] = 1.0 - dd * c;  // sum(y + c) <= 1
  const double radius = std::sqrt(dd * dd + dd - 1.0) / (dd + 1.0);
  return {HPolytope(std::move(A), std::move(b)),
          {ModelKind::std_simplex, -std::lgamma(dd + 1.0), radius}};
}

// Vertices of the regular simplex with circumradius 1 centred at the
// origin, one per column (d x (d+1)). Pairwise dot products are -1/d.
inline Matrix iso_simplex_vertices(Index d) {
  const double dd = static_cast<double>(d);
  const double scale = std::sqrt((dd + 1.0) / dd);
  // Coordinates in the orthonormal basis h_j = (1,..,1,-j,0,..)/sqrt(j(j+1))
  // of the hyperplane orthogonal to (1,..,1) in R^{d+1}.
  Matrix V = Matrix::Zero(d, d + 1);
  for (Index j = 1; j <= d; ++j) {
    const double jj = static_cast<double>(j);
    const double norm = std::sqrt(jj * (jj + 1.0));
    for (Index i = 0; i < j; ++i) V(j - 1, i) = scale / norm;
    V(j - 1, j) = -jj * scale / norm;
  }
  return V;
}

// log |det(v_1 - v_0, ..., v_d - v_0)| - log d!
inline double simplex_log_volume(const Matrix& vertices) {
  const Index d = vertices.rows();
  Eigen::MatrixXd E(d, d);
  for (Index j = 0; j < d; ++j) E.col(j) = vertices.col(j + 1) - vertices.col(0);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(E);
  const auto& U = lu.matrixLU();
  double log_det = 0.0;
  for (Index i = 0; i < d; ++i) log_det += std::log(std::abs(U(i, i)));
  return log_det - std::lgamma(static_cast<double>(d) + 1.0);
}

// Regular simplex; facet i passes through every vertex except v_i and is
// written as n_i . x <= 1.
inline Model make_iso_simplex(Index d) {
  if (d < 1) throw std::invalid_argument("make_iso_simplex: d must be >= 1");
  const Matrix V = iso_simplex_vertices(d);
  Matrix A(d + 1, d);
  Vector b = Vector::Ones(d + 1);
  Eigen::MatrixXd M(d, d);
  for (Index i = 0; i <= d; ++i) {
    Index r = 0;
    for (Index j = 0; j <= d; ++j)
      if (j != i) M.row(r++) = V.col(j).transpose();
    A.row(i) = M.partialPivLu().solve(Eigen::VectorXd::Ones(d)).transpose();
  }
  return {HPolytope(std::move(A), std::move(b)),
          {ModelKind::iso_simplex, simplex_log_volume(V), 1.0}};
}

// Lower estimate of max |x| over P from random and axis-aligned rays.
// Throws if some ray never leaves P.
inline double estimate_bounding_radius(const HPolytope& P, int n_rays = 4096,
                                       std::uint64_t seed = 0x5eedULL) {
  const Index d = P.dim();
  CounterRng rng(seed);
  std::normal_distribution<double> normal;
  double radius = 0.0;
  auto ray = [&](const Vector& u) {
    const Vector Au = P.A() * u;
    double t = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < P.nrows(); ++i)
      if (Au[i] > 0.0) t = std::min(t, P.b()[i] / Au[i]);
    if (!std::isfinite(t)) throw std::runtime_error("polytope appears unbounded");
    radius = std::max(radius, t);
  };
  Vector u(d);
  for (Index j = 0; j < d; ++j) {
    u.setZero();
    u[j] = 1.0;
    ray(u);
    u[j] = -1.0;
    ray(u);
  }
  for (int r = 0; r < n_rays; ++r) {
    for (Index j = 0; j < d; ++j) u[j] = normal(rng);
    u.normalize();
    ray(u);
  }
  return radius;
}

}  // namespace pdmpvol

#endif  // PDMPVOL_MODELS_HPP
