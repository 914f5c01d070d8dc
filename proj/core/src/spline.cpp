#include "openscr/spline.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

namespace openscr {
namespace {

constexpr double kEigenTolerance = 1e-10;

struct KernelEigen {
  Matrix unique_points;  // standardized
  std::vector<int> row_to_unique;
  Matrix vectors;        // columns sorted by |eigenvalue| descending
  Vector values;
};

double kernel(int dim, double r) {
  if (r <= 0.0) return 0.0;
  if (dim == 1) return r * r * r / 12.0;
  return r * r * std::log(r) / (8.0 * std::numbers::pi);
}

std::shared_ptr<const KernelEigen> compute_eigen(const Matrix& points) {
  const Eigen::Index n = points.rows();
  const Eigen::Index d = points.cols();

  // Unique rows in lexicographic order.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < d; ++c)
      if (points(a, c) != points(b, c)) return points(a, c) < points(b, c);
    return false;
  };
  std::stable_sort(order.begin(), order.end(), less);
  auto out = std::make_shared<KernelEigen>();
  out->row_to_unique.assign(static_cast<std::size_t>(n), 0);
  std::vector<Eigen::Index> reps;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i == 0 || less(order[i - 1], order[i])) reps.push_back(order[i]);
    out->row_to_unique[static_cast<std::size_t>(order[i])] = static_cast<int>(reps.size()) - 1;
  }
  const auto nu = static_cast<Eigen::Index>(reps.size());
  Matrix u(nu, d);
  for (Eigen::Index i = 0; i < nu; ++i) u.row(i) = points.row(reps[static_cast<std::size_t>(i)]);

  // Center and rescale isotropically.
  const Eigen::RowVectorXd centroid = u.colwise().mean();
  u.rowwise() -= centroid;
  const double scale = std::sqrt(u.squaredNorm() / static_cast<double>(nu));
  if (scale > 0.0) u /= scale;
  out->unique_points = u;

  Matrix e(nu, nu);
  for (Eigen::Index i = 0; i < nu; ++i) {
    e(i, i) = 0.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double r = (u.row(i) - u.row(j)).norm();
      e(i, j) = e(j, i) = kernel(static_cast<int>(d), r);
    }
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(e);
  if (solver.info() != Eigen::Success) throw NumericalError("thin plate kernel eigendecomposition failed");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(nu));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  const Vector& ev = solver.eigenvalues();
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return std::abs(ev(a)) > std::abs(ev(b)); });
  out->values.resize(nu);
  out->vectors.resize(nu, nu);
  for (Eigen::Index c = 0; c < nu; ++c) {
    const auto src = idx[static_cast<std::size_t>(c)];
    out->values(c) = ev(src);
    Vector v = solver.eigenvectors().col(src);
    // Fix the sign so the basis does not depend on solver conventions.
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    out->vectors.col(c) = v;
  }
  return out;
}

// Eigendecompositions are reused across df values and model refits.
std::shared_ptr<const KernelEigen> cached_eigen(const Matrix& points) {
  static std::mutex mutex;
  static std::map<std::pair<Eigen::Index, Eigen::Index>, std::vector<std::pair<Matrix, std::shared_ptr<const KernelEigen>>>>
      cache;
  const auto key = std::pair{points.rows(), points.cols()};
  {
    std::lock_guard lock(mutex);
    for (const auto& [pts, eig] : cache[key])
      if (pts == points) return eig;
  }
  auto eig = compute_eigen(points);
  std::lock_guard lock(mutex);
  auto& bucket = cache[key];
  if (bucket.size() > 32) bucket.erase(bucket.begin());
  bucket.emplace_back(points, eig);
  return eig;
}

}  // namespace

Matrix SplineBasis::centered() const {
  Matrix out = columns.rightCols(columns.cols() - 1);
  out.rowwise() -= out.colwise().mean();
  return out;
}

SplineBasis tprs_basis(const Matrix& points, int df, std::vector<std::string> variables) {
  const auto d = static_cast<int>(points.cols());
  if (d != 1 && d != 2) throw ValidationError(fmt::format("thin plate spline needs 1 or 2 variables, got {}", d));
  if (!points.allFinite()) throw ValidationError("thin plate spline points must be finite");
  const int m = d + 1;
  if (df < m) {
    throw ValidationError(fmt::format("smooth df = {} is below the null-space dimension {}", df, m));
  }
  const auto eig = cached_eigen(points);
  const auto nu = static_cast<int>(eig->unique_points.rows());
  if (df > nu) {
    throw ValidationError(fmt::format("smooth df = {} exceeds the {} distinct covariate values", df, nu));
  }

  Matrix t(nu, m);
  t.col(0).setOnes();
  t.rightCols(d) = eig->unique_points;

  const int k = df - m;
  Matrix unique_cols(nu, df);
  unique_cols.leftCols(m) = t;
  if (k > 0) {
    const double largest = std::abs(eig->values(0));
    if (!(std::abs(eig->values(df - 1)) > kEigenTolerance * largest)) {
      throw ValidationError(fmt::format("thin plate kernel is rank deficient below df = {}", df));
    }
    const Matrix uk = eig->vectors.leftCols(df);
    // Reparametrize delta = Z * delta' so that T' U_k delta = 0.
    const Matrix c = (t.transpose() * uk).transpose();  // df x m
    Eigen::HouseholderQR<Matrix> qr(c);
    const Matrix q = qr.householderQ() * Matrix::Identity(df, df);
    const Matrix z = q.rightCols(df - m);
    Matrix penalized = uk * eig->values.head(df).asDiagonal() * z;
    // Unit RMS columns keep the working parameters on comparable scales.
    for (Eigen::Index c2 = 0; c2 < penalized.cols(); ++c2) {
      const double rms = std::sqrt(penalized.col(c2).squaredNorm() / nu);
      if (rms > 0.0) penalized.col(c2) /= rms;
    }
    unique_cols.rightCols(k) = penalized;
  }

  SplineBasis basis;
  basis.dim = d;
  basis.df = df;
  basis.variables = std::move(variables);
  basis.columns.resize(points.rows(), df);
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    basis.columns.row(i) = unique_cols.row(eig->row_to_unique[static_cast<std::size_t>(i)]);
  return basis;
}

}  // namespace openscr
