#include "topolms/linalg.hpp"

#include <cmath>
#include <string>

#include "topolms/error.hpp"

namespace topolms {

double lambda_min_sym(const MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double lambda_max_sym(const MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(a.rows() - 1);
}

double spectral_radius(const MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<MatrixXd> es(a, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

void require_shape(const MatrixXd& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                         std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
  }
}

void require_size(const VectorXd& v, Eigen::Index size, const char* what) {
  if (v.size() != size) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(size) +
                         ", got " + std::to_string(v.size()));
  }
}

bool all_finite(const VectorXd& v) { return v.allFinite(); }

namespace {

MatrixXd stein_materialized(const MatrixXd& a, const MatrixXd& r) {
  const Eigen::Index n = a.rows();
  const Eigen::Index nn = n * n;
  // vec(A^T S A) = (A^T (x) A^T) vec(S)
  MatrixXd f(nn, nn);
  const MatrixXd at = a.transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      f.block(i * n, j * n, n, n) = at(i, j) * at;
    }
  }
  MatrixXd lhs = MatrixXd::Identity(nn, nn) - f;
  const VectorXd rhs = Eigen::Map<const VectorXd>(r.data(), nn);
  VectorXd s = lhs.partialPivLu().solve(rhs);
  return Eigen::Map<MatrixXd>(s.data(), n, n);
}

MatrixXd stein_symmetric(const MatrixXd& a, const MatrixXd& r) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a);
  const MatrixXd& v = es.eigenvectors();
  const VectorXd& q = es.eigenvalues();
  MatrixXd rt = v.transpose() * r * v;
  for (Eigen::Index i = 0; i < rt.rows(); ++i) {
    for (Eigen::Index j = 0; j < rt.cols(); ++j) rt(i, j) /= 1.0 - q(i) * q(j);
  }
  return v * rt * v.transpose();
}

MatrixXd stein_doubling(const MatrixXd& a, const MatrixXd& r) {
  MatrixXd s = r;
  MatrixXd power = a;
  for (int iter = 0; iter < 200; ++iter) {
    const MatrixXd increment = power.transpose() * s * power;
    s += increment;
    if (increment.norm() <= 1e-17 * s.norm()) return s;
    power = power * power;
    if (!power.allFinite()) break;
  }
  if (!s.allFinite()) throw StabilityError("stein_solve: iteration diverged (rho(A) >= 1?)");
  return s;
}

}  // namespace

MatrixXd stein_solve(const MatrixXd& a, const MatrixXd& r, Eigen::Index materialize_limit) {
  require_shape(r, a.rows(), a.cols(), "stein_solve rhs");
  if (a.rows() == 0) return r;
  const double rho = spectral_radius(a);
  if (!(rho < 1.0)) {
    throw StabilityError("stein_solve: spectral radius " + std::to_string(rho) + " >= 1");
  }
  if (a.rows() <= materialize_limit) return stein_materialized(a, r);
  if ((a - a.transpose()).norm() <= 1e-14 * (1.0 + a.norm())) return stein_symmetric(a, r);
  return stein_doubling(a, r);
}

MatrixXd psd_sqrt(const MatrixXd& a, double tol) {
  if (a.rows() != a.cols()) throw DimensionError("psd_sqrt: matrix is not square");
  if (a.size() == 0) return a;
  if ((a - a.transpose()).norm() > 1e-10 * (1.0 + a.norm())) {
    throw ValidationError("psd_sqrt: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a);
  const VectorXd& lam = es.eigenvalues();
  const double scale = std::max(1.0, std::abs(lam(lam.size() - 1)));
  if (lam(0) < -tol * scale) {
    throw ValidationError("psd_sqrt: matrix is not positive semi-definite (min eigenvalue " +
                          std::to_string(lam(0)) + ")");
  }
  const VectorXd root = lam.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace topolms
