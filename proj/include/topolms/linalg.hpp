#pragma once

#include <Eigen/Dense>

namespace topolms {

using Eigen::MatrixXd;
using Eigen::MatrixXi;
using Eigen::VectorXd;

double lambda_min_sym(const MatrixXd& a);
double lambda_max_sym(const MatrixXd& a);

// Largest eigenvalue modulus of a general square matrix.
double spectral_radius(const MatrixXd& a);

// Throws DimensionError unless `m` is rows x cols.
void require_shape(const MatrixXd& m, Eigen::Index rows, Eigen::Index cols, const char* what);
void require_size(const VectorXd& v, Eigen::Index size, const char* what);

bool all_finite(const VectorXd& v);

// Solves the discrete Stein equation S - A^T S A = R, i.e. returns
// S = sum_k (A^T)^k R A^k, which is the matrix form of
// (I - A^T (x) A^T)^{-1} vec(R). Requires rho(A) < 1.
//
// When A is n x n with n <= materialize_limit the n^2 x n^2 Kronecker
// operator is formed and solved with LU. Otherwise a symmetric A is handled
// through its eigendecomposition and a general A through squaring
// (Smith's doubling).
MatrixXd stein_solve(const MatrixXd& a, const MatrixXd& r, Eigen::Index materialize_limit);

// Symmetric square root of a PSD matrix; throws ValidationError if the
// matrix has an eigenvalue below -tol * max(1, |lambda_max|).
MatrixXd psd_sqrt(const MatrixXd& a, double tol = 1e-10);

}  // namespace topolms
