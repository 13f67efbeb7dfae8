#pragma once

// Edge time series datasets: a complex plus an N x E matrix of snapshots,
// split into a training prefix and a test suffix.
//
// Series CSV: header "n,e_1,...,e_E", then one row "n,x_1,...,x_E" per
// snapshot with n = 0..N-1.

#include <cstdint>
#include <iosfwd>
#include <string>

#include "topolms/linalg.hpp"
#include "topolms/simplicial.hpp"

namespace topolms {

struct EdgeSeriesDataset {
  SimplicialComplex2 complex;
  MatrixXd series;  // N x E
  int train = 0;
  int test = 0;

  Eigen::Index length() const { return series.rows(); }
  VectorXd snapshot(Eigen::Index n) const { return series.row(n).transpose(); }
  // Throws ValidationError on a width or split mismatch.
  void validate() const;
};

void write_edge_series(std::ostream& out, const MatrixXd& series);
// num_edges < 0 accepts any width; otherwise the header must match.
MatrixXd read_edge_series(std::istream& in, int num_edges = -1);

void save_edge_series(const std::string& path, const MatrixXd& series);

// train < 0 keeps the last 38 snapshots (at least one) for testing.
EdgeSeriesDataset ingest_edge_series(const std::string& complex_path,
                                     const std::string& series_path, int train = -1);

// Autoregressive surrogate
//   x(n) = sum_{m=1}^{M} (a_m Su^m + b_m Sd^m) x(n-m) + w(n),
//   w(n) ~ N(0, innovation_std^2 I),
// with Su = Lu / lambda_max(Lu) and Sd = Ld / lambda_max(Ld), scaled by
// `amplitude` after a discarded burn-in. Every eigenmode is then a scalar AR
// process with gain at most sum |a_m| or sum |b_m|, so both sums must stay
// below one. The series lies in the model class of any other scaling of the
// Laplacians.
struct ArSurrogateOptions {
  VectorXd upper;  // a_1..a_M
  VectorXd lower;  // b_1..b_M
  double innovation_std = 1.0;
  double amplitude = 1.0;
  int snapshots = 288;
  int burn_in = 200;
  std::uint64_t seed = 0;
};

MatrixXd generate_ar_series(const HodgeOperators& ops, const ArSurrogateOptions& options);

// Connected complex with 17 vertices, 26 edges and exactly 5 triadic cliques,
// all filled.
SimplicialComplex2 dfn_scale_complex(std::uint64_t seed);

// dfn_scale_complex plus an AR series on its Laplacians, split
// 250 / 38.
EdgeSeriesDataset make_dfn_surrogate(std::uint64_t seed, const ArSurrogateOptions& options);

}  // namespace topolms
