#pragma once

// Autoregressive training on edge time series. The target is x(n) and the
// regressor drops the instantaneous column of X(n):
//
//   X_ar(n) = [Lu x(n-1), ..., Lu^M x(n-M), Ld x(n-1), ..., Ld^M x(n-M)],
//
// so h = [h_{1,u}, ..., h_{M,u}, h_{1,d}, ..., h_{M,d}]. The edge-Laplacian
// baseline zeroes the upper columns, which keeps its upper taps at exactly
// zero from h(0) = 0.
//
// Training runs over `epochs` passes of the training prefix: global step i
// (0-based, starting at M) uses snapshot d = i mod train as target and the
// wrapped history (i - m) mod train.

#include <span>
#include <vector>

#include "topolms/dataset.hpp"
#include "topolms/diffusion.hpp"

namespace topolms {

enum class ArVariant { kTopo, kEdgeLaplacian };

// past[m-1] = x(n-m), m = 1..M.
MatrixXd ar_regressors(std::span<const VectorXd> past, const HodgeOperators& ops, int order,
                       ArVariant variant);

// Training snapshot visited at global step i.
int epoch_sample_index(long step, int train);

struct ArTrainOptions {
  int order = 3;
  double mu = 1e-4;
  ArVariant variant = ArVariant::kTopo;
  int epochs = 1;
};

struct ArTrainResult {
  VectorXd h;                        // final taps (centralized)
  std::vector<VectorXd> agent_h;     // final taps per agent (distributed)
  std::vector<int> visited;          // training snapshot per step
  std::vector<double> train_error;   // ||x(d) - X_ar h||^2 before each update
  std::vector<double> test_error;    // ||x^(n) - x(n)|| / ||x(n)|| per test snapshot
  double mean_test_error = 0.0;
};

// Operators are unit_scaled(hodge_laplacians(ds.complex)).
ArTrainResult run_ar_training(const EdgeSeriesDataset& ds, const ArTrainOptions& options);

// Adapt-then-Combine with per-edge rows of X_ar; every agent adapts on its own
// edge, then combines with A. Test prediction on edge i uses h_i.
ArTrainResult run_distributed_ar(const EdgeSeriesDataset& ds, const ArTrainOptions& options,
                                 const CombinationMatrix& a);

}  // namespace topolms
