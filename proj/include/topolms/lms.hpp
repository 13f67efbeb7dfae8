#pragma once

// Centralized Topo-LMS and its mean / mean-square theory.
//
// Recursion:   h(n+1) = h(n) + mu X(n)^T D(n) (y(n) - X(n) h(n)).
// Error form:  h~(n+1) = Q(n) h~(n) - mu g(n),  h~ = h° - h,
//              Q(n) = I - mu X^T D X,  g(n) = X^T D v(n).
// Steady state: MSD = mu^2 vec(G)^T (I - F)^{-1} vec(I), F = Q^T (x) Q^T,
//              Q = I - mu C_X, which equals mu^2 Tr(G S) with S - Q S Q = I.

#include <cstdint>
#include <vector>

#include "topolms/linalg.hpp"
#include "topolms/signal_model.hpp"

namespace topolms {

struct LmsState {
  VectorXd h;
  double mu = 0.0;
  long n = 0;
};

// One Topo-LMS iteration; throws DivergenceError on a non-finite update.
LmsState lms_step(const LmsState& state, const MatrixXd& regressors, const VectorXd& mask,
                  const VectorXd& y);

// In-place variant used by the simulation loops.
void lms_update(LmsState& state, const MatrixXd& regressors, const VectorXd& mask,
                const VectorXd& y);

// 2 / lambda_max(C_X).
double max_stepsize(const MatrixXd& c_x);

struct SteadyState {
  double msd_exact = 0.0;
  double msd_first_order = 0.0;
};

// Throws StabilityError when rho(I - mu C_X) >= 1.
SteadyState steady_state_msd(const MatrixXd& c_x, const MatrixXd& g, double mu);

// mu^2 Tr(G (I - Q^2)^{-1}); equals msd_exact because Q is symmetric.
double msd_q_squared(const MatrixXd& c_x, const MatrixXd& g, double mu);

struct RateReport {
  double approx = 0.0;  // 1 - 2 mu lambda_min(C_X)
  double f_norm = 0.0;  // ||Q^T (x) Q^T||_2 = rho(Q)^2
  bool small_step = true;  // mu << 2 lambda_min / lambda_max^2
};

RateReport convergence_rate(const MatrixXd& c_x, double mu);

struct TheoryReport {
  double mu_max = 0.0;
  double rho_q = 0.0;
  double msd_exact = 0.0;
  double msd_first_order = 0.0;
  double alpha = 0.0;
  double f_norm = 0.0;
  bool stable = false;
};

// Never throws on instability: msd fields are +inf when rho_q >= 1.
TheoryReport theory_report(const MatrixXd& c_x, const MatrixXd& g, double mu);

struct ExperimentOptions {
  double mu = 1e-2;
  int realizations = 30;
  int horizon = 1000;  // LMS iterations
  std::uint64_t seed = 0;
  bool random_init = false;  // seeded N(0, 1) start instead of h(0) = 0
  int threads = 0;
};

struct ExperimentResult {
  // msd[n] = mean over realizations of ||h° - h(n)||^2, n = 0..horizon.
  std::vector<double> msd;
  std::vector<bool> diverged;  // per realization
  std::vector<double> tail_msd;  // per realization, last 10% of iterations
  int completed = 0;
};

// Realization r draws its stream from derive_seed(options.seed, r). The first
// M samples of each stream only fill the filter memory; iteration n uses
// sample n + M. Diverged realizations are flagged and excluded from msd.
ExperimentResult run_experiment(const HodgeOperators& ops, const FilterCoeffs& h_true,
                                const StreamConfig& cfg, const ExperimentOptions& options);

// Mean of the last `fraction` of the samples (at least one).
double tail_average(const std::vector<double>& values, double fraction = 0.1);

struct TailStats {
  double mean = 0.0;
  double half_width95 = 0.0;  // 1.96 * standard error over realizations
};

// Sample mean and normal-approximation 95% half-width.
TailStats mean_confidence(const std::vector<double>& samples);

double to_db(double value);

}  // namespace topolms
