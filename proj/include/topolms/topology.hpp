#pragma once

// Joint adaptive estimation of filter taps h and triangle indicators t.
//
// The upper Laplacian is parametrized over the 3-cliques of a known
// 1-skeleton, Lu(t) = sum_j t_j b_j b_j^T, and the pair (h, t) follows
//
//   h(n+1) = h(n) + mu1 X(t(n), n)^T D(n) (y(n) - X(t(n), n) h(n)),
//   t(n+1) = H[ clip_[0,1]( t(n) - mu2 grad_t J(h(n+1), t(n)) ) ],
//
// where J = ||y(n) - D(n) X(t, n) h||^2 and H is the double hard-threshold
// prox. With Lu(t) = sum_j t_j b_j b_j^T / s (s the operator scale),
//
//   dJ/dt_j = -(2/s) sum_{m=1}^{M} h_{m,u} sum_{l=0}^{m-1}
//                 (b_j^T Lu^l D r) (b_j^T Lu^{m-1-l} x(n-m)),
//
// with r = y - D X h, from the product rule for d(Lu^m)/dt_j.

#include <cstdint>
#include <span>
#include <vector>

#include "topolms/linalg.hpp"
#include "topolms/signal_model.hpp"
#include "topolms/simplicial.hpp"

namespace topolms {

MatrixXd param_upper_laplacian(const VectorXd& t, const std::vector<CliqueCandidate>& candidates);

// Throws ValidationError unless 1 - sqrt(2 lambda1) > sqrt(2 lambda0) and
// both weights are non-negative.
void validate_thresholds(double lambda0, double lambda1);

// Componentwise: clip to [0,1]; 0 if v <= sqrt(2 lambda0); 1 if
// v >= 1 - sqrt(2 lambda1); v otherwise.
double prox_hard_threshold(double v, double lambda0, double lambda1);
VectorXd prox_hard_threshold(const VectorXd& v, double lambda0, double lambda1);

// 0.5 (u - v)^2 + lambda0 [u != 0] + lambda1 [u != 1].
double prox_objective(double u, double v, double lambda0, double lambda1);

// Known 1-skeleton, candidate cliques and the fixed operator scale s.
struct TopologyModel {
  int order = 0;
  std::vector<CliqueCandidate> candidates;
  MatrixXd incidence;  // E x T_max, columns b_j
  MatrixXd lower;      // Ld / s
  double scale = 1.0;

  Eigen::Index num_edges() const { return lower.rows(); }
  Eigen::Index num_candidates() const { return incidence.cols(); }

  // Lu(t) / s.
  MatrixXd upper(const VectorXd& t) const;
  // Operators of the complex selected by t (Laplacians only, no eigenbasis).
  HodgeOperators operators(const VectorXd& t) const;
  MatrixXd regressors(const VectorXd& t, std::span<const VectorXd> history) const;
};

// s defaults to lambda_max(L1) of the complex with every clique filled, which
// depends only on the 1-skeleton.
TopologyModel make_topology_model(const SimplicialComplex2& skeleton, int order);

// Indicator vector of the triangles of `c` among the candidates of `model`.
VectorXd indicators_of(const TopologyModel& model, const SimplicialComplex2& c);

double instantaneous_cost(const TopologyModel& model, const VectorXd& h, const VectorXd& t,
                          std::span<const VectorXd> history, const VectorXd& mask,
                          const VectorXd& y);

VectorXd grad_t(const TopologyModel& model, const VectorXd& h, const VectorXd& t,
                std::span<const VectorXd> history, const VectorXd& mask, const VectorXd& y);

struct TopologyState {
  VectorXd h;
  VectorXd t;
  double mu1 = 1e-2;
  double mu2 = 1e-2;
  double lambda0 = 0.1;
  double lambda1 = 0.1;
  long n = 0;
};

// Zero taps and t = 0.5 on every candidate.
TopologyState initial_topology_state(const TopologyModel& model, double mu1, double mu2,
                                     double lambda0, double lambda1);

// Throws DivergenceError on a non-finite iterate.
void infer_update(TopologyState& state, const TopologyModel& model,
                  std::span<const VectorXd> history, const VectorXd& mask, const VectorXd& y);
TopologyState infer_step(const TopologyState& state, const TopologyModel& model,
                         std::span<const VectorXd> history, const VectorXd& mask,
                         const VectorXd& y);

struct TopologyChange {
  long at = 0;       // first sample generated on the new complex
  VectorXd t_true;   // indicators after the change
};

struct TopologyExperiment {
  FilterCoeffs h_true;
  VectorXd t_true;  // indicators before any change
  std::vector<TopologyChange> changes;
  MatrixXd signal_cov;
  VectorXd noise_var;
  VectorXd sample_prob;
  double mu1 = 1e-2;
  double mu2 = 1e-2;
  double lambda0 = 0.1;
  double lambda1 = 0.1;
  int horizon = 5000;  // iterations
  int realizations = 30;
  std::uint64_t seed = 0;
  int threads = 0;
  int record_stride = 1;
};

struct TopologyRun {
  std::vector<double> msd_h;   // ||h° - h(n)||^2 at recorded iterations
  std::vector<double> err_t;   // ||t° - t(n)||^2
  // Per phase (before the first change, between changes, after the last):
  // first iteration from which t(n) = t° for the rest of the phase, or -1.
  std::vector<long> recovered_at;
  VectorXd t_final;
  double tail_msd_h = 0.0;  // last 10% of iterations
  bool diverged = false;
};

struct TopologyResult {
  std::vector<long> iterations;  // recorded iteration indices
  std::vector<double> msd_h;     // averages over non-diverged runs
  std::vector<double> err_t;
  std::vector<TopologyRun> runs;
};

TopologyResult run_topology_experiment(const TopologyModel& model, const TopologyExperiment& exp);

}  // namespace topolms
