#pragma once

// Sampling-probability design: minimize 1^T p subject to
//   (a) 0 <= p <= p_max,
//   (b) lambda_min(C_X(p)) >= (1 - alpha) / (2 mu),
//   (c) Tr(G(p)) <= (2 gamma / mu) lambda_min(C_X(p)),
// with C_X(p) = sum_i p_i C_i and G(p) = sum_i p_i sigma_i^2 C_i both linear
// in p. Constraint (c) is kept in this convex form (linear minus concave).

#include <string>
#include <vector>

#include "topolms/linalg.hpp"

namespace topolms {

struct SamplingProblem {
  double mu = 1e-2;
  double alpha = 0.98;
  double gamma = 1e-7;
  VectorXd p_max;
  std::vector<MatrixXd> edge_moments;  // C_i
  VectorXd noise_var;                  // sigma_i^2

  void validate() const;
  Eigen::Index num_edges() const { return p_max.size(); }
  double rate_bound() const { return (1.0 - alpha) / (2.0 * mu); }
  double msd_factor() const { return 2.0 * gamma / mu; }
  MatrixXd c_x(const VectorXd& p) const;
  MatrixXd g(const VectorXd& p) const;
};

struct ConstraintReport {
  double rate_slack = 0.0;   // lambda_min(C_X(p)) - (1-alpha)/(2mu)
  double msd_slack = 0.0;    // (2gamma/mu) lambda_min(C_X(p)) - Tr(G(p))
  double lower_slack = 0.0;  // min_i p_i
  double upper_slack = 0.0;  // min_i (p_max,i - p_i)
  double lambda_min = 0.0;

  double worst() const;
  bool feasible(double tol) const { return worst() >= -tol; }
};

ConstraintReport check_constraints(const VectorXd& p, const SamplingProblem& prob);

enum class SamplingMethod { kBarrier, kSubgradient };

struct SamplingOptions {
  SamplingMethod method = SamplingMethod::kBarrier;
  double tol = 1e-9;   // barrier: duality-gap bound; subgradient: residual
  int max_iter = 200;  // barrier: Newton steps per centering; subgradient: total
  // Entries below this are zeroed after solving when the result stays
  // feasible, so the reported support is exact.
  double support_tol = 1e-7;
  double subgradient_step = 0.05;  // c in the c / sqrt(k) schedule
};

struct SamplingSolution {
  VectorXd p_star;
  double objective = 0.0;
  ConstraintReport slacks;
  int iterations = 0;
  bool converged = false;
  // Barrier: m / t at exit (bound on the objective gap). Subgradient: the
  // final penalty residual.
  double certificate = 0.0;
  // Constraint (c) fails at p_max; feasibility was then established (or
  // refuted) by the phase-I search rather than by the p_max test.
  bool heuristic_feasibility = false;
  std::vector<int> support() const;
};

// Throws InfeasibleError if (b) fails at p_max, or if the phase-I search
// proves there is no strictly feasible point.
SamplingSolution solve_sampling(const SamplingProblem& prob, const SamplingOptions& options = {});

std::string sampling_problem_to_json(const SamplingProblem& prob);
SamplingProblem sampling_problem_from_json(const std::string& text);
std::string sampling_solution_to_json(const SamplingSolution& sol);

}  // namespace topolms
