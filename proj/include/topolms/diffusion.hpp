#pragma once

// Distributed Topo-LMS: every edge is an agent holding a copy h_i of the
// filter taps and running Adapt-then-Combine in synchronous rounds,
//
//   w_i(n) = h_i(n) + mu_i d_i(n) z_i(n) (y_i(n) - z_i(n)^T h_i(n)),
//   h_i(n+1) = sum_{l in N_i} a_il w_l(n),
//
// where z_i(n) is row i of X(n). With stacked errors and A_net = A (x) I,
//   h~(n+1) = A_net (I - M C_z(n)) h~(n) - A_net M g(n),
// whose mean driver is B = A_net (I - M C_z), C_z = diag{p_i C_i}.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "topolms/linalg.hpp"
#include "topolms/signal_model.hpp"
#include "topolms/simplicial.hpp"

namespace topolms {

using Neighborhoods = std::vector<std::vector<int>>;

enum class CombinationRule { kUniform, kMetropolis };

struct CombinationMatrix {
  MatrixXd a;
  Neighborhoods neighborhoods;  // sorted, each containing its own index
};

// Edges sharing a vertex, plus the edge itself.
Neighborhoods lower_adjacency_neighborhoods(const SimplicialComplex2& c);

// Uniform: a_il = 1/|N_i|. Metropolis: a_il = 1/(1 + max(deg_i, deg_l)) for
// l != i in N_i (deg = |N| - 1), a_ii = 1 - sum of the others; symmetric when
// the neighborhoods are. Throws ValidationError for a neighborhood that is
// empty, lacks its self-loop or references an unknown agent.
CombinationMatrix build_combination(const Neighborhoods& neighborhoods, CombinationRule rule);

// Strong connectivity of the support digraph (i -> l when a_il > 0).
bool check_irreducible(const MatrixXd& a);

// CSV "i,l,a_il" with 1-based agent ids, one row per nonzero weight.
void write_combination_csv(std::ostream& out, const CombinationMatrix& a);
CombinationMatrix read_combination_csv(std::istream& in, int num_agents);

struct NetworkState {
  std::vector<VectorXd> h;
  VectorXd mu;
  long n = 0;
};

NetworkState initial_network_state(int num_agents, int width, const VectorXd& mu);

// One synchronous round; throws DivergenceError on a non-finite estimate.
void atc_update(NetworkState& net, const CombinationMatrix& a, const MatrixXd& regressors,
                const VectorXd& mask, const VectorXd& y);
NetworkState atc_step(const NetworkState& net, const CombinationMatrix& a,
                      const MatrixXd& regressors, const VectorXd& mask, const VectorXd& y);

struct DistTheoryReport {
  MatrixXd b;
  double rho_b = 0.0;
  std::vector<double> local_bounds;  // 2 / rho(C_z,i), +inf when C_z,i = 0
  bool irreducible = false;
  bool has_nonsingular = false;  // some C_z,k is positive definite
  bool steps_within_bounds = false;
  bool hypotheses_hold = false;
  bool stable = false;
  double msd_network = 0.0;    // Tr(A_net M G M A_net^T S), S - B^T S B = I
  double msd_per_agent = 0.0;  // msd_network / E
};

// cz[i] = E{d_i z_i z_i^T} = p_i C_i. Instability is reported, not thrown;
// msd fields are +inf when rho_b >= 1.
DistTheoryReport dist_theory(const CombinationMatrix& a, const std::vector<MatrixXd>& cz,
                             const VectorXd& noise_var, const VectorXd& mu);

// p_i C_i from edge_moment_matrices.
std::vector<MatrixXd> local_moments(const HodgeOperators& ops, const MatrixXd& signal_cov,
                                    const VectorXd& prob, int order);

struct DistributedOptions {
  VectorXd mu;
  int realizations = 30;
  int horizon = 1000;
  std::uint64_t seed = 0;
  int threads = 0;
  bool agent_traces = false;
};

struct DistributedResult {
  // (1/E) sum_i ||h° - h_i(n)||^2 averaged over realizations, n = 0..horizon.
  std::vector<double> msd;
  std::vector<double> tail_msd;  // per completed realization
  // agent_msd[i][n] = ||h° - h_i(n)||^2 averaged over realizations (when
  // requested).
  std::vector<std::vector<double>> agent_msd;
  std::vector<bool> diverged;
  int completed = 0;
};

DistributedResult run_distributed(const HodgeOperators& ops, const FilterCoeffs& h_true,
                                  const StreamConfig& cfg, const CombinationMatrix& a,
                                  const DistributedOptions& options);

}  // namespace topolms
