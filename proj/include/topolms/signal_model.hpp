#pragma once

// Streaming edge signals filtered by a simplicial FIR filter, observed
// through random per-edge sampling masks:
//
//   y(n) = D(n) [ sum_{m=0}^{M} h_{m,u} Lu^m x(n-m)
//               + sum_{m=1}^{M} h_{m,d} Ld^m x(n-m) + v(n) ],   n >= M,
//
// with Lu^0 = I. The regressor matrix X(n) collects the 2M+1 aggregated
// columns [x(n), Lu x(n-1), ..., Lu^M x(n-M), Ld x(n-1), ..., Ld^M x(n-M)].

#include <cstdint>
#include <iosfwd>
#include <string>
#include <span>
#include <vector>

#include "topolms/linalg.hpp"
#include "topolms/rng.hpp"
#include "topolms/simplicial.hpp"

namespace topolms {

// Filter taps h = [h_{0,u}, ..., h_{M,u}, h_{1,d}, ..., h_{M,d}].
struct FilterCoeffs {
  int order = 0;   // M
  VectorXd upper;  // M+1 taps
  VectorXd lower;  // M taps

  static FilterCoeffs from_flat(const VectorXd& flat, int order);
  static FilterCoeffs zeros(int order);
  VectorXd flat() const;
};

constexpr int regressor_width(int order) { return 2 * order + 1; }

// Lag of regressor column `col` (0 for x(n), m for the two columns of order m).
int regressor_lag(int col, int order);

struct StreamConfig {
  MatrixXd signal_cov;    // C_x, E x E, temporally white
  VectorXd noise_var;     // diag(C_v)
  VectorXd sample_prob;   // p
  int horizon = 0;        // N samples x(0..N-1)
  std::uint64_t seed = 0;

  void validate(Eigen::Index num_edges) const;
};

struct StreamBatch {
  int order = 0;
  std::vector<VectorXd> x;  // x(n), n = 0..N-1
  std::vector<VectorXd> d;  // 0/1 masks
  std::vector<VectorXd> y;  // zero for n < order
};

struct MomentSet {
  MatrixXd c_x;   // C_X = E{X^T D X}
  MatrixXd g;     // G = E{X^T C_v D X}
  VectorXd c_xy;  // E{X^T D y}
};

// history[m] = x(n-m), m = 0..M.
MatrixXd build_regressors(std::span<const VectorXd> history, const HodgeOperators& ops, int order);
MatrixXd build_regressors(std::span<const VectorXd> history, const MatrixXd& upper,
                          const MatrixXd& lower, int order);

// z_i(n), row i of X(n).
VectorXd local_regressor(int edge, const MatrixXd& regressors);

VectorXd sample_mask(const VectorXd& prob, Rng& rng);

// Incremental generator. Each call to next() draws x(n), the mask and the
// noise from independent sub-streams of cfg.seed and returns the regressor
// matrix maintained by Lu^m x(n-m) = Lu (Lu^{m-1} x(n-1-(m-1))).
class StreamGenerator {
 public:
  struct Sample {
    long n = -1;
    VectorXd x;
    VectorXd d;
    VectorXd y;        // zero until n >= M
    MatrixXd regressors;  // X(n); columns with missing history are zero
  };

  StreamGenerator(const FilterCoeffs& h, const HodgeOperators& ops, const StreamConfig& cfg);

  const Sample& next();
  const Sample& current() const { return sample_; }
  int order() const { return h_.order; }

  // x(n-m) for m = 0..M (zero before the stream starts).
  const std::vector<VectorXd>& history() const { return history_; }

  // Switches the generating complex from the next sample on; the regressor
  // cache is rebuilt from the raw signal history.
  void set_operators(const HodgeOperators& ops);

 private:
  FilterCoeffs h_;
  VectorXd h_flat_;
  MatrixXd upper_;
  MatrixXd lower_;
  std::vector<VectorXd> history_;
  MatrixXd signal_root_;
  VectorXd noise_std_;
  VectorXd prob_;
  Rng signal_rng_;
  Rng noise_rng_;
  Rng mask_rng_;
  Sample sample_;
};

StreamBatch generate_stream(const FilterCoeffs& h, const HodgeOperators& ops,
                            const StreamConfig& cfg);

// Per-edge regressor moments C_i = E{z_i z_i^T} (unsampled) under the white
// signal law: [C_i]_{ab} = [A_a C_x A_b^T]_{ii} when columns a, b share a lag,
// zero otherwise, where A_a is I, Lu^m or Ld^m. Then
//   C_X(p) = sum_i p_i C_i,   G(p) = sum_i p_i sigma_i^2 C_i.
std::vector<MatrixXd> edge_moment_matrices(const HodgeOperators& ops, const MatrixXd& signal_cov,
                                           int order);

// Closed-form moments through the trace identities
//   [C_X]_{ab} = Tr(A_a^T P A_b C_x(lag_a - lag_b)),
//   [G]_{ab}   = Tr(A_a^T C_v P A_b C_x(lag_a - lag_b)),
//   [c_Xy]_a   = Tr(A_a^T P C_xy(lag_a)),
// with C_x(k) = C_x for k = 0 and zero otherwise. C_xy(m) is the
// cross-correlation of the unmasked output sum_b h_b A_b x(n-lag_b) + v(n)
// with x(n-m); the mask enters once through P because D(n)^2 = D(n).
// The c_Xy index range is m = 0..M on the upper side and m = 1..M on the
// lower side, the same layout as the columns of X(n).
MomentSet moments_closed_form(const HodgeOperators& ops, const VectorXd& prob,
                              const MatrixXd& signal_cov, const VectorXd& noise_var, int order,
                              const FilterCoeffs& h);

// Time averages over n = M..N-1 of X^T D X, X^T C_v D X and X^T D y.
MomentSet moments_empirical(const StreamBatch& batch, int order, const HodgeOperators& ops,
                            const VectorXd& noise_var);

// CSV with header "n,edge_id,x,d,y", one row per (n, edge), 1-based edge ids.
void write_stream_csv(std::ostream& out, const StreamBatch& batch);
StreamBatch read_stream_csv(std::istream& in, int order);

// JSON object {"c_x": [[...]], "g": [[...]], "c_xy": [...]}, row-major.
std::string moments_to_json(const MomentSet& m);
MomentSet moments_from_json(const std::string& text);

}  // namespace topolms
