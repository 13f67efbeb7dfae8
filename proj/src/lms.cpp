#include "topolms/lms.hpp"

#include <cmath>
#include <limits>

#include "topolms/error.hpp"
#include "topolms/parallel.hpp"

namespace topolms {

void lms_update(LmsState& state, const MatrixXd& regressors, const VectorXd& mask,
                const VectorXd& y) {
  const Eigen::Index e = regressors.rows();
  require_size(state.h, regressors.cols(), "filter estimate");
  require_size(mask, e, "sampling mask");
  require_size(y, e, "observation");
  const VectorXd innovation = mask.cwiseProduct(y - regressors * state.h);
  state.h.noalias() += state.mu * (regressors.transpose() * innovation);
  ++state.n;
  if (!state.h.allFinite()) {
    throw DivergenceError("Topo-LMS estimate became non-finite at iteration " +
                          std::to_string(state.n));
  }
}

LmsState lms_step(const LmsState& state, const MatrixXd& regressors, const VectorXd& mask,
                  const VectorXd& y) {
  LmsState next = state;
  lms_update(next, regressors, mask, y);
  return next;
}

double max_stepsize(const MatrixXd& c_x) {
  const double top = lambda_max_sym(c_x);
  if (!(top > 0.0)) throw ValidationError("max_stepsize: C_X has no positive eigenvalue");
  return 2.0 / top;
}

namespace {

constexpr Eigen::Index kMaterializeLimit = 16;

MatrixXd q_matrix(const MatrixXd& c_x, double mu) {
  return MatrixXd::Identity(c_x.rows(), c_x.cols()) - mu * c_x;
}

}  // namespace

SteadyState steady_state_msd(const MatrixXd& c_x, const MatrixXd& g, double mu) {
  require_shape(g, c_x.rows(), c_x.cols(), "G");
  if (!(mu > 0.0)) throw ValidationError("step-size must be positive");
  const MatrixXd q = q_matrix(c_x, mu);
  const MatrixXd eye = MatrixXd::Identity(c_x.rows(), c_x.cols());
  // vec(G)^T (I - F)^{-1} vec(I) = Tr(G^T S) where S - Q^T S Q = I.
  const MatrixXd s = stein_solve(q, eye, kMaterializeLimit);
  SteadyState out;
  out.msd_exact = mu * mu * (g.transpose().cwiseProduct(s)).sum();
  out.msd_first_order = 0.5 * mu * (g * c_x.ldlt().solve(eye)).trace();
  return out;
}

double msd_q_squared(const MatrixXd& c_x, const MatrixXd& g, double mu) {
  const MatrixXd q = q_matrix(c_x, mu);
  const MatrixXd eye = MatrixXd::Identity(c_x.rows(), c_x.cols());
  const MatrixXd inv = (eye - q * q).partialPivLu().solve(eye);
  return mu * mu * (g * inv).trace();
}

RateReport convergence_rate(const MatrixXd& c_x, double mu) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(c_x, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  const double lmax = es.eigenvalues()(c_x.rows() - 1);
  RateReport out;
  out.approx = 1.0 - 2.0 * mu * lmin;
  const double rho = std::max(std::abs(1.0 - mu * lmin), std::abs(1.0 - mu * lmax));
  out.f_norm = rho * rho;
  out.small_step = lmax > 0.0 && mu <= 0.1 * 2.0 * lmin / (lmax * lmax);
  return out;
}

TheoryReport theory_report(const MatrixXd& c_x, const MatrixXd& g, double mu) {
  TheoryReport out;
  out.mu_max = max_stepsize(c_x);
  out.rho_q = spectral_radius(q_matrix(c_x, mu));
  const auto rate = convergence_rate(c_x, mu);
  out.alpha = rate.approx;
  out.f_norm = rate.f_norm;
  out.stable = out.rho_q < 1.0;
  if (out.stable) {
    const auto ss = steady_state_msd(c_x, g, mu);
    out.msd_exact = ss.msd_exact;
    out.msd_first_order = ss.msd_first_order;
  } else {
    out.msd_exact = out.msd_first_order = std::numeric_limits<double>::infinity();
  }
  return out;
}

ExperimentResult run_experiment(const HodgeOperators& ops, const FilterCoeffs& h_true,
                                const StreamConfig& cfg, const ExperimentOptions& options) {
  if (options.realizations <= 0) throw ValidationError("realizations must be positive");
  if (options.horizon < 0) throw ValidationError("horizon must be non-negative");
  cfg.validate(ops.num_edges());
  const VectorXd target = h_true.flat();
  const int order = h_true.order;
  const int horizon = options.horizon;
  const int runs = options.realizations;

  std::vector<std::vector<double>> traces(runs);
  std::vector<char> diverged(runs, 0);
  parallel_for(runs, options.threads, [&](int r) {
    StreamConfig local = cfg;
    local.seed = derive_seed(options.seed, static_cast<std::uint64_t>(r));
    StreamGenerator gen(h_true, ops, local);
    LmsState state;
    state.mu = options.mu;
    state.h = VectorXd::Zero(target.size());
    if (options.random_init) {
      Rng init(derive_seed(local.seed, 7));
      for (Eigen::Index k = 0; k < state.h.size(); ++k) state.h(k) = init.normal();
    }
    auto& trace = traces[r];
    trace.reserve(horizon + 1);
    for (int m = 0; m < order; ++m) gen.next();
    trace.push_back((target - state.h).squaredNorm());
    try {
      for (int n = 0; n < horizon; ++n) {
        const auto& s = gen.next();
        lms_update(state, s.regressors, s.d, s.y);
        trace.push_back((target - state.h).squaredNorm());
      }
    } catch (const DivergenceError&) {
      diverged[r] = 1;
    }
  });

  ExperimentResult out;
  out.msd.assign(horizon + 1, 0.0);
  out.diverged.resize(runs);
  for (int r = 0; r < runs; ++r) {
    out.diverged[r] = diverged[r] != 0;
    if (diverged[r]) continue;
    ++out.completed;
    for (int n = 0; n <= horizon; ++n) out.msd[n] += traces[r][n];
    out.tail_msd.push_back(tail_average(traces[r]));
  }
  if (out.completed > 0) {
    for (double& v : out.msd) v /= out.completed;
  }
  return out;
}

double tail_average(const std::vector<double>& values, double fraction) {
  if (values.empty()) return 0.0;
  const auto count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(values.size()))));
  double sum = 0.0;
  for (std::size_t k = values.size() - count; k < values.size(); ++k) sum += values[k];
  return sum / static_cast<double>(count);
}

TailStats mean_confidence(const std::vector<double>& samples) {
  TailStats out;
  if (samples.empty()) return out;
  double sum = 0.0;
  for (double v : samples) sum += v;
  out.mean = sum / static_cast<double>(samples.size());
  if (samples.size() < 2) return out;
  double ss = 0.0;
  for (double v : samples) ss += (v - out.mean) * (v - out.mean);
  const double var = ss / static_cast<double>(samples.size() - 1);
  out.half_width95 = 1.96 * std::sqrt(var / static_cast<double>(samples.size()));
  return out;
}

double to_db(double value) { return 10.0 * std::log10(value); }

}  // namespace topolms
