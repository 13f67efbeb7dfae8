#include "topolms/topology.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "topolms/error.hpp"
#include "topolms/lms.hpp"
#include "topolms/parallel.hpp"

namespace topolms {

MatrixXd param_upper_laplacian(const VectorXd& t, const std::vector<CliqueCandidate>& candidates) {
  if (t.size() != static_cast<Eigen::Index>(candidates.size())) {
    throw DimensionError("indicator vector length differs from the number of candidates");
  }
  if (candidates.empty()) return MatrixXd();
  const Eigen::Index e = candidates.front().incidence.size();
  MatrixXd lu = MatrixXd::Zero(e, e);
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    const auto tj = t(static_cast<Eigen::Index>(j));
    if (tj != 0.0) lu.noalias() += tj * candidates[j].incidence * candidates[j].incidence.transpose();
  }
  return lu;
}

void validate_thresholds(double lambda0, double lambda1) {
  if (!(lambda0 >= 0.0 && lambda1 >= 0.0)) {
    throw ValidationError("threshold weights must be non-negative");
  }
  if (!(1.0 - std::sqrt(2.0 * lambda1) > std::sqrt(2.0 * lambda0))) {
    throw ValidationError("threshold ordering 1 - sqrt(2 lambda1) > sqrt(2 lambda0) violated");
  }
}

double prox_hard_threshold(double v, double lambda0, double lambda1) {
  const double u = std::clamp(v, 0.0, 1.0);
  if (u <= std::sqrt(2.0 * lambda0)) return 0.0;
  if (u >= 1.0 - std::sqrt(2.0 * lambda1)) return 1.0;
  return u;
}

VectorXd prox_hard_threshold(const VectorXd& v, double lambda0, double lambda1) {
  validate_thresholds(lambda0, lambda1);
  VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out(i) = prox_hard_threshold(v(i), lambda0, lambda1);
  return out;
}

double prox_objective(double u, double v, double lambda0, double lambda1) {
  return 0.5 * (u - v) * (u - v) + (u != 0.0 ? lambda0 : 0.0) + (u != 1.0 ? lambda1 : 0.0);
}

MatrixXd TopologyModel::upper(const VectorXd& t) const {
  require_size(t, num_candidates(), "triangle indicators");
  return incidence * t.asDiagonal() * incidence.transpose() / scale;
}

HodgeOperators TopologyModel::operators(const VectorXd& t) const {
  HodgeOperators ops;
  ops.lower = lower;
  ops.upper = upper(t);
  ops.l1 = ops.lower + ops.upper;
  ops.scale = scale;
  return ops;
}

MatrixXd TopologyModel::regressors(const VectorXd& t, std::span<const VectorXd> history) const {
  return build_regressors(history, upper(t), lower, order);
}

TopologyModel make_topology_model(const SimplicialComplex2& skeleton, int order) {
  if (order < 0) throw ValidationError("filter order must be non-negative");
  TopologyModel model;
  model.order = order;
  model.candidates = enumerate_3cliques(skeleton);
  const Eigen::Index e = skeleton.num_edges();
  model.incidence = MatrixXd::Zero(e, static_cast<Eigen::Index>(model.candidates.size()));
  for (std::size_t j = 0; j < model.candidates.size(); ++j) {
    model.incidence.col(static_cast<Eigen::Index>(j)) = model.candidates[j].incidence;
  }
  const MatrixXd b1 = skeleton.b1().cast<double>();
  const MatrixXd ld = b1.transpose() * b1;
  const MatrixXd full_upper = model.incidence * model.incidence.transpose();
  const double top = e == 0 ? 0.0 : lambda_max_sym(ld + full_upper);
  model.scale = top > 0.0 ? top : 1.0;
  model.lower = ld / model.scale;
  return model;
}

VectorXd indicators_of(const TopologyModel& model, const SimplicialComplex2& c) {
  std::set<Triangle> present(c.triangles().begin(), c.triangles().end());
  VectorXd t = VectorXd::Zero(model.num_candidates());
  for (std::size_t j = 0; j < model.candidates.size(); ++j) {
    if (present.count(model.candidates[j].vertices)) t(static_cast<Eigen::Index>(j)) = 1.0;
  }
  if (static_cast<std::size_t>(t.sum()) != present.size()) {
    throw ValidationError("complex has triangles that are not cliques of the model skeleton");
  }
  return t;
}

namespace {

void check_inputs(const TopologyModel& model, const VectorXd& h, const VectorXd& t,
                  std::span<const VectorXd> history, const VectorXd& mask, const VectorXd& y) {
  require_size(h, regressor_width(model.order), "filter estimate");
  require_size(t, model.num_candidates(), "triangle indicators");
  if (static_cast<int>(history.size()) != model.order + 1) {
    throw DimensionError("regressor history must hold M+1 signals");
  }
  require_size(mask, model.num_edges(), "sampling mask");
  require_size(y, model.num_edges(), "observation");
}

}  // namespace

double instantaneous_cost(const TopologyModel& model, const VectorXd& h, const VectorXd& t,
                          std::span<const VectorXd> history, const VectorXd& mask,
                          const VectorXd& y) {
  check_inputs(model, h, t, history, mask, y);
  const VectorXd r = y - mask.cwiseProduct(model.regressors(t, history) * h);
  return r.squaredNorm();
}

VectorXd grad_t(const TopologyModel& model, const VectorXd& h, const VectorXd& t,
                std::span<const VectorXd> history, const VectorXd& mask, const VectorXd& y) {
  check_inputs(model, h, t, history, mask, y);
  const int order = model.order;
  const MatrixXd lu = model.upper(t);
  const MatrixXd x = build_regressors(history, lu, model.lower, order);
  const VectorXd dr = mask.cwiseProduct(y - mask.cwiseProduct(x * h));

  VectorXd grad = VectorXd::Zero(model.num_candidates());
  if (order == 0) return grad;
  // bq[l] = B^T Lu^l D r, l = 0..M-1.
  std::vector<VectorXd> bq(order);
  VectorXd q = dr;
  for (int l = 0; l < order; ++l) {
    bq[l] = model.incidence.transpose() * q;
    if (l + 1 < order) q = lu * q;
  }
  for (int m = 1; m <= order; ++m) {
    const double hm = h(m);
    if (hm == 0.0) continue;
    // Lu^k x(n-m), k = 0..m-1.
    VectorXd s = history[m];
    VectorXd acc = VectorXd::Zero(model.num_candidates());
    for (int k = 0; k < m; ++k) {
      const int l = m - 1 - k;
      acc += bq[l].cwiseProduct(model.incidence.transpose() * s);
      if (k + 1 < m) s = lu * s;
    }
    grad += hm * acc;
  }
  return grad * (-2.0 / model.scale);
}

TopologyState initial_topology_state(const TopologyModel& model, double mu1, double mu2,
                                     double lambda0, double lambda1) {
  validate_thresholds(lambda0, lambda1);
  TopologyState s;
  s.h = VectorXd::Zero(regressor_width(model.order));
  s.t = VectorXd::Constant(model.num_candidates(), 0.5);
  s.mu1 = mu1;
  s.mu2 = mu2;
  s.lambda0 = lambda0;
  s.lambda1 = lambda1;
  return s;
}

void infer_update(TopologyState& state, const TopologyModel& model,
                  std::span<const VectorXd> history, const VectorXd& mask, const VectorXd& y) {
  check_inputs(model, state.h, state.t, history, mask, y);
  const MatrixXd x = model.regressors(state.t, history);
  const VectorXd innovation = mask.cwiseProduct(y - x * state.h);
  state.h.noalias() += state.mu1 * (x.transpose() * innovation);
  const VectorXd g = grad_t(model, state.h, state.t, history, mask, y);
  state.t = prox_hard_threshold(state.t - state.mu2 * g, state.lambda0, state.lambda1);
  ++state.n;
  if (!state.h.allFinite() || !state.t.allFinite()) {
    throw DivergenceError("topology inference diverged at iteration " + std::to_string(state.n));
  }
}

TopologyState infer_step(const TopologyState& state, const TopologyModel& model,
                         std::span<const VectorXd> history, const VectorXd& mask,
                         const VectorXd& y) {
  TopologyState next = state;
  infer_update(next, model, history, mask, y);
  return next;
}

TopologyResult run_topology_experiment(const TopologyModel& model, const TopologyExperiment& exp) {
  validate_thresholds(exp.lambda0, exp.lambda1);
  if (exp.h_true.order != model.order) throw DimensionError("filter order differs from model");
  if (exp.realizations <= 0 || exp.horizon < 0 || exp.record_stride <= 0) {
    throw ValidationError("invalid topology experiment sizes");
  }
  require_size(exp.t_true, model.num_candidates(), "true indicators");
  std::vector<TopologyChange> changes = exp.changes;
  std::sort(changes.begin(), changes.end(),
            [](const TopologyChange& a, const TopologyChange& b) { return a.at < b.at; });
  for (const auto& c : changes) require_size(c.t_true, model.num_candidates(), "true indicators");

  const VectorXd target = exp.h_true.flat();
  const int order = model.order;
  const int runs = exp.realizations;
  const std::size_t phases = changes.size() + 1;
  std::vector<TopologyRun> results(runs);

  parallel_for(runs, exp.threads, [&](int r) {
    StreamConfig cfg;
    cfg.signal_cov = exp.signal_cov;
    cfg.noise_var = exp.noise_var;
    cfg.sample_prob = exp.sample_prob;
    cfg.horizon = exp.horizon + order;
    cfg.seed = derive_seed(exp.seed, static_cast<std::uint64_t>(r));
    StreamGenerator gen(exp.h_true, model.operators(exp.t_true), cfg);
    auto state = initial_topology_state(model, exp.mu1, exp.mu2, exp.lambda0, exp.lambda1);
    TopologyRun& run = results[r];
    run.recovered_at.assign(phases, -1);
    for (int m = 0; m < order; ++m) gen.next();

    VectorXd t_now = exp.t_true;
    std::size_t phase = 0;
    long last_mismatch = -1;
    long phase_start = 0;
    std::vector<double> trace_h;
    trace_h.reserve(exp.horizon + 1);
    auto record = [&](long k) {
      const double eh = (target - state.h).squaredNorm();
      trace_h.push_back(eh);
      if (k % exp.record_stride == 0) {
        run.msd_h.push_back(eh);
        run.err_t.push_back((t_now - state.t).squaredNorm());
      }
    };
    auto close_phase = [&](long end) {
      if (last_mismatch < end) run.recovered_at[phase] = std::max(last_mismatch + 1, phase_start);
    };
    record(0);
    if (state.t != t_now) last_mismatch = 0;
    try {
      for (long k = 0; k < exp.horizon; ++k) {
        if (phase < changes.size() && changes[phase].at == k) {
          close_phase(k);
          t_now = changes[phase].t_true;
          gen.set_operators(model.operators(t_now));
          ++phase;
          phase_start = k;
          last_mismatch = k;
        }
        const auto& s = gen.next();
        infer_update(state, model, gen.history(), s.d, s.y);
        if (state.t != t_now) last_mismatch = k + 1;
        record(k + 1);
      }
      close_phase(exp.horizon);
    } catch (const DivergenceError&) {
      run.diverged = true;
    }
    run.t_final = state.t;
    run.tail_msd_h = tail_average(trace_h);
  });

  TopologyResult out;
  for (long k = 0; k <= exp.horizon; k += exp.record_stride) out.iterations.push_back(k);
  out.msd_h.assign(out.iterations.size(), 0.0);
  out.err_t.assign(out.iterations.size(), 0.0);
  int ok = 0;
  for (const auto& run : results) {
    if (run.diverged || run.msd_h.size() != out.iterations.size()) continue;
    ++ok;
    for (std::size_t k = 0; k < out.iterations.size(); ++k) {
      out.msd_h[k] += run.msd_h[k];
      out.err_t[k] += run.err_t[k];
    }
  }
  if (ok > 0) {
    for (auto& v : out.msd_h) v /= ok;
    for (auto& v : out.err_t) v /= ok;
  }
  out.runs = std::move(results);
  return out;
}

}  // namespace topolms
