#include "topolms/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "topolms/error.hpp"

namespace topolms {

void SamplingProblem::validate() const {
  if (!(mu > 0.0)) throw ValidationError("sampling: mu must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("sampling: alpha must lie in (0, 1)");
  if (!(gamma > 0.0)) throw ValidationError("sampling: gamma must be positive");
  if ((p_max.array() < 0.0).any() || (p_max.array() > 1.0).any()) {
    throw ValidationError("sampling: p_max must lie in [0, 1]");
  }
  if (static_cast<Eigen::Index>(edge_moments.size()) != p_max.size()) {
    throw DimensionError("sampling: one moment matrix per edge required");
  }
  require_size(noise_var, p_max.size(), "sampling noise variances");
  if (edge_moments.empty()) throw ValidationError("sampling: no edges");
  const Eigen::Index w = edge_moments[0].rows();
  for (const auto& c : edge_moments) require_shape(c, w, w, "edge moment matrix");
}

MatrixXd SamplingProblem::c_x(const VectorXd& p) const {
  const Eigen::Index w = edge_moments.front().rows();
  MatrixXd out = MatrixXd::Zero(w, w);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) != 0.0) out += p(i) * edge_moments[i];
  }
  return out;
}

MatrixXd SamplingProblem::g(const VectorXd& p) const {
  const Eigen::Index w = edge_moments.front().rows();
  MatrixXd out = MatrixXd::Zero(w, w);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) != 0.0) out += p(i) * noise_var(i) * edge_moments[i];
  }
  return out;
}

double ConstraintReport::worst() const {
  return std::min({rate_slack, msd_slack, lower_slack, upper_slack});
}

namespace {

VectorXd moment_traces(const SamplingProblem& prob) {
  VectorXd g(prob.num_edges());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    g(i) = prob.noise_var(i) * prob.edge_moments[i].trace();
  }
  return g;
}

}  // namespace

ConstraintReport check_constraints(const VectorXd& p, const SamplingProblem& prob) {
  require_size(p, prob.num_edges(), "sampling probabilities");
  ConstraintReport r;
  r.lambda_min = lambda_min_sym(prob.c_x(p));
  r.rate_slack = r.lambda_min - prob.rate_bound();
  r.msd_slack = prob.msd_factor() * r.lambda_min - moment_traces(prob).dot(p);
  r.lower_slack = p.minCoeff();
  r.upper_slack = (prob.p_max - p).minCoeff();
  return r;
}

std::vector<int> SamplingSolution::support() const {
  std::vector<int> out;
  for (Eigen::Index i = 0; i < p_star.size(); ++i) {
    if (p_star(i) > 0.0) out.push_back(static_cast<int>(i));
  }
  return out;
}

namespace {

// min c^T z  s.t.  A z <= beta,  F0 + sum_k z_k F_k > 0.
struct BarrierProgram {
  VectorXd c;
  MatrixXd a;
  VectorXd beta;
  MatrixXd f0;
  std::vector<MatrixXd> f;

  Eigen::Index dim() const { return c.size(); }
  double barrier_order() const { return static_cast<double>(a.rows() + f0.rows()); }

  MatrixXd lmi(const VectorXd& z) const {
    MatrixXd out = f0;
    for (Eigen::Index k = 0; k < z.size(); ++k) {
      if (z(k) != 0.0) out += z(k) * f[k];
    }
    return out;
  }

  // Barrier value at z, +inf outside the domain.
  double phi(const VectorXd& z) const {
    const VectorXd s = beta - a * z;
    if ((s.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
    Eigen::LLT<MatrixXd> llt(lmi(z));
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const VectorXd diag = MatrixXd(llt.matrixL()).diagonal();
    if ((diag.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
    return -s.array().log().sum() - 2.0 * diag.array().log().sum();
  }
};

struct CenterResult {
  VectorXd z;
  int newton_steps = 0;
};

// Newton's method on t c^T z + phi(z). `stop` may end the iteration early
// (used by phase I once a feasible point is found).
template <class Stop>
CenterResult center(const BarrierProgram& bp, VectorXd z, double t, int max_steps, Stop stop) {
  const Eigen::Index k = bp.dim();
  CenterResult out;
  for (int step = 0; step < max_steps; ++step) {
    if (stop(z)) break;
    const VectorXd s = bp.beta - bp.a * z;
    const VectorXd inv_s = s.cwiseInverse();
    const MatrixXd w = bp.lmi(z).llt().solve(MatrixXd::Identity(bp.f0.rows(), bp.f0.cols()));
    std::vector<MatrixXd> wf(k);
    for (Eigen::Index i = 0; i < k; ++i) wf[i] = w * bp.f[i];
    VectorXd grad = t * bp.c + bp.a.transpose() * inv_s;
    MatrixXd hess = bp.a.transpose() * inv_s.cwiseAbs2().asDiagonal() * bp.a;
    for (Eigen::Index i = 0; i < k; ++i) {
      grad(i) -= wf[i].trace();
      for (Eigen::Index j = i; j < k; ++j) {
        const double v = (wf[i].array() * wf[j].transpose().array()).sum();
        hess(i, j) += v;
        if (j != i) hess(j, i) += v;
      }
    }
    Eigen::LDLT<MatrixXd> ldlt(hess);
    VectorXd dz = -ldlt.solve(grad);
    if (ldlt.info() != Eigen::Success || !dz.allFinite()) {
      const double shift = 1e-12 * (1.0 + hess.diagonal().maxCoeff());
      dz = -(hess + shift * MatrixXd::Identity(k, k)).ldlt().solve(grad);
    }
    const double decrement = -grad.dot(dz);
    ++out.newton_steps;
    if (decrement / 2.0 <= 1e-12) break;
    const double f0 = t * bp.c.dot(z) + bp.phi(z);
    double step_len = 1.0;
    VectorXd trial;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      trial = z + step_len * dz;
      const double f1 = t * bp.c.dot(trial) + bp.phi(trial);
      if (std::isfinite(f1) && f1 <= f0 - 0.25 * step_len * decrement) {
        moved = true;
        break;
      }
      step_len *= 0.5;
    }
    if (!moved) break;
    z = std::move(trial);
  }
  out.z = std::move(z);
  return out;
}

template <class Stop>
CenterResult barrier_solve(const BarrierProgram& bp, VectorXd z, double tol, int max_steps,
                           Stop stop, double& gap) {
  double t = 1.0;
  CenterResult total;
  total.z = std::move(z);
  for (int outer = 0; outer < 200; ++outer) {
    auto r = center(bp, total.z, t, max_steps, stop);
    total.z = std::move(r.z);
    total.newton_steps += r.newton_steps;
    gap = bp.barrier_order() / t;
    if (stop(total.z) || gap < tol) break;
    t *= 8.0;
  }
  return total;
}

// Free variables are the edges with p_max > 0; the others are pinned to 0.
std::vector<int> free_edges(const SamplingProblem& prob) {
  std::vector<int> idx;
  for (Eigen::Index i = 0; i < prob.num_edges(); ++i) {
    if (prob.p_max(i) > 0.0) idx.push_back(static_cast<int>(i));
  }
  return idx;
}

// Variables (p_free, s[, u]). Rows: -p <= 0, p <= p_max, b - s (- u) <= 0,
// g^T p / kappa - s (- u) <= 0 [, -u <= floor]. LMI: C(p) - s I (+ u I).
BarrierProgram sampling_program(const SamplingProblem& prob, const std::vector<int>& idx,
                                bool phase_one, double floor) {
  const auto nf = static_cast<Eigen::Index>(idx.size());
  const Eigen::Index w = prob.edge_moments.front().rows();
  const Eigen::Index dim = nf + (phase_one ? 2 : 1);
  const Eigen::Index rows = 2 * nf + 2 + (phase_one ? 1 : 0);
  const VectorXd g = moment_traces(prob) / prob.msd_factor();
  BarrierProgram bp;
  bp.c = VectorXd::Zero(dim);
  bp.a = MatrixXd::Zero(rows, dim);
  bp.beta = VectorXd::Zero(rows);
  for (Eigen::Index k = 0; k < nf; ++k) {
    bp.a(k, k) = -1.0;
    bp.a(nf + k, k) = 1.0;
    bp.beta(nf + k) = prob.p_max(idx[k]);
    bp.a(2 * nf + 1, k) = g(idx[k]);
  }
  bp.a(2 * nf, nf) = -1.0;
  bp.beta(2 * nf) = -prob.rate_bound();
  bp.a(2 * nf + 1, nf) = -1.0;
  bp.f0 = MatrixXd::Zero(w, w);
  bp.f.resize(dim);
  for (Eigen::Index k = 0; k < nf; ++k) bp.f[k] = prob.edge_moments[idx[k]];
  bp.f[nf] = -MatrixXd::Identity(w, w);
  if (phase_one) {
    const Eigen::Index u = nf + 1;
    bp.a(2 * nf, u) = -1.0;
    bp.a(2 * nf + 1, u) = -1.0;
    bp.a(2 * nf + 2, u) = -1.0;
    bp.beta(2 * nf + 2) = floor;
    bp.f[u] = MatrixXd::Identity(w, w);
    bp.c(u) = 1.0;
  } else {
    for (Eigen::Index k = 0; k < nf; ++k) bp.c(k) = 1.0;
  }
  return bp;
}

VectorXd expand(const SamplingProblem& prob, const std::vector<int>& idx, const VectorXd& z) {
  VectorXd p = VectorXd::Zero(prob.num_edges());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    p(idx[k]) = std::clamp(z(static_cast<Eigen::Index>(k)), 0.0, prob.p_max(idx[k]));
  }
  return p;
}

// Scale p up until constraint (b) holds (C_X is linear, (c) is homogeneous).
VectorXd restore_rate(const SamplingProblem& prob, VectorXd p) {
  for (int k = 0; k < 50; ++k) {
    const double lam = lambda_min_sym(prob.c_x(p));
    if (lam >= prob.rate_bound()) break;
    if (lam <= 0.0) {
      p = prob.p_max;
      break;
    }
    p = (p * (prob.rate_bound() / lam) * (1.0 + 1e-12)).cwiseMin(prob.p_max);
  }
  return p;
}

// Zero the smallest entries one at a time while the point stays feasible.
void polish_support(VectorXd& p, const SamplingProblem& prob, double support_tol) {
  std::vector<int> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return p(a) < p(b); });
  for (int i : order) {
    if (p(i) == 0.0) continue;
    if (p(i) >= support_tol) break;
    VectorXd trial = p;
    trial(i) = 0.0;
    trial = restore_rate(prob, std::move(trial));
    // Rescaling to restore (b) may raise the objective by about the removed
    // mass; a jump to p_max is rejected.
    if (trial.sum() <= p.sum() + 1e-6 * (1.0 + p.sum()) &&
        check_constraints(trial, prob).feasible(1e-12)) {
      p = std::move(trial);
    }
  }
}

SamplingSolution solve_barrier(const SamplingProblem& prob, const SamplingOptions& options,
                               bool heuristic) {
  const auto idx = free_edges(prob);
  const auto nf = static_cast<Eigen::Index>(idx.size());
  const double b = prob.rate_bound();
  const double floor = std::max(1.0, b);

  // Phase I from the box centre.
  BarrierProgram p1 = sampling_program(prob, idx, true, floor);
  VectorXd z1(nf + 2);
  for (Eigen::Index k = 0; k < nf; ++k) z1(k) = 0.5 * prob.p_max(idx[k]);
  const double s0 = b;
  const VectorXd p0 = expand(prob, idx, z1);
  const double lam0 = lambda_min_sym(prob.c_x(p0));
  const double g0 = moment_traces(prob).dot(p0) / prob.msd_factor();
  z1(nf) = s0;
  z1(nf + 1) = std::max({s0 - lam0, g0 - s0, 0.0}) + 1.0;
  auto feasible_found = [&](const VectorXd& z) { return z(nf + 1) < -1e-3 * floor; };
  double gap1 = 0.0;
  auto r1 = barrier_solve(p1, z1, 1e-10, options.max_iter, feasible_found, gap1);
  if (!feasible_found(r1.z)) {
    if (r1.z(nf + 1) >= 0.0 || !(r1.z(nf + 1) < 0.0)) {
      throw InfeasibleError("sampling problem has no strictly feasible point (phase I bound " +
                            std::to_string(r1.z(nf + 1)) + ")");
    }
  }

  BarrierProgram p2 = sampling_program(prob, idx, false, floor);
  VectorXd z2 = r1.z.head(nf + 1);
  double gap2 = 0.0;
  auto r2 = barrier_solve(p2, z2, options.tol, options.max_iter,
                          [](const VectorXd&) { return false; }, gap2);

  SamplingSolution sol;
  sol.p_star = expand(prob, idx, r2.z);
  polish_support(sol.p_star, prob, options.support_tol);
  sol.objective = sol.p_star.sum();
  sol.slacks = check_constraints(sol.p_star, prob);
  sol.iterations = r1.newton_steps + r2.newton_steps;
  sol.certificate = gap2;
  sol.converged = gap2 < options.tol;
  sol.heuristic_feasibility = heuristic;
  return sol;
}

// Subgradient of lambda_min(C_X(p)) w.r.t. p, averaged over the eigenvectors
// whose eigenvalues are within 1e-9 of the minimum.
VectorXd lambda_min_subgradient(const SamplingProblem& prob, const VectorXd& p, double& lam) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(prob.c_x(p));
  lam = es.eigenvalues()(0);
  int count = 0;
  VectorXd sg = VectorXd::Zero(p.size());
  for (Eigen::Index j = 0; j < es.eigenvalues().size(); ++j) {
    if (es.eigenvalues()(j) - lam > 1e-9) break;
    const VectorXd u = es.eigenvectors().col(j);
    for (Eigen::Index i = 0; i < p.size(); ++i) sg(i) += u.dot(prob.edge_moments[i] * u);
    ++count;
  }
  return sg / count;
}

SamplingSolution solve_subgradient(const SamplingProblem& prob, const SamplingOptions& options,
                                   bool heuristic) {
  const Eigen::Index e = prob.num_edges();
  const VectorXd gvec = moment_traces(prob) / prob.msd_factor();
  const double b = prob.rate_bound();
  // Penalty weight above the multiplier scale 1^T p / b of constraint (b).
  const double rho = 10.0 * std::max(1.0, prob.p_max.sum()) / std::max(b, 1e-12);
  const double diameter = prob.p_max.norm();
  VectorXd p = prob.p_max;
  VectorXd best = p;
  double best_obj = p.sum();
  double residual = std::numeric_limits<double>::infinity();
  int iter = 0;
  for (; iter < options.max_iter; ++iter) {
    double lam = 0.0;
    const VectorXd lsg = lambda_min_subgradient(prob, p, lam);
    VectorXd sg = VectorXd::Ones(e);
    const double viol_b = b - lam;
    const double viol_c = gvec.dot(p) - lam;
    if (viol_b > 0.0) sg -= rho * lsg;
    if (viol_c > 0.0) sg += rho * (gvec - lsg);
    for (Eigen::Index i = 0; i < e; ++i) {
      if ((p(i) <= 0.0 && sg(i) > 0.0) || (p(i) >= prob.p_max(i) && sg(i) < 0.0)) sg(i) = 0.0;
    }
    residual = sg.norm();
    if (residual < options.tol) break;
    const double step = options.subgradient_step * diameter / std::sqrt(iter + 1.0);
    p = (p - step * sg / residual).cwiseMax(0.0).cwiseMin(prob.p_max);
    const VectorXd candidate = restore_rate(prob, p);
    if (check_constraints(candidate, prob).feasible(1e-9) && candidate.sum() < best_obj) {
      best = candidate;
      best_obj = candidate.sum();
    }
  }
  SamplingSolution sol;
  sol.p_star = best;
  polish_support(sol.p_star, prob, options.support_tol);
  sol.objective = sol.p_star.sum();
  sol.slacks = check_constraints(sol.p_star, prob);
  sol.iterations = iter;
  sol.certificate = residual;
  sol.converged = residual < options.tol;
  sol.heuristic_feasibility = heuristic;
  return sol;
}

}  // namespace

SamplingSolution solve_sampling(const SamplingProblem& prob, const SamplingOptions& options) {
  prob.validate();
  const auto at_max = check_constraints(prob.p_max, prob);
  if (at_max.rate_slack < 0.0) {
    throw InfeasibleError("sampling problem infeasible: lambda_min(C_X(p_max)) = " +
                          std::to_string(at_max.lambda_min) + " < (1-alpha)/(2mu) = " +
                          std::to_string(prob.rate_bound()));
  }
  const bool heuristic = at_max.msd_slack < 0.0;
  if (options.method == SamplingMethod::kSubgradient) {
    return solve_subgradient(prob, options, heuristic);
  }
  return solve_barrier(prob, options, heuristic);
}

namespace {

nlohmann::json to_json_matrix(const MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[j] = m(i, j);
    rows.push_back(row);
  }
  return rows;
}

std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string sampling_problem_to_json(const SamplingProblem& prob) {
  nlohmann::json j;
  j["mu"] = prob.mu;
  j["alpha"] = prob.alpha;
  j["gamma"] = prob.gamma;
  j["p_max"] = to_std(prob.p_max);
  j["noise_var"] = to_std(prob.noise_var);
  auto mats = nlohmann::json::array();
  for (const auto& c : prob.edge_moments) mats.push_back(to_json_matrix(c));
  j["edge_moments"] = mats;
  return j.dump(2);
}

SamplingProblem sampling_problem_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SamplingProblem prob;
    prob.mu = j.at("mu").get<double>();
    prob.alpha = j.at("alpha").get<double>();
    prob.gamma = j.at("gamma").get<double>();
    prob.p_max = to_eigen(j.at("p_max").get<std::vector<double>>());
    prob.noise_var = to_eigen(j.at("noise_var").get<std::vector<double>>());
    for (const auto& m : j.at("edge_moments")) {
      const auto rows = m.get<std::vector<std::vector<double>>>();
      MatrixXd c(rows.size(), rows.empty() ? 0 : rows[0].size());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != static_cast<std::size_t>(c.cols())) throw ParseError("ragged matrix");
        for (std::size_t k = 0; k < rows[r].size(); ++k) c(r, k) = rows[r][k];
      }
      prob.edge_moments.push_back(std::move(c));
    }
    prob.validate();
    return prob;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("sampling problem JSON: ") + ex.what());
  }
}

std::string sampling_solution_to_json(const SamplingSolution& sol) {
  nlohmann::json j;
  j["p_star"] = to_std(sol.p_star);
  j["objective"] = sol.objective;
  j["support"] = sol.support();
  j["slacks"] = {{"rate", sol.slacks.rate_slack},
                 {"msd", sol.slacks.msd_slack},
                 {"lower", sol.slacks.lower_slack},
                 {"upper", sol.slacks.upper_slack},
                 {"lambda_min", sol.slacks.lambda_min}};
  j["iterations"] = sol.iterations;
  j["converged"] = sol.converged;
  j["certificate"] = sol.certificate;
  j["heuristic_feasibility"] = sol.heuristic_feasibility;
  return j.dump(2);
}

}  // namespace topolms
