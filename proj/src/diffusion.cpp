#include "topolms/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <queue>
#include <sstream>

#include "topolms/error.hpp"
#include "topolms/lms.hpp"
#include "topolms/parallel.hpp"

namespace topolms {

Neighborhoods lower_adjacency_neighborhoods(const SimplicialComplex2& c) {
  const int e = c.num_edges();
  std::vector<std::vector<int>> by_vertex(c.num_vertices());
  for (int i = 0; i < e; ++i) {
    by_vertex[c.edges()[i][0]].push_back(i);
    by_vertex[c.edges()[i][1]].push_back(i);
  }
  Neighborhoods out(e);
  for (int i = 0; i < e; ++i) {
    auto& nb = out[i];
    nb.push_back(i);
    for (int v : c.edges()[i]) nb.insert(nb.end(), by_vertex[v].begin(), by_vertex[v].end());
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  return out;
}

CombinationMatrix build_combination(const Neighborhoods& neighborhoods, CombinationRule rule) {
  const auto e = static_cast<int>(neighborhoods.size());
  CombinationMatrix out;
  out.neighborhoods = neighborhoods;
  for (int i = 0; i < e; ++i) {
    auto& nb = out.neighborhoods[i];
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    if (nb.empty()) throw ValidationError("agent " + std::to_string(i + 1) + " has no neighbors");
    if (!std::binary_search(nb.begin(), nb.end(), i)) {
      throw ValidationError("neighborhood of agent " + std::to_string(i + 1) +
                            " lacks its self-loop");
    }
    if (nb.front() < 0 || nb.back() >= e) {
      throw ValidationError("neighborhood of agent " + std::to_string(i + 1) +
                            " references an unknown agent");
    }
  }
  out.a = MatrixXd::Zero(e, e);
  for (int i = 0; i < e; ++i) {
    const auto& nb = out.neighborhoods[i];
    if (rule == CombinationRule::kUniform) {
      for (int l : nb) out.a(i, l) = 1.0 / static_cast<double>(nb.size());
      continue;
    }
    const double deg_i = static_cast<double>(nb.size()) - 1.0;
    double off = 0.0;
    for (int l : nb) {
      if (l == i) continue;
      const double deg_l = static_cast<double>(out.neighborhoods[l].size()) - 1.0;
      out.a(i, l) = 1.0 / (1.0 + std::max(deg_i, deg_l));
      off += out.a(i, l);
    }
    out.a(i, i) = 1.0 - off;
  }
  return out;
}

namespace {

std::vector<char> reachable(const MatrixXd& a, bool transpose) {
  const Eigen::Index n = a.rows();
  std::vector<char> seen(n, 0);
  std::queue<Eigen::Index> frontier;
  seen[0] = 1;
  frontier.push(0);
  while (!frontier.empty()) {
    const Eigen::Index i = frontier.front();
    frontier.pop();
    for (Eigen::Index l = 0; l < n; ++l) {
      const double w = transpose ? a(l, i) : a(i, l);
      if (w > 0.0 && !seen[l]) {
        seen[l] = 1;
        frontier.push(l);
      }
    }
  }
  return seen;
}

}  // namespace

bool check_irreducible(const MatrixXd& a) {
  if (a.rows() != a.cols()) throw DimensionError("combination matrix is not square");
  if (a.rows() == 0) return false;
  const auto fwd = reachable(a, false);
  const auto back = reachable(a, true);
  return std::all_of(fwd.begin(), fwd.end(), [](char c) { return c != 0; }) &&
         std::all_of(back.begin(), back.end(), [](char c) { return c != 0; });
}

void write_combination_csv(std::ostream& out, const CombinationMatrix& a) {
  out.precision(17);
  out << "i,l,a_il\n";
  for (Eigen::Index i = 0; i < a.a.rows(); ++i) {
    for (Eigen::Index l = 0; l < a.a.cols(); ++l) {
      if (a.a(i, l) != 0.0) out << i + 1 << ',' << l + 1 << ',' << a.a(i, l) << '\n';
    }
  }
}

CombinationMatrix read_combination_csv(std::istream& in, int num_agents) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("i,l,a_il", 0) != 0) {
    throw ParseError("combination CSV: expected header i,l,a_il");
  }
  CombinationMatrix out;
  out.a = MatrixXd::Zero(num_agents, num_agents);
  out.neighborhoods.assign(num_agents, {});
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    long i = 0, l = 0;
    double w = 0.0;
    char c1 = 0, c2 = 0;
    if (!(ss >> i >> c1 >> l >> c2 >> w) || c1 != ',' || c2 != ',' || i < 1 || l < 1 ||
        i > num_agents || l > num_agents) {
      throw ParseError("combination CSV line " + std::to_string(line_no) + ": malformed row");
    }
    out.a(i - 1, l - 1) = w;
    out.neighborhoods[i - 1].push_back(static_cast<int>(l - 1));
  }
  for (auto& nb : out.neighborhoods) std::sort(nb.begin(), nb.end());
  return out;
}

NetworkState initial_network_state(int num_agents, int width, const VectorXd& mu) {
  require_size(mu, num_agents, "agent step-sizes");
  NetworkState net;
  net.h.assign(num_agents, VectorXd::Zero(width));
  net.mu = mu;
  return net;
}

void atc_update(NetworkState& net, const CombinationMatrix& a, const MatrixXd& regressors,
                const VectorXd& mask, const VectorXd& y) {
  const auto e = static_cast<Eigen::Index>(net.h.size());
  require_shape(a.a, e, e, "combination matrix");
  if (regressors.rows() != e) throw DimensionError("regressor rows differ from agent count");
  require_size(mask, e, "sampling mask");
  require_size(y, e, "observation");
  require_size(net.mu, e, "agent step-sizes");
  std::vector<VectorXd> w(e);
  for (Eigen::Index i = 0; i < e; ++i) {
    w[i] = net.h[i];
    if (mask(i) != 0.0) {
      const auto z = regressors.row(i).transpose();
      w[i].noalias() += (net.mu(i) * mask(i) * (y(i) - z.dot(net.h[i]))) * z;
    }
  }
  for (Eigen::Index i = 0; i < e; ++i) {
    VectorXd acc = VectorXd::Zero(w[i].size());
    for (int l : a.neighborhoods[i]) acc.noalias() += a.a(i, l) * w[l];
    if (!acc.allFinite()) {
      throw DivergenceError("agent " + std::to_string(i + 1) + " diverged at iteration " +
                            std::to_string(net.n + 1));
    }
    net.h[i] = std::move(acc);
  }
  ++net.n;
}

NetworkState atc_step(const NetworkState& net, const CombinationMatrix& a,
                      const MatrixXd& regressors, const VectorXd& mask, const VectorXd& y) {
  NetworkState next = net;
  atc_update(next, a, regressors, mask, y);
  return next;
}

DistTheoryReport dist_theory(const CombinationMatrix& a, const std::vector<MatrixXd>& cz,
                             const VectorXd& noise_var, const VectorXd& mu) {
  const auto e = static_cast<Eigen::Index>(cz.size());
  if (e == 0) throw ValidationError("dist_theory: no agents");
  require_shape(a.a, e, e, "combination matrix");
  require_size(noise_var, e, "noise variances");
  require_size(mu, e, "agent step-sizes");
  const Eigen::Index w = cz.front().rows();
  const Eigen::Index n = e * w;

  DistTheoryReport out;
  out.irreducible = check_irreducible(a.a);
  out.steps_within_bounds = true;
  const double lam_tol = 1e-10;
  for (Eigen::Index i = 0; i < e; ++i) {
    require_shape(cz[i], w, w, "local moment matrix");
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(cz[i], Eigen::EigenvaluesOnly);
    const double top = es.eigenvalues()(w - 1);
    const double bound = top > 0.0 ? 2.0 / top : std::numeric_limits<double>::infinity();
    out.local_bounds.push_back(bound);
    if (!(mu(i) > 0.0 && mu(i) < bound)) out.steps_within_bounds = false;
    if (es.eigenvalues()(0) > lam_tol * std::max(1.0, top)) out.has_nonsingular = true;
  }
  out.hypotheses_hold = out.irreducible && out.has_nonsingular && out.steps_within_bounds;

  MatrixXd a_net = MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < e; ++i) {
    for (Eigen::Index l = 0; l < e; ++l) {
      if (a.a(i, l) != 0.0) a_net.block(i * w, l * w, w, w).diagonal().setConstant(a.a(i, l));
    }
  }
  MatrixXd inner = MatrixXd::Identity(n, n);
  MatrixXd drive = MatrixXd::Zero(n, n);  // M G M
  for (Eigen::Index i = 0; i < e; ++i) {
    inner.block(i * w, i * w, w, w) -= mu(i) * cz[i];
    drive.block(i * w, i * w, w, w) = mu(i) * mu(i) * noise_var(i) * cz[i];
  }
  out.b = a_net * inner;
  out.rho_b = spectral_radius(out.b);
  out.stable = out.rho_b < 1.0;
  if (out.stable) {
    const MatrixXd s = stein_solve(out.b, MatrixXd::Identity(n, n), 64);
    const MatrixXd y = a_net * drive * a_net.transpose();
    out.msd_network = (y.cwiseProduct(s)).sum();
    out.msd_per_agent = out.msd_network / static_cast<double>(e);
  } else {
    out.msd_network = out.msd_per_agent = std::numeric_limits<double>::infinity();
  }
  return out;
}

std::vector<MatrixXd> local_moments(const HodgeOperators& ops, const MatrixXd& signal_cov,
                                    const VectorXd& prob, int order) {
  auto c = edge_moment_matrices(ops, signal_cov, order);
  require_size(prob, static_cast<Eigen::Index>(c.size()), "sampling probabilities");
  for (std::size_t i = 0; i < c.size(); ++i) c[i] *= prob(static_cast<Eigen::Index>(i));
  return c;
}

DistributedResult run_distributed(const HodgeOperators& ops, const FilterCoeffs& h_true,
                                  const StreamConfig& cfg, const CombinationMatrix& a,
                                  const DistributedOptions& options) {
  if (options.realizations <= 0) throw ValidationError("realizations must be positive");
  if (options.horizon < 0) throw ValidationError("horizon must be non-negative");
  const Eigen::Index e = ops.num_edges();
  cfg.validate(e);
  require_shape(a.a, e, e, "combination matrix");
  const VectorXd target = h_true.flat();
  const int order = h_true.order;
  const int horizon = options.horizon;
  const int runs = options.realizations;
  const auto agents = static_cast<std::size_t>(e);

  struct Trace {
    std::vector<double> network;
    std::vector<std::vector<double>> agent;
    bool diverged = false;
  };
  std::vector<Trace> traces(runs);
  parallel_for(runs, options.threads, [&](int r) {
    StreamConfig local = cfg;
    local.seed = derive_seed(options.seed, static_cast<std::uint64_t>(r));
    StreamGenerator gen(h_true, ops, local);
    NetworkState net = initial_network_state(static_cast<int>(e), static_cast<int>(target.size()),
                                             options.mu);
    Trace& tr = traces[r];
    tr.network.reserve(horizon + 1);
    if (options.agent_traces) tr.agent.assign(agents, {});
    auto record = [&] {
      double total = 0.0;
      for (std::size_t i = 0; i < agents; ++i) {
        const double err = (target - net.h[i]).squaredNorm();
        total += err;
        if (options.agent_traces) tr.agent[i].push_back(err);
      }
      tr.network.push_back(total / static_cast<double>(agents));
    };
    for (int m = 0; m < order; ++m) gen.next();
    record();
    try {
      for (int n = 0; n < horizon; ++n) {
        const auto& s = gen.next();
        atc_update(net, a, s.regressors, s.d, s.y);
        record();
      }
    } catch (const DivergenceError&) {
      tr.diverged = true;
    }
  });

  DistributedResult out;
  out.msd.assign(horizon + 1, 0.0);
  if (options.agent_traces) out.agent_msd.assign(agents, std::vector<double>(horizon + 1, 0.0));
  for (const auto& tr : traces) {
    out.diverged.push_back(tr.diverged);
    if (tr.diverged) continue;
    ++out.completed;
    for (int n = 0; n <= horizon; ++n) out.msd[n] += tr.network[n];
    out.tail_msd.push_back(tail_average(tr.network));
    for (std::size_t i = 0; i < tr.agent.size(); ++i) {
      for (int n = 0; n <= horizon; ++n) out.agent_msd[i][n] += tr.agent[i][n];
    }
  }
  if (out.completed > 0) {
    for (double& v : out.msd) v /= out.completed;
    for (auto& row : out.agent_msd) {
      for (double& v : row) v /= out.completed;
    }
  }
  return out;
}

}  // namespace topolms
