// topolms: command-line front end for the experiment harness.
//
// Every subcommand reads an optional JSON config (--config), applies flag
// overrides and writes a result file (--out, JSON unless the path ends in
// .csv; stdout when omitted). Exit codes: 0 success, 1 other failure,
// 2 config error, 3 numerical divergence, 4 infeasible sampling problem.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "topolms/autoregressive.hpp"
#include "topolms/complex_io.hpp"
#include "topolms/config.hpp"
#include "topolms/diffusion.hpp"
#include "topolms/error.hpp"
#include "topolms/lms.hpp"
#include "topolms/results.hpp"
#include "topolms/sampling.hpp"
#include "topolms/topology.hpp"

using namespace topolms;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitInfeasible = 4;

struct Invocation {
  std::string config_path;
  std::string out;
  ConfigOverrides overrides;
  // generate-complex only
  std::optional<int> vertices;
  std::optional<int> edges;
  std::optional<int> triangles;
};

void add_common(CLI::App* sub, Invocation& inv) {
  auto& o = inv.overrides;
  sub->add_option("--config", inv.config_path, "JSON experiment config")->check(CLI::ExistingFile);
  sub->add_option("--out", inv.out, "result file (.json or .csv); stdout when omitted");
  sub->add_option("--seed", o.seed, "master seed");
  sub->add_option("--mu", o.mu, "step size");
  sub->add_option("--mu1", o.mu1, "filter step size (topology inference)");
  sub->add_option("--mu2", o.mu2, "indicator step size (topology inference)");
  sub->add_option("--alpha", o.alpha, "convergence-rate target (sampling)");
  sub->add_option("--gamma", o.gamma, "MSD target (sampling)");
  sub->add_option("--p-max", o.p_max, "upper bound on every sampling probability");
  sub->add_option("--tol", o.tol, "solver tolerance (sampling)");
  sub->add_option("--max-iter", o.max_iter, "solver iteration cap (sampling)");
  sub->add_option("--lambda0", o.lambda0, "sparsity weight (topology inference)");
  sub->add_option("--lambda1", o.lambda1, "filling weight (topology inference)");
  sub->add_option("--realizations", o.realizations, "Monte-Carlo realizations");
  sub->add_option("--horizon", o.horizon, "iterations per realization");
  sub->add_option("--threads", o.threads, "worker threads (0: hardware)");
  sub->add_option("--order", o.order, "filter order M");
  sub->add_option("--epochs", o.epochs, "training epochs (ar-train)");
  sub->add_flag("--emit-agent-traces", o.emit_agent_traces, "per-agent MSD curves (distributed)");
}

ExperimentConfig resolve_config(const Invocation& inv, std::optional<Mode> mode) {
  ExperimentConfig cfg;
  bool mode_in_file = false;
  if (!inv.config_path.empty()) {
    cfg = load_config(inv.config_path);
    std::ifstream in(inv.config_path);
    mode_in_file = nlohmann::json::parse(in).contains("mode");
  }
  if (mode) {
    if (mode_in_file && cfg.mode != *mode) {
      throw ValidationError("config mode '" + mode_name(cfg.mode) + "' does not match the " +
                            mode_name(*mode) + " subcommand");
    }
    cfg.mode = *mode;
  }
  apply_overrides(cfg, inv.overrides);
  cfg.validate();
  return cfg;
}

ResultSet new_results(const ExperimentConfig& cfg) {
  ResultSet rs;
  rs.metadata = make_metadata(mode_name(cfg.mode), cfg.seed);
  rs.config = config_to_json(cfg);
  return rs;
}

void write(const ResultSet& rs, const std::string& out) {
  if (out.empty()) {
    std::cout << results_to_json(rs).dump(2) << "\n";
  } else {
    emit_results(rs, out, format_for_path(out));
  }
}

// At most ~1000 points per curve.
long curve_stride(long n) { return std::max(1L, n / 1000); }

void add_curve(ResultSet& rs, const std::string& name, const std::vector<double>& curve) {
  const long stride = curve_stride(static_cast<long>(curve.size()) - 1);
  for (std::size_t n = 0; n < curve.size(); n += stride) rs.add(name, static_cast<long>(n), curve[n]);
  if ((curve.size() - 1) % stride != 0) {
    rs.add(name, static_cast<long>(curve.size()) - 1, curve.back());
  }
}

void add_vector(ResultSet& rs, const std::string& name, const VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) rs.add(name, i, v(i));
}

void add_theory(ResultSet& rs, const TheoryReport& th) {
  rs.add("mu_max", 0, th.mu_max);
  rs.add("rho_q", 0, th.rho_q);
  rs.add("alpha", 0, th.alpha);
  rs.add("msd_theory", 0, th.msd_exact);
  rs.add("msd_first_order", 0, th.msd_first_order);
  rs.add("stable", 0, th.stable ? 1.0 : 0.0);
}

int count_diverged(const std::vector<bool>& flags) {
  return static_cast<int>(std::count(flags.begin(), flags.end(), true));
}

int cmd_generate_complex(const Invocation& inv) {
  ExperimentConfig cfg = resolve_config(inv, std::nullopt);
  if (inv.vertices || inv.edges || inv.triangles) {
    if (!inv.vertices || !inv.edges || !inv.triangles) {
      throw ValidationError("--vertices, --edges and --triangles go together");
    }
    cfg.complex.kind = ComplexSource::Kind::kCounts;
    cfg.complex.vertices = *inv.vertices;
    cfg.complex.edges = *inv.edges;
    cfg.complex.triangles = *inv.triangles;
    cfg.validate();
  }
  const SimplicialComplex2 c = build_complex(cfg);
  if (inv.out.empty()) {
    write_complex(std::cout, c);
  } else {
    std::ofstream out(inv.out);
    if (!out) throw IoError("cannot open '" + inv.out + "' for writing");
    write_complex(out, c);
    if (!out.flush()) throw IoError("write to '" + inv.out + "' failed");
  }
  return kExitOk;
}

int cmd_run_lms(const Invocation& inv) {
  const ExperimentConfig cfg = resolve_config(inv, Mode::kLms);
  const SimplicialComplex2 c = build_complex(cfg);
  const HodgeOperators ops = build_operators(cfg, c);
  const FilterCoeffs h = build_filter(cfg);
  const StreamConfig stream = build_stream(cfg, ops.num_edges());
  const MomentSet mom =
      moments_closed_form(ops, stream.sample_prob, stream.signal_cov, stream.noise_var, cfg.order, h);
  ExperimentOptions opt;
  opt.mu = cfg.mu;
  opt.realizations = cfg.realizations;
  opt.horizon = cfg.horizon;
  opt.seed = cfg.seed;
  opt.threads = cfg.threads;
  const ExperimentResult res = run_experiment(ops, h, stream, opt);

  ResultSet rs = new_results(cfg);
  add_theory(rs, theory_report(mom.c_x, mom.g, cfg.mu));
  add_curve(rs, "msd", res.msd);
  for (std::size_t r = 0; r < res.tail_msd.size(); ++r) {
    rs.add("tail_msd", static_cast<long>(r), res.tail_msd[r]);
  }
  if (!res.tail_msd.empty()) {
    const TailStats ts = mean_confidence(res.tail_msd);
    rs.add("tail_msd_mean", 0, ts.mean);
    rs.add("tail_msd_half_width95", 0, ts.half_width95);
  }
  rs.add("diverged", 0, count_diverged(res.diverged));
  write(rs, inv.out);
  return count_diverged(res.diverged) > 0 ? kExitDivergence : kExitOk;
}

SamplingProblem sampling_problem(const ExperimentConfig& cfg, const HodgeOperators& ops,
                                 const StreamConfig& stream) {
  SamplingProblem prob;
  prob.mu = cfg.mu;
  prob.alpha = cfg.sampling.alpha;
  prob.gamma = cfg.sampling.gamma;
  prob.p_max = VectorXd::Constant(ops.num_edges(), cfg.sampling.p_max);
  prob.edge_moments = edge_moment_matrices(ops, stream.signal_cov, cfg.order);
  prob.noise_var = stream.noise_var;
  return prob;
}

int cmd_design_sampling(const Invocation& inv) {
  const ExperimentConfig cfg = resolve_config(inv, Mode::kSampling);
  const SimplicialComplex2 c = build_complex(cfg);
  const HodgeOperators ops = build_operators(cfg, c);
  StreamConfig stream = build_stream(cfg, ops.num_edges());
  const SamplingProblem prob = sampling_problem(cfg, ops, stream);
  SamplingOptions so;
  so.method = cfg.sampling.method;
  so.tol = cfg.sampling.tol;
  so.max_iter = cfg.sampling.max_iter;
  const SamplingSolution sol = solve_sampling(prob, so);

  ResultSet rs = new_results(cfg);
  add_vector(rs, "p_star", sol.p_star);
  add_vector(rs, "noise_var", prob.noise_var);
  rs.add("objective", 0, sol.objective);
  rs.add("support_size", 0, static_cast<double>(sol.support().size()));
  rs.add("rate_slack", 0, sol.slacks.rate_slack);
  rs.add("msd_slack", 0, sol.slacks.msd_slack);
  rs.add("lower_slack", 0, sol.slacks.lower_slack);
  rs.add("upper_slack", 0, sol.slacks.upper_slack);
  rs.add("iterations", 0, sol.iterations);
  rs.add("converged", 0, sol.converged ? 1.0 : 0.0);
  rs.add("certificate", 0, sol.certificate);
  rs.add("heuristic_feasibility", 0, sol.heuristic_feasibility ? 1.0 : 0.0);

  int code = kExitOk;
  if (cfg.sampling.simulate) {
    const FilterCoeffs h = build_filter(cfg);
    stream.sample_prob = sol.p_star;
    const MomentSet mom =
        moments_closed_form(ops, sol.p_star, stream.signal_cov, stream.noise_var, cfg.order, h);
    add_theory(rs, theory_report(mom.c_x, mom.g, cfg.mu));
    ExperimentOptions opt;
    opt.mu = cfg.mu;
    opt.realizations = cfg.realizations;
    opt.horizon = cfg.horizon;
    opt.seed = cfg.seed;
    opt.threads = cfg.threads;
    const ExperimentResult res = run_experiment(ops, h, stream, opt);
    add_curve(rs, "msd", res.msd);
    if (!res.tail_msd.empty()) {
      const TailStats ts = mean_confidence(res.tail_msd);
      rs.add("tail_msd_mean", 0, ts.mean);
      rs.add("tail_msd_half_width95", 0, ts.half_width95);
    }
    rs.add("diverged", 0, count_diverged(res.diverged));
    if (count_diverged(res.diverged) > 0) code = kExitDivergence;
  }
  write(rs, inv.out);
  return code;
}

// Successive indicator vectors: each change removes `count` triangles chosen
// uniformly among those still filled.
std::vector<TopologyChange> deletion_schedule(const ExperimentConfig& cfg, const VectorXd& t0) {
  std::vector<TopologyChange> out;
  Rng rng(derive_seed(cfg.seed, 103));
  VectorXd t = t0;
  for (long at : cfg.topology.change_at) {
    for (int k = 0; k < cfg.topology.delete_triangles; ++k) {
      std::vector<Eigen::Index> filled;
      for (Eigen::Index j = 0; j < t.size(); ++j) {
        if (t(j) == 1.0) filled.push_back(j);
      }
      if (filled.empty()) break;
      t(filled[rng.below(filled.size())]) = 0.0;
    }
    out.push_back({at, t});
  }
  return out;
}

int cmd_infer_topology(const Invocation& inv) {
  const ExperimentConfig cfg = resolve_config(inv, Mode::kTopoInfer);
  const SimplicialComplex2 c = build_complex(cfg);
  const TopologyModel model = make_topology_model(with_triangles(c, {}), cfg.order);
  TopologyExperiment ex;
  ex.h_true = build_filter(cfg);
  ex.t_true = indicators_of(model, c);
  ex.changes = deletion_schedule(cfg, ex.t_true);
  const StreamConfig stream = build_stream(cfg, model.num_edges());
  ex.signal_cov = stream.signal_cov;
  ex.noise_var = stream.noise_var;
  ex.sample_prob = stream.sample_prob;
  ex.mu1 = cfg.topology.mu1;
  ex.mu2 = cfg.topology.mu2;
  ex.lambda0 = cfg.topology.lambda0;
  ex.lambda1 = cfg.topology.lambda1;
  ex.horizon = cfg.horizon;
  ex.realizations = cfg.realizations;
  ex.seed = cfg.seed;
  ex.threads = cfg.threads;
  ex.record_stride = cfg.topology.record_stride;
  const TopologyResult res = run_topology_experiment(model, ex);

  ResultSet rs = new_results(cfg);
  add_vector(rs, "t_true", ex.t_true);
  for (std::size_t k = 0; k < ex.changes.size(); ++k) {
    add_vector(rs, "t_true_phase" + std::to_string(k + 1), ex.changes[k].t_true);
  }
  rs.add_series("msd_h", res.iterations, res.msd_h);
  rs.add_series("err_t", res.iterations, res.err_t);
  const VectorXd t_last = ex.changes.empty() ? ex.t_true : ex.changes.back().t_true;
  const HodgeOperators ops = model.operators(t_last);
  const MomentSet mom = moments_closed_form(ops, ex.sample_prob, ex.signal_cov, ex.noise_var,
                                            cfg.order, ex.h_true);
  add_theory(rs, theory_report(mom.c_x, mom.g, ex.mu1));
  const std::size_t phases = ex.changes.size() + 1;
  int diverged = 0;
  for (std::size_t k = 0; k < phases; ++k) {
    int recovered = 0;
    for (std::size_t r = 0; r < res.runs.size(); ++r) {
      const long at = res.runs[r].recovered_at[k];
      rs.add("recovered_at_phase" + std::to_string(k), static_cast<long>(r),
             static_cast<double>(at));
      recovered += at >= 0;
    }
    rs.add("recovered_fraction_phase" + std::to_string(k), 0,
           static_cast<double>(recovered) / static_cast<double>(res.runs.size()));
  }
  for (std::size_t r = 0; r < res.runs.size(); ++r) {
    rs.add("tail_msd_h", static_cast<long>(r), res.runs[r].tail_msd_h);
    diverged += res.runs[r].diverged;
  }
  rs.add("diverged", 0, diverged);
  write(rs, inv.out);
  return diverged > 0 ? kExitDivergence : kExitOk;
}

int cmd_run_distributed(const Invocation& inv) {
  const ExperimentConfig cfg = resolve_config(inv, Mode::kDistributed);
  const SimplicialComplex2 c = build_complex(cfg);
  const HodgeOperators ops = build_operators(cfg, c);
  const FilterCoeffs h = build_filter(cfg);
  const StreamConfig stream = build_stream(cfg, ops.num_edges());
  const CombinationMatrix a =
      build_combination(lower_adjacency_neighborhoods(c), cfg.distributed.rule);
  const VectorXd mu = VectorXd::Constant(ops.num_edges(), cfg.mu);
  const DistTheoryReport th = dist_theory(
      a, local_moments(ops, stream.signal_cov, stream.sample_prob, cfg.order), stream.noise_var, mu);
  DistributedOptions opt;
  opt.mu = mu;
  opt.realizations = cfg.realizations;
  opt.horizon = cfg.horizon;
  opt.seed = cfg.seed;
  opt.threads = cfg.threads;
  opt.agent_traces = cfg.distributed.emit_agent_traces;
  const DistributedResult res = run_distributed(ops, h, stream, a, opt);

  ResultSet rs = new_results(cfg);
  rs.add("rho_b", 0, th.rho_b);
  rs.add("irreducible", 0, th.irreducible ? 1.0 : 0.0);
  rs.add("hypotheses_hold", 0, th.hypotheses_hold ? 1.0 : 0.0);
  rs.add("stable", 0, th.stable ? 1.0 : 0.0);
  rs.add("msd_theory_network", 0, th.msd_network);
  rs.add("msd_theory", 0, th.msd_per_agent);
  add_curve(rs, "msd", res.msd);
  for (std::size_t i = 0; i < res.agent_msd.size(); ++i) {
    add_curve(rs, "agent_msd_" + std::to_string(i + 1), res.agent_msd[i]);
  }
  if (!res.tail_msd.empty()) {
    const TailStats ts = mean_confidence(res.tail_msd);
    rs.add("tail_msd_mean", 0, ts.mean);
    rs.add("tail_msd_half_width95", 0, ts.half_width95);
  }
  rs.add("diverged", 0, count_diverged(res.diverged));
  write(rs, inv.out);
  return count_diverged(res.diverged) > 0 ? kExitDivergence : kExitOk;
}

int cmd_ar_train(const Invocation& inv) {
  const ExperimentConfig cfg = resolve_config(inv, Mode::kArTrain);
  const EdgeSeriesDataset ds = build_dataset(cfg);
  ArTrainOptions opt;
  opt.order = cfg.order;
  opt.mu = cfg.mu;
  opt.epochs = cfg.ar.epochs;
  std::vector<std::pair<std::string, ArVariant>> variants;
  if (cfg.ar.variant != "edge-laplacian") variants.emplace_back("topo", ArVariant::kTopo);
  if (cfg.ar.variant != "topo") variants.emplace_back("edge-laplacian", ArVariant::kEdgeLaplacian);

  ResultSet rs = new_results(cfg);
  for (const auto& [name, variant] : variants) {
    opt.variant = variant;
    ArTrainResult res;
    if (cfg.ar.distributed) {
      const CombinationMatrix a = build_combination(lower_adjacency_neighborhoods(ds.complex),
                                                    CombinationRule::kUniform);
      res = run_distributed_ar(ds, opt, a);
    } else {
      res = run_ar_training(ds, opt);
    }
    if (res.h.size() > 0) add_vector(rs, name + ".h", res.h);
    rs.add_series(name + ".train_error", res.train_error);
    rs.add_series(name + ".test_error", res.test_error);
    rs.add(name + ".mean_test_error", 0, res.mean_test_error);
    if (!std::isfinite(res.mean_test_error)) throw DivergenceError(name + ": non-finite test error");
  }
  write(rs, inv.out);
  return kExitOk;
}

// Theory only: no simulation.
int cmd_analyze(const Invocation& inv) {
  const ExperimentConfig cfg = resolve_config(inv, std::nullopt);
  ResultSet rs = new_results(cfg);
  const SimplicialComplex2 c = build_complex(cfg);
  const HodgeOperators ops = build_operators(cfg, c);
  const StreamConfig stream = build_stream(cfg, ops.num_edges());
  rs.add("num_vertices", 0, c.num_vertices());
  rs.add("num_edges", 0, c.num_edges());
  rs.add("num_triangles", 0, c.num_triangles());
  rs.add("num_cliques", 0, static_cast<double>(enumerate_3cliques(c).size()));
  rs.add("operator_scale", 0, ops.scale);
  add_vector(rs, "l1_eigenvalues", ops.eigenvalues);
  if (cfg.mode == Mode::kDistributed) {
    const CombinationMatrix a =
        build_combination(lower_adjacency_neighborhoods(c), cfg.distributed.rule);
    const DistTheoryReport th = dist_theory(
        a, local_moments(ops, stream.signal_cov, stream.sample_prob, cfg.order), stream.noise_var,
        VectorXd::Constant(ops.num_edges(), cfg.mu));
    rs.add("rho_b", 0, th.rho_b);
    rs.add("irreducible", 0, th.irreducible ? 1.0 : 0.0);
    rs.add("hypotheses_hold", 0, th.hypotheses_hold ? 1.0 : 0.0);
    rs.add("msd_theory_network", 0, th.msd_network);
    rs.add("msd_theory", 0, th.msd_per_agent);
  } else {
    const FilterCoeffs h = build_filter(cfg);
    const MomentSet mom = moments_closed_form(ops, stream.sample_prob, stream.signal_cov,
                                              stream.noise_var, cfg.order, h);
    add_theory(rs, theory_report(mom.c_x, mom.g, cfg.mu));
    const RateReport rate = convergence_rate(mom.c_x, cfg.mu);
    rs.add("rate_approx", 0, rate.approx);
    rs.add("small_step", 0, rate.small_step ? 1.0 : 0.0);
    if (cfg.mode == Mode::kSampling) {
      const ConstraintReport cr = check_constraints(stream.sample_prob, sampling_problem(cfg, ops, stream));
      rs.add("rate_slack", 0, cr.rate_slack);
      rs.add("msd_slack", 0, cr.msd_slack);
      rs.add("feasible", 0, cr.feasible(1e-6) ? 1.0 : 0.0);
    }
  }
  write(rs, inv.out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topological LMS experiments on simplicial complexes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", library_version());

  Invocation inv;
  struct Cmd {
    const char* name;
    const char* help;
    int (*run)(const Invocation&);
  };
  const std::vector<Cmd> cmds = {
      {"generate-complex", "write a seeded random complex", cmd_generate_complex},
      {"run-lms", "Monte-Carlo Topo-LMS against steady-state theory", cmd_run_lms},
      {"design-sampling", "solve the sampling-probability design", cmd_design_sampling},
      {"infer-topology", "joint filter and triangle inference", cmd_infer_topology},
      {"run-distributed", "diffusion Topo-LMS against network theory", cmd_run_distributed},
      {"ar-train", "autoregressive training against the edge-Laplacian baseline", cmd_ar_train},
      {"analyze", "theory report of a config without simulation", cmd_analyze},
  };
  std::vector<CLI::App*> subs;
  for (const auto& cmd : cmds) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    add_common(sub, inv);
    if (std::string(cmd.name) == "generate-complex") {
      sub->add_option("--vertices", inv.vertices, "vertex count");
      sub->add_option("--edges", inv.edges, "edge count");
      sub->add_option("--triangles", inv.triangles, "triangle count");
    }
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    for (std::size_t k = 0; k < cmds.size(); ++k) {
      if (subs[k]->parsed()) return cmds[k].run(inv);
    }
    return kExitFailure;
  } catch (const ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const StabilityError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}
