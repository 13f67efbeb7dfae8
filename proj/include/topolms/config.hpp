#pragma once
// Declarative experiment configuration (one JSON object per run) with
// command-line overrides. Unknown keys are rejected so typos surface as
// config errors.
//
// Keys (all optional unless noted; defaults in the struct below):
//   mode          "lms" | "sampling" | "topo-infer" | "distributed" | "ar-train"
//   complex       {"file": path}
//                 {"random": {"vertices", "edge_prob", "fill_prob"}}
//                 {"counts": {"vertices", "edges", "triangles", "closure_bias",
//                             "connected", "fill_all"}}
//                 {"dfn": true}   17/26/5 complex
//   complex_seed  seed of the random complex (defaults to seed)
//   unit_scale    divide every Laplacian by lambda_max(L1)
//   order, mu, filter (flat taps), signal_var
//   noise         {"constant": v} | {"choice": [...]} | {"uniform": [lo, hi]}
//                 | {"log_uniform": [lo, hi]} | {"values": [... one per edge]}
//   sample_prob   scalar or one value per edge
//   realizations, horizon, seed, threads
//   sampling      {"alpha", "gamma", "p_max", "tol", "max_iter", "method",
//                  "simulate"}
//   topology      {"mu1", "mu2", "lambda0", "lambda1", "delete_triangles",
//                  "change_at", "record_stride"}
//   distributed   {"rule": "uniform" | "metropolis", "emit_agent_traces"}
//   ar            {"series": path, "train", "epochs", "distributed", "variant":
//                  "topo" | "edge-laplacian" | "both",
//                  "surrogate": {"upper", "lower", "amplitude",
//                                "innovation_std"}}
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "topolms/dataset.hpp"
#include "topolms/diffusion.hpp"
#include "topolms/sampling.hpp"
#include "topolms/signal_model.hpp"
#include "topolms/simplicial.hpp"

namespace topolms {

enum class Mode { kLms, kSampling, kTopoInfer, kDistributed, kArTrain };

std::string mode_name(Mode m);
Mode parse_mode(const std::string& s);

struct ComplexSource {
  enum class Kind { kFile, kRandom, kCounts, kDfn } kind = Kind::kCounts;
  std::string file;
  int vertices = 12;
  double edge_prob = 0.4;
  double fill_prob = 0.5;
  int edges = 27;
  int triangles = 4;
  double closure_bias = 0.5;
  bool connected = true;
  bool fill_all = false;
};

struct NoiseSpec {
  enum class Kind { kConstant, kChoice, kUniform, kLogUniform, kValues } kind = Kind::kChoice;
  std::vector<double> values = {1e-6, 1e-4, 1e-3, 1e-2};
  double lo = 0.0;
  double hi = 0.0;
};

struct SamplingSettings {
  double alpha = 0.98;
  double gamma = 1e-7;
  double p_max = 1.0;
  double tol = 1e-9;
  int max_iter = 200;
  SamplingMethod method = SamplingMethod::kBarrier;
  bool simulate = false;
};

struct TopologySettings {
  double mu1 = 1e-2;
  double mu2 = 1e-2;
  double lambda0 = 0.1;
  double lambda1 = 0.1;
  int delete_triangles = 0;
  std::vector<long> change_at;  // iterations of successive deletions
  int record_stride = 1;
};

struct DistributedSettings {
  CombinationRule rule = CombinationRule::kUniform;
  bool emit_agent_traces = false;
};

struct ArSettings {
  std::string series;  // empty: DFN-scale surrogate
  int train = -1;
  int epochs = 1;
  std::string variant = "both";
  bool distributed = false;  // ATC over a uniform combination of edges
  std::vector<double> upper = {0.8, 0.08, -0.04};
  std::vector<double> lower = {0.5, -0.2, 0.1};
  double amplitude = 1.0;
  double innovation_std = 1.0;
};

struct ExperimentConfig {
  Mode mode = Mode::kLms;
  ComplexSource complex;
  std::optional<std::uint64_t> complex_seed;
  bool unit_scale = true;
  int order = 2;
  double mu = 1e-2;
  std::vector<double> filter;  // empty: default_filter(order)
  double signal_var = 1.0;
  NoiseSpec noise;
  std::vector<double> sample_prob = {1.0};
  int realizations = 30;
  int horizon = 20000;
  std::uint64_t seed = 1;
  int threads = 0;
  SamplingSettings sampling;
  TopologySettings topology;
  DistributedSettings distributed;
  ArSettings ar;

  // Throws ValidationError on out-of-range values and missing files.
  void validate() const;
};

// Values given on the command line; each one replaces the file value.
struct ConfigOverrides {
  std::optional<double> mu;
  std::optional<double> mu1;
  std::optional<double> mu2;
  std::optional<double> alpha;
  std::optional<double> gamma;
  std::optional<double> p_max;
  std::optional<double> tol;
  std::optional<int> max_iter;
  std::optional<double> lambda0;
  std::optional<double> lambda1;
  std::optional<std::uint64_t> seed;
  std::optional<int> realizations;
  std::optional<int> horizon;
  std::optional<int> threads;
  std::optional<int> order;
  std::optional<int> epochs;
  bool emit_agent_traces = false;
};

// Throws ParseError on malformed JSON or wrong value types and
// ValidationError on unknown keys. Relative file paths are resolved against
// `base_dir` when it is non-empty.
ExperimentConfig config_from_json(const nlohmann::json& doc, const std::string& base_dir = "");
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);
void apply_overrides(ExperimentConfig& cfg, const ConfigOverrides& o);

// h = [1, 0.5, 0.25, ..., 0.4, 0.2, ...]: upper taps 0.5^m, lower taps
// 0.4 * 0.5^(m-1).
FilterCoeffs default_filter(int order);

// Materialization helpers. All draws come from sub-streams of the config
// seeds, so a config and seed fix every input.
SimplicialComplex2 build_complex(const ExperimentConfig& cfg);
HodgeOperators build_operators(const ExperimentConfig& cfg, const SimplicialComplex2& c);
FilterCoeffs build_filter(const ExperimentConfig& cfg);
VectorXd build_noise(const ExperimentConfig& cfg, Eigen::Index num_edges);
VectorXd build_sample_prob(const ExperimentConfig& cfg, Eigen::Index num_edges);
StreamConfig build_stream(const ExperimentConfig& cfg, Eigen::Index num_edges);
EdgeSeriesDataset build_dataset(const ExperimentConfig& cfg);

}  // namespace topolms
