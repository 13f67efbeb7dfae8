#include "topolms/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "topolms/complex_io.hpp"
#include "topolms/error.hpp"
#include "topolms/rng.hpp"
#include "topolms/topology.hpp"

namespace topolms {

using nlohmann::json;

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::kLms: return "lms";
    case Mode::kSampling: return "sampling";
    case Mode::kTopoInfer: return "topo-infer";
    case Mode::kDistributed: return "distributed";
    case Mode::kArTrain: return "ar-train";
  }
  return "lms";
}

Mode parse_mode(const std::string& s) {
  for (Mode m : {Mode::kLms, Mode::kSampling, Mode::kTopoInfer, Mode::kDistributed,
                 Mode::kArTrain}) {
    if (mode_name(m) == s) return m;
  }
  throw ValidationError("unknown mode '" + s + "'");
}

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ValidationError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

std::string resolve(const std::string& path, const std::string& base_dir) {
  if (path.empty() || base_dir.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(base_dir) / path).string();
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError("config: " + msg);
}

bool in_unit(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }

}  // namespace

void ExperimentConfig::validate() const {
  switch (complex.kind) {
    case ComplexSource::Kind::kFile:
      require(std::filesystem::exists(complex.file),
              "complex file '" + complex.file + "' does not exist");
      break;
    case ComplexSource::Kind::kRandom:
      require(complex.vertices >= 2, "complex.random.vertices must be at least 2");
      require(in_unit(complex.edge_prob), "complex.random.edge_prob must lie in [0, 1]");
      require(in_unit(complex.fill_prob), "complex.random.fill_prob must lie in [0, 1]");
      break;
    case ComplexSource::Kind::kCounts: {
      const long pairs = static_cast<long>(complex.vertices) * (complex.vertices - 1) / 2;
      require(complex.vertices >= 2, "complex.counts.vertices must be at least 2");
      require(complex.edges >= 1 && complex.edges <= pairs,
              "complex.counts.edges must lie in [1, V(V-1)/2]");
      require(complex.triangles >= 0, "complex.counts.triangles must be non-negative");
      require(in_unit(complex.closure_bias), "complex.counts.closure_bias must lie in [0, 1]");
      break;
    }
    case ComplexSource::Kind::kDfn:
      break;
  }
  require(order >= 1 && order <= 10, "order must lie in [1, 10]");
  require(std::isfinite(mu) && mu > 0.0, "mu must be positive");
  require(filter.empty() || static_cast<int>(filter.size()) == regressor_width(order),
          "filter must have 2 * order + 1 taps");
  for (double v : filter) require(std::isfinite(v), "filter taps must be finite");
  require(std::isfinite(signal_var) && signal_var > 0.0, "signal_var must be positive");
  switch (noise.kind) {
    case NoiseSpec::Kind::kConstant:
    case NoiseSpec::Kind::kChoice:
    case NoiseSpec::Kind::kValues:
      require(!noise.values.empty(), "noise needs at least one value");
      for (double v : noise.values) require(std::isfinite(v) && v >= 0.0, "noise must be >= 0");
      break;
    case NoiseSpec::Kind::kUniform:
      require(std::isfinite(noise.lo) && noise.lo >= 0.0 && noise.hi >= noise.lo,
              "noise.uniform needs 0 <= lo <= hi");
      break;
    case NoiseSpec::Kind::kLogUniform:
      require(std::isfinite(noise.hi) && noise.lo > 0.0 && noise.hi >= noise.lo,
              "noise.log_uniform needs 0 < lo <= hi");
      break;
  }
  require(!sample_prob.empty(), "sample_prob must not be empty");
  for (double v : sample_prob) require(in_unit(v), "sample_prob entries must lie in [0, 1]");
  require(realizations >= 1, "realizations must be at least 1");
  require(horizon >= 1, "horizon must be at least 1");
  require(threads >= 0, "threads must be non-negative");

  require(sampling.alpha > 0.0 && sampling.alpha < 1.0, "sampling.alpha must lie in (0, 1)");
  require(sampling.gamma > 0.0, "sampling.gamma must be positive");
  require(sampling.p_max > 0.0 && sampling.p_max <= 1.0, "sampling.p_max must lie in (0, 1]");
  require(sampling.tol > 0.0, "sampling.tol must be positive");
  require(sampling.max_iter >= 1, "sampling.max_iter must be at least 1");

  require(topology.mu1 > 0.0 && topology.mu2 > 0.0, "topology.mu1 and mu2 must be positive");
  try {
    validate_thresholds(topology.lambda0, topology.lambda1);
  } catch (const ValidationError& e) {
    require(false, std::string("topology: ") + e.what());
  }
  require(topology.delete_triangles >= 0, "topology.delete_triangles must be non-negative");
  for (long at : topology.change_at) {
    require(at > 0 && at < horizon, "topology.change_at must lie inside the horizon");
  }
  require(topology.record_stride >= 1, "topology.record_stride must be at least 1");

  require(ar.series.empty() || std::filesystem::exists(ar.series),
          "ar.series file '" + ar.series + "' does not exist");
  require(ar.epochs >= 1, "ar.epochs must be at least 1");
  require(ar.variant == "topo" || ar.variant == "edge-laplacian" || ar.variant == "both",
          "ar.variant must be topo, edge-laplacian or both");
  require(ar.amplitude > 0.0 && ar.innovation_std > 0.0,
          "ar.surrogate amplitude and innovation_std must be positive");
  require(static_cast<int>(ar.upper.size()) >= 1 && static_cast<int>(ar.lower.size()) >= 1,
          "ar.surrogate taps must not be empty");
}

ExperimentConfig config_from_json(const json& doc, const std::string& base_dir) {
  ExperimentConfig cfg;
  try {
    check_keys(doc,
               {"mode", "complex", "complex_seed", "unit_scale", "order", "mu", "filter",
                "signal_var", "noise", "sample_prob", "realizations", "horizon", "seed",
                "threads", "sampling", "topology", "distributed", "ar"},
               "config");
    if (doc.contains("mode")) cfg.mode = parse_mode(doc.at("mode").get<std::string>());

    if (doc.contains("complex")) {
      const auto& c = doc.at("complex");
      check_keys(c, {"file", "random", "counts", "dfn"}, "complex");
      if (c.size() != 1) throw ValidationError("complex: give exactly one source");
      auto& src = cfg.complex;
      if (c.contains("file")) {
        src.kind = ComplexSource::Kind::kFile;
        src.file = resolve(c.at("file").get<std::string>(), base_dir);
      } else if (c.contains("random")) {
        const auto& r = c.at("random");
        check_keys(r, {"vertices", "edge_prob", "fill_prob"}, "complex.random");
        src.kind = ComplexSource::Kind::kRandom;
        read(r, "vertices", src.vertices);
        read(r, "edge_prob", src.edge_prob);
        read(r, "fill_prob", src.fill_prob);
      } else if (c.contains("counts")) {
        const auto& r = c.at("counts");
        check_keys(r, {"vertices", "edges", "triangles", "closure_bias", "connected", "fill_all"},
                   "complex.counts");
        src.kind = ComplexSource::Kind::kCounts;
        read(r, "vertices", src.vertices);
        read(r, "edges", src.edges);
        read(r, "triangles", src.triangles);
        read(r, "closure_bias", src.closure_bias);
        read(r, "connected", src.connected);
        read(r, "fill_all", src.fill_all);
      } else {
        if (!c.at("dfn").get<bool>()) throw ValidationError("complex.dfn must be true");
        src.kind = ComplexSource::Kind::kDfn;
      }
    }
    if (doc.contains("complex_seed")) cfg.complex_seed = doc.at("complex_seed").get<std::uint64_t>();
    read(doc, "unit_scale", cfg.unit_scale);
    read(doc, "order", cfg.order);
    read(doc, "mu", cfg.mu);
    read(doc, "filter", cfg.filter);
    read(doc, "signal_var", cfg.signal_var);
    if (doc.contains("noise")) {
      const auto& n = doc.at("noise");
      check_keys(n, {"constant", "choice", "uniform", "log_uniform", "values"}, "noise");
      if (n.size() != 1) throw ValidationError("noise: give exactly one law");
      auto& ns = cfg.noise;
      if (n.contains("constant")) {
        ns.kind = NoiseSpec::Kind::kConstant;
        ns.values = {n.at("constant").get<double>()};
      } else if (n.contains("choice")) {
        ns.kind = NoiseSpec::Kind::kChoice;
        ns.values = n.at("choice").get<std::vector<double>>();
      } else if (n.contains("values")) {
        ns.kind = NoiseSpec::Kind::kValues;
        ns.values = n.at("values").get<std::vector<double>>();
      } else {
        const bool log = n.contains("log_uniform");
        const auto range = n.at(log ? "log_uniform" : "uniform").get<std::vector<double>>();
        if (range.size() != 2) throw ValidationError("noise range must be [lo, hi]");
        ns.kind = log ? NoiseSpec::Kind::kLogUniform : NoiseSpec::Kind::kUniform;
        ns.lo = range[0];
        ns.hi = range[1];
      }
    }
    if (doc.contains("sample_prob")) {
      const auto& p = doc.at("sample_prob");
      cfg.sample_prob = p.is_array() ? p.get<std::vector<double>>()
                                     : std::vector<double>{p.get<double>()};
    }
    read(doc, "realizations", cfg.realizations);
    read(doc, "horizon", cfg.horizon);
    read(doc, "seed", cfg.seed);
    read(doc, "threads", cfg.threads);

    if (doc.contains("sampling")) {
      const auto& s = doc.at("sampling");
      check_keys(s, {"alpha", "gamma", "p_max", "tol", "max_iter", "method", "simulate"},
                 "sampling");
      read(s, "alpha", cfg.sampling.alpha);
      read(s, "gamma", cfg.sampling.gamma);
      read(s, "p_max", cfg.sampling.p_max);
      read(s, "tol", cfg.sampling.tol);
      read(s, "max_iter", cfg.sampling.max_iter);
      read(s, "simulate", cfg.sampling.simulate);
      if (s.contains("method")) {
        const auto m = s.at("method").get<std::string>();
        if (m == "barrier") cfg.sampling.method = SamplingMethod::kBarrier;
        else if (m == "subgradient") cfg.sampling.method = SamplingMethod::kSubgradient;
        else throw ValidationError("sampling.method must be barrier or subgradient");
      }
    }
    if (doc.contains("topology")) {
      const auto& t = doc.at("topology");
      check_keys(t, {"mu1", "mu2", "lambda0", "lambda1", "delete_triangles",
                     "change_at", "record_stride"},
                 "topology");
      read(t, "mu1", cfg.topology.mu1);
      read(t, "mu2", cfg.topology.mu2);
      read(t, "lambda0", cfg.topology.lambda0);
      read(t, "lambda1", cfg.topology.lambda1);
      read(t, "delete_triangles", cfg.topology.delete_triangles);
      read(t, "change_at", cfg.topology.change_at);
      read(t, "record_stride", cfg.topology.record_stride);
    }
    if (doc.contains("distributed")) {
      const auto& d = doc.at("distributed");
      check_keys(d, {"rule", "emit_agent_traces"}, "distributed");
      if (d.contains("rule")) {
        const auto r = d.at("rule").get<std::string>();
        if (r == "uniform") cfg.distributed.rule = CombinationRule::kUniform;
        else if (r == "metropolis") cfg.distributed.rule = CombinationRule::kMetropolis;
        else throw ValidationError("distributed.rule must be uniform or metropolis");
      }
      read(d, "emit_agent_traces", cfg.distributed.emit_agent_traces);
    }
    if (doc.contains("ar")) {
      const auto& a = doc.at("ar");
      check_keys(a, {"series", "train", "epochs", "distributed", "variant", "surrogate"}, "ar");
      if (a.contains("series")) cfg.ar.series = resolve(a.at("series").get<std::string>(), base_dir);
      read(a, "train", cfg.ar.train);
      read(a, "epochs", cfg.ar.epochs);
      read(a, "variant", cfg.ar.variant);
      read(a, "distributed", cfg.ar.distributed);
      if (a.contains("surrogate")) {
        const auto& s = a.at("surrogate");
        check_keys(s, {"upper", "lower", "amplitude", "innovation_std"}, "ar.surrogate");
        read(s, "upper", cfg.ar.upper);
        read(s, "lower", cfg.ar.lower);
        read(s, "amplitude", cfg.ar.amplitude);
        read(s, "innovation_std", cfg.ar.innovation_std);
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json c;
  const auto& src = cfg.complex;
  switch (src.kind) {
    case ComplexSource::Kind::kFile: c = {{"file", src.file}}; break;
    case ComplexSource::Kind::kRandom:
      c = {{"random",
            {{"vertices", src.vertices}, {"edge_prob", src.edge_prob}, {"fill_prob", src.fill_prob}}}};
      break;
    case ComplexSource::Kind::kCounts:
      c = {{"counts",
            {{"vertices", src.vertices},
             {"edges", src.edges},
             {"triangles", src.triangles},
             {"closure_bias", src.closure_bias},
             {"connected", src.connected},
             {"fill_all", src.fill_all}}}};
      break;
    case ComplexSource::Kind::kDfn: c = {{"dfn", true}}; break;
  }
  json noise;
  switch (cfg.noise.kind) {
    case NoiseSpec::Kind::kConstant: noise = {{"constant", cfg.noise.values.front()}}; break;
    case NoiseSpec::Kind::kChoice: noise = {{"choice", cfg.noise.values}}; break;
    case NoiseSpec::Kind::kValues: noise = {{"values", cfg.noise.values}}; break;
    case NoiseSpec::Kind::kUniform: noise = {{"uniform", {cfg.noise.lo, cfg.noise.hi}}}; break;
    case NoiseSpec::Kind::kLogUniform:
      noise = {{"log_uniform", {cfg.noise.lo, cfg.noise.hi}}};
      break;
  }
  json doc = {
      {"mode", mode_name(cfg.mode)},
      {"complex", c},
      {"unit_scale", cfg.unit_scale},
      {"order", cfg.order},
      {"mu", cfg.mu},
      {"filter", cfg.filter},
      {"signal_var", cfg.signal_var},
      {"noise", noise},
      {"sample_prob", cfg.sample_prob},
      {"realizations", cfg.realizations},
      {"horizon", cfg.horizon},
      {"seed", cfg.seed},
      {"threads", cfg.threads},
      {"sampling",
       {{"alpha", cfg.sampling.alpha},
        {"gamma", cfg.sampling.gamma},
        {"p_max", cfg.sampling.p_max},
        {"tol", cfg.sampling.tol},
        {"max_iter", cfg.sampling.max_iter},
        {"method", cfg.sampling.method == SamplingMethod::kBarrier ? "barrier" : "subgradient"},
        {"simulate", cfg.sampling.simulate}}},
      {"topology",
       {{"mu1", cfg.topology.mu1},
        {"mu2", cfg.topology.mu2},
        {"lambda0", cfg.topology.lambda0},
        {"lambda1", cfg.topology.lambda1},
        {"delete_triangles", cfg.topology.delete_triangles},
        {"change_at", cfg.topology.change_at},
        {"record_stride", cfg.topology.record_stride}}},
      {"distributed",
       {{"rule", cfg.distributed.rule == CombinationRule::kUniform ? "uniform" : "metropolis"},
        {"emit_agent_traces", cfg.distributed.emit_agent_traces}}},
      {"ar",
       {{"series", cfg.ar.series},
        {"train", cfg.ar.train},
        {"epochs", cfg.ar.epochs},
        {"variant", cfg.ar.variant},
        {"distributed", cfg.ar.distributed},
        {"surrogate",
         {{"upper", cfg.ar.upper},
          {"lower", cfg.ar.lower},
          {"amplitude", cfg.ar.amplitude},
          {"innovation_std", cfg.ar.innovation_std}}}}},
  };
  if (cfg.ar.series.empty()) doc["ar"].erase("series");
  if (cfg.complex_seed) doc["complex_seed"] = *cfg.complex_seed;
  return doc;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config file '" + path + "' cannot be opened");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("config '" + path + "': " + e.what());
  }
  return config_from_json(doc, std::filesystem::path(path).parent_path().string());
}

void apply_overrides(ExperimentConfig& cfg, const ConfigOverrides& o) {
  if (o.mu) cfg.mu = *o.mu;
  if (o.mu1) cfg.topology.mu1 = *o.mu1;
  if (o.mu2) cfg.topology.mu2 = *o.mu2;
  if (o.alpha) cfg.sampling.alpha = *o.alpha;
  if (o.gamma) cfg.sampling.gamma = *o.gamma;
  if (o.p_max) cfg.sampling.p_max = *o.p_max;
  if (o.tol) cfg.sampling.tol = *o.tol;
  if (o.max_iter) cfg.sampling.max_iter = *o.max_iter;
  if (o.lambda0) cfg.topology.lambda0 = *o.lambda0;
  if (o.lambda1) cfg.topology.lambda1 = *o.lambda1;
  if (o.seed) cfg.seed = *o.seed;
  if (o.realizations) cfg.realizations = *o.realizations;
  if (o.horizon) cfg.horizon = *o.horizon;
  if (o.threads) cfg.threads = *o.threads;
  if (o.order) cfg.order = *o.order;
  if (o.epochs) cfg.ar.epochs = *o.epochs;
  if (o.emit_agent_traces) cfg.distributed.emit_agent_traces = true;
}

FilterCoeffs default_filter(int order) {
  FilterCoeffs h = FilterCoeffs::zeros(order);
  for (int m = 0; m <= order; ++m) h.upper(m) = std::pow(0.5, m);
  for (int m = 1; m <= order; ++m) h.lower(m - 1) = 0.4 * std::pow(0.5, m - 1);
  return h;
}

SimplicialComplex2 build_complex(const ExperimentConfig& cfg) {
  const std::uint64_t seed = cfg.complex_seed.value_or(cfg.seed);
  const auto& src = cfg.complex;
  switch (src.kind) {
    case ComplexSource::Kind::kFile: return load_complex(src.file);
    case ComplexSource::Kind::kRandom:
      return random_complex(src.vertices, src.edge_prob, src.fill_prob, seed);
    case ComplexSource::Kind::kCounts: {
      CountedComplexOptions opts;
      opts.closure_bias = src.closure_bias;
      opts.require_connected = src.connected;
      opts.fill_all_cliques = src.fill_all;
      return random_complex_with_counts(src.vertices, src.edges, src.triangles, seed, opts);
    }
    case ComplexSource::Kind::kDfn: return dfn_scale_complex(seed);
  }
  return {};
}

HodgeOperators build_operators(const ExperimentConfig& cfg, const SimplicialComplex2& c) {
  const HodgeOperators ops = hodge_laplacians(c);
  return cfg.unit_scale ? unit_scaled(ops) : ops;
}

FilterCoeffs build_filter(const ExperimentConfig& cfg) {
  if (cfg.filter.empty()) return default_filter(cfg.order);
  return FilterCoeffs::from_flat(
      Eigen::Map<const VectorXd>(cfg.filter.data(), static_cast<Eigen::Index>(cfg.filter.size())),
      cfg.order);
}

VectorXd build_noise(const ExperimentConfig& cfg, Eigen::Index num_edges) {
  Rng rng(derive_seed(cfg.seed, 101));
  VectorXd out(num_edges);
  const auto& ns = cfg.noise;
  if (ns.kind == NoiseSpec::Kind::kValues &&
      static_cast<Eigen::Index>(ns.values.size()) != num_edges) {
    throw ValidationError("config: noise.values needs one value per edge");
  }
  for (Eigen::Index i = 0; i < num_edges; ++i) {
    switch (ns.kind) {
      case NoiseSpec::Kind::kConstant: out(i) = ns.values.front(); break;
      case NoiseSpec::Kind::kValues: out(i) = ns.values[i]; break;
      case NoiseSpec::Kind::kChoice: out(i) = ns.values[rng.below(ns.values.size())]; break;
      case NoiseSpec::Kind::kUniform: out(i) = rng.uniform(ns.lo, ns.hi); break;
      case NoiseSpec::Kind::kLogUniform:
        out(i) = std::exp(rng.uniform(std::log(ns.lo), std::log(ns.hi)));
        break;
    }
  }
  return out;
}

VectorXd build_sample_prob(const ExperimentConfig& cfg, Eigen::Index num_edges) {
  if (cfg.sample_prob.size() == 1) return VectorXd::Constant(num_edges, cfg.sample_prob.front());
  if (static_cast<Eigen::Index>(cfg.sample_prob.size()) != num_edges) {
    throw ValidationError("config: sample_prob needs one value or one per edge");
  }
  return Eigen::Map<const VectorXd>(cfg.sample_prob.data(), num_edges);
}

StreamConfig build_stream(const ExperimentConfig& cfg, Eigen::Index num_edges) {
  StreamConfig s;
  s.signal_cov = cfg.signal_var * MatrixXd::Identity(num_edges, num_edges);
  s.noise_var = build_noise(cfg, num_edges);
  s.sample_prob = build_sample_prob(cfg, num_edges);
  s.horizon = cfg.horizon + cfg.order;
  s.seed = cfg.seed;
  return s;
}

EdgeSeriesDataset build_dataset(const ExperimentConfig& cfg) {
  if (!cfg.ar.series.empty()) {
    if (cfg.complex.kind != ComplexSource::Kind::kFile) {
      throw ValidationError("config: ar.series needs a complex file");
    }
    return ingest_edge_series(cfg.complex.file, cfg.ar.series, cfg.ar.train);
  }
  ArSurrogateOptions o;
  const int m = cfg.order;
  o.upper = VectorXd::Zero(m);
  o.lower = VectorXd::Zero(m);
  for (int i = 0; i < m && i < static_cast<int>(cfg.ar.upper.size()); ++i) o.upper(i) = cfg.ar.upper[i];
  for (int i = 0; i < m && i < static_cast<int>(cfg.ar.lower.size()); ++i) o.lower(i) = cfg.ar.lower[i];
  o.amplitude = cfg.ar.amplitude;
  o.innovation_std = cfg.ar.innovation_std;
  return make_dfn_surrogate(cfg.seed, o);
}

}  // namespace topolms
