#include "topolms/signal_model.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "topolms/error.hpp"

namespace topolms {

FilterCoeffs FilterCoeffs::from_flat(const VectorXd& flat, int order) {
  if (order < 0) throw ValidationError("filter order must be non-negative");
  require_size(flat, regressor_width(order), "filter coefficients");
  FilterCoeffs h;
  h.order = order;
  h.upper = flat.head(order + 1);
  h.lower = flat.tail(order);
  return h;
}

FilterCoeffs FilterCoeffs::zeros(int order) {
  return from_flat(VectorXd::Zero(regressor_width(order)), order);
}

VectorXd FilterCoeffs::flat() const {
  VectorXd out(regressor_width(order));
  out << upper, lower;
  return out;
}

int regressor_lag(int col, int order) { return col <= order ? col : col - order; }

void StreamConfig::validate(Eigen::Index num_edges) const {
  require_shape(signal_cov, num_edges, num_edges, "signal covariance");
  require_size(noise_var, num_edges, "noise variances");
  require_size(sample_prob, num_edges, "sampling probabilities");
  if ((noise_var.array() < 0.0).any()) throw ValidationError("negative noise variance");
  if ((sample_prob.array() < 0.0).any() || (sample_prob.array() > 1.0).any()) {
    throw ValidationError("sampling probability outside [0, 1]");
  }
  if (horizon < 0) throw ValidationError("negative horizon");
}

MatrixXd build_regressors(std::span<const VectorXd> history, const MatrixXd& upper,
                          const MatrixXd& lower, int order) {
  if (order < 0) throw ValidationError("filter order must be non-negative");
  if (static_cast<int>(history.size()) != order + 1) {
    throw DimensionError("regressor history must hold M+1 signals");
  }
  const Eigen::Index e = upper.rows();
  require_shape(upper, e, e, "upper Laplacian");
  require_shape(lower, e, e, "lower Laplacian");
  MatrixXd x(e, regressor_width(order));
  require_size(history[0], e, "signal");
  x.col(0) = history[0];
  for (int m = 1; m <= order; ++m) {
    require_size(history[m], e, "signal");
    VectorXd up = history[m];
    VectorXd down = history[m];
    for (int k = 0; k < m; ++k) {
      up = upper * up;
      down = lower * down;
    }
    x.col(m) = up;
    x.col(order + m) = down;
  }
  return x;
}

MatrixXd build_regressors(std::span<const VectorXd> history, const HodgeOperators& ops, int order) {
  return build_regressors(history, ops.upper, ops.lower, order);
}

VectorXd local_regressor(int edge, const MatrixXd& regressors) {
  if (edge < 0 || edge >= regressors.rows()) throw DimensionError("edge index out of range");
  return regressors.row(edge).transpose();
}

VectorXd sample_mask(const VectorXd& prob, Rng& rng) {
  VectorXd d(prob.size());
  for (Eigen::Index i = 0; i < prob.size(); ++i) {
    if (!(prob(i) >= 0.0 && prob(i) <= 1.0)) {
      throw ValidationError("sampling probability outside [0, 1]");
    }
    d(i) = rng.bernoulli(prob(i)) ? 1.0 : 0.0;
  }
  return d;
}

StreamGenerator::StreamGenerator(const FilterCoeffs& h, const HodgeOperators& ops,
                                 const StreamConfig& cfg)
    : h_(h),
      h_flat_(h.flat()),
      upper_(ops.upper),
      lower_(ops.lower),
      signal_root_(psd_sqrt(cfg.signal_cov)),
      noise_std_(cfg.noise_var.cwiseSqrt()),
      prob_(cfg.sample_prob),
      signal_rng_(derive_seed(cfg.seed, 0)),
      noise_rng_(derive_seed(cfg.seed, 1)),
      mask_rng_(derive_seed(cfg.seed, 2)) {
  const Eigen::Index e = ops.num_edges();
  cfg.validate(e);
  history_.assign(h.order + 1, VectorXd::Zero(e));
  sample_.regressors = MatrixXd::Zero(e, regressor_width(h.order));
  sample_.y = VectorXd::Zero(e);
}

void StreamGenerator::set_operators(const HodgeOperators& ops) {
  require_shape(ops.upper, upper_.rows(), upper_.cols(), "upper Laplacian");
  upper_ = ops.upper;
  lower_ = ops.lower;
  sample_.regressors = build_regressors(history_, upper_, lower_, h_.order);
}

const StreamGenerator::Sample& StreamGenerator::next() {
  const int order = h_.order;
  const Eigen::Index e = upper_.rows();
  VectorXd white(e);
  for (Eigen::Index i = 0; i < e; ++i) white(i) = signal_rng_.normal();
  VectorXd x = signal_root_ * white;

  for (int m = order; m > 0; --m) history_[m] = std::move(history_[m - 1]);
  history_[0] = x;

  // Shift the cached columns: Lu^m x(n-m) = Lu * (Lu^{m-1} x((n-1)-(m-1))).
  MatrixXd& reg = sample_.regressors;
  for (int m = order; m >= 1; --m) {
    const VectorXd prev_up = m == 1 ? VectorXd(reg.col(0)) : VectorXd(reg.col(m - 1));
    const VectorXd prev_down = m == 1 ? VectorXd(reg.col(0)) : VectorXd(reg.col(order + m - 1));
    reg.col(m) = upper_ * prev_up;
    reg.col(order + m) = lower_ * prev_down;
  }
  reg.col(0) = x;

  VectorXd v(e);
  for (Eigen::Index i = 0; i < e; ++i) v(i) = noise_std_(i) * noise_rng_.normal();
  sample_.d = sample_mask(prob_, mask_rng_);
  ++sample_.n;
  sample_.x = std::move(x);
  if (sample_.n >= order) {
    sample_.y = sample_.d.cwiseProduct(reg * h_flat_ + v);
  } else {
    sample_.y = VectorXd::Zero(e);
  }
  return sample_;
}

StreamBatch generate_stream(const FilterCoeffs& h, const HodgeOperators& ops,
                            const StreamConfig& cfg) {
  if (cfg.horizon <= h.order) throw ValidationError("horizon must exceed the filter order");
  StreamGenerator gen(h, ops, cfg);
  StreamBatch batch;
  batch.order = h.order;
  batch.x.reserve(cfg.horizon);
  batch.d.reserve(cfg.horizon);
  batch.y.reserve(cfg.horizon);
  for (int n = 0; n < cfg.horizon; ++n) {
    const auto& s = gen.next();
    batch.x.push_back(s.x);
    batch.d.push_back(s.d);
    batch.y.push_back(s.y);
  }
  return batch;
}

namespace {

// A_a for every regressor column: I, Lu, ..., Lu^M, Ld, ..., Ld^M.
std::vector<MatrixXd> column_shifts(const HodgeOperators& ops, int order) {
  const Eigen::Index e = ops.num_edges();
  std::vector<MatrixXd> shifts(regressor_width(order));
  shifts[0] = MatrixXd::Identity(e, e);
  for (int m = 1; m <= order; ++m) {
    shifts[m] = ops.upper * (m == 1 ? shifts[0] : shifts[m - 1]);
    shifts[order + m] = ops.lower * (m == 1 ? shifts[0] : shifts[order + m - 1]);
  }
  return shifts;
}

// Tr(A^T W B C) with W diagonal.
double weighted_trace(const MatrixXd& a, const VectorXd& w, const MatrixXd& bc) {
  return (a.array().colwise() * w.array() * bc.array()).sum();
}

}  // namespace

std::vector<MatrixXd> edge_moment_matrices(const HodgeOperators& ops, const MatrixXd& signal_cov,
                                           int order) {
  const Eigen::Index e = ops.num_edges();
  require_shape(signal_cov, e, e, "signal covariance");
  const int w = regressor_width(order);
  const auto shifts = column_shifts(ops, order);
  std::vector<MatrixXd> ac(w);
  for (int a = 0; a < w; ++a) ac[a] = shifts[a] * signal_cov;
  std::vector<MatrixXd> out(e, MatrixXd::Zero(w, w));
  for (int a = 0; a < w; ++a) {
    for (int b = a; b < w; ++b) {
      if (regressor_lag(a, order) != regressor_lag(b, order)) continue;
      // diag(A_a C_x A_b^T)
      const VectorXd diag = (ac[a].array() * shifts[b].array()).rowwise().sum();
      for (Eigen::Index i = 0; i < e; ++i) {
        out[i](a, b) = diag(i);
        out[i](b, a) = diag(i);
      }
    }
  }
  return out;
}

MomentSet moments_closed_form(const HodgeOperators& ops, const VectorXd& prob,
                              const MatrixXd& signal_cov, const VectorXd& noise_var, int order,
                              const FilterCoeffs& h) {
  const Eigen::Index e = ops.num_edges();
  require_size(prob, e, "sampling probabilities");
  require_size(noise_var, e, "noise variances");
  require_shape(signal_cov, e, e, "signal covariance");
  if (h.order != order) throw DimensionError("filter order does not match M");
  const int w = regressor_width(order);
  const auto shifts = column_shifts(ops, order);
  std::vector<MatrixXd> bc(w);
  for (int b = 0; b < w; ++b) bc[b] = shifts[b] * signal_cov;
  const VectorXd noisy_prob = noise_var.cwiseProduct(prob);

  MomentSet out;
  out.c_x = MatrixXd::Zero(w, w);
  out.g = MatrixXd::Zero(w, w);
  for (int a = 0; a < w; ++a) {
    for (int b = a; b < w; ++b) {
      if (regressor_lag(a, order) != regressor_lag(b, order)) continue;
      out.c_x(a, b) = out.c_x(b, a) = weighted_trace(shifts[a], prob, bc[b]);
      out.g(a, b) = out.g(b, a) = weighted_trace(shifts[a], noisy_prob, bc[b]);
    }
  }

  // C_xy(m) = E{y(n) x(n-m)^T} for the unmasked output; only columns with
  // lag m contribute under a white signal.
  const VectorXd hf = h.flat();
  std::vector<MatrixXd> cross(order + 1, MatrixXd::Zero(e, e));
  for (int b = 0; b < w; ++b) cross[regressor_lag(b, order)] += hf(b) * bc[b];
  out.c_xy.resize(w);
  for (int a = 0; a < w; ++a) {
    out.c_xy(a) = weighted_trace(shifts[a], prob, cross[regressor_lag(a, order)]);
  }
  return out;
}

MomentSet moments_empirical(const StreamBatch& batch, int order, const HodgeOperators& ops,
                            const VectorXd& noise_var) {
  const int n_total = static_cast<int>(batch.x.size());
  if (n_total < order + 1) throw ValidationError("moments_empirical: batch shorter than M+1");
  if (batch.d.size() != batch.x.size() || batch.y.size() != batch.x.size()) {
    throw DimensionError("moments_empirical: ragged batch");
  }
  const Eigen::Index e = ops.num_edges();
  require_size(noise_var, e, "noise variances");
  const int w = regressor_width(order);
  MomentSet out;
  out.c_x = MatrixXd::Zero(w, w);
  out.g = MatrixXd::Zero(w, w);
  out.c_xy = VectorXd::Zero(w);
  std::vector<VectorXd> history(order + 1);
  for (int n = order; n < n_total; ++n) {
    for (int m = 0; m <= order; ++m) history[m] = batch.x[n - m];
    const MatrixXd x = build_regressors(history, ops, order);
    const MatrixXd dx = batch.d[n].asDiagonal() * x;
    out.c_x.noalias() += x.transpose() * dx;
    out.g.noalias() += x.transpose() * noise_var.asDiagonal() * dx;
    out.c_xy.noalias() += dx.transpose() * batch.y[n];
  }
  const double count = n_total - order;
  out.c_x /= count;
  out.g /= count;
  out.c_xy /= count;
  return out;
}

void write_stream_csv(std::ostream& out, const StreamBatch& batch) {
  out.precision(17);
  out << "n,edge_id,x,d,y\n";
  for (std::size_t n = 0; n < batch.x.size(); ++n) {
    for (Eigen::Index i = 0; i < batch.x[n].size(); ++i) {
      out << n << ',' << i + 1 << ',' << batch.x[n](i) << ',' << batch.d[n](i) << ','
          << batch.y[n](i) << '\n';
    }
  }
}

StreamBatch read_stream_csv(std::istream& in, int order) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("stream CSV: missing header");
  if (line.rfind("n,edge_id,x,d,y", 0) != 0) throw ParseError("stream CSV: unexpected header");
  struct Row {
    long n;
    long edge;
    double x, d, y;
  };
  std::vector<Row> rows;
  long max_n = -1;
  long max_edge = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    Row r{};
    char c1 = 0, c2 = 0, c3 = 0, c4 = 0;
    if (!(ss >> r.n >> c1 >> r.edge >> c2 >> r.x >> c3 >> r.d >> c4 >> r.y) || c1 != ',' ||
        c2 != ',' || c3 != ',' || c4 != ',' || r.n < 0 || r.edge < 1) {
      throw ParseError("stream CSV line " + std::to_string(line_no) + ": malformed row");
    }
    max_n = std::max(max_n, r.n);
    max_edge = std::max(max_edge, r.edge);
    rows.push_back(r);
  }
  StreamBatch batch;
  batch.order = order;
  const auto len = static_cast<std::size_t>(max_n + 1);
  batch.x.assign(len, VectorXd::Zero(max_edge));
  batch.d.assign(len, VectorXd::Zero(max_edge));
  batch.y.assign(len, VectorXd::Zero(max_edge));
  if (rows.size() != len * static_cast<std::size_t>(max_edge)) {
    throw ParseError("stream CSV: missing (n, edge) rows");
  }
  for (const auto& r : rows) {
    batch.x[r.n](r.edge - 1) = r.x;
    batch.d[r.n](r.edge - 1) = r.d;
    batch.y[r.n](r.edge - 1) = r.y;
  }
  return batch;
}

namespace {

nlohmann::json matrix_json(const MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.at(0).size());
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j.at(i).size()) != cols) throw ParseError("ragged matrix");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = j.at(i).at(k).get<double>();
  }
  return m;
}

}  // namespace

std::string moments_to_json(const MomentSet& m) {
  nlohmann::json j;
  j["c_x"] = matrix_json(m.c_x);
  j["g"] = matrix_json(m.g);
  j["c_xy"] = std::vector<double>(m.c_xy.data(), m.c_xy.data() + m.c_xy.size());
  return j.dump(2);
}

MomentSet moments_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    MomentSet m;
    m.c_x = matrix_from_json(j.at("c_x"));
    m.g = matrix_from_json(j.at("g"));
    const auto v = j.at("c_xy").get<std::vector<double>>();
    m.c_xy = Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    return m;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("moment JSON: ") + ex.what());
  }
}

}  // namespace topolms
