#include "topolms/autoregressive.hpp"

#include "topolms/error.hpp"
#include "topolms/lms.hpp"

namespace topolms {

MatrixXd ar_regressors(std::span<const VectorXd> past, const HodgeOperators& ops, int order,
                       ArVariant variant) {
  if (static_cast<int>(past.size()) != order) throw DimensionError("AR history must hold M signals");
  const Eigen::Index e = ops.num_edges();
  MatrixXd x = MatrixXd::Zero(e, 2 * order);
  for (int m = 1; m <= order; ++m) {
    require_size(past[m - 1], e, "signal");
    VectorXd up = past[m - 1];
    VectorXd down = past[m - 1];
    for (int k = 0; k < m; ++k) {
      if (variant == ArVariant::kTopo) up = ops.upper * up;
      down = ops.lower * down;
    }
    if (variant == ArVariant::kTopo) x.col(m - 1) = up;
    x.col(order + m - 1) = down;
  }
  return x;
}

int epoch_sample_index(long step, int train) {
  if (train <= 0) throw ValidationError("training length must be positive");
  return static_cast<int>(step % train);
}

namespace {

void check_training(const EdgeSeriesDataset& ds, const ArTrainOptions& options) {
  ds.validate();
  if (options.order < 1) throw ValidationError("AR order must be at least 1");
  if (options.order >= ds.train) throw ValidationError("AR order must be below the training length");
  if (options.epochs < 1) throw ValidationError("epochs must be positive");
  if (!(options.mu > 0.0)) throw ValidationError("step-size must be positive");
}

std::vector<VectorXd> wrapped_past(const EdgeSeriesDataset& ds, long step, int order) {
  std::vector<VectorXd> past(order);
  for (int m = 1; m <= order; ++m) past[m - 1] = ds.snapshot(epoch_sample_index(step - m, ds.train));
  return past;
}

std::vector<VectorXd> test_past(const EdgeSeriesDataset& ds, Eigen::Index n, int order) {
  std::vector<VectorXd> past(order);
  for (int m = 1; m <= order; ++m) past[m - 1] = ds.snapshot(n - m);
  return past;
}

double normalized_error(const VectorXd& prediction, const VectorXd& x) {
  const double norm = x.norm();
  return norm > 0.0 ? (prediction - x).norm() / norm : (prediction - x).norm();
}

void finish_test(ArTrainResult& out) {
  double sum = 0.0;
  for (double v : out.test_error) sum += v;
  out.mean_test_error = out.test_error.empty() ? 0.0 : sum / static_cast<double>(out.test_error.size());
}

}  // namespace

ArTrainResult run_ar_training(const EdgeSeriesDataset& ds, const ArTrainOptions& options) {
  check_training(ds, options);
  const auto ops = unit_scaled(hodge_laplacians(ds.complex));
  const int order = options.order;
  const Eigen::Index e = ds.series.cols();
  const VectorXd ones = VectorXd::Ones(e);
  LmsState state;
  state.mu = options.mu;
  state.h = VectorXd::Zero(2 * order);
  ArTrainResult out;
  const long steps = static_cast<long>(options.epochs) * ds.train;
  for (long i = order; i < steps; ++i) {
    const int d = epoch_sample_index(i, ds.train);
    const MatrixXd x = ar_regressors(wrapped_past(ds, i, order), ops, order, options.variant);
    const VectorXd target = ds.snapshot(d);
    out.visited.push_back(d);
    out.train_error.push_back((target - x * state.h).squaredNorm());
    lms_update(state, x, ones, target);
  }
  out.h = state.h;
  for (Eigen::Index n = ds.train; n < ds.length(); ++n) {
    const MatrixXd x = ar_regressors(test_past(ds, n, order), ops, order, options.variant);
    out.test_error.push_back(normalized_error(x * out.h, ds.snapshot(n)));
  }
  finish_test(out);
  return out;
}

ArTrainResult run_distributed_ar(const EdgeSeriesDataset& ds, const ArTrainOptions& options,
                                 const CombinationMatrix& a) {
  check_training(ds, options);
  const auto ops = unit_scaled(hodge_laplacians(ds.complex));
  const int order = options.order;
  const Eigen::Index e = ds.series.cols();
  require_shape(a.a, e, e, "combination matrix");
  const VectorXd ones = VectorXd::Ones(e);
  NetworkState net = initial_network_state(static_cast<int>(e), 2 * order,
                                           VectorXd::Constant(e, options.mu));
  ArTrainResult out;
  const long steps = static_cast<long>(options.epochs) * ds.train;
  for (long i = order; i < steps; ++i) {
    const int d = epoch_sample_index(i, ds.train);
    const MatrixXd x = ar_regressors(wrapped_past(ds, i, order), ops, order, options.variant);
    const VectorXd target = ds.snapshot(d);
    double err = 0.0;
    for (Eigen::Index k = 0; k < e; ++k) {
      const double r = target(k) - x.row(k).dot(net.h[k]);
      err += r * r;
    }
    out.visited.push_back(d);
    out.train_error.push_back(err);
    atc_update(net, a, x, ones, target);
  }
  out.agent_h = net.h;
  out.h = VectorXd::Zero(2 * order);
  for (const auto& h : net.h) out.h += h / static_cast<double>(e);
  for (Eigen::Index n = ds.train; n < ds.length(); ++n) {
    const MatrixXd x = ar_regressors(test_past(ds, n, order), ops, order, options.variant);
    VectorXd prediction(e);
    for (Eigen::Index k = 0; k < e; ++k) prediction(k) = x.row(k).dot(net.h[k]);
    out.test_error.push_back(normalized_error(prediction, ds.snapshot(n)));
  }
  finish_test(out);
  return out;
}

}  // namespace topolms
