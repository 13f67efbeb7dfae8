#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "topolms/error.hpp"
#include "topolms/signal_model.hpp"

using namespace topolms;

namespace {

VectorXd random_vector(Rng& rng, Eigen::Index n) {
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

std::vector<VectorXd> random_history(Rng& rng, int order, Eigen::Index e) {
  std::vector<VectorXd> h;
  for (int m = 0; m <= order; ++m) h.push_back(random_vector(rng, e));
  return h;
}

HodgeOperators test_ops(std::uint64_t seed = 11) {
  CountedComplexOptions opts;
  opts.closure_bias = 0.5;
  return unit_scaled(hodge_laplacians(random_complex_with_counts(12, 24, 4, seed, opts)));
}

StreamConfig white_config(Eigen::Index e, double p, double noise, int horizon, std::uint64_t seed) {
  StreamConfig cfg;
  cfg.signal_cov = MatrixXd::Identity(e, e);
  cfg.noise_var = VectorXd::Constant(e, noise);
  cfg.sample_prob = VectorXd::Constant(e, p);
  cfg.horizon = horizon;
  cfg.seed = seed;
  return cfg;
}

FilterCoeffs test_filter() {
  VectorXd flat(5);
  flat << 1.0, 0.5, -0.3, 0.4, 0.2;
  return FilterCoeffs::from_flat(flat, 2);
}

double rel_frobenius(const MatrixXd& a, const MatrixXd& b) { return (a - b).norm() / b.norm(); }

// Literal trace form of the closed-form moments.
MomentSet trace_oracle(const HodgeOperators& ops, const VectorXd& p, const MatrixXd& cx,
                       const VectorXd& noise, int order, const VectorXd& h) {
  const auto shifts = oracle::shift_matrices(ops.upper, ops.lower, order);
  const int w = regressor_width(order);
  const MatrixXd pm = p.asDiagonal();
  const MatrixXd cvp = (noise.cwiseProduct(p)).asDiagonal();
  MomentSet m;
  m.c_x = MatrixXd::Zero(w, w);
  m.g = MatrixXd::Zero(w, w);
  for (int a = 0; a < w; ++a)
    for (int b = 0; b < w; ++b) {
      if (oracle::lag(a, order) != oracle::lag(b, order)) continue;
      m.c_x(a, b) = (shifts[a].transpose() * pm * shifts[b] * cx).trace();
      m.g(a, b) = (shifts[a].transpose() * cvp * shifts[b] * cx).trace();
    }
  m.c_xy = VectorXd::Zero(w);
  for (int a = 0; a < w; ++a) {
    MatrixXd cxy = MatrixXd::Zero(cx.rows(), cx.cols());
    for (int b = 0; b < w; ++b) {
      if (oracle::lag(a, order) == oracle::lag(b, order)) cxy += h(b) * shifts[b] * cx;
    }
    m.c_xy(a) = (shifts[a].transpose() * pm * cxy).trace();
  }
  return m;
}

}  // namespace

TEST_SUITE("signal_model") {
  TEST_CASE("filter coefficient layout") {
    const auto h = test_filter();
    CHECK(h.upper.size() == 3);
    CHECK(h.lower.size() == 2);
    CHECK(h.upper(2) == -0.3);
    CHECK(h.lower(0) == 0.4);
    CHECK(h.flat() == (VectorXd(5) << 1.0, 0.5, -0.3, 0.4, 0.2).finished());
    CHECK(regressor_width(3) == 7);
    CHECK(regressor_lag(0, 2) == 0);
    CHECK(regressor_lag(2, 2) == 2);
    CHECK(regressor_lag(3, 2) == 1);
    CHECK(regressor_lag(4, 2) == 2);
    CHECK_THROWS_AS(FilterCoeffs::from_flat(VectorXd::Zero(4), 2), DimensionError);
  }

  TEST_CASE("M = 0 regressor is x(n)") {
    Rng rng(1);
    const auto ops = test_ops();
    const auto hist = random_history(rng, 0, ops.num_edges());
    const MatrixXd x = build_regressors(hist, ops, 0);
    REQUIRE(x.cols() == 1);
    CHECK(x.col(0) == hist[0]);
    CHECK(local_regressor(3, x) == (VectorXd(1) << hist[0](3)).finished());
  }

  TEST_CASE("no triangles gives zero upper columns") {
    Rng rng(2);
    const auto ops = hodge_laplacians(random_complex(10, 0.5, 0.0, 3));
    const auto hist = random_history(rng, 1, ops.num_edges());
    const MatrixXd x = build_regressors(hist, ops, 1);
    CHECK(x.col(1).isZero());
    CHECK(x.col(2) == ops.lower * hist[1]);
  }

  TEST_CASE("regressor columns match repeated products") {
    Rng rng(3);
    const auto ops = test_ops();
    for (int order = 1; order <= 3; ++order) {
      const auto hist = random_history(rng, order, ops.num_edges());
      const MatrixXd x = build_regressors(hist, ops, order);
      CHECK(x.col(0) == hist[0]);
      for (int m = 1; m <= order; ++m) {
        VectorXd up = hist[m], down = hist[m];
        for (int k = 0; k < m; ++k) {
          up = ops.upper * up;
          down = ops.lower * down;
        }
        CHECK((x.col(m) - up).norm() < 1e-12);
        CHECK((x.col(order + m) - down).norm() < 1e-12);
      }
      const VectorXd h = random_vector(rng, regressor_width(order));
      MatrixXd stacked(x.rows(), x.cols());
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const VectorXd z = local_regressor(static_cast<int>(i), x);
        stacked.row(i) = z.transpose();
        CHECK(std::abs(z.dot(h) - (x * h)(i)) < 1e-12);
      }
      CHECK(stacked == x);
    }
    CHECK_THROWS_AS(build_regressors(random_history(rng, 1, ops.num_edges()), ops, 2),
                    DimensionError);
    CHECK_THROWS_AS(local_regressor(-1, MatrixXd::Zero(3, 1)), DimensionError);
  }

  TEST_CASE("sampling masks") {
    Rng rng(4);
    const auto ones = sample_mask(VectorXd::Ones(5), rng);
    const auto zeros = sample_mask(VectorXd::Zero(5), rng);
    CHECK(ones == VectorXd::Ones(5));
    CHECK(zeros == VectorXd::Zero(5));
    const VectorXd p = (VectorXd(4) << 0.1, 0.5, 0.75, 0.95).finished();
    VectorXd mean = VectorXd::Zero(4);
    const int n = 100000;
    for (int k = 0; k < n; ++k) mean += sample_mask(p, rng);
    mean /= n;
    CHECK((mean - p).cwiseAbs().maxCoeff() < 0.01);
    CHECK_THROWS_AS(sample_mask(VectorXd::Constant(2, 1.5), rng), ValidationError);
  }

  TEST_CASE("identity filter without noise reproduces x") {
    const auto ops = test_ops();
    const auto e = ops.num_edges();
    const auto batch = generate_stream(FilterCoeffs::from_flat(VectorXd::Unit(5, 0), 2), ops,
                                       white_config(e, 1.0, 0.0, 50, 5));
    for (int n = 2; n < 50; ++n) CHECK((batch.y[n] - batch.x[n]).norm() == 0.0);
    CHECK(batch.y[0].isZero());
  }

  TEST_CASE("p = 0 gives silent outputs") {
    const auto ops = test_ops();
    const auto batch = generate_stream(test_filter(), ops, white_config(ops.num_edges(), 0.0, 1e-2, 50, 6));
    for (const auto& y : batch.y) CHECK(y.isZero());
  }

  TEST_CASE("outputs satisfy the observation model exactly") {
    const auto ops = test_ops();
    const auto e = ops.num_edges();
    const auto h = test_filter();
    auto cfg = white_config(e, 0.6, 0.0, 200, 7);
    const auto batch = generate_stream(h, ops, cfg);
    for (int n = 2; n < 200; ++n) {
      const std::vector<VectorXd> hist = {batch.x[n], batch.x[n - 1], batch.x[n - 2]};
      const VectorXd expected = batch.d[n].cwiseProduct(build_regressors(hist, ops, 2) * h.flat());
      CHECK((batch.y[n] - expected).norm() <= 1e-12 * (1.0 + expected.norm()));
      CHECK((batch.y[n].array() * (1.0 - batch.d[n].array())).matrix().isZero());
    }
  }

  TEST_CASE("noise enters with the configured variance") {
    const auto ops = test_ops();
    const auto e = ops.num_edges();
    const auto h = test_filter();
    const auto clean = generate_stream(h, ops, white_config(e, 1.0, 0.0, 20000, 8));
    const auto noisy = generate_stream(h, ops, white_config(e, 1.0, 0.25, 20000, 8));
    double sq = 0.0;
    long count = 0;
    for (int n = 2; n < 20000; ++n) {
      sq += (noisy.y[n] - clean.y[n]).squaredNorm();
      count += e;
    }
    CHECK(sq / count == doctest::Approx(0.25).epsilon(0.02));
  }

  TEST_CASE("generator is deterministic and validates its config") {
    const auto ops = test_ops();
    const auto e = ops.num_edges();
    const auto a = generate_stream(test_filter(), ops, white_config(e, 0.5, 1e-3, 30, 9));
    const auto b = generate_stream(test_filter(), ops, white_config(e, 0.5, 1e-3, 30, 9));
    for (int n = 0; n < 30; ++n) {
      CHECK(a.x[n] == b.x[n]);
      CHECK(a.y[n] == b.y[n]);
    }
    auto bad = white_config(e, 0.5, 1e-3, 30, 9);
    bad.signal_cov(0, 0) = -1.0;
    CHECK_THROWS_AS(generate_stream(test_filter(), ops, bad), ValidationError);
    CHECK_THROWS_AS(generate_stream(test_filter(), ops, white_config(e, 0.5, 1e-3, 2, 9)),
                    ValidationError);
    auto neg = white_config(e, 0.5, -1.0, 30, 9);
    CHECK_THROWS_AS(generate_stream(test_filter(), ops, neg), ValidationError);
  }

  TEST_CASE("sample covariance of the signal matches C_x") {
    const auto ops = hodge_laplacians(random_complex(8, 0.5, 0.5, 2));
    const auto e = ops.num_edges();
    Rng rng(10);
    MatrixXd g(e, e);
    for (Eigen::Index i = 0; i < e; ++i)
      for (Eigen::Index j = 0; j < e; ++j) g(i, j) = rng.normal();
    auto cfg = white_config(e, 1.0, 0.0, 100000, 11);
    cfg.signal_cov = g * g.transpose() / static_cast<double>(e) + MatrixXd::Identity(e, e);
    StreamGenerator gen(FilterCoeffs::zeros(0), ops, cfg);
    MatrixXd acc = MatrixXd::Zero(e, e);
    for (int n = 0; n < cfg.horizon; ++n) {
      const auto& s = gen.next();
      acc += s.x * s.x.transpose();
    }
    acc /= cfg.horizon;
    CHECK(rel_frobenius(acc, cfg.signal_cov) < 0.05);
  }

  TEST_CASE("M = 0 closed-form moments are traces") {
    const auto ops = test_ops();
    const auto e = ops.num_edges();
    Rng rng(12);
    VectorXd noise(e);
    for (Eigen::Index i = 0; i < e; ++i) noise(i) = rng.uniform(0.0, 0.1);
    const auto m = moments_closed_form(ops, VectorXd::Ones(e), MatrixXd::Identity(e, e), noise, 0,
                                       FilterCoeffs::from_flat(VectorXd::Ones(1), 0));
    CHECK(m.c_x(0, 0) == doctest::Approx(static_cast<double>(e)));
    CHECK(m.g(0, 0) == doctest::Approx(noise.sum()));
    CHECK(m.c_xy(0) == doctest::Approx(static_cast<double>(e)));
  }

  TEST_CASE("closed-form moments match the trace oracle") {
    Rng rng(13);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto ops = test_ops(seed);
      const auto e = ops.num_edges();
      MatrixXd g(e, e);
      for (Eigen::Index i = 0; i < e; ++i)
        for (Eigen::Index j = 0; j < e; ++j) g(i, j) = rng.normal();
      const MatrixXd cx = g * g.transpose() / static_cast<double>(e);
      VectorXd p(e), noise(e);
      for (Eigen::Index i = 0; i < e; ++i) {
        p(i) = rng.uniform(0.1, 1.0);
        noise(i) = rng.uniform(0.0, 0.01);
      }
      for (int order = 1; order <= 3; ++order) {
        const VectorXd hf = random_vector(rng, regressor_width(order));
        const auto h = FilterCoeffs::from_flat(hf, order);
        const auto m = moments_closed_form(ops, p, cx, noise, order, h);
        const auto ref = trace_oracle(ops, p, cx, noise, order, hf);
        CHECK(rel_frobenius(m.c_x, ref.c_x) < 1e-12);
        CHECK(rel_frobenius(m.g, ref.g) < 1e-12);
        CHECK((m.c_xy - ref.c_xy).norm() < 1e-12 * ref.c_xy.norm());
        // With white signal and independent noise, c_Xy = C_X h.
        CHECK((m.c_xy - m.c_x * hf).norm() < 1e-10 * ref.c_xy.norm());
        CHECK((m.c_x - m.c_x.transpose()).norm() < 1e-12 * m.c_x.norm());
        CHECK(lambda_min_sym(m.c_x) > 0.0);
        CHECK(lambda_min_sym(m.g) > -1e-14);
      }
    }
  }

  TEST_CASE("moments are linear in p") {
    Rng rng(14);
    const auto ops = test_ops();
    const auto e = ops.num_edges();
    const MatrixXd cx = MatrixXd::Identity(e, e);
    const VectorXd noise = VectorXd::Constant(e, 1e-3);
    VectorXd p1(e), p2(e);
    for (Eigen::Index i = 0; i < e; ++i) {
      p1(i) = rng.uniform(0.0, 0.5);
      p2(i) = rng.uniform(0.0, 0.5);
    }
    const auto h = test_filter();
    const auto a = moments_closed_form(ops, p1, cx, noise, 2, h);
    const auto b = moments_closed_form(ops, p2, cx, noise, 2, h);
    const auto ab = moments_closed_form(ops, p1 + p2, cx, noise, 2, h);
    CHECK(rel_frobenius(ab.c_x, a.c_x + b.c_x) < 1e-12);
    CHECK(rel_frobenius(ab.g, a.g + b.g) < 1e-12);
    const auto half = moments_closed_form(ops, 0.3 * p1, cx, noise, 2, h);
    CHECK(rel_frobenius(half.c_x, 0.3 * a.c_x) < 1e-12);
    CHECK(rel_frobenius(half.g, 0.3 * a.g) < 1e-12);
    const auto cs = edge_moment_matrices(ops, cx, 2);
    MatrixXd sum = MatrixXd::Zero(5, 5);
    for (Eigen::Index i = 0; i < e; ++i) sum += p1(i) * cs[i];
    CHECK(rel_frobenius(sum, a.c_x) < 1e-12);
  }

  TEST_CASE("empirical moments converge to the closed form") {
    const auto ops = unit_scaled(hodge_laplacians(random_complex(8, 0.5, 0.6, 4)));
    const auto e = ops.num_edges();
    const auto h = test_filter();
    auto cfg = white_config(e, 0.7, 1e-2, 100000, 15);
    const auto batch = generate_stream(h, ops, cfg);
    const auto emp = moments_empirical(batch, 2, ops, cfg.noise_var);
    const auto exact =
        moments_closed_form(ops, cfg.sample_prob, cfg.signal_cov, cfg.noise_var, 2, h);
    CHECK(rel_frobenius(emp.c_x, exact.c_x) < 0.02);
    CHECK(rel_frobenius(emp.g, exact.g) < 0.02);
    CHECK((emp.c_xy - exact.c_xy).norm() < 0.02 * exact.c_xy.norm());
  }

  TEST_CASE("empirical moments of tiny and zero batches") {
    const auto ops = test_ops();
    const auto e = ops.num_edges();
    StreamBatch one;
    one.order = 0;
    Rng rng(16);
    one.x = {random_vector(rng, e)};
    one.d = {sample_mask(VectorXd::Constant(e, 0.5), rng)};
    one.y = {VectorXd::Zero(e)};
    const auto m = moments_empirical(one, 0, ops, VectorXd::Zero(e));
    CHECK(m.c_x(0, 0) == doctest::Approx(one.x[0].dot(one.d[0].cwiseProduct(one.x[0]))));

    StreamBatch zero;
    zero.order = 2;
    for (int n = 0; n < 10; ++n) {
      zero.x.push_back(VectorXd::Zero(e));
      zero.d.push_back(VectorXd::Ones(e));
      zero.y.push_back(VectorXd::Zero(e));
    }
    const auto z = moments_empirical(zero, 2, ops, VectorXd::Ones(e));
    CHECK(z.c_x.isZero());
    CHECK(z.g.isZero());
    CHECK(z.c_xy.isZero());
    StreamBatch short_batch = zero;
    short_batch.x.resize(2);
    short_batch.d.resize(2);
    short_batch.y.resize(2);
    CHECK_THROWS_AS(moments_empirical(short_batch, 2, ops, VectorXd::Ones(e)), ValidationError);
  }

  TEST_CASE("stream CSV and moment JSON round trips") {
    const auto ops = test_ops();
    const auto batch =
        generate_stream(test_filter(), ops, white_config(ops.num_edges(), 0.5, 1e-3, 20, 17));
    std::stringstream ss;
    write_stream_csv(ss, batch);
    const std::string text = ss.str();
    CHECK(text.rfind("n,edge_id,x,d,y\n", 0) == 0);
    const auto back = read_stream_csv(ss, 2);
    REQUIRE(back.x.size() == batch.x.size());
    for (std::size_t n = 0; n < batch.x.size(); ++n) {
      CHECK(back.x[n] == batch.x[n]);
      CHECK(back.d[n] == batch.d[n]);
      CHECK(back.y[n] == batch.y[n]);
    }
    std::istringstream bad("n,edge_id,x,d,y\n0,1,abc,1,0\n");
    CHECK_THROWS_AS(read_stream_csv(bad, 0), ParseError);

    const auto m = moments_closed_form(ops, VectorXd::Constant(ops.num_edges(), 0.3),
                                       MatrixXd::Identity(ops.num_edges(), ops.num_edges()),
                                       VectorXd::Constant(ops.num_edges(), 1e-3), 2, test_filter());
    const auto mb = moments_from_json(moments_to_json(m));
    CHECK(mb.c_x == m.c_x);
    CHECK(mb.g == m.g);
    CHECK(mb.c_xy == m.c_xy);
    CHECK_THROWS_AS(moments_from_json("{\"c_x\": [[1, 2], [3]]}"), ParseError);
  }
}
