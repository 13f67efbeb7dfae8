#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "topolms/error.hpp"
#include "topolms/lms.hpp"

using namespace topolms;

namespace {

MatrixXd random_spd(Rng& rng, int n, double shift) {
  MatrixXd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = rng.normal();
  return g * g.transpose() / n + shift * MatrixXd::Identity(n, n);
}

VectorXd random_vector(Rng& rng, Eigen::Index n) {
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

double power_iteration(const MatrixXd& a) {
  VectorXd v = VectorXd::Ones(a.rows());
  double lambda = 0.0;
  for (int k = 0; k < 5000; ++k) {
    const VectorXd w = a * v;
    lambda = v.dot(w) / v.squaredNorm();
    v = w.normalized();
  }
  return lambda;
}

HodgeOperators small_ops() {
  CountedComplexOptions opts;
  opts.closure_bias = 0.5;
  return unit_scaled(hodge_laplacians(random_complex_with_counts(9, 16, 3, 4, opts)));
}

FilterCoeffs test_filter() {
  VectorXd flat(5);
  flat << 1.0, 0.5, -0.3, 0.4, 0.2;
  return FilterCoeffs::from_flat(flat, 2);
}

StreamConfig stream_for(const HodgeOperators& ops, const VectorXd& noise, const VectorXd& p,
                        int horizon) {
  StreamConfig cfg;
  const auto e = ops.num_edges();
  cfg.signal_cov = MatrixXd::Identity(e, e);
  cfg.noise_var = noise;
  cfg.sample_prob = p;
  cfg.horizon = horizon;
  return cfg;
}

}  // namespace

TEST_SUITE("lms") {
  TEST_CASE("zero innovation leaves h unchanged") {
    Rng rng(1);
    const MatrixXd x = MatrixXd::Random(8, 5);
    LmsState s{random_vector(rng, 5), 0.1, 3};
    const VectorXd y = x * s.h;
    const VectorXd d = sample_mask(VectorXd::Constant(8, 0.5), rng);
    const auto next = lms_step(s, x, d, y);
    CHECK((next.h - s.h).norm() < 1e-14);
    CHECK(next.n == 4);
  }

  TEST_CASE("first step from zero is mu X^T y") {
    Rng rng(2);
    const MatrixXd x = MatrixXd::Random(8, 5);
    const VectorXd y = random_vector(rng, 8);
    const auto next = lms_step({VectorXd::Zero(5), 0.05, 0}, x, VectorXd::Ones(8), y);
    CHECK((next.h - 0.05 * x.transpose() * y).norm() < 1e-14);
  }

  TEST_CASE("error recursion identity") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      const MatrixXd x = MatrixXd::Random(10, 5);
      const VectorXd h_true = random_vector(rng, 5);
      const VectorXd v = 0.1 * random_vector(rng, 10);
      const VectorXd d = sample_mask(VectorXd::Constant(10, 0.6), rng);
      const MatrixXd dm = d.asDiagonal();
      const VectorXd y = dm * (x * h_true + v);
      const double mu = 0.02;
      const LmsState s{random_vector(rng, 5), mu, 0};
      const auto next = lms_step(s, x, d, y);
      const MatrixXd q = MatrixXd::Identity(5, 5) - mu * x.transpose() * dm * x;
      const VectorXd g = x.transpose() * dm * v;
      const VectorXd expected = q * (h_true - s.h) - mu * g;
      CHECK((h_true - next.h - expected).norm() < 1e-12);
    }
  }

  TEST_CASE("lms_step is pure and checks dimensions") {
    Rng rng(4);
    const MatrixXd x = MatrixXd::Random(6, 3);
    const VectorXd y = random_vector(rng, 6);
    const LmsState s{VectorXd::Zero(3), 0.1, 0};
    CHECK(lms_step(s, x, VectorXd::Ones(6), y).h == lms_step(s, x, VectorXd::Ones(6), y).h);
    CHECK(s.h.isZero());
    CHECK_THROWS_AS(lms_step(s, x, VectorXd::Ones(5), y), DimensionError);
    const LmsState huge{VectorXd::Constant(3, 1e300), 1e10, 0};
    CHECK_THROWS_AS(lms_step(huge, x, VectorXd::Ones(6), y), DivergenceError);
  }

  TEST_CASE("max_stepsize") {
    CHECK(max_stepsize(MatrixXd::Identity(3, 3)) == doctest::Approx(2.0));
    CHECK(max_stepsize((VectorXd(2) << 2.0, 1.0).finished().asDiagonal().toDenseMatrix()) ==
          doctest::Approx(1.0));
    Rng rng(5);
    for (int k = 0; k < 10; ++k) {
      const MatrixXd c = random_spd(rng, 6, 0.1);
      CHECK(std::abs(max_stepsize(c) - 2.0 / power_iteration(c)) < 1e-8);
    }
    CHECK_THROWS_AS(max_stepsize(MatrixXd::Zero(3, 3)), ValidationError);
  }

  TEST_CASE("scalar steady state") {
    const double c = 2.5, g = 0.3;
    for (double mu : {1e-3, 1e-2, 0.3}) {
      const auto ss = steady_state_msd(MatrixXd::Constant(1, 1, c), MatrixXd::Constant(1, 1, g), mu);
      CHECK(ss.msd_exact == doctest::Approx(mu * g / (2 * c - mu * c * c)).epsilon(1e-12));
      CHECK(ss.msd_first_order == doctest::Approx(mu * g / (2 * c)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(steady_state_msd(MatrixXd::Constant(1, 1, c), MatrixXd::Constant(1, 1, g), 0.9),
                    StabilityError);
  }

  TEST_CASE("exact MSD equals the Kronecker formula and the Q^2 form") {
    Rng rng(6);
    for (int n : {3, 5, 7, 17, 21}) {
      const MatrixXd c = random_spd(rng, n, 0.5);
      const MatrixXd g = random_spd(rng, n, 0.0);
      const double mu = 0.5 / lambda_max_sym(c);
      const auto ss = steady_state_msd(c, g, mu);
      const MatrixXd q = MatrixXd::Identity(n, n) - mu * c;
      const MatrixXd f = oracle::kron(q.transpose(), q.transpose());
      const VectorXd sigma = (MatrixXd::Identity(n * n, n * n) - f)
                                 .fullPivLu()
                                 .solve(oracle::vec(MatrixXd::Identity(n, n)));
      const double kron_msd = mu * mu * oracle::vec(g).dot(sigma);
      CHECK(std::abs(ss.msd_exact - kron_msd) < 1e-10 * kron_msd);
      CHECK(std::abs(msd_q_squared(c, g, mu) - ss.msd_exact) < 1e-10 * ss.msd_exact);
    }
  }

  TEST_CASE("first-order gap is O(mu^2)") {
    Rng rng(7);
    const MatrixXd c = random_spd(rng, 5, 0.5);
    const MatrixXd g = random_spd(rng, 5, 0.0);
    double prev = 0.0;
    for (double mu : {1e-2, 5e-3, 2.5e-3}) {
      const auto ss = steady_state_msd(c, g, mu);
      const double gap = std::abs(ss.msd_exact - ss.msd_first_order);
      if (prev > 0.0) {
        CHECK(prev / gap > 3.5);
        CHECK(prev / gap < 4.5);
      }
      prev = gap;
    }
  }

  TEST_CASE("convergence rate") {
    const auto r = convergence_rate(MatrixXd::Identity(4, 4), 0.01);
    CHECK(r.approx == doctest::Approx(0.98));
    CHECK(r.f_norm == doctest::Approx(0.9801));
    Rng rng(8);
    for (int k = 0; k < 10; ++k) {
      const MatrixXd c = random_spd(rng, 4, 0.2);
      const double mu = 1e-3;
      const auto rate = convergence_rate(c, mu);
      CHECK(rate.approx == doctest::Approx(1.0 - 2.0 * mu * lambda_min_sym(c)));
      const MatrixXd q = MatrixXd::Identity(4, 4) - mu * c;
      const MatrixXd f = oracle::kron(q.transpose(), q.transpose());
      const double f_norm = Eigen::JacobiSVD<MatrixXd>(f).singularValues()(0);
      CHECK(std::abs(rate.f_norm - f_norm) < 1e-12);
      const double lmax = lambda_max_sym(c);
      CHECK(std::abs(rate.approx - f_norm) < 10 * mu * mu * lmax * lmax);
    }
  }

  TEST_CASE("theory report flags instability") {
    const MatrixXd c = MatrixXd::Identity(3, 3);
    const auto stable = theory_report(c, 0.1 * c, 0.5);
    CHECK(stable.stable);
    CHECK(stable.mu_max == doctest::Approx(2.0));
    CHECK(stable.rho_q == doctest::Approx(0.5));
    CHECK(stable.msd_exact > 0.0);
    const auto unstable = theory_report(c, 0.1 * c, 2.5);
    CHECK_FALSE(unstable.stable);
    CHECK(std::isinf(unstable.msd_exact));
  }

  TEST_CASE("mean recursion decays geometrically") {
    const auto ops = small_ops();
    const auto e = ops.num_edges();
    const auto m = moments_closed_form(ops, VectorXd::Constant(e, 0.7), MatrixXd::Identity(e, e),
                                       VectorXd::Zero(e), 2, test_filter());
    const double mu = 0.5 * max_stepsize(m.c_x);
    const MatrixXd q = MatrixXd::Identity(5, 5) - mu * m.c_x;
    const double rho = spectral_radius(q);
    REQUIRE(rho < 1.0);
    VectorXd err = VectorXd::Ones(5);
    const double start = err.norm();
    for (int n = 1; n <= 200; ++n) {
      err = q * err;
      CHECK(err.norm() <= start * std::pow(rho, n) * (1.0 + 1e-12));
    }
  }

  TEST_CASE("tail statistics and dB") {
    CHECK(tail_average({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}) == doctest::Approx(10.0));
    CHECK(tail_average({1, 2, 3, 4}, 0.5) == doctest::Approx(3.5));
    const auto ts = mean_confidence({1.0, 2.0, 3.0});
    CHECK(ts.mean == doctest::Approx(2.0));
    CHECK(ts.half_width95 == doctest::Approx(1.96 / std::sqrt(3.0)));
    CHECK(to_db(1e-3) == doctest::Approx(-30.0));
  }

  TEST_CASE("horizon 0 gives the initial deviation only") {
    const auto ops = small_ops();
    const auto e = ops.num_edges();
    ExperimentOptions opt;
    opt.horizon = 0;
    opt.realizations = 3;
    const auto h = test_filter();
    const auto res =
        run_experiment(ops, h, stream_for(ops, VectorXd::Zero(e), VectorXd::Ones(e), 2), opt);
    REQUIRE(res.msd.size() == 1);
    CHECK(res.msd[0] == doctest::Approx(h.flat().squaredNorm()));
  }

  TEST_CASE("noise-free small-step trajectory is non-increasing") {
    const auto ops = small_ops();
    const auto e = ops.num_edges();
    ExperimentOptions opt;
    opt.mu = 2e-3;
    opt.horizon = 2000;
    opt.realizations = 30;
    opt.seed = 3;
    const auto res = run_experiment(
        ops, test_filter(), stream_for(ops, VectorXd::Zero(e), VectorXd::Ones(e), 2002), opt);
    int increases = 0;
    for (std::size_t n = 1; n < res.msd.size(); ++n) increases += res.msd[n] > res.msd[n - 1] * (1 + 1e-3);
    CHECK(increases == 0);
    CHECK(res.msd.back() < 0.05 * res.msd.front());
  }

  TEST_CASE("experiments are deterministic across thread counts") {
    const auto ops = small_ops();
    const auto e = ops.num_edges();
    ExperimentOptions opt;
    opt.horizon = 300;
    opt.realizations = 6;
    opt.seed = 11;
    opt.random_init = true;
    const auto cfg = stream_for(ops, VectorXd::Constant(e, 1e-3), VectorXd::Constant(e, 0.8), 302);
    opt.threads = 1;
    const auto a = run_experiment(ops, test_filter(), cfg, opt);
    opt.threads = 4;
    const auto b = run_experiment(ops, test_filter(), cfg, opt);
    CHECK(a.msd == b.msd);
    CHECK(a.tail_msd == b.tail_msd);
  }

  TEST_CASE("divergent realizations are flagged") {
    const auto ops = small_ops();
    const auto e = ops.num_edges();
    ExperimentOptions opt;
    opt.mu = 5.0;
    opt.horizon = 2000;
    opt.realizations = 2;
    const auto res = run_experiment(
        ops, test_filter(), stream_for(ops, VectorXd::Constant(e, 1e-3), VectorXd::Ones(e), 2002), opt);
    CHECK(res.completed == 0);
    CHECK(res.diverged[0]);
    CHECK(res.diverged[1]);
  }

  TEST_CASE("Monte-Carlo steady state matches the exact MSD") {
    const auto ops = small_ops();
    const auto e = ops.num_edges();
    Rng rng(12);
    const double levels[] = {1e-6, 1e-4, 1e-3, 1e-2};
    VectorXd noise(e);
    for (Eigen::Index i = 0; i < e; ++i) noise(i) = levels[rng.below(4)];
    const auto h = test_filter();
    const auto cfg = stream_for(ops, noise, VectorXd::Ones(e), 20002);
    const auto m = moments_closed_form(ops, cfg.sample_prob, cfg.signal_cov, noise, 2, h);
    ExperimentOptions opt;
    opt.mu = 1e-2;
    opt.horizon = 20000;
    opt.realizations = 30;
    opt.seed = 5;
    const auto res = run_experiment(ops, h, cfg, opt);
    const auto th = theory_report(m.c_x, m.g, opt.mu);
    CHECK(std::abs(to_db(mean_confidence(res.tail_msd).mean) - to_db(th.msd_exact)) < 1.0);
  }

  TEST_CASE("sampling low-noise edges trades speed for accuracy") {
    const auto ops = unit_scaled(hodge_laplacians(random_complex(14, 0.45, 0.6, 3)));
    const auto e = ops.num_edges();
    VectorXd noise(e), p_low(e);
    for (Eigen::Index i = 0; i < e; ++i) {
      const bool quiet = i % 2 == 0;
      noise(i) = quiet ? 1e-6 : 1e-2;
      p_low(i) = quiet ? 1.0 : 0.1;
    }
    const auto h = test_filter();
    const MatrixXd cx = MatrixXd::Identity(e, e);
    const auto full = moments_closed_form(ops, VectorXd::Ones(e), cx, noise, 2, h);
    const auto low = moments_closed_form(ops, p_low, cx, noise, 2, h);
    const double mu = 1e-2;
    const auto th_full = theory_report(full.c_x, full.g, mu);
    const auto th_low = theory_report(low.c_x, low.g, mu);
    CHECK(th_low.msd_exact < th_full.msd_exact);
    CHECK(th_low.alpha > th_full.alpha);

    ExperimentOptions opt;
    opt.mu = mu;
    opt.horizon = 15000;
    opt.realizations = 10;
    opt.seed = 9;
    const auto run_full =
        run_experiment(ops, h, stream_for(ops, noise, VectorXd::Ones(e), 15002), opt);
    const auto run_low = run_experiment(ops, h, stream_for(ops, noise, p_low, 15002), opt);
    CHECK(mean_confidence(run_low.tail_msd).mean < mean_confidence(run_full.tail_msd).mean);
    // Slower transient: more iterations to get within 10x of the full-sampling floor.
    const double level = 10.0 * mean_confidence(run_full.tail_msd).mean;
    auto first_below = [&](const std::vector<double>& curve) {
      std::size_t n = 0;
      while (n < curve.size() && curve[n] > level) ++n;
      return n;
    };
    CHECK(first_below(run_full.msd) < first_below(run_low.msd));
  }
}
