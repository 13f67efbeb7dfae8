#include <doctest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "topolms/diffusion.hpp"
#include "topolms/error.hpp"
#include "topolms/lms.hpp"
#include "topolms/rng.hpp"

using namespace topolms;

namespace {

SimplicialComplex2 small_complex(std::uint64_t seed) {
  CountedComplexOptions opts;
  opts.closure_bias = 0.9;
  opts.require_connected = true;
  return random_complex_with_counts(8, 12, 5, seed, opts);
}

MatrixXd random_regressors(Eigen::Index e, Eigen::Index w, Rng& rng) {
  MatrixXd x(e, w);
  for (Eigen::Index i = 0; i < e; ++i)
    for (Eigen::Index j = 0; j < w; ++j) x(i, j) = rng.normal();
  return x;
}

}  // namespace

TEST_SUITE("diffusion") {
  TEST_CASE("neighborhoods are lower adjacency plus self") {
    const auto c = build_incidence(4, {{0, 1}, {1, 2}, {2, 3}}, {});
    const auto nb = lower_adjacency_neighborhoods(c);
    REQUIRE(nb.size() == 3);
    CHECK(nb[0] == std::vector<int>{0, 1});
    CHECK(nb[1] == std::vector<int>{0, 1, 2});
    CHECK(nb[2] == std::vector<int>{1, 2});
  }

  TEST_CASE("combination rules") {
    const auto nb = lower_adjacency_neighborhoods(small_complex(3));
    const auto uni = build_combination(nb, CombinationRule::kUniform);
    const auto met = build_combination(nb, CombinationRule::kMetropolis);
    const auto e = static_cast<Eigen::Index>(nb.size());
    const VectorXd ones = VectorXd::Ones(e);
    CHECK((uni.a * ones - ones).norm() < 1e-12);
    CHECK((met.a * ones - ones).norm() < 1e-12);
    CHECK((met.a - met.a.transpose()).norm() < 1e-12);
    CHECK(met.a.minCoeff() >= 0.0);
    for (Eigen::Index i = 0; i < e; ++i) {
      const auto& ni = nb[static_cast<std::size_t>(i)];
      for (Eigen::Index l = 0; l < e; ++l) {
        const bool inside = std::find(ni.begin(), ni.end(), static_cast<int>(l)) != ni.end();
        if (!inside) CHECK(uni.a(i, l) == 0.0);
        else CHECK(uni.a(i, l) == doctest::Approx(1.0 / static_cast<double>(ni.size())));
      }
    }
    CHECK(check_irreducible(uni.a));
  }

  TEST_CASE("malformed neighborhoods are rejected") {
    CHECK_THROWS_AS(build_combination({{0, 1}, {}}, CombinationRule::kUniform), ValidationError);
    CHECK_THROWS_AS(build_combination({{1}, {0, 1}}, CombinationRule::kUniform), ValidationError);
    CHECK_THROWS_AS(build_combination({{0, 5}, {1}}, CombinationRule::kMetropolis), ValidationError);
  }

  TEST_CASE("irreducibility") {
    const MatrixXd split = (MatrixXd(3, 3) << 1, 0, 0, 0, 0.5, 0.5, 0, 0.5, 0.5).finished();
    CHECK_FALSE(check_irreducible(split));
    const MatrixXd cycle = (MatrixXd(3, 3) << 0.5, 0.5, 0, 0, 0.5, 0.5, 0.5, 0, 0.5).finished();
    CHECK(check_irreducible(cycle));
  }

  TEST_CASE("combination CSV round trip") {
    const auto a = build_combination(lower_adjacency_neighborhoods(small_complex(4)),
                                     CombinationRule::kMetropolis);
    std::stringstream ss;
    write_combination_csv(ss, a);
    const auto back = read_combination_csv(ss, static_cast<int>(a.a.rows()));
    CHECK((back.a - a.a).norm() < 1e-15);
    CHECK(back.neighborhoods == a.neighborhoods);
    std::stringstream bad("i,l,a_il\n1,99,0.5\n");
    CHECK_THROWS(read_combination_csv(bad, 3));
  }

  TEST_CASE("identity combination reduces to per-agent LMS") {
    Rng rng(9);
    const Eigen::Index e = 5;
    const Eigen::Index w = 3;
    Neighborhoods self(static_cast<std::size_t>(e));
    for (int i = 0; i < e; ++i) self[static_cast<std::size_t>(i)] = {i};
    const auto a = build_combination(self, CombinationRule::kUniform);
    CHECK((a.a - MatrixXd::Identity(e, e)).norm() == 0.0);
    const VectorXd mu = VectorXd::LinSpaced(e, 0.01, 0.05);
    auto net = initial_network_state(static_cast<int>(e), static_cast<int>(w), mu);
    std::vector<VectorXd> ref(static_cast<std::size_t>(e), VectorXd::Zero(w));
    for (int n = 0; n < 50; ++n) {
      const MatrixXd x = random_regressors(e, w, rng);
      VectorXd d(e), y(e);
      for (Eigen::Index i = 0; i < e; ++i) {
        d(i) = rng.bernoulli(0.6) ? 1.0 : 0.0;
        y(i) = rng.normal();
      }
      atc_update(net, a, x, d, y);
      for (Eigen::Index i = 0; i < e; ++i) {
        auto& h = ref[static_cast<std::size_t>(i)];
        const VectorXd z = x.row(i).transpose();
        h += mu(i) * d(i) * z * (y(i) - z.dot(h));
      }
    }
    for (Eigen::Index i = 0; i < e; ++i)
      CHECK((net.h[static_cast<std::size_t>(i)] - ref[static_cast<std::size_t>(i)]).norm() < 1e-12);
  }

  TEST_CASE("atc_step is pure and combines after adapting") {
    Rng rng(10);
    const auto a = build_combination(lower_adjacency_neighborhoods(small_complex(5)),
                                     CombinationRule::kUniform);
    const auto e = a.a.rows();
    const Eigen::Index w = 5;
    auto net = initial_network_state(static_cast<int>(e), static_cast<int>(w), VectorXd::Constant(e, 0.1));
    for (auto& h : net.h) h = VectorXd::Random(w);
    const auto before = net;
    const MatrixXd x = random_regressors(e, w, rng);
    const VectorXd d = VectorXd::Ones(e);
    VectorXd y(e);
    for (Eigen::Index i = 0; i < e; ++i) y(i) = rng.normal();
    const auto next = atc_step(net, a, x, d, y);
    for (Eigen::Index i = 0; i < e; ++i) CHECK(net.h[static_cast<std::size_t>(i)] == before.h[static_cast<std::size_t>(i)]);
    CHECK(next.n == 1);
    for (Eigen::Index i = 0; i < e; ++i) {
      VectorXd expect = VectorXd::Zero(w);
      for (Eigen::Index l = 0; l < e; ++l) {
        const VectorXd z = x.row(l).transpose();
        const VectorXd& h = before.h[static_cast<std::size_t>(l)];
        expect += a.a(i, l) * (h + 0.1 * z * (y(l) - z.dot(h)));
      }
      CHECK((next.h[static_cast<std::size_t>(i)] - expect).norm() < 1e-12);
    }
  }

  TEST_CASE("network theory matches a Kronecker oracle") {
    const auto c = small_complex(6);
    const auto ops = unit_scaled(hodge_laplacians(c));
    const auto e = ops.num_edges();
    const int order = 1;
    const auto w = regressor_width(order);
    const auto a = build_combination(lower_adjacency_neighborhoods(c), CombinationRule::kMetropolis);
    const VectorXd prob = VectorXd::Constant(e, 0.8);
    const auto cz = local_moments(ops, MatrixXd::Identity(e, e), prob, order);
    Rng rng(2);
    VectorXd noise(e);
    for (Eigen::Index i = 0; i < e; ++i) noise(i) = rng.uniform(1e-4, 1e-2);
    const VectorXd mu = VectorXd::Constant(e, 0.05);
    const auto rep = dist_theory(a, cz, noise, mu);

    const Eigen::Index n = e * w;
    MatrixXd czb = MatrixXd::Zero(n, n);
    MatrixXd gb = MatrixXd::Zero(n, n);
    MatrixXd mb = MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < e; ++i) {
      czb.block(i * w, i * w, w, w) = cz[static_cast<std::size_t>(i)];
      gb.block(i * w, i * w, w, w) = noise(i) * cz[static_cast<std::size_t>(i)];
      mb.block(i * w, i * w, w, w) = mu(i) * MatrixXd::Identity(w, w);
    }
    const MatrixXd anet = oracle::kron(a.a, MatrixXd::Identity(w, w));
    const MatrixXd b = anet * (MatrixXd::Identity(n, n) - mb * czb);
    CHECK((rep.b - b).norm() < 1e-12);
    const double rho = b.eigenvalues().cwiseAbs().maxCoeff();
    CHECK(rep.rho_b == doctest::Approx(rho).epsilon(1e-9));
    REQUIRE(rep.stable);
    const MatrixXd s = oracle::stein_kron(b, MatrixXd::Identity(n, n));
    const double msd = (anet * mb * gb * mb * anet.transpose() * s).trace();
    CHECK(rep.msd_network == doctest::Approx(msd).epsilon(1e-8));
    CHECK(rep.msd_per_agent == doctest::Approx(msd / static_cast<double>(e)).epsilon(1e-8));
    CHECK(rep.irreducible);
    CHECK(rep.hypotheses_hold);
  }

  TEST_CASE("oversized steps are reported unstable") {
    const auto c = small_complex(7);
    const auto ops = unit_scaled(hodge_laplacians(c));
    const auto e = ops.num_edges();
    const auto a = build_combination(lower_adjacency_neighborhoods(c), CombinationRule::kUniform);
    const auto cz = local_moments(ops, MatrixXd::Identity(e, e), VectorXd::Ones(e), 1);
    const auto rep = dist_theory(a, cz, VectorXd::Constant(e, 1e-3), VectorXd::Constant(e, 50.0));
    CHECK_FALSE(rep.steps_within_bounds);
    CHECK_FALSE(rep.stable);
    CHECK(std::isinf(rep.msd_network));
  }

  TEST_CASE("simulation agrees with theory") {
    const auto c = small_complex(8);
    const auto ops = unit_scaled(hodge_laplacians(c));
    const auto e = ops.num_edges();
    const int order = 1;
    const auto a = build_combination(lower_adjacency_neighborhoods(c), CombinationRule::kUniform);
    StreamConfig cfg;
    cfg.signal_cov = MatrixXd::Identity(e, e);
    cfg.noise_var = VectorXd::Constant(e, 1e-3);
    cfg.sample_prob = VectorXd::Ones(e);
    cfg.horizon = 4000;
    cfg.seed = 3;
    const auto h = FilterCoeffs::from_flat((VectorXd(3) << 1.0, 0.5, 0.3).finished(), order);
    DistributedOptions opt;
    opt.mu = VectorXd::Constant(e, 0.05);
    opt.realizations = 8;
    opt.horizon = 4000;
    opt.seed = 11;
    opt.agent_traces = true;
    const auto res = run_distributed(ops, h, cfg, a, opt);
    const auto rep = dist_theory(a, local_moments(ops, cfg.signal_cov, cfg.sample_prob, order),
                                 cfg.noise_var, opt.mu);
    REQUIRE(rep.stable);
    CHECK(res.completed == 8);
    CHECK(res.msd.size() == 4001);
    CHECK(res.agent_msd.size() == static_cast<std::size_t>(e));
    const double emp = mean_confidence(res.tail_msd).mean;
    CHECK(std::abs(to_db(emp) - to_db(rep.msd_per_agent)) < 1.5);
    double avg_last = 0.0;
    for (const auto& trace : res.agent_msd) avg_last += trace.back();
    CHECK(avg_last / static_cast<double>(e) == doctest::Approx(res.msd.back()).epsilon(1e-9));
  }
}
