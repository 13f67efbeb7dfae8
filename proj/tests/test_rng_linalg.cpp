#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "topolms/error.hpp"
#include "topolms/linalg.hpp"
#include "topolms/parallel.hpp"
#include "topolms/rng.hpp"

using namespace topolms;

namespace {

MatrixXd random_matrix(Rng& rng, int rows, int cols) {
  MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

}  // namespace

TEST_SUITE("rng_linalg") {
  TEST_CASE("splitmix64 matches the reference sequence") {
    // Reference values of SplitMix64 from state 0.
    std::uint64_t s = 0;
    CHECK(splitmix64(s) == 0xE220A8397B1DCDAFULL);
    CHECK(splitmix64(s) == 0x6E789E6AA1B965F4ULL);
    CHECK(splitmix64(s) == 0x06C45D188009454FULL);
  }

  TEST_CASE("same seed gives the same stream, derived seeds differ") {
    Rng a(42), b(42);
    for (int k = 0; k < 100; ++k) CHECK(a() == b());
    std::set<std::uint64_t> seeds;
    for (std::uint64_t s = 0; s < 1000; ++s) seeds.insert(derive_seed(7, s));
    CHECK(seeds.size() == 1000);
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  }

  TEST_CASE("uniform, below and normal moments") {
    Rng rng(5);
    const int n = 200000;
    double sum = 0.0, sum_sq = 0.0, nsum = 0.0, nsq = 0.0;
    std::vector<int> counts(6, 0);
    int out_of_range = 0;
    for (int k = 0; k < n; ++k) {
      const double u = rng.uniform();
      out_of_range += u < 0.0 || u >= 1.0;
      sum += u;
      sum_sq += u * u;
      ++counts[rng.below(6)];
      const double z = rng.normal();
      nsum += z;
      nsq += z * z;
    }
    CHECK(out_of_range == 0);
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(sum_sq / n == doctest::Approx(1.0 / 3.0).epsilon(0.01));
    CHECK(std::abs(nsum / n) < 0.01);
    CHECK(nsq / n == doctest::Approx(1.0).epsilon(0.02));
    for (int c : counts) CHECK(std::abs(c - n / 6.0) < 0.02 * n / 6.0);
  }

  TEST_CASE("symmetric eigenvalue extremes and spectral radius") {
    Rng rng(9);
    const MatrixXd g = random_matrix(rng, 6, 6);
    const MatrixXd s = g + g.transpose();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(s);
    CHECK(lambda_min_sym(s) == doctest::Approx(es.eigenvalues()(0)));
    CHECK(lambda_max_sym(s) == doctest::Approx(es.eigenvalues()(5)));
    // Rotation by 90 degrees scaled by 0.5: eigenvalues +-0.5i.
    MatrixXd rot(2, 2);
    rot << 0.0, -0.5, 0.5, 0.0;
    CHECK(spectral_radius(rot) == doctest::Approx(0.5));
  }

  TEST_CASE("shape checks throw DimensionError") {
    const MatrixXd m = MatrixXd::Zero(2, 3);
    CHECK_NOTHROW(require_shape(m, 2, 3, "m"));
    CHECK_THROWS_AS(require_shape(m, 3, 2, "m"), DimensionError);
    CHECK_THROWS_AS(require_size(VectorXd::Zero(3), 4, "v"), DimensionError);
    VectorXd v = VectorXd::Ones(3);
    CHECK(all_finite(v));
    v(1) = std::nan("");
    CHECK_FALSE(all_finite(v));
  }

  TEST_CASE("stein_solve agrees with the Kronecker oracle on every path") {
    Rng rng(11);
    for (int trial = 0; trial < 5; ++trial) {
      const int n = 3 + trial;
      MatrixXd a = random_matrix(rng, n, n);
      a *= 0.8 / spectral_radius(a);
      const MatrixXd g = random_matrix(rng, n, n);
      const MatrixXd r = g * g.transpose();
      const MatrixXd expected = oracle::stein_kron(a, r);
      // materialized, doubling (general)
      CHECK((stein_solve(a, r, 64) - expected).norm() < 1e-9 * expected.norm());
      CHECK((stein_solve(a, r, 0) - expected).norm() < 1e-8 * expected.norm());
      // symmetric path
      MatrixXd sym = a + a.transpose();
      sym *= 0.9 / spectral_radius(sym);
      const MatrixXd sym_expected = oracle::stein_kron(sym, r);
      CHECK((stein_solve(sym, r, 0) - sym_expected).norm() < 1e-8 * sym_expected.norm());
    }
  }

  TEST_CASE("stein_solve rejects unstable operators") {
    const MatrixXd a = 1.01 * MatrixXd::Identity(3, 3);
    CHECK_THROWS_AS(stein_solve(a, MatrixXd::Identity(3, 3), 16), StabilityError);
  }

  TEST_CASE("psd_sqrt squares back and rejects indefinite input") {
    Rng rng(13);
    const MatrixXd g = random_matrix(rng, 5, 3);
    const MatrixXd a = g * g.transpose();  // rank 3
    const MatrixXd root = psd_sqrt(a);
    CHECK((root * root - a).norm() < 1e-10 * a.norm());
    CHECK((root - root.transpose()).norm() < 1e-12);
    MatrixXd bad = MatrixXd::Identity(2, 2);
    bad(1, 1) = -1.0;
    CHECK_THROWS_AS(psd_sqrt(bad), ValidationError);
  }

  TEST_CASE("parallel_for covers every index once and rethrows") {
    std::vector<int> hits(100, 0);
    parallel_for(100, 4, [&](int k) { hits[k] += 1; });
    for (int h : hits) CHECK(h == 1);
    CHECK_THROWS_AS(parallel_for(10, 3,
                                 [](int k) {
                                   if (k == 7) throw ValidationError("boom");
                                 }),
                    ValidationError);
  }
}
