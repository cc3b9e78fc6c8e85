#include <cmath>
#include <vector>

#include "cilab/errors.hpp"
#include "cilab/linalg.hpp"
#include "cilab/rng.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace cilab;
using namespace cilab::linalg;
using testsup::gaussian;

TEST_SUITE("linalg") {
  TEST_CASE("ridge least squares recovers coefficients on orthonormal features") {
    Matrix f(2, 2);
    f << 1, 0, 0, 1;
    Matrix t(1, 2);
    t << 3, 4;
    const Matrix w = fit_linear_ls(f, t, RidgeParam::absolute(0.0));
    CHECK(w.rows() == 1);
    CHECK(w.cols() == 2);
    CHECK(std::abs(w(0, 0) - 3.0) < 1e-12);
    CHECK(std::abs(w(0, 1) - 4.0) < 1e-12);
  }

  TEST_CASE("constant feature yields the target mean") {
    Matrix f(1, 4);
    f << 1, 1, 1, 1;
    Matrix t(1, 4);
    t << 1, 2, 3, 6;
    const Matrix w = fit_linear_ls(f, t, RidgeParam::absolute(0.0));
    CHECK(std::abs(w(0, 0) - 3.0) < 1e-12);
  }

  TEST_CASE("closed form agrees with long-run gradient descent") {
    const Matrix f = gaussian(3, 50, 42);
    const Matrix t = gaussian(2, 50, 43);
    const Matrix w = fit_linear_ls(f, t, RidgeParam::absolute(0.0));
    const Matrix w_gd = testsup::gd_least_squares(f, t, 0.0, 100000);
    CHECK((w - w_gd).cwiseAbs().maxCoeff() < 1e-6);
  }

  TEST_CASE("solution satisfies the normal equations") {
    for (int trial = 0; trial < 4; ++trial) {
      const int d = 2 + trial;
      const int n = 60 + 10 * trial;
      const Matrix f = gaussian(d, n, 700 + trial);
      const Matrix t = gaussian(3, n, 800 + trial);
      const Matrix w = fit_linear_ls(f, t, RidgeParam::absolute(0.0));
      const double lhs = ((w * f - t) * f.transpose()).norm();
      CHECK(lhs <= 1e-8 * t.norm() * f.norm());
    }
  }

  TEST_CASE("rank-deficient gram with zero ridge is rejected") {
    Matrix f(2, 3);
    f << 1, 2, 3, 1, 2, 3;
    Matrix t(1, 3);
    t << 1, 1, 1;
    CHECK_THROWS_AS(fit_linear_ls(f, t, RidgeParam::absolute(0.0)), SingularityError);
    // A ridge regularizes the same system.
    const Matrix w = fit_linear_ls(f, t, RidgeParam::absolute(1e-6));
    CHECK(w.allFinite());
  }

  TEST_CASE("shape mismatches and bad ridge are input errors") {
    Matrix f(2, 3);
    f.setZero();
    Matrix t(1, 4);
    t.setZero();
    CHECK_THROWS_AS(fit_linear_ls(f, t, RidgeParam()), InputError);
    CHECK_THROWS_AS(RidgeParam::absolute(-1.0).resolve(1.0), InputError);
    Matrix empty(2, 0);
    CHECK_THROWS_AS(second_moment(empty), InputError);
  }

  TEST_CASE("second moment hand values") {
    Matrix a(1, 2);
    a << 1, -1;
    const Matrix ma = second_moment(a);
    CHECK(std::abs(ma(0, 0) - 1.0) < 1e-15);

    const Matrix z = Matrix::Zero(3, 5);
    CHECK(second_moment(z).cwiseAbs().maxCoeff() == 0.0);

    Matrix b(2, 2);
    b << 1, 0, 0, 2;
    const Matrix mb = second_moment(b);
    CHECK(std::abs(mb(0, 0) - 0.5) < 1e-15);
    CHECK(std::abs(mb(1, 1) - 2.0) < 1e-15);
    CHECK(std::abs(mb(0, 1)) < 1e-15);
    CHECK(std::abs(mb(1, 0)) < 1e-15);
  }

  TEST_CASE("second moment is symmetric positive semidefinite") {
    for (int trial = 0; trial < 5; ++trial) {
      const Matrix f = gaussian(4, 9 + trial, 1100 + trial);
      const Matrix m = second_moment(f);
      CHECK((m - m.transpose()).cwiseAbs().maxCoeff() == 0.0);
      Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
      CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
    }
  }

  TEST_CASE("cross moment is bilinear and invariant to joint column permutation") {
    const int n = 23;
    const Matrix f1 = gaussian(3, n, 131);
    const Matrix f2 = gaussian(3, n, 132);
    const Matrix z = gaussian(4, n, 133);
    const Matrix lhs = cross_moment(2.0 * f1 - 0.5 * f2, z);
    const Matrix rhs = 2.0 * cross_moment(f1, z) - 0.5 * cross_moment(f2, z);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);

    // Shuffle the sample order of both blocks together.
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    RandomSource shuffle_rng(99);
    for (int i = n - 1; i > 0; --i) {
      const int j =
          static_cast<int>(shuffle_rng.uniform_index(static_cast<std::uint64_t>(i + 1)));
      std::swap(perm[i], perm[j]);
    }
    Matrix fp(3, n), zp(4, n);
    for (int i = 0; i < n; ++i) {
      fp.col(i) = f1.col(perm[i]);
      zp.col(i) = z.col(perm[i]);
    }
    CHECK((cross_moment(fp, zp) - cross_moment(f1, z)).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("partial covariance vanishes when the conditioning block is the feature") {
    const Matrix y = gaussian(3, 40, 501);
    const Matrix z = gaussian(4, 40, 502);
    const Matrix pc = partial_covariance(y, z, y, RidgeParam::absolute(0.0));
    CHECK(pc.cwiseAbs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("partial covariance hand value on a 4-sample design") {
    Matrix y(1, 4);
    y << 1, -1, 1, -1;
    Matrix z(1, 4);
    z << 1, 1, -1, -1;
    const Matrix pc = partial_covariance(z, z, y, RidgeParam::absolute(0.0));
    CHECK(pc.rows() == 1);
    CHECK(pc.cols() == 1);
    CHECK(std::abs(pc(0, 0) - 1.0) < 1e-12);
  }

  TEST_CASE("partial covariance of independent blocks concentrates near zero") {
    const int n = 100000;
    const Matrix f = gaussian(3, n, 20241);
    const Matrix z = gaussian(4, n, 20242);
    const Matrix y = gaussian(2, n, 20243);
    const Matrix pc = partial_covariance(f, z, y, RidgeParam());
    CHECK(pc.norm() <= 0.05);
  }

  TEST_CASE("partial covariance decays like the root of the sample size") {
    const std::vector<int> sizes = {100, 1000, 10000, 100000};
    std::vector<double> log_n, log_norm;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      double acc = 0.0;
      const int reps = 5;
      for (int r = 0; r < reps; ++r) {
        const std::uint64_t s = derive_seed(31337, static_cast<std::uint64_t>(k * 100 + r));
        const Matrix f = gaussian(2, sizes[k], s);
        const Matrix z = gaussian(3, sizes[k], s + 1);
        const Matrix y = gaussian(2, sizes[k], s + 2);
        acc += partial_covariance(f, z, y, RidgeParam()).norm();
      }
      log_n.push_back(std::log(static_cast<double>(sizes[k])));
      log_norm.push_back(std::log(acc / reps));
    }
    const double slope = testsup::fit_slope(log_n, log_norm);
    CHECK(slope >= -0.7);
    CHECK(slope <= -0.3);
  }

  TEST_CASE("random orthogonal matrices are orthogonal with unit determinant") {
    RandomSource rng0(80);
    const Matrix q1 = random_orthogonal(1, rng0);
    CHECK(std::abs(std::abs(q1(0, 0)) - 1.0) < 1e-12);

    RandomSource rng1(81);
    const Matrix q = random_orthogonal(30, rng1);
    CHECK((q.transpose() * q - Matrix::Identity(30, 30)).norm() <= 1e-10);
    CHECK(std::abs(std::abs(q.determinant()) - 1.0) <= 1e-8);

    RandomSource a(77), b(77);
    const Matrix qa = random_orthogonal(6, a);
    const Matrix qb = random_orthogonal(6, b);
    CHECK((qa - qb).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("random source streams are deterministic and well ranged") {
    RandomSource a(123), b(123);
    for (int i = 0; i < 64; ++i) CHECK(a.next_u64() == b.next_u64());
    RandomSource c(123);
    RandomSource forked = c.fork(4);
    CHECK(forked.next_u64() != RandomSource(123).next_u64());
    RandomSource d(9);
    for (int i = 0; i < 1000; ++i) {
      const double u = d.uniform();
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
      CHECK(d.uniform_index(7) < 7);
    }
    // Gaussian moments over a large draw.
    RandomSource g(55);
    double mean = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double x = g.gaussian();
      mean += x;
      sq += x * x;
    }
    mean /= n;
    sq /= n;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(sq - 1.0) < 0.02);
  }
}
