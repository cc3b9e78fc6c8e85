#include <cmath>
#include <filesystem>
#include <vector>

#include "cilab/errors.hpp"
#include "cilab/models.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace cilab;
using namespace cilab::models;
using testsup::gaussian;

namespace {

// Central finite differences of <upstream, f(x)> over the flat parameters.
Vector fd_gradient(const Processor& f, const Matrix& x, const Matrix& upstream,
                   double step) {
  const Vector theta = to_params(f);
  Vector g(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Vector tp = theta, tm = theta;
    tp(i) += step;
    tm(i) -= step;
    const double lp = (upstream.array() * forward(with_params(f, tp), x).array()).sum();
    const double lm = (upstream.array() * forward(with_params(f, tm), x).array()).sum();
    g(i) = (lp - lm) / (2.0 * step);
  }
  return g;
}

}  // namespace

TEST_SUITE("models") {
  TEST_CASE("linear init has fan-in scaled spread, zero scale gives the zero map") {
    RandomSource rng(21);
    const Processor f = init_processor(LinearShape{5, 100}, rng);
    const auto& lin = std::get<LinearProcessor>(f);
    const double std_hat =
        std::sqrt(lin.a.squaredNorm() / static_cast<double>(lin.a.size()));
    CHECK(std_hat >= 0.08);
    CHECK(std_hat <= 0.12);

    RandomSource rng2(22);
    const Processor zf = init_processor(LinearShape{5, 100}, rng2, 0.0);
    const Matrix x = gaussian(100, 7, 23);
    CHECK(forward(zf, x).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("init is seed deterministic") {
    RandomSource a(31), b(31);
    const Processor fa = init_processor(MlpShape{{8, 16, 3}, Activation::kTanh}, a);
    const Processor fb = init_processor(MlpShape{{8, 16, 3}, Activation::kTanh}, b);
    CHECK((to_params(fa) - to_params(fb)).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("identity weights pass the input through unchanged") {
    Processor f = LinearProcessor{Matrix::Identity(6, 6)};
    const Matrix x = gaussian(6, 11, 33);
    CHECK((forward(f, x) - x).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("zero-weight network outputs zero") {
    MlpProcessor net;
    net.weights = {Matrix::Zero(4, 3), Matrix::Zero(2, 4)};
    net.biases = {Vector::Zero(4), Vector::Zero(2)};
    const Matrix x = gaussian(3, 5, 34);
    CHECK(forward(net, x).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("single tanh unit matches the closed form") {
    MlpProcessor net;
    net.weights = {Matrix::Constant(1, 1, 2.0), Matrix::Constant(1, 1, 0.5)};
    net.biases = {Vector::Zero(1), Vector::Zero(1)};
    Matrix x(1, 1);
    x << 1.0;
    const Matrix out = forward(Processor{net}, x);
    CHECK(std::abs(out(0, 0) - 0.5 * std::tanh(2.0)) < 1e-15);
    CHECK(out(0, 0) == doctest::Approx(0.482013).epsilon(1e-5));
  }

  TEST_CASE("zero upstream gives a zero gradient") {
    RandomSource rng(41);
    const Processor f = init_processor(MlpShape{{5, 8, 2}, Activation::kTanh}, rng);
    const Matrix x = gaussian(5, 9, 42);
    const Vector g = gradient(f, x, Matrix::Zero(2, 9));
    CHECK(g.cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("linear gradient is the exact outer product") {
    const Matrix a = gaussian(3, 4, 51);
    const Processor f = LinearProcessor{a};
    const Matrix x = gaussian(4, 12, 52);
    const Matrix u = gaussian(3, 12, 53);
    const Vector g = gradient(f, x, u);
    const Matrix expect = u * x.transpose();  // d<U, AX>/dA
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < expect.rows(); ++i) {
      for (Eigen::Index j = 0; j < expect.cols(); ++j) {
        CHECK(g(k) == expect(i, j));
        ++k;
      }
    }
  }

  TEST_CASE("network gradient matches finite differences") {
    RandomSource rng(61);
    const Processor f = init_processor(MlpShape{{4, 7, 3}, Activation::kTanh}, rng);
    const Matrix x = gaussian(4, 6, 62);
    const Matrix u = gaussian(3, 6, 63);
    const Vector ga = gradient(f, x, u);
    const Vector gn = fd_gradient(f, x, u, 1e-5);
    const double denom = std::max({ga.cwiseAbs().maxCoeff(), gn.cwiseAbs().maxCoeff(), 1e-12});
    CHECK((ga - gn).cwiseAbs().maxCoeff() / denom <= 1e-5);
  }

  TEST_CASE("relu gradient matches finite differences away from kinks") {
    RandomSource rng(64);
    const Processor f = init_processor(MlpShape{{4, 9, 2}, Activation::kRelu}, rng);
    const Matrix x = gaussian(4, 5, 65);
    const Matrix u = gaussian(2, 5, 66);
    const Vector ga = gradient(f, x, u);
    const Vector gn = fd_gradient(f, x, u, 1e-6);
    const double denom = std::max({ga.cwiseAbs().maxCoeff(), gn.cwiseAbs().maxCoeff(), 1e-12});
    CHECK((ga - gn).cwiseAbs().maxCoeff() / denom <= 1e-4);
  }

  TEST_CASE("forward maps columns independently") {
    RandomSource rng(71);
    const Processor f = init_processor(MlpShape{{5, 6, 4}, Activation::kTanh}, rng);
    const Matrix x = gaussian(5, 8, 72);
    const Matrix fx = forward(f, x);
    std::vector<int> perm = {3, 0, 7, 1, 5, 2, 6, 4};
    Matrix xp(5, 8), expect(4, 8);
    for (int j = 0; j < 8; ++j) {
      xp.col(j) = x.col(perm[j]);
      expect.col(j) = fx.col(perm[j]);
    }
    CHECK((forward(f, xp) - expect).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("gradient is linear in the upstream signal") {
    RandomSource rng(81);
    const Processor f = init_processor(MlpShape{{3, 5, 2}, Activation::kTanh}, rng);
    const Matrix x = gaussian(3, 7, 82);
    const Matrix u1 = gaussian(2, 7, 83);
    const Matrix u2 = gaussian(2, 7, 84);
    const Vector lhs = gradient(f, x, 1.5 * u1 - 2.0 * u2);
    const Vector rhs = 1.5 * gradient(f, x, u1) - 2.0 * gradient(f, x, u2);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-10);
  }

  TEST_CASE("parameter vector round-trip preserves the map bit-exactly") {
    RandomSource rng(91);
    const Processor f = init_processor(MlpShape{{6, 10, 3}, Activation::kRelu}, rng);
    const Processor g = with_params(f, to_params(f));
    const Matrix x = gaussian(6, 13, 92);
    CHECK((forward(f, x) - forward(g, x)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(param_count(f) == to_params(f).size());
    CHECK_THROWS_AS(with_params(f, Vector::Zero(3)), InputError);
  }

  TEST_CASE("checkpoint round-trip preserves shape and parameters") {
    RandomSource rng(95);
    const Processor f = init_processor(MlpShape{{4, 6, 2}, Activation::kRelu}, rng);
    const auto path = std::filesystem::temp_directory_path() / "cilab_test_model.txt";
    save_checkpoint(f, path);
    const Processor g = load_checkpoint(path);
    CHECK((to_params(f) - to_params(g)).cwiseAbs().maxCoeff() == 0.0);
    const auto& net = std::get<MlpProcessor>(g);
    CHECK(net.act == Activation::kRelu);

    const Processor lin = LinearProcessor{gaussian(3, 5, 96)};
    save_checkpoint(lin, path);
    const Processor lin2 = load_checkpoint(path);
    CHECK((to_params(lin) - to_params(lin2)).cwiseAbs().maxCoeff() == 0.0);
    std::filesystem::remove(path);
  }

  TEST_CASE("dimension mismatches are rejected") {
    const Processor f = LinearProcessor{Matrix::Identity(3, 3)};
    const Matrix x = gaussian(4, 2, 97);
    CHECK_THROWS_AS(forward(f, x), InputError);
    CHECK_THROWS_AS(gradient(f, gaussian(3, 2, 98), gaussian(2, 2, 99)), InputError);
  }
}
