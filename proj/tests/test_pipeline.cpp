#include <cmath>
#include <optional>
#include <vector>

#include "cilab/errors.hpp"
#include "cilab/pipeline.hpp"
#include "doctest.h"
#include "test_support.hpp"

using cilab::Matrix;
using cilab::RandomSource;
using cilab::RidgeParam;
namespace pl = cilab::pipeline;
namespace synth = cilab::synth;
namespace models = cilab::models;

namespace {

synth::Dataset draw_prefix(const synth::PrefixGaussianSpec& spec, int n,
                           std::uint64_t seed) {
  RandomSource rng(seed);
  return synth::sample_prefix_gaussian(spec, n, rng);
}

// Joint column permutation of x and y (Fisher-Yates).
synth::Dataset permute_columns(const synth::Dataset& data, std::uint64_t seed) {
  const Eigen::Index n = data.cols();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  RandomSource rng(seed);
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(
        rng.uniform_index(static_cast<std::uint64_t>(i) + 1));
    std::swap(order[static_cast<std::size_t>(i)],
              order[static_cast<std::size_t>(j)]);
  }
  synth::Dataset out = data;
  for (Eigen::Index i = 0; i < n; ++i) {
    out.x.col(i) = data.x.col(order[static_cast<std::size_t>(i)]);
    if (data.y) out.y->col(i) = data.y->col(order[static_cast<std::size_t>(i)]);
    if (data.z) out.z->col(i) = data.z->col(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("representation from the target itself is the identity") {
  const Matrix z = testsup::gaussian(6, 300, 7001);
  const Matrix psi =
      pl::train_representation(z, z, RidgeParam::relative(1e-10));
  CHECK((psi - Matrix::Identity(6, 6)).norm() <= 1e-8);
}

TEST_CASE("representation from independent features is near zero") {
  const int n = 100000;
  const Matrix f = testsup::gaussian(5, n, 7002);
  const Matrix z = testsup::gaussian(4, n, 7003);
  const Matrix psi =
      pl::train_representation(f, z, RidgeParam::relative(1e-10));
  // Entries concentrate at O(1/sqrt(n)); Frobenius norm at
  // sqrt(4 * 5 / n) = 0.014 here.
  CHECK(psi.norm() <= 0.05);
}

TEST_CASE("representation on prefix data recovers the coordinate selector") {
  const synth::PrefixGaussianSpec spec;  // dx=100, dz=80, noise 0.01
  const synth::Dataset data = draw_prefix(spec, 20000, 7004);
  const Matrix psi =
      pl::train_representation(data.x, *data.z, RidgeParam::relative(1e-10));
  Matrix expected = Matrix::Zero(spec.dz, spec.dx);
  expected.leftCols(spec.dz) = Matrix::Identity(spec.dz, spec.dz);
  CHECK((psi - expected).cwiseAbs().maxCoeff() <= 0.02);
}

TEST_CASE("head is the identity when labels equal the representation output") {
  const Matrix psi = testsup::gaussian(4, 7, 7005);
  const Matrix x = testsup::gaussian(7, 60, 7006);
  const Matrix y = psi * x;
  const Matrix w =
      pl::train_downstream_head(psi, x, y, RidgeParam::relative(1e-10));
  CHECK((w - Matrix::Identity(4, 4)).norm() <= 1e-8);
}

TEST_CASE("zero labels give a zero head") {
  const Matrix psi = testsup::gaussian(4, 7, 7007);
  const Matrix x = testsup::gaussian(7, 60, 7008);
  const Matrix y = Matrix::Zero(4, 60);
  const Matrix w =
      pl::train_downstream_head(psi, x, y, RidgeParam::relative(1e-10));
  CHECK(w.norm() == 0.0);
}

TEST_CASE("two-sample scalar head matches hand arithmetic") {
  // min_w (w*1 - 1)^2 + (w*2 - 3)^2  ->  w = 7/5
  Matrix psi(1, 1), x(1, 2), y(1, 2);
  psi << 1.0;
  x << 1.0, 2.0;
  y << 1.0, 3.0;
  const Matrix w = pl::train_downstream_head(psi, x, y, RidgeParam::zero());
  CHECK(w(0, 0) == doctest::Approx(1.4).epsilon(1e-12));
}

TEST_CASE("head dimension mismatch is rejected") {
  const Matrix psi = testsup::gaussian(4, 7, 7009);
  const Matrix x = testsup::gaussian(6, 60, 7010);
  const Matrix y = testsup::gaussian(4, 60, 7011);
  CHECK_THROWS_AS(
      pl::train_downstream_head(psi, x, y, RidgeParam::relative(1e-10)),
      cilab::InputError);
}

TEST_CASE("test error of a perfect predictor is zero") {
  const Matrix psi = testsup::gaussian(5, 9, 7012);
  const Matrix w = testsup::gaussian(3, 5, 7013);
  synth::Dataset test;
  test.x = testsup::gaussian(9, 40, 7014);
  test.y = w * (psi * test.x);
  CHECK(pl::evaluate_mse(psi, w, std::nullopt, test) == 0.0);
}

TEST_CASE("zero predictor scores the mean squared label norm") {
  const synth::PrefixGaussianSpec spec;
  const synth::Dataset test = draw_prefix(spec, 20000, 7015);
  const Matrix psi = Matrix::Identity(spec.dz, spec.dx).eval();
  const Matrix w = Matrix::Zero(spec.dy, spec.dz);
  const double mse = pl::evaluate_mse(psi, w, std::nullopt, test);
  const double expected =
      spec.dy * (1.0 + spec.noise_y * spec.noise_y);  // E|y|^2
  CHECK(mse >= 0.9 * expected);
  CHECK(mse <= 1.1 * expected);
}

TEST_CASE("coordinate-selector predictor reaches the label noise floor") {
  const synth::PrefixGaussianSpec spec;
  const synth::Dataset test = draw_prefix(spec, 20000, 7016);
  Matrix psi = Matrix::Zero(spec.dz, spec.dx);
  psi.leftCols(spec.dz) = Matrix::Identity(spec.dz, spec.dz);
  Matrix w = Matrix::Zero(spec.dy, spec.dz);
  w.leftCols(spec.dy) = Matrix::Identity(spec.dy, spec.dy);
  const double mse = pl::evaluate_mse(psi, w, std::nullopt, test);
  const double floor = spec.dy * spec.noise_y * spec.noise_y;  // 5e-4
  CHECK(mse >= 0.75 * floor);
  CHECK(mse <= 1.25 * floor);
}

TEST_CASE("test error is invariant under joint column permutation") {
  const synth::PrefixGaussianSpec spec;
  const synth::Dataset test = draw_prefix(spec, 500, 7017);
  const synth::Dataset shuffled = permute_columns(test, 7018);
  const Matrix psi = testsup::gaussian(spec.dz, spec.dx, 7019) * 0.1;
  const Matrix w = testsup::gaussian(spec.dy, spec.dz, 7020) * 0.1;
  const double a = pl::evaluate_mse(psi, w, std::nullopt, test);
  const double b = pl::evaluate_mse(psi, w, std::nullopt, shuffled);
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("standard route beats the zero predictor on reference settings") {
  pl::PipelineConfig cfg;  // prefix defaults, n1=20000, n2=30, nt=2000
  const pl::SslResult res = pl::run_standard_ssl(cfg, 7021);
  const auto& spec = std::get<synth::PrefixGaussianSpec>(cfg.distribution);
  const double zero_mse = spec.dy * (1.0 + spec.noise_y * spec.noise_y);
  CHECK(std::isfinite(res.mse_test));
  CHECK(res.mse_test < zero_mse);
  CHECK(res.n1 == cfg.n1);
  CHECK(res.n0 == 0);
  CHECK(res.n2 == cfg.n2);
  CHECK(res.nt == cfg.nt);
  CHECK(res.criteria.sample_size == cfg.nt);
  CHECK(res.train_loss.total == 0.0);
}

TEST_CASE("empty test block is rejected") {
  pl::PipelineConfig cfg;
  cfg.nt = 0;
  CHECK_THROWS_AS(pl::run_standard_ssl(cfg, 7022), cilab::InputError);
  cfg.processor = models::LinearShape{5, 100};
  CHECK_THROWS_AS(pl::run_processor_ssl(cfg, 7022), cilab::InputError);
}

TEST_CASE("standard route is bit-exact for a fixed seed") {
  pl::PipelineConfig cfg;
  cfg.n1 = 2000;
  cfg.nt = 1200;  // criteria on raw x need 10x the 100 input dims
  const pl::SslResult a = pl::run_standard_ssl(cfg, 7023);
  const pl::SslResult b = pl::run_standard_ssl(cfg, 7023);
  CHECK(a.mse_test == b.mse_test);
  CHECK((a.psi - b.psi).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.w_down - b.w_down).cwiseAbs().maxCoeff() == 0.0);
  const pl::SslResult c = pl::run_standard_ssl(cfg, 7024);
  CHECK(c.mse_test != a.mse_test);
}

TEST_CASE("identity processor with zero steps reproduces the raw route") {
  synth::PrefixGaussianSpec spec;
  spec.dx = 20;
  spec.dz = 15;
  spec.dy = 3;
  pl::PipelineConfig cfg;
  cfg.distribution = spec;
  cfg.n1 = 2000;
  cfg.n2 = 40;
  cfg.nt = 500;
  const pl::SslResult raw = pl::run_standard_ssl(cfg, 7025);

  // Same downstream budget: down1 drawn fresh, down2 keeps all n2 columns.
  cfg.extra_down1 = true;
  cfg.split.n0 = 10;
  cfg.train.outer_steps = 0;
  cfg.initial_processor =
      models::LinearProcessor{Matrix::Identity(spec.dx, spec.dx)};
  const pl::SslResult lim = pl::run_processor_ssl(cfg, 7025);

  CHECK(lim.mse_test == raw.mse_test);
  CHECK((lim.psi - raw.psi).cwiseAbs().maxCoeff() == 0.0);
  CHECK((lim.w_down - raw.w_down).cwiseAbs().maxCoeff() == 0.0);
  CHECK(lim.n0 == 10);
}

TEST_CASE("processor route improves with more processor-training data") {
  pl::PipelineConfig cfg;
  cfg.n2 = 2000;
  cfg.processor = models::LinearShape{5, 100};
  cfg.loss.lambda = 0.1;
  const auto& spec = std::get<synth::PrefixGaussianSpec>(cfg.distribution);
  const double zero_mse = spec.dy * (1.0 + spec.noise_y * spec.noise_y);

  cfg.split.n0 = 10;
  const pl::SslResult small = pl::run_processor_ssl(cfg, 7026);
  cfg.split.n0 = 1500;
  const pl::SslResult large = pl::run_processor_ssl(cfg, 7026);

  CHECK(large.mse_test < small.mse_test);
  CHECK(small.mse_test <= 1.1 * zero_mse);
  CHECK(large.mse_test <= 1.1 * zero_mse);
  CHECK(small.n0 == 10);
  CHECK(large.n0 == 1500);
}

TEST_CASE("pretext weight past the signal strength hurts the label fit") {
  // Prefix labels copy unit-variance coordinates, so the signal strength
  // is 1 and lambda = 1.5 trades label directions away. n0 = 200 exceeds
  // the linear processor's interpolation capacity (dx = 100), so the
  // trained map reflects the population tradeoff rather than overfit.
  pl::PipelineConfig cfg;
  cfg.n2 = 400;
  cfg.split.n0 = 200;
  cfg.processor = models::LinearShape{5, 100};
  const auto& spec = std::get<synth::PrefixGaussianSpec>(cfg.distribution);
  const double zero_mse = spec.dy * (1.0 + spec.noise_y * spec.noise_y);

  cfg.loss.lambda = 0.1;
  const pl::SslResult lo = pl::run_processor_ssl(cfg, 7027);
  cfg.loss.lambda = 1.5;
  const pl::SslResult hi = pl::run_processor_ssl(cfg, 7027);

  CHECK(lo.mse_test <= 0.2);
  CHECK(hi.mse_test >= 2.0 * lo.mse_test);
  CHECK(hi.mse_test <= 1.1 * zero_mse);
}

TEST_CASE("feature count traces a U around the label dimension") {
  // Fresh processor block keeps the processor out of the overfit regime;
  // the n2 = 15 head is what the extra feature dimensions strain.
  pl::PipelineConfig cfg;
  cfg.n2 = 15;
  cfg.split.n0 = 200;
  cfg.extra_down1 = true;
  cfg.loss.lambda = 0.1;
  auto run_with_df = [&](int df) {
    cfg.processor = models::LinearShape{df, 100};
    double sum = 0.0;
    for (std::uint64_t s = 7028; s < 7031; ++s) {
      sum += pl::run_processor_ssl(cfg, s).mse_test;
    }
    return sum / 3.0;
  };
  const double under = run_with_df(1);   // cannot carry 5 label coords
  const double matched = run_with_df(5);
  const double over = run_with_df(12);   // head overfits 15 samples
  CHECK(matched < under);
  CHECK(matched < over);
}

TEST_CASE("undersized processor block lets training interpolate the labels") {
  // With n0 far below the input dimension the trained map can zero the
  // downstream term on its 15 samples while shedding pretext-correlated
  // directions, and the test error lands above the zero predictor.
  pl::PipelineConfig cfg;
  cfg.n2 = 30;
  cfg.split.n0 = 15;
  cfg.loss.lambda = 0.1;
  cfg.processor = models::LinearShape{5, 100};
  const pl::SslResult res = pl::run_processor_ssl(cfg, 7032);
  const auto& spec = std::get<synth::PrefixGaussianSpec>(cfg.distribution);
  CHECK(res.train_loss.downstream_term <= 1e-2);
  CHECK(res.mse_test > spec.dy * 1.0);
}

TEST_CASE("processor route reports criteria and is seed-deterministic") {
  synth::PrefixGaussianSpec spec;
  spec.dx = 20;
  spec.dz = 15;
  spec.dy = 3;
  pl::PipelineConfig cfg;
  cfg.distribution = spec;
  cfg.n1 = 1500;
  cfg.n2 = 40;
  cfg.nt = 400;
  cfg.split.n0 = 20;
  cfg.processor = models::LinearShape{3, 20};
  cfg.train.outer_steps = 50;
  const pl::SslResult a = pl::run_processor_ssl(cfg, 7029);
  const pl::SslResult b = pl::run_processor_ssl(cfg, 7029);
  CHECK(a.mse_test == b.mse_test);
  CHECK(a.criteria.c1_residual == b.criteria.c1_residual);
  CHECK(a.criteria.c2_gap == b.criteria.c2_gap);
  CHECK(a.criteria.c1_residual >= 0.0);
  CHECK(a.criteria.pretext_fit >= 0.0);
  CHECK(a.criteria.sample_size == cfg.nt);
  CHECK(a.train_loss.total ==
        a.train_loss.downstream_term -
            cfg.loss.lambda * a.train_loss.pretext_term);
}

TEST_CASE("processor route without a processor is rejected") {
  pl::PipelineConfig cfg;
  CHECK_THROWS_AS(pl::run_processor_ssl(cfg, 7030), cilab::InputError);
}

}  // TEST_SUITE
