#include "cilab/pipeline.hpp"

#include <cmath>

#include "cilab/errors.hpp"

namespace cilab {
namespace pipeline {

namespace {

// Sub-stream tags off the run seed. Keeping the block streams independent
// makes the raw-x and processor routes see bit-identical data, and lets
// the extra down1 block appear without disturbing the others.
enum StreamTag : std::uint64_t {
  kTagPretext = 1,
  kTagDownstream = 2,
  kTagTest = 3,
  kTagSplit = 4,
  kTagInit = 5,
  kTagExtra = 6,
};

struct GeneratedBlocks {
  synth::Dataset pretext;
  synth::Dataset down;
  synth::Dataset test;
  std::optional<synth::Dataset> extra;
};

void check_cfg(const PipelineConfig& cfg, const char* where) {
  if (cfg.n1 < 1 || cfg.n2 < 1 || cfg.nt < 1) {
    throw InputError(std::string(where) + ": block sizes must be positive");
  }
}

GeneratedBlocks generate_blocks(const PipelineConfig& cfg, std::uint64_t seed,
                                int n_extra) {
  GeneratedBlocks blocks;
  if (const auto* sig =
          std::get_if<synth::SigmaLinearSpec>(&cfg.distribution)) {
    // one draw, one whitening, shared label map; then column slices
    const int total = cfg.n1 + cfg.n2 + cfg.nt + n_extra;
    RandomSource rng(derive_seed(seed, kTagPretext));
    const synth::Dataset all = synth::sample_sigma_linear(*sig, total, rng);
    blocks.pretext = synth::slice_columns(all, 0, cfg.n1);
    blocks.down = synth::slice_columns(all, cfg.n1, cfg.n2);
    blocks.test = synth::slice_columns(all, cfg.n1 + cfg.n2, cfg.nt);
    if (n_extra > 0) {
      blocks.extra =
          synth::slice_columns(all, cfg.n1 + cfg.n2 + cfg.nt, n_extra);
    }
    return blocks;
  }
  const auto& pre = std::get<synth::PrefixGaussianSpec>(cfg.distribution);
  RandomSource r1(derive_seed(seed, kTagPretext));
  RandomSource r2(derive_seed(seed, kTagDownstream));
  RandomSource r3(derive_seed(seed, kTagTest));
  blocks.pretext = synth::sample_prefix_gaussian(pre, cfg.n1, r1);
  blocks.down = synth::sample_prefix_gaussian(pre, cfg.n2, r2);
  blocks.test = synth::sample_prefix_gaussian(pre, cfg.nt, r3);
  if (n_extra > 0) {
    RandomSource r6(derive_seed(seed, kTagExtra));
    blocks.extra = synth::sample_prefix_gaussian(pre, n_extra, r6);
  }
  return blocks;
}

// Shared tail of both routes: representation off the pretext features,
// head off the downstream features, MSE and criteria on the test block.
// The routes only differ in what `feat` is, so an identity processor
// reproduces the raw-x route bit for bit.
SslResult two_step_fit(const Matrix& feat_pre, const Matrix& feat_down,
                       const Matrix& feat_test, const GeneratedBlocks& blocks,
                       const Matrix& y_down, RidgeParam ridge) {
  SslResult res;
  if (!blocks.pretext.z) {
    throw InputError("run ssl: pretext block lacks z");
  }
  res.psi = train_representation(feat_pre, *blocks.pretext.z, ridge);
  res.w_down = train_downstream_head(res.psi, feat_down, y_down, ridge);
  if (!blocks.test.y) throw InputError("run ssl: test block lacks y");
  const Matrix pred = res.w_down * (res.psi * feat_test);
  res.mse_test = (*blocks.test.y - pred).squaredNorm() /
                 static_cast<double>(blocks.test.cols());
  res.criteria =
      diagnostics::criteria_report_features(feat_test, blocks.test, ridge);
  return res;
}

}  // namespace

Matrix train_representation(const Matrix& features, const Matrix& z,
                            RidgeParam ridge) {
  return linalg::fit_linear_ls(features, z, ridge);
}

Matrix train_downstream_head(const Matrix& psi, const Matrix& features,
                             const Matrix& y, RidgeParam ridge) {
  if (psi.cols() != features.rows()) {
    throw InputError("train_downstream_head: psi expects " +
                     std::to_string(psi.cols()) + " features, got " +
                     std::to_string(features.rows()));
  }
  return linalg::fit_linear_ls(psi * features, y, ridge);
}

double evaluate_mse(const Matrix& psi, const Matrix& w_down,
                    const std::optional<models::Processor>& f,
                    const synth::Dataset& test) {
  if (!test.y) throw InputError("evaluate_mse: test block lacks y");
  const Matrix feat = f ? models::forward(*f, test.x) : test.x;
  const Matrix pred = w_down * (psi * feat);
  return (*test.y - pred).squaredNorm() / static_cast<double>(test.cols());
}

SslResult run_standard_ssl(const PipelineConfig& cfg, std::uint64_t seed) {
  check_cfg(cfg, "run_standard_ssl");
  const GeneratedBlocks blocks = generate_blocks(cfg, seed, 0);
  if (!blocks.down.y) throw InputError("run_standard_ssl: down lacks y");
  SslResult res = two_step_fit(blocks.pretext.x, blocks.down.x, blocks.test.x,
                               blocks, *blocks.down.y, cfg.train.ridge);
  res.n1 = cfg.n1;
  res.n2 = cfg.n2;
  res.nt = cfg.nt;
  return res;
}

SslResult run_processor_ssl(const PipelineConfig& cfg, std::uint64_t seed) {
  check_cfg(cfg, "run_processor_ssl");
  if (!cfg.processor && !cfg.initial_processor) {
    throw InputError(
        "run_processor_ssl: no processor shape or initial processor given");
  }
  int n0;
  if (cfg.extra_down1) {
    // fresh block: n0 need not leave room inside the downstream sample
    if (cfg.split.n0 > 0) {
      n0 = cfg.split.n0;
    } else {
      if (!(cfg.split.alpha > 0.0 && cfg.split.alpha < 1.0)) {
        throw InputError("run_processor_ssl: alpha must be in (0,1)");
      }
      n0 = static_cast<int>(
          std::lround(cfg.split.alpha * static_cast<double>(cfg.n2)));
    }
    if (n0 < 1) throw InputError("run_processor_ssl: resolved n0 < 1");
  } else {
    n0 = synth::resolved_n0(cfg.split, cfg.n2);
  }
  const GeneratedBlocks blocks =
      generate_blocks(cfg, seed, cfg.extra_down1 ? n0 : 0);

  synth::Dataset down1, down2;
  if (cfg.extra_down1) {
    down1 = *blocks.extra;
    down2 = blocks.down;  // footnote variant: nothing is held out
  } else {
    RandomSource split_rng(derive_seed(seed, kTagSplit));
    std::tie(down1, down2) =
        synth::split_downstream(blocks.down, cfg.split, split_rng);
  }

  models::Processor f0;
  if (cfg.initial_processor) {
    f0 = *cfg.initial_processor;
  } else {
    RandomSource init_rng(derive_seed(seed, kTagInit));
    f0 = models::init_processor(*cfg.processor, init_rng, cfg.init_scale);
  }
  const trainer::TrainResult trained =
      trainer::train_processor(f0, blocks.pretext, down1, cfg.loss, cfg.train);

  if (!down2.y) throw InputError("run_processor_ssl: down2 lacks y");
  const Matrix feat_pre = models::forward(trained.model, blocks.pretext.x);
  const Matrix feat_down = models::forward(trained.model, down2.x);
  const Matrix feat_test = models::forward(trained.model, blocks.test.x);
  SslResult res = two_step_fit(feat_pre, feat_down, feat_test, blocks,
                               *down2.y, cfg.train.ridge);
  res.train_loss = trained.final_loss;
  res.n1 = cfg.n1;
  res.n0 = n0;
  res.n2 = cfg.n2;
  res.nt = cfg.nt;
  return res;
}

}  // namespace pipeline
}  // namespace cilab
