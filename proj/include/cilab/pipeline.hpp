#pragma once

#include <cstdint>
#include <optional>

#include "cilab/diagnostics.hpp"
#include "cilab/losses.hpp"
#include "cilab/models.hpp"
#include "cilab/synthdata.hpp"
#include "cilab/trainer.hpp"

namespace cilab {
namespace pipeline {

// One experiment instance: data sizes, distribution, objective, training
// budget and (optionally) the processor family to train in front of the
// two-step fit.
struct PipelineConfig {
  synth::DistributionSpec distribution;
  int n1 = 20000;  // pretext sample
  int n2 = 30;     // downstream sample
  int nt = 2000;   // held-out test sample
  synth::SplitConfig split;              // down1/down2 sizes
  losses::LossSpec loss;                 // squared family for training
  trainer::TrainConfig train;
  std::optional<models::ProcessorShape> processor;  // absent = raw-x route
  double init_scale = 1.0;
  // Explicit starting point instead of the random init (testing and the
  // identity-limit route).
  std::optional<models::Processor> initial_processor;
  // Draw a fresh down1 block of resolved_n0 samples instead of splitting
  // down2 out of the downstream block; down2 then keeps all n2 samples.
  bool extra_down1 = false;
};

struct SslResult {
  Matrix psi;     // dz x k representation map
  Matrix w_down;  // dy x dz downstream head
  double mse_test = 0.0;
  diagnostics::CriteriaReport criteria;  // on the test block
  losses::LossBreakdown train_loss;      // processor route; zeros otherwise
  int n1 = 0;
  int n0 = 0;  // 0 on the raw-x route
  int n2 = 0;
  int nt = 0;
};

// Step-1 representation: least squares from features to the pretext
// target.
Matrix train_representation(const Matrix& features, const Matrix& z,
                            RidgeParam ridge);

// Step-2 head: least squares from psi(features) to the labels.
Matrix train_downstream_head(const Matrix& psi, const Matrix& features,
                             const Matrix& y, RidgeParam ridge);

// Mean squared test error of y_hat = w * psi * feat(x).
double evaluate_mse(const Matrix& psi, const Matrix& w_down,
                    const std::optional<models::Processor>& f,
                    const synth::Dataset& test);

// Two-step fit on raw x. Sub-streams (pretext / downstream / test blocks)
// derive from `seed`, so both routes see identical data for equal configs.
SslResult run_standard_ssl(const PipelineConfig& cfg, std::uint64_t seed);

// Processor route: train f on (pretext, down1), then the two-step fit on
// f(x) with the representation from the pretext block and the head from
// down2.
SslResult run_processor_ssl(const PipelineConfig& cfg, std::uint64_t seed);

}  // namespace pipeline
}  // namespace cilab
