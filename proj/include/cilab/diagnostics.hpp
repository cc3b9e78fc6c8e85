#pragma once

#include <cstdint>

#include "cilab/linalg.hpp"
#include "cilab/models.hpp"
#include "cilab/synthdata.hpp"

namespace cilab {
namespace diagnostics {

// How close a processor is to the two usefulness criteria:
//   c1_residual: Frobenius norm of the partial covariance of f(x) and z
//                given y (zero = conditionally uncorrelated);
//   c2_gap:      linear-regression residual of y on f(x) minus the
//                residual of y on raw x (zero = no predictive power lost);
//   pretext_fit: residual of z on f(x), for reference.
struct CriteriaReport {
  double c1_residual = 0.0;
  double c2_gap = 0.0;
  double pretext_fit = 0.0;
  Eigen::Index sample_size = 0;
};

// Feature-matrix versions; `feat` is f applied to eval.x (or raw x for the
// identity baseline). Used by the pipeline so the identity route stays
// bit-identical to the no-processor route.
double c1_residual_features(const Matrix& feat, const synth::Dataset& eval,
                            RidgeParam ridge);
double c2_gap_features(const Matrix& feat, const synth::Dataset& eval,
                       RidgeParam ridge);
CriteriaReport criteria_report_features(const Matrix& feat,
                                        const synth::Dataset& eval,
                                        RidgeParam ridge);

// Requires eval to carry z and y and at least 10x the feature dimension in
// samples (the partial covariance is moment soup; starving it lies).
double c1_residual(const models::Processor& f, const synth::Dataset& eval,
                   RidgeParam ridge);
double c2_gap(const models::Processor& f, const synth::Dataset& eval,
              RidgeParam ridge);
CriteriaReport criteria_report(const models::Processor& f,
                               const synth::Dataset& eval, RidgeParam ridge);

// Algebraic consistency of the composite loss on sigma-linear data: the
// total must decompose through the label-map statistic
//   T = tr[(I - B^T B/sigma^2) S_zf (S_ff + ridge)^{-1} S_zf^T]
// two different ways. Returns the larger violation of:
//   (i)  total == (1 - lambda/sigma^2) L2 + lambda (L1 + L2/sigma^2)
//   (ii) L1 + L2/sigma^2 == T + E_hat|y|^2 / sigma^2 - E_hat|z|^2
// with L2 the downstream residual, L1 minus the pretext residual, and all
// terms from the same sample moments. Needs the dataset's realized label
// map, so sigma-linear data only.
double moment_identity_check(const models::Processor& f,
                             const synth::Dataset& data, double lambda,
                             RidgeParam ridge);

// Interpolation-capacity probe: can this model class drive the training
// error on n random-label samples below success_tol within the fit budget?
struct CapacityProbeSpec {
  models::ProcessorShape model;
  int n = 16;
  int trials = 20;
  int fit_budget = 50000;   // GD steps per trial (MLP classes)
  double fit_lr = 0.05;
  double success_tol = 1e-6;
};

// Fraction of trials that interpolate. Linear classes use the closed-form
// fit; MLP classes run plain gradient descent. Per-trial randomness forks
// off `rng` by trial index.
double capacity_probe(const CapacityProbeSpec& spec, RandomSource& rng);

}  // namespace diagnostics
}  // namespace cilab
