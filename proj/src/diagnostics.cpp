#include "cilab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cilab/errors.hpp"
#include "cilab/losses.hpp"

namespace cilab {
namespace diagnostics {

namespace {

const Matrix& need_z(const synth::Dataset& d, const char* where) {
  if (!d.z) throw InputError(std::string(where) + ": dataset lacks z");
  return *d.z;
}

const Matrix& need_y(const synth::Dataset& d, const char* where) {
  if (!d.y) throw InputError(std::string(where) + ": dataset lacks y");
  return *d.y;
}

void check_eval_size(const Matrix& feat, const char* where) {
  if (feat.cols() < 10 * feat.rows()) {
    throw InputError(std::string(where) + ": need >= 10x feature dim in "
                     "samples, got " + std::to_string(feat.cols()) + " for " +
                     std::to_string(feat.rows()) + " features");
  }
}

}  // namespace

double c1_residual_features(const Matrix& feat, const synth::Dataset& eval,
                            RidgeParam ridge) {
  check_eval_size(feat, "c1_residual");
  const Matrix& z = need_z(eval, "c1_residual");
  const Matrix& y = need_y(eval, "c1_residual");
  return linalg::partial_covariance(feat, z, y, ridge).norm();
}

double c2_gap_features(const Matrix& feat, const synth::Dataset& eval,
                       RidgeParam ridge) {
  const Matrix& y = need_y(eval, "c2_gap");
  const double through_f = linalg::linear_fit_residual(feat, y, ridge);
  const double through_x = linalg::linear_fit_residual(eval.x, y, ridge);
  return through_f - through_x;
}

CriteriaReport criteria_report_features(const Matrix& feat,
                                        const synth::Dataset& eval,
                                        RidgeParam ridge) {
  CriteriaReport rep;
  rep.c1_residual = c1_residual_features(feat, eval, ridge);
  rep.c2_gap = c2_gap_features(feat, eval, ridge);
  rep.pretext_fit =
      linalg::linear_fit_residual(feat, need_z(eval, "criteria_report"),
                                  ridge);
  rep.sample_size = eval.cols();
  return rep;
}

double c1_residual(const models::Processor& f, const synth::Dataset& eval,
                   RidgeParam ridge) {
  return c1_residual_features(models::forward(f, eval.x), eval, ridge);
}

double c2_gap(const models::Processor& f, const synth::Dataset& eval,
              RidgeParam ridge) {
  return c2_gap_features(models::forward(f, eval.x), eval, ridge);
}

CriteriaReport criteria_report(const models::Processor& f,
                               const synth::Dataset& eval, RidgeParam ridge) {
  return criteria_report_features(models::forward(f, eval.x), eval, ridge);
}

double moment_identity_check(const models::Processor& f,
                             const synth::Dataset& data, double lambda,
                             RidgeParam ridge) {
  if (!(lambda > 0.0)) {
    throw InputError("moment_identity_check: lambda must be > 0");
  }
  if (!data.provenance.truth) {
    throw InputError(
        "moment_identity_check: dataset has no realized label map "
        "(sigma-linear data required)");
  }
  const Matrix& z = need_z(data, "moment_identity_check");
  const Matrix& y = need_y(data, "moment_identity_check");
  const double sigma = data.provenance.truth->sigma;
  const Matrix& b = data.provenance.truth->b;
  const double n = static_cast<double>(data.cols());

  const Matrix feat = models::forward(f, data.x);
  const Matrix w1 = linalg::fit_linear_ls(feat, z, ridge);
  const Matrix w2 = linalg::fit_linear_ls(feat, y, ridge);
  const double pretext = (z - w1 * feat).squaredNorm() / n;
  const double l2 = (y - w2 * feat).squaredNorm() / n;
  const double l1 = -pretext;
  const double total = l2 - lambda * pretext;
  const double s2 = sigma * sigma;

  const double lhs_i = total;
  const double rhs_i = (1.0 - lambda / s2) * l2 + lambda * (l1 + l2 / s2);

  const double t = losses::t_statistic(f, data, b, sigma, ridge);
  const double ey = y.squaredNorm() / n;
  const double ez = z.squaredNorm() / n;
  const double lhs_ii = l1 + l2 / s2;
  const double rhs_ii = t + ey / s2 - ez;

  return std::max(std::abs(lhs_i - rhs_i), std::abs(lhs_ii - rhs_ii));
}

double capacity_probe(const CapacityProbeSpec& spec, RandomSource& rng) {
  if (spec.n < 1 || spec.trials < 1) {
    throw InputError("capacity_probe: need n >= 1 and trials >= 1");
  }
  if (spec.fit_budget < 1 || !(spec.fit_lr > 0.0) ||
      !(spec.success_tol > 0.0)) {
    throw InputError("capacity_probe: bad fit parameters");
  }
  int successes = 0;
  for (int trial = 0; trial < spec.trials; ++trial) {
    RandomSource trial_rng = rng.fork(static_cast<std::uint64_t>(trial));
    // draw order: model init, inputs, labels
    models::Processor model = models::init_processor(spec.model, trial_rng);
    const int d_in = models::input_dim(model);
    const int d_out = models::output_dim(model);
    const Matrix x = linalg::gaussian_matrix(d_in, spec.n, trial_rng);
    const Matrix y = linalg::gaussian_matrix(d_out, spec.n, trial_rng);
    double mse;
    if (std::holds_alternative<models::LinearProcessor>(model)) {
      // QR least squares: the square n = d case is almost surely solvable
      // and the solve error grows with kappa, not kappa^2 like the normal
      // equations, so near-singular draws still interpolate.
      Eigen::ColPivHouseholderQR<Matrix> qr(x.transpose());
      const Matrix wt = qr.solve(y.transpose());
      mse = (y - wt.transpose() * x).squaredNorm() /
            static_cast<double>(spec.n);
    } else {
      const double inv_n = 1.0 / static_cast<double>(spec.n);
      mse = (y - models::forward(model, x)).squaredNorm() * inv_n;
      for (int step = 0; step < spec.fit_budget && mse > spec.success_tol;
           ++step) {
        const Matrix out = models::forward(model, x);
        const Matrix upstream = (2.0 * inv_n) * (out - y);
        const Vector g = models::gradient(model, x, upstream);
        model = models::with_params(
            model, models::to_params(model) - spec.fit_lr * g);
        mse = (y - models::forward(model, x)).squaredNorm() * inv_n;
        if (!std::isfinite(mse)) break;
      }
    }
    if (std::isfinite(mse) && mse <= spec.success_tol) ++successes;
  }
  return static_cast<double>(successes) / static_cast<double>(spec.trials);
}

}  // namespace diagnostics
}  // namespace cilab
