#pragma once

#include <string>
#include <variant>

#include "cilab/linalg.hpp"
#include "cilab/models.hpp"
#include "cilab/synthdata.hpp"

namespace cilab {
namespace losses {

// Transforms applied to a residual distance; all strictly increasing on
// [0, inf), which is what keeps the composite objective's ordering
// arguments valid.
enum class TransformTag { kIdentity, kSquare, kLog1p };

enum class DistanceTag { kEuclidean };

// Plain squared-Euclidean composite: both terms are mean squared residuals.
struct SquaredFamily {};

// g2(rho2(y, W f)) averaged, minus lambda times the same for the pretext
// side with g1/rho1.
struct GeneralFamily {
  TransformTag g1 = TransformTag::kSquare;
  TransformTag g2 = TransformTag::kSquare;
  DistanceTag rho1 = DistanceTag::kEuclidean;
  DistanceTag rho2 = DistanceTag::kEuclidean;
};

struct LossSpec {
  double lambda = 0.1;  // > 0
  std::variant<SquaredFamily, GeneralFamily> family = SquaredFamily{};
};

// total = downstream_term - lambda * pretext_term, with both terms the
// best-response (refit head) values.
struct LossBreakdown {
  double total = 0.0;
  double downstream_term = 0.0;
  double pretext_term = 0.0;
};

// Both heads refit by ridge least squares on the given samples:
//   downstream_term = |Y - W2 f(X_down)|^2 / n0  (best W2)
//   pretext_term    = |Z - W1 f(X_pre)|^2 / n1   (best W1)
// Squared family only.
LossBreakdown empirical_composite_loss(const models::Processor& f,
                                       const synth::Dataset& pretext,
                                       const synth::Dataset& down1,
                                       const LossSpec& spec, RidgeParam ridge);

// Same contract, but the pretext block must be large enough to stand in
// for the population term (>= 20000 samples).
LossBreakdown loss_infinite_pretext(const models::Processor& f,
                                    const synth::Dataset& pretext,
                                    const synth::Dataset& down1,
                                    const LossSpec& spec, RidgeParam ridge);

// General-family evaluation on a single block carrying both z and y.
// Square transforms use the closed-form head; identity / log1p heads are
// fit by full-batch gradient descent to sup-norm gradient tolerance 1e-8.
// Evaluation only: nothing here trains the processor.
LossBreakdown general_loss_eval(const models::Processor& f,
                                const synth::Dataset& data,
                                const LossSpec& spec, RidgeParam ridge);

// T = tr[(I - B^T B / sigma^2) S_zf (S_ff + ridge)^{-1} S_zf^T] with all
// moments empirical on `data`. Nonnegative up to rounding because the
// bracket is an orthogonal projector scaled by sigma^2.
double t_statistic(const models::Processor& f, const synth::Dataset& data,
                   const Matrix& b, double sigma, RidgeParam ridge);

TransformTag parse_transform(const std::string& name);
const char* transform_name(TransformTag t);
DistanceTag parse_distance(const std::string& name);
const char* distance_name(DistanceTag d);

}  // namespace losses
}  // namespace cilab
