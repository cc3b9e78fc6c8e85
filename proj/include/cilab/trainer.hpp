#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <variant>
#include <vector>

#include "cilab/errors.hpp"
#include "cilab/losses.hpp"
#include "cilab/models.hpp"
#include "cilab/synthdata.hpp"

namespace cilab {
namespace trainer {

// Heads are the best-response linear maps on top of the processor. Exact
// refit solves them in closed form every outer step; InnerGd approximates
// the refit with a few gradient steps (the heads persist across outer
// steps, so the approximation tightens as training settles).
struct ExactRefit {};
struct InnerGd {
  int steps = 20;
  double lr = 0.1;
};
using HeadMode = std::variant<ExactRefit, InnerGd>;

struct TrainConfig {
  int outer_steps = 2000;       // >= 0; 0 evaluates nothing and returns f0
  double learning_rate = 0.005;
  HeadMode head_mode = ExactRefit{};
  RidgeParam ridge = RidgeParam::relative(1e-10);
  double convergence_tol = 0.0;  // stop when |delta total| < tol; 0 = never
  std::uint64_t seed = 0;        // bookkeeping; the loop itself draws nothing
  bool force_generic_path = false;  // testing hook: skip the moment path
};

struct TraceStep {
  int step = 0;
  losses::LossBreakdown loss;  // evaluated before the parameter update
  double grad_norm = 0.0;      // Euclidean norm of the flat gradient
  double ms = 0.0;
};

struct TrainTrace {
  std::vector<TraceStep> steps;
};

// Loss escaped the guard rail (non-finite, or |total| grew past 1e6 times
// max(1, |initial total|)). Carries the trace collected so far.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& msg, TrainTrace trace)
      : Error(msg), trace_(std::move(trace)) {}
  const TrainTrace& trace() const { return trace_; }

 private:
  TrainTrace trace_;
};

struct TrainResult {
  models::Processor model;
  TrainTrace trace;
  losses::LossBreakdown final_loss;  // heads refit at the returned params
};

// Best-response heads for a fixed processor: (W1 pretext head, W2
// downstream head). InnerGd starts from zero here; inside train_processor
// the heads are warm-started across outer steps.
std::pair<Matrix, Matrix> fit_heads(const models::Processor& f,
                                    const synth::Dataset& pretext,
                                    const synth::Dataset& down1,
                                    const HeadMode& mode, RidgeParam ridge);

// Gradient descent on the processor parameters against the composite
// objective, heads refit (or inner-stepped) every iteration and held fixed
// for the gradient. Linear processors with exact refit run on cached
// second moments; anything else takes the forward/backward path. The two
// paths agree to solver precision.
TrainResult train_processor(const models::Processor& f0,
                            const synth::Dataset& pretext,
                            const synth::Dataset& down1,
                            const losses::LossSpec& spec,
                            const TrainConfig& cfg);

// Max discrepancy between the analytic envelope gradient and a central
// finite difference of the refit loss, relative to the gradient sup-norm.
// Exact-refit heads only.
double gradient_check(const models::Processor& f,
                      const synth::Dataset& pretext,
                      const synth::Dataset& down1,
                      const losses::LossSpec& spec, RidgeParam ridge,
                      double fd_step = 1e-5);

// step,total,downstream_term,pretext_term,grad_norm,ms with 12 significant
// digits.
void write_trace_csv(const TrainTrace& trace,
                     const std::filesystem::path& path);

}  // namespace trainer
}  // namespace cilab
