#include "cilab/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "cilab/textio.hpp"

namespace cilab {
namespace trainer {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct Blocks {
  const Matrix* z;
  const Matrix* y;
  Eigen::Index n1;
  Eigen::Index n0;
};

Blocks check_inputs(const synth::Dataset& pretext, const synth::Dataset& down1,
                    const losses::LossSpec& spec, const char* where) {
  if (!std::holds_alternative<losses::SquaredFamily>(spec.family)) {
    throw InputError(std::string(where) + ": squared family only");
  }
  if (!(spec.lambda > 0.0)) {
    throw InputError(std::string(where) + ": lambda must be > 0");
  }
  if (!pretext.z) throw InputError(std::string(where) + ": pretext lacks z");
  if (!down1.y) throw InputError(std::string(where) + ": down1 lacks y");
  return {&*pretext.z, &*down1.y, pretext.cols(), down1.cols()};
}

// One inner-GD pass on a head W against (1/n)|T - W F|^2 + rho |W|^2,
// expressed through moments S_tf = T F^T / n and G = F F^T / n.
void inner_gd_steps(Matrix& w, const Matrix& s_tf, const Matrix& gram,
                    double rho, int steps, double lr) {
  for (int s = 0; s < steps; ++s) {
    Matrix grad = 2.0 * (w * gram - s_tf);
    grad.noalias() += (2.0 * rho) * w;
    w.noalias() -= lr * grad;
  }
}

Matrix solve_head(const Matrix& gram, const Matrix& s_tf, RidgeParam ridge,
                  const char* where) {
  const double mean_diag = gram.trace() / static_cast<double>(gram.rows());
  const double rho = ridge.resolve(mean_diag);
  Matrix reg = gram;
  reg.diagonal().array() += rho;
  Eigen::LLT<Matrix> llt(reg);
  if (llt.info() != Eigen::Success) {
    throw SingularityError(std::string(where) +
                           ": head moment matrix not positive definite");
  }
  return llt.solve(s_tf.transpose()).transpose();
}

// Heads from explicit feature matrices; warm-state heads passed in/out for
// the inner-GD mode.
void heads_from_features(const Matrix& f_pre, const Matrix& f_d1,
                         const Matrix& z, const Matrix& y,
                         const HeadMode& mode, RidgeParam ridge, Matrix& w1,
                         Matrix& w2) {
  if (std::holds_alternative<ExactRefit>(mode)) {
    // Literal delegation: exact refit is fit_linear_ls by definition.
    w1 = linalg::fit_linear_ls(f_pre, z, ridge);
    w2 = linalg::fit_linear_ls(f_d1, y, ridge);
    return;
  }
  const Matrix gram_p = linalg::second_moment(f_pre);
  const Matrix gram_d = linalg::second_moment(f_d1);
  const Matrix s_zf = linalg::cross_moment(z, f_pre);
  const Matrix s_yf = linalg::cross_moment(y, f_d1);
  const auto& gd = std::get<InnerGd>(mode);
  if (gd.steps < 1 || !(gd.lr > 0.0)) {
    throw InputError("InnerGd: need steps >= 1 and lr > 0");
  }
  const double rho_p =
      ridge.resolve(gram_p.trace() / static_cast<double>(gram_p.rows()));
  const double rho_d =
      ridge.resolve(gram_d.trace() / static_cast<double>(gram_d.rows()));
  if (w1.size() == 0) w1 = Matrix::Zero(z.rows(), f_pre.rows());
  if (w2.size() == 0) w2 = Matrix::Zero(y.rows(), f_d1.rows());
  inner_gd_steps(w1, s_zf, gram_p, rho_p, gd.steps, gd.lr);
  inner_gd_steps(w2, s_yf, gram_d, rho_d, gd.steps, gd.lr);
}

struct StepEval {
  losses::LossBreakdown loss;
  Vector grad;
};

// Forward/backward evaluation at the current processor; works for any
// model. Heads are treated as constants for the gradient (envelope form).
StepEval eval_generic(const models::Processor& f, const synth::Dataset& pretext,
                      const synth::Dataset& down1, const Blocks& blk,
                      double lambda, const HeadMode& mode, RidgeParam ridge,
                      Matrix& w1, Matrix& w2) {
  const Matrix f_pre = models::forward(f, pretext.x);
  const Matrix f_d1 = models::forward(f, down1.x);
  heads_from_features(f_pre, f_d1, *blk.z, *blk.y, mode, ridge, w1, w2);
  const Matrix resid_p = *blk.z - w1 * f_pre;
  const Matrix resid_d = *blk.y - w2 * f_d1;
  StepEval ev;
  ev.loss.pretext_term =
      resid_p.squaredNorm() / static_cast<double>(blk.n1);
  ev.loss.downstream_term =
      resid_d.squaredNorm() / static_cast<double>(blk.n0);
  ev.loss.total = ev.loss.downstream_term - lambda * ev.loss.pretext_term;
  const Matrix up_d =
      (-2.0 / static_cast<double>(blk.n0)) * (w2.transpose() * resid_d);
  const Matrix up_p =
      (2.0 * lambda / static_cast<double>(blk.n1)) * (w1.transpose() * resid_p);
  ev.grad = models::gradient(f, down1.x, up_d) +
            models::gradient(f, pretext.x, up_p);
  return ev;
}

// Cached x-side moments for the linear fast path: every outer step only
// touches dx-sized matrices instead of the n-sized sample blocks.
struct MomentCache {
  Matrix gram_px;  // E_hat[x x^T], pretext
  Matrix gram_dx;  // E_hat[x x^T], down1
  Matrix c_zx;     // E_hat[z x^T]
  Matrix c_yx;     // E_hat[y x^T]
  double ez;       // E_hat|z|^2
  double ey;       // E_hat|y|^2
};

MomentCache build_cache(const synth::Dataset& pretext,
                        const synth::Dataset& down1, const Blocks& blk) {
  MomentCache c;
  c.gram_px = linalg::second_moment(pretext.x);
  c.gram_dx = linalg::second_moment(down1.x);
  c.c_zx = linalg::cross_moment(*blk.z, pretext.x);
  c.c_yx = linalg::cross_moment(*blk.y, down1.x);
  c.ez = blk.z->squaredNorm() / static_cast<double>(blk.n1);
  c.ey = blk.y->squaredNorm() / static_cast<double>(blk.n0);
  return c;
}

StepEval eval_moments(const Matrix& a, const MomentCache& c, double lambda,
                      RidgeParam ridge) {
  const Matrix ag_p = a * c.gram_px;  // df x dx
  const Matrix ag_d = a * c.gram_dx;
  Matrix gram_p = ag_p * a.transpose();
  Matrix gram_d = ag_d * a.transpose();
  gram_p = 0.5 * (gram_p + gram_p.transpose());
  gram_d = 0.5 * (gram_d + gram_d.transpose());
  const Matrix s_zf = c.c_zx * a.transpose();  // dz x df
  const Matrix s_yf = c.c_yx * a.transpose();
  const Matrix w1 = solve_head(gram_p, s_zf, ridge, "train_processor");
  const Matrix w2 = solve_head(gram_d, s_yf, ridge, "train_processor");
  StepEval ev;
  // residual norms through moments; clamp the rounding dust at zero
  const double pre = c.ez - 2.0 * (w1.array() * s_zf.array()).sum() +
                     (w1 * gram_p * w1.transpose()).trace();
  const double down = c.ey - 2.0 * (w2.array() * s_yf.array()).sum() +
                      (w2 * gram_d * w2.transpose()).trace();
  ev.loss.pretext_term = std::max(0.0, pre);
  ev.loss.downstream_term = std::max(0.0, down);
  ev.loss.total = ev.loss.downstream_term - lambda * ev.loss.pretext_term;
  // d total / dA with W1, W2 held fixed
  Matrix grad_a = -2.0 * (w2.transpose() * (c.c_yx - w2 * ag_d));
  grad_a.noalias() += (2.0 * lambda) * (w1.transpose() * (c.c_zx - w1 * ag_p));
  ev.grad.resize(grad_a.size());
  Eigen::Index at = 0;
  for (Eigen::Index i = 0; i < grad_a.rows(); ++i) {
    for (Eigen::Index j = 0; j < grad_a.cols(); ++j) {
      ev.grad[at++] = grad_a(i, j);
    }
  }
  return ev;
}

}  // namespace

std::pair<Matrix, Matrix> fit_heads(const models::Processor& f,
                                    const synth::Dataset& pretext,
                                    const synth::Dataset& down1,
                                    const HeadMode& mode, RidgeParam ridge) {
  losses::LossSpec probe;  // squared family; lambda immaterial here
  probe.lambda = 1.0;
  const Blocks blk = check_inputs(pretext, down1, probe, "fit_heads");
  const Matrix f_pre = models::forward(f, pretext.x);
  const Matrix f_d1 = models::forward(f, down1.x);
  Matrix w1, w2;
  heads_from_features(f_pre, f_d1, *blk.z, *blk.y, mode, ridge, w1, w2);
  return {std::move(w1), std::move(w2)};
}

TrainResult train_processor(const models::Processor& f0,
                            const synth::Dataset& pretext,
                            const synth::Dataset& down1,
                            const losses::LossSpec& spec,
                            const TrainConfig& cfg) {
  const Blocks blk = check_inputs(pretext, down1, spec, "train_processor");
  if (cfg.outer_steps < 0) {
    throw InputError("train_processor: outer_steps < 0");
  }
  if (!(cfg.learning_rate > 0.0)) {
    throw InputError("train_processor: learning_rate must be > 0");
  }
  if (cfg.convergence_tol < 0.0) {
    throw InputError("train_processor: negative convergence_tol");
  }

  const auto* lin = std::get_if<models::LinearProcessor>(&f0);
  const bool moment_path = lin != nullptr &&
                           std::holds_alternative<ExactRefit>(cfg.head_mode) &&
                           !cfg.force_generic_path;
  MomentCache cache;
  if (moment_path) cache = build_cache(pretext, down1, blk);

  models::Processor f = f0;
  Matrix a;  // parameter matrix on the moment path
  if (moment_path) a = lin->a;
  Matrix w1, w2;  // warm inner-GD heads

  TrainResult out;
  out.trace.steps.reserve(static_cast<std::size_t>(cfg.outer_steps));
  double initial_total = 0.0;
  double prev_total = 0.0;

  auto evaluate = [&]() {
    return moment_path
               ? eval_moments(a, cache, spec.lambda, cfg.ridge)
               : eval_generic(f, pretext, down1, blk, spec.lambda,
                              cfg.head_mode, cfg.ridge, w1, w2);
  };
  auto guard = [&](const StepEval& ev, int step) {
    const double limit = 1e6 * std::max(1.0, std::abs(initial_total));
    if (!std::isfinite(ev.loss.total) || !ev.grad.allFinite() ||
        std::abs(ev.loss.total) > limit) {
      throw DivergenceError(
          "train_processor: diverged at step " + std::to_string(step) +
              " (total " + textio::format_real(ev.loss.total, 6) + ")",
          out.trace);
    }
  };

  for (int step = 0; step < cfg.outer_steps; ++step) {
    const auto t0 = Clock::now();
    StepEval ev = evaluate();
    if (step == 0) initial_total = ev.loss.total;
    guard(ev, step);
    out.trace.steps.push_back(
        {step, ev.loss, ev.grad.norm(), ms_since(t0)});
    const bool converged =
        step > 0 && std::abs(ev.loss.total - prev_total) < cfg.convergence_tol;
    prev_total = ev.loss.total;
    if (converged) break;
    if (moment_path) {
      Eigen::Index at = 0;
      for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
          a(i, j) -= cfg.learning_rate * ev.grad[at++];
        }
      }
    } else {
      const Vector p =
          models::to_params(f) - cfg.learning_rate * ev.grad;
      f = models::with_params(f, p);
    }
  }
  if (moment_path) f = models::LinearProcessor{a};

  // loss at the returned parameters, heads refit the same way
  {
    StepEval ev = evaluate();
    if (out.trace.steps.empty()) initial_total = ev.loss.total;
    guard(ev, cfg.outer_steps);
    out.final_loss = ev.loss;
  }
  out.model = std::move(f);
  return out;
}

double gradient_check(const models::Processor& f,
                      const synth::Dataset& pretext,
                      const synth::Dataset& down1,
                      const losses::LossSpec& spec, RidgeParam ridge,
                      double fd_step) {
  const Blocks blk = check_inputs(pretext, down1, spec, "gradient_check");
  if (!(fd_step > 0.0)) throw InputError("gradient_check: fd_step <= 0");
  Matrix w1, w2;
  const StepEval ev = eval_generic(f, pretext, down1, blk, spec.lambda,
                                   ExactRefit{}, ridge, w1, w2);
  const Vector p0 = models::to_params(f);
  Vector fd(p0.size());
  for (Eigen::Index i = 0; i < p0.size(); ++i) {
    Vector p = p0;
    p[i] = p0[i] + fd_step;
    const double up = losses::empirical_composite_loss(
                          models::with_params(f, p), pretext, down1, spec,
                          ridge)
                          .total;
    p[i] = p0[i] - fd_step;
    const double dn = losses::empirical_composite_loss(
                          models::with_params(f, p), pretext, down1, spec,
                          ridge)
                          .total;
    fd[i] = (up - dn) / (2.0 * fd_step);
  }
  const double scale = std::max(
      {ev.grad.cwiseAbs().maxCoeff(), fd.cwiseAbs().maxCoeff(), 1e-12});
  return (ev.grad - fd).cwiseAbs().maxCoeff() / scale;
}

void write_trace_csv(const TrainTrace& trace,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "step,total,downstream_term,pretext_term,grad_norm,ms\n";
  for (const auto& s : trace.steps) {
    out << s.step << ',' << textio::format_real(s.loss.total, 12) << ','
        << textio::format_real(s.loss.downstream_term, 12) << ','
        << textio::format_real(s.loss.pretext_term, 12) << ','
        << textio::format_real(s.grad_norm, 12) << ','
        << textio::format_real(s.ms, 12) << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace trainer
}  // namespace cilab
