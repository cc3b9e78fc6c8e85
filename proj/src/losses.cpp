#include "cilab/losses.hpp"

#include <cmath>

#include "cilab/errors.hpp"
#include "cilab/models.hpp"

namespace cilab {
namespace losses {

namespace {

constexpr double kHeadGradTol = 1e-8;
constexpr int kHeadMaxIters = 200000;

void check_lambda(const LossSpec& spec) {
  if (!(spec.lambda > 0.0)) throw InputError("LossSpec: lambda must be > 0");
}

const Matrix& need_z(const synth::Dataset& d, const char* where) {
  if (!d.z) throw InputError(std::string(where) + ": dataset lacks z");
  return *d.z;
}

const Matrix& need_y(const synth::Dataset& d, const char* where) {
  if (!d.y) throw InputError(std::string(where) + ": dataset lacks y");
  return *d.y;
}

double transform(TransformTag g, double r) {
  switch (g) {
    case TransformTag::kIdentity:
      return r;
    case TransformTag::kSquare:
      return r * r;
    case TransformTag::kLog1p:
      return std::log1p(r);
  }
  return r;
}

// d transform / d r
double transform_deriv(TransformTag g, double r) {
  switch (g) {
    case TransformTag::kIdentity:
      return 1.0;
    case TransformTag::kSquare:
      return 2.0 * r;
    case TransformTag::kLog1p:
      return 1.0 / (1.0 + r);
  }
  return 1.0;
}

// mean of g(|t_i - W f_i|) over columns
double transformed_mean(TransformTag g, const Matrix& resid) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < resid.cols(); ++j) {
    acc += transform(g, resid.col(j).norm());
  }
  return acc / static_cast<double>(resid.cols());
}

struct HeadFit {
  Matrix w;
  double term;  // mean of g(rho(t, W f))
};

// Square transform: ridge least squares, closed form. Other transforms:
// full-batch gradient descent from W = 0 with step halving on objective
// increase, stopped at sup-norm gradient tolerance. The objective adds the
// same ridge quadratic the closed form minimizes, so the two routes agree
// in the square case.
HeadFit fit_general_head(TransformTag g, const Matrix& features,
                         const Matrix& targets, RidgeParam ridge) {
  const Eigen::Index n = features.cols();
  if (g == TransformTag::kSquare) {
    Matrix w = linalg::fit_linear_ls(features, targets, ridge);
    return {w, transformed_mean(g, targets - w * features)};
  }
  const Matrix gram = linalg::second_moment(features);
  const double mean_diag = gram.trace() / static_cast<double>(gram.rows());
  const double rho = ridge.resolve(mean_diag);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const double lmax = eig.eigenvalues().maxCoeff();
  double lr = 1.0 / (lmax + rho + 1e-12);

  Matrix w = Matrix::Zero(targets.rows(), features.rows());
  auto objective = [&](const Matrix& wm) {
    return transformed_mean(g, targets - wm * features) +
           rho * wm.squaredNorm();
  };
  double obj = objective(w);
  for (int it = 0; it < kHeadMaxIters; ++it) {
    const Matrix resid = targets - w * features;
    Matrix grad = Matrix::Zero(w.rows(), w.cols());
    for (Eigen::Index j = 0; j < n; ++j) {
      const double r = resid.col(j).norm();
      if (r <= 0.0) continue;  // subgradient 0 at the kink
      grad.noalias() -=
          (transform_deriv(g, r) / r) * resid.col(j) *
          features.col(j).transpose();
    }
    grad /= static_cast<double>(n);
    grad += 2.0 * rho * w;
    if (grad.cwiseAbs().maxCoeff() <= kHeadGradTol) break;
    const Matrix w_next = w - lr * grad;
    const double obj_next = objective(w_next);
    if (obj_next > obj) {
      lr *= 0.5;  // overshoot; retry smaller from the same point
      continue;
    }
    w = w_next;
    obj = obj_next;
  }
  return {w, transformed_mean(g, targets - w * features)};
}

LossBreakdown composite_squared(const models::Processor& f,
                                const synth::Dataset& pretext,
                                const synth::Dataset& down1,
                                const LossSpec& spec, RidgeParam ridge,
                                const char* where) {
  check_lambda(spec);
  if (!std::holds_alternative<SquaredFamily>(spec.family)) {
    throw InputError(std::string(where) +
                     ": squared family only; use general_loss_eval");
  }
  const Matrix& z = need_z(pretext, where);
  const Matrix& y = need_y(down1, where);
  const Matrix f_pre = models::forward(f, pretext.x);
  const Matrix f_d1 = models::forward(f, down1.x);
  LossBreakdown out;
  out.pretext_term =
      (z - linalg::fit_linear_ls(f_pre, z, ridge) * f_pre).squaredNorm() /
      static_cast<double>(z.cols());
  out.downstream_term =
      (y - linalg::fit_linear_ls(f_d1, y, ridge) * f_d1).squaredNorm() /
      static_cast<double>(y.cols());
  out.total = out.downstream_term - spec.lambda * out.pretext_term;
  return out;
}

}  // namespace

LossBreakdown empirical_composite_loss(const models::Processor& f,
                                       const synth::Dataset& pretext,
                                       const synth::Dataset& down1,
                                       const LossSpec& spec,
                                       RidgeParam ridge) {
  return composite_squared(f, pretext, down1, spec, ridge,
                           "empirical_composite_loss");
}

LossBreakdown loss_infinite_pretext(const models::Processor& f,
                                    const synth::Dataset& pretext,
                                    const synth::Dataset& down1,
                                    const LossSpec& spec, RidgeParam ridge) {
  if (pretext.cols() < 20000) {
    throw InputError(
        "loss_infinite_pretext: pretext surrogate needs >= 20000 samples, "
        "got " +
        std::to_string(pretext.cols()));
  }
  return composite_squared(f, pretext, down1, spec, ridge,
                           "loss_infinite_pretext");
}

LossBreakdown general_loss_eval(const models::Processor& f,
                                const synth::Dataset& data,
                                const LossSpec& spec, RidgeParam ridge) {
  check_lambda(spec);
  const auto* fam = std::get_if<GeneralFamily>(&spec.family);
  if (!fam) {
    throw InputError(
        "general_loss_eval: general family only; use "
        "empirical_composite_loss for the squared family");
  }
  const Matrix& z = need_z(data, "general_loss_eval");
  const Matrix& y = need_y(data, "general_loss_eval");
  const Matrix feat = models::forward(f, data.x);
  LossBreakdown out;
  out.pretext_term = fit_general_head(fam->g1, feat, z, ridge).term;
  out.downstream_term = fit_general_head(fam->g2, feat, y, ridge).term;
  out.total = out.downstream_term - spec.lambda * out.pretext_term;
  return out;
}

double t_statistic(const models::Processor& f, const synth::Dataset& data,
                   const Matrix& b, double sigma, RidgeParam ridge) {
  if (!(sigma > 0.0)) throw InputError("t_statistic: sigma <= 0");
  const Matrix& z = need_z(data, "t_statistic");
  if (b.cols() != z.rows()) {
    throw InputError("t_statistic: B has " + std::to_string(b.cols()) +
                     " columns, z has " + std::to_string(z.rows()) + " rows");
  }
  const Matrix feat = models::forward(f, data.x);
  const Matrix s_zf = linalg::cross_moment(z, feat);
  const Matrix gram = linalg::second_moment(feat);
  const double mean_diag = gram.trace() / static_cast<double>(gram.rows());
  const double rho = ridge.resolve(mean_diag);
  Matrix reg = gram;
  reg.diagonal().array() += rho;
  Eigen::LLT<Matrix> llt(reg);
  if (llt.info() != Eigen::Success) {
    throw SingularityError("t_statistic: feature moment not positive "
                           "definite");
  }
  const Matrix solved = llt.solve(s_zf.transpose());  // k x dz
  const Matrix c = s_zf * solved;                     // dz x dz, PSD
  Matrix m = Matrix::Identity(z.rows(), z.rows());
  m.noalias() -= (b.transpose() * b) / (sigma * sigma);
  return (m * c).trace();
}

TransformTag parse_transform(const std::string& name) {
  if (name == "identity") return TransformTag::kIdentity;
  if (name == "square") return TransformTag::kSquare;
  if (name == "log1p") return TransformTag::kLog1p;
  throw ConfigError("unknown transform '" + name + "'");
}

const char* transform_name(TransformTag t) {
  switch (t) {
    case TransformTag::kIdentity:
      return "identity";
    case TransformTag::kSquare:
      return "square";
    case TransformTag::kLog1p:
      return "log1p";
  }
  return "?";
}

DistanceTag parse_distance(const std::string& name) {
  if (name == "euclidean") return DistanceTag::kEuclidean;
  throw ConfigError("unknown distance '" + name + "'");
}

const char* distance_name(DistanceTag) { return "euclidean"; }

}  // namespace losses
}  // namespace cilab
