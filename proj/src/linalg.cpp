#include "cilab/linalg.hpp"

#include <string>

namespace cilab {
namespace linalg {

namespace {

void check_sample_block(const Matrix& m, const char* name) {
  if (m.rows() < 1 || m.cols() < 1) {
    throw InputError(std::string(name) + ": empty block");
  }
}

void check_same_samples(const Matrix& a, const Matrix& b, const char* where) {
  if (a.cols() != b.cols()) {
    throw InputError(std::string(where) + ": sample counts differ (" +
                     std::to_string(a.cols()) + " vs " +
                     std::to_string(b.cols()) + ")");
  }
}

// Cholesky solve of (M + ridge I) X = B with M symmetric PSD.
// `mean_diag` feeds the relative-ridge resolution.
Matrix ridged_solve(const Matrix& m, const Matrix& b, RidgeParam ridge,
                    const char* where) {
  const double mean_diag = m.trace() / static_cast<double>(m.rows());
  const double rho = ridge.resolve(mean_diag);
  Matrix reg = m;
  reg.diagonal().array() += rho;
  Eigen::LLT<Matrix> llt(reg);
  // With an exact zero ridge a semidefinite matrix can still factor when the
  // zero pivot rounds slightly positive; rcond catches that case.
  if (llt.info() != Eigen::Success ||
      (rho == 0.0 && llt.rcond() < 1e-12)) {
    throw SingularityError(std::string(where) +
                           ": moment matrix not positive definite (ridge " +
                           std::to_string(rho) + ")");
  }
  return llt.solve(b);
}

}  // namespace

Matrix cross_moment(const Matrix& f, const Matrix& g) {
  check_sample_block(f, "cross_moment: f");
  check_sample_block(g, "cross_moment: g");
  check_same_samples(f, g, "cross_moment");
  return (f * g.transpose()) / static_cast<double>(f.cols());
}

Matrix second_moment(const Matrix& f) {
  Matrix m = cross_moment(f, f);
  // kill the asymmetric rounding dust so eigen solvers see an exactly
  // symmetric matrix
  return 0.5 * (m + m.transpose());
}

Matrix fit_linear_ls(const Matrix& features, const Matrix& targets,
                     RidgeParam ridge) {
  check_sample_block(features, "fit_linear_ls: features");
  check_sample_block(targets, "fit_linear_ls: targets");
  check_same_samples(features, targets, "fit_linear_ls");
  const Matrix gram = second_moment(features);
  const Matrix rhs = cross_moment(features, targets);  // k x m
  // solve (G + rho I) X = E[f t^T], then W = X^T
  return ridged_solve(gram, rhs, ridge, "fit_linear_ls").transpose();
}

double linear_fit_residual(const Matrix& features, const Matrix& targets,
                           RidgeParam ridge) {
  const Matrix w = fit_linear_ls(features, targets, ridge);
  return (targets - w * features).squaredNorm() /
         static_cast<double>(targets.cols());
}

Matrix partial_covariance(const Matrix& f, const Matrix& z, const Matrix& y,
                          RidgeParam ridge) {
  check_sample_block(f, "partial_covariance: f");
  check_sample_block(z, "partial_covariance: z");
  check_sample_block(y, "partial_covariance: y");
  check_same_samples(f, z, "partial_covariance");
  check_same_samples(f, y, "partial_covariance");
  const Matrix s_fz = cross_moment(f, z);
  const Matrix s_fy = cross_moment(f, y);
  const Matrix s_yy = second_moment(y);
  const Matrix s_yz = cross_moment(y, z);
  const Matrix solved = ridged_solve(s_yy, s_yz, ridge, "partial_covariance");
  return s_fz - s_fy * solved;
}

Matrix gaussian_matrix(int rows, int cols, RandomSource& rng) {
  if (rows < 1 || cols < 1) {
    throw InputError("gaussian_matrix: nonpositive shape");
  }
  Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) {
      m(i, j) = rng.gaussian();
    }
  }
  return m;
}

Matrix random_orthogonal(int dim, RandomSource& rng) {
  if (dim < 1) throw InputError("random_orthogonal: dim < 1");
  const Matrix g = gaussian_matrix(dim, dim, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  // Fix the column signs by diag(R) > 0; this makes the distribution Haar
  // instead of QR-implementation dependent.
  for (int j = 0; j < dim; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

}  // namespace linalg
}  // namespace cilab
