#pragma once

#include <Eigen/Dense>

#include "cilab/errors.hpp"
#include "cilab/rng.hpp"

namespace cilab {

// Column convention throughout: a data block is a (dim x n) matrix, one
// sample per column.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Tikhonov regularizer for least-squares and moment inversions.
// Relative mode scales `value` by the mean diagonal of the Gram it is
// applied to, so one knob works across feature scales; absolute mode is
// a plain additive coefficient (and lets callers pin an exact 0).
struct RidgeParam {
  enum class Mode { kRelative, kAbsolute };

  double value = 1e-10;
  Mode mode = Mode::kRelative;

  static RidgeParam absolute(double v) {
    return RidgeParam{v, Mode::kAbsolute};
  }
  static RidgeParam relative(double v) {
    return RidgeParam{v, Mode::kRelative};
  }
  static RidgeParam zero() { return absolute(0.0); }

  // Effective additive coefficient for a Gram matrix with the given
  // mean diagonal.
  double resolve(double mean_gram_diag) const {
    if (value < 0.0) throw InputError("RidgeParam: negative ridge");
    return mode == Mode::kAbsolute ? value : value * mean_gram_diag;
  }
};

namespace linalg {

// Empirical second moment E_hat[f g^T] = F G^T / n.
Matrix cross_moment(const Matrix& f, const Matrix& g);

// Empirical second moment E_hat[f f^T], symmetrized.
Matrix second_moment(const Matrix& f);

// Ridge least squares: W minimizing |T - W F|_F^2 / n + ridge |W|_F^2,
// i.e. W = T F^T (F F^T + n*ridge I)^{-1}, solved through a Cholesky
// factorization of the k x k moment matrix. Throws SingularityError when
// the factorization fails and the resolved ridge is zero.
Matrix fit_linear_ls(const Matrix& features, const Matrix& targets,
                     RidgeParam ridge);

// Mean squared residual of the above fit: |T - W F|_F^2 / n.
double linear_fit_residual(const Matrix& features, const Matrix& targets,
                           RidgeParam ridge);

// Partial covariance of f and z given y:
//   E_hat[f z^T] - E_hat[f y^T] (E_hat[y y^T] + ridge I)^{-1} E_hat[y z^T].
// Zero exactly when f = y (the conditioning absorbs everything).
Matrix partial_covariance(const Matrix& f, const Matrix& z, const Matrix& y,
                          RidgeParam ridge);

// Haar-distributed orthogonal d x d matrix: QR of a Gaussian matrix with
// the sign ambiguity fixed by the diagonal of R.
Matrix random_orthogonal(int dim, RandomSource& rng);

// Gaussian iid N(0,1) matrix, filled column by column.
Matrix gaussian_matrix(int rows, int cols, RandomSource& rng);

}  // namespace linalg
}  // namespace cilab
