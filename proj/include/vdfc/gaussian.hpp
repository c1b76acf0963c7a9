#pragma once

#include <Eigen/Cholesky>

#include "vdfc/types.hpp"

namespace vdfc {

inline double log_det_from_llt(const Eigen::LLT<Mat>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

/// Accepts an LLT as usable when the factorization succeeded with strictly
/// positive, finite pivots.
inline bool llt_ok(const Eigen::LLT<Mat>& llt) {
  if (llt.info() != Eigen::Success) return false;
  const auto diag = llt.matrixLLT().diagonal().array();
  return (diag > 0.0).all() && diag.isFinite().all();
}

/// log N(x | mean, Sigma) with Sigma given through its Cholesky factor.
template <typename DerivedX, typename DerivedM>
double log_gaussian(const Eigen::MatrixBase<DerivedX>& x,
                    const Eigen::MatrixBase<DerivedM>& mean,
                    const Eigen::LLT<Mat>& llt) {
  const Index d = x.size();
  const Vec z = llt.matrixL().solve((x - mean).eval());
  return -0.5 * (d * std::log(2.0 * M_PI) + log_det_from_llt(llt) + z.squaredNorm());
}

/// log N(x_n | mean, Sigma) for every row x_n of `points` (N x d), in one
/// triangular solve. Returns an N-vector.
template <typename DerivedP, typename DerivedM>
Vec log_gaussian_rows(const Eigen::MatrixBase<DerivedP>& points,
                      const Eigen::MatrixBase<DerivedM>& mean,
                      const Eigen::LLT<Mat>& llt) {
  const Index d = points.cols();
  Mat centered = (points.rowwise() - mean.transpose()).transpose();  // d x N
  llt.matrixL().solveInPlace(centered);
  const double c = d * std::log(2.0 * M_PI) + log_det_from_llt(llt);
  return (-0.5 * (centered.colwise().squaredNorm().array() + c)).transpose();
}

/// Mirrors the upper triangle onto the lower one, making the matrix exactly
/// symmetric.
inline void symmetrize_from_upper(Mat& m) {
  for (Index i = 1; i < m.rows(); ++i)
    for (Index j = 0; j < i; ++j) m(i, j) = m(j, i);
}

namespace detail {

/// Compensated (Kahan) accumulator for long reductions whose final value is
/// compared at absolute tolerances far below the summand magnitudes.
class KahanSum {
 public:
  void add(double x) {
    const double y = x - c_;
    const double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

}  // namespace detail
}  // namespace vdfc
