#pragma once

#include "peakcr/core.hpp"
#include "peakcr/sample_fields.hpp"

#include <vector>

namespace peakcr {

enum class CovMode { Pointwise, StationaryPooled };

const char* to_string(CovMode m);

/// Moments of the component gradient at a point (or averaged over space).
struct GradCov {
  Mat lambda;          // cov of grad Y
  Vec gamma;           // E[(Y - mu) grad Y], as a column
  double sigma2 = 0;   // var Y
  CovMode mode = CovMode::Pointwise;
};

/// Covariance of vech(hess Y).
struct HessCov {
  VechMat omega;
  CovMode mode = CovMode::Pointwise;
};

struct CovOptions {
  CovMode mode = CovMode::Pointwise;
  /// Spacing of the pooling grid (domain units) for StationaryPooled.
  double pool_step = 1.0;
  /// Throw SingularCovariance when cond(lambda) > 1e12.
  bool check_conditioning = true;
};

/// Lower triangle stacked column by column: [[a,b],[b,c]] -> (a,b,c).
VechVec vech(const Mat& a);
Mat vech_inv(const VechVec& v);

/// Points of the pooling grid: a regular grid with spacing `step` over the box.
std::vector<Vec> pooling_grid(const Box& domain, double step);

GradCov estimate_grad_cov(const FieldCohort& cohort, const Vec& s, const CovOptions& opts = {});
HessCov estimate_hess_cov(const FieldCohort& cohort, const Vec& s, const CovOptions& opts = {});

/// Both at once, sharing the subject jets.
std::pair<GradCov, HessCov> estimate_covariances(const FieldCohort& cohort, const Vec& s,
                                                 const CovOptions& opts = {});

/// Covariance of grad(Y/sigma), from the moments of Y and grad sigma^2.
Mat lambda_prime(const GradCov& gc, const Vec& grad_sigma2);

/// Symmetrizes and clips tiny negative eigenvalues (>= -1e-10 trace) to zero;
/// larger violations are a NumericError.
Mat repair_psd(const Mat& a);
VechMat repair_psd(const VechMat& a);

/// Throws SingularCovariance when a nonzero matrix has condition number > limit.
void check_conditioning(const Mat& a, double limit = 1e12);

}  // namespace peakcr
