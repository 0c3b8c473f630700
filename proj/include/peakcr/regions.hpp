#pragma once

#include "peakcr/core.hpp"
#include "peakcr/covariance.hpp"
#include "peakcr/peaks.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace peakcr {

enum class RegionMethod { Asymptotic, MonteCarlo };
enum class RegionTarget { Mean, CohensD };

const char* to_string(RegionMethod m);
const char* to_string(RegionTarget t);

/// {theta : n (center - theta)^T shape^{-1} (center - theta) < threshold}
struct ConfidenceEllipsoid {
  Vec center;
  Mat shape;
  double threshold = 0.0;
  std::size_t n = 0;
  double alpha = 0.05;
  RegionMethod method = RegionMethod::Asymptotic;
  RegionTarget target = RegionTarget::Mean;
  std::size_t draws_discarded = 0;
  /// Monte Carlo only: the sorted accepted statistics, kept so the region can
  /// be re-thresholded at another level from the same draws.
  std::shared_ptr<const std::vector<double>> mc_statistics;

  int dim() const { return static_cast<int>(center.size()); }
};

struct McConfig {
  std::size_t draws = 100000;
  double eigen_floor = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

ConfidenceEllipsoid asymptotic_region_mean(const PeakEstimate& peak, const GradCov& gc, std::size_t n,
                                           double alpha);

/// `peak` is a peak of the Cohen's d field (value d, hessian of d).
ConfidenceEllipsoid asymptotic_region_cohensd(const PeakEstimate& peak, const GradCov& gc,
                                              const Vec& grad_sigma2, double d_value, std::size_t n,
                                              double alpha);

ConfidenceEllipsoid monte_carlo_region_mean(const PeakEstimate& peak, const GradCov& gc,
                                            const HessCov& hc, std::size_t n, double alpha,
                                            const McConfig& cfg);

/// Always throws Unsupported.
[[noreturn]] void monte_carlo_region_cohensd();

/// Keeps b when -sign * vech_inv(b) is positive definite with smallest
/// eigenvalue >= eps * lambda_min(-sign * observed_h); otherwise tries the
/// mirror 2 mean - b; nullopt when both fail.
std::optional<VechVec> truncate_hessian_draw(const VechVec& b, const VechVec& mean, const Mat& observed_h,
                                             PeakKind sign, double eps);

/// The region rebuilt at another level (same draws for Monte Carlo).
ConfidenceEllipsoid at_level(const ConfidenceEllipsoid& r, double alpha);

/// Every region at level alpha / J.
std::vector<ConfidenceEllipsoid> bonferroni_joint(const std::vector<ConfidenceEllipsoid>& regions,
                                                  double alpha);

/// Strict membership test.
bool contains(const ConfidenceEllipsoid& r, const Vec& theta);

/// n (center - theta)^T shape^{-1} (center - theta)
double mahalanobis(const ConfidenceEllipsoid& r, const Vec& theta);

/// Half-axis lengths sqrt(threshold * eig(shape) / n), ascending.
Vec half_axes(const ConfidenceEllipsoid& r);

struct RegionRequest {
  RegionTarget target = RegionTarget::Mean;
  RegionMethod method = RegionMethod::Asymptotic;
  double alpha = 0.05;
  /// One region per ball; search.balls must be non-empty.
  SearchSpec search;
  CovOptions cov;
  McConfig mc;
};

struct PeakRegions {
  std::vector<PeakEstimate> peaks;
  std::vector<ConfidenceEllipsoid> marginal;
  /// Bonferroni at alpha / J.
  std::vector<ConfidenceEllipsoid> joint;
};

/// Locates the maximum of the mean (or Cohen's d) field in every ball,
/// estimates the covariances there and builds the regions. A maximum on a
/// ball boundary is a NumericError. With pooled covariances the variance is
/// taken as stationary, so grad sigma^2 = 0 in Lambda'.
PeakRegions peak_regions(const FieldCohort& cohort, const RegionRequest& req);

/// Same, for several methods at once (req.method is ignored); the peaks and
/// covariance estimates are shared. Results follow the order of `methods`.
std::vector<PeakRegions> peak_regions(const FieldCohort& cohort, const RegionRequest& req,
                                      const std::vector<RegionMethod>& methods);

}  // namespace peakcr
