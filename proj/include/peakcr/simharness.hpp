#pragma once

#include "peakcr/covariance.hpp"
#include "peakcr/noisegen.hpp"
#include "peakcr/peaks.hpp"
#include "peakcr/regions.hpp"
#include "peakcr/rng.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace peakcr {

/// Runs f(i) for i in [0, count) on up to `threads` threads (0: hardware
/// concurrency). The first exception thrown is rethrown after all workers stop.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& f);

/// Threads from PEAKCR_THREADS, or 0 when unset.
int default_threads();

struct ExperimentConfig {
  SignalSpec signal;
  NoiseSpec noise;
  std::vector<std::size_t> n_list{20, 40, 60, 80, 100, 120, 140, 160, 180, 200};
  std::size_t nsim = 1000;
  double alpha = 0.05;
  std::vector<RegionMethod> methods{RegionMethod::Asymptotic, RegionMethod::MonteCarlo};
  RegionTarget target = RegionTarget::Mean;
  /// Search balls, one per true maximum in signal order. Empty: balls at the
  /// signal maxima with radius 0.95 times half the smallest peak distance.
  SearchSpec search;
  CovOptions cov{CovMode::StationaryPooled, 1.0, true};
  McConfig mc;
  std::uint64_t master_seed = 0;
  int threads = 0;
  /// Replicates that fail numerically (degenerate peak, singular covariance,
  /// truncation dominance) are counted; above this fraction the run fails.
  double max_failure_rate = 0.05;
  /// Replace every region threshold (testing hook).
  std::optional<double> threshold_override;
  /// Also tally the identifiability event in coverage runs (needs balls
  /// around every critical point, see ball_kinds).
  bool track_identifiability = false;
  /// Expected critical point kind per ball for identifiability; empty means
  /// every ball holds a maximum.
  std::vector<PeakKind> ball_kinds;

  void validate() const;
};

/// Balls at the signal maxima, radius 0.95 * half the smallest distance between them
/// (also capped by the distance to the domain edge).
std::vector<Ball> default_balls(const Signal& signal);

struct CoverageCell {
  std::size_t n = 0;
  RegionMethod method = RegionMethod::Asymptotic;
  int peak = 0;
  std::size_t hits = 0;
  std::size_t trials = 0;
  double coverage = 0.0;
  double band = 0.0;
};

struct CoverageSummary {
  std::size_t n = 0;
  RegionMethod method = RegionMethod::Asymptotic;
  double average_coverage = 0.0;
  std::size_t joint_hits = 0;
  std::size_t trials = 0;
  double joint_coverage = 0.0;
  double band = 0.0;
  double joint_band = 0.0;
  std::size_t failures = 0;
  /// NaN unless identifiability was tracked.
  double identifiability_rate = 0.0;
};

struct CoverageReport {
  std::vector<CoverageCell> cells;
  std::vector<CoverageSummary> summaries;
  std::size_t nsim = 0;
  double alpha = 0.05;
  RegionTarget target = RegionTarget::Mean;
  std::uint64_t seed = 0;

  const CoverageSummary& summary(std::size_t n, RegionMethod m) const;
  /// One row per (n, method, peak).
  std::string to_csv() const;
  nlohmann::json to_json() const;
  /// Coverage-vs-N series: series,n,coverage,lower,upper.
  std::string plot_data() const;
};

CoverageReport run_coverage(const ExperimentConfig& cfg);

struct IdentifiabilityRow {
  std::size_t n = 0;
  std::size_t trials = 0;
  std::size_t identified = 0;
  /// Replicates with at least one critical point outside every ball.
  std::size_t outside = 0;
  double rate = 0.0;
  double outside_rate = 0.0;
  double band = 0.0;
};

struct IdentifiabilityReport {
  std::vector<IdentifiabilityRow> rows;
  /// min |grad mu| over the domain outside the balls, relative to max |grad mu|.
  double signal_gradient_floor = 0.0;
  /// Assumption 2 looks violated: the signal is flat somewhere outside the
  /// balls, or spurious critical points persist at the largest N.
  bool assumption_violated = false;
  nlohmann::json to_json() const;
};

/// Uses cfg.search.balls (all critical points) and cfg.ball_kinds. Only the
/// mean field is examined; noise.scale = 0 gives noiseless cohorts.
IdentifiabilityReport run_identifiability(const ExperimentConfig& cfg);

/// Balls around every interior critical point of a 1D signal (maxima and
/// minima), each with radius `fraction` of the distance to its nearest neighbour
/// or the domain edge; kinds are returned alongside.
std::pair<std::vector<Ball>, std::vector<PeakKind>> critical_point_balls(const Signal& signal, double fraction = 0.45);

/// Covariance of the gradient of standardized lattice noise at s, exactly
/// (sum of squared derivatives of the normalized stencil weights).
Mat analytic_noise_lambda(const Lattice& lattice, const Kernel& kernel, const Vec& s);

struct CltCase {
  double d = 0.0;             // constant effect size d(s)
  bool varying_sigma = false; // sigma(s) = 1 + 0.5 sin(2 pi s / 20), checked at s = 20
};

struct CltReport {
  CltCase setting;
  std::size_t n = 0;
  std::size_t reps = 0;
  Vec point;
  Mat empirical;  // cov of sqrt(N) grad d_N at the point
  Mat target;     // (1 + d^2) Lambda'
  double max_rel_dev = 0.0;
  nlohmann::json to_json() const;
};

/// 1D check of the Cohen's d gradient CLT: Y_n = d sigma(s) + sigma(s) eps_n(s),
/// so d(s) is constant and sqrt(N) grad d_N is centered.
CltReport check_t_gradient_clt(const NoiseSpec& noise, std::size_t n, std::size_t reps, const CltCase& c,
                               int threads = 0);

struct Chi2GradParams {
  int components = 1;  // N
  double sigma2 = 1.0;
  Mat lambda = Mat::Identity(1, 1);
  Vec gamma = Vec::Zero(1);
  std::uint64_t seed = 0;
};

struct Chi2GradReport {
  std::size_t reps = 0;
  Vec mean;          // E[R / sqrt(4U)]
  Mat cov;           // cov(R / sqrt(4U))
  Mat target_cov;    // Lambda - Gamma Gamma^T / sigma^2
  Vec corr_u;        // corr(R / sqrt(4U), U)
  double max_rel_dev = 0.0;
  /// Kolmogorov-Smirnov distance to N(0,1) of the first coordinate (when target is 1x1 unit).
  double ks = 0.0;
  nlohmann::json to_json() const;
};

/// Simulates jointly normal (Y_n, grad Y_n) at one point and the residual
/// R = grad U - 2 Gamma U / sigma^2 of U = sum Y_n^2.
Chi2GradReport check_chi2_gradient(const Chi2GradParams& p, std::size_t reps);

struct ScalarDist {
  enum class Kind { Normal, Uniform, Constant } kind = Kind::Normal;
  double a = 0.0;  // mean / lower / value
  double b = 1.0;  // sd / upper

  double mean() const;
  double draw(PhiloxStream& rng) const;
};

struct DominanceRow {
  double x = 0.0;
  double p_expected_b = 0.0;  // P(A / E[B] > x)
  double p_ratio = 0.0;       // P(A / B > x)
  double band = 0.0;          // 2 sigma band of the difference
  double exact_ratio = 0.0;   // numeric integral when A is normal (NaN otherwise)
  bool holds = false;
};

struct DominanceReport {
  std::vector<DominanceRow> rows;
  std::size_t reps = 0;
  bool holds = false;
  nlohmann::json to_json() const;
};

DominanceReport check_ratio_dominance(const ScalarDist& a, const ScalarDist& b, const std::vector<double>& x_grid,
                                      std::size_t reps, std::uint64_t seed = 0);

}  // namespace peakcr
