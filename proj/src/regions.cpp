#include "peakcr/regions.hpp"

#include "peakcr/distributions.hpp"
#include "peakcr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace peakcr {

const char* to_string(RegionMethod m) { return m == RegionMethod::Asymptotic ? "asymptotic" : "monte_carlo"; }
const char* to_string(RegionTarget t) { return t == RegionTarget::Mean ? "mean" : "cohensd"; }

void McConfig::validate() const {
  if (draws < 1000) throw ConfigError("monte carlo: need at least 1000 draws");
  if (!(eigen_floor > 0.0 && eigen_floor < 1.0)) throw ConfigError("monte carlo: eigen_floor must be in (0,1)");
}

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must be in (0,1)");
}

Mat checked_inverse(const Mat& h, const char* what) {
  Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
  const double hi = es.eigenvalues().cwiseAbs().maxCoeff();
  const double lo = es.eigenvalues().cwiseAbs().minCoeff();
  if (!(hi > 0.0) || lo < 1e-12 * hi) throw NumericError(std::string(what) + ": Hessian is singular");
  return h.inverse();
}

Mat sandwich(const Mat& hinv, const Mat& mid) {
  Mat s = hinv * mid * hinv.transpose();
  return 0.5 * (s + s.transpose());
}

void check_peak(const PeakEstimate& p) {
  if (p.kind != PeakKind::Max && p.kind != PeakKind::Min) {
    throw NumericError(std::string("region needs a non-degenerate max or min, got ") + to_string(p.kind));
  }
}

ConfidenceEllipsoid asymptotic(const PeakEstimate& peak, const Mat& mid, std::size_t n, double alpha,
                               RegionTarget target) {
  check_alpha(alpha);
  check_peak(peak);
  if (n < 2) throw ConfigError("region: n must be at least 2");
  ConfidenceEllipsoid r;
  r.center = peak.location;
  r.shape = sandwich(checked_inverse(peak.hessian, "asymptotic region"), mid);
  r.threshold = chi2_quantile(1.0 - alpha, r.dim());
  r.n = n;
  r.alpha = alpha;
  r.method = RegionMethod::Asymptotic;
  r.target = target;
  return r;
}

// Symmetric square root of a PSD matrix.
template <typename M>
M psd_sqrt(const M& a) {
  Eigen::SelfAdjointEigenSolver<M> es(a);
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

double order_statistic(const std::vector<double>& sorted, double alpha) {
  const auto K = sorted.size();
  auto k = static_cast<std::size_t>(std::ceil((1.0 - alpha) * static_cast<double>(K) - 1e-9));
  k = std::clamp<std::size_t>(k, 1, K);
  return sorted[k - 1];
}

}  // namespace

ConfidenceEllipsoid asymptotic_region_mean(const PeakEstimate& peak, const GradCov& gc, std::size_t n,
                                           double alpha) {
  return asymptotic(peak, gc.lambda, n, alpha, RegionTarget::Mean);
}

ConfidenceEllipsoid asymptotic_region_cohensd(const PeakEstimate& peak, const GradCov& gc,
                                              const Vec& grad_sigma2, double d_value, std::size_t n,
                                              double alpha) {
  const Mat lp = lambda_prime(gc, grad_sigma2);
  return asymptotic(peak, (1.0 + d_value * d_value) * lp, n, alpha, RegionTarget::CohensD);
}

void monte_carlo_region_cohensd() { throw Unsupported("unsupported: Monte Carlo for Cohen's d"); }

std::optional<VechVec> truncate_hessian_draw(const VechVec& b, const VechVec& mean, const Mat& observed_h,
                                             PeakKind sign, double eps) {
  if (sign != PeakKind::Max && sign != PeakKind::Min) throw ConfigError("truncation: sign must be max or min");
  const double sg = sign == PeakKind::Max ? -1.0 : 1.0;  // -sign, with Max = +1
  Eigen::SelfAdjointEigenSolver<Mat> obs(sg * observed_h, Eigen::EigenvaluesOnly);
  const double floor = eps * obs.eigenvalues().minCoeff();
  auto ok = [&](const VechVec& v) {
    Eigen::SelfAdjointEigenSolver<Mat> es(sg * vech_inv(v), Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    return lo > 0.0 && lo >= floor;
  };
  if (ok(b)) return b;
  const VechVec m = 2.0 * mean - b;
  if (ok(m)) return m;
  return std::nullopt;
}

ConfidenceEllipsoid monte_carlo_region_mean(const PeakEstimate& peak, const GradCov& gc,
                                            const HessCov& hc, std::size_t n, double alpha,
                                            const McConfig& cfg) {
  cfg.validate();
  check_alpha(alpha);
  check_peak(peak);
  if (n < 2) throw ConfigError("region: n must be at least 2");
  const int D = static_cast<int>(peak.location.size());
  const int V = vech_size(D);
  if (gc.lambda.rows() != D || hc.omega.rows() != V) throw ConfigError("monte carlo: covariance dimensions do not match the peak");
  check_conditioning(gc.lambda);
  const Mat hinv = checked_inverse(peak.hessian, "monte carlo region");
  const Mat shape = sandwich(hinv, gc.lambda);
  Eigen::LDLT<Mat> shape_ldlt(shape);
  if (shape_ldlt.info() != Eigen::Success) throw SingularCovariance("monte carlo: region shape is singular");

  const double rn = std::sqrt(static_cast<double>(n));
  const Mat a_root = psd_sqrt(gc.lambda) / rn;
  const VechMat b_root = psd_sqrt(hc.omega) / rn;
  const VechVec mean = vech(peak.hessian);

  std::vector<double> stats;
  stats.reserve(cfg.draws);
  std::size_t discarded = 0;
  Vec za(D);
  VechVec zb(V);
  for (std::size_t k = 0; k < cfg.draws; ++k) {
    PhiloxStream rng(cfg.seed, stream_id(0x6d63ull, k));
    for (int i = 0; i < D; ++i) za[i] = rng.normal();
    for (int i = 0; i < V; ++i) zb[i] = rng.normal();
    const Vec a = a_root * za;
    const VechVec b = mean + b_root * zb;
    const auto t = truncate_hessian_draw(b, mean, peak.hessian, peak.kind, cfg.eigen_floor);
    if (!t) {
      ++discarded;
      continue;
    }
    const Vec delta = vech_inv(*t).ldlt().solve(a);
    stats.push_back(static_cast<double>(n) * delta.dot(shape_ldlt.solve(delta)));
  }
  if (2 * discarded > cfg.draws) {
    throw TruncationDominates("monte carlo: " + std::to_string(discarded) + " of " +
                              std::to_string(cfg.draws) + " Hessian draws were discarded");
  }
  std::sort(stats.begin(), stats.end());
  ConfidenceEllipsoid r;
  r.center = peak.location;
  r.shape = shape;
  r.n = n;
  r.alpha = alpha;
  r.method = RegionMethod::MonteCarlo;
  r.target = RegionTarget::Mean;
  r.draws_discarded = discarded;
  r.threshold = order_statistic(stats, alpha);
  r.mc_statistics = std::make_shared<const std::vector<double>>(std::move(stats));
  return r;
}

ConfidenceEllipsoid at_level(const ConfidenceEllipsoid& r, double alpha) {
  check_alpha(alpha);
  ConfidenceEllipsoid out = r;
  out.alpha = alpha;
  if (r.method == RegionMethod::Asymptotic) {
    out.threshold = chi2_quantile(1.0 - alpha, r.dim());
  } else {
    if (!r.mc_statistics || r.mc_statistics->empty()) throw ConfigError("monte carlo region has no stored draws");
    out.threshold = order_statistic(*r.mc_statistics, alpha);
  }
  return out;
}

std::vector<ConfidenceEllipsoid> bonferroni_joint(const std::vector<ConfidenceEllipsoid>& regions,
                                                  double alpha) {
  if (regions.empty()) throw ConfigError("bonferroni: no regions");
  for (const auto& r : regions) {
    if (r.n != regions.front().n || r.target != regions.front().target) {
      throw ConfigError("bonferroni: regions must share n and target");
    }
  }
  std::vector<ConfidenceEllipsoid> out;
  out.reserve(regions.size());
  const double a = alpha / static_cast<double>(regions.size());
  for (const auto& r : regions) out.push_back(at_level(r, a));
  return out;
}

double mahalanobis(const ConfidenceEllipsoid& r, const Vec& theta) {
  const Vec d = r.center - theta;
  return static_cast<double>(r.n) * d.dot(r.shape.ldlt().solve(d));
}

bool contains(const ConfidenceEllipsoid& r, const Vec& theta) { return mahalanobis(r, theta) < r.threshold; }

Vec half_axes(const ConfidenceEllipsoid& r) {
  Eigen::SelfAdjointEigenSolver<Mat> es(r.shape, Eigen::EigenvaluesOnly);
  return (es.eigenvalues().cwiseMax(0.0) * (r.threshold / static_cast<double>(r.n))).cwiseSqrt();
}

std::vector<PeakRegions> peak_regions(const FieldCohort& cohort, const RegionRequest& req,
                                      const std::vector<RegionMethod>& methods) {
  if (req.search.balls.empty()) throw ConfigError("regions: no search balls");
  if (methods.empty()) throw ConfigError("regions: no methods");
  const bool want_mc = std::find(methods.begin(), methods.end(), RegionMethod::MonteCarlo) != methods.end();
  if (want_mc && req.target == RegionTarget::CohensD) monte_carlo_region_cohensd();
  req.search.validate(cohort.domain());
  const DerivedField field(cohort, req.target == RegionTarget::Mean ? DerivedFieldKind::Mean
                                                                   : DerivedFieldKind::CohensD);
  std::vector<PeakRegions> out(methods.size());
  const std::size_t n = cohort.n();
  for (std::size_t j = 0; j < req.search.balls.size(); ++j) {
    PeakEstimate p = argmax_in_ball(field, req.search.balls[j], req.search);
    p.ball_index = static_cast<int>(j);
    if (p.kind != PeakKind::Max) {
      throw NumericError("regions: no interior maximum in ball " + std::to_string(j));
    }
    GradCov gc;
    HessCov hc;
    if (want_mc) {
      std::tie(gc, hc) = estimate_covariances(cohort, p.location, req.cov);
    } else {
      gc = estimate_grad_cov(cohort, p.location, req.cov);
    }
    for (std::size_t m = 0; m < methods.size(); ++m) {
      ConfidenceEllipsoid r;
      if (req.target == RegionTarget::CohensD) {
        const Vec gs2 = req.cov.mode == CovMode::Pointwise ? cohort.var_jet(p.location, 1).grad
                                                            : Vec::Zero(cohort.dim());
        r = asymptotic_region_cohensd(p, gc, gs2, p.value, n, req.alpha);
      } else if (methods[m] == RegionMethod::Asymptotic) {
        r = asymptotic_region_mean(p, gc, n, req.alpha);
      } else {
        McConfig mc = req.mc;
        mc.seed = stream_id(req.mc.seed, j);
        r = monte_carlo_region_mean(p, gc, hc, n, req.alpha, mc);
      }
      out[m].peaks.push_back(p);
      out[m].marginal.push_back(std::move(r));
    }
  }
  for (auto& pr : out) pr.joint = bonferroni_joint(pr.marginal, req.alpha);
  return out;
}

PeakRegions peak_regions(const FieldCohort& cohort, const RegionRequest& req) {
  return std::move(peak_regions(cohort, req, {req.method}).front());
}

}  // namespace peakcr
