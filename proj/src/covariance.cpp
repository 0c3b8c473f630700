#include "peakcr/covariance.hpp"

#include <cmath>

namespace peakcr {

const char* to_string(CovMode m) {
  return m == CovMode::Pointwise ? "pointwise" : "stationary_pooled";
}

VechVec vech(const Mat& a) {
  if (a.rows() != a.cols() || a.rows() < 1 || a.rows() > kMaxDim) {
    throw ConfigError("vech: expected a square 1x1 or 2x2 matrix");
  }
  if ((a - a.transpose()).norm() > 1e-9) throw DataError("vech: matrix is not symmetric");
  const int D = static_cast<int>(a.rows());
  VechVec v(vech_size(D));
  int k = 0;
  for (int c = 0; c < D; ++c) {
    for (int r = c; r < D; ++r) v[k++] = a(r, c);
  }
  return v;
}

Mat vech_inv(const VechVec& v) {
  int D = 0;
  if (v.size() == 1) D = 1;
  else if (v.size() == 3) D = 2;
  else throw ConfigError("vech_inv: length must be 1 or 3");
  Mat a(D, D);
  int k = 0;
  for (int c = 0; c < D; ++c) {
    for (int r = c; r < D; ++r) {
      a(r, c) = v[k];
      a(c, r) = v[k];
      ++k;
    }
  }
  return a;
}

std::vector<Vec> pooling_grid(const Box& domain, double step) {
  if (!(step > 0.0)) throw ConfigError("pooling grid: step must be positive");
  std::array<int, kMaxDim> n{1, 1};
  const int D = domain.dim();
  for (int a = 0; a < D; ++a) {
    n[a] = static_cast<int>(std::floor((domain.hi[a] - domain.lo[a]) / step + 1e-9)) + 1;
  }
  std::vector<Vec> pts;
  pts.reserve(static_cast<std::size_t>(n[0]) * (D == 2 ? n[1] : 1));
  for (int i = 0; i < n[0]; ++i) {
    for (int k = 0; k < (D == 2 ? n[1] : 1); ++k) {
      Vec p(D);
      p[0] = domain.lo[0] + i * step;
      if (D == 2) p[1] = domain.lo[1] + k * step;
      pts.push_back(p);
    }
  }
  return pts;
}

namespace {

template <typename M>
M repair_psd_impl(const M& a) {
  const M s = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<M> es(s);
  const double tr = std::max(s.trace(), 0.0);
  auto ev = es.eigenvalues().eval();
  if (ev.minCoeff() >= 0.0) return s;
  if (ev.minCoeff() < -1e-10 * tr) throw NumericError("covariance estimate is not positive semidefinite");
  ev = ev.cwiseMax(0.0);
  M out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

struct Accum {
  Mat lambda;
  Vec gamma;
  double sigma2 = 0;
  VechMat omega;
};

// Sample moments of the subject jets at one point (N - 1 denominators).
// Everything is shifted by the first subject first, so identical subjects
// give exactly zero.
Accum point_moments(const std::vector<Jet>& jets, int D, bool with_hess) {
  const std::size_t N = jets.size();
  const int V = vech_size(D);
  const Jet& ref = jets.front();
  const VechVec ref_h = with_hess ? vech(ref.hess) : VechVec();
  std::vector<double> dv(N);
  std::vector<Vec> dgs(N);
  std::vector<VechVec> dhs(with_hess ? N : 0);
  double mv = 0;
  Vec mg = Vec::Zero(D);
  VechVec mh = VechVec::Zero(V);
  for (std::size_t n = 0; n < N; ++n) {
    dv[n] = jets[n].value - ref.value;
    dgs[n] = jets[n].grad - ref.grad;
    mv += dv[n];
    mg += dgs[n];
    if (with_hess) {
      dhs[n] = vech(jets[n].hess) - ref_h;
      mh += dhs[n];
    }
  }
  mv /= static_cast<double>(N);
  mg /= static_cast<double>(N);
  mh /= static_cast<double>(N);
  Accum a;
  a.lambda = Mat::Zero(D, D);
  a.gamma = Vec::Zero(D);
  a.omega = VechMat::Zero(V, V);
  for (std::size_t n = 0; n < N; ++n) {
    const double r = dv[n] - mv;
    const Vec dg = dgs[n] - mg;
    a.sigma2 += r * r;
    a.gamma += r * dg;
    a.lambda += outer_sq(dg);
    if (with_hess) {
      const VechVec dh = dhs[n] - mh;
      for (int i = 0; i < V; ++i) {
        for (int k = 0; k <= i; ++k) {
          a.omega(i, k) += dh[i] * dh[k];
          if (k != i) a.omega(k, i) = a.omega(i, k);
        }
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(N - 1);
  a.sigma2 *= inv;
  a.gamma *= inv;
  a.lambda *= inv;
  a.omega *= inv;
  return a;
}

Accum moments(const FieldCohort& cohort, const Vec& s, const CovOptions& opts, bool with_hess) {
  const int D = cohort.dim();
  std::vector<Jet> jets;
  if (opts.mode == CovMode::Pointwise) {
    cohort.subject_jets(s, with_hess ? 2 : 1, jets);
    return point_moments(jets, D, with_hess);
  }
  const auto pts = pooling_grid(cohort.domain(), opts.pool_step);
  Accum total;
  total.lambda = Mat::Zero(D, D);
  total.gamma = Vec::Zero(D);
  total.omega = VechMat::Zero(vech_size(D), vech_size(D));
  for (const Vec& p : pts) {
    cohort.subject_jets(p, with_hess ? 2 : 1, jets);
    const Accum a = point_moments(jets, D, with_hess);
    total.lambda += a.lambda;
    total.gamma += a.gamma;
    total.sigma2 += a.sigma2;
    total.omega += a.omega;
  }
  const double inv = 1.0 / static_cast<double>(pts.size());
  total.lambda *= inv;
  total.gamma *= inv;
  total.sigma2 *= inv;
  total.omega *= inv;
  return total;
}

GradCov to_grad_cov(const Accum& a, const CovOptions& opts) {
  GradCov g;
  g.lambda = repair_psd(a.lambda);
  g.gamma = a.gamma;
  g.sigma2 = a.sigma2;
  g.mode = opts.mode;
  if (opts.check_conditioning) check_conditioning(g.lambda);
  return g;
}

}  // namespace

Mat repair_psd(const Mat& a) { return repair_psd_impl(a); }
VechMat repair_psd(const VechMat& a) { return repair_psd_impl(a); }

void check_conditioning(const Mat& a, double limit) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
  const double hi = es.eigenvalues().cwiseAbs().maxCoeff();
  const double lo = es.eigenvalues().cwiseAbs().minCoeff();
  // A zero matrix (no variation at all) is reported as is.
  if (hi == 0.0) return;
  if (!(lo * limit >= hi)) throw SingularCovariance("gradient covariance is singular (condition number > 1e12)");
}

GradCov estimate_grad_cov(const FieldCohort& cohort, const Vec& s, const CovOptions& opts) {
  if (cohort.n() < 2) throw ConfigError("covariance: need at least two subjects");
  return to_grad_cov(moments(cohort, s, opts, false), opts);
}

HessCov estimate_hess_cov(const FieldCohort& cohort, const Vec& s, const CovOptions& opts) {
  return estimate_covariances(cohort, s, opts).second;
}

std::pair<GradCov, HessCov> estimate_covariances(const FieldCohort& cohort, const Vec& s,
                                                 const CovOptions& opts) {
  if (cohort.n() < 2) throw ConfigError("covariance: need at least two subjects");
  const Accum a = moments(cohort, s, opts, true);
  HessCov h;
  h.omega = repair_psd(a.omega);
  h.mode = opts.mode;
  return {to_grad_cov(a, opts), h};
}

Mat lambda_prime(const GradCov& gc, const Vec& grad_sigma2) {
  if (!(gc.sigma2 > 0.0)) throw DegenerateVariance("lambda_prime: variance must be positive");
  const double s2 = gc.sigma2;
  const double s4 = s2 * s2;
  Mat out = gc.lambda / s2 - outer_sym(gc.gamma, grad_sigma2) / (2.0 * s4) +
            outer_sq(grad_sigma2) / (4.0 * s4);
  return 0.5 * (out + out.transpose());
}

}  // namespace peakcr
