#include "peakcr/welch.hpp"

#include <cmath>
#include <numbers>

namespace peakcr {

void WelchSpec::validate() const {
  if (segment_length < 8 || segment_length % 2 != 0) throw ConfigError("welch: segment length must be even and >= 8");
  if (!(window_edge > 0.0 && window_edge < 1.0)) throw ConfigError("welch: window edge must be in (0,1)");
  if (!(sample_rate > 0.0)) throw ConfigError("welch: sample rate must be positive");
}

std::vector<std::vector<double>> segment(const std::vector<double>& series, const WelchSpec& spec) {
  spec.validate();
  const auto a = static_cast<std::size_t>(spec.segment_length);
  if (series.size() < a) throw DataError("welch: series is shorter than one segment");
  std::vector<std::vector<double>> out;
  for (std::size_t start = 0; start + a <= series.size(); start += static_cast<std::size_t>(spec.stride())) {
    out.emplace_back(series.begin() + static_cast<std::ptrdiff_t>(start),
                     series.begin() + static_cast<std::ptrdiff_t>(start + a));
  }
  return out;
}

std::vector<double> gaussian_window(int a, double edge) {
  if (a < 2) throw ConfigError("window: length must be at least 2");
  if (!(edge > 0.0 && edge < 1.0)) throw ConfigError("window: edge must be in (0,1)");
  const double c = 0.5 * (a - 1);
  const double two_tau2 = c * c / -std::log(edge);
  std::vector<double> w(static_cast<std::size_t>(a));
  for (int i = 0; i < a; ++i) {
    const double u = i - c;
    w[static_cast<std::size_t>(i)] = std::exp(-u * u / two_tau2);
  }
  w.front() = w.back() = edge;
  return w;
}

std::vector<cplx> dft(const std::vector<cplx>& x) {
  const std::size_t a = x.size();
  std::vector<cplx> tw(a);
  for (std::size_t r = 0; r < a; ++r) tw[r] = std::polar(1.0, -2.0 * std::numbers::pi * r / a);
  std::vector<cplx> out(a);
  for (std::size_t j = 0; j < a; ++j) {
    cplx s = 0;
    for (std::size_t t = 0; t < a; ++t) s += x[t] * tw[(t * j) % a];
    out[j] = s;
  }
  return out;
}

WelchKernel::WelchKernel(const WelchSpec& spec) : a_(spec.segment_length) {
  spec.validate();
  window_ = gaussian_window(a_, spec.window_edge);
  twiddle_.resize(static_cast<std::size_t>(a_));
  for (int r = 0; r < a_; ++r) twiddle_[static_cast<std::size_t>(r)] = std::polar(1.0, 2.0 * std::numbers::pi * r / a_);
}

void WelchKernel::eval(double nu, int order, std::vector<cplx>& k0, std::vector<cplx>& k1,
                       std::vector<cplx>& k2) const {
  const auto a = static_cast<std::size_t>(a_);
  // c_t = w(t) exp(-2 pi i t nu / a) / a; K(nu - j) = sum_t c_t exp(2 pi i t j / a).
  thread_local std::vector<cplx> c0, c1, c2;
  c0.resize(a);
  c1.resize(a);
  c2.resize(a);
  const double nu_red = nu - a_ * std::floor(nu / a_);
  for (std::size_t t = 0; t < a; ++t) {
    const double ph = -2.0 * std::numbers::pi * static_cast<double>(t) * nu_red / a_;
    c0[t] = window_[t] * std::polar(1.0, ph) / static_cast<double>(a_);
    const cplx d(0.0, -2.0 * std::numbers::pi * static_cast<double>(t) / a_);
    c1[t] = c0[t] * d;
    c2[t] = c1[t] * d;
  }
  k0.assign(a, 0.0);
  if (order >= 1) k1.assign(a, 0.0);
  if (order >= 2) k2.assign(a, 0.0);
  for (std::size_t j = 0; j < a; ++j) {
    cplx s0 = 0, s1 = 0, s2 = 0;
    std::size_t r = 0;  // (t * j) mod a
    for (std::size_t t = 0; t < a; ++t) {
      const cplx w = twiddle_[r];
      s0 += c0[t] * w;
      if (order >= 1) s1 += c1[t] * w;
      if (order >= 2) s2 += c2[t] * w;
      r += j;
      if (r >= a) r -= a;
    }
    k0[j] = s0;
    if (order >= 1) k1[j] = s1;
    if (order >= 2) k2[j] = s2;
  }
}

SpectrumCohort::SpectrumCohort(const std::vector<std::vector<double>>& series, WelchSpec spec)
    : spec_(spec), kernel_(spec) {
  std::vector<std::vector<cplx>> c;
  c.reserve(series.size());
  for (const auto& s : series) c.emplace_back(s.begin(), s.end());
  build(c, true);
}

SpectrumCohort::SpectrumCohort(const std::vector<std::vector<cplx>>& series, WelchSpec spec)
    : spec_(spec), kernel_(spec) {
  build(series, false);
}

void SpectrumCohort::build(const std::vector<std::vector<cplx>>& series, bool real_input) {
  if (series.empty()) throw DataError("welch: no series");
  const double nyq = 0.5 * spec_.sample_rate;
  domain_ = Box{make_vec({real_input ? 0.0 : -nyq}), make_vec({nyq})};
  const auto a = static_cast<std::size_t>(spec_.segment_length);
  for (const auto& x : series) {
    if (x.size() < a) throw DataError("welch: series is shorter than one segment");
    std::vector<std::vector<cplx>> segs;
    for (std::size_t start = 0; start + a <= x.size(); start += static_cast<std::size_t>(spec_.stride())) {
      std::vector<cplx> seg(x.begin() + static_cast<std::ptrdiff_t>(start),
                            x.begin() + static_cast<std::ptrdiff_t>(start + a));
      if (spec_.demean) {
        cplx m = 0;
        for (const cplx& v : seg) m += v;
        m /= static_cast<double>(a);
        for (cplx& v : seg) v -= m;
      }
      segs.push_back(dft(seg));
    }
    dfts_.push_back(std::move(segs));
  }
}

void SpectrumCohort::jets(const Vec& s, int order, std::vector<Jet>& out) const {
  const double scale = spec_.segment_length / spec_.sample_rate;  // lattice units per Hz
  const double nu = s[0] * scale;
  thread_local std::vector<cplx> k0, k1, k2;
  kernel_.eval(nu, order, k0, k1, k2);
  const std::size_t a = k0.size();
  out.assign(dfts_.size(), Jet::zero(1));
  const double c = 10.0 / std::numbers::ln10;
  for (std::size_t n = 0; n < dfts_.size(); ++n) {
    double v = 0, g = 0, h = 0;
    for (const auto& X : dfts_[n]) {
      cplx d0 = 0, d1 = 0, d2 = 0;
      for (std::size_t j = 0; j < a; ++j) {
        d0 += k0[j] * X[j];
        if (order >= 1) d1 += k1[j] * X[j];
        if (order >= 2) d2 += k2[j] * X[j];
      }
      double p = std::norm(d0);
      if (p < 1e-300) {
        ++floored_;
        v += std::log10(1e-300);
        continue;
      }
      v += std::log10(p);
      if (order >= 1) {
        const double p1 = 2.0 * std::real(std::conj(d0) * d1);
        g += p1 / p;
        if (order >= 2) {
          const double p2 = 2.0 * (std::norm(d1) + std::real(std::conj(d0) * d2));
          h += p2 / p - (p1 / p) * (p1 / p);
        }
      }
    }
    const double M = static_cast<double>(dfts_[n].size());
    Jet& j = out[n];
    j.value = 10.0 * v / M;
    if (order >= 1) j.grad[0] = c * g / M * scale;
    if (order >= 2) j.hess(0, 0) = c * h / M * scale * scale;
  }
}

SpectrumField::SpectrumField(const std::vector<double>& series, const WelchSpec& spec)
    : cohort_(std::make_shared<SpectrumCohort>(std::vector<std::vector<double>>{series}, spec)) {}

SpectrumField::SpectrumField(const std::vector<cplx>& series, const WelchSpec& spec)
    : cohort_(std::make_shared<SpectrumCohort>(std::vector<std::vector<cplx>>{series}, spec)) {}

Jet SpectrumField::jet(const Vec& s, int order) const {
  thread_local std::vector<Jet> out;
  cohort_->jets(s, order, out);
  return out[0];
}

PeakRegions spectrum_peak_regions(const std::shared_ptr<const SpectrumCohort>& spectra,
                                  const std::vector<Ball>& balls, double alpha, RegionTarget target,
                                  RegionMethod method, const McConfig& mc) {
  RegionRequest req;
  req.alpha = alpha;
  req.target = target;
  req.method = method;
  req.mc = mc;
  req.search.balls = balls;
  req.search.voxel = spectra->spec().frequency_step();
  req.cov.mode = CovMode::Pointwise;
  return peak_regions(FieldCohort(spectra), req);
}

}  // namespace peakcr
