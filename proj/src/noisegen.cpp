#include "peakcr/noisegen.hpp"

#include "peakcr/rng.hpp"

#include <algorithm>
#include <cmath>

namespace peakcr {

namespace {

// Plain Newton iteration for a critical point of a smooth closed-form field,
// started close to the answer.
Vec newton_critical(const Field& f, Vec x, double max_step) {
  for (int it = 0; it < 200; ++it) {
    const Jet j = f.jet(x, 2);
    if (j.grad.norm() < 1e-14) break;
    Vec step = -j.hess.ldlt().solve(j.grad);
    const double n = step.norm();
    if (n > max_step) step *= max_step / n;
    x += step;
    if (n < 1e-15) break;
  }
  return x;
}

}  // namespace

Signal::Signal(SignalSpec spec) : spec_(std::move(spec)) {
  const Box& dom = spec_.domain;
  if (dom.dim() != 1 && dom.dim() != 2) throw ConfigError("signal: domain must be 1D or 2D");
  if (const auto* b = std::get_if<Beta1D>(&spec_.kind)) {
    if (dom.dim() != 1) throw ConfigError("signal: Beta1D needs a 1D domain");
    if (!(b->a > 1.0 && b->b > 1.0)) throw ConfigError("signal: Beta1D needs a, b > 1");
    if (b->n_peaks < 1 || !(b->width > 0.0)) throw ConfigError("signal: Beta1D needs n_peaks >= 1, width > 0");
    if (b->smoothing_fwhm > 0.0) {
      smooth_kernel_ = std::make_shared<GaussianKernel>(b->smoothing_fwhm, 6.0);
      const double r = smooth_kernel_->radius();
      smooth_origin_ = std::floor(std::min(dom.lo[0], b->start) - r - 1.0);
      const double end = std::ceil(std::max(dom.hi[0], b->start + b->n_peaks * b->width) + r + 1.0);
      const auto count = static_cast<std::size_t>(end - smooth_origin_) + 1;
      smooth_values_.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        smooth_values_[i] = raw_jet(make_vec({smooth_origin_ + static_cast<double>(i)}), 0).value;
      }
      smooth_scale_ = 1.0;
      double peak = 0.0;
      const double mode = (b->a - 1.0) / (b->a + b->b - 2.0);
      for (int k = 0; k < b->n_peaks; ++k) {
        const Vec x = newton_critical(*this, make_vec({b->start + (k + mode) * b->width}), 1.0);
        peak = std::max(peak, jet(x, 0).value);
      }
      smooth_scale_ = peak > 0.0 ? b->amplitude / peak : 0.0;
    }
  } else if (const auto* g = std::get_if<GaussBumps2D>(&spec_.kind)) {
    if (g->centers.empty() || g->centers.size() != g->widths.size() ||
        g->centers.size() != g->amplitudes.size()) {
      throw ConfigError("signal: GaussBumps2D needs matching centers, widths, amplitudes");
    }
    for (std::size_t i = 0; i < g->centers.size(); ++i) {
      if (g->centers[i].size() != dom.dim() || !(g->widths[i] > 0.0)) {
        throw ConfigError("signal: malformed Gaussian bump");
      }
    }
  } else if (const auto* q = std::get_if<Quadratic>(&spec_.kind)) {
    if (q->theta.size() != dom.dim() || !(q->curvature > 0.0)) {
      throw ConfigError("signal: Quadratic needs theta of domain dimension and curvature > 0");
    }
  }
  locate_critical_points();
  if (maxima_.empty()) throw ConfigError("signal: no peak lies strictly inside the domain");
}

Jet Signal::raw_jet(const Vec& s, int order) const {
  const int D = dim();
  Jet j = Jet::zero(D);
  if (const auto* b = std::get_if<Beta1D>(&spec_.kind)) {
    const double u = (s[0] - b->start) / b->width;
    const double k = std::floor(u);
    if (k < 0 || k >= b->n_peaks) return j;
    const double x = u - k;
    if (x <= 0.0) return j;
    const double p = b->a - 1.0, q = b->b - 1.0;
    const double mode = p / (p + q);
    const double norm = std::pow(mode, p) * std::pow(1.0 - mode, q);
    j.value = b->amplitude * std::pow(x, p) * std::pow(1.0 - x, q) / norm;
    if (order >= 1) {
      // d/dx log f = p/x - q/(1-x); chain rule through x = u - k.
      const double g1 = p / x - q / (1.0 - x);
      j.grad[0] = j.value * g1 / b->width;
      if (order >= 2) {
        const double g2 = -p / (x * x) - q / ((1.0 - x) * (1.0 - x));
        j.hess(0, 0) = j.value * (g1 * g1 + g2) / (b->width * b->width);
      }
    }
    return j;
  }
  if (const auto* g = std::get_if<GaussBumps2D>(&spec_.kind)) {
    for (std::size_t i = 0; i < g->centers.size(); ++i) {
      const Vec d = s - g->centers[i];
      const double w2 = g->widths[i] * g->widths[i];
      const double v = g->amplitudes[i] * std::exp(-0.5 * d.squaredNorm() / w2);
      j.value += v;
      if (order >= 1) j.grad -= (v / w2) * d;
      if (order >= 2) {
        j.hess += (v / (w2 * w2)) * outer_sq(d);
        j.hess.diagonal().array() -= v / w2;
      }
    }
    return j;
  }
  const auto& q = std::get<Quadratic>(spec_.kind);
  const Vec d = s - q.theta;
  j.value = -q.curvature * d.squaredNorm();
  if (order >= 1) j.grad = -2.0 * q.curvature * d;
  if (order >= 2) j.hess = -2.0 * q.curvature * Mat::Identity(D, D);
  return j;
}

Jet Signal::jet(const Vec& s, int order) const {
  if (!smooth_kernel_) return raw_jet(s, order);
  const double r = smooth_kernel_->radius();
  const auto lo = static_cast<long>(std::ceil(s[0] - r - smooth_origin_));
  const auto hi = static_cast<long>(std::floor(s[0] + r - smooth_origin_));
  Jet j = Jet::zero(1);
  Vec d(1);
  for (long i = std::max<long>(lo, 0); i <= std::min<long>(hi, static_cast<long>(smooth_values_.size()) - 1); ++i) {
    const double v = smooth_values_[static_cast<std::size_t>(i)];
    if (v == 0.0) continue;
    d[0] = s[0] - (smooth_origin_ + static_cast<double>(i));
    const Jet k = smooth_kernel_->jet(d, order);
    j.value += k.value * v;
    if (order >= 1) j.grad += v * k.grad;
    if (order >= 2) j.hess += v * k.hess;
  }
  j.value *= smooth_scale_;
  if (order >= 1) j.grad *= smooth_scale_;
  if (order >= 2) j.hess *= smooth_scale_;
  return j;
}

void Signal::locate_critical_points() {
  maxima_.clear();
  minima_.clear();
  const Box& dom = spec_.domain;
  auto inside = [&](const Vec& x) {
    for (int a = 0; a < dom.dim(); ++a) {
      if (!(x[a] > dom.lo[a] && x[a] < dom.hi[a])) return false;
    }
    return true;
  };
  if (const auto* b = std::get_if<Beta1D>(&spec_.kind)) {
    const double mode = (b->a - 1.0) / (b->a + b->b - 2.0);
    for (int k = 0; k < b->n_peaks; ++k) {
      Vec x = make_vec({b->start + (k + mode) * b->width});
      if (smooth_kernel_) x = newton_critical(*this, x, 1.0);
      // Sections may run past the domain; their peaks are then just profile.
      if (inside(x)) maxima_.push_back(x);
    }
    for (int k = 1; k < b->n_peaks; ++k) {
      Vec x = make_vec({b->start + k * b->width});
      if (smooth_kernel_) {
        // The smoothed minimum sits a little to the left of the join.
        x = newton_critical(*this, x - make_vec({0.05 * b->width}), 1.0);
      }
      if (inside(x)) minima_.push_back(x);
    }
  } else if (const auto* g = std::get_if<GaussBumps2D>(&spec_.kind)) {
    for (const Vec& c : g->centers) {
      const Vec x = newton_critical(*this, c, 0.25);
      if (inside(x) && jet(x, 2).hess.ldlt().isNegative() &&
          std::none_of(maxima_.begin(), maxima_.end(), [&](const Vec& m) { return (m - x).norm() < 1e-6; })) {
        maxima_.push_back(x);
      }
    }
  } else {
    const Vec& t = std::get<Quadratic>(spec_.kind).theta;
    if (inside(t)) maxima_.push_back(t);
  }
  std::sort(maxima_.begin(), maxima_.end(), [](const Vec& a, const Vec& b) {
    return a[0] != b[0] ? a[0] < b[0] : a[a.size() - 1] < b[b.size() - 1];
  });
}

SignalSpec beta_preset(bool narrow, int n_peaks, double amplitude, double width,
                       double smoothing_fwhm, double margin) {
  Beta1D b;
  b.a = 1.5;
  b.b = narrow ? 3.0 : 2.0;
  b.n_peaks = n_peaks;
  b.amplitude = amplitude;
  b.width = width;
  b.start = 0.0;
  b.smoothing_fwhm = smoothing_fwhm;
  SignalSpec s;
  s.kind = b;
  s.domain = Box{make_vec({-margin}), make_vec({n_peaks * width + margin})};
  return s;
}

SignalSpec beta_interior_preset(bool narrow, int n_peaks, double amplitude, double width,
                                double smoothing_fwhm) {
  SignalSpec s = beta_preset(narrow, n_peaks + 1, amplitude, width, smoothing_fwhm);
  const auto& b = std::get<Beta1D>(s.kind);
  const double mode = (b.a - 1.0) / (b.a + b.b - 2.0);
  s.domain = Box{make_vec({(mode + 0.5) * width}), make_vec({(n_peaks + mode + 0.5) * width})};
  return s;
}

SignalSpec bumps_preset(bool narrow, double amplitude) {
  GaussBumps2D g;
  const double w = narrow ? 3.0 : 6.0;
  g.centers = {make_vec({20.0, 20.0}), make_vec({20.0, 50.0})};
  g.widths = {w, w};
  g.amplitudes = {amplitude, amplitude};
  SignalSpec s;
  s.kind = g;
  s.domain = Box{make_vec({0.0, 0.0}), make_vec({40.0, 70.0})};
  return s;
}

void NoiseSpec::validate() const {
  if (!(fwhm > 0.0)) throw ConfigError("noise: fwhm must be positive");
  if (marginal == NoiseMarginal::StudentT && df < 3) {
    throw ConfigError("noise: t marginal needs df >= 3 for finite variance");
  }
  if (!(scale >= 0.0)) throw ConfigError("noise: scale must be non-negative");
  if (!(truncation_sigmas > 0.0)) throw ConfigError("noise: truncation must be positive");
}

Lattice lattice_for(const Box& domain, const GaussianKernel& kernel) {
  const double r = kernel.radius();
  Lattice lat;
  lat.dim = domain.dim();
  for (int a = 0; a < lat.dim; ++a) {
    const double lo = std::floor(domain.lo[a] - r);
    const double hi = std::ceil(domain.hi[a] + r);
    lat.origin[a] = lo;
    lat.spacing[a] = 1.0;
    lat.shape[a] = static_cast<std::size_t>(hi - lo) + 1;
  }
  return lat;
}

std::vector<double> white_noise(const NoiseSpec& noise, std::size_t count, std::uint64_t replicate,
                                std::uint64_t subject) {
  PhiloxStream rng(noise.seed, stream_id(0x6e6f697365ull, replicate, subject));
  std::vector<double> out(count);
  if (noise.marginal == NoiseMarginal::Gaussian) {
    for (auto& v : out) v = rng.normal();
  } else {
    const double sd = std::sqrt(static_cast<double>(noise.df) / (noise.df - 2.0));
    for (auto& v : out) v = rng.student_t(noise.df) / sd;
  }
  return out;
}

FieldCohort generate_cohort(const std::shared_ptr<const Signal>& signal, const NoiseSpec& noise,
                            std::size_t n, std::uint64_t replicate) {
  noise.validate();
  if (n < 2) throw ConfigError("generate_cohort: need at least two subjects");
  auto kernel = std::make_shared<GaussianKernel>(noise.fwhm, noise.truncation_sigmas);
  const Lattice lat = lattice_for(signal->domain(), *kernel);
  const std::size_t P = lat.size();
  std::vector<double> values;
  values.reserve(n * P);
  for (std::size_t s = 0; s < n; ++s) {
    auto w = white_noise(noise, P, replicate, s);
    for (double& v : w) v *= noise.scale;
    values.insert(values.end(), w.begin(), w.end());
  }
  auto comps = std::make_shared<LatticeCohort>(lat, std::move(values), n, kernel, signal->domain(),
                                               noise.standardize, signal);
  return FieldCohort(std::move(comps));
}

}  // namespace peakcr
