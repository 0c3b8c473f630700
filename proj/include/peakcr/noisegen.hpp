#pragma once

#include "peakcr/core.hpp"
#include "peakcr/grid_field.hpp"
#include "peakcr/sample_fields.hpp"

#include <cstdint>
#include <memory>
#include <variant>
#include <vector>

namespace peakcr {

/// Repeated sections of a Beta(a, b) density, scaled so the peak height is
/// `amplitude`. Section k covers [start + k*width, start + (k+1)*width).
/// With smoothing_fwhm > 0 the lattice samples of that profile are convolved
/// with a unit-mass Gaussian and rescaled so the smoothed peak height is again
/// `amplitude`; this makes the signal C-infinity with non-flat minima.
struct Beta1D {
  double a = 1.5;
  double b = 3.0;
  int n_peaks = 3;
  double amplitude = 1.0;
  double start = 0.0;
  double width = 30.0;
  double smoothing_fwhm = 0.0;
};

/// Sum of isotropic Gaussian bumps A_i exp(-|s - c_i|^2 / (2 w_i^2)).
struct GaussBumps2D {
  std::vector<Vec> centers;
  std::vector<double> widths;
  std::vector<double> amplitudes;
};

/// -curvature * |s - theta|^2.
struct Quadratic {
  Vec theta;
  double curvature = 1.0;
};

struct SignalSpec {
  std::variant<Beta1D, GaussBumps2D, Quadratic> kind;
  /// Analysis domain S (voxel coordinates).
  Box domain;
};

/// Closed-form signal with exact derivatives and its true critical points.
class Signal final : public Field {
 public:
  explicit Signal(SignalSpec spec);

  int dim() const override { return spec_.domain.dim(); }
  const Box& domain() const override { return spec_.domain; }
  Jet jet(const Vec& s, int order = 2) const override;

  const SignalSpec& spec() const { return spec_; }
  /// True local maxima inside the domain, sorted by location.
  const std::vector<Vec>& maxima() const { return maxima_; }
  /// True local minima inside the domain (interior critical points only).
  const std::vector<Vec>& minima() const { return minima_; }

 private:
  Jet raw_jet(const Vec& s, int order) const;
  void locate_critical_points();

  SignalSpec spec_;
  // Smoothed Beta1D: lattice samples of the raw profile and the smoothing kernel.
  std::vector<double> smooth_values_;
  double smooth_origin_ = 0.0;
  std::shared_ptr<GaussianKernel> smooth_kernel_;
  double smooth_scale_ = 1.0;
  std::vector<Vec> maxima_;
  std::vector<Vec> minima_;
};

/// Presets. "narrow" uses Beta(1.5, 3) sections, "wide" Beta(1.5, 2).
SignalSpec beta_preset(bool narrow, int n_peaks = 3, double amplitude = 1.0, double width = 30.0,
                       double smoothing_fwhm = 0.0, double margin = 0.0);
/// n_peaks + 1 sections with the domain cut so that n_peaks maxima sit half a
/// section away from either edge (the first section only shapes the left tail).
SignalSpec beta_interior_preset(bool narrow, int n_peaks = 3, double amplitude = 1.0, double width = 30.0,
                                double smoothing_fwhm = 0.0);
SignalSpec bumps_preset(bool narrow, double amplitude = 1.0);

enum class NoiseMarginal { Gaussian, StudentT };

struct NoiseSpec {
  NoiseMarginal marginal = NoiseMarginal::Gaussian;
  int df = 3;
  double fwhm = 6.0;
  bool standardize = true;
  double truncation_sigmas = 4.0;
  /// Multiplies the standardized noise (noise sd); 0 gives noiseless cohorts.
  double scale = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Lattice covering the signal domain plus the kernel radius on every side.
Lattice lattice_for(const Box& domain, const GaussianKernel& kernel);

/// N subjects: standardized smoothed white noise (times noise.scale) plus the
/// signal. Subject n of replicate r draws from substream (seed, r, n).
FieldCohort generate_cohort(const std::shared_ptr<const Signal>& signal, const NoiseSpec& noise,
                            std::size_t n, std::uint64_t replicate = 0);

/// Raw lattice white noise of one subject (already variance-normalized).
std::vector<double> white_noise(const NoiseSpec& noise, std::size_t count, std::uint64_t replicate,
                                std::uint64_t subject);

}  // namespace peakcr
