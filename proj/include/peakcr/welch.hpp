#pragma once

#include "peakcr/core.hpp"
#include "peakcr/regions.hpp"
#include "peakcr/sample_fields.hpp"

#include <atomic>
#include <complex>
#include <vector>

namespace peakcr {

using cplx = std::complex<double>;

struct WelchSpec {
  /// Segment length a (even, >= 8); consecutive segments overlap by a/2.
  int segment_length = 240;
  /// Window weight at the segment ends.
  double window_edge = 0.05;
  double sample_rate = 240.0;
  /// Subtract each segment's mean before windowing.
  bool demean = true;

  void validate() const;
  int overlap() const { return segment_length / 2; }
  int stride() const { return segment_length - overlap(); }
  /// Spacing of the frequency lattice, sample_rate / a.
  double frequency_step() const { return sample_rate / segment_length; }
};

/// Consecutive length-a segments at stride a - a/2; a trailing partial segment is dropped.
std::vector<std::vector<double>> segment(const std::vector<double>& series, const WelchSpec& spec);

/// exp(-(i - (a-1)/2)^2 / (2 tau^2)) with tau chosen so the end weights equal `edge`.
std::vector<double> gaussian_window(int a, double edge);

/// DFT of the window as a kernel on the frequency lattice:
/// K(u) = (1/a) sum_t w(t) exp(-2 pi i t u / a), u in lattice units.
/// eval() fills K(nu - j), j = 0..a-1, and its nu-derivatives.
class WelchKernel {
 public:
  explicit WelchKernel(const WelchSpec& spec);
  int size() const { return a_; }
  const std::vector<double>& window() const { return window_; }
  void eval(double nu, int order, std::vector<cplx>& k0, std::vector<cplx>& k1, std::vector<cplx>& k2) const;

 private:
  int a_;
  std::vector<double> window_;
  std::vector<cplx> twiddle_;  // exp(2 pi i r / a)
};

/// Unnormalized DFT, X[j] = sum_t x(t) exp(-2 pi i t j / a).
std::vector<cplx> dft(const std::vector<cplx>& x);

/// Welch spectrum fields of several subjects, (10/M) sum_m log10 |D_m(s)|^2,
/// on the frequency domain [0, rate/2] in Hz (or [-rate/2, rate/2] for complex
/// series). Evaluation wraps periodically; the kernel is computed once per
/// evaluation point and shared by all subjects and segments.
class SpectrumCohort final : public ComponentFields {
 public:
  SpectrumCohort(const std::vector<std::vector<double>>& series, WelchSpec spec);
  SpectrumCohort(const std::vector<std::vector<cplx>>& series, WelchSpec spec);

  std::size_t size() const override { return dfts_.size(); }
  int dim() const override { return 1; }
  const Box& domain() const override { return domain_; }
  void jets(const Vec& s, int order, std::vector<Jet>& out) const override;

  const WelchSpec& spec() const { return spec_; }
  const WelchKernel& kernel() const { return kernel_; }
  std::size_t segments(std::size_t subject) const { return dfts_.at(subject).size(); }
  /// DFT of segment m of a subject (after demeaning, before windowing).
  const std::vector<cplx>& segment_dft(std::size_t subject, std::size_t m) const { return dfts_.at(subject).at(m); }
  /// Number of times a zero power was floored at 1e-300.
  long floored() const { return floored_.load(); }

 private:
  void build(const std::vector<std::vector<cplx>>& series, bool real_input);

  WelchSpec spec_;
  WelchKernel kernel_;
  Box domain_;
  std::vector<std::vector<std::vector<cplx>>> dfts_;  // subject, segment, frequency
  mutable std::atomic<long> floored_{0};
};

/// Single-subject spectrum field.
class SpectrumField final : public Field {
 public:
  SpectrumField(const std::vector<double>& series, const WelchSpec& spec);
  SpectrumField(const std::vector<cplx>& series, const WelchSpec& spec);
  int dim() const override { return 1; }
  const Box& domain() const override { return cohort_->domain(); }
  Jet jet(const Vec& s, int order = 2) const override;
  std::size_t segments() const { return cohort_->segments(0); }
  const SpectrumCohort& cohort() const { return *cohort_; }

 private:
  std::shared_ptr<SpectrumCohort> cohort_;
};

/// Peaks of the mean or Cohen's d spectrum in the given frequency balls, with
/// marginal and Bonferroni-joint regions.
PeakRegions spectrum_peak_regions(const std::shared_ptr<const SpectrumCohort>& spectra,
                                  const std::vector<Ball>& balls, double alpha, RegionTarget target,
                                  RegionMethod method = RegionMethod::Asymptotic, const McConfig& mc = {});

}  // namespace peakcr
