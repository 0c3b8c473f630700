#pragma once

#include "peakcr/core.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace peakcr {

/// Regular grid in D = 1 or 2 dimensions. Point i (multi-index) sits at
/// origin + i * spacing. For D = 2 the flat index is row-major: i0 * shape[1] + i1.
struct Lattice {
  int dim = 1;
  std::array<std::size_t, kMaxDim> shape{1, 1};
  std::array<double, kMaxDim> spacing{1.0, 1.0};
  std::array<double, kMaxDim> origin{0.0, 0.0};

  static Lattice line(std::size_t n, double spacing = 1.0, double origin = 0.0);
  static Lattice grid(std::size_t rows, std::size_t cols, double spacing = 1.0);

  std::size_t size() const;
  Vec point(std::size_t flat) const;
  /// Bounding box of the lattice points.
  Box hull() const;
  void validate() const;
  /// Compares only the active axes.
  bool operator==(const Lattice& o) const;
};

struct LatticeSample {
  Lattice lattice;
  std::vector<double> values;

  void validate() const;
};

/// Kernel interface. Implementations supply K and its first two derivatives
/// at an offset d = s - l, plus the radius beyond which K is treated as zero.
class Kernel {
 public:
  virtual ~Kernel() = default;
  virtual double radius() const = 0;
  virtual Jet jet(const Vec& d, int order) const = 0;
};

/// Normalized isotropic Gaussian density. sigma = fwhm / (2 sqrt(2 ln 2)).
class GaussianKernel final : public Kernel {
 public:
  explicit GaussianKernel(double fwhm, double truncation_sigmas = 4.0);

  static double fwhm_to_sigma(double fwhm);

  double fwhm() const { return fwhm_; }
  double sigma() const { return sigma_; }
  double radius() const override { return radius_; }
  Jet jet(const Vec& d, int order) const override;
  /// Kernel value only, no truncation applied.
  double value(const Vec& d) const;

 private:
  double fwhm_;
  double sigma_;
  double radius_;
};

/// One lattice point that lies within the kernel radius of a location.
struct StencilEntry {
  std::size_t index;
  double k;
  Vec dk;
  Mat d2k;
};

/// Collects the kernel weights (and derivatives) of every lattice point
/// within kernel.radius() of s.
void kernel_stencil(const Lattice& lattice, const Kernel& kernel, const Vec& s, int order,
                    std::vector<StencilEntry>& out);

/// Jet of the pointwise standard deviation sqrt(sum_l K(s-l)^2) of the
/// convolution of unit-variance white noise; used to standardize noise fields.
Jet stencil_norm_jet(std::span<const StencilEntry> stencil, int dim, int order);

/// Divide a jet by a positive divisor jet (quotient rule, up to second order).
Jet divide_jet(const Jet& num, const Jet& den, int order);

/// Convolution field Y(s) = sum_l K(s - l) X(l), optionally divided by the
/// noise standard deviation sqrt(sum_l K(s - l)^2). Immutable.
class SmoothField final : public Field {
 public:
  SmoothField(LatticeSample sample, std::shared_ptr<const Kernel> kernel, Box domain,
              bool standardize = false);
  /// Domain defaults to the lattice hull inset by the kernel radius.
  SmoothField(LatticeSample sample, std::shared_ptr<const Kernel> kernel,
              bool standardize = false);

  int dim() const override { return sample_.lattice.dim; }
  const Box& domain() const override { return domain_; }
  Jet jet(const Vec& s, int order = 2) const override;

  const LatticeSample& sample() const { return sample_; }
  const Kernel& kernel() const { return *kernel_; }
  bool standardized() const { return standardize_; }

 private:
  LatticeSample sample_;
  std::shared_ptr<const Kernel> kernel_;
  Box domain_;
  bool standardize_;
};

/// Largest domain allowed for a lattice and kernel: the hull inset by the radius.
Box inset_domain(const Lattice& lattice, double radius);
/// Throws DomainError unless `domain` sits inside the hull with the radius inset.
void check_domain_inset(const Lattice& lattice, double radius, const Box& domain);

// --- file formats ---

/// 1D: one value per row. 2D: dense row-major matrix, comma separated.
LatticeSample read_csv_sample(const std::string& path, int dim);
void write_csv_sample(const std::string& path, const LatticeSample& sample);

/// Binary container: "PKCR", u32 version, u32 D, u64 count, u64 shape[D],
/// f64 spacing[D], f64 origin[D], then count * prod(shape) little-endian f64.
inline constexpr std::uint32_t kContainerVersion = 1;
void write_container(std::ostream& os, const Lattice& lattice,
                     std::span<const std::vector<double>> samples);
void write_container(const std::string& path, const Lattice& lattice,
                     std::span<const std::vector<double>> samples);
std::vector<LatticeSample> read_container(std::istream& is);
std::vector<LatticeSample> read_container(const std::string& path);

}  // namespace peakcr
