#pragma once

#include "peakcr/core.hpp"
#include "peakcr/grid_field.hpp"

#include <memory>
#include <vector>

namespace peakcr {

/// A set of per-subject fields over one shared domain, evaluated together so
/// implementations can share work (kernel weights) across subjects.
class ComponentFields {
 public:
  virtual ~ComponentFields() = default;
  virtual std::size_t size() const = 0;
  virtual int dim() const = 0;
  virtual const Box& domain() const = 0;
  /// Fills out[n] with the jet of subject n at s.
  virtual void jets(const Vec& s, int order, std::vector<Jet>& out) const = 0;
};

/// Subjects given as independent Field objects that share one domain.
class FieldList final : public ComponentFields {
 public:
  explicit FieldList(std::vector<std::shared_ptr<const Field>> fields);
  std::size_t size() const override { return fields_.size(); }
  int dim() const override { return fields_.front()->dim(); }
  const Box& domain() const override { return fields_.front()->domain(); }
  void jets(const Vec& s, int order, std::vector<Jet>& out) const override;

 private:
  std::vector<std::shared_ptr<const Field>> fields_;
};

/// Subjects sharing one lattice, kernel and domain: Y_n = conv_n / norm + offset.
/// `values` holds subject n's lattice values at [n * lattice.size(), (n+1) * lattice.size()).
/// The optional offset field (a deterministic signal) is added to every subject.
class LatticeCohort final : public ComponentFields {
 public:
  LatticeCohort(Lattice lattice, std::vector<double> values, std::size_t subjects,
                std::shared_ptr<const Kernel> kernel, Box domain, bool standardize,
                std::shared_ptr<const Field> offset = nullptr);

  std::size_t size() const override { return subjects_; }
  int dim() const override { return lattice_.dim; }
  const Box& domain() const override { return domain_; }
  void jets(const Vec& s, int order, std::vector<Jet>& out) const override;

  const Lattice& lattice() const { return lattice_; }
  const Kernel& kernel() const { return *kernel_; }
  std::shared_ptr<const Kernel> kernel_ptr() const { return kernel_; }
  bool standardized() const { return standardize_; }
  const std::shared_ptr<const Field>& offset() const { return offset_; }
  std::span<const double> subject_values(std::size_t n) const;
  /// The SmoothField of one subject (without the offset).
  SmoothField subject_field(std::size_t n) const;

 private:
  Lattice lattice_;
  std::vector<double> values_;
  std::size_t subjects_;
  std::shared_ptr<const Kernel> kernel_;
  Box domain_;
  bool standardize_;
  std::shared_ptr<const Field> offset_;
};

enum class DerivedFieldKind { Mean, Variance, TStat, CohensD };

const char* to_string(DerivedFieldKind k);

/// Pointwise sample statistics of a cohort at one location.
struct CohortMoments {
  std::size_t n = 0;
  Jet mean;
  Jet var;
};

/// Immutable cohort of N >= 2 component fields with the sample-statistic fields
/// built on top of them. Variance uses the N-1 denominator throughout.
class FieldCohort {
 public:
  explicit FieldCohort(std::shared_ptr<const ComponentFields> components,
                       double var_floor = 1e-12);

  std::size_t n() const { return components_->size(); }
  int dim() const { return components_->dim(); }
  const Box& domain() const { return components_->domain(); }
  const ComponentFields& components() const { return *components_; }
  std::shared_ptr<const ComponentFields> components_ptr() const { return components_; }
  double var_floor() const { return var_floor_; }

  void subject_jets(const Vec& s, int order, std::vector<Jet>& out) const;
  CohortMoments moments(const Vec& s, int order) const;

  Jet mean_jet(const Vec& s, int order = 2) const;
  Jet var_jet(const Vec& s, int order = 2) const;
  /// Cohen's d = mean / sd with derivatives; throws DegenerateVariance.
  Jet d_jet(const Vec& s, int order = 2) const;
  /// One-sample t = sqrt(N) d.
  Jet t_jet(const Vec& s, int order = 2) const;

  double mean_eval(const Vec& s) const { return mean_jet(s, 0).value; }
  Vec mean_grad(const Vec& s) const { return mean_jet(s, 1).grad; }
  Mat mean_hessian(const Vec& s) const { return mean_jet(s, 2).hess; }
  double var_eval(const Vec& s) const { return var_jet(s, 0).value; }
  Vec var_grad(const Vec& s) const { return var_jet(s, 1).grad; }
  Mat var_hessian(const Vec& s) const { return var_jet(s, 2).hess; }
  double t_eval(const Vec& s) const { return t_jet(s, 0).value; }
  double d_eval(const Vec& s) const { return d_jet(s, 0).value; }
  Vec d_grad(const Vec& s) const { return d_jet(s, 1).grad; }
  Mat d_hessian(const Vec& s) const { return d_jet(s, 2).hess; }

  Jet derived_jet(DerivedFieldKind kind, const Vec& s, int order = 2) const;

 private:
  std::shared_ptr<const ComponentFields> components_;
  double var_floor_;
};

/// Moments from per-subject jets (shared by the cohort and the covariance code).
CohortMoments moments_from_jets(const std::vector<Jet>& jets, int dim, int order);
/// Cohen's d jet from mean and variance jets by the quotient rule.
Jet cohens_d_from_moments(const Jet& mean, const Jet& var, int order);

/// A cohort statistic exposed through the generic Field interface.
class DerivedField final : public Field {
 public:
  DerivedField(FieldCohort cohort, DerivedFieldKind kind)
      : cohort_(std::move(cohort)), kind_(kind) {}
  int dim() const override { return cohort_.dim(); }
  const Box& domain() const override { return cohort_.domain(); }
  Jet jet(const Vec& s, int order = 2) const override { return cohort_.derived_jet(kind_, s, order); }
  const FieldCohort& cohort() const { return cohort_; }
  DerivedFieldKind kind() const { return kind_; }

 private:
  FieldCohort cohort_;
  DerivedFieldKind kind_;
};

}  // namespace peakcr
