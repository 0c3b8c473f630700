#include "peakcr/sample_fields.hpp"

#include <cmath>

namespace peakcr {

FieldList::FieldList(std::vector<std::shared_ptr<const Field>> fields) : fields_(std::move(fields)) {
  if (fields_.empty()) throw ConfigError("field list: no fields");
  const Box& d0 = fields_.front()->domain();
  for (const auto& f : fields_) {
    if (!f) throw ConfigError("field list: null field");
    const Box& d = f->domain();
    if (f->dim() != fields_.front()->dim() || d.lo != d0.lo || d.hi != d0.hi) {
      throw ConfigError("field list: all subjects must share the same domain");
    }
  }
}

void FieldList::jets(const Vec& s, int order, std::vector<Jet>& out) const {
  out.resize(fields_.size());
  for (std::size_t i = 0; i < fields_.size(); ++i) out[i] = fields_[i]->jet(s, order);
}

LatticeCohort::LatticeCohort(Lattice lattice, std::vector<double> values, std::size_t subjects,
                             std::shared_ptr<const Kernel> kernel, Box domain, bool standardize,
                             std::shared_ptr<const Field> offset)
    : lattice_(lattice), values_(std::move(values)), subjects_(subjects), kernel_(std::move(kernel)),
      domain_(std::move(domain)), standardize_(standardize), offset_(std::move(offset)) {
  lattice_.validate();
  if (!kernel_) throw ConfigError("lattice cohort: null kernel");
  if (subjects_ == 0 || values_.size() != subjects_ * lattice_.size()) {
    throw DataError("lattice cohort: value count does not match subjects x lattice size");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw DataError("lattice cohort: non-finite value");
  }
  check_domain_inset(lattice_, kernel_->radius(), domain_);
}

std::span<const double> LatticeCohort::subject_values(std::size_t n) const {
  return std::span<const double>(values_).subspan(n * lattice_.size(), lattice_.size());
}

SmoothField LatticeCohort::subject_field(std::size_t n) const {
  auto v = subject_values(n);
  return SmoothField(LatticeSample{lattice_, std::vector<double>(v.begin(), v.end())}, kernel_,
                     domain_, standardize_);
}

void LatticeCohort::jets(const Vec& s, int order, std::vector<Jet>& out) const {
  if (!domain_.contains(s, 1e-9)) throw DomainError("cohort: location outside domain");
  thread_local std::vector<StencilEntry> stencil;
  kernel_stencil(lattice_, *kernel_, s, order, stencil);
  const int D = lattice_.dim;
  const std::size_t P = lattice_.size();
  out.resize(subjects_);

  Jet norm;
  if (standardize_) norm = stencil_norm_jet(stencil, D, order);
  Jet off;
  if (offset_) off = offset_->jet(s, order);

  for (std::size_t n = 0; n < subjects_; ++n) {
    const double* x = values_.data() + n * P;
    Jet y = Jet::zero(D);
    if (order == 0) {
      for (const auto& e : stencil) y.value += e.k * x[e.index];
    } else if (order == 1) {
      for (const auto& e : stencil) {
        const double v = x[e.index];
        y.value += e.k * v;
        y.grad += v * e.dk;
      }
    } else {
      for (const auto& e : stencil) {
        const double v = x[e.index];
        y.value += e.k * v;
        y.grad += v * e.dk;
        y.hess += v * e.d2k;
      }
    }
    if (standardize_) y = divide_jet(y, norm, order);
    if (offset_) {
      y.value += off.value;
      if (order >= 1) y.grad += off.grad;
      if (order >= 2) y.hess += off.hess;
    }
    out[n] = std::move(y);
  }
}

const char* to_string(DerivedFieldKind k) {
  switch (k) {
    case DerivedFieldKind::Mean: return "mean";
    case DerivedFieldKind::Variance: return "variance";
    case DerivedFieldKind::TStat: return "t";
    case DerivedFieldKind::CohensD: return "cohensd";
  }
  return "?";
}

CohortMoments moments_from_jets(const std::vector<Jet>& jets, int dim, int order) {
  const std::size_t N = jets.size();
  CohortMoments m;
  m.n = N;
  m.mean = Jet::zero(dim);
  m.var = Jet::zero(dim);
  for (const auto& j : jets) {
    m.mean.value += j.value;
    if (order >= 1) m.mean.grad += j.grad;
    if (order >= 2) m.mean.hess += j.hess;
  }
  const double invN = 1.0 / static_cast<double>(N);
  m.mean.value *= invN;
  if (order >= 1) m.mean.grad *= invN;
  if (order >= 2) m.mean.hess *= invN;

  for (const auto& j : jets) {
    const double r = j.value - m.mean.value;
    m.var.value += r * r;
    if (order >= 1) {
      const Vec dr = j.grad - m.mean.grad;
      m.var.grad += r * dr;
      if (order >= 2) m.var.hess += outer_sq(dr) + r * (j.hess - m.mean.hess);
    }
  }
  const double invN1 = 1.0 / static_cast<double>(N - 1);
  m.var.value *= invN1;
  if (order >= 1) m.var.grad *= 2.0 * invN1;
  if (order >= 2) m.var.hess *= 2.0 * invN1;
  return m;
}

Jet cohens_d_from_moments(const Jet& mu, const Jet& v, int order) {
  // d = mu / sqrt(v)
  //   grad d = grad mu / v^1/2 - mu grad v / (2 v^3/2)
  //   hess d = hess mu / v^1/2 - (grad mu grad v^T + grad v grad mu^T) / (2 v^3/2)
  //            + 3 mu grad v grad v^T / (4 v^5/2) - mu hess v / (2 v^3/2)
  const double sd = std::sqrt(v.value);
  const double v32 = v.value * sd;
  Jet d;
  d.value = mu.value / sd;
  if (order >= 1) d.grad = mu.grad / sd - (mu.value / (2.0 * v32)) * v.grad;
  if (order >= 2) {
    d.hess = mu.hess / sd - outer_sym(mu.grad, v.grad) / (2.0 * v32) +
             (3.0 * mu.value / (4.0 * v32 * v.value)) * outer_sq(v.grad) -
             (mu.value / (2.0 * v32)) * v.hess;
  }
  return d;
}

FieldCohort::FieldCohort(std::shared_ptr<const ComponentFields> components, double var_floor)
    : components_(std::move(components)), var_floor_(var_floor) {
  if (!components_) throw ConfigError("cohort: null components");
  if (components_->size() < 2) throw ConfigError("cohort: need at least two subjects");
}

void FieldCohort::subject_jets(const Vec& s, int order, std::vector<Jet>& out) const {
  components_->jets(s, order, out);
}

CohortMoments FieldCohort::moments(const Vec& s, int order) const {
  thread_local std::vector<Jet> jets;
  components_->jets(s, order, jets);
  return moments_from_jets(jets, dim(), order);
}

Jet FieldCohort::mean_jet(const Vec& s, int order) const {
  thread_local std::vector<Jet> jets;
  components_->jets(s, order, jets);
  const int D = dim();
  Jet m = Jet::zero(D);
  for (const auto& j : jets) {
    m.value += j.value;
    if (order >= 1) m.grad += j.grad;
    if (order >= 2) m.hess += j.hess;
  }
  const double invN = 1.0 / static_cast<double>(jets.size());
  m.value *= invN;
  if (order >= 1) m.grad *= invN;
  if (order >= 2) m.hess *= invN;
  return m;
}

Jet FieldCohort::var_jet(const Vec& s, int order) const { return moments(s, order).var; }

Jet FieldCohort::d_jet(const Vec& s, int order) const {
  const CohortMoments m = moments(s, order);
  if (!(m.var.value > var_floor_)) {
    throw DegenerateVariance("sample variance " + std::to_string(m.var.value) +
                             " at or below floor; t and Cohen's d undefined");
  }
  return cohens_d_from_moments(m.mean, m.var, order);
}

Jet FieldCohort::t_jet(const Vec& s, int order) const {
  Jet d = d_jet(s, order);
  const double rootN = std::sqrt(static_cast<double>(n()));
  d.value *= rootN;
  if (order >= 1) d.grad *= rootN;
  if (order >= 2) d.hess *= rootN;
  return d;
}

Jet FieldCohort::derived_jet(DerivedFieldKind kind, const Vec& s, int order) const {
  switch (kind) {
    case DerivedFieldKind::Mean: return mean_jet(s, order);
    case DerivedFieldKind::Variance: return var_jet(s, order);
    case DerivedFieldKind::TStat: return t_jet(s, order);
    case DerivedFieldKind::CohensD: return d_jet(s, order);
  }
  throw ConfigError("unknown derived field kind");
}

}  // namespace peakcr
