#include "peakcr/grid_field.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

namespace peakcr {

Lattice Lattice::line(std::size_t n, double spacing, double origin) {
  Lattice l;
  l.dim = 1;
  l.shape = {n, 1};
  l.spacing = {spacing, 1.0};
  l.origin = {origin, 0.0};
  return l;
}

Lattice Lattice::grid(std::size_t rows, std::size_t cols, double spacing) {
  Lattice l;
  l.dim = 2;
  l.shape = {rows, cols};
  l.spacing = {spacing, spacing};
  l.origin = {0.0, 0.0};
  return l;
}

std::size_t Lattice::size() const { return dim == 1 ? shape[0] : shape[0] * shape[1]; }

Vec Lattice::point(std::size_t flat) const {
  Vec p(dim);
  if (dim == 1) {
    p[0] = origin[0] + static_cast<double>(flat) * spacing[0];
  } else {
    p[0] = origin[0] + static_cast<double>(flat / shape[1]) * spacing[0];
    p[1] = origin[1] + static_cast<double>(flat % shape[1]) * spacing[1];
  }
  return p;
}

Box Lattice::hull() const {
  Box b{Vec(dim), Vec(dim)};
  for (int a = 0; a < dim; ++a) {
    b.lo[a] = origin[a];
    b.hi[a] = origin[a] + static_cast<double>(shape[a] - 1) * spacing[a];
  }
  return b;
}

void Lattice::validate() const {
  if (dim != 1 && dim != 2) throw ConfigError("lattice: dimension must be 1 or 2");
  for (int a = 0; a < dim; ++a) {
    if (shape[a] == 0) throw ConfigError("lattice: empty axis");
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
      throw ConfigError("lattice: spacing must be positive");
    }
  }
}

bool Lattice::operator==(const Lattice& o) const {
  if (dim != o.dim) return false;
  for (int a = 0; a < dim; ++a) {
    if (shape[a] != o.shape[a] || spacing[a] != o.spacing[a] || origin[a] != o.origin[a]) return false;
  }
  return true;
}

void LatticeSample::validate() const {
  lattice.validate();
  if (values.size() != lattice.size()) {
    throw DataError("lattice sample: value count " + std::to_string(values.size()) +
                    " does not match lattice size " + std::to_string(lattice.size()));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw DataError("lattice sample: non-finite value");
  }
}

GaussianKernel::GaussianKernel(double fwhm, double truncation_sigmas)
    : fwhm_(fwhm), sigma_(fwhm_to_sigma(fwhm)), radius_(truncation_sigmas * sigma_) {
  if (!(fwhm > 0.0) || !std::isfinite(fwhm)) throw ConfigError("kernel: fwhm must be positive");
  if (!(truncation_sigmas > 0.0)) throw ConfigError("kernel: truncation radius must be positive");
}

double GaussianKernel::fwhm_to_sigma(double fwhm) {
  return fwhm / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
}

double GaussianKernel::value(const Vec& d) const {
  const double s2 = sigma_ * sigma_;
  const double norm = std::pow(2.0 * std::numbers::pi * s2, -0.5 * static_cast<double>(d.size()));
  return norm * std::exp(-0.5 * d.squaredNorm() / s2);
}

Jet GaussianKernel::jet(const Vec& d, int order) const {
  const int dim = static_cast<int>(d.size());
  const double inv_s2 = 1.0 / (sigma_ * sigma_);
  Jet j;
  j.value = value(d);
  if (order >= 1) j.grad = -inv_s2 * j.value * d;
  if (order >= 2) {
    j.hess.resize(dim, dim);
    const double c = inv_s2 * inv_s2 * j.value;
    for (int a = 0; a < dim; ++a) {
      for (int b = 0; b <= a; ++b) {
        const double v = c * (d[a] * d[b]) - (a == b ? inv_s2 * j.value : 0.0);
        j.hess(a, b) = v;
        j.hess(b, a) = v;
      }
    }
  }
  return j;
}

void kernel_stencil(const Lattice& lat, const Kernel& kernel, const Vec& s, int order,
                    std::vector<StencilEntry>& out) {
  out.clear();
  const double r = kernel.radius();
  const double r2 = r * r;
  std::array<long, kMaxDim> lo{0, 0};
  std::array<long, kMaxDim> hi{0, 0};
  for (int a = 0; a < lat.dim; ++a) {
    const double u0 = (s[a] - r - lat.origin[a]) / lat.spacing[a];
    const double u1 = (s[a] + r - lat.origin[a]) / lat.spacing[a];
    lo[a] = std::max<long>(0, static_cast<long>(std::ceil(u0)));
    hi[a] = std::min<long>(static_cast<long>(lat.shape[a]) - 1, static_cast<long>(std::floor(u1)));
  }
  Vec d(lat.dim);
  if (lat.dim == 1) {
    for (long i = lo[0]; i <= hi[0]; ++i) {
      d[0] = s[0] - (lat.origin[0] + static_cast<double>(i) * lat.spacing[0]);
      if (d[0] * d[0] > r2) continue;
      Jet kj = kernel.jet(d, order);
      out.push_back({static_cast<std::size_t>(i), kj.value, std::move(kj.grad), std::move(kj.hess)});
    }
    return;
  }
  for (long i = lo[0]; i <= hi[0]; ++i) {
    d[0] = s[0] - (lat.origin[0] + static_cast<double>(i) * lat.spacing[0]);
    for (long k = lo[1]; k <= hi[1]; ++k) {
      d[1] = s[1] - (lat.origin[1] + static_cast<double>(k) * lat.spacing[1]);
      if (d.squaredNorm() > r2) continue;
      Jet kj = kernel.jet(d, order);
      out.push_back({static_cast<std::size_t>(i) * lat.shape[1] + static_cast<std::size_t>(k),
                     kj.value, std::move(kj.grad), std::move(kj.hess)});
    }
  }
}

Jet divide_jet(const Jet& num, const Jet& den, int order) {
  Jet out;
  const double inv = 1.0 / den.value;
  out.value = num.value * inv;
  if (order >= 1) out.grad = (num.grad - out.value * den.grad) * inv;
  if (order >= 2) {
    // (n/q)'' = n''/q - (n' q'^T + q' n'^T)/q^2 + 2 n q' q'^T / q^3 - n q''/q^2
    const double inv2 = inv * inv;
    out.hess = num.hess * inv - outer_sym(num.grad, den.grad) * inv2 +
               (2.0 * num.value * inv2 * inv) * outer_sq(den.grad) -
               (num.value * inv2) * den.hess;
  }
  return out;
}

Jet stencil_norm_jet(std::span<const StencilEntry> stencil, int dim, int order) {
  // q = sum K^2; the divisor is sqrt(q).
  Jet q = Jet::zero(dim);
  for (const auto& e : stencil) {
    q.value += e.k * e.k;
    if (order >= 1) q.grad += 2.0 * e.k * e.dk;
    if (order >= 2) q.hess += 2.0 * (outer_sq(e.dk) + e.k * e.d2k);
  }
  Jet out;
  out.value = std::sqrt(q.value);
  if (order >= 1) out.grad = q.grad / (2.0 * out.value);
  if (order >= 2) {
    out.hess = q.hess / (2.0 * out.value) - outer_sq(q.grad) / (4.0 * q.value * out.value);
  }
  return out;
}

Box inset_domain(const Lattice& lattice, double radius) {
  Box b = lattice.hull();
  for (int a = 0; a < lattice.dim; ++a) {
    b.lo[a] += radius;
    b.hi[a] -= radius;
  }
  return b;
}

void check_domain_inset(const Lattice& lattice, double radius, const Box& domain) {
  if (domain.dim() != lattice.dim || domain.hi.size() != lattice.dim) {
    throw DomainError("domain dimension does not match lattice");
  }
  const Box allowed = inset_domain(lattice, radius);
  constexpr double tol = 1e-9;
  for (int a = 0; a < lattice.dim; ++a) {
    if (!(domain.lo[a] <= domain.hi[a])) throw DomainError("domain box is empty");
    if (domain.lo[a] < allowed.lo[a] - tol || domain.hi[a] > allowed.hi[a] + tol) {
      throw DomainError("domain must lie inside the lattice hull inset by the kernel radius");
    }
  }
}

SmoothField::SmoothField(LatticeSample sample, std::shared_ptr<const Kernel> kernel, Box domain,
                         bool standardize)
    : sample_(std::move(sample)), kernel_(std::move(kernel)), domain_(std::move(domain)),
      standardize_(standardize) {
  sample_.validate();
  if (!kernel_) throw ConfigError("smooth field: null kernel");
  check_domain_inset(sample_.lattice, kernel_->radius(), domain_);
}

SmoothField::SmoothField(LatticeSample sample, std::shared_ptr<const Kernel> kernel,
                         bool standardize)
    : SmoothField(sample, kernel, inset_domain(sample.lattice, kernel ? kernel->radius() : 0.0),
                  standardize) {}

Jet SmoothField::jet(const Vec& s, int order) const {
  if (!domain_.contains(s, 1e-9)) throw DomainError("smooth field: location outside domain");
  thread_local std::vector<StencilEntry> stencil;
  kernel_stencil(sample_.lattice, *kernel_, s, order, stencil);
  const int D = dim();
  Jet y = Jet::zero(D);
  for (const auto& e : stencil) {
    const double x = sample_.values[e.index];
    y.value += e.k * x;
    if (order >= 1) y.grad += x * e.dk;
    if (order >= 2) y.hess += x * e.d2k;
  }
  if (!standardize_) return y;
  return divide_jet(y, stencil_norm_jet(stencil, D, order), order);
}

// --- CSV ---

LatticeSample read_csv_sample(const std::string& path, int dim) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw DataError(path + ": non-numeric cell '" + cell + "'");
      }
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path + ": no data");
  LatticeSample out;
  if (dim == 1) {
    out.lattice = Lattice::line(rows.size());
    for (const auto& r : rows) {
      if (r.size() != 1) throw DataError(path + ": 1D CSV expects one value per row");
      out.values.push_back(r[0]);
    }
  } else if (dim == 2) {
    const std::size_t cols = rows.front().size();
    out.lattice = Lattice::grid(rows.size(), cols);
    for (const auto& r : rows) {
      if (r.size() != cols) throw DataError(path + ": ragged 2D CSV");
      out.values.insert(out.values.end(), r.begin(), r.end());
    }
  } else {
    throw ConfigError("csv: dimension must be 1 or 2");
  }
  out.validate();
  return out;
}

void write_csv_sample(const std::string& path, const LatticeSample& sample) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path);
  os.precision(17);
  const auto& lat = sample.lattice;
  if (lat.dim == 1) {
    for (double v : sample.values) os << v << '\n';
    return;
  }
  for (std::size_t i = 0; i < lat.shape[0]; ++i) {
    for (std::size_t k = 0; k < lat.shape[1]; ++k) {
      if (k) os << ',';
      os << sample.values[i * lat.shape[1] + k];
    }
    os << '\n';
  }
}

// --- binary container ---

namespace {

static_assert(std::endian::native == std::endian::little, "container I/O assumes little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  os.write(buf, sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  char buf[sizeof(T)];
  if (!is.read(buf, sizeof(T))) throw DataError("container: truncated header");
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

void write_container(std::ostream& os, const Lattice& lattice,
                     std::span<const std::vector<double>> samples) {
  lattice.validate();
  os.write("PKCR", 4);
  put<std::uint32_t>(os, kContainerVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(lattice.dim));
  put<std::uint64_t>(os, samples.size());
  for (int a = 0; a < lattice.dim; ++a) put<std::uint64_t>(os, lattice.shape[a]);
  for (int a = 0; a < lattice.dim; ++a) put<double>(os, lattice.spacing[a]);
  for (int a = 0; a < lattice.dim; ++a) put<double>(os, lattice.origin[a]);
  for (const auto& s : samples) {
    if (s.size() != lattice.size()) throw DataError("container: sample size mismatch");
    os.write(reinterpret_cast<const char*>(s.data()),
             static_cast<std::streamsize>(s.size() * sizeof(double)));
  }
  if (!os) throw DataError("container: write failed");
}

void write_container(const std::string& path, const Lattice& lattice,
                     std::span<const std::vector<double>> samples) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path);
  write_container(os, lattice, samples);
}

std::vector<LatticeSample> read_container(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "PKCR", 4) != 0) {
    throw DataError("container: bad magic");
  }
  const auto version = get<std::uint32_t>(is);
  if (version != kContainerVersion) {
    throw DataError("container: unsupported version " + std::to_string(version));
  }
  Lattice lat;
  lat.dim = static_cast<int>(get<std::uint32_t>(is));
  if (lat.dim != 1 && lat.dim != 2) throw DataError("container: dimension must be 1 or 2");
  const auto count = get<std::uint64_t>(is);
  for (int a = 0; a < lat.dim; ++a) lat.shape[a] = get<std::uint64_t>(is);
  for (int a = 0; a < lat.dim; ++a) lat.spacing[a] = get<double>(is);
  for (int a = 0; a < lat.dim; ++a) lat.origin[a] = get<double>(is);
  try {
    lat.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("container: ") + e.what());
  }
  std::vector<LatticeSample> out;
  out.reserve(count);
  for (std::uint64_t c = 0; c < count; ++c) {
    LatticeSample s{lat, std::vector<double>(lat.size())};
    if (!is.read(reinterpret_cast<char*>(s.values.data()),
                 static_cast<std::streamsize>(s.values.size() * sizeof(double)))) {
      throw DataError("container: truncated payload");
    }
    s.validate();
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<LatticeSample> read_container(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  return read_container(is);
}

}  // namespace peakcr
