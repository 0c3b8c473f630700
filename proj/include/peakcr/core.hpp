#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace peakcr {

// Locations are at most 2-dimensional; fixed max sizes keep Eigen off the heap.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 2, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 2, 2>;
// vech vectors and their covariance (D(D+1)/2 <= 3).
using VechVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;
using VechMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;

inline constexpr int kMaxDim = 2;

// Error taxonomy. The CLI maps ConfigError -> 1, DataError -> 2, NumericError -> 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct DataError : Error {
  using Error::Error;
};
struct DomainError : DataError {
  using DataError::DataError;
};
struct NumericError : Error {
  using Error::Error;
};
struct DegenerateVariance : NumericError {
  using NumericError::NumericError;
};
struct SingularCovariance : NumericError {
  using NumericError::NumericError;
};
struct TruncationDominates : NumericError {
  using NumericError::NumericError;
};
struct Unsupported : ConfigError {
  using ConfigError::ConfigError;
};

/// Value, gradient and Hessian of a scalar field at one location.
/// `order` records how much of it was filled in (0, 1 or 2).
struct Jet {
  double value = 0.0;
  Vec grad;
  Mat hess;

  static Jet zero(int dim) {
    Jet j;
    j.grad = Vec::Zero(dim);
    j.hess = Mat::Zero(dim, dim);
    return j;
  }
};

/// Axis-aligned closed box.
struct Box {
  Vec lo;
  Vec hi;

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const Vec& s, double tol = 0.0) const {
    if (s.size() != lo.size()) return false;
    for (int i = 0; i < lo.size(); ++i) {
      if (!(s[i] >= lo[i] - tol && s[i] <= hi[i] + tol)) return false;
    }
    return true;
  }
};

/// Scalar C2 field over a box.
class Field {
 public:
  virtual ~Field() = default;
  virtual int dim() const = 0;
  virtual const Box& domain() const = 0;
  /// order: 0 value only, 1 adds gradient, 2 adds Hessian.
  virtual Jet jet(const Vec& s, int order = 2) const = 0;

  double value(const Vec& s) const { return jet(s, 0).value; }
  Vec grad(const Vec& s) const { return jet(s, 1).grad; }
  Mat hessian(const Vec& s) const { return jet(s, 2).hess; }
};

inline Vec make_vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

/// a a^T, assembled elementwise so the result is exactly symmetric.
inline Mat outer_sq(const Vec& a) {
  const int n = static_cast<int>(a.size());
  Mat m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k <= i; ++k) m(i, k) = m(k, i) = a[i] * a[k];
  }
  return m;
}

/// a b^T + b a^T, exactly symmetric.
inline Mat outer_sym(const Vec& a, const Vec& b) {
  const int n = static_cast<int>(a.size());
  Mat m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k <= i; ++k) m(i, k) = m(k, i) = a[i] * b[k] + b[i] * a[k];
  }
  return m;
}

inline int vech_size(int dim) { return dim * (dim + 1) / 2; }

}  // namespace peakcr
