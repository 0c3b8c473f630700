#pragma once

namespace peakcr {

/// Regularized lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);

double chi2_cdf(double x, int dof);

/// Quantile of the chi-squared distribution: the x with chi2_cdf(x, dof) = p.
/// Solved by safeguarded Newton iteration on the CDF.
double chi2_quantile(double p, int dof);

double normal_cdf(double x);

}  // namespace peakcr
