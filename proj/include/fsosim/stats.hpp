#pragma once

#include <span>

namespace fsosim::stats {

double mean(std::span<const double> xs);
double sample_sd(std::span<const double> xs);

/// Regularized incomplete beta function I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// Survival function of Student's t: P(T > t) with `df` degrees of freedom.
double student_t_sf(double t, double df);

/// One-sided paired t-test p-value for H1: mean(a - b) > 0. The spans must
/// be the same length (pairs share a seed). A zero-variance difference
/// collapses to p = 0 or 1 by the sign of the mean.
double paired_t_pvalue_greater(std::span<const double> a, std::span<const double> b);

}  // namespace fsosim::stats
