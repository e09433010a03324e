#pragma once

#include <span>

namespace certattack::special {

/// Standard normal CDF.
double normal_cdf(double z);

/// Standard normal quantile. Acklam's rational approximation followed by one
/// Halley step against erfc; absolute error well below 1e-12 on (0, 1).
double normal_quantile(double u);

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

/// q-quantile of Beta(a, b) by bisection on incomplete_beta.
double beta_quantile(double q, double a, double b);

/// Two-sided p-value of Student's t statistic with `dof` degrees of freedom.
double student_t_two_sided(double t, double dof);

struct RankCorrelation {
  double rho = 0.0;
  double p_value = 1.0;  // two-sided, t approximation
};

/// Spearman rank correlation with average ranks for ties.
RankCorrelation spearman(std::span<const double> x, std::span<const double> y);

}  // namespace certattack::special
