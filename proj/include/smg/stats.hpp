#pragma once

#include <span>
#include <vector>

namespace smg {

struct StatResult {
    double statistic = 0.0; // F or H
    double p_value = 1.0;
    double df1 = 0.0;
    double df2 = 0.0; // ANOVA only
};

/// Regularized incomplete beta I_x(a, b).
double reg_inc_beta(double x, double a, double b);
/// Regularized lower incomplete gamma P(a, x).
double reg_gamma_p(double a, double x);
/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double reg_gamma_q(double a, double x);
/// Chi-square survival function.
double chi2_sf(double x, double df);
/// F-distribution survival function.
double f_sf(double f, double df1, double df2);

/// One-way ANOVA. Throws ValidationError("zero variance") when the pooled within-group
/// variance vanishes.
StatResult anova_oneway(const std::vector<std::vector<double>>& groups);

/// Kruskal-Wallis H with midranks and tie correction; chi-square p-value with g-1 df.
StatResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

} // namespace smg
