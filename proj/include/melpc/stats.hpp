#pragma once

#include <vector>

namespace melpc::stats {

struct RegressionResult {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double p_value = 1.0;  // two-sided, H0: slope == 0
    int n = 0;
};

// Ordinary least squares of y against x. Throws DataError for n < 3 or
// constant x. A constant y is the degenerate r^2 = 0 path, not an error.
RegressionResult ols_regress(const std::vector<double>& x, const std::vector<double>& y);

// Regularized incomplete beta I_x(a,b), continued-fraction evaluation to 1e-12.
double incomplete_beta(double a, double b, double x);

// Student-t CDF with nu degrees of freedom.
double student_t_cdf(double t, int nu);

// Spearman rank correlation with a t-approximation p-value (ties get average
// ranks).
RegressionResult spearman(const std::vector<double>& x, const std::vector<double>& y);

// One-sided sign test: probability of >= k successes in n fair coin flips.
double sign_test_p(int k, int n);

}  // namespace melpc::stats
