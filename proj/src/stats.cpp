#include "melpc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "melpc/common.hpp"

namespace melpc::stats {

namespace {

// Continued fraction for the incomplete beta function (modified Lentz).
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-14;
    constexpr double kTiny = 1e-300;

    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return h;
    }
    throw NumericError("incomplete beta continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x);
    const double front = std::exp(ln_front);
    // The continued fraction converges fast for x < (a+1)/(a+b+2).
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * betacf(a, b, x) / a;
    }
    return 1.0 - std::exp(std::lgamma(a + b) - std::lgamma(b) - std::lgamma(a) +
                          b * std::log(1.0 - x) + a * std::log(x)) *
                     betacf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, int nu) {
    if (nu < 1) throw NumericError("student_t_cdf: dof must be >= 1");
    if (t == 0.0) return 0.5;
    const double x = nu / (nu + t * t);
    const double tail = 0.5 * incomplete_beta(nu / 2.0, 0.5, x);
    return t > 0 ? 1.0 - tail : tail;
}

RegressionResult ols_regress(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw DataError("ols_regress: x and y lengths differ");
    const int n = static_cast<int>(x.size());
    if (n < 3) throw DataError("ols_regress: need at least 3 points");

    const double x_mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double y_mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (int i = 0; i < n; ++i) {
        const double dx = x[i] - x_mean, dy = y[i] - y_mean;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx <= 0.0) throw DataError("ols_regress: x is constant");

    RegressionResult res;
    res.n = n;
    res.slope = sxy / sxx;
    res.intercept = y_mean - res.slope * x_mean;

    if (syy <= 0.0) {
        // All y identical: zero slope, define r^2 = 0 and no evidence.
        res.slope = 0.0;
        res.intercept = y_mean;
        res.r_squared = 0.0;
        res.p_value = 1.0;
        return res;
    }

    double ss_res = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = y[i] - (res.intercept + res.slope * x[i]);
        ss_res += r * r;
    }
    res.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);

    const int dof = n - 2;
    const double se2 = ss_res / dof / sxx;
    if (se2 <= 0.0) {
        // Perfect fit: p underflows; keep it inside (0, 1].
        res.p_value = std::numeric_limits<double>::min();
        return res;
    }
    const double t = res.slope / std::sqrt(se2);
    const double p = 2.0 * (1.0 - student_t_cdf(std::fabs(t), dof));
    res.p_value = std::clamp(p, std::numeric_limits<double>::min(), 1.0);
    return res;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
    const int n = static_cast<int>(v.size());
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    int i = 0;
    while (i < n) {
        int j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = (i + j) / 2.0 + 1.0;
        for (int k = i; k <= j; ++k) ranks[idx[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

RegressionResult spearman(const std::vector<double>& x, const std::vector<double>& y) {
    auto rx = average_ranks(x);
    auto ry = average_ranks(y);
    RegressionResult res = ols_regress(rx, ry);
    // Report rho (the rank correlation) as the slope, with its own p.
    const int n = res.n;
    double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxx = 0, syy = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
        sxy += (rx[i] - mx) * (ry[i] - my);
    }
    if (syy <= 0.0) {
        res.slope = 0.0;
        return res;
    }
    const double rho = sxy / std::sqrt(sxx * syy);
    res.slope = rho;
    res.intercept = 0.0;
    res.r_squared = rho * rho;
    if (std::fabs(rho) >= 1.0) {
        res.p_value = std::numeric_limits<double>::min();
    } else {
        const int dof = n - 2;
        const double t = rho * std::sqrt(dof / (1.0 - rho * rho));
        res.p_value = std::clamp(2.0 * (1.0 - student_t_cdf(std::fabs(t), dof)),
                                 std::numeric_limits<double>::min(), 1.0);
    }
    return res;
}

double sign_test_p(int k, int n) {
    if (n <= 0 || k < 0 || k > n) throw DataError("sign_test_p: bad arguments");
    // P(X >= k), X ~ Binomial(n, 1/2), summed in log space.
    double p = 0.0;
    for (int i = k; i <= n; ++i) {
        const double ln_c = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0);
        p += std::exp(ln_c - n * std::log(2.0));
    }
    return std::min(p, 1.0);
}

}  // namespace melpc::stats
