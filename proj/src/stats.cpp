#include "smg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "smg/error.hpp"

namespace smg {

namespace {

constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;
constexpr int kMaxIter = 100000;

// Modified Lentz evaluation of the incomplete-beta continued fraction.
double beta_cf(double a, double b, double x) {
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
    throw Error("incomplete beta did not converge");
}

double gamma_series(double a, double x) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int n = 0; n < kMaxIter; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * kEps) return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
    throw Error("incomplete gamma series did not converge");
}

double gamma_cf(double a, double x) {
    double b = x + 1.0 - a, c = 1.0 / kTiny, d = 1.0 / b, h = d;
    for (int i = 1; i <= kMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
    }
    throw Error("incomplete gamma fraction did not converge");
}

void check_groups(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) throw ValidationError("need at least 2 groups");
    for (const auto& g : groups) {
        if (g.empty()) throw ValidationError("empty group");
        for (double v : g)
            if (!std::isfinite(v)) throw ValidationError("non-finite value in group");
    }
}

} // namespace

double reg_inc_beta(double x, double a, double b) {
    if (!(a > 0) || !(b > 0)) throw ValidationError("reg_inc_beta requires a, b > 0");
    if (!(x >= 0.0 && x <= 1.0)) throw ValidationError("reg_inc_beta requires x in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double lbt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double bt = std::exp(lbt);
    if (x < (a + 1.0) / (a + b + 2.0)) return std::clamp(bt * beta_cf(a, b, x) / a, 0.0, 1.0);
    return std::clamp(1.0 - bt * beta_cf(b, a, 1.0 - x) / b, 0.0, 1.0);
}

double reg_gamma_p(double a, double x) {
    if (!(a > 0)) throw ValidationError("reg_gamma requires a > 0");
    if (!(x >= 0)) throw ValidationError("reg_gamma requires x >= 0");
    if (x == 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    if (x < a + 1.0) return std::clamp(gamma_series(a, x), 0.0, 1.0);
    return std::clamp(1.0 - gamma_cf(a, x), 0.0, 1.0);
}

double reg_gamma_q(double a, double x) {
    if (!(a > 0)) throw ValidationError("reg_gamma requires a > 0");
    if (!(x >= 0)) throw ValidationError("reg_gamma requires x >= 0");
    if (x == 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    if (x < a + 1.0) return std::clamp(1.0 - gamma_series(a, x), 0.0, 1.0);
    return std::clamp(gamma_cf(a, x), 0.0, 1.0);
}

double chi2_sf(double x, double df) {
    if (!(df > 0)) throw ValidationError("chi2_sf requires df > 0");
    if (!(x >= 0)) throw ValidationError("chi2_sf requires x >= 0");
    return reg_gamma_q(df / 2.0, x / 2.0);
}

double f_sf(double f, double df1, double df2) {
    if (!(df1 > 0) || !(df2 > 0)) throw ValidationError("f_sf requires positive degrees of freedom");
    if (!(f >= 0)) throw ValidationError("f_sf requires f >= 0");
    if (f == 0.0) return 1.0;
    if (std::isinf(f)) return 0.0;
    return reg_inc_beta(df2 / (df2 + df1 * f), df2 / 2.0, df1 / 2.0);
}

StatResult anova_oneway(const std::vector<std::vector<double>>& groups) {
    check_groups(groups);
    std::size_t n_total = 0;
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& g : groups) {
        if (g.size() < 2) throw ValidationError("each group needs at least 2 values");
        n_total += g.size();
        for (double v : g) {
            sum += v;
            sum_sq += v * v;
        }
    }
    const double grand = sum / static_cast<double>(n_total);
    double ssb = 0.0, ssw = 0.0;
    for (const auto& g : groups) {
        double m = 0.0;
        for (double v : g) m += v;
        m /= static_cast<double>(g.size());
        ssb += static_cast<double>(g.size()) * (m - grand) * (m - grand);
        for (double v : g) ssw += (v - m) * (v - m);
    }
    if (ssw <= 1e-13 * sum_sq || ssw == 0.0) throw ValidationError("zero variance");
    StatResult r;
    r.df1 = static_cast<double>(groups.size() - 1);
    r.df2 = static_cast<double>(n_total - groups.size());
    r.statistic = (ssb / r.df1) / (ssw / r.df2);
    r.p_value = f_sf(r.statistic, r.df1, r.df2);
    return r;
}

StatResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
    check_groups(groups);
    std::vector<std::pair<double, std::size_t>> pooled;
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (double v : groups[g]) pooled.emplace_back(v, g);
    const auto n = static_cast<double>(pooled.size());
    if (pooled.size() < 3) throw ValidationError("need at least 3 values in total");
    std::sort(pooled.begin(), pooled.end());

    std::vector<double> rank_sum(groups.size(), 0.0);
    double ties = 0.0;
    for (std::size_t i = 0; i < pooled.size();) {
        std::size_t j = i;
        while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
        const double t = static_cast<double>(j - i);
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t q = i; q < j; ++q) rank_sum[pooled[q].second] += midrank;
        ties += t * t * t - t;
        i = j;
    }
    StatResult r;
    r.df1 = static_cast<double>(groups.size() - 1);
    const double correction = 1.0 - ties / (n * n * n - n);
    if (correction <= 0.0) return r; // every value tied
    const double centre = (n + 1.0) / 2.0;
    double s = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto ng = static_cast<double>(groups[g].size());
        const double d = rank_sum[g] / ng - centre;
        s += ng * d * d;
    }
    r.statistic = std::max(0.0, 12.0 / (n * (n + 1.0)) * s / correction);
    r.p_value = chi2_sf(r.statistic, r.df1);
    return r;
}

} // namespace smg
