#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "smg/features.hpp"
#include "smg/gesture.hpp"

// Slow, direct reference implementations shared by the unit and acceptance tests.
namespace smg::oracle {

/// Majority of the k nearest rows by a full sort; distance ties to the lower index, vote ties to the lower class.
inline int knn_label(const FeatureMatrix& X, std::span<const int> y, std::span<const float> q, int k, int n_classes) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t i = 0; i < X.rows; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < X.cols; ++j) s += (double(X.row(i)[j]) - q[j]) * (double(X.row(i)[j]) - q[j]);
        d.emplace_back(s, i);
    }
    std::stable_sort(d.begin(), d.end());
    std::vector<int> votes(static_cast<std::size_t>(n_classes), 0);
    for (int i = 0; i < k; ++i) ++votes[static_cast<std::size_t>(y[d[static_cast<std::size_t>(i)].second])];
    return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

inline double simpson(const std::function<double(double)>& f, double lo, double hi, int steps = 1000000) {
    const double h = (hi - lo) / steps;
    double s = f(lo) + f(hi);
    for (int i = 1; i < steps; ++i) s += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

/// I_x(a,b) by quadrature after t = u^(1/a), which removes the t^(a-1) endpoint singularity.
inline double inc_beta(double x, double a, double b) {
    if (x > 0.5) return 1.0 - inc_beta(1.0 - x, b, a);
    const double beta = std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
    const auto f = [&](double u) { return std::pow(1.0 - std::pow(u, 1.0 / a), b - 1.0); };
    return simpson(f, 0.0, std::pow(x, a)) / (a * beta);
}

inline double gamma_p(double a, double x) {
    if (a >= 1.0) {
        const auto f = [&](double t) { return std::pow(t, a - 1.0) * std::exp(-t); };
        return simpson(f, 0.0, x) / std::tgamma(a);
    }
    const auto f = [&](double u) { return std::exp(-std::pow(u, 1.0 / a)); };
    return simpson(f, 0.0, std::pow(x, a)) / (a * std::tgamma(a));
}

inline double f_sf(double f, double d1, double d2) { return inc_beta(d2 / (d2 + d1 * f), d2 / 2, d1 / 2); }
inline double chi2_sf(double x, double df) { return 1.0 - gamma_p(df / 2, x / 2); }

struct FPoint {
    double f, d1, d2;
};
struct ChiPoint {
    double x, df;
};
inline constexpr FPoint kFPoints[] = {{0.3, 1, 5},  {1.0, 2, 6}, {2.5, 3, 12}, {27.0, 2, 6}, {0.9, 4, 20},
                                      {4.2, 1, 30}, {1.7, 5, 9}, {0.05, 8, 3}, {6.0, 2, 40}, {3.1, 7, 14}};
inline constexpr ChiPoint kChiPoints[] = {{0.2, 1}, {2.4, 1}, {1.0, 2},  {3.5, 3},  {7.8, 4},
                                          {0.5, 5}, {12.0, 6}, {8.0, 8}, {15.5, 9}, {30.0, 20}};

/// m-of-k switching recomputed from the full history at every frame.
inline std::vector<std::optional<Gesture>> debounce(const std::vector<Gesture>& stream, int k, int m) {
    std::vector<std::optional<Gesture>> out;
    std::optional<Gesture> cur;
    for (std::size_t t = 0; t < stream.size(); ++t) {
        const std::size_t lo = t + 1 >= static_cast<std::size_t>(k) ? t + 1 - static_cast<std::size_t>(k) : 0;
        std::optional<Gesture> emit;
        for (auto g : kAllGestures) {
            int c = 0;
            for (std::size_t i = lo; i <= t; ++i) c += stream[i] == g;
            if (c >= m && cur != g) {
                emit = g;
                cur = g;
                break;
            }
        }
        out.push_back(emit);
    }
    return out;
}

} // namespace smg::oracle
