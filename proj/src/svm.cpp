#include "smg/svm.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "smg/error.hpp"

namespace smg {

double Kernel::from_dot(double dot) const {
    if (kind == Kind::Linear) return dot;
    return std::pow(gamma * dot + coef0, degree);
}

double Kernel::operator()(std::span<const float> a, std::span<const float> b) const {
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += static_cast<double>(a[i]) * b[i];
    return from_dot(dot);
}

std::vector<double> kernel_matrix(const FeatureMatrix& X, const Kernel& k) {
    const auto n = static_cast<Eigen::Index>(X.rows);
    const auto d = static_cast<Eigen::Index>(X.cols);
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const RowMat A = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                         X.data.data(), n, d)
                         .cast<double>();
    std::vector<double> g(static_cast<std::size_t>(n * n));
    Eigen::Map<RowMat> G(g.data(), n, n);
    G.noalias() = A * A.transpose();
    if (k.kind != Kernel::Kind::Linear)
        for (auto& v : g) v = k.from_dot(v);
    return g;
}

namespace {
constexpr double kTau = 1e-12;
}

SmoResult solve_smo(const SmoProblem& prob) {
    const std::size_t m = prob.p.size();
    const std::size_t n = prob.n;
    if (m == 0 || prob.y.size() != m || prob.gram.size() != n * n || (m != n && m != 2 * n))
        throw ValidationError("inconsistent SMO problem");
    const double C = prob.c;
    const auto& y = prob.y;

    auto K = [&](std::size_t i) { return prob.gram.data() + (i % n) * n; };
    std::vector<double> qd(m);
    for (std::size_t i = 0; i < m; ++i) qd[i] = K(i)[i % n];

    SmoResult res;
    auto& a = res.alpha;
    a.assign(m, 0.0);
    std::vector<double> G(prob.p.begin(), prob.p.end());
    auto upper = [&](std::size_t t) { return a[t] >= C; };
    auto lower = [&](std::size_t t) { return a[t] <= 0.0; };
    auto Q = [&](std::size_t i, std::size_t j) { return static_cast<double>(y[i] * y[j]) * K(i)[j % n]; };

    for (;;) {
        // Maximal violating pair with second-order choice of j.
        double gmax = -std::numeric_limits<double>::infinity();
        double gmax2 = -std::numeric_limits<double>::infinity();
        std::ptrdiff_t ii = -1, jj = -1;
        for (std::size_t t = 0; t < m; ++t) {
            if (y[t] == 1) {
                if (!upper(t) && -G[t] >= gmax) { gmax = -G[t]; ii = static_cast<std::ptrdiff_t>(t); }
            } else {
                if (!lower(t) && G[t] >= gmax) { gmax = G[t]; ii = static_cast<std::ptrdiff_t>(t); }
            }
        }
        double obj_min = std::numeric_limits<double>::infinity();
        if (ii >= 0) {
            const auto i = static_cast<std::size_t>(ii);
            for (std::size_t t = 0; t < m; ++t) {
                if (y[t] == 1) {
                    if (lower(t)) continue;
                    const double grad_diff = gmax + G[t];
                    if (G[t] >= gmax2) gmax2 = G[t];
                    if (grad_diff > 0) {
                        const double quad = qd[i] + qd[t] - 2.0 * K(i)[t % n];
                        const double obj = -(grad_diff * grad_diff) / (quad > 0 ? quad : kTau);
                        if (obj <= obj_min) { jj = static_cast<std::ptrdiff_t>(t); obj_min = obj; }
                    }
                } else {
                    if (upper(t)) continue;
                    const double grad_diff = gmax - G[t];
                    if (-G[t] >= gmax2) gmax2 = -G[t];
                    if (grad_diff > 0) {
                        const double quad = qd[i] + qd[t] - 2.0 * K(i)[t % n];
                        const double obj = -(grad_diff * grad_diff) / (quad > 0 ? quad : kTau);
                        if (obj <= obj_min) { jj = static_cast<std::ptrdiff_t>(t); obj_min = obj; }
                    }
                }
            }
        }
        res.max_violation = (ii >= 0) ? std::max(0.0, gmax + gmax2) : 0.0;
        if (ii < 0 || jj < 0 || gmax + gmax2 < prob.tol) {
            res.converged = true;
            break;
        }
        if (res.iterations >= prob.max_iter) break;
        ++res.iterations;

        const auto i = static_cast<std::size_t>(ii), j = static_cast<std::size_t>(jj);
        const double old_ai = a[i], old_aj = a[j];
        const double qij = Q(i, j);
        if (y[i] != y[j]) {
            double quad = qd[i] + qd[j] + 2.0 * qij;
            if (quad <= 0) quad = kTau;
            const double delta = (-G[i] - G[j]) / quad;
            const double diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if (diff > 0) {
                if (a[j] < 0) { a[j] = 0; a[i] = diff; }
            } else {
                if (a[i] < 0) { a[i] = 0; a[j] = -diff; }
            }
            if (diff > 0) {
                if (a[i] > C) { a[i] = C; a[j] = C - diff; }
            } else {
                if (a[j] > C) { a[j] = C; a[i] = C + diff; }
            }
        } else {
            double quad = qd[i] + qd[j] - 2.0 * qij;
            if (quad <= 0) quad = kTau;
            const double delta = (G[i] - G[j]) / quad;
            const double sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if (sum > C) {
                if (a[i] > C) { a[i] = C; a[j] = sum - C; }
            } else {
                if (a[j] < 0) { a[j] = 0; a[i] = sum; }
            }
            if (sum > C) {
                if (a[j] > C) { a[j] = C; a[i] = sum - C; }
            } else {
                if (a[i] < 0) { a[i] = 0; a[j] = sum; }
            }
        }
        const double dai = a[i] - old_ai, daj = a[j] - old_aj;
        const double* ki = K(i);
        const double* kj = K(j);
        const double yi = y[i], yj = y[j];
        for (std::size_t t = 0; t < m; ++t) {
            const double yt = y[t];
            G[t] += yt * (yi * ki[t % n] * dai + yj * kj[t % n] * daj);
        }
    }

    // Bias from free variables, or the midpoint of the feasible interval.
    double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    int nr_free = 0;
    for (std::size_t t = 0; t < m; ++t) {
        const double yg = y[t] * G[t];
        if (upper(t)) {
            if (y[t] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else if (lower(t)) {
            if (y[t] == 1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else {
            ++nr_free;
            sum_free += yg;
        }
    }
    res.rho = nr_free > 0 ? sum_free / nr_free : (ub + lb) / 2.0;
    return res;
}

double KernelExpansion::decision(std::span<const float> x, const Kernel& k) const {
    double f = 0.0;
    if (k.kind == Kernel::Kind::Linear && linear_w.size() == x.size()) {
        for (std::size_t i = 0; i < x.size(); ++i) f += linear_w[i] * x[i];
    } else {
        for (std::size_t s = 0; s < support.rows; ++s) f += coef[s] * k(support.row(s), x);
    }
    return f - rho;
}

void KernelExpansion::prepare(const Kernel& k) {
    linear_w.clear();
    if (k.kind != Kernel::Kind::Linear) return;
    linear_w.assign(support.cols, 0.0);
    for (std::size_t s = 0; s < support.rows; ++s) {
        const auto r = support.row(s);
        for (std::size_t i = 0; i < support.cols; ++i) linear_w[i] += coef[s] * r[i];
    }
}

namespace {

KernelExpansion collect(const FeatureMatrix& X, const std::vector<double>& coef_all, double rho, const Kernel& k) {
    KernelExpansion e;
    std::vector<std::size_t> sv;
    for (std::size_t i = 0; i < coef_all.size(); ++i)
        if (coef_all[i] != 0.0) sv.push_back(i);
    e.support = X.select(sv);
    for (auto i : sv) e.coef.push_back(coef_all[i]);
    e.rho = rho;
    e.prepare(k);
    return e;
}

} // namespace

KernelExpansion train_svc(const FeatureMatrix& X, std::span<const double> gram, std::span<const std::int8_t> y,
                          const Kernel& k, double c, double tol, long max_iter, SmoResult* info) {
    const std::size_t n = X.rows;
    std::vector<double> p(n, -1.0);
    SmoResult r = solve_smo({gram, n, p, y, c, tol, max_iter});
    std::vector<double> coef(n);
    for (std::size_t i = 0; i < n; ++i) coef[i] = r.alpha[i] * y[i];
    auto e = collect(X, coef, r.rho, k);
    if (info) *info = std::move(r);
    return e;
}

KernelExpansion train_svr(const FeatureMatrix& X, std::span<const double> gram, std::span<const double> z,
                          const Kernel& k, double c, double epsilon, double tol, long max_iter, SmoResult* info) {
    const std::size_t n = X.rows;
    std::vector<double> p(2 * n);
    std::vector<std::int8_t> y(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = epsilon - z[i];
        y[i] = 1;
        p[i + n] = epsilon + z[i];
        y[i + n] = -1;
    }
    SmoResult r = solve_smo({gram, n, p, y, c, tol, max_iter});
    std::vector<double> coef(n);
    for (std::size_t i = 0; i < n; ++i) coef[i] = r.alpha[i] - r.alpha[i + n];
    auto e = collect(X, coef, r.rho, k);
    if (info) *info = std::move(r);
    return e;
}

} // namespace smg
