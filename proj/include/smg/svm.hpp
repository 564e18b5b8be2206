#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "smg/features.hpp"

namespace smg {

struct Kernel {
    enum class Kind : std::uint8_t { Linear = 0, Polynomial = 1 };
    Kind kind = Kind::Linear;
    double gamma = 1.0;
    double coef0 = 1.0;
    int degree = 3;

    double from_dot(double dot) const;
    double operator()(std::span<const float> a, std::span<const float> b) const;
};

/// Dense kernel matrix over the rows of X (n x n, row-major).
std::vector<double> kernel_matrix(const FeatureMatrix& X, const Kernel& k);

/// min 1/2 a'Qa + p'a  s.t.  y'a = 0, 0 <= a <= C, with Q_ij = y_i y_j K(i mod n, j mod n).
/// Solved by SMO with second-order working-set selection; stops when the maximal
/// KKT violation drops below `tol` or after `max_iter` updates.
struct SmoProblem {
    std::span<const double> gram; // n x n
    std::size_t n = 0;            // rows of the Gram matrix
    std::span<const double> p;    // length m (n or 2n)
    std::span<const std::int8_t> y;
    double c = 1.0;
    double tol = 1e-3;
    long max_iter = 100000;
};

struct SmoResult {
    std::vector<double> alpha;
    double rho = 0.0;
    long iterations = 0;
    bool converged = false;
    double max_violation = 0.0;
};

SmoResult solve_smo(const SmoProblem& prob);

/// f(x) = sum_i coef_i K(sv_i, x) - rho.
struct KernelExpansion {
    FeatureMatrix support;
    std::vector<double> coef;
    double rho = 0.0;
    std::vector<double> linear_w; // cached for the linear kernel

    double decision(std::span<const float> x, const Kernel& k) const;
    void prepare(const Kernel& k);
};

/// Binary soft-margin classifier on labels +1/-1 over the rows of `gram`'s source matrix.
KernelExpansion train_svc(const FeatureMatrix& X, std::span<const double> gram, std::span<const std::int8_t> y,
                          const Kernel& k, double c, double tol, long max_iter, SmoResult* info = nullptr);

/// Epsilon-insensitive support vector regression.
KernelExpansion train_svr(const FeatureMatrix& X, std::span<const double> gram, std::span<const double> z,
                          const Kernel& k, double c, double epsilon, double tol, long max_iter,
                          SmoResult* info = nullptr);

} // namespace smg
