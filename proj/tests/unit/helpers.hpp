#ifndef FSVI_TEST_HELPERS_HPP
#define FSVI_TEST_HELPERS_HPP

#include <cmath>
#include <functional>
#include <vector>

#include "fsvi/dirichlet.hpp"
#include "fsvi/rng.hpp"

namespace fsvi::test {

/// Central finite difference, the independent oracle for analytic
/// gradients.
inline double central_diff(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Finite-difference gradient of a scalar function of alpha, component by
/// component.
inline std::vector<double> fd_alpha_grad(const std::function<double(const AlphaVector&)>& f,
                                         const AlphaVector& alpha, double h) {
    std::vector<double> grad(static_cast<std::size_t>(alpha.k()));
    for (int i = 0; i < alpha.k(); ++i) {
        std::vector<double> plus(alpha.values().begin(), alpha.values().end());
        std::vector<double> minus(plus);
        plus[static_cast<std::size_t>(i)] += h;
        minus[static_cast<std::size_t>(i)] -= h;
        grad[static_cast<std::size_t>(i)] =
            (f(AlphaVector(plus)) - f(AlphaVector(minus))) / (2.0 * h);
    }
    return grad;
}

/// Random concentration vector with components log-uniform in [lo, hi].
inline AlphaVector random_alpha(int k, Rng& rng, double lo = 0.1, double hi = 50.0) {
    std::vector<double> values(static_cast<std::size_t>(k));
    for (double& v : values) {
        v = std::exp(rng.uniform(std::log(lo), std::log(hi)));
    }
    return AlphaVector(std::move(values));
}

inline double rel_err(double actual, double expected) {
    return std::abs(actual - expected) / std::max(1.0, std::abs(expected));
}

/// Monte-Carlo mean and its standard error for a scalar functional of
/// Dirichlet draws.
struct McEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
};

inline McEstimate mc_dirichlet_mean(const AlphaVector& alpha,
                                    const std::function<double(const std::vector<double>&)>& f,
                                    int draws, Rng& rng) {
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double v = f(rng.dirichlet(alpha.values()));
        sum += v;
        sum_sq += v * v;
    }
    McEstimate est;
    est.mean = sum / draws;
    const double variance = std::max(0.0, sum_sq / draws - est.mean * est.mean);
    est.stderr_ = std::sqrt(variance / draws);
    return est;
}

} // namespace fsvi::test

#endif
