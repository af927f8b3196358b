#include "fsvi/special_functions.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fsvi {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kHalfLogTwoPi = 0.91893853320467274178; // ln(2*pi)/2

// Lanczos coefficients for g = 7, n = 9 (Godfrey's tabulation).
constexpr double kLanczos[9] = {
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
};
constexpr double kLanczosG = 7.0;

void require_positive(double x, const char* fn) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw std::domain_error(std::string(fn) + ": argument must be positive and finite, got " +
                                std::to_string(x));
    }
}

double ln_gamma_lanczos(double x) {
    // Valid for x >= 0.5; callers reflect smaller arguments.
    const double z = x - 1.0;
    double series = kLanczos[0];
    for (int i = 1; i < 9; ++i) {
        series += kLanczos[i] / (z + i);
    }
    const double t = z + kLanczosG + 0.5;
    return kHalfLogTwoPi + (z + 0.5) * std::log(t) - t + std::log(series);
}

} // namespace

double ln_gamma(double x) {
    require_positive(x, "ln_gamma");
    if (x < 0.5) {
        // Reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x).
        return std::log(kPi / std::sin(kPi * x)) - ln_gamma_lanczos(1.0 - x);
    }
    return ln_gamma_lanczos(x);
}

double digamma(double x) {
    require_positive(x, "digamma");
    // psi(x) = psi(x+1) - 1/x shifts the argument into asymptotic territory.
    double acc = 0.0;
    while (x < 6.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // psi(x) ~ ln x - 1/(2x) - sum_n B_{2n} / (2n x^{2n}), terms through x^-14.
    const double tail =
        inv2 * (1.0 / 12.0 -
                inv2 * (1.0 / 120.0 -
                        inv2 * (1.0 / 252.0 -
                                inv2 * (1.0 / 240.0 -
                                        inv2 * (1.0 / 132.0 -
                                                inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    return acc + std::log(x) - 0.5 * inv - tail;
}

double trigamma(double x) {
    require_positive(x, "trigamma");
    // psi'(x) = psi'(x+1) + 1/x^2.
    double acc = 0.0;
    while (x < 6.0) {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // psi'(x) ~ 1/x + 1/(2x^2) + sum_n B_{2n} / x^{2n+1}, terms through x^-15.
    const double tail =
        1.0 / 6.0 -
        inv2 * (1.0 / 30.0 -
                inv2 * (1.0 / 42.0 -
                        inv2 * (1.0 / 30.0 -
                                inv2 * (5.0 / 66.0 -
                                        inv2 * (691.0 / 2730.0 - inv2 * (7.0 / 6.0))))));
    return acc + inv + 0.5 * inv2 + inv * inv2 * tail;
}

double ln_beta(std::span<const double> alpha) {
    if (alpha.size() < 2) {
        throw std::domain_error("ln_beta: need at least two concentration parameters");
    }
    double sum_alpha = 0.0;
    double sum_lgamma = 0.0;
    for (double a : alpha) {
        require_positive(a, "ln_beta");
        sum_alpha += a;
        sum_lgamma += ln_gamma(a);
    }
    return sum_lgamma - ln_gamma(sum_alpha);
}

} // namespace fsvi
