#include "fsvi/dirichlet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "fsvi/special_functions.hpp"

namespace fsvi {

namespace {

// KL[Dir(a) || Dir(b)] for matching dimension. Only the uniform-prior case
// is public; keeping the general form here lets tests cross-check it.
double kl_dirichlet(std::span<const double> a, std::span<const double> b) {
    double a0 = 0.0, b0 = 0.0;
    for (double v : a) a0 += v;
    for (double v : b) b0 += v;
    double result = ln_gamma(a0) - ln_gamma(b0);
    const double psi_a0 = digamma(a0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        result -= ln_gamma(a[i]);
        result += ln_gamma(b[i]);
        result += (a[i] - b[i]) * (digamma(a[i]) - psi_a0);
    }
    return result;
}

void check_label(const AlphaVector& alpha, int label, const char* fn) {
    if (label < 0 || label >= alpha.k()) {
        throw std::out_of_range(std::string(fn) + ": label " + std::to_string(label) +
                                " out of range for K=" + std::to_string(alpha.k()));
    }
}

} // namespace

AlphaVector::AlphaVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.size() < 2) {
        throw std::domain_error("AlphaVector: need at least two components");
    }
    for (double v : values_) {
        if (!std::isfinite(v) || v < kMinComponent) {
            throw std::domain_error("AlphaVector: components must be finite and >= " +
                                    std::to_string(kMinComponent) + ", got " + std::to_string(v));
        }
    }
}

AlphaVector AlphaVector::uniform_prior(int k) {
    if (k < 2) {
        throw std::domain_error("AlphaVector::uniform_prior: class count must be >= 2");
    }
    return AlphaVector(std::vector<double>(static_cast<std::size_t>(k), 1.0));
}

double AlphaVector::sum() const {
    double total = 0.0;
    for (double v : values_) total += v;
    return total;
}

ProbVector::ProbVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.size() < 2) {
        throw std::domain_error("ProbVector: need at least two components");
    }
    double total = 0.0;
    for (double v : values_) {
        if (!std::isfinite(v) || v < 0.0) {
            throw std::domain_error("ProbVector: components must be finite and non-negative");
        }
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw std::domain_error("ProbVector: components sum to " + std::to_string(total) +
                                ", expected 1");
    }
}

int ProbVector::argmax() const {
    return static_cast<int>(std::max_element(values_.begin(), values_.end()) - values_.begin());
}

double ProbVector::max() const {
    return *std::max_element(values_.begin(), values_.end());
}

ProbVector predictive_mean(const AlphaVector& alpha) {
    const double a0 = alpha.sum();
    std::vector<double> p(static_cast<std::size_t>(alpha.k()));
    for (int i = 0; i < alpha.k(); ++i) {
        p[static_cast<std::size_t>(i)] = alpha[i] / a0;
    }
    return ProbVector(std::move(p));
}

double expected_nll(const AlphaVector& alpha, int label) {
    check_label(alpha, label, "expected_nll");
    return digamma(alpha.sum()) - digamma(alpha[label]);
}

std::vector<double> expected_nll_grad(const AlphaVector& alpha, int label) {
    check_label(alpha, label, "expected_nll_grad");
    const double tg0 = trigamma(alpha.sum());
    std::vector<double> grad(static_cast<std::size_t>(alpha.k()), tg0);
    grad[static_cast<std::size_t>(label)] -= trigamma(alpha[label]);
    return grad;
}

double kl_to_uniform(const AlphaVector& alpha) {
    const std::vector<double> ones(static_cast<std::size_t>(alpha.k()), 1.0);
    // True KL is non-negative; the formula can round a hair below zero
    // within an ulp of the prior.
    return std::max(0.0, kl_dirichlet(alpha.values(), ones));
}

std::vector<double> kl_to_uniform_grad(const AlphaVector& alpha) {
    const double a0 = alpha.sum();
    const double common = (a0 - alpha.k()) * trigamma(a0);
    std::vector<double> grad(static_cast<std::size_t>(alpha.k()));
    for (int i = 0; i < alpha.k(); ++i) {
        grad[static_cast<std::size_t>(i)] = (alpha[i] - 1.0) * trigamma(alpha[i]) - common;
    }
    return grad;
}

double output_entropy(const AlphaVector& alpha) {
    return shannon_entropy(predictive_mean(alpha));
}

double differential_entropy(const AlphaVector& alpha) {
    const double a0 = alpha.sum();
    double result = ln_beta(alpha.values()) + (a0 - alpha.k()) * digamma(a0);
    for (int i = 0; i < alpha.k(); ++i) {
        result -= (alpha[i] - 1.0) * digamma(alpha[i]);
    }
    return result;
}

double shannon_entropy(const ProbVector& p) {
    double h = 0.0;
    for (int i = 0; i < p.k(); ++i) {
        if (p[i] > 0.0) {
            h -= p[i] * std::log(p[i]); // p ln p -> 0 as p -> 0
        }
    }
    return h;
}

} // namespace fsvi
