#ifndef FSVI_DIRICHLET_HPP
#define FSVI_DIRICHLET_HPP

#include <span>
#include <vector>

namespace fsvi {

/// Dirichlet concentration parameters. Components are validated strictly
/// positive (floored at 1e-8, where digamma is still well conditioned) and
/// finite; the class count K is fixed at >= 2.
class AlphaVector {
public:
    static constexpr double kMinComponent = 1e-8;

    explicit AlphaVector(std::vector<double> values);

    /// The flat prior <1,...,1> on the K-simplex.
    static AlphaVector uniform_prior(int k);

    int k() const { return static_cast<int>(values_.size()); }
    double operator[](int i) const { return values_[static_cast<std::size_t>(i)]; }
    std::span<const double> values() const { return values_; }

    /// alpha_0 = sum of all components (ascending index order).
    double sum() const;

    bool operator==(const AlphaVector& other) const = default;

private:
    std::vector<double> values_;
};

/// Probability mass function over K classes: non-negative, sums to 1
/// within 1e-9.
class ProbVector {
public:
    explicit ProbVector(std::vector<double> values);

    int k() const { return static_cast<int>(values_.size()); }
    double operator[](int i) const { return values_[static_cast<std::size_t>(i)]; }
    std::span<const double> values() const { return values_; }

    /// Index of the largest component (lowest index wins ties).
    int argmax() const;
    double max() const;

    bool operator==(const ProbVector& other) const = default;

private:
    std::vector<double> values_;
};

/// Mean of Dir(alpha): p_i = alpha_i / alpha_0.
ProbVector predictive_mean(const AlphaVector& alpha);

/// Expected negative log-likelihood of the label class under Dir(alpha):
/// psi(alpha_0) - psi(alpha_label). Positive for K >= 2.
double expected_nll(const AlphaVector& alpha, int label);

/// Analytic gradient of expected_nll with respect to alpha:
/// d/d alpha_i = psi'(alpha_0) - [i == label] psi'(alpha_i).
std::vector<double> expected_nll_grad(const AlphaVector& alpha, int label);

/// KL[Dir(alpha) || Dir(<1,...,1>)]. Non-negative; zero exactly at the prior.
double kl_to_uniform(const AlphaVector& alpha);

/// Analytic gradient of kl_to_uniform:
/// d/d alpha_i = (alpha_i - 1) psi'(alpha_i) - (alpha_0 - K) psi'(alpha_0).
std::vector<double> kl_to_uniform_grad(const AlphaVector& alpha);

/// Shannon entropy of the predictive mean, in nats. Total uncertainty:
/// high under class overlap and on out-of-distribution inputs alike.
double output_entropy(const AlphaVector& alpha);

/// Differential entropy of Dir(alpha), in nats. Distributional uncertainty:
/// maximized at the flat prior, stays low under mere class overlap.
double differential_entropy(const AlphaVector& alpha);

/// Shannon entropy of an arbitrary probability vector, in nats.
double shannon_entropy(const ProbVector& p);

} // namespace fsvi

#endif
