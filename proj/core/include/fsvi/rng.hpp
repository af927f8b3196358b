#ifndef FSVI_RNG_HPP
#define FSVI_RNG_HPP

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace fsvi {

/// Deterministic PCG64 (XSL-RR 128/64) generator.
///
/// The same 64-bit seed yields the same sample stream on every run and
/// platform; experiments are reproducible from their seed alone. One Rng
/// per worker when sampling concurrently (seed + worker index).
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    /// Uniform draw in [0, 1).
    double uniform();

    /// Uniform draw in [lo, hi).
    double uniform(double lo, double hi);

    /// Normal draw via the Marsaglia polar method. Never NaN/Inf.
    double normal(double mean, double stddev);

    /// Gamma(shape, 1) draw via the Marsaglia-Tsang squeeze, with the
    /// u^(1/shape) boost for shape < 1. Requires shape > 0.
    double gamma(double shape);

    /// Dirichlet draw: normalized Gamma(alpha_i) samples; sums to 1.
    std::vector<double> dirichlet(std::span<const double> alpha);

    /// Unbiased integer in [0, n). Requires n > 0.
    std::uint64_t below(std::uint64_t n);

private:
    unsigned __int128 state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Fisher-Yates shuffle driven by the given Rng.
template <typename T>
void shuffle(std::vector<T>& values, Rng& rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        std::swap(values[i - 1], values[rng.below(i)]);
    }
}

} // namespace fsvi

#endif
