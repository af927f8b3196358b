#include "fsvi/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fsvi {

namespace {

using u128 = unsigned __int128;

constexpr u128 make_u128(std::uint64_t hi, std::uint64_t lo) {
    return (static_cast<u128>(hi) << 64) | lo;
}

// PCG default 128-bit LCG multiplier and increment.
constexpr u128 kMultiplier = make_u128(2549297995355413924ULL, 4865540595714422341ULL);
constexpr u128 kIncrement = make_u128(6364136223846793005ULL, 1442695040888963407ULL);

std::uint64_t splitmix64(std::uint64_t& s) {
    s += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

Rng::Rng(std::uint64_t seed) {
    // Expand the 64-bit seed into the 128-bit PCG init state.
    std::uint64_t s = seed;
    const u128 init = make_u128(splitmix64(s), splitmix64(s));
    state_ = 0;
    state_ = state_ * kMultiplier + kIncrement;
    state_ += init;
    state_ = state_ * kMultiplier + kIncrement;
}

std::uint64_t Rng::next_u64() {
    state_ = state_ * kMultiplier + kIncrement;
    // XSL-RR output: xor-fold the halves, rotate by the top 6 state bits.
    const std::uint64_t xored =
        static_cast<std::uint64_t>(state_ >> 64) ^ static_cast<std::uint64_t>(state_);
    const unsigned rot = static_cast<unsigned>(state_ >> 122);
    return (xored >> rot) | (xored << ((64u - rot) & 63u));
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
        throw std::domain_error("Rng::uniform: invalid interval");
    }
    return lo + uniform() * (hi - lo);
}

double Rng::normal(double mean, double stddev) {
    if (!std::isfinite(mean) || !std::isfinite(stddev) || stddev < 0.0) {
        throw std::domain_error("Rng::normal: invalid parameters");
    }
    if (has_spare_) {
        has_spare_ = false;
        return mean + stddev * spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return mean + stddev * u * f;
}

double Rng::gamma(double shape) {
    if (!(shape > 0.0) || !std::isfinite(shape)) {
        throw std::domain_error("Rng::gamma: shape must be positive and finite, got " +
                                std::to_string(shape));
    }
    if (shape < 1.0) {
        // Boost: X ~ Gamma(shape+1), U in (0,1]: X * U^(1/shape) ~ Gamma(shape).
        const double u = 1.0 - uniform();
        return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal(0.0, 1.0);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform();
        const double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) {
            return d * v;
        }
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) {
            return d * v;
        }
    }
}

std::vector<double> Rng::dirichlet(std::span<const double> alpha) {
    if (alpha.size() < 2) {
        throw std::domain_error("Rng::dirichlet: need at least two concentration parameters");
    }
    std::vector<double> draws(alpha.size());
    double total = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        draws[i] = gamma(alpha[i]);
        total += draws[i];
    }
    if (!(total > 0.0)) {
        throw std::domain_error("Rng::dirichlet: gamma draws underflowed to zero");
    }
    for (double& d : draws) {
        d /= total;
    }
    return draws;
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) {
        throw std::domain_error("Rng::below: n must be positive");
    }
    // Rejection keeps the draw unbiased when 2^64 is not a multiple of n.
    std::uint64_t x, r;
    do {
        x = next_u64();
        r = x % n;
    } while (x - r > static_cast<std::uint64_t>(-n));
    return r;
}

} // namespace fsvi
