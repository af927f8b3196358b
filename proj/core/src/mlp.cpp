#include "fsvi/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fsvi {

namespace {

constexpr double kAlphaFloor = 1e-3; // softplus head offset
// Exp-head logit clamp. The lower bound keeps alpha above the digamma
// floor; the upper bound only guards overflow and sits far out so the KL
// gradient (which stays O(1) through the exp) can still pull back
// confidently extrapolated points.
constexpr double kExpHeadLo = -15.0;
constexpr double kExpHeadHi = 40.0;

double softplus(double z) {
    // z + ln(1 + e^-z) for z > 0 avoids overflow; ln(1 + e^z) below.
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double logistic(double z) {
    return z > 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

void check_shapes(const MlpParams& params, std::span<const double> g, const char* fn) {
    if (g.size() != static_cast<std::size_t>(params.arch.output_dim)) {
        throw std::logic_error(std::string(fn) + ": upstream gradient has size " +
                               std::to_string(g.size()) + ", expected " +
                               std::to_string(params.arch.output_dim));
    }
}

} // namespace

int Architecture::fan_in(int layer) const {
    return layer == 0 ? input_dim : hidden[static_cast<std::size_t>(layer - 1)];
}

int Architecture::fan_out(int layer) const {
    return layer == num_layers() - 1 ? output_dim : hidden[static_cast<std::size_t>(layer)];
}

void Architecture::validate() const {
    if (input_dim < 1 || output_dim < 2) {
        throw std::invalid_argument("Architecture: need input_dim >= 1 and output_dim >= 2");
    }
    for (int h : hidden) {
        if (h < 1) {
            throw std::invalid_argument("Architecture: hidden sizes must be >= 1");
        }
    }
}

MlpParams init_params(const Architecture& arch, Rng& rng) {
    arch.validate();
    MlpParams params;
    params.arch = arch;
    for (int layer = 0; layer < arch.num_layers(); ++layer) {
        const std::size_t n_w =
            static_cast<std::size_t>(arch.fan_in(layer)) * static_cast<std::size_t>(arch.fan_out(layer));
        const std::size_t n_b = static_cast<std::size_t>(arch.fan_out(layer));
        std::vector<double> w(n_w);
        const double stddev = std::sqrt(2.0 / arch.fan_in(layer));
        for (double& v : w) {
            v = rng.normal(0.0, stddev);
        }
        params.weights.push_back(std::move(w));
        params.biases.emplace_back(n_b, 0.0);
        params.m_weights.emplace_back(n_w, 0.0);
        params.v_weights.emplace_back(n_w, 0.0);
        params.m_biases.emplace_back(n_b, 0.0);
        params.v_biases.emplace_back(n_b, 0.0);
    }
    return params;
}

ForwardResult forward(const MlpParams& params, std::span<const double> x, RunMode mode,
                      double dropout_rate, Rng& rng) {
    const Architecture& arch = params.arch;
    if (x.size() != static_cast<std::size_t>(arch.input_dim)) {
        throw std::invalid_argument("forward: input has dimension " + std::to_string(x.size()) +
                                    ", expected " + std::to_string(arch.input_dim));
    }
    for (double v : x) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("forward: non-finite input");
        }
    }
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
        throw std::invalid_argument("forward: dropout_rate must be in [0, 1)");
    }
    const bool drop = dropout_rate > 0.0 && mode != RunMode::eval;
    const double keep = 1.0 - dropout_rate;

    ForwardResult result;
    ForwardTrace& trace = result.trace;
    trace.input.assign(x.begin(), x.end());
    trace.dropout_rate = drop ? dropout_rate : 0.0;

    std::vector<double> activation(trace.input);
    for (int layer = 0; layer < arch.num_layers(); ++layer) {
        const int fan_in = arch.fan_in(layer);
        const int fan_out = arch.fan_out(layer);
        const auto& w = params.weights[static_cast<std::size_t>(layer)];
        const auto& b = params.biases[static_cast<std::size_t>(layer)];
        std::vector<double> z(static_cast<std::size_t>(fan_out));
        for (int j = 0; j < fan_out; ++j) {
            double sum = b[static_cast<std::size_t>(j)];
            for (int i = 0; i < fan_in; ++i) {
                sum += activation[static_cast<std::size_t>(i)] *
                       w[static_cast<std::size_t>(i) * static_cast<std::size_t>(fan_out) +
                         static_cast<std::size_t>(j)];
            }
            z[static_cast<std::size_t>(j)] = sum;
        }
        trace.pre_activations.push_back(z);
        if (layer == arch.num_layers() - 1) {
            result.logits = std::move(z);
            break;
        }
        for (double& v : z) {
            v = std::max(0.0, v); // ReLU
        }
        if (drop) {
            std::vector<double> mask(z.size());
            for (std::size_t j = 0; j < z.size(); ++j) {
                mask[j] = rng.uniform() < dropout_rate ? 0.0 : 1.0;
                z[j] *= mask[j] / keep; // inverted scaling
            }
            trace.dropout_masks.push_back(std::move(mask));
        }
        trace.activations.push_back(z);
        activation = std::move(z);
    }
    return result;
}

std::vector<double> forward_eval(const MlpParams& params, std::span<const double> x) {
    Rng unused(0);
    return forward(params, x, RunMode::eval, 0.0, unused).logits;
}

AlphaVector alpha_head(std::span<const double> logits, AlphaHeadKind kind) {
    std::vector<double> alpha(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (!std::isfinite(logits[i])) {
            throw std::invalid_argument("alpha_head: non-finite logit");
        }
        alpha[i] = kind == AlphaHeadKind::softplus
                       ? softplus(logits[i]) + kAlphaFloor
                       : std::exp(std::clamp(logits[i], kExpHeadLo, kExpHeadHi));
    }
    return AlphaVector(std::move(alpha));
}

std::vector<double> alpha_head_backward(std::span<const double> logits,
                                        std::span<const double> dloss_dalpha, AlphaHeadKind kind) {
    std::vector<double> dloss_dlogits(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        double dalpha_dz = 0.0;
        if (kind == AlphaHeadKind::softplus) {
            dalpha_dz = logistic(logits[i]);
        } else if (logits[i] > kExpHeadLo && logits[i] < kExpHeadHi) {
            dalpha_dz = std::exp(logits[i]);
        }
        dloss_dlogits[i] = dloss_dalpha[i] * dalpha_dz;
    }
    return dloss_dlogits;
}

void ParamGrads::accumulate(const ParamGrads& other) {
    for (std::size_t layer = 0; layer < weights.size(); ++layer) {
        for (std::size_t i = 0; i < weights[layer].size(); ++i) {
            weights[layer][i] += other.weights[layer][i];
        }
        for (std::size_t i = 0; i < biases[layer].size(); ++i) {
            biases[layer][i] += other.biases[layer][i];
        }
    }
}

ParamGrads zero_grads(const Architecture& arch) {
    ParamGrads grads;
    for (int layer = 0; layer < arch.num_layers(); ++layer) {
        grads.weights.emplace_back(
            static_cast<std::size_t>(arch.fan_in(layer)) * static_cast<std::size_t>(arch.fan_out(layer)),
            0.0);
        grads.biases.emplace_back(static_cast<std::size_t>(arch.fan_out(layer)), 0.0);
    }
    return grads;
}

ParamGrads backward_from_logits(const MlpParams& params, const ForwardTrace& trace,
                                std::span<const double> dloss_dlogits) {
    check_shapes(params, dloss_dlogits, "backward_from_logits");
    const Architecture& arch = params.arch;
    ParamGrads grads = zero_grads(arch);

    std::vector<double> delta(dloss_dlogits.begin(), dloss_dlogits.end());
    for (int layer = arch.num_layers() - 1; layer >= 0; --layer) {
        const int fan_in = arch.fan_in(layer);
        const int fan_out = arch.fan_out(layer);
        const std::span<const double> in =
            layer == 0 ? std::span<const double>(trace.input)
                       : std::span<const double>(trace.activations[static_cast<std::size_t>(layer - 1)]);
        auto& gw = grads.weights[static_cast<std::size_t>(layer)];
        auto& gb = grads.biases[static_cast<std::size_t>(layer)];
        for (int j = 0; j < fan_out; ++j) {
            gb[static_cast<std::size_t>(j)] = delta[static_cast<std::size_t>(j)];
            for (int i = 0; i < fan_in; ++i) {
                gw[static_cast<std::size_t>(i) * static_cast<std::size_t>(fan_out) +
                   static_cast<std::size_t>(j)] =
                    in[static_cast<std::size_t>(i)] * delta[static_cast<std::size_t>(j)];
            }
        }
        if (layer == 0) {
            break;
        }
        const auto& w = params.weights[static_cast<std::size_t>(layer)];
        std::vector<double> prev_delta(static_cast<std::size_t>(fan_in), 0.0);
        for (int i = 0; i < fan_in; ++i) {
            double sum = 0.0;
            for (int j = 0; j < fan_out; ++j) {
                sum += w[static_cast<std::size_t>(i) * static_cast<std::size_t>(fan_out) +
                         static_cast<std::size_t>(j)] *
                       delta[static_cast<std::size_t>(j)];
            }
            prev_delta[static_cast<std::size_t>(i)] = sum;
        }
        // Through dropout (mask and inverted scale), then ReLU.
        if (!trace.dropout_masks.empty()) {
            const auto& mask = trace.dropout_masks[static_cast<std::size_t>(layer - 1)];
            const double keep = 1.0 - trace.dropout_rate;
            for (int i = 0; i < fan_in; ++i) {
                prev_delta[static_cast<std::size_t>(i)] *=
                    mask[static_cast<std::size_t>(i)] / keep;
            }
        }
        const auto& z = trace.pre_activations[static_cast<std::size_t>(layer - 1)];
        for (int i = 0; i < fan_in; ++i) {
            if (z[static_cast<std::size_t>(i)] <= 0.0) {
                prev_delta[static_cast<std::size_t>(i)] = 0.0;
            }
        }
        delta = std::move(prev_delta);
    }
    return grads;
}

ParamGrads backward(const MlpParams& params, const ForwardTrace& trace,
                    std::span<const double> dloss_dalpha, AlphaHeadKind kind) {
    check_shapes(params, dloss_dalpha, "backward");
    const auto dlogits = alpha_head_backward(trace.pre_activations.back(), dloss_dalpha, kind);
    return backward_from_logits(params, trace, dlogits);
}

void adam_step(MlpParams& params, const ParamGrads& grads, double lr) {
    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double eps = 1e-8;
    if (!(lr > 0.0)) {
        throw std::invalid_argument("adam_step: learning rate must be positive");
    }
    for (const auto& layer : grads.weights) {
        for (double g : layer) {
            if (!std::isfinite(g)) {
                throw TrainingError("adam_step: non-finite weight gradient");
            }
        }
    }
    for (const auto& layer : grads.biases) {
        for (double g : layer) {
            if (!std::isfinite(g)) {
                throw TrainingError("adam_step: non-finite bias gradient");
            }
        }
    }
    params.adam_step_count += 1;
    const double t = static_cast<double>(params.adam_step_count);
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    auto update = [&](std::vector<double>& value, std::vector<double>& m, std::vector<double>& v,
                      const std::vector<double>& g) {
        for (std::size_t i = 0; i < value.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            value[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    };
    for (std::size_t layer = 0; layer < params.weights.size(); ++layer) {
        update(params.weights[layer], params.m_weights[layer], params.v_weights[layer],
               grads.weights[layer]);
        update(params.biases[layer], params.m_biases[layer], params.v_biases[layer],
               grads.biases[layer]);
    }
}

ProbVector softmax(std::span<const double> logits) {
    const double z_max = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - z_max);
        total += p[i];
    }
    for (double& v : p) {
        v /= total;
    }
    return ProbVector(std::move(p));
}

std::vector<double> flatten_params(const std::vector<std::vector<double>>& weights,
                                   const std::vector<std::vector<double>>& biases) {
    std::vector<double> flat;
    for (std::size_t layer = 0; layer < weights.size(); ++layer) {
        flat.insert(flat.end(), weights[layer].begin(), weights[layer].end());
        flat.insert(flat.end(), biases[layer].begin(), biases[layer].end());
    }
    return flat;
}

void unflatten_params(const Architecture& arch, std::span<const double> flat,
                      std::vector<std::vector<double>>& weights,
                      std::vector<std::vector<double>>& biases) {
    weights.clear();
    biases.clear();
    std::size_t offset = 0;
    for (int layer = 0; layer < arch.num_layers(); ++layer) {
        const std::size_t n_w =
            static_cast<std::size_t>(arch.fan_in(layer)) * static_cast<std::size_t>(arch.fan_out(layer));
        const std::size_t n_b = static_cast<std::size_t>(arch.fan_out(layer));
        if (offset + n_w + n_b > flat.size()) {
            throw std::invalid_argument("unflatten_params: flat array too short");
        }
        weights.emplace_back(flat.begin() + offset, flat.begin() + offset + n_w);
        offset += n_w;
        biases.emplace_back(flat.begin() + offset, flat.begin() + offset + n_b);
        offset += n_b;
    }
    if (offset != flat.size()) {
        throw std::invalid_argument("unflatten_params: flat array too long");
    }
}

} // namespace fsvi
