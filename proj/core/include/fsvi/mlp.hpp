#ifndef FSVI_MLP_HPP
#define FSVI_MLP_HPP

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "fsvi/dirichlet.hpp"
#include "fsvi/rng.hpp"

namespace fsvi {

/// Raised when training hits a non-finite loss or gradient.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Architecture {
    int input_dim = 2;
    std::vector<int> hidden = {64, 64};
    int output_dim = 3;

    int num_layers() const { return static_cast<int>(hidden.size()) + 1; }
    int fan_in(int layer) const;
    int fan_out(int layer) const;
    void validate() const;

    bool operator==(const Architecture&) const = default;
};

/// Fully connected network parameters plus Adam moments. Weights are
/// row-major fan_in x fan_out per layer: y_j = sum_i x_i W[i, j] + b_j.
struct MlpParams {
    Architecture arch;
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
    std::vector<std::vector<double>> m_weights, v_weights;
    std::vector<std::vector<double>> m_biases, v_biases;
    std::int64_t adam_step_count = 0;

    bool operator==(const MlpParams&) const = default;
};

/// He-style init: weights ~ Normal(0, 2 / fan_in), biases zero.
/// Deterministic given the Rng state.
MlpParams init_params(const Architecture& arch, Rng& rng);

enum class RunMode {
    train,     // dropout active (when rate > 0)
    eval,      // deterministic, no masking
    mc_sample, // dropout active at inference, for MC-dropout predictions
};

/// Everything backward needs: per-layer pre-activations, the activations
/// each layer actually consumed, and the dropout masks that were applied.
struct ForwardTrace {
    std::vector<double> input;
    std::vector<std::vector<double>> pre_activations; // per layer; back() = logits
    std::vector<std::vector<double>> activations;     // post ReLU + dropout, hidden layers only
    std::vector<std::vector<double>> dropout_masks;   // 0/1 per hidden layer; empty if unused
    double dropout_rate = 0.0;
};

struct ForwardResult {
    std::vector<double> logits;
    ForwardTrace trace;
};

/// Forward pass with ReLU hidden layers. Dropout masks hidden activations
/// and scales survivors by 1/(1-rate) when rate > 0 and the mode is train
/// or mc_sample; eval ignores the rng entirely.
ForwardResult forward(const MlpParams& params, std::span<const double> x, RunMode mode,
                      double dropout_rate, Rng& rng);

/// Deterministic logits, no trace; pure function of (params, x).
std::vector<double> forward_eval(const MlpParams& params, std::span<const double> x);

enum class AlphaHeadKind {
    softplus, // alpha_i = softplus(z_i) + 1e-3; smooth, spans (1e-3, inf)
    exp,      // alpha_i = exp(clamp(z_i, -15, 40)); default for the
              // variational trainer - evidence can grow (and be pulled
              // back) multiplicatively instead of one logit unit at a time
};

/// Evidence head mapping logits to strictly positive concentrations.
AlphaVector alpha_head(std::span<const double> logits, AlphaHeadKind kind = AlphaHeadKind::softplus);

/// Chain rule through the head: dloss/dlogits from dloss/dalpha.
std::vector<double> alpha_head_backward(std::span<const double> logits,
                                        std::span<const double> dloss_dalpha,
                                        AlphaHeadKind kind = AlphaHeadKind::softplus);

struct ParamGrads {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    void accumulate(const ParamGrads& other);
};

ParamGrads zero_grads(const Architecture& arch);

/// Backpropagation from a gradient on the logits.
ParamGrads backward_from_logits(const MlpParams& params, const ForwardTrace& trace,
                                std::span<const double> dloss_dlogits);

/// Backpropagation from a gradient on alpha, through the evidence head.
ParamGrads backward(const MlpParams& params, const ForwardTrace& trace,
                    std::span<const double> dloss_dalpha,
                    AlphaHeadKind kind = AlphaHeadKind::softplus);

/// Standard Adam update (beta1 0.9, beta2 0.999, eps 1e-8, bias-corrected);
/// increments the step counter. Throws TrainingError on non-finite grads.
void adam_step(MlpParams& params, const ParamGrads& grads, double lr);

/// Overflow-safe softmax.
ProbVector softmax(std::span<const double> logits);

/// Flatten/restore in checkpoint order: layer 0 weights row-major,
/// layer 0 biases, layer 1 weights, ...
std::vector<double> flatten_params(const std::vector<std::vector<double>>& weights,
                                   const std::vector<std::vector<double>>& biases);
void unflatten_params(const Architecture& arch, std::span<const double> flat,
                      std::vector<std::vector<double>>& weights,
                      std::vector<std::vector<double>>& biases);

} // namespace fsvi

#endif
