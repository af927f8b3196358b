#include "fsvi/felbo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fsvi {

double FsviConfig::lambda_for_epoch(int epoch) const {
    if (kl_warmup_epochs <= 0) {
        return kl_weight;
    }
    const double ramp = static_cast<double>(epoch) / static_cast<double>(kl_warmup_epochs);
    return kl_weight * std::min(1.0, ramp);
}

void FsviConfig::validate() const {
    if (kl_weight < 0.0 || !std::isfinite(kl_weight)) {
        throw std::invalid_argument("FsviConfig: kl_weight must be >= 0");
    }
    if (kl_warmup_epochs < 0 || epochs < 1 || batch_size < 1) {
        throw std::invalid_argument("FsviConfig: counts must be positive");
    }
    if (!(lr > 0.0)) {
        throw std::invalid_argument("FsviConfig: lr must be positive");
    }
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
        throw std::invalid_argument("FsviConfig: dropout_rate must be in [0, 1)");
    }
    if (!(ood_train_stddev > 0.0)) {
        throw std::invalid_argument("FsviConfig: ood_train_stddev must be positive");
    }
}

MeasurePointBatch sample_measure_points(const Dataset& dataset, std::span<const int> batch_indices,
                                        const OodGenerator& ood_generator, int n_ood, Rng& rng) {
    if (n_ood < 0) {
        throw std::invalid_argument("sample_measure_points: n_ood must be >= 0");
    }
    MeasurePointBatch batch;
    batch.in_features.reserve(batch_indices.size());
    batch.in_labels.reserve(batch_indices.size());
    for (int idx : batch_indices) {
        if (idx < 0 || idx >= dataset.size()) {
            throw std::out_of_range("sample_measure_points: batch index out of range");
        }
        const auto row = dataset.row(idx);
        batch.in_features.emplace_back(row.begin(), row.end());
        batch.in_labels.push_back(dataset.label(idx));
    }
    if (n_ood > 0) {
        batch.ood_features = ood_generator(n_ood, rng);
    }
    return batch;
}

FelboResult felbo_loss(const std::vector<AlphaVector>& alphas_in, std::span<const int> labels,
                       const std::vector<AlphaVector>& alphas_ood, double lambda) {
    if (alphas_in.empty()) {
        throw TrainingError("felbo_loss: empty in-distribution batch");
    }
    if (alphas_in.size() != labels.size()) {
        throw std::invalid_argument("felbo_loss: alphas/labels size mismatch");
    }
    const double n_in = static_cast<double>(alphas_in.size());
    const double n_total = static_cast<double>(alphas_in.size() + alphas_ood.size());

    FelboResult result;
    result.grad_in.reserve(alphas_in.size());
    result.grad_ood.reserve(alphas_ood.size());

    for (std::size_t i = 0; i < alphas_in.size(); ++i) {
        result.nll_term += expected_nll(alphas_in[i], labels[i]);
        result.kl_term += kl_to_uniform(alphas_in[i]);

        auto grad = expected_nll_grad(alphas_in[i], labels[i]);
        const auto kl_grad = kl_to_uniform_grad(alphas_in[i]);
        for (std::size_t c = 0; c < grad.size(); ++c) {
            grad[c] = grad[c] / n_in + lambda * kl_grad[c] / n_total;
        }
        result.grad_in.push_back(std::move(grad));
    }
    for (const AlphaVector& alpha : alphas_ood) {
        result.kl_term += kl_to_uniform(alpha);
        auto grad = kl_to_uniform_grad(alpha);
        for (double& g : grad) {
            g *= lambda / n_total;
        }
        result.grad_ood.push_back(std::move(grad));
    }
    result.nll_term /= n_in;
    result.kl_term /= n_total;
    result.loss = result.nll_term + lambda * result.kl_term;
    return result;
}

} // namespace fsvi
