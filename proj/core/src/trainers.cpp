#include "fsvi/trainers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace fsvi {

namespace {

using Clock = std::chrono::steady_clock;

std::vector<std::vector<int>> make_batches(int n, int batch_size, Rng& rng) {
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);
    std::vector<std::vector<int>> batches;
    for (int start = 0; start < n; start += batch_size) {
        const int end = std::min(n, start + batch_size);
        batches.emplace_back(order.begin() + start, order.begin() + end);
    }
    return batches;
}

Architecture make_arch(const Dataset& train, const FsviConfig& config) {
    Architecture arch;
    arch.input_dim = train.dim();
    arch.hidden = config.hidden;
    arch.output_dim = train.num_classes();
    arch.validate();
    return arch;
}

void check_dataset(const Dataset& train) {
    if (train.size() == 0) {
        throw TrainingError("training dataset is empty");
    }
}

} // namespace

void write_train_log(const TrainLog& log, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw ParseError("write_train_log: cannot open " + path.string() + " for writing");
    }
    for (const EpochRecord& rec : log) {
        nlohmann::json j = {{"epoch", rec.epoch},       {"loss_nll", rec.loss_nll},
                            {"loss_kl", rec.loss_kl},   {"lambda", rec.lambda},
                            {"train_acc", rec.train_acc}, {"wall_ms", rec.wall_ms}};
        out << j.dump() << '\n';
    }
}

double train_accuracy(const MlpParams& params, const Dataset& dataset) {
    if (dataset.size() == 0) {
        return 0.0;
    }
    int correct = 0;
    for (int i = 0; i < dataset.size(); ++i) {
        const auto logits = forward_eval(params, dataset.row(i));
        const int predicted = static_cast<int>(
            std::max_element(logits.begin(), logits.end()) - logits.begin());
        if (predicted == dataset.label(i)) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / dataset.size();
}

TrainedModel train_fsvi(const Dataset& train, const FsviConfig& config) {
    config.validate();
    check_dataset(train);
    const Architecture arch = make_arch(train, config);

    Rng rng(config.seed);
    MlpParams params = init_params(arch, rng);

    const OodGenerator ood_generator = [&](int n, Rng& r) {
        return gen_ood_train(train.standardization(), n, r, config.ood_train_stddev);
    };
    const int n_ood = config.resolved_ood_per_batch();

    TrainedModel result;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto epoch_start = Clock::now();
        const double lambda = config.lambda_for_epoch(epoch);
        double nll_sum = 0.0, kl_sum = 0.0;
        int batch_count = 0;

        for (const auto& batch_indices : make_batches(train.size(), config.batch_size, rng)) {
            const MeasurePointBatch batch =
                sample_measure_points(train, batch_indices, ood_generator, n_ood, rng);

            std::vector<ForwardResult> in_passes, ood_passes;
            std::vector<AlphaVector> alphas_in, alphas_ood;
            in_passes.reserve(batch.in_features.size());
            for (const auto& x : batch.in_features) {
                in_passes.push_back(forward(params, x, RunMode::train, 0.0, rng));
                alphas_in.push_back(alpha_head(in_passes.back().logits, config.head));
            }
            ood_passes.reserve(batch.ood_features.size());
            for (const auto& x : batch.ood_features) {
                ood_passes.push_back(forward(params, x, RunMode::train, 0.0, rng));
                alphas_ood.push_back(alpha_head(ood_passes.back().logits, config.head));
            }

            const FelboResult felbo = felbo_loss(alphas_in, batch.in_labels, alphas_ood, lambda);
            if (!std::isfinite(felbo.loss)) {
                throw TrainingError("train_fsvi: non-finite loss at epoch " +
                                    std::to_string(epoch));
            }

            // Accumulate in ascending sample-index order: labeled, then OOD.
            ParamGrads grads = zero_grads(arch);
            for (std::size_t i = 0; i < in_passes.size(); ++i) {
                grads.accumulate(
                    backward(params, in_passes[i].trace, felbo.grad_in[i], config.head));
            }
            for (std::size_t i = 0; i < ood_passes.size(); ++i) {
                grads.accumulate(
                    backward(params, ood_passes[i].trace, felbo.grad_ood[i], config.head));
            }
            adam_step(params, grads, config.lr);

            nll_sum += felbo.nll_term;
            kl_sum += felbo.kl_term;
            ++batch_count;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss_nll = nll_sum / batch_count;
        rec.loss_kl = kl_sum / batch_count;
        rec.lambda = lambda;
        rec.train_acc = train_accuracy(params, train);
        rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() -
                                                                            epoch_start)
                          .count();
        result.log.push_back(rec);
    }

    result.checkpoint.method = "fsvi";
    result.checkpoint.head = config.head;
    result.checkpoint.dropout_rate = 0.0;
    result.checkpoint.params = std::move(params);
    result.checkpoint.standardization = train.standardization();
    return result;
}

TrainedModel train_standard(const Dataset& train, const FsviConfig& config) {
    config.validate();
    check_dataset(train);
    const Architecture arch = make_arch(train, config);

    Rng rng(config.seed);
    MlpParams params = init_params(arch, rng);

    TrainedModel result;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto epoch_start = Clock::now();
        double ce_sum = 0.0;
        int batch_count = 0;

        for (const auto& batch_indices : make_batches(train.size(), config.batch_size, rng)) {
            const double inv_n = 1.0 / static_cast<double>(batch_indices.size());
            ParamGrads grads = zero_grads(arch);
            double batch_ce = 0.0;
            for (int idx : batch_indices) {
                const auto pass =
                    forward(params, train.row(idx), RunMode::train, config.dropout_rate, rng);
                const ProbVector p = softmax(pass.logits);
                const int label = train.label(idx);
                batch_ce -= std::log(std::max(p[label], 1e-300));
                // d CE / d logits = softmax - onehot, averaged over the batch.
                std::vector<double> dlogits(p.values().begin(), p.values().end());
                dlogits[static_cast<std::size_t>(label)] -= 1.0;
                for (double& g : dlogits) {
                    g *= inv_n;
                }
                grads.accumulate(backward_from_logits(params, pass.trace, dlogits));
            }
            batch_ce *= inv_n;
            if (!std::isfinite(batch_ce)) {
                throw TrainingError("train_standard: non-finite loss at epoch " +
                                    std::to_string(epoch));
            }
            adam_step(params, grads, config.lr);
            ce_sum += batch_ce;
            ++batch_count;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss_nll = ce_sum / batch_count;
        rec.loss_kl = 0.0;
        rec.lambda = 0.0;
        rec.train_acc = train_accuracy(params, train);
        rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() -
                                                                            epoch_start)
                          .count();
        result.log.push_back(rec);
    }

    result.checkpoint.method = config.dropout_rate > 0.0 ? "dropout" : "standard";
    result.checkpoint.head = config.head;
    result.checkpoint.dropout_rate = config.dropout_rate;
    result.checkpoint.params = std::move(params);
    result.checkpoint.standardization = train.standardization();
    return result;
}

ProbVector predict_mc_dropout(const ModelCheckpoint& model, std::span<const double> x, int passes,
                              Rng& rng) {
    if (passes < 1) {
        throw std::domain_error("predict_mc_dropout: need at least one pass");
    }
    std::vector<double> mean(static_cast<std::size_t>(model.params.arch.output_dim), 0.0);
    for (int t = 0; t < passes; ++t) {
        const auto pass = forward(model.params, x, RunMode::mc_sample, model.dropout_rate, rng);
        const ProbVector p = softmax(pass.logits);
        for (std::size_t i = 0; i < mean.size(); ++i) {
            mean[i] += p[static_cast<int>(i)];
        }
    }
    for (double& v : mean) {
        v /= passes;
    }
    return ProbVector(std::move(mean));
}

EnsembleModel train_ensemble(const Dataset& train, const FsviConfig& config, int size) {
    if (size < 1) {
        throw std::domain_error("train_ensemble: size must be >= 1");
    }
    EnsembleModel ensemble;
    for (int member = 0; member < size; ++member) {
        FsviConfig member_config = config;
        member_config.seed = config.seed + static_cast<std::uint64_t>(member);
        member_config.dropout_rate = 0.0;
        TrainedModel trained = train_standard(train, member_config);
        trained.checkpoint.method = "ensemble-member";
        ensemble.members.push_back(std::move(trained.checkpoint));
        ensemble.logs.push_back(std::move(trained.log));
    }
    return ensemble;
}

ProbVector predict_ensemble(const EnsembleModel& ensemble, std::span<const double> x) {
    if (ensemble.members.empty()) {
        throw std::domain_error("predict_ensemble: empty ensemble");
    }
    std::vector<double> mean(
        static_cast<std::size_t>(ensemble.members.front().params.arch.output_dim), 0.0);
    for (const ModelCheckpoint& member : ensemble.members) {
        const ProbVector p = predict_softmax(member, x);
        for (std::size_t i = 0; i < mean.size(); ++i) {
            mean[i] += p[static_cast<int>(i)];
        }
    }
    for (double& v : mean) {
        v /= static_cast<double>(ensemble.members.size());
    }
    return ProbVector(std::move(mean));
}

ProbVector predict_softmax(const ModelCheckpoint& model, std::span<const double> x) {
    return softmax(forward_eval(model.params, x));
}

AlphaVector predict_alpha(const ModelCheckpoint& model, std::span<const double> x) {
    return alpha_head(forward_eval(model.params, x), model.head);
}

} // namespace fsvi
