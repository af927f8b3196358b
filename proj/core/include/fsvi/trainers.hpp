#ifndef FSVI_TRAINERS_HPP
#define FSVI_TRAINERS_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fsvi/checkpoint.hpp"
#include "fsvi/dataset.hpp"
#include "fsvi/felbo.hpp"

namespace fsvi {

/// One line of the training log. Serialized as NDJSON with exactly these
/// field names; see docs/formats.md.
struct EpochRecord {
    int epoch = 0;
    double loss_nll = 0.0;
    double loss_kl = 0.0;
    double lambda = 0.0;
    double train_acc = 0.0;
    std::int64_t wall_ms = 0;
};

using TrainLog = std::vector<EpochRecord>;

void write_train_log(const TrainLog& log, const std::filesystem::path& path);

struct TrainedModel {
    ModelCheckpoint checkpoint;
    TrainLog log;
};

/// Variational training: per batch, evaluate the network at the minibatch
/// and fresh Gaussian OOD measure points, take the closed-form objective
/// and its alpha-gradients, backprop, Adam. Deterministic given the seed.
TrainedModel train_fsvi(const Dataset& train, const FsviConfig& config);

/// Softmax + cross-entropy baseline on the same trunk; dropout active at
/// train time when config.dropout_rate > 0.
TrainedModel train_standard(const Dataset& train, const FsviConfig& config);

/// Mean softmax over `passes` stochastic forward passes with dropout live.
ProbVector predict_mc_dropout(const ModelCheckpoint& model, std::span<const double> x, int passes,
                              Rng& rng);

struct EnsembleModel {
    std::vector<ModelCheckpoint> members;
    std::vector<TrainLog> logs;
};

/// Deep ensemble: `size` standard models differing only by seed
/// (config.seed + member index).
EnsembleModel train_ensemble(const Dataset& train, const FsviConfig& config, int size);

/// Mean of member softmax outputs, in member-index order.
ProbVector predict_ensemble(const EnsembleModel& ensemble, std::span<const double> x);

/// Deterministic single-pass predictions.
ProbVector predict_softmax(const ModelCheckpoint& model, std::span<const double> x);
AlphaVector predict_alpha(const ModelCheckpoint& model, std::span<const double> x);

/// Share of rows whose argmax prediction matches the label, eval mode.
double train_accuracy(const MlpParams& params, const Dataset& dataset);

} // namespace fsvi

#endif
