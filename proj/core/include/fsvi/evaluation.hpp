#ifndef FSVI_EVALUATION_HPP
#define FSVI_EVALUATION_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "fsvi/calibration.hpp"
#include "fsvi/dataset.hpp"
#include "fsvi/trainers.hpp"

namespace fsvi {

/// How cmd_eval turns a checkpoint into predictions. Single models come
/// from their checkpoint's method; ensembles aggregate member checkpoints.
struct Evaluator {
    std::vector<ModelCheckpoint> models; // one entry unless ensemble
    int mc_passes = 32;                  // dropout method only
    std::uint64_t seed = 0;              // dropout MC pass stream

    const ModelCheckpoint& primary() const { return models.front(); }
    bool is_ensemble() const { return models.size() > 1; }

    PredictionRecord predict(std::span<const double> x, std::optional<int> label, bool is_ood,
                             Rng& rng) const;
};

/// Records for every dataset row, in row order.
std::vector<PredictionRecord> evaluate_dataset(const Evaluator& evaluator, const Dataset& dataset);

/// Records for unlabeled OOD feature vectors, flagged is_ood.
std::vector<PredictionRecord> evaluate_ood(const Evaluator& evaluator,
                                           const std::vector<std::vector<double>>& features);

double accuracy(std::span<const PredictionRecord> records);

/// NDJSON, one record per line; missing label / alpha / differential
/// entropy are omitted rather than null.
std::string prediction_record_to_json(const PredictionRecord& record);
void write_predictions_ndjson(std::span<const PredictionRecord> records,
                              const std::filesystem::path& path);
std::vector<PredictionRecord> load_predictions_ndjson(const std::filesystem::path& path);

} // namespace fsvi

#endif
