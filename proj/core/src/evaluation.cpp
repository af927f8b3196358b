#include "fsvi/evaluation.hpp"

#include <fstream>

#include <json.hpp>

namespace fsvi {

PredictionRecord Evaluator::predict(std::span<const double> x, std::optional<int> label,
                                    bool is_ood, Rng& rng) const {
    if (models.empty()) {
        throw std::invalid_argument("Evaluator: no models");
    }
    if (is_ensemble()) {
        EnsembleModel view;
        view.members = models;
        return record_from_probs(predict_ensemble(view, x), label, is_ood);
    }
    const ModelCheckpoint& model = primary();
    if (model.is_dirichlet()) {
        return record_from_alpha(predict_alpha(model, x), label, is_ood);
    }
    if (model.method == "dropout") {
        return record_from_probs(predict_mc_dropout(model, x, mc_passes, rng), label, is_ood);
    }
    return record_from_probs(predict_softmax(model, x), label, is_ood);
}

std::vector<PredictionRecord> evaluate_dataset(const Evaluator& evaluator,
                                               const Dataset& dataset) {
    Rng rng(evaluator.seed);
    std::vector<PredictionRecord> records;
    records.reserve(static_cast<std::size_t>(dataset.size()));
    for (int i = 0; i < dataset.size(); ++i) {
        records.push_back(evaluator.predict(dataset.row(i), dataset.label(i), false, rng));
    }
    return records;
}

std::vector<PredictionRecord> evaluate_ood(const Evaluator& evaluator,
                                           const std::vector<std::vector<double>>& features) {
    Rng rng(evaluator.seed + 1); // distinct MC stream from the labeled pass
    std::vector<PredictionRecord> records;
    records.reserve(features.size());
    for (const auto& x : features) {
        records.push_back(evaluator.predict(x, std::nullopt, true, rng));
    }
    return records;
}

double accuracy(std::span<const PredictionRecord> records) {
    if (records.empty()) {
        return 0.0;
    }
    int correct = 0;
    int labeled = 0;
    for (const PredictionRecord& rec : records) {
        if (rec.true_label) {
            ++labeled;
            correct += rec.correct ? 1 : 0;
        }
    }
    return labeled == 0 ? 0.0 : static_cast<double>(correct) / labeled;
}

std::string prediction_record_to_json(const PredictionRecord& record) {
    nlohmann::json j;
    j["predictive"] = std::vector<double>(record.predictive.values().begin(),
                                          record.predictive.values().end());
    j["confidence"] = record.confidence;
    j["predicted_class"] = record.predicted_class;
    if (record.true_label) {
        j["true_label"] = *record.true_label;
        j["correct"] = record.correct;
    }
    j["output_entropy"] = record.output_entropy;
    if (record.differential_entropy) {
        j["differential_entropy"] = *record.differential_entropy;
    }
    if (record.alpha) {
        j["alpha"] =
            std::vector<double>(record.alpha->values().begin(), record.alpha->values().end());
    }
    j["is_ood"] = record.is_ood;
    return j.dump();
}

void write_predictions_ndjson(std::span<const PredictionRecord> records,
                              const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("write_predictions_ndjson: cannot open " + path.string());
    }
    for (const PredictionRecord& rec : records) {
        out << prediction_record_to_json(rec) << '\n';
    }
}

std::vector<PredictionRecord> load_predictions_ndjson(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_predictions_ndjson: cannot open " + path.string());
    }
    std::vector<PredictionRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const nlohmann::json j = nlohmann::json::parse(line);
        PredictionRecord rec{ProbVector(j.at("predictive").get<std::vector<double>>())};
        rec.confidence = j.at("confidence").get<double>();
        rec.predicted_class = j.at("predicted_class").get<int>();
        if (j.contains("true_label")) {
            rec.true_label = j.at("true_label").get<int>();
            rec.correct = j.at("correct").get<bool>();
        }
        rec.output_entropy = j.at("output_entropy").get<double>();
        if (j.contains("differential_entropy")) {
            rec.differential_entropy = j.at("differential_entropy").get<double>();
        }
        if (j.contains("alpha")) {
            rec.alpha = AlphaVector(j.at("alpha").get<std::vector<double>>());
        }
        rec.is_ood = j.at("is_ood").get<bool>();
        records.push_back(std::move(rec));
    }
    return records;
}

} // namespace fsvi
