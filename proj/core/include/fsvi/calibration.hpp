#ifndef FSVI_CALIBRATION_HPP
#define FSVI_CALIBRATION_HPP

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fsvi/dirichlet.hpp"

namespace fsvi {

/// One evaluated sample. Dirichlet models carry alpha and both entropies;
/// softmax baselines carry the predictive vector and output entropy only.
/// OOD inputs have no label.
struct PredictionRecord {
    ProbVector predictive;
    double confidence = 0.0; // max predictive component
    int predicted_class = 0;
    std::optional<int> true_label;
    bool correct = false;
    double output_entropy = 0.0; // nats
    std::optional<double> differential_entropy; // nats; Dirichlet models only
    std::optional<AlphaVector> alpha;
    bool is_ood = false;
};

PredictionRecord record_from_alpha(const AlphaVector& alpha, std::optional<int> label,
                                   bool is_ood);
PredictionRecord record_from_probs(const ProbVector& probs, std::optional<int> label,
                                   bool is_ood);

/// Confidence bin m covers ((m-1)/M, m/M]; confidence 0 lands in bin 1.
struct BinStat {
    int index = 0; // 1-based
    double lo = 0.0, hi = 0.0;
    int count = 0;
    double accuracy = 0.0;        // 0 when empty
    double mean_confidence = 0.0; // 0 when empty
};

struct CalibrationReport {
    int num_bins = 0;
    std::vector<BinStat> bins;
    double ece = 0.0;
    int n = 0;
};

/// Bin assignment plus per-bin accuracy and mean confidence. Empty bins are
/// reported with count 0 so reliability diagrams show the full axis.
std::vector<BinStat> bin_predictions(std::span<const PredictionRecord> records, int num_bins);

/// Expected calibration error: sum over bins of (|B_m|/n) |acc - conf|.
double ece(std::span<const PredictionRecord> records, int num_bins);

CalibrationReport reliability_data(std::span<const PredictionRecord> records, int num_bins);

std::string calibration_report_to_json(const CalibrationReport& report);
CalibrationReport calibration_report_from_json(const std::string& text);
void save_calibration_json(const CalibrationReport& report, const std::filesystem::path& path);
CalibrationReport load_calibration_json(const std::filesystem::path& path);
/// One row per bin: m, lo, hi, count, acc, conf.
void save_calibration_csv(const CalibrationReport& report, const std::filesystem::path& path);

/// Mean/median plus a fixed-width histogram of one uncertainty measure.
struct UncertaintyStats {
    int n = 0;
    double mean = 0.0;
    double median = 0.0;
    double hist_lo = 0.0;
    double hist_hi = 0.0;
    std::vector<int> histogram; // 32 equal-width bins over [hist_lo, hist_hi]
};

struct UncertaintyGroup {
    int n = 0;
    UncertaintyStats output_entropy;
    std::optional<UncertaintyStats> differential_entropy;
};

/// Side-by-side uncertainty summary for in-distribution vs OOD records.
/// Differential-entropy stats (and its AUROC) are present only when the
/// records carry them; `output_entropy_only` flags the restricted case.
struct UncertaintyReport {
    UncertaintyGroup in_dist;
    std::optional<UncertaintyGroup> ood;
    std::optional<double> auroc_differential_entropy; // OOD scored positive
    std::optional<double> auroc_output_entropy;
    bool output_entropy_only = false;
};

UncertaintyReport uncertainty_report(std::span<const PredictionRecord> in_dist,
                                     std::span<const PredictionRecord> ood);

std::string uncertainty_report_to_json(const UncertaintyReport& report);
void save_uncertainty_json(const UncertaintyReport& report, const std::filesystem::path& path);

/// Rank-based AUROC with midrank tie handling; labels true = positive.
/// Requires both classes present.
double auroc(std::span<const double> scores, const std::vector<bool>& labels);

} // namespace fsvi

#endif
