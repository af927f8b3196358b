#include "fsvi/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace fsvi {

namespace {

constexpr int kHistogramBins = 32;

int bin_index(double confidence, int num_bins) {
    // p in ((m-1)/M, m/M] -> m; the p = 0 edge case joins bin 1.
    const int m = static_cast<int>(std::ceil(confidence * num_bins));
    return std::clamp(m, 1, num_bins);
}

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

UncertaintyStats stats_over(const std::vector<double>& values, double lo, double hi) {
    UncertaintyStats stats;
    stats.n = static_cast<int>(values.size());
    stats.hist_lo = lo;
    stats.hist_hi = hi;
    stats.histogram.assign(kHistogramBins, 0);
    if (values.empty()) {
        return stats;
    }
    stats.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    stats.median = median_of(values);
    const double width = hi > lo ? (hi - lo) : 1.0;
    for (double v : values) {
        int bin = static_cast<int>((v - lo) / width * kHistogramBins);
        bin = std::clamp(bin, 0, kHistogramBins - 1);
        stats.histogram[static_cast<std::size_t>(bin)] += 1;
    }
    return stats;
}

nlohmann::json stats_to_json(const UncertaintyStats& stats) {
    return {{"n", stats.n},           {"mean", stats.mean},       {"median", stats.median},
            {"hist_lo", stats.hist_lo}, {"hist_hi", stats.hist_hi}, {"histogram", stats.histogram}};
}

nlohmann::json group_to_json(const UncertaintyGroup& group) {
    nlohmann::json j = {{"n", group.n}, {"output_entropy", stats_to_json(group.output_entropy)}};
    if (group.differential_entropy) {
        j["differential_entropy"] = stats_to_json(*group.differential_entropy);
    }
    return j;
}

} // namespace

PredictionRecord record_from_alpha(const AlphaVector& alpha, std::optional<int> label,
                                   bool is_ood) {
    PredictionRecord rec{predictive_mean(alpha)};
    rec.confidence = rec.predictive.max();
    rec.predicted_class = rec.predictive.argmax();
    rec.true_label = label;
    rec.correct = label.has_value() && rec.predicted_class == *label;
    rec.output_entropy = shannon_entropy(rec.predictive);
    rec.differential_entropy = differential_entropy(alpha);
    rec.alpha = alpha;
    rec.is_ood = is_ood;
    return rec;
}

PredictionRecord record_from_probs(const ProbVector& probs, std::optional<int> label,
                                   bool is_ood) {
    PredictionRecord rec{probs};
    rec.confidence = rec.predictive.max();
    rec.predicted_class = rec.predictive.argmax();
    rec.true_label = label;
    rec.correct = label.has_value() && rec.predicted_class == *label;
    rec.output_entropy = shannon_entropy(rec.predictive);
    rec.is_ood = is_ood;
    return rec;
}

std::vector<BinStat> bin_predictions(std::span<const PredictionRecord> records, int num_bins) {
    if (num_bins < 1) {
        throw std::domain_error("bin_predictions: need at least one bin");
    }
    if (records.empty()) {
        throw std::domain_error("bin_predictions: no records");
    }
    std::vector<BinStat> bins(static_cast<std::size_t>(num_bins));
    for (int m = 1; m <= num_bins; ++m) {
        auto& bin = bins[static_cast<std::size_t>(m - 1)];
        bin.index = m;
        bin.lo = static_cast<double>(m - 1) / num_bins;
        bin.hi = static_cast<double>(m) / num_bins;
    }
    for (const PredictionRecord& rec : records) {
        if (!rec.true_label) {
            throw std::domain_error("bin_predictions: record without a label");
        }
        auto& bin = bins[static_cast<std::size_t>(bin_index(rec.confidence, num_bins) - 1)];
        bin.count += 1;
        bin.accuracy += rec.correct ? 1.0 : 0.0;
        bin.mean_confidence += rec.confidence;
    }
    for (BinStat& bin : bins) {
        if (bin.count > 0) {
            bin.accuracy /= bin.count;
            bin.mean_confidence /= bin.count;
        }
    }
    return bins;
}

double ece(std::span<const PredictionRecord> records, int num_bins) {
    const auto bins = bin_predictions(records, num_bins);
    double total = 0.0;
    for (const BinStat& bin : bins) {
        if (bin.count > 0) {
            total += (static_cast<double>(bin.count) / records.size()) *
                     std::abs(bin.accuracy - bin.mean_confidence);
        }
    }
    return total;
}

CalibrationReport reliability_data(std::span<const PredictionRecord> records, int num_bins) {
    CalibrationReport report;
    report.num_bins = num_bins;
    report.bins = bin_predictions(records, num_bins);
    report.n = static_cast<int>(records.size());
    double total = 0.0;
    for (const BinStat& bin : report.bins) {
        if (bin.count > 0) {
            total += (static_cast<double>(bin.count) / report.n) *
                     std::abs(bin.accuracy - bin.mean_confidence);
        }
    }
    report.ece = total;
    return report;
}

std::string calibration_report_to_json(const CalibrationReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const BinStat& bin : report.bins) {
        rows.push_back({{"m", bin.index},
                        {"lo", bin.lo},
                        {"hi", bin.hi},
                        {"count", bin.count},
                        {"acc", bin.accuracy},
                        {"conf", bin.mean_confidence}});
    }
    const nlohmann::json j = {
        {"num_bins", report.num_bins}, {"bins", rows}, {"ece", report.ece}, {"n", report.n}};
    return j.dump(2);
}

CalibrationReport calibration_report_from_json(const std::string& text) {
    try {
        const nlohmann::json j = nlohmann::json::parse(text);
        CalibrationReport report;
        report.num_bins = j.at("num_bins").get<int>();
        report.ece = j.at("ece").get<double>();
        report.n = j.at("n").get<int>();
        for (const auto& row : j.at("bins")) {
            BinStat bin;
            bin.index = row.at("m").get<int>();
            bin.lo = row.at("lo").get<double>();
            bin.hi = row.at("hi").get<double>();
            bin.count = row.at("count").get<int>();
            bin.accuracy = row.at("acc").get<double>();
            bin.mean_confidence = row.at("conf").get<double>();
            report.bins.push_back(bin);
        }
        return report;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("calibration_report_from_json: ") + e.what());
    }
}

void save_calibration_json(const CalibrationReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("save_calibration_json: cannot open " + path.string());
    }
    out << calibration_report_to_json(report) << '\n';
}

CalibrationReport load_calibration_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_calibration_json: cannot open " + path.string());
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return calibration_report_from_json(text);
}

void save_calibration_csv(const CalibrationReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("save_calibration_csv: cannot open " + path.string());
    }
    out << "m,lo,hi,count,acc,conf\n";
    char buf[160];
    for (const BinStat& bin : report.bins) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%d,%.17g,%.17g\n", bin.index, bin.lo,
                      bin.hi, bin.count, bin.accuracy, bin.mean_confidence);
        out << buf;
    }
}

UncertaintyReport uncertainty_report(std::span<const PredictionRecord> in_dist,
                                     std::span<const PredictionRecord> ood) {
    if (in_dist.empty()) {
        throw std::domain_error("uncertainty_report: no in-distribution records");
    }
    UncertaintyReport report;

    auto collect = [](std::span<const PredictionRecord> records, auto getter) {
        std::vector<double> values;
        values.reserve(records.size());
        for (const PredictionRecord& rec : records) {
            values.push_back(getter(rec));
        }
        return values;
    };
    const auto out_in = collect(in_dist, [](const auto& r) { return r.output_entropy; });
    const auto out_ood = collect(ood, [](const auto& r) { return r.output_entropy; });

    const bool have_differential =
        std::all_of(in_dist.begin(), in_dist.end(),
                    [](const auto& r) { return r.differential_entropy.has_value(); }) &&
        std::all_of(ood.begin(), ood.end(),
                    [](const auto& r) { return r.differential_entropy.has_value(); });
    report.output_entropy_only = !have_differential;

    // Shared histogram range across groups keeps the plots comparable.
    auto range_of = [](std::initializer_list<const std::vector<double>*> groups) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (const auto* g : groups) {
            for (double v : *g) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        return std::pair{lo, hi};
    };
    const auto [out_lo, out_hi] = range_of({&out_in, &out_ood});

    report.in_dist.n = static_cast<int>(in_dist.size());
    report.in_dist.output_entropy = stats_over(out_in, out_lo, out_hi);
    if (!ood.empty()) {
        report.ood = UncertaintyGroup{};
        report.ood->n = static_cast<int>(ood.size());
        report.ood->output_entropy = stats_over(out_ood, out_lo, out_hi);
    }

    if (have_differential) {
        const auto diff_in = collect(in_dist, [](const auto& r) { return *r.differential_entropy; });
        const auto diff_ood = collect(ood, [](const auto& r) { return *r.differential_entropy; });
        const auto [diff_lo, diff_hi] = range_of({&diff_in, &diff_ood});
        report.in_dist.differential_entropy = stats_over(diff_in, diff_lo, diff_hi);
        if (report.ood) {
            report.ood->differential_entropy = stats_over(diff_ood, diff_lo, diff_hi);
        }
        if (!ood.empty()) {
            std::vector<double> scores(diff_in);
            scores.insert(scores.end(), diff_ood.begin(), diff_ood.end());
            std::vector<bool> labels(in_dist.size(), false);
            labels.insert(labels.end(), ood.size(), true);
            report.auroc_differential_entropy = auroc(scores, labels);
        }
    }
    if (!ood.empty()) {
        std::vector<double> scores(out_in);
        scores.insert(scores.end(), out_ood.begin(), out_ood.end());
        std::vector<bool> labels(in_dist.size(), false);
        labels.insert(labels.end(), ood.size(), true);
        report.auroc_output_entropy = auroc(scores, labels);
    }
    return report;
}

std::string uncertainty_report_to_json(const UncertaintyReport& report) {
    nlohmann::json j;
    j["in_dist"] = group_to_json(report.in_dist);
    if (report.ood) {
        j["ood"] = group_to_json(*report.ood);
    }
    if (report.auroc_differential_entropy) {
        j["auroc_differential_entropy"] = *report.auroc_differential_entropy;
    }
    if (report.auroc_output_entropy) {
        j["auroc_output_entropy"] = *report.auroc_output_entropy;
    }
    j["output_entropy_only"] = report.output_entropy_only;
    return j.dump(2);
}

void save_uncertainty_json(const UncertaintyReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("save_uncertainty_json: cannot open " + path.string());
    }
    out << uncertainty_report_to_json(report) << '\n';
}

double auroc(std::span<const double> scores, const std::vector<bool>& labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw std::domain_error("auroc: need matching, nonempty scores and labels");
    }
    std::size_t n_pos = 0;
    for (bool label : labels) {
        if (label) {
            ++n_pos;
        }
    }
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw std::domain_error("auroc: need both classes present");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Midranks: tied scores share the average of their rank block.
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) {
            ++j;
        }
        const double midrank = 0.5 * static_cast<double>((i + 1) + (j + 1));
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[order[k]]) {
                pos_rank_sum += midrank;
            }
        }
        i = j + 1;
    }
    const double n_pos_d = static_cast<double>(n_pos);
    return (pos_rank_sum - n_pos_d * (n_pos_d + 1.0) / 2.0) /
           (n_pos_d * static_cast<double>(n_neg));
}

} // namespace fsvi
