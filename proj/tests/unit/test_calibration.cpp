#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "fsvi/calibration.hpp"
#include "helpers.hpp"

using namespace fsvi;

namespace {

// A labeled record with a chosen confidence: predictive (p, (1-p)/(K-1), ...),
// predicted class 0, true label 0 when correct.
PredictionRecord make_record(double confidence, bool correct, int k = 3) {
    std::vector<double> p(static_cast<std::size_t>(k),
                          (1.0 - confidence) / static_cast<double>(k - 1));
    p[0] = confidence;
    return record_from_probs(ProbVector(std::move(p)), correct ? 0 : 1, false);
}

// Independent ECE oracle: per-bin membership by direct interval scan.
double ece_bruteforce(std::span<const PredictionRecord> records, int num_bins) {
    double total = 0.0;
    for (int m = 1; m <= num_bins; ++m) {
        const double lo = static_cast<double>(m - 1) / num_bins;
        const double hi = static_cast<double>(m) / num_bins;
        int count = 0;
        double acc = 0.0, conf = 0.0;
        for (const auto& rec : records) {
            const bool inside =
                (rec.confidence > lo && rec.confidence <= hi) || (m == 1 && rec.confidence == 0.0);
            if (inside) {
                ++count;
                acc += rec.correct ? 1.0 : 0.0;
                conf += rec.confidence;
            }
        }
        if (count > 0) {
            total += (static_cast<double>(count) / records.size()) *
                     std::abs(acc / count - conf / count);
        }
    }
    return total;
}

// Brute-force AUROC: count positive-negative pairs, ties at half credit.
double auroc_bruteforce(std::span<const double> scores, const std::vector<bool>& labels) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) {
            continue;
        }
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j]) {
                continue;
            }
            ++pairs;
            if (scores[i] > scores[j]) {
                wins += 1.0;
            } else if (scores[i] == scores[j]) {
                wins += 0.5;
            }
        }
    }
    return wins / static_cast<double>(pairs);
}

} // namespace

TEST_SUITE("calibration") {

TEST_CASE("bin assignment uses half-open upper-closed intervals") {
    std::vector<PredictionRecord> records = {make_record(0.55, true), make_record(0.6, true),
                                             make_record(0.8, true), make_record(0.9, true)};
    const auto bins = bin_predictions(records, 2);
    REQUIRE(bins.size() == 2);
    CHECK(bins[0].count == 0);
    CHECK(bins[1].count == 4);

    // Exactly 0.5 belongs to bin 1 under ((m-1)/M, m/M].
    std::vector<PredictionRecord> boundary = {make_record(0.5, true)};
    const auto b2 = bin_predictions(boundary, 2);
    CHECK(b2[0].count == 1);
    CHECK(b2[1].count == 0);

    // Confidence 1.0 lands in the top bin.
    std::vector<PredictionRecord> top = {make_record(1.0, true)};
    const auto b15 = bin_predictions(top, 15);
    CHECK(b15[14].count == 1);

    CHECK_THROWS_AS(bin_predictions(records, 0), std::domain_error);
}

TEST_CASE("hand-enumerated ECE case") {
    // acc 0.75, conf 0.7125, all in bin 2 of 2 -> ECE = 0.0375.
    std::vector<PredictionRecord> records = {make_record(0.9, true), make_record(0.8, false),
                                             make_record(0.6, true), make_record(0.55, true)};
    CHECK(ece(records, 2) == doctest::Approx(0.0375).epsilon(1e-15));
}

TEST_CASE("perfect calibration and single-record cases") {
    std::vector<PredictionRecord> perfect;
    for (int i = 0; i < 10; ++i) {
        perfect.push_back(make_record(1.0, true));
    }
    CHECK(ece(perfect, 15) == 0.0);

    std::vector<PredictionRecord> one = {make_record(0.7, false)};
    CHECK(ece(one, 1) == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("M=1 identity: ECE = |accuracy - mean confidence|") {
    Rng rng(42);
    std::vector<PredictionRecord> records;
    double acc = 0.0, conf = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double c = rng.uniform(0.34, 1.0);
        const bool correct = rng.uniform() < c * 0.8;
        records.push_back(make_record(c, correct));
        acc += correct ? 1.0 : 0.0;
        conf += c;
    }
    CHECK(ece(records, 1) ==
          doctest::Approx(std::abs(acc / 100 - conf / 100)).epsilon(1e-12));
}

TEST_CASE("ECE matches brute-force enumeration on small inputs") {
    Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(12));
        const int m = 1 + static_cast<int>(rng.below(4));
        std::vector<PredictionRecord> records;
        for (int i = 0; i < n; ++i) {
            records.push_back(make_record(rng.uniform(0.34, 1.0), rng.uniform() < 0.5));
        }
        CHECK(ece(records, m) == ece_bruteforce(records, m));
    }
}

TEST_CASE("ECE is invariant to permutation and duplication") {
    Rng rng(11);
    std::vector<PredictionRecord> records;
    for (int i = 0; i < 40; ++i) {
        records.push_back(make_record(rng.uniform(0.34, 1.0), rng.uniform() < 0.6));
    }
    const double base = ece(records, 15);
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);

    auto shuffled = records;
    std::reverse(shuffled.begin(), shuffled.end());
    CHECK(ece(shuffled, 15) == doctest::Approx(base).epsilon(1e-15));

    auto doubled = records;
    doubled.insert(doubled.end(), records.begin(), records.end());
    CHECK(ece(doubled, 15) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("reliability report round-trips through JSON") {
    Rng rng(13);
    std::vector<PredictionRecord> records;
    for (int i = 0; i < 60; ++i) {
        records.push_back(make_record(rng.uniform(0.34, 1.0), rng.uniform() < 0.7));
    }
    const auto report = reliability_data(records, 15);
    CHECK(report.n == 60);
    int total = 0;
    for (const auto& bin : report.bins) {
        total += bin.count;
    }
    CHECK(total == 60);
    CHECK(report.ece == doctest::Approx(ece(records, 15)).epsilon(1e-15));

    const auto parsed = calibration_report_from_json(calibration_report_to_json(report));
    CHECK(parsed.ece == report.ece);
    CHECK(parsed.n == report.n);
    CHECK(parsed.num_bins == report.num_bins);
    REQUIRE(parsed.bins.size() == report.bins.size());
    for (std::size_t i = 0; i < report.bins.size(); ++i) {
        CHECK(parsed.bins[i].count == report.bins[i].count);
        CHECK(parsed.bins[i].accuracy == report.bins[i].accuracy);
        CHECK(parsed.bins[i].mean_confidence == report.bins[i].mean_confidence);
        CHECK(parsed.bins[i].lo == report.bins[i].lo);
        CHECK(parsed.bins[i].hi == report.bins[i].hi);
    }
}

TEST_CASE("perfectly calibrated synthetic bins have acc == conf") {
    // Bin centers as confidences, accuracy equal to confidence by
    // construction: 4 of 5 correct at 0.8, 3 of 5 at 0.6.
    std::vector<PredictionRecord> records;
    for (int i = 0; i < 5; ++i) records.push_back(make_record(0.8, i < 4));
    for (int i = 0; i < 5; ++i) records.push_back(make_record(0.6, i < 3));
    const auto report = reliability_data(records, 5);
    for (const auto& bin : report.bins) {
        if (bin.count > 0) {
            CHECK(std::abs(bin.accuracy - bin.mean_confidence) < 1e-12);
        }
    }
    CHECK(report.ece < 1e-12);
}

TEST_CASE("auroc examples") {
    // Perfect separation.
    const std::vector<double> sep = {0.1, 0.2, 0.8, 0.9};
    CHECK(auroc(sep, {false, false, true, true}) == doctest::Approx(1.0));
    // All ties.
    const std::vector<double> ties = {0.5, 0.5, 0.5, 0.5};
    CHECK(auroc(ties, {false, true, false, true}) == doctest::Approx(0.5));
    // Mixed case: 3 of 4 pairs won.
    const std::vector<double> mixed = {0.2, 0.9, 0.6, 0.3};
    CHECK(auroc(mixed, {false, true, false, true}) == doctest::Approx(0.75));

    CHECK_THROWS_AS(auroc(sep, {true, true, true, true}), std::domain_error);
    CHECK_THROWS_AS(auroc(sep, {false, false, false, false}), std::domain_error);
}

TEST_CASE("auroc equals brute-force pair counting") {
    Rng rng(99);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 5 + static_cast<int>(rng.below(46));
        std::vector<double> scores;
        std::vector<bool> labels;
        int positives = 0;
        for (int i = 0; i < n; ++i) {
            // Quantized scores force plenty of ties.
            scores.push_back(std::round(rng.uniform(0.0, 1.0) * 8.0) / 8.0);
            const bool label = rng.uniform() < 0.5;
            labels.push_back(label);
            positives += label ? 1 : 0;
        }
        if (positives == 0 || positives == n) {
            continue;
        }
        CHECK(auroc(scores, labels) ==
              doctest::Approx(auroc_bruteforce(scores, labels)).epsilon(1e-12));
    }
}

TEST_CASE("uncertainty report separates the groups") {
    // In-distribution records: confident alphas. OOD: prior-like alphas.
    std::vector<PredictionRecord> in_dist, ood;
    Rng rng(21);
    for (int i = 0; i < 50; ++i) {
        in_dist.push_back(
            record_from_alpha(AlphaVector({50.0 + rng.uniform(), 1.0, 1.0}), 0, false));
        ood.push_back(record_from_alpha(
            AlphaVector({1.0 + 0.01 * rng.uniform(), 1.0, 1.0}), std::nullopt, true));
    }
    const auto report = uncertainty_report(in_dist, ood);
    CHECK_FALSE(report.output_entropy_only);
    REQUIRE(report.ood.has_value());
    REQUIRE(report.in_dist.differential_entropy.has_value());
    REQUIRE(report.ood->differential_entropy.has_value());
    CHECK(report.ood->differential_entropy->median >
          report.in_dist.differential_entropy->median);
    REQUIRE(report.auroc_differential_entropy.has_value());
    CHECK(*report.auroc_differential_entropy > 0.99);

    // Histogram counts sum to group sizes.
    int count = 0;
    for (int c : report.in_dist.output_entropy.histogram) count += c;
    CHECK(count == 50);
    count = 0;
    for (int c : report.ood->output_entropy.histogram) count += c;
    CHECK(count == 50);
}

TEST_CASE("prior-like records pin both entropies") {
    std::vector<PredictionRecord> records;
    for (int i = 0; i < 5; ++i) {
        records.push_back(record_from_alpha(AlphaVector::uniform_prior(3), 1, false));
    }
    for (const auto& rec : records) {
        CHECK(rec.output_entropy == doctest::Approx(std::log(3.0)).epsilon(1e-12));
        CHECK(*rec.differential_entropy == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
    }
}

TEST_CASE("records without differential entropy restrict the report") {
    std::vector<PredictionRecord> in_dist = {
        record_from_probs(ProbVector({0.7, 0.2, 0.1}), 0, false)};
    std::vector<PredictionRecord> ood = {
        record_from_probs(ProbVector({0.4, 0.3, 0.3}), std::nullopt, true)};
    const auto report = uncertainty_report(in_dist, ood);
    CHECK(report.output_entropy_only);
    CHECK_FALSE(report.in_dist.differential_entropy.has_value());
    CHECK_FALSE(report.auroc_differential_entropy.has_value());
    CHECK(report.auroc_output_entropy.has_value());
}

TEST_CASE("record constructors fill the derived fields") {
    const auto rec = record_from_alpha(AlphaVector({6.0, 2.0, 2.0}), 0, false);
    CHECK(rec.confidence == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(rec.predicted_class == 0);
    CHECK(rec.correct);
    REQUIRE(rec.alpha.has_value());
    CHECK(rec.output_entropy ==
          doctest::Approx(output_entropy(AlphaVector({6.0, 2.0, 2.0}))).epsilon(1e-12));

    const auto wrong = record_from_alpha(AlphaVector({6.0, 2.0, 2.0}), 2, false);
    CHECK_FALSE(wrong.correct);

    const auto unlabeled = record_from_probs(ProbVector({0.5, 0.5}), std::nullopt, true);
    CHECK_FALSE(unlabeled.correct);
    CHECK(unlabeled.is_ood);
}

} // TEST_SUITE
