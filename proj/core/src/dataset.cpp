#include "fsvi/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace fsvi {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& token, const std::filesystem::path& path, int line) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(token, &pos);
    } catch (const std::exception&) {
        throw ParseError(path.string() + ":" + std::to_string(line) + ": bad number '" + token +
                         "'");
    }
    if (pos != token.size() || !std::isfinite(v)) {
        throw ParseError(path.string() + ":" + std::to_string(line) + ": bad number '" + token +
                         "'");
    }
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> tokens;
    std::stringstream ss(line);
    std::string token;
    while (std::getline(ss, token, ',')) {
        tokens.push_back(token);
    }
    if (!line.empty() && line.back() == ',') {
        tokens.emplace_back();
    }
    return tokens;
}

} // namespace

Standardization identity_standardization(int dim) {
    return Standardization{std::vector<double>(static_cast<std::size_t>(dim), 0.0),
                           std::vector<double>(static_cast<std::size_t>(dim), 1.0)};
}

Dataset::Dataset(std::vector<double> features, std::vector<int> labels, int dim, int num_classes,
                 Standardization standardization, Split split)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      dim_(dim),
      num_classes_(num_classes),
      standardization_(std::move(standardization)),
      split_(split) {
    if (dim_ < 1 || num_classes_ < 2) {
        throw std::domain_error("Dataset: need dim >= 1 and num_classes >= 2");
    }
    if (features_.size() != labels_.size() * static_cast<std::size_t>(dim_)) {
        throw std::domain_error("Dataset: feature/label shape mismatch");
    }
    if (standardization_.mean.size() != static_cast<std::size_t>(dim_) ||
        standardization_.stddev.size() != static_cast<std::size_t>(dim_)) {
        throw std::domain_error("Dataset: standardization dimension mismatch");
    }
    for (double s : standardization_.stddev) {
        if (!(s > 0.0)) {
            throw std::domain_error("Dataset: standardization stddev must be positive");
        }
    }
    for (double f : features_) {
        if (!std::isfinite(f)) {
            throw std::domain_error("Dataset: features must be finite");
        }
    }
    for (int label : labels_) {
        if (label < 0 || label >= num_classes_) {
            throw std::domain_error("Dataset: label out of range");
        }
    }
}

std::vector<std::vector<double>> ClusterSpec::resolved_centers() const {
    if (!centers.empty()) {
        return centers;
    }
    const double sep = 1.5 * cluster_stddev; // overlap pair separation
    const double far = 6.0 * cluster_stddev; // everyone else
    std::vector<std::vector<double>> out(static_cast<std::size_t>(num_classes),
                                         std::vector<double>(static_cast<std::size_t>(dim), 0.0));
    out[static_cast<std::size_t>(overlap_pair.first)] =
        std::vector<double>(static_cast<std::size_t>(dim), 0.0);
    auto& second = out[static_cast<std::size_t>(overlap_pair.second)];
    second.assign(static_cast<std::size_t>(dim), 0.0);
    second[0] = sep;
    int placed = 0;
    for (int c = 0; c < num_classes; ++c) {
        if (c == overlap_pair.first || c == overlap_pair.second) {
            continue;
        }
        auto& center = out[static_cast<std::size_t>(c)];
        center.assign(static_cast<std::size_t>(dim), 0.0);
        if (dim == 1) {
            const double side = (placed % 2 == 0) ? 1.0 : -1.0;
            center[0] = side * far * (1.0 + placed / 2);
        } else {
            // Ring of radius 6 sigma, starting straight above the pair.
            const double angle = kPi / 2.0 + placed * (kPi / 3.0);
            center[0] = far * std::cos(angle);
            center[1] = far * std::sin(angle);
        }
        ++placed;
    }
    return out;
}

std::vector<double> ClusterSpec::resolved_stddevs() const {
    if (!class_stddev.empty()) {
        return class_stddev;
    }
    std::vector<double> out(static_cast<std::size_t>(num_classes), far_class_stddev);
    out[static_cast<std::size_t>(overlap_pair.first)] = cluster_stddev;
    out[static_cast<std::size_t>(overlap_pair.second)] = cluster_stddev;
    return out;
}

void ClusterSpec::validate() const {
    if (num_classes < 2) {
        throw std::domain_error("ClusterSpec: num_classes must be >= 2");
    }
    if (dim < 1) {
        throw std::domain_error("ClusterSpec: dim must be >= 1");
    }
    if (samples_per_class < 1) {
        throw std::domain_error("ClusterSpec: samples_per_class must be >= 1");
    }
    if (!(cluster_stddev > 0.0) || !(far_class_stddev > 0.0)) {
        throw std::domain_error("ClusterSpec: stddevs must be positive");
    }
    if (!class_stddev.empty()) {
        if (class_stddev.size() != static_cast<std::size_t>(num_classes)) {
            throw std::domain_error("ClusterSpec: need one class_stddev per class");
        }
        for (double s : class_stddev) {
            if (!(s > 0.0)) {
                throw std::domain_error("ClusterSpec: class_stddev must be positive");
            }
        }
    }
    if (overlap_pair.first < 0 || overlap_pair.first >= num_classes || overlap_pair.second < 0 ||
        overlap_pair.second >= num_classes || overlap_pair.first == overlap_pair.second) {
        throw std::domain_error("ClusterSpec: overlap_pair must name two distinct classes");
    }
    if (!centers.empty()) {
        if (centers.size() != static_cast<std::size_t>(num_classes)) {
            throw std::domain_error("ClusterSpec: need one center per class");
        }
        for (const auto& c : centers) {
            if (c.size() != static_cast<std::size_t>(dim)) {
                throw std::domain_error("ClusterSpec: center dimension mismatch");
            }
        }
    }
}

Standardization compute_standardization(std::span<const double> features, int dim) {
    const std::size_t n = features.size() / static_cast<std::size_t>(dim);
    if (n == 0) {
        throw std::domain_error("compute_standardization: empty feature matrix");
    }
    Standardization stats;
    stats.mean.assign(static_cast<std::size_t>(dim), 0.0);
    stats.stddev.assign(static_cast<std::size_t>(dim), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (int d = 0; d < dim; ++d) {
            stats.mean[static_cast<std::size_t>(d)] +=
                features[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(d)];
        }
    }
    for (double& m : stats.mean) {
        m /= static_cast<double>(n);
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (int d = 0; d < dim; ++d) {
            const double diff =
                features[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(d)] -
                stats.mean[static_cast<std::size_t>(d)];
            stats.stddev[static_cast<std::size_t>(d)] += diff * diff;
        }
    }
    for (double& s : stats.stddev) {
        s = std::sqrt(s / static_cast<double>(n));
        if (!(s > 0.0)) {
            throw std::domain_error("compute_standardization: degenerate dimension (stddev 0)");
        }
    }
    return stats;
}

std::vector<double> standardize_point(std::span<const double> raw, const Standardization& stats) {
    std::vector<double> out(raw.size());
    for (std::size_t d = 0; d < raw.size(); ++d) {
        out[d] = (raw[d] - stats.mean[d]) / stats.stddev[d];
    }
    return out;
}

std::vector<double> unstandardize_point(std::span<const double> standardized,
                                        const Standardization& stats) {
    std::vector<double> out(standardized.size());
    for (std::size_t d = 0; d < standardized.size(); ++d) {
        out[d] = standardized[d] * stats.stddev[d] + stats.mean[d];
    }
    return out;
}

std::pair<Dataset, Dataset> gen_clusters(const ClusterSpec& spec, std::uint64_t seed) {
    spec.validate();
    const auto centers = spec.resolved_centers();
    const auto stddevs = spec.resolved_stddevs();
    Rng rng(seed);

    const int per_class = spec.samples_per_class;
    const int train_per_class = static_cast<int>(std::llround(0.8 * per_class));
    const std::size_t dim = static_cast<std::size_t>(spec.dim);

    std::vector<double> train_features, test_features;
    std::vector<int> train_labels, test_labels;
    train_features.reserve(static_cast<std::size_t>(train_per_class) * spec.num_classes * dim);
    test_features.reserve(static_cast<std::size_t>(per_class - train_per_class) *
                          spec.num_classes * dim);

    // Draws are i.i.d., so taking the first 80% per class is already a
    // stratified random split.
    for (int c = 0; c < spec.num_classes; ++c) {
        const auto& center = centers[static_cast<std::size_t>(c)];
        const double stddev = stddevs[static_cast<std::size_t>(c)];
        for (int i = 0; i < per_class; ++i) {
            const bool in_train = i < train_per_class;
            auto& features = in_train ? train_features : test_features;
            auto& labels = in_train ? train_labels : test_labels;
            for (std::size_t d = 0; d < dim; ++d) {
                features.push_back(rng.normal(center[d], stddev));
            }
            labels.push_back(c);
        }
    }

    const Standardization stats = compute_standardization(train_features, spec.dim);
    auto apply = [&](std::vector<double>& features) {
        const std::size_t n = features.size() / dim;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t d = 0; d < dim; ++d) {
                features[i * dim + d] = (features[i * dim + d] - stats.mean[d]) / stats.stddev[d];
            }
        }
    };
    apply(train_features);
    apply(test_features);

    return {Dataset(std::move(train_features), std::move(train_labels), spec.dim,
                    spec.num_classes, stats, Split::train),
            Dataset(std::move(test_features), std::move(test_labels), spec.dim, spec.num_classes,
                    stats, Split::test)};
}

std::vector<std::vector<double>> gen_ood_train(const Standardization& stats, int n, Rng& rng,
                                               double stddev) {
    if (n < 1) {
        throw std::domain_error("gen_ood_train: n must be >= 1");
    }
    if (!(stddev > 0.0)) {
        throw std::domain_error("gen_ood_train: stddev must be positive");
    }
    const std::size_t dim = stats.mean.size();
    std::vector<std::vector<double>> points(static_cast<std::size_t>(n),
                                            std::vector<double>(dim, 0.0));
    for (auto& point : points) {
        for (std::size_t d = 0; d < dim; ++d) {
            point[d] = rng.normal(0.0, stddev);
        }
    }
    return points;
}

std::vector<std::pair<double, double>> feature_range(const Dataset& dataset) {
    std::vector<std::pair<double, double>> range(
        static_cast<std::size_t>(dataset.dim()),
        {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()});
    for (int i = 0; i < dataset.size(); ++i) {
        const auto row = dataset.row(i);
        for (int d = 0; d < dataset.dim(); ++d) {
            auto& [lo, hi] = range[static_cast<std::size_t>(d)];
            lo = std::min(lo, row[static_cast<std::size_t>(d)]);
            hi = std::max(hi, row[static_cast<std::size_t>(d)]);
        }
    }
    if (dataset.size() == 0) {
        throw std::domain_error("feature_range: empty dataset");
    }
    return range;
}

std::vector<std::vector<double>> gen_ood_test(
    const std::vector<std::pair<double, double>>& train_range, double margin, int n, Rng& rng) {
    if (n < 1) {
        throw std::domain_error("gen_ood_test: n must be >= 1");
    }
    if (margin < 0.0) {
        throw std::domain_error("gen_ood_test: margin must be >= 0");
    }
    std::vector<std::vector<double>> points(static_cast<std::size_t>(n),
                                            std::vector<double>(train_range.size(), 0.0));
    for (auto& point : points) {
        for (std::size_t d = 0; d < train_range.size(); ++d) {
            const double lo = train_range[d].first - margin;
            const double hi = train_range[d].second + margin;
            point[d] = (lo < hi) ? rng.uniform(lo, hi) : lo; // degenerate box collapses to a point
        }
    }
    return points;
}

std::vector<int> overlap_region_indices(const Dataset& dataset, const ClusterSpec& spec) {
    const auto centers = spec.resolved_centers();
    const auto& a = centers[static_cast<std::size_t>(spec.overlap_pair.first)];
    const auto& b = centers[static_cast<std::size_t>(spec.overlap_pair.second)];
    std::vector<double> midpoint(a.size());
    for (std::size_t d = 0; d < a.size(); ++d) {
        midpoint[d] = 0.5 * (a[d] + b[d]);
    }
    const double radius = 0.75 * spec.cluster_stddev;
    std::vector<int> indices;
    for (int i = 0; i < dataset.size(); ++i) {
        const auto raw = unstandardize_point(dataset.row(i), dataset.standardization());
        double dist2 = 0.0;
        for (std::size_t d = 0; d < raw.size(); ++d) {
            const double diff = raw[d] - midpoint[d];
            dist2 += diff * diff;
        }
        if (dist2 <= radius * radius) {
            indices.push_back(i);
        }
    }
    return indices;
}

void save_csv(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw ParseError("save_csv: cannot open " + path.string() + " for writing");
    }
    for (int d = 0; d < dataset.dim(); ++d) {
        out << 'f' << (d + 1) << ',';
    }
    out << "label\n";
    for (int i = 0; i < dataset.size(); ++i) {
        const auto row = dataset.row(i);
        for (int d = 0; d < dataset.dim(); ++d) {
            out << format_double(row[static_cast<std::size_t>(d)]) << ',';
        }
        out << dataset.label(i) << '\n';
    }
    if (!out) {
        throw ParseError("save_csv: write failed for " + path.string());
    }
}

Dataset load_csv(const std::filesystem::path& path, int num_classes, Split split) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("load_csv: cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError(path.string() + ":1: missing header");
    }
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header.back() != "label") {
        throw ParseError(path.string() + ":1: expected header f1,...,fd,label");
    }
    const int dim = static_cast<int>(header.size()) - 1;

    std::vector<double> features;
    std::vector<int> labels;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const auto tokens = split_csv_line(line);
        if (tokens.size() != header.size()) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " fields, got " +
                             std::to_string(tokens.size()));
        }
        for (int d = 0; d < dim; ++d) {
            features.push_back(parse_double(tokens[static_cast<std::size_t>(d)], path, line_no));
        }
        int label = 0;
        try {
            std::size_t pos = 0;
            label = std::stoi(tokens.back(), &pos);
            if (pos != tokens.back().size()) {
                throw std::invalid_argument(tokens.back());
            }
        } catch (const std::exception&) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad label '" +
                             tokens.back() + "'");
        }
        if (label < 0 || label >= num_classes) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": label " +
                             std::to_string(label) + " out of range [0, " +
                             std::to_string(num_classes) + ")");
        }
        labels.push_back(label);
    }
    return Dataset(std::move(features), std::move(labels), dim, num_classes,
                   identity_standardization(dim), split);
}

void save_features_csv(const std::vector<std::vector<double>>& features,
                       const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw ParseError("save_features_csv: cannot open " + path.string() + " for writing");
    }
    const std::size_t dim = features.empty() ? 1 : features.front().size();
    for (std::size_t d = 0; d < dim; ++d) {
        out << 'f' << (d + 1) << (d + 1 < dim ? "," : "\n");
    }
    for (const auto& row : features) {
        for (std::size_t d = 0; d < row.size(); ++d) {
            out << format_double(row[d]) << (d + 1 < row.size() ? "," : "\n");
        }
    }
    if (!out) {
        throw ParseError("save_features_csv: write failed for " + path.string());
    }
}

std::vector<std::vector<double>> load_features_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("load_features_csv: cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError(path.string() + ":1: missing header");
    }
    const std::size_t dim = split_csv_line(line).size();
    std::vector<std::vector<double>> features;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const auto tokens = split_csv_line(line);
        if (tokens.size() != dim) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": expected " + std::to_string(dim) + " fields");
        }
        std::vector<double> row(dim);
        for (std::size_t d = 0; d < dim; ++d) {
            row[d] = parse_double(tokens[d], path, line_no);
        }
        features.push_back(std::move(row));
    }
    return features;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    nlohmann::json j;
    j["format"] = "fsvi-dataset";
    j["version"] = 1;
    j["seed"] = manifest.seed;
    j["spec"] = {
        {"num_classes", manifest.spec.num_classes},
        {"dim", manifest.spec.dim},
        {"samples_per_class", manifest.spec.samples_per_class},
        {"cluster_stddev", manifest.spec.cluster_stddev},
        {"far_class_stddev", manifest.spec.far_class_stddev},
        {"class_stddev", manifest.spec.resolved_stddevs()},
        {"overlap_pair", {manifest.spec.overlap_pair.first, manifest.spec.overlap_pair.second}},
        {"centers", manifest.spec.resolved_centers()},
    };
    j["standardization"] = {{"mean", manifest.standardization.mean},
                            {"stddev", manifest.standardization.stddev}};
    j["ood"] = {{"margin", manifest.ood_margin}, {"count", manifest.ood_count}};
    j["files"] = {{"train", manifest.train_file},
                  {"test", manifest.test_file},
                  {"ood_test", manifest.ood_test_file}};
    std::ofstream out(path);
    if (!out) {
        throw ParseError("save_manifest: cannot open " + path.string() + " for writing");
    }
    out << j.dump(2) << '\n';
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("load_manifest: cannot open " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("load_manifest: " + path.string() + ": " + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "fsvi-dataset") {
            throw ParseError("load_manifest: " + path.string() + ": not a dataset manifest");
        }
        DatasetManifest manifest;
        manifest.seed = j.at("seed").get<std::uint64_t>();
        const auto& spec = j.at("spec");
        manifest.spec.num_classes = spec.at("num_classes").get<int>();
        manifest.spec.dim = spec.at("dim").get<int>();
        manifest.spec.samples_per_class = spec.at("samples_per_class").get<int>();
        manifest.spec.cluster_stddev = spec.at("cluster_stddev").get<double>();
        manifest.spec.far_class_stddev = spec.at("far_class_stddev").get<double>();
        manifest.spec.class_stddev = spec.at("class_stddev").get<std::vector<double>>();
        manifest.spec.overlap_pair = {spec.at("overlap_pair").at(0).get<int>(),
                                      spec.at("overlap_pair").at(1).get<int>()};
        manifest.spec.centers = spec.at("centers").get<std::vector<std::vector<double>>>();
        manifest.standardization.mean =
            j.at("standardization").at("mean").get<std::vector<double>>();
        manifest.standardization.stddev =
            j.at("standardization").at("stddev").get<std::vector<double>>();
        manifest.ood_margin = j.at("ood").at("margin").get<double>();
        manifest.ood_count = j.at("ood").at("count").get<int>();
        manifest.train_file = j.at("files").at("train").get<std::string>();
        manifest.test_file = j.at("files").at("test").get<std::string>();
        manifest.ood_test_file = j.at("files").at("ood_test").get<std::string>();
        return manifest;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("load_manifest: " + path.string() + ": " + e.what());
    }
}

} // namespace fsvi
