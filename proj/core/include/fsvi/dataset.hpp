#ifndef FSVI_DATASET_HPP
#define FSVI_DATASET_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fsvi/rng.hpp"

namespace fsvi {

/// Raised on malformed dataset files; the message names the offending line.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Per-dimension mean/stddev of the raw training split. Features stored in
/// a Dataset are already standardized with these constants.
struct Standardization {
    std::vector<double> mean;
    std::vector<double> stddev;

    bool operator==(const Standardization&) const = default;
};

/// Identity constants (mean 0, stddev 1) for features that arrive
/// pre-standardized, e.g. from a bare CSV with no manifest.
Standardization identity_standardization(int dim);

enum class Split { train, test };

/// Labeled feature matrix in standardized coordinates.
class Dataset {
public:
    Dataset(std::vector<double> features, std::vector<int> labels, int dim, int num_classes,
            Standardization standardization, Split split);

    int size() const { return static_cast<int>(labels_.size()); }
    int dim() const { return dim_; }
    int num_classes() const { return num_classes_; }
    std::span<const double> row(int i) const {
        return std::span<const double>(features_).subspan(
            static_cast<std::size_t>(i) * static_cast<std::size_t>(dim_),
            static_cast<std::size_t>(dim_));
    }
    int label(int i) const { return labels_[static_cast<std::size_t>(i)]; }
    std::span<const double> features() const { return features_; }
    std::span<const int> labels() const { return labels_; }
    const Standardization& standardization() const { return standardization_; }
    Split split() const { return split_; }

private:
    std::vector<double> features_; // row-major, size * dim
    std::vector<int> labels_;
    int dim_;
    int num_classes_;
    Standardization standardization_;
    Split split_;
};

/// Isotropic Gaussian class clusters with one deliberately ambiguous pair:
/// the overlap pair's centers sit 1.5 sigma apart, so roughly 23% of their
/// points fall on the wrong side of the optimal boundary. The remaining
/// classes are placed 6 sigma out with a wider spread (far_class_stddev),
/// which scatters a sparse tail of their points through the dense region
/// the way rare classes do in real data.
struct ClusterSpec {
    int num_classes = 3;
    int dim = 2;
    int samples_per_class = 1000;
    double cluster_stddev = 1.0;   // overlap pair spread; also the center scale
    double far_class_stddev = 2.0; // spread of the non-overlap classes
    std::pair<int, int> overlap_pair{0, 1};
    /// Raw-space class centers; generated from the fields above when empty.
    std::vector<std::vector<double>> centers;
    /// Per-class covariance scale; derived from the two stddev fields when
    /// empty (overlap pair -> cluster_stddev, others -> far_class_stddev).
    std::vector<double> class_stddev;

    /// The centers and per-class scales that gen_clusters will actually use.
    std::vector<std::vector<double>> resolved_centers() const;
    std::vector<double> resolved_stddevs() const;
    void validate() const;
};

/// Generates the benchmark: per-class Gaussian draws, stratified 80/20
/// train/test split, standardization fitted on train and applied to both.
std::pair<Dataset, Dataset> gen_clusters(const ClusterSpec& spec, std::uint64_t seed);

/// Train-time OOD noise: Normal(0, stddev^2) per dimension in standardized
/// coordinates. stddev defaults to 2, which puts the mass at and beyond the
/// edge of the data's support.
std::vector<std::vector<double>> gen_ood_train(const Standardization& stats, int n, Rng& rng,
                                               double stddev = 2.0);

/// Per-dimension [lo, hi] of the dataset's standardized features.
std::vector<std::pair<double, double>> feature_range(const Dataset& dataset);

/// Test-time OOD noise: Uniform over the training feature box expanded by
/// `margin` on each side, per dimension.
std::vector<std::vector<double>> gen_ood_test(
    const std::vector<std::pair<double, double>>& train_range, double margin, int n, Rng& rng);

/// Fit per-dimension mean/stddev over a row-major feature matrix.
Standardization compute_standardization(std::span<const double> features, int dim);

/// Map a point between raw and standardized coordinates.
std::vector<double> standardize_point(std::span<const double> raw, const Standardization& stats);
std::vector<double> unstandardize_point(std::span<const double> standardized,
                                        const Standardization& stats);

/// Indices of dataset rows inside the designed overlap region: the ball of
/// radius 0.75 sigma (raw coordinates) around the midpoint of the overlap
/// pair's centers, where both classes carry substantial density.
std::vector<int> overlap_region_indices(const Dataset& dataset, const ClusterSpec& spec);

/// CSV with header f1,...,fd,label; floats at 17 significant digits so
/// values round-trip bit-exactly.
void save_csv(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_csv(const std::filesystem::path& path, int num_classes, Split split = Split::train);

/// Feature-only CSV (header f1,...,fd) for OOD point sets.
void save_features_csv(const std::vector<std::vector<double>>& features,
                       const std::filesystem::path& path);
std::vector<std::vector<double>> load_features_csv(const std::filesystem::path& path);

/// manifest.json written next to generated CSVs: the generating spec, seed,
/// standardization constants, and file names. Lets downstream commands
/// recover everything about a dataset from one path.
struct DatasetManifest {
    ClusterSpec spec;
    std::uint64_t seed = 0;
    Standardization standardization;
    double ood_margin = 1.5;
    int ood_count = 0;
    std::string train_file = "train.csv";
    std::string test_file = "test.csv";
    std::string ood_test_file = "ood_test.csv";
};

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

} // namespace fsvi

#endif
