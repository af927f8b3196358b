#ifndef FSVI_CHECKPOINT_HPP
#define FSVI_CHECKPOINT_HPP

#include <filesystem>
#include <string>

#include "fsvi/dataset.hpp"
#include "fsvi/mlp.hpp"

namespace fsvi {

/// A trained model plus everything needed to use it on raw inputs:
/// the method it was trained with, its evidence-head choice, dropout rate,
/// and the standardization constants of its training data.
struct ModelCheckpoint {
    std::string method = "fsvi"; // fsvi | standard | dropout | ensemble-member
    AlphaHeadKind head = AlphaHeadKind::softplus;
    double dropout_rate = 0.0;
    MlpParams params;
    Standardization standardization;

    bool is_dirichlet() const { return method == "fsvi"; }
};

/// Versioned JSON container; field layout documented in docs/formats.md.
/// Doubles serialize shortest-round-trip, so save/load is lossless.
void save_checkpoint(const ModelCheckpoint& checkpoint, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

std::string alpha_head_name(AlphaHeadKind kind);
AlphaHeadKind alpha_head_from_name(const std::string& name);

} // namespace fsvi

#endif
