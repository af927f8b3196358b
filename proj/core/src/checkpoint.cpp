#include "fsvi/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

namespace fsvi {

std::string alpha_head_name(AlphaHeadKind kind) {
    return kind == AlphaHeadKind::softplus ? "softplus" : "exp";
}

AlphaHeadKind alpha_head_from_name(const std::string& name) {
    if (name == "softplus") {
        return AlphaHeadKind::softplus;
    }
    if (name == "exp") {
        return AlphaHeadKind::exp;
    }
    throw std::invalid_argument("unknown alpha head '" + name + "'");
}

void save_checkpoint(const ModelCheckpoint& checkpoint, const std::filesystem::path& path) {
    const MlpParams& p = checkpoint.params;
    nlohmann::json j;
    j["format"] = "fsvi-checkpoint";
    j["version"] = 1;
    j["method"] = checkpoint.method;
    j["alpha_head"] = alpha_head_name(checkpoint.head);
    j["dropout_rate"] = checkpoint.dropout_rate;
    j["arch"] = {{"input_dim", p.arch.input_dim},
                 {"hidden", p.arch.hidden},
                 {"output_dim", p.arch.output_dim}};
    j["params"] = flatten_params(p.weights, p.biases);
    j["adam"] = {{"m", flatten_params(p.m_weights, p.m_biases)},
                 {"v", flatten_params(p.v_weights, p.v_biases)},
                 {"step", p.adam_step_count}};
    j["standardization"] = {{"mean", checkpoint.standardization.mean},
                            {"stddev", checkpoint.standardization.stddev}};
    std::ofstream out(path);
    if (!out) {
        throw ParseError("save_checkpoint: cannot open " + path.string() + " for writing");
    }
    out << j.dump(2) << '\n';
    if (!out) {
        throw ParseError("save_checkpoint: write failed for " + path.string());
    }
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("load_checkpoint: cannot open " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("load_checkpoint: " + path.string() + ": " + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "fsvi-checkpoint") {
            throw ParseError("load_checkpoint: " + path.string() + ": not a model checkpoint");
        }
        ModelCheckpoint checkpoint;
        checkpoint.method = j.at("method").get<std::string>();
        checkpoint.head = alpha_head_from_name(j.at("alpha_head").get<std::string>());
        checkpoint.dropout_rate = j.at("dropout_rate").get<double>();
        MlpParams& p = checkpoint.params;
        p.arch.input_dim = j.at("arch").at("input_dim").get<int>();
        p.arch.hidden = j.at("arch").at("hidden").get<std::vector<int>>();
        p.arch.output_dim = j.at("arch").at("output_dim").get<int>();
        p.arch.validate();
        const auto flat = j.at("params").get<std::vector<double>>();
        unflatten_params(p.arch, flat, p.weights, p.biases);
        const auto m = j.at("adam").at("m").get<std::vector<double>>();
        const auto v = j.at("adam").at("v").get<std::vector<double>>();
        unflatten_params(p.arch, m, p.m_weights, p.m_biases);
        unflatten_params(p.arch, v, p.v_weights, p.v_biases);
        p.adam_step_count = j.at("adam").at("step").get<std::int64_t>();
        checkpoint.standardization.mean =
            j.at("standardization").at("mean").get<std::vector<double>>();
        checkpoint.standardization.stddev =
            j.at("standardization").at("stddev").get<std::vector<double>>();
        return checkpoint;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("load_checkpoint: " + path.string() + ": " + e.what());
    }
}

} // namespace fsvi
