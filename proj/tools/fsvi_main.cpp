// Command-line front end: dataset generation, training, evaluation, and
// method comparison, all reproducible from (flags, seed).
//
// Exit codes: 0 success, 1 usage error, 2 data/IO error, 3 numerical
// failure during training.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fsvi/evaluation.hpp"
#include "fsvi/trainers.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Shared option blocks

struct TrainOptions {
    fsvi::FsviConfig config;
    std::string alpha_head = "exp";
    int ensemble_size = 5;
    int mc_passes = 32;

    void finalize(const std::string& method) {
        config.head = fsvi::alpha_head_from_name(alpha_head);
        if (method == "dropout") {
            if (config.dropout_rate == 0.0) {
                config.dropout_rate = 0.5;
            }
            if (!(config.dropout_rate > 0.0)) {
                throw UsageError("method 'dropout' requires --dropout-rate > 0");
            }
        }
        if (method == "ensemble" && ensemble_size < 1) {
            throw UsageError("method 'ensemble' requires --ensemble-size >= 1");
        }
        config.validate();
    }
};

void add_train_options(CLI::App* cmd, TrainOptions& opts) {
    cmd->add_option("--epochs", opts.config.epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--batch-size", opts.config.batch_size, "Minibatch size")
        ->capture_default_str();
    cmd->add_option("--lr", opts.config.lr, "Adam learning rate")->capture_default_str();
    cmd->add_option("--seed", opts.config.seed, "Random seed")->capture_default_str();
    cmd->add_option("--kl-weight", opts.config.kl_weight, "Functional KL weight (lambda)")
        ->capture_default_str();
    cmd->add_option("--kl-warmup", opts.config.kl_warmup_epochs,
                    "Epochs of linear lambda warm-up from 0")
        ->capture_default_str();
    cmd->add_option("--ood-per-batch", opts.config.ood_points_per_batch,
                    "OOD measure points per batch (-1: match batch size)")
        ->capture_default_str();
    cmd->add_option("--ood-stddev", opts.config.ood_train_stddev,
                    "Stddev of the train-time Gaussian OOD noise")
        ->capture_default_str();
    cmd->add_option("--alpha-head", opts.alpha_head, "Evidence head: softplus or exp")
        ->check(CLI::IsMember({"softplus", "exp"}))
        ->capture_default_str();
    cmd->add_option("--dropout-rate", opts.config.dropout_rate,
                    "Dropout rate (dropout baseline; 0 disables)")
        ->capture_default_str();
    cmd->add_option("--hidden", opts.config.hidden, "Hidden layer sizes")
        ->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--ensemble-size", opts.ensemble_size, "Deep-ensemble member count")
        ->capture_default_str();
    cmd->add_option("--mc-passes", opts.mc_passes, "MC-dropout forward passes at eval")
        ->capture_default_str();
    cmd->set_config("--config", "", "Config file (INI, key=value; flags take precedence)");
}

json config_to_json(const TrainOptions& opts) {
    return {{"epochs", opts.config.epochs},
            {"batch_size", opts.config.batch_size},
            {"lr", opts.config.lr},
            {"seed", opts.config.seed},
            {"kl_weight", opts.config.kl_weight},
            {"kl_warmup_epochs", opts.config.kl_warmup_epochs},
            {"ood_points_per_batch", opts.config.ood_points_per_batch},
            {"ood_train_stddev", opts.config.ood_train_stddev},
            {"alpha_head", opts.alpha_head},
            {"dropout_rate", opts.config.dropout_rate},
            {"hidden", opts.config.hidden},
            {"ensemble_size", opts.ensemble_size},
            {"mc_passes", opts.mc_passes}};
}

// ---------------------------------------------------------------------------
// Dataset resolution: a directory with manifest.json, a manifest path, or a
// bare CSV (class count inferred from the labels).

struct ResolvedData {
    fsvi::Dataset train;
    fsvi::Dataset test;
    std::optional<std::vector<std::vector<double>>> ood_test;
    std::optional<fsvi::DatasetManifest> manifest;
    std::string source;
};

int infer_num_classes(const fs::path& csv) {
    std::ifstream in(csv);
    if (!in) {
        throw fsvi::ParseError("cannot open " + csv.string());
    }
    std::string line;
    std::getline(in, line); // header
    int max_label = 1;
    while (std::getline(in, line)) {
        const auto pos = line.find_last_of(',');
        if (pos == std::string::npos) {
            continue;
        }
        try {
            max_label = std::max(max_label, std::stoi(line.substr(pos + 1)));
        } catch (const std::exception&) {
            // load_csv reports malformed labels with a line number.
        }
    }
    return max_label + 1;
}

ResolvedData resolve_data(const std::string& data_arg) {
    fs::path path(data_arg);
    if (fs::is_directory(path)) {
        path /= "manifest.json";
    }
    if (path.extension() == ".json") {
        const auto manifest = fsvi::load_manifest(path);
        const auto dir = path.parent_path();
        auto train = fsvi::load_csv(dir / manifest.train_file, manifest.spec.num_classes,
                                    fsvi::Split::train);
        auto test =
            fsvi::load_csv(dir / manifest.test_file, manifest.spec.num_classes, fsvi::Split::test);
        // Features on disk are standardized; reattach the raw-space stats.
        train = fsvi::Dataset(std::vector<double>(train.features().begin(), train.features().end()),
                              std::vector<int>(train.labels().begin(), train.labels().end()),
                              train.dim(), train.num_classes(), manifest.standardization,
                              fsvi::Split::train);
        test = fsvi::Dataset(std::vector<double>(test.features().begin(), test.features().end()),
                             std::vector<int>(test.labels().begin(), test.labels().end()),
                             test.dim(), test.num_classes(), manifest.standardization,
                             fsvi::Split::test);
        ResolvedData resolved{std::move(train), std::move(test), std::nullopt, manifest,
                              path.string()};
        const auto ood_path = dir / manifest.ood_test_file;
        if (fs::exists(ood_path)) {
            resolved.ood_test = fsvi::load_features_csv(ood_path);
        }
        return resolved;
    }
    // Bare CSV: one split serves as both train and test view.
    const int k = infer_num_classes(path);
    auto train = fsvi::load_csv(path, k, fsvi::Split::train);
    auto test = fsvi::load_csv(path, k, fsvi::Split::test);
    return ResolvedData{std::move(train), std::move(test), std::nullopt, std::nullopt,
                        path.string()};
}

// ---------------------------------------------------------------------------
// gen-data

int cmd_gen_data(const fs::path& out_dir, std::uint64_t seed, const fsvi::ClusterSpec& spec,
                 double ood_margin, int ood_count) {
    fs::create_directories(out_dir);
    const auto [train, test] = fsvi::gen_clusters(spec, seed);

    if (ood_count <= 0) {
        ood_count = test.size();
    }
    fsvi::Rng ood_rng(seed + 1); // independent of the cluster stream
    const auto ood = fsvi::gen_ood_test(fsvi::feature_range(train), ood_margin, ood_count, ood_rng);

    fsvi::DatasetManifest manifest;
    manifest.spec = spec;
    manifest.spec.centers = spec.resolved_centers();
    manifest.seed = seed;
    manifest.standardization = train.standardization();
    manifest.ood_margin = ood_margin;
    manifest.ood_count = ood_count;

    fsvi::save_csv(train, out_dir / manifest.train_file);
    fsvi::save_csv(test, out_dir / manifest.test_file);
    fsvi::save_features_csv(ood, out_dir / manifest.ood_test_file);
    fsvi::save_manifest(manifest, out_dir / "manifest.json");

    std::cout << "wrote " << out_dir.string() << ": train=" << train.size()
              << " test=" << test.size() << " ood_test=" << ood_count << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train

void save_ensemble_manifest(const std::vector<std::string>& member_files, const fs::path& path) {
    const json j = {{"format", "fsvi-ensemble"}, {"version", 1}, {"members", member_files}};
    std::ofstream out(path);
    out << j.dump(2) << '\n';
}

std::vector<fsvi::ModelCheckpoint> load_models(const fs::path& checkpoint_path) {
    std::ifstream in(checkpoint_path);
    if (!in) {
        throw fsvi::ParseError("cannot open " + checkpoint_path.string());
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw fsvi::ParseError(checkpoint_path.string() + ": " + e.what());
    }
    const auto format = j.value("format", std::string());
    if (format == "fsvi-ensemble") {
        std::vector<fsvi::ModelCheckpoint> models;
        for (const auto& member : j.at("members")) {
            models.push_back(
                fsvi::load_checkpoint(checkpoint_path.parent_path() / member.get<std::string>()));
        }
        if (models.empty()) {
            throw fsvi::ParseError(checkpoint_path.string() + ": ensemble has no members");
        }
        return models;
    }
    return {fsvi::load_checkpoint(checkpoint_path)};
}

int run_train(const std::string& method, const ResolvedData& data, const TrainOptions& opts,
              const fs::path& out_dir) {
    fs::create_directories(out_dir);

    json manifest = {{"format", "fsvi-train-manifest"},
                     {"version", 1},
                     {"method", method},
                     {"data", data.source},
                     {"config", config_to_json(opts)}};

    double final_acc = 0.0;
    double final_nll = 0.0, final_kl = 0.0;
    if (method == "ensemble") {
        const auto ensemble = fsvi::train_ensemble(data.train, opts.config, opts.ensemble_size);
        std::vector<std::string> member_files;
        for (std::size_t m = 0; m < ensemble.members.size(); ++m) {
            const std::string name = "checkpoint_member_" + std::to_string(m) + ".json";
            fsvi::save_checkpoint(ensemble.members[m], out_dir / name);
            fsvi::write_train_log(ensemble.logs[m],
                                  out_dir / ("train_log_member_" + std::to_string(m) + ".ndjson"));
            member_files.push_back(name);
        }
        save_ensemble_manifest(member_files, out_dir / "checkpoint.json");
        final_acc = ensemble.logs.back().back().train_acc;
        final_nll = ensemble.logs.back().back().loss_nll;
        manifest["outputs"] = {{"checkpoint", "checkpoint.json"}, {"members", member_files}};
    } else {
        fsvi::TrainedModel trained;
        if (method == "fsvi") {
            trained = fsvi::train_fsvi(data.train, opts.config);
        } else { // standard | dropout
            trained = fsvi::train_standard(data.train, opts.config);
        }
        fsvi::save_checkpoint(trained.checkpoint, out_dir / "checkpoint.json");
        fsvi::write_train_log(trained.log, out_dir / "train_log.ndjson");
        final_acc = trained.log.back().train_acc;
        final_nll = trained.log.back().loss_nll;
        final_kl = trained.log.back().loss_kl;
        manifest["outputs"] = {{"checkpoint", "checkpoint.json"},
                               {"train_log", "train_log.ndjson"}};
    }

    std::ofstream manifest_out(out_dir / "manifest.json");
    manifest_out << manifest.dump(2) << '\n';

    std::printf("method=%s final train_acc=%.4f loss_nll=%.6f loss_kl=%.6f\n", method.c_str(),
                final_acc, final_nll, final_kl);
    return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOutputs {
    double accuracy = 0.0;
    double ece = 0.0;
    fsvi::UncertaintyReport uncertainty;
};

EvalOutputs run_eval(const fsvi::Evaluator& evaluator, const fsvi::Dataset& eval_data,
                     const std::optional<std::vector<std::vector<double>>>& ood_features,
                     int bins, const fs::path& out_dir, bool bits) {
    fs::create_directories(out_dir);

    auto records = fsvi::evaluate_dataset(evaluator, eval_data);
    std::vector<fsvi::PredictionRecord> ood_records;
    if (ood_features) {
        ood_records = fsvi::evaluate_ood(evaluator, *ood_features);
    }

    EvalOutputs outputs;
    outputs.accuracy = fsvi::accuracy(records);
    const auto report = fsvi::reliability_data(records, bins);
    outputs.ece = report.ece;
    fsvi::save_calibration_json(report, out_dir / "calibration.json");
    fsvi::save_calibration_csv(report, out_dir / "calibration.csv");

    outputs.uncertainty = fsvi::uncertainty_report(records, ood_records);
    fsvi::save_uncertainty_json(outputs.uncertainty, out_dir / "uncertainty.json");

    auto all_records = std::move(records);
    all_records.insert(all_records.end(), ood_records.begin(), ood_records.end());
    fsvi::write_predictions_ndjson(all_records, out_dir / "predictions.ndjson");

    const double unit = bits ? 1.0 / std::log(2.0) : 1.0;
    const char* unit_name = bits ? "bits" : "nats";
    std::printf("accuracy=%.4f ece(M=%d)=%.4f\n", outputs.accuracy, bins, outputs.ece);
    std::printf("mean output entropy: %.4f %s\n",
                outputs.uncertainty.in_dist.output_entropy.mean * unit, unit_name);
    if (outputs.uncertainty.in_dist.differential_entropy) {
        std::printf("mean differential entropy: %.4f %s\n",
                    outputs.uncertainty.in_dist.differential_entropy->mean * unit, unit_name);
    }
    if (outputs.uncertainty.auroc_differential_entropy) {
        std::printf("ood auroc (differential entropy): %.4f\n",
                    *outputs.uncertainty.auroc_differential_entropy);
    }
    if (outputs.uncertainty.auroc_output_entropy) {
        std::printf("ood auroc (output entropy): %.4f\n",
                    *outputs.uncertainty.auroc_output_entropy);
    }
    return outputs;
}

// ---------------------------------------------------------------------------
// compare

struct CompareRow {
    std::string method;
    bool ok = false;
    double accuracy = 0.0;
    double ece = 0.0;
    std::string error;
};

int cmd_compare(const std::vector<std::string>& methods, const ResolvedData& data,
                TrainOptions opts, int bins, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    std::vector<CompareRow> rows;
    bool any_failed = false;

    for (const std::string& method : methods) {
        CompareRow row;
        row.method = method;
        try {
            TrainOptions method_opts = opts;
            method_opts.finalize(method);
            const fs::path method_dir = out_dir / method;
            run_train(method, data, method_opts, method_dir);

            const auto models = load_models(method_dir / "checkpoint.json");
            fsvi::Evaluator evaluator{models, method_opts.mc_passes, method_opts.config.seed};
            const auto outputs =
                run_eval(evaluator, data.test, data.ood_test, bins, method_dir, false);
            row.ok = true;
            row.accuracy = outputs.accuracy;
            row.ece = outputs.ece;
        } catch (const std::exception& e) {
            row.error = e.what();
            any_failed = true;
        }
        rows.push_back(std::move(row));
    }

    // Plain-text table, methods as rows: Test Accuracy | ECE (M AS GIVEN).
    std::string table;
    char line[160];
    std::snprintf(line, sizeof(line), "%-12s %14s %10s\n", "method", "test_accuracy",
                  ("ece_m" + std::to_string(bins)).c_str());
    table += line;
    for (const auto& row : rows) {
        if (row.ok) {
            std::snprintf(line, sizeof(line), "%-12s %14.4f %10.4f\n", row.method.c_str(),
                          row.accuracy, row.ece);
        } else {
            std::snprintf(line, sizeof(line), "%-12s %14s %10s\n", row.method.c_str(), "FAILED",
                          "-");
        }
        table += line;
    }
    std::cout << table;
    std::ofstream(out_dir / "table.txt") << table;

    json jrows = json::array();
    for (const auto& row : rows) {
        json j = {{"method", row.method}, {"status", row.ok ? "ok" : "failed"}};
        if (row.ok) {
            j["test_accuracy"] = row.accuracy;
            j["ece"] = row.ece;
        } else {
            j["error"] = row.error;
        }
        jrows.push_back(std::move(j));
    }
    const json jtable = {{"format", "fsvi-compare"},
                         {"version", 1},
                         {"bins", bins},
                         {"seed", opts.config.seed},
                         {"rows", jrows}};
    std::ofstream(out_dir / "table.json") << jtable.dump(2) << '\n';

    return any_failed ? kExitNumerical : 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Functional-space variational inference for Dirichlet classifiers"};
    app.require_subcommand(1);

    // gen-data ---------------------------------------------------------------
    auto* gen = app.add_subcommand("gen-data", "Generate the synthetic cluster benchmark");
    std::string gen_out;
    std::uint64_t gen_seed = 0;
    fsvi::ClusterSpec spec;
    double ood_margin = 1.5;
    int ood_count = 0;
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--seed", gen_seed, "Random seed")->capture_default_str();
    gen->add_option("--classes", spec.num_classes, "Class count")->capture_default_str();
    gen->add_option("--dim", spec.dim, "Feature dimension")->capture_default_str();
    gen->add_option("--per-class", spec.samples_per_class, "Samples per class")
        ->capture_default_str();
    gen->add_option("--stddev", spec.cluster_stddev, "Overlap-pair cluster stddev")
        ->capture_default_str();
    gen->add_option("--far-stddev", spec.far_class_stddev, "Stddev of the non-overlap classes")
        ->capture_default_str();
    gen->add_option("--class-stddev", spec.class_stddev, "Explicit per-class stddevs")
        ->delimiter(',');
    gen->add_option("--overlap-a", spec.overlap_pair.first, "First overlap class")
        ->capture_default_str();
    gen->add_option("--overlap-b", spec.overlap_pair.second, "Second overlap class")
        ->capture_default_str();
    gen->add_option("--ood-margin", ood_margin, "Margin of the uniform OOD test box")
        ->capture_default_str();
    gen->add_option("--ood-count", ood_count, "OOD test points (0: match test size)")
        ->capture_default_str();

    // train ------------------------------------------------------------------
    auto* train = app.add_subcommand("train", "Train one method");
    std::string train_method, train_data, train_out;
    TrainOptions train_opts;
    train->add_option("--method", train_method, "fsvi | standard | dropout | ensemble")
        ->required()
        ->check(CLI::IsMember({"fsvi", "standard", "dropout", "ensemble"}));
    train->add_option("--data", train_data, "Dataset directory, manifest.json, or CSV")
        ->required();
    train->add_option("--out", train_out, "Output directory")->required();
    add_train_options(train, train_opts);

    // eval -------------------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    std::string eval_checkpoint, eval_data, eval_out = "eval_out", eval_ood, eval_split = "test";
    int eval_bins = 15;
    int eval_mc_passes = 32;
    std::uint64_t eval_seed = 0;
    bool eval_bits = false;
    eval->add_option("--checkpoint", eval_checkpoint, "checkpoint.json (model or ensemble)")
        ->required();
    eval->add_option("--data", eval_data, "Dataset directory, manifest.json, or CSV")->required();
    eval->add_option("--ood", eval_ood, "Feature CSV of OOD test points");
    eval->add_option("--split", eval_split, "Dataset split to evaluate")
        ->check(CLI::IsMember({"train", "test"}))
        ->capture_default_str();
    eval->add_option("--bins", eval_bins, "Calibration bins M")->capture_default_str();
    eval->add_option("--out", eval_out, "Output directory")->capture_default_str();
    eval->add_option("--mc-passes", eval_mc_passes, "MC-dropout passes")->capture_default_str();
    eval->add_option("--seed", eval_seed, "Seed for MC-dropout passes")->capture_default_str();
    eval->add_flag("--bits", eval_bits, "Print entropies in bits instead of nats");

    // compare ----------------------------------------------------------------
    auto* compare = app.add_subcommand("compare", "Train and evaluate methods side by side");
    std::vector<std::string> compare_methods = {"standard", "dropout", "ensemble", "fsvi"};
    std::string compare_data, compare_out;
    int compare_bins = 15;
    TrainOptions compare_opts;
    compare->add_option("--methods", compare_methods, "Methods to run")
        ->delimiter(',')
        ->capture_default_str();
    compare->add_option("--data", compare_data, "Dataset directory, manifest.json, or CSV")
        ->required();
    compare->add_option("--out", compare_out, "Output directory")->required();
    compare->add_option("--bins", compare_bins, "Calibration bins M")->capture_default_str();
    add_train_options(compare, compare_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitUsage;
    }

    try {
        if (gen->parsed()) {
            spec.validate();
            return cmd_gen_data(gen_out, gen_seed, spec, ood_margin, ood_count);
        }
        if (train->parsed()) {
            train_opts.finalize(train_method);
            const auto data = resolve_data(train_data);
            return run_train(train_method, data, train_opts, train_out);
        }
        if (eval->parsed()) {
            auto models = load_models(eval_checkpoint);
            const auto data = resolve_data(eval_data);
            std::optional<std::vector<std::vector<double>>> ood;
            if (!eval_ood.empty()) {
                ood = fsvi::load_features_csv(eval_ood);
            }
            const fsvi::Evaluator evaluator{std::move(models), eval_mc_passes, eval_seed};
            run_eval(evaluator, eval_split == "train" ? data.train : data.test, ood, eval_bins,
                     eval_out, eval_bits);
            return 0;
        }
        if (compare->parsed()) {
            if (compare_methods.empty()) {
                throw UsageError("--methods must name at least one method");
            }
            for (const auto& m : compare_methods) {
                if (m != "fsvi" && m != "standard" && m != "dropout" && m != "ensemble") {
                    throw UsageError("unknown method '" + m + "'");
                }
            }
            const auto data = resolve_data(compare_data);
            return cmd_compare(compare_methods, data, compare_opts, compare_bins, compare_out);
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const fsvi::TrainingError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const fsvi::ParseError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return 0;
}
