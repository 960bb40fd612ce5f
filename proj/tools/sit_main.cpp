// sit: train, evaluate, and probe the scale-interaction regression engine.
//
// Exit codes: 0 success, 1 check/metric failure, 2 usage or parse error,
// 3 I/O failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "sit/config.hpp"
#include "sit/dataset.hpp"
#include "sit/defs.hpp"
#include "sit/error.hpp"
#include "sit/gradcheck_suite.hpp"
#include "sit/kernels.hpp"
#include "sit/metrics.hpp"
#include "sit/sitm.hpp"
#include "sit/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

// Reports land atomically: write a sibling temp file, then rename.
void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw sit::IoFailure("cannot open for writing: " + tmp);
        out << content;
        if (!out) throw sit::IoFailure("write failed: " + tmp);
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw sit::IoFailure("rename to " + path + " failed: " + ec.message());
}

json history_to_json(const sit::History& h) {
    json epochs = json::array();
    for (const sit::EpochRecord& e : h.epochs) {
        epochs.push_back({{"epoch", e.epoch},
                          {"train_loss", e.train_loss},
                          {"val_loss", e.val_loss},
                          {"lr", e.lr}});
    }
    return json{{"epochs", epochs},
                {"stopped_epoch", h.stopped_epoch},
                {"best_epoch", h.best_epoch}};
}

json metrics_to_json(const sit::MetricsReport& m) {
    json j{{"mae", m.mae}, {"rmse", m.rmse}, {"n", m.n}};
    if (m.pearson.has_value()) {
        j["pearson"] = *m.pearson;
    } else {
        j["pearson"] = nullptr;
        j["pearson_error"] = "DegenerateVariance";
    }
    return j;
}

struct TrainOutcome {
    std::unique_ptr<sit::SITModel> model;
    sit::History history;
    sit::MetricsReport val_metrics;
    sit::TrainConfig config;
    double wall_seconds = 0.0;
};

// Shared by cmd_train and cmd_ablate. Resolves backbone_channels from the
// data when the config did not pin it.
TrainOutcome run_training(sit::TrainConfig cfg, bool cb_given, const sit::DatasetIndex& index) {
    const sit::FeatureShape shape = sit::peek_feature_shape(index);
    if (!cb_given) {
        cfg.backbone_channels = shape.c;
    } else if (cfg.backbone_channels != shape.c) {
        throw sit::ShapeMismatch("config backbone_channels " +
                                 std::to_string(cfg.backbone_channels) +
                                 " does not match dataset feature depth " +
                                 std::to_string(shape.c));
    }
    const std::vector<sit::Sample> samples = sit::load_samples(index);

    const auto t0 = std::chrono::steady_clock::now();
    TrainOutcome out;
    out.model = std::make_unique<sit::SITModel>(
        sit::build_variant(cfg.variant, cfg.model_config(), cfg.seed));
    out.history = sit::train(*out.model, samples, cfg);
    out.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.config = cfg;

    std::vector<std::size_t> tr, va;
    sit::split_dataset(samples.size(), cfg.val_fraction, cfg.seed, tr, va);
    std::vector<double> y, yhat;
    for (std::size_t k : va) {
        y.push_back(samples[k].score);
        yhat.push_back(out.model->forward(samples[k].features, sit::Mode::kEval));
    }
    out.val_metrics = sit::compute_metrics_partial(y, yhat);
    return out;
}

int cmd_synth(std::size_t n, std::uint64_t seed, std::size_t c_b, const std::string& out_dir) {
    const sit::DatasetIndex index = sit::synth_dataset(n, seed, c_b, out_dir);
    std::cout << "wrote " << index.records.size() << " feature maps + index.csv to " << out_dir
              << "\n";
    return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& out_path, const std::string& variant_flag) {
    sit::LoadedConfig loaded;
    if (!config_path.empty()) {
        loaded = sit::load_config_file(config_path);
    }
    if (!variant_flag.empty()) {
        loaded.config.variant = sit::variant_from_name(variant_flag);
    }
    const sit::DatasetIndex index = sit::load_index(data_path);

    TrainOutcome out = run_training(loaded.config, loaded.backbone_channels_given, index);
    sit::save_model(*out.model, out_path);

    const json history = history_to_json(out.history);
    write_file_atomic(out_path + ".history.json", history.dump(2) + "\n");

    json report{{"config", json::parse(sit::config_to_json(out.config))},
                {"history", history},
                {"validation_metrics", metrics_to_json(out.val_metrics)},
                {"wall_clock_seconds", out.wall_seconds},
                {"engine_version", sit::kEngineVersion}};
    write_file_atomic(out_path + ".report.json", report.dump(2) + "\n");

    std::cout << "trained " << sit::variant_name(out.config.variant) << " for "
              << out.history.stopped_epoch << " epochs (best epoch " << out.history.best_epoch
              << "); model -> " << out_path << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& model_path, const std::string& data_path,
             const std::string& out_path) {
    sit::SITModel model = sit::load_model(model_path);
    const sit::DatasetIndex index = sit::load_index(data_path);
    const std::vector<sit::Sample> samples = sit::load_samples(index);

    std::vector<double> y, yhat;
    for (const sit::Sample& s : samples) {
        y.push_back(s.score);
        yhat.push_back(model.forward(s.features, sit::Mode::kEval));
    }
    const sit::MetricsReport m = sit::compute_metrics_partial(y, yhat);
    const json j = metrics_to_json(m);
    std::cout << j.dump(2) << "\n";
    if (!out_path.empty()) {
        write_file_atomic(out_path, j.dump(2) + "\n");
    }
    return m.pearson.has_value() ? kExitOk : kExitCheckFailure;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t c_b, const std::string& corrupt) {
    const sit::SuiteReport report = sit::run_gradcheck_suite(seed, c_b, 1e-4, corrupt);
    std::printf("%-20s %-14s %s\n", "layer", "max_rel_err", "status");
    for (const sit::SuiteRow& row : report.rows) {
        std::printf("%-20s %-14.3e %s\n", row.name.c_str(), row.max_rel_err,
                    row.pass ? "pass" : "FAIL");
    }
    std::printf("gradcheck: %s\n", report.pass ? "all layers pass" : "FAILURES present");
    return report.pass ? kExitOk : kExitCheckFailure;
}

int cmd_ablate(const std::string& config_path, const std::string& data_path,
               const std::string& out_path) {
    sit::LoadedConfig loaded;
    if (!config_path.empty()) {
        loaded = sit::load_config_file(config_path);
    }
    const sit::DatasetIndex index = sit::load_index(data_path);

    const sit::Variant order[4] = {sit::Variant::kBaseline, sit::Variant::kNoTransformer,
                                   sit::Variant::kNoGmp, sit::Variant::kFull};
    json rows = json::array();
    std::printf("%-16s %-10s %-10s %-10s %s\n", "variant", "pc", "mae", "rmse", "epochs");
    for (sit::Variant v : order) {
        sit::TrainConfig cfg = loaded.config;
        cfg.variant = v;
        const TrainOutcome out = run_training(cfg, loaded.backbone_channels_given, index);
        json row = metrics_to_json(out.val_metrics);
        row["variant"] = sit::variant_name(v);
        row["epochs"] = out.history.stopped_epoch;
        rows.push_back(row);
        const std::string pc = out.val_metrics.pearson.has_value()
                                   ? std::to_string(*out.val_metrics.pearson).substr(0, 8)
                                   : std::string("n/a");
        std::printf("%-16s %-10s %-10.4f %-10.4f %zu\n", sit::variant_name(v).c_str(),
                    pc.c_str(), out.val_metrics.mae, out.val_metrics.rmse,
                    out.history.stopped_epoch);
    }
    const json table{{"variants", rows}};
    if (!out_path.empty()) {
        write_file_atomic(out_path, table.dump(2) + "\n");
    } else {
        std::cout << table.dump(2) << "\n";
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scale-interaction transformer engine"};
    app.require_subcommand(1);

    std::string kernels_flag;
    app.add_option("--kernels", kernels_flag, "Force a kernel backend (scalar|avx2)");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic feature dataset");
    std::size_t synth_n = 32;
    std::uint64_t synth_seed = 42;
    std::size_t synth_cb = 64;
    std::string synth_out = "synth_data";
    synth->add_option("--n", synth_n, "Sample count")->check(CLI::PositiveNumber);
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--cb", synth_cb, "Feature channels C_b")->check(CLI::PositiveNumber);
    synth->add_option("--out", synth_out, "Output directory");

    // train
    auto* train_cmd = app.add_subcommand("train", "Train a model on an indexed dataset");
    std::string train_config, train_data, train_out = "model.sitm", train_variant;
    train_cmd->add_option("--config", train_config, "JSON config file");
    train_cmd->add_option("--data", train_data, "index.csv path")->required();
    train_cmd->add_option("--out", train_out, "Output model path");
    train_cmd->add_option("--variant", train_variant,
                          "baseline|no-transformer|no-gmp|full (overrides config)");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model on an indexed dataset");
    std::string eval_model, eval_data, eval_out;
    eval_cmd->add_option("--model", eval_model, "SITM model path")->required();
    eval_cmd->add_option("--data", eval_data, "index.csv path")->required();
    eval_cmd->add_option("--out", eval_out, "Write the metrics JSON here too");

    // gradcheck
    auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference audit of every layer");
    std::uint64_t grad_seed = 42;
    std::size_t grad_cb = 8;
    std::string grad_corrupt;
    grad_cmd->add_option("--seed", grad_seed, "Probe seed");
    grad_cmd->add_option("--cb", grad_cb, "Feature channels for the end-to-end row")
        ->check(CLI::PositiveNumber);
    grad_cmd->add_option("--corrupt", grad_corrupt,
                         "Test hook: double the named layer's backward");

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "Train all four variants and compare");
    std::string ablate_config, ablate_data, ablate_out;
    ablate_cmd->add_option("--config", ablate_config, "JSON config file");
    ablate_cmd->add_option("--data", ablate_data, "index.csv path")->required();
    ablate_cmd->add_option("--out", ablate_out, "Write the comparison JSON here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (!kernels_flag.empty()) sit::kernels::select(kernels_flag);
        if (*synth) return cmd_synth(synth_n, synth_seed, synth_cb, synth_out);
        if (*train_cmd) return cmd_train(train_config, train_data, train_out, train_variant);
        if (*eval_cmd) return cmd_eval(eval_model, eval_data, eval_out);
        if (*grad_cmd) return cmd_gradcheck(grad_seed, grad_cb, grad_corrupt);
        if (*ablate_cmd) return cmd_ablate(ablate_config, ablate_data, ablate_out);
    } catch (const sit::ConfigParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const sit::IoFailure& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const sit::DivergenceDetected& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return kExitCheckFailure;
    } catch (const sit::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCheckFailure;
    }
    return kExitUsage;
}
