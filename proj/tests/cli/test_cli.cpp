#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string sit_bin() {
    const char* env = std::getenv("SIT_BIN");
    REQUIRE_MESSAGE(env != nullptr, "SIT_BIN must point at the sit executable");
    return env;
}

struct Workdir {
    fs::path path;
    explicit Workdir(const std::string& name) {
        path = fs::temp_directory_path() / name;
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~Workdir() { fs::remove_all(path); }
    std::string operator/(const std::string& child) const { return (path / child).string(); }
};

int run(const std::string& cmd) {
    const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

} // namespace

TEST_CASE("synth is deterministic and produces valid scores") {
    Workdir wd("sit_cli_synth");
    REQUIRE(run(sit_bin() + " synth --n 8 --seed 3 --cb 8 --out " + (wd / "a")) == 0);
    REQUIRE(run(sit_bin() + " synth --n 8 --seed 3 --cb 8 --out " + (wd / "b")) == 0);
    CHECK(slurp(wd / "a/index.csv") == slurp(wd / "b/index.csv"));
    CHECK(slurp(wd / "a/feat_0003.sitf") == slurp(wd / "b/feat_0003.sitf"));

    REQUIRE(run(sit_bin() + " synth --n 8 --seed 4 --cb 8 --out " + (wd / "c")) == 0);
    CHECK(slurp(wd / "a/index.csv") != slurp(wd / "c/index.csv"));

    // All scores strictly inside (1, 5).
    std::ifstream idx(wd / "a/index.csv");
    std::string line;
    std::getline(idx, line);  // header
    while (std::getline(idx, line)) {
        const double score = std::stod(line.substr(line.rfind(',') + 1));
        CHECK(score > 1.0);
        CHECK(score < 5.0);
    }
}

TEST_CASE("train-eval pipeline with exit codes and artifacts") {
    Workdir wd("sit_cli_train");
    REQUIRE(run(sit_bin() + " synth --n 12 --seed 5 --cb 8 --out " + (wd / "data")) == 0);
    write(wd / "cfg.json", R"({"max_epochs": 5, "seed": 2})");

    REQUIRE(run(sit_bin() + " train --config " + (wd / "cfg.json") + " --data " +
                (wd / "data/index.csv") + " --out " + (wd / "model.sitm")) == 0);
    CHECK(fs::exists(wd / "model.sitm"));
    CHECK(fs::exists(wd / "model.sitm.history.json"));
    CHECK(fs::exists(wd / "model.sitm.report.json"));

    // History document schema.
    const json hist = json::parse(slurp(wd / "model.sitm.history.json"));
    REQUIRE(hist.contains("epochs"));
    CHECK(hist["epochs"].size() == 5);
    CHECK(hist.contains("stopped_epoch"));
    CHECK(hist.contains("best_epoch"));
    for (const auto& e : hist["epochs"]) {
        CHECK(e.contains("epoch"));
        CHECK(e.contains("train_loss"));
        CHECK(e.contains("val_loss"));
        CHECK(e.contains("lr"));
    }

    // Report carries config snapshot, metrics, version; wall clock excluded
    // from determinism.
    const json report = json::parse(slurp(wd / "model.sitm.report.json"));
    CHECK(report["config"]["batch_size"] == 32);
    CHECK(report["engine_version"] == "0.1.0");
    CHECK(report.contains("validation_metrics"));
    CHECK(report.contains("wall_clock_seconds"));

    // Eval prints a metrics JSON and succeeds; n equals the index length.
    const std::string eval_out = wd / "eval.json";
    REQUIRE(run(sit_bin() + " eval --model " + (wd / "model.sitm") + " --data " +
                (wd / "data/index.csv") + " --out " + eval_out) == 0);
    const json metrics = json::parse(slurp(eval_out));
    CHECK(metrics["n"] == 12);
    CHECK(metrics.contains("mae"));
    CHECK(metrics.contains("rmse"));
    CHECK(metrics.contains("pearson"));
}

TEST_CASE("usage and io errors map to the documented exit codes") {
    Workdir wd("sit_cli_errors");
    REQUIRE(run(sit_bin() + " synth --n 4 --seed 1 --cb 4 --out " + (wd / "data")) == 0);

    // Malformed JSON config: exit 2.
    write(wd / "bad.json", "{not json");
    CHECK(run(sit_bin() + " train --config " + (wd / "bad.json") + " --data " +
              (wd / "data/index.csv") + " --out " + (wd / "m.sitm")) == 2);

    // Unknown config key: exit 2.
    write(wd / "unknown.json", R"({"learning_rate": 1e-4})");
    CHECK(run(sit_bin() + " train --config " + (wd / "unknown.json") + " --data " +
              (wd / "data/index.csv") + " --out " + (wd / "m.sitm")) == 2);

    // Missing data index: exit 3.
    CHECK(run(sit_bin() + " train --data " + (wd / "data/missing.csv") + " --out " +
              (wd / "m.sitm")) == 3);

    // Unknown subcommand / flag: exit 2.
    CHECK(run(sit_bin() + " frobnicate") == 2);

    // Referential-integrity failure: missing feature file, exit 3.
    write(wd / "data/index.csv", "path,score\nghost.sitf,3.0\n");
    CHECK(run(sit_bin() + " train --data " + (wd / "data/index.csv") + " --out " +
              (wd / "m.sitm")) == 3);
}

TEST_CASE("gradcheck row coverage, corrupt hook, and exit codes") {
    Workdir wd("sit_cli_gradcheck");
    const std::string table = wd / "gc.txt";
    const int status =
        std::system((sit_bin() + " gradcheck --seed 9 --cb 4 > " + table).c_str());
    REQUIRE(WEXITSTATUS(status) == 0);
    const std::string out = slurp(table);
    // Every parameterized layer type appears exactly once.
    for (const std::string row :
         {"conv1x1", "conv3x3", "conv5x5", "conv3x3_s2", "relu", "layer_norm", "softmax_rows",
          "softmax_attention", "dropout_frozen", "global_avg_pool", "global_max_pool",
          "sequence_pool", "affine", "transformer_block", "full_model"}) {
        const std::size_t first = out.find(row + " ");
        REQUIRE(first != std::string::npos);
        CHECK(out.find(row + " ", first + 1) == std::string::npos);
    }
    CHECK(out.find("FAIL") == std::string::npos);

    // The corrupt hook makes exactly that row fail and flips the exit code.
    const int corrupt_status =
        std::system((sit_bin() + " gradcheck --corrupt relu > " + table).c_str());
    CHECK(WEXITSTATUS(corrupt_status) == 1);
    const std::string corrupted = slurp(table);
    CHECK(corrupted.find("FAIL") != std::string::npos);
}

TEST_CASE("eval on a constant-prediction model reports the degenerate pearson") {
    Workdir wd("sit_cli_degenerate");
    REQUIRE(run(sit_bin() + " synth --n 6 --seed 29 --cb 4 --out " + (wd / "data")) == 0);
    // Zero epochs are rejected, so train one epoch and zero the head by
    // training a baseline variant whose head weights stay near zero...
    // Simpler: craft the constant predictor directly through the library.
    write(wd / "cfg.json", R"({"max_epochs": 1, "seed": 4, "variant": "baseline"})");
    REQUIRE(run(sit_bin() + " train --config " + (wd / "cfg.json") + " --data " +
                (wd / "data/index.csv") + " --out " + (wd / "m.sitm")) == 0);
    // Overwrite the head with zeros via a fresh seed-0 baseline + zeroed
    // tensors is library work; at the CLI level, assert the partial-report
    // contract using a dataset with a single repeated feature map instead.
    std::string csv = "path,score\n";
    for (int i = 0; i < 5; ++i) csv += "../data/feat_0000.sitf," + std::to_string(2 + i) + "\n";
    fs::create_directories(wd / "dup");
    write(wd / "dup/index.csv", csv);
    const std::string eval_out = wd / "eval.json";
    const int code = run(sit_bin() + " eval --model " + (wd / "m.sitm") + " --data " +
                         (wd / "dup/index.csv") + " --out " + eval_out);
    CHECK(code == 1);  // metric-failure exit class
    const json metrics = json::parse(slurp(eval_out));
    CHECK(metrics["pearson"].is_null());
    CHECK(metrics["pearson_error"] == "DegenerateVariance");
    CHECK(metrics.contains("mae"));   // MAE/RMSE still emitted
    CHECK(metrics.contains("rmse"));
}

TEST_CASE("train determinism: bit-identical models and histories") {
    Workdir wd("sit_cli_determinism");
    REQUIRE(run(sit_bin() + " synth --n 10 --seed 13 --cb 8 --out " + (wd / "data")) == 0);
    write(wd / "cfg.json", R"({"max_epochs": 4, "seed": 21})");
    for (const char* name : {"m1", "m2"}) {
        REQUIRE(run(sit_bin() + " train --config " + (wd / "cfg.json") + " --data " +
                    (wd / "data/index.csv") + " --out " + (wd / name) + ".sitm") == 0);
    }
    CHECK(slurp(wd / "m1.sitm") == slurp(wd / "m2.sitm"));
    CHECK(slurp(wd / "m1.sitm.history.json") == slurp(wd / "m2.sitm.history.json"));
}

TEST_CASE("variant flag selects the ablation graphs") {
    Workdir wd("sit_cli_variants");
    REQUIRE(run(sit_bin() + " synth --n 8 --seed 17 --cb 8 --out " + (wd / "data")) == 0);
    write(wd / "cfg.json", R"({"max_epochs": 2, "seed": 1})");
    for (const std::string v : {"baseline", "no-transformer", "no-gmp", "full"}) {
        REQUIRE(run(sit_bin() + " train --config " + (wd / "cfg.json") + " --variant " + v +
                    " --data " + (wd / "data/index.csv") + " --out " + (wd / (v + ".sitm"))) ==
                0);
        const json report = json::parse(slurp(wd / (v + ".sitm.report.json")));
        CHECK(report["config"]["variant"] == v);
    }
    // Model files differ across variants (different parameter sets).
    CHECK(slurp(wd / "baseline.sitm") != slurp(wd / "full.sitm"));
}

TEST_CASE("ablate emits all four variants in order, deterministically") {
    Workdir wd("sit_cli_ablate");
    REQUIRE(run(sit_bin() + " synth --n 8 --seed 19 --cb 8 --out " + (wd / "data")) == 0);
    write(wd / "cfg.json", R"({"max_epochs": 2, "seed": 5})");
    REQUIRE(run(sit_bin() + " ablate --config " + (wd / "cfg.json") + " --data " +
                (wd / "data/index.csv") + " --out " + (wd / "t1.json")) == 0);
    REQUIRE(run(sit_bin() + " ablate --config " + (wd / "cfg.json") + " --data " +
                (wd / "data/index.csv") + " --out " + (wd / "t2.json")) == 0);
    CHECK(slurp(wd / "t1.json") == slurp(wd / "t2.json"));

    const json table = json::parse(slurp(wd / "t1.json"));
    REQUIRE(table["variants"].size() == 4);
    CHECK(table["variants"][0]["variant"] == "baseline");
    CHECK(table["variants"][1]["variant"] == "no-transformer");
    CHECK(table["variants"][2]["variant"] == "no-gmp");
    CHECK(table["variants"][3]["variant"] == "full");
}
