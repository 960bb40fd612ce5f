#include "sit/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "sit/error.hpp"
#include "sit/ops.hpp"
#include "sit/sitf.hpp"

namespace fs = std::filesystem;

namespace sit {
namespace {

constexpr std::uint64_t kFeatureLabel = 7;
constexpr std::uint64_t kOracleLabel = 11;

// Feature magnitude of the generator, sized like post-ReLU backbone
// activations rather than unit-interval noise.
constexpr double kFeatureScale = 4.0;

// Oracle weights: one uniform draw per channel, scaled so the logit spread
// stays in the sigmoid's responsive range for any C_b at kFeatureScale.
std::vector<double> oracle_weights(std::size_t c_b, std::uint64_t seed) {
    RngStream w_rng = RngStream(seed).fork(kOracleLabel);
    const double scale = 4.5 / (kFeatureScale * std::sqrt(static_cast<double>(c_b)));
    std::vector<double> w(c_b);
    for (std::size_t c = 0; c < c_b; ++c) {
        w[c] = w_rng.next_uniform(-scale, scale);
    }
    return w;
}

} // namespace

std::string DatasetIndex::resolve(const IndexRecord& rec) const {
    const fs::path p(rec.path);
    if (p.is_absolute()) return rec.path;
    return (fs::path(base_dir) / p).string();
}

DatasetIndex load_index(const std::string& index_path) {
    std::ifstream in(index_path);
    if (!in) throw IoFailure("cannot open index: " + index_path);
    DatasetIndex index;
    index.base_dir = fs::path(index_path).parent_path().string();
    if (index.base_dir.empty()) index.base_dir = ".";

    std::string line;
    if (!std::getline(in, line)) throw IoFailure("empty index: " + index_path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "path,score") {
        throw IoFailure("index header must be 'path,score', got '" + line + "'");
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::size_t comma = line.rfind(',');
        if (comma == std::string::npos || comma == 0) {
            throw IoFailure("malformed index line " + std::to_string(line_no) + ": " + line);
        }
        IndexRecord rec;
        rec.path = line.substr(0, comma);
        try {
            rec.score = std::stod(line.substr(comma + 1));
        } catch (const std::exception&) {
            throw IoFailure("bad score on index line " + std::to_string(line_no) + ": " + line);
        }
        if (rec.score < 1.0 || rec.score > 5.0) {
            std::cerr << "warning: score " << rec.score << " outside [1,5] on line " << line_no
                      << "\n";
        }
        index.records.push_back(std::move(rec));
    }
    if (index.records.empty()) throw EmptyDataset("index has no records: " + index_path);

    // Referential integrity: every file must exist and parse as SITF before
    // any training begins.
    for (const IndexRecord& rec : index.records) {
        const std::string full = index.resolve(rec);
        if (!fs::exists(full)) {
            throw IoFailure("indexed feature file missing: " + full);
        }
        (void)load_feature_map(full);  // header + payload validation
    }
    return index;
}

std::vector<Sample> load_samples(const DatasetIndex& index) {
    std::vector<Sample> samples;
    samples.reserve(index.records.size());
    FeatureShape shape;
    for (std::size_t i = 0; i < index.records.size(); ++i) {
        FeatureMap fm = load_feature_map(index.resolve(index.records[i]));
        if (i == 0) {
            shape = {fm.data.extent(0), fm.data.extent(1), fm.data.extent(2)};
        } else if (fm.data.extent(0) != shape.h || fm.data.extent(1) != shape.w ||
                   fm.data.extent(2) != shape.c) {
            throw ShapeMismatch("feature shapes differ across the dataset: " +
                                fm.data.shape_str());
        }
        samples.push_back({std::move(fm.data), index.records[i].score});
    }
    return samples;
}

FeatureShape peek_feature_shape(const DatasetIndex& index) {
    const FeatureMap fm = load_feature_map(index.resolve(index.records.front()));
    return {fm.data.extent(0), fm.data.extent(1), fm.data.extent(2)};
}

double synth_score(const Tensor& features, std::uint64_t seed) {
    const std::vector<double> w = oracle_weights(features.extent(2), seed);
    const Tensor gap = ops::global_avg_pool_hw(features);
    double logit = 0.0;
    for (std::size_t c = 0; c < w.size(); ++c) logit += w[c] * gap[c];
    return 1.0 + 4.0 / (1.0 + std::exp(-logit));
}

DatasetIndex synth_dataset(std::size_t n, std::uint64_t seed, std::size_t c_b,
                           const std::string& out_dir) {
    if (n < 1) throw EmptyDataset("synth n must be >= 1");
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoFailure("cannot create " + out_dir + ": " + ec.message());

    RngStream feat_rng = RngStream(seed).fork(kFeatureLabel);
    DatasetIndex index;
    index.base_dir = out_dir;
    std::string csv = "path,score\n";
    char namebuf[32];
    for (std::size_t i = 0; i < n; ++i) {
        // Quantize to f32 so the file round-trips the exact values the
        // oracle saw.
        Tensor features({7, 7, c_b});
        for (std::size_t j = 0; j < features.size(); ++j) {
            features[j] = static_cast<double>(
                static_cast<float>(kFeatureScale * feat_rng.next_unit()));
        }
        const double score = synth_score(features, seed);
        std::snprintf(namebuf, sizeof(namebuf), "feat_%04zu.sitf", i);
        save_feature_map(FeatureMap{features, Provenance::kSynthetic},
                         (fs::path(out_dir) / namebuf).string());
        char scorebuf[40];
        std::snprintf(scorebuf, sizeof(scorebuf), "%.17g", score);
        csv += std::string(namebuf) + "," + scorebuf + "\n";
        index.records.push_back({namebuf, score});
    }
    std::ofstream out(fs::path(out_dir) / "index.csv", std::ios::trunc);
    if (!out) throw IoFailure("cannot write index.csv in " + out_dir);
    out << csv;
    if (!out) throw IoFailure("index.csv write failed in " + out_dir);
    return index;
}

} // namespace sit
