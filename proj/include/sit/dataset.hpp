#pragma once

#include <string>
#include <vector>

#include "sit/backbone.hpp"
#include "sit/train.hpp"

namespace sit {

struct IndexRecord {
    std::string path;   // as written in the csv, relative to the index dir
    double score;
};

// On-disk dataset: index.csv with header "path,score" next to SITF files.
struct DatasetIndex {
    std::string base_dir;
    std::vector<IndexRecord> records;

    std::string resolve(const IndexRecord& rec) const;
};

// Parses and validates the index: every referenced file must exist and carry
// a well-formed SITF header. Scores outside [1, 5] produce a warning line on
// stderr, not a failure.
DatasetIndex load_index(const std::string& index_path);

// Loads every referenced feature map; all maps must share one shape.
std::vector<Sample> load_samples(const DatasetIndex& index);

// Feature shape of the first record (header read only).
FeatureShape peek_feature_shape(const DatasetIndex& index);

// Writes n seeded 7 x 7 x c_b feature maps plus index.csv into out_dir and
// returns the index. Scores follow the documented oracle
//   y = 1 + 4 * sigmoid(<w, GAP(F)>)
// with w drawn once from the seed, so every score lies in (1, 5).
DatasetIndex synth_dataset(std::size_t n, std::uint64_t seed, std::size_t c_b,
                           const std::string& out_dir);

// The score oracle itself, exposed for tests.
double synth_score(const Tensor& features, std::uint64_t seed);

} // namespace sit
