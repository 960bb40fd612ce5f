#pragma once

#include <string>

#include "sit/train.hpp"

namespace sit {

// JSON config with keys exactly mirroring the TrainConfig field names. All
// keys are optional; unknown keys are an error. "backbone_channels" may be
// omitted and is then inferred from the dataset by the CLI.
struct LoadedConfig {
    TrainConfig config;
    bool backbone_channels_given = false;
};

LoadedConfig parse_config_json(const std::string& text);   // throws ConfigParseError
LoadedConfig load_config_file(const std::string& path);    // IoFailure / ConfigParseError

std::string config_to_json(const TrainConfig& cfg);  // snapshot for reports

} // namespace sit
