#include "sit/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sit/error.hpp"

namespace sit {

using nlohmann::json;

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "d_proj", "blocks", "heads", "ffn_dim", "dropout", "optimizer", "lr",
        "batch_size", "max_epochs", "early_stop_patience", "plateau_patience",
        "plateau_factor", "seed", "val_fraction", "backbone_channels", "variant",
    };
    return keys;
}

template <typename T>
void read_into(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigParseError(std::string("config key '") + key + "': " + e.what());
    }
}

} // namespace

LoadedConfig parse_config_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigParseError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw ConfigParseError("config must be a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!known_keys().count(key)) {
            throw ConfigParseError("unknown config key: " + key);
        }
    }
    LoadedConfig loaded;
    TrainConfig& cfg = loaded.config;
    read_into(j, "d_proj", cfg.d_proj);
    read_into(j, "blocks", cfg.blocks);
    read_into(j, "heads", cfg.heads);
    read_into(j, "ffn_dim", cfg.ffn_dim);
    read_into(j, "dropout", cfg.dropout);
    read_into(j, "optimizer", cfg.optimizer);
    read_into(j, "lr", cfg.lr);
    read_into(j, "batch_size", cfg.batch_size);
    read_into(j, "max_epochs", cfg.max_epochs);
    read_into(j, "early_stop_patience", cfg.early_stop_patience);
    read_into(j, "plateau_patience", cfg.plateau_patience);
    read_into(j, "plateau_factor", cfg.plateau_factor);
    read_into(j, "seed", cfg.seed);
    read_into(j, "val_fraction", cfg.val_fraction);
    if (j.contains("backbone_channels")) {
        loaded.backbone_channels_given = true;
        read_into(j, "backbone_channels", cfg.backbone_channels);
    }
    if (j.contains("variant")) {
        std::string name;
        read_into(j, "variant", name);
        cfg.variant = variant_from_name(name);
    }
    cfg.validate();
    return loaded;
}

LoadedConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_json(ss.str());
}

std::string config_to_json(const TrainConfig& cfg) {
    json j;
    j["d_proj"] = cfg.d_proj;
    j["blocks"] = cfg.blocks;
    j["heads"] = cfg.heads;
    j["ffn_dim"] = cfg.ffn_dim;
    j["dropout"] = cfg.dropout;
    j["optimizer"] = cfg.optimizer;
    j["lr"] = cfg.lr;
    j["batch_size"] = cfg.batch_size;
    j["max_epochs"] = cfg.max_epochs;
    j["early_stop_patience"] = cfg.early_stop_patience;
    j["plateau_patience"] = cfg.plateau_patience;
    j["plateau_factor"] = cfg.plateau_factor;
    j["seed"] = cfg.seed;
    j["val_fraction"] = cfg.val_fraction;
    j["backbone_channels"] = cfg.backbone_channels;
    j["variant"] = variant_name(cfg.variant);
    return j.dump(2);
}

} // namespace sit
