#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "medfuse/model.hpp"

namespace medfuse {

// Container layout, all integers little-endian:
//   "MEDR" | type tag byte | uint32 header length | UTF-8 JSON header | arrays
// Arrays are concatenated IEEE-754 doubles in header order. The tag byte
// doubles as the format version: 0x01 network model, 0x02 ridge, 0x03
// last-observed.
enum class CheckpointType : std::uint8_t {
    network = 0x01,
    ridge = 0x02,
    last_observed = 0x03,
};

struct CheckpointError : std::runtime_error {
    enum class Kind { bad_magic, bad_version, truncated, bad_header };
    CheckpointError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
    Kind kind;
};

void save_container(const std::string& path, CheckpointType type, nlohmann::json header,
                    const std::vector<std::pair<std::string, const Tensor*>>& arrays);

struct Container {
    CheckpointType type;
    nlohmann::json header;
    std::vector<std::pair<std::string, Tensor>> arrays;
};

Container load_container(const std::string& path);

nlohmann::json config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const nlohmann::json& j);

void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ParameterStore& params, std::uint64_t seed = 0);
std::pair<ModelConfig, ParameterStore> load_checkpoint(const std::string& path);

}  // namespace medfuse
