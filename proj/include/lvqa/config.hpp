#pragma once

#include <filesystem>

#include "lvqa/model_gateway.hpp"
#include "lvqa/stores.hpp"
#include "lvqa/sva_pipeline.hpp"
#include "lvqa/tmkg_pipeline.hpp"

namespace lvqa {

struct EngineConfig {
    StoreConfig store;
    SvaConfig sva;
    TmkgConfig tmkg;
    GatewayOptions gateway;
};

/// INI file with [retrieval], [sva], [tmkg] and [gateway] sections; absent
/// keys keep their defaults. Throws ConfigError.
EngineConfig load_config(const std::filesystem::path& path);

}  // namespace lvqa
