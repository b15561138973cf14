#pragma once

// Network checkpoints as JSON:
//   {"layers":[{"weights":[[...]],"bias":[...],"activation":"relu"},...],
//    "meta":{"seed":...}}
// Doubles serialize so that load(save(net)) round-trips bit-exactly.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "permpoint/network.hpp"

namespace permpoint {

struct CheckpointMeta {
    std::optional<std::uint64_t> seed;
    std::string note;
};

std::string checkpoint_to_json(const NetworkParams& net, const CheckpointMeta& meta = {});
void save_checkpoint(const NetworkParams& net, const std::filesystem::path& path,
                     const CheckpointMeta& meta = {});

struct LoadedCheckpoint {
    NetworkParams net;
    CheckpointMeta meta;
};

LoadedCheckpoint checkpoint_from_json(const std::string& text);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace permpoint
