#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "flowalign/velocitynet.hpp"

namespace flowalign {

/// Non-parameter metadata stored alongside a checkpoint.
struct CheckpointInfo {
    std::uint64_t seed = 0;
    std::map<std::string, double> hyperparameters;

    bool operator==(const CheckpointInfo&) const = default;
};

struct Checkpoint {
    VelocityFieldParams params;
    CheckpointInfo info;
};

/// Path of the parameter blob that belongs to a manifest: "run/model.json"
/// stores its parameters in "run/model.bin".
std::filesystem::path blob_path_for(const std::filesystem::path& manifest);

/// Writes a JSON manifest (widths, time_embed_dim, activation, seed,
/// hyperparameters, parameter count, CRC32 of the blob) and a little-endian
/// float64 blob of all parameters in layer order (W0, b0, W1, b1, ...).
void save_checkpoint(const std::filesystem::path& manifest, const VelocityFieldParams& params,
                     const CheckpointInfo& info);

/// Throws IoError if files are missing and FormatError on any CRC, size or
/// shape inconsistency.
Checkpoint load_checkpoint(const std::filesystem::path& manifest);

}  // namespace flowalign
