#pragma once

#include <cstdint>
#include <filesystem>

#include "json.hpp"
#include "retmil/model.hpp"

namespace retmil {

// Binary layout, little-endian:
//   "RMCK" | u32 version (=1) | u32 parameter count
//   per parameter, in lexicographic name order:
//     u32 name length | name bytes | u32 rank | u32 dims[rank] | f32 values
// A JSON sidecar at "<path>.json" carries the model config plus `extra`.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::filesystem::path checkpoint_sidecar(const std::filesystem::path& path);

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const RetMILModel<T>& model,
                     const nlohmann::json& extra = nlohmann::json::object());

ModelConfig read_checkpoint_config(const std::filesystem::path& path);

// Rebuilds the model from the sidecar config and fills every parameter.
template <typename T>
RetMILModel<T> load_checkpoint(const std::filesystem::path& path);

}  // namespace retmil
