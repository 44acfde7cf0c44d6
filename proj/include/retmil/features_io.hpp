#pragma once

#include <cstdint>
#include <filesystem>

#include "retmil/feature_sequence.hpp"

namespace retmil {

// Feature file layout, all little-endian:
//   "RMIL" | u32 version (=1) | u32 N | u32 d | N·d f32 values, row-major
inline constexpr char kFeatureMagic[4] = {'R', 'M', 'I', 'L'};
inline constexpr std::uint32_t kFeatureVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 16;

struct FeatureHeader {
    std::uint32_t version = 0;
    std::uint32_t tokens = 0;
    std::uint32_t dim = 0;
};

template <typename T>
void write_features(const std::filesystem::path& path, const FeatureSequence<T>& seq);

template <typename T>
FeatureSequence<T> read_features(const std::filesystem::path& path);

// Validates and returns the header without reading the payload.
FeatureHeader read_feature_header(const std::filesystem::path& path);

}  // namespace retmil
