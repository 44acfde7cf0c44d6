#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "retmil/feature_sequence.hpp"

namespace retmil {

enum class Split { train, val, test };

std::string to_string(Split split);
// Throws InputError for anything but "train", "val" or "test".
Split parse_split(const std::string& name);

template <typename T>
struct BagRecord {
    std::string id;
    FeatureSequence<T> features;
    std::size_t label = 0;
};

struct ManifestEntry {
    std::string id;
    std::filesystem::path path;  // relative entries resolve against the manifest's directory
    std::size_t label = 0;
    Split split = Split::train;
};

// JSON document:
//   {"version": 1, "num_classes": C, "d": d,
//    "entries": [{"id": ..., "path": ..., "label": ..., "split": "train"|"val"|"test"}, ...],
//    "generator": {...}}            // optional, free-form provenance of synthetic sets
struct Manifest {
    std::size_t num_classes = 2;
    std::size_t d = 0;
    std::vector<ManifestEntry> entries;
    std::optional<nlohmann::json> generator;
    std::filesystem::path base_dir;

    std::filesystem::path resolve(const ManifestEntry& entry) const;
    std::size_t count(Split split) const;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

// Labels in range, files present with matching d, and (when asked) every split populated.
void validate_manifest(const Manifest& manifest, bool require_all_splits);

template <typename T>
std::vector<BagRecord<T>> load_split(const Manifest& manifest, Split split);

}  // namespace retmil
