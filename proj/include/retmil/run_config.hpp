#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "retmil/bench.hpp"
#include "retmil/model.hpp"
#include "retmil/synthetic.hpp"
#include "retmil/train.hpp"

namespace retmil {

enum class Precision { f32, f64 };

std::string to_string(Precision p);
Precision parse_precision(const std::string& name);

// Each section parser starts from the defaults and overrides the keys present.
// Unknown keys and wrongly typed values raise ConfigError naming the key.
nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SyntheticTaskConfig& config);
SyntheticTaskConfig synthetic_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BenchConfig& config);
BenchConfig bench_config_from_json(const nlohmann::json& j);

struct PathsConfig {
    std::filesystem::path manifest;
    std::filesystem::path output_dir;
};

// One JSON document drives every command:
//   {"seed": 0, "precision": "f32", "workers": 1,
//    "model": {...}, "train": {...}, "paths": {"manifest": ..., "output_dir": ...},
//    "synthetic": {...}, "bench": {...}}
// All sections are optional. The top-level seed feeds model initialisation,
// shuffling, synthetic generation and benchmarks.
struct RunConfig {
    std::uint64_t seed = 0;
    Precision precision = Precision::f32;
    std::size_t workers = 1;
    ModelConfig model;
    TrainConfig train;
    PathsConfig paths;
    SyntheticTaskConfig synthetic;
    BenchConfig bench;

    void set_seed(std::uint64_t value);
    void validate() const;
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& config);
// Throws IoError when the file cannot be read, ConfigError when it is invalid.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace retmil
