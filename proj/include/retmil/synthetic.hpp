#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "retmil/dataset.hpp"

namespace retmil {

// Negative bags hold N instances ~ Normal(0, σ²I). Positive bags are drawn the
// same way, then k randomly placed instances are replaced by witnesses
// ~ Normal(δ·u, σ²I) for one unit direction u shared by the whole task.
struct SyntheticTaskConfig {
    std::size_t d = 64;
    std::size_t min_tokens = 64;
    std::size_t max_tokens = 256;
    std::size_t min_witnesses = 5;
    std::size_t max_witnesses = 10;
    double delta = 6.0;
    double sigma = 1.0;
    std::size_t train_bags = 200;
    std::size_t val_bags = 50;
    std::size_t test_bags = 100;
    std::uint64_t seed = 0;

    // delta >= 0 is accepted so the indistinguishable δ = 0 task can be built.
    void validate() const;
};

template <typename T>
struct SyntheticTask {
    std::vector<double> direction;  // u, unit norm
    std::vector<BagRecord<T>> train;
    std::vector<BagRecord<T>> val;
    std::vector<BagRecord<T>> test;
};

// Bag i of each split has label i % 2. Fully determined by the seed.
template <typename T>
SyntheticTask<T> generate_synthetic_bags(const SyntheticTaskConfig& config);

// Writes one feature file per bag plus manifest.json into `out_dir`, returning
// the manifest. Values are stored as f32, so the f32 in-memory task is exact.
Manifest generate_synthetic(const SyntheticTaskConfig& config, const std::filesystem::path& out_dir);

}  // namespace retmil
