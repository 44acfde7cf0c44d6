#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "retmil/dataset.hpp"
#include "retmil/model.hpp"

namespace retmil {

struct TrainConfig {
    double lr = 1e-4;
    double weight_decay = 1e-5;
    std::size_t max_epochs = 100;
    // Epochs without a lower validation loss before stopping.
    std::size_t patience = 15;
    std::size_t batch_size = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_bacc = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    bool stopped_early = false;
};

// Called after every epoch; lets callers log progress.
using EpochCallback = std::function<void(const EpochRecord&)>;

// One Adam step per bag in a seeded shuffle of `train_set`, early stopping on
// validation loss. On return `model` holds the best-validation-loss parameters.
template <typename T>
TrainResult train(RetMILModel<T>& model, const std::vector<BagRecord<T>>& train_set,
                  const std::vector<BagRecord<T>>& val_set, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

struct Evaluation {
    std::vector<std::size_t> labels;
    std::vector<std::size_t> predictions;
    std::vector<std::vector<double>> probabilities;
    double mean_loss = 0.0;
};

// Forward passes without gradient recording. With workers > 1 bags are spread
// over threads; results stay in input order.
template <typename T>
Evaluation evaluate(const RetMILModel<T>& model, const std::vector<BagRecord<T>>& bags, std::size_t workers = 1);

// CSV: epoch,train_loss,val_loss,val_bacc with round-trip precision.
void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

}  // namespace retmil
