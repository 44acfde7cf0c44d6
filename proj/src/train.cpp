#include "retmil/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <thread>

#include "retmil/error.hpp"
#include "retmil/metrics.hpp"
#include "retmil/ops.hpp"

namespace retmil {

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
    if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be non-negative");
    if (max_epochs < 1) throw ConfigError("train: max_epochs must be at least 1");
    if (patience < 1) throw ConfigError("train: patience must be at least 1");
    if (patience > max_epochs) throw ConfigError("train: patience may not exceed max_epochs");
    if (batch_size != 1) throw ConfigError("train: batch_size must be 1");
}

template <typename T>
Evaluation evaluate(const RetMILModel<T>& model, const std::vector<BagRecord<T>>& bags, std::size_t workers) {
    Evaluation out;
    const std::size_t n = bags.size();
    out.labels.resize(n);
    out.predictions.resize(n);
    out.probabilities.resize(n);
    std::vector<double> losses(n, 0.0);
    std::vector<std::exception_ptr> errors(std::max<std::size_t>(workers, 1));

    auto run = [&](std::size_t worker, std::size_t stride) {
        try {
            NoGradGuard no_grad;
            for (std::size_t i = worker; i < n; i += stride) {
                auto trace = forward(model, bags[i].features);
                losses[i] = static_cast<double>(cross_entropy_logits(trace.logits, bags[i].label).item());
                const auto pred = predict_from_logits<T>(trace.logits.values());
                out.labels[i] = bags[i].label;
                out.predictions[i] = pred.label;
                out.probabilities[i].assign(pred.probabilities.begin(), pred.probabilities.end());
            }
        } catch (...) {
            errors[worker] = std::current_exception();
        }
    };

    if (workers <= 1 || n <= 1) {
        run(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w, workers);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    // Fixed summation order keeps the mean independent of the worker count.
    out.mean_loss = n == 0 ? 0.0 : std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(n);
    return out;
}

template <typename T>
TrainResult train(RetMILModel<T>& model, const std::vector<BagRecord<T>>& train_set,
                  const std::vector<BagRecord<T>>& val_set, const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    if (train_set.empty()) throw InputError("train: training split is empty");
    if (val_set.empty()) throw InputError("train: validation split is empty");
    const std::size_t classes = model.config().num_classes;
    for (const auto* split : {&train_set, &val_set}) {
        for (const auto& bag : *split) {
            if (bag.label >= classes) throw InputError("train: bag '" + bag.id + "' has label out of range");
        }
    }

    AdamConfig adam;
    adam.lr = config.lr;
    adam.weight_decay = config.weight_decay;

    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult result;
    auto best = model.params().snapshot();
    result.best_val_loss = std::numeric_limits<double>::infinity();
    std::size_t stale = 0;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double train_total = 0.0;
        for (std::size_t step = 0; step < order.size(); ++step) {
            const auto& bag = train_set[order[step]];
            try {
                model.params().zero_grad();
                auto trace = forward(model, bag.features);
                Tensor<T> loss = cross_entropy_logits(trace.logits, bag.label);
                loss.backward();
                train_total += static_cast<double>(loss.item());
                adam_step(model.params(), adam);
                for (const auto& [name, p] : model.params()) detail::require_finite<T>(p.values(), "adam_step");
            } catch (const NumericError& e) {
                throw NumericError("epoch " + std::to_string(epoch) + ", bag '" + bag.id + "': " + e.what());
            }
        }
        model.params().zero_grad();

        const Evaluation val = evaluate(model, val_set);
        EpochRecord record;
        record.epoch = epoch;
        record.train_loss = train_total / static_cast<double>(order.size());
        record.val_loss = val.mean_loss;
        record.val_bacc = balanced_accuracy(val.labels, val.predictions, classes);
        result.history.push_back(record);
        if (on_epoch) on_epoch(record);

        if (!std::isfinite(record.val_loss)) {
            throw NumericError("epoch " + std::to_string(epoch) + ": validation loss is not finite");
        }
        if (record.val_loss < result.best_val_loss) {
            result.best_val_loss = record.val_loss;
            result.best_epoch = epoch;
            best = model.params().snapshot();
            stale = 0;
        } else if (++stale >= config.patience) {
            result.stopped_early = epoch < config.max_epochs;
            break;
        }
    }
    model.params().restore(best);
    return result;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write history " + path.string());
    out << "epoch,train_loss,val_loss,val_bacc\n";
    char line[160];
    for (const auto& r : history) {
        std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g\n", r.epoch, r.train_loss, r.val_loss, r.val_bacc);
        out << line;
    }
    if (!out) throw IoError("short write to " + path.string());
}

#define RETMIL_INSTANTIATE_TRAIN(T)                                                                             \
    template TrainResult train<T>(RetMILModel<T>&, const std::vector<BagRecord<T>>&,                            \
                                  const std::vector<BagRecord<T>>&, const TrainConfig&, const EpochCallback&);  \
    template Evaluation evaluate<T>(const RetMILModel<T>&, const std::vector<BagRecord<T>>&, std::size_t);

RETMIL_INSTANTIATE_TRAIN(float)
RETMIL_INSTANTIATE_TRAIN(double)

}  // namespace retmil
