#include "retmil/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "retmil/error.hpp"
#include "retmil/features_io.hpp"

namespace retmil {

void SyntheticTaskConfig::validate() const {
    if (d == 0) throw ConfigError("synthetic: d must be positive");
    if (min_tokens == 0 || min_tokens > max_tokens) throw ConfigError("synthetic: need 1 <= min_tokens <= max_tokens");
    if (min_witnesses == 0 || min_witnesses > max_witnesses) {
        throw ConfigError("synthetic: need 1 <= min_witnesses <= max_witnesses");
    }
    if (!(delta >= 0.0)) throw ConfigError("synthetic: delta must be non-negative");
    if (!(sigma > 0.0)) throw ConfigError("synthetic: sigma must be positive");
}

namespace {

template <typename T>
std::vector<BagRecord<T>> draw_split(const SyntheticTaskConfig& cfg, const std::vector<double>& direction,
                                     std::size_t count, const std::string& prefix, std::mt19937_64& rng) {
    std::normal_distribution<double> noise(0.0, cfg.sigma);
    std::uniform_int_distribution<std::size_t> length(cfg.min_tokens, cfg.max_tokens);
    std::uniform_int_distribution<std::size_t> witnesses(cfg.min_witnesses, cfg.max_witnesses);
    std::vector<BagRecord<T>> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t label = i % 2;
        const std::size_t n = length(rng);
        Buffer<T> values(n * cfg.d);
        for (auto& v : values) v = static_cast<T>(noise(rng));
        if (label == 1) {
            const std::size_t k = std::min(witnesses(rng), n);
            std::vector<std::size_t> slots(n);
            std::iota(slots.begin(), slots.end(), std::size_t{0});
            // Partial Fisher-Yates: the first k slots become witnesses.
            for (std::size_t j = 0; j < k; ++j) {
                std::uniform_int_distribution<std::size_t> pick(j, n - 1);
                std::swap(slots[j], slots[pick(rng)]);
            }
            for (std::size_t j = 0; j < k; ++j) {
                for (std::size_t c = 0; c < cfg.d; ++c) {
                    values[slots[j] * cfg.d + c] = static_cast<T>(cfg.delta * direction[c] + noise(rng));
                }
            }
        }
        char id[32];
        std::snprintf(id, sizeof id, "%s_%04zu", prefix.c_str(), i);
        out.push_back({id, FeatureSequence<T>(Tensor<T>::from({n, cfg.d}, std::move(values))), label});
    }
    return out;
}

}  // namespace

template <typename T>
SyntheticTask<T> generate_synthetic_bags(const SyntheticTaskConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    SyntheticTask<T> task;
    task.direction.resize(config.d);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (auto& c : task.direction) {
            c = unit(rng);
            norm += c * c;
        }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (auto& c : task.direction) c /= norm;
    task.train = draw_split<T>(config, task.direction, config.train_bags, "train", rng);
    task.val = draw_split<T>(config, task.direction, config.val_bags, "val", rng);
    task.test = draw_split<T>(config, task.direction, config.test_bags, "test", rng);
    return task;
}

Manifest generate_synthetic(const SyntheticTaskConfig& config, const std::filesystem::path& out_dir) {
    const auto task = generate_synthetic_bags<float>(config);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir)) {
        throw IoError("cannot create output directory " + out_dir.string());
    }
    Manifest m;
    m.num_classes = 2;
    m.d = config.d;
    m.base_dir = out_dir;
    auto emit = [&](const std::vector<BagRecord<float>>& bags, Split split) {
        for (const auto& bag : bags) {
            const std::string file = bag.id + ".rmil";
            write_features(out_dir / file, bag.features);
            m.entries.push_back({bag.id, file, bag.label, split});
        }
    };
    emit(task.train, Split::train);
    emit(task.val, Split::val);
    emit(task.test, Split::test);
    m.generator = nlohmann::json{{"kind", "gaussian_witness"},
                                 {"d", config.d},
                                 {"min_tokens", config.min_tokens},
                                 {"max_tokens", config.max_tokens},
                                 {"min_witnesses", config.min_witnesses},
                                 {"max_witnesses", config.max_witnesses},
                                 {"delta", config.delta},
                                 {"sigma", config.sigma},
                                 {"seed", config.seed},
                                 {"direction", task.direction}};
    write_manifest(out_dir / "manifest.json", m);
    return m;
}

template SyntheticTask<float> generate_synthetic_bags<float>(const SyntheticTaskConfig&);
template SyntheticTask<double> generate_synthetic_bags<double>(const SyntheticTaskConfig&);

}  // namespace retmil
