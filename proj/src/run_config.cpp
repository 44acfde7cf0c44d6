#include "retmil/run_config.hpp"

#include <fstream>
#include <set>

#include "retmil/error.hpp"

namespace retmil {

using nlohmann::json;

std::string to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

Precision parse_precision(const std::string& name) {
    if (name == "f32") return Precision::f32;
    if (name == "f64") return Precision::f64;
    throw ConfigError("precision must be 'f32' or 'f64', got '" + name + "'");
}

namespace {

class Reader {
public:
    Reader(const json& j, std::string section) : j_(j), section_(std::move(section)) {
        if (!j_.is_object()) throw ConfigError(section_ + " must be a JSON object");
    }

    template <typename V>
    void read(const char* key, V& target) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        const json& v = j_.at(key);
        if constexpr (std::is_same_v<V, bool>) {
            if (!v.is_boolean()) fail(key, "a boolean");
        } else if constexpr (std::is_integral_v<V>) {
            if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
                fail(key, "a non-negative integer");
            }
        } else if constexpr (std::is_floating_point_v<V>) {
            if (!v.is_number()) fail(key, "a number");
        } else if constexpr (std::is_same_v<V, std::string>) {
            if (!v.is_string()) fail(key, "a string");
        }
        try {
            target = v.get<V>();
        } catch (const json::exception&) {
            fail(key, "of the right type");
        }
    }

    void finish() const {
        for (const auto& item : j_.items()) {
            if (!seen_.count(item.key())) throw ConfigError(section_ + ": unknown key '" + item.key() + "'");
        }
    }

private:
    [[noreturn]] void fail(const char* key, const char* what) const {
        throw ConfigError(section_ + ": '" + key + "' must be " + what);
    }

    const json& j_;
    std::string section_;
    std::set<std::string> seen_;
};

}  // namespace

json to_json(const ModelConfig& c) {
    return {{"d", c.d},
            {"heads", c.heads},
            {"subseq_len", c.subseq_len},
            {"pool_hidden", c.pool_hidden},
            {"num_classes", c.num_classes},
            {"rope_base", c.rope_base},
            {"norm_eps", c.norm_eps},
            {"gammas", c.gammas},
            {"scale_keys", c.scale_keys},
            {"residual", c.residual}};
}

ModelConfig model_config_from_json(const json& j) {
    ModelConfig c;
    Reader r(j, "model");
    r.read("d", c.d);
    r.read("heads", c.heads);
    r.read("subseq_len", c.subseq_len);
    r.read("pool_hidden", c.pool_hidden);
    r.read("num_classes", c.num_classes);
    r.read("rope_base", c.rope_base);
    r.read("norm_eps", c.norm_eps);
    r.read("gammas", c.gammas);
    r.read("scale_keys", c.scale_keys);
    r.read("residual", c.residual);
    r.finish();
    return c;
}

json to_json(const TrainConfig& c) {
    return {{"lr", c.lr},
            {"weight_decay", c.weight_decay},
            {"max_epochs", c.max_epochs},
            {"patience", c.patience},
            {"batch_size", c.batch_size}};
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    Reader r(j, "train");
    r.read("lr", c.lr);
    r.read("weight_decay", c.weight_decay);
    r.read("max_epochs", c.max_epochs);
    r.read("patience", c.patience);
    r.read("batch_size", c.batch_size);
    r.finish();
    return c;
}

json to_json(const SyntheticTaskConfig& c) {
    return {{"d", c.d},
            {"min_tokens", c.min_tokens},
            {"max_tokens", c.max_tokens},
            {"min_witnesses", c.min_witnesses},
            {"max_witnesses", c.max_witnesses},
            {"delta", c.delta},
            {"sigma", c.sigma},
            {"train_bags", c.train_bags},
            {"val_bags", c.val_bags},
            {"test_bags", c.test_bags}};
}

SyntheticTaskConfig synthetic_config_from_json(const json& j) {
    SyntheticTaskConfig c;
    Reader r(j, "synthetic");
    r.read("d", c.d);
    r.read("min_tokens", c.min_tokens);
    r.read("max_tokens", c.max_tokens);
    r.read("min_witnesses", c.min_witnesses);
    r.read("max_witnesses", c.max_witnesses);
    r.read("delta", c.delta);
    r.read("sigma", c.sigma);
    r.read("train_bags", c.train_bags);
    r.read("val_bags", c.val_bags);
    r.read("test_bags", c.test_bags);
    r.finish();
    return c;
}

json to_json(const BenchConfig& c) {
    return {{"lengths", c.lengths},
            {"repeats", c.repeats},
            {"warmup", c.warmup},
            {"d", c.d},
            {"heads", c.heads},
            {"subseq_len", c.subseq_len},
            {"pool_hidden", c.pool_hidden},
            {"num_classes", c.num_classes},
            {"streaming", c.streaming},
            {"memory_limit_mb", c.memory_limit_bytes >> 20}};
}

BenchConfig bench_config_from_json(const json& j) {
    BenchConfig c;
    Reader r(j, "bench");
    r.read("lengths", c.lengths);
    r.read("repeats", c.repeats);
    r.read("warmup", c.warmup);
    r.read("d", c.d);
    r.read("heads", c.heads);
    r.read("subseq_len", c.subseq_len);
    r.read("pool_hidden", c.pool_hidden);
    r.read("num_classes", c.num_classes);
    r.read("streaming", c.streaming);
    std::size_t limit_mb = c.memory_limit_bytes >> 20;
    r.read("memory_limit_mb", limit_mb);
    c.memory_limit_bytes = limit_mb << 20;
    r.finish();
    return c;
}

void RunConfig::set_seed(std::uint64_t value) {
    seed = value;
    train.seed = value;
    synthetic.seed = value;
    bench.seed = value;
}

void RunConfig::validate() const {
    model.validate();
    train.validate();
    synthetic.validate();
    bench.validate();
    if (workers < 1) throw ConfigError("workers must be at least 1");
}

RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    Reader r(j, "config");
    std::uint64_t seed = 0;
    r.read("seed", seed);
    std::string precision = to_string(c.precision);
    r.read("precision", precision);
    c.precision = parse_precision(precision);
    r.read("workers", c.workers);
    json section;
    r.read("model", section);
    if (j.contains("model")) c.model = model_config_from_json(section);
    r.read("train", section);
    if (j.contains("train")) c.train = train_config_from_json(section);
    r.read("synthetic", section);
    if (j.contains("synthetic")) c.synthetic = synthetic_config_from_json(section);
    r.read("bench", section);
    if (j.contains("bench")) c.bench = bench_config_from_json(section);
    r.read("paths", section);
    if (j.contains("paths")) {
        Reader p(section, "paths");
        std::string manifest, output_dir;
        p.read("manifest", manifest);
        p.read("output_dir", output_dir);
        p.finish();
        c.paths.manifest = manifest;
        c.paths.output_dir = output_dir;
    }
    r.finish();
    c.set_seed(seed);
    c.validate();
    return c;
}

json to_json(const RunConfig& c) {
    return {{"seed", c.seed},
            {"precision", to_string(c.precision)},
            {"workers", c.workers},
            {"model", to_json(c.model)},
            {"train", to_json(c.train)},
            {"synthetic", to_json(c.synthetic)},
            {"bench", to_json(c.bench)},
            {"paths", {{"manifest", c.paths.manifest.generic_string()}, {"output_dir", c.paths.output_dir.generic_string()}}}};
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return run_config_from_json(doc);
}

}  // namespace retmil
