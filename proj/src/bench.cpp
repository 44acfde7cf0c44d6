#include "retmil/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "retmil/error.hpp"
#include "retmil/model.hpp"
#include "retmil/ops.hpp"
#include "retmil/retention.hpp"

namespace retmil {

void BenchConfig::validate() const {
    if (lengths.empty()) throw ConfigError("bench: no lengths");
    if (!std::is_sorted(lengths.begin(), lengths.end())) throw ConfigError("bench: lengths must be ascending");
    if (lengths.front() == 0) throw ConfigError("bench: lengths must be positive");
    if (repeats < 5) throw ConfigError("bench: repeats must be at least 5");
    if (d == 0 || heads == 0 || d % heads != 0) throw ConfigError("bench: d must be a positive multiple of heads");
    if (subseq_len == 0 || pool_hidden == 0 || num_classes < 2) throw ConfigError("bench: invalid model size");
}

namespace {

class LimitGuard {
public:
    explicit LimitGuard(std::size_t bytes) : previous_(AllocationMeter::global().limit()) {
        const std::size_t live = AllocationMeter::global().current_bytes();
        AllocationMeter::global().set_limit(live + bytes);
    }
    ~LimitGuard() { AllocationMeter::global().set_limit(previous_); }
    LimitGuard(const LimitGuard&) = delete;
    LimitGuard& operator=(const LimitGuard&) = delete;

private:
    std::size_t previous_;
};

template <typename T>
Tensor<T> random_features(std::size_t n, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    Buffer<T> values(n * d);
    for (auto& v : values) v = static_cast<T>(dist(rng));
    return Tensor<T>::from({n, d}, std::move(values));
}

// Times `run` (warmup + repeats) and meters each measured call.
BenchReport measure(const BenchConfig& config, const std::string& method,
                    const std::function<std::function<void()>(std::size_t)>& prepare) {
    BenchReport report;
    for (std::size_t n : config.lengths) {
        try {
            LimitGuard limit(config.memory_limit_bytes);
            auto run = prepare(n);
            for (std::size_t w = 0; w < config.warmup; ++w) run();
            std::vector<double> latencies;
            std::size_t peak = 0;
            for (std::size_t r = 0; r < config.repeats; ++r) {
                MeterRegion region;
                const auto start = std::chrono::steady_clock::now();
                run();
                const auto stop = std::chrono::steady_clock::now();
                latencies.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
                peak = std::max(peak, region.peak_bytes());
            }
            std::nth_element(latencies.begin(), latencies.begin() + latencies.size() / 2, latencies.end());
            double median = latencies[latencies.size() / 2];
            if (latencies.size() % 2 == 0) {
                const double lower = *std::max_element(latencies.begin(), latencies.begin() + latencies.size() / 2);
                median = 0.5 * (median + lower);
            }
            BenchRecord rec;
            rec.method = method;
            rec.n_tokens = n;
            rec.latency_ms_median = median;
            rec.throughput_tokens_per_s = static_cast<double>(n) / (median / 1000.0);
            rec.peak_bytes = peak;
            report.records.push_back(rec);
        } catch (const OutOfMemory& e) {
            report.failures.push_back({method, n, std::string("out of memory: ") + e.what()});
        } catch (const std::bad_alloc&) {
            report.failures.push_back({method, n, "out of memory: system allocator refused"});
        }
    }
    return report;
}

}  // namespace

template <typename T>
BenchReport bench_retmil(const BenchConfig& config) {
    config.validate();
    ModelConfig mc;
    mc.d = config.d;
    mc.heads = config.heads;
    mc.subseq_len = config.subseq_len;
    mc.pool_hidden = config.pool_hidden;
    mc.num_classes = config.num_classes;
    auto model = std::make_shared<RetMILModel<T>>(RetMILModel<T>::create(mc, config.seed));
    const ForwardOptions options{config.streaming};
    return measure(config, kRetMILMethod, [&](std::size_t n) {
        auto seq = std::make_shared<FeatureSequence<T>>(random_features<T>(n, config.d, config.seed + n));
        return std::function<void()>([model, seq, options] {
            NoGradGuard no_grad;
            auto trace = forward(*model, *seq, options);
            detail::require_finite<T>(trace.logits.values(), "bench logits");
        });
    });
}

template <typename T>
SoftmaxAttentionBaseline<T> SoftmaxAttentionBaseline<T>::create(std::size_t d, std::size_t heads,
                                                                std::size_t pool_hidden, std::size_t num_classes,
                                                                std::uint64_t seed) {
    if (d == 0 || heads == 0 || d % heads != 0) throw ConfigError("baseline: d must be a positive multiple of heads");
    SoftmaxAttentionBaseline b;
    b.d_ = d;
    b.heads_ = heads;
    b.classes_ = num_classes;
    std::mt19937_64 rng(seed);
    b.w_q_ = b.params_.add("attn.w_q", xavier_uniform<T>(d, d, rng));
    b.w_k_ = b.params_.add("attn.w_k", xavier_uniform<T>(d, d, rng));
    b.w_v_ = b.params_.add("attn.w_v", xavier_uniform<T>(d, d, rng));
    b.w_o_ = b.params_.add("attn.w_o", xavier_uniform<T>(d, d, rng));
    b.pool_ = GatedPoolParams<T>::create(d, pool_hidden, b.params_, "pool", rng);
    b.classifier_w_ = b.params_.add("classifier.weight", xavier_uniform<T>(num_classes, d, rng));
    b.classifier_b_ = b.params_.add("classifier.bias", Tensor<T>::zeros({num_classes}));
    return b;
}

template <typename T>
Tensor<T> SoftmaxAttentionBaseline<T>::forward(const Tensor<T>& x) const {
    if (x.rank() != 2 || x.dim(1) != d_) throw ConfigError("baseline: input width does not match");
    const std::size_t dh = d_ / heads_;
    const T key_scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    std::vector<Tensor<T>> heads;
    for (std::size_t h = 0; h < heads_; ++h) {
        const std::size_t lo = h * dh, hi = lo + dh;
        Tensor<T> q = matmul(x, slice_cols(w_q_, lo, hi));
        Tensor<T> k = scale(matmul(x, slice_cols(w_k_, lo, hi)), key_scale);
        Tensor<T> v = matmul(x, slice_cols(w_v_, lo, hi));
        Tensor<T> probs;
        {
            Tensor<T> scores = matmul_nt(q, k);  // N×N
            probs = softmax_rows(scores);
        }
        heads.push_back(matmul(probs, v));
    }
    Tensor<T> mixed = matmul(concat_cols(heads), w_o_);
    heads.clear();
    auto pooled = pool(mixed, pool_);
    Tensor<T> projected = matmul(classifier_w_, reshape(pooled.feature, {d_, 1}));
    return add(reshape(projected, {classes_}), classifier_b_);
}

template <typename T>
BenchReport bench_softmax_attention_baseline(const BenchConfig& config) {
    config.validate();
    auto baseline = std::make_shared<SoftmaxAttentionBaseline<T>>(SoftmaxAttentionBaseline<T>::create(
        config.d, config.heads, config.pool_hidden, config.num_classes, config.seed));
    return measure(config, kSoftmaxBaselineMethod, [&](std::size_t n) {
        auto x = std::make_shared<Tensor<T>>(random_features<T>(n, config.d, config.seed + n));
        return std::function<void()>([baseline, x] {
            NoGradGuard no_grad;
            Tensor<T> logits = baseline->forward(*x);
            detail::require_finite<T>(logits.values(), "bench logits");
        });
    });
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records) {
    out << "method,n_tokens,latency_ms_median,throughput_tokens_per_s,peak_bytes\n";
    char line[256];
    for (const auto& r : records) {
        std::snprintf(line, sizeof line, "%s,%zu,%.17g,%.17g,%zu\n", r.method.c_str(), r.n_tokens,
                      r.latency_ms_median, r.throughput_tokens_per_s, r.peak_bytes);
        out << line;
    }
}

void write_bench_csv(const std::filesystem::path& path, const std::vector<BenchRecord>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    write_bench_csv(out, records);
    if (!out) throw IoError("short write to " + path.string());
}

std::vector<BenchRecord> read_bench_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "method,n_tokens,latency_ms_median,throughput_tokens_per_s,peak_bytes") {
        throw FormatError("bench CSV: unexpected header");
    }
    std::vector<BenchRecord> out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 5) throw FormatError("bench CSV: row " + std::to_string(row) + " needs 5 fields");
        try {
            BenchRecord r;
            r.method = fields[0];
            r.n_tokens = std::stoull(fields[1]);
            r.latency_ms_median = std::stod(fields[2]);
            r.throughput_tokens_per_s = std::stod(fields[3]);
            r.peak_bytes = std::stoull(fields[4]);
            out.push_back(std::move(r));
        } catch (const std::exception&) {
            throw FormatError("bench CSV: row " + std::to_string(row) + " is malformed");
        }
    }
    return out;
}

std::vector<BenchRecord> read_bench_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return read_bench_csv(in);
}

#define RETMIL_INSTANTIATE_BENCH(T)                                     \
    template BenchReport bench_retmil<T>(const BenchConfig&);           \
    template class SoftmaxAttentionBaseline<T>;                         \
    template BenchReport bench_softmax_attention_baseline<T>(const BenchConfig&);

RETMIL_INSTANTIATE_BENCH(float)
RETMIL_INSTANTIATE_BENCH(double)

}  // namespace retmil
