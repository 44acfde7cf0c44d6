#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "retmil/param_store.hpp"
#include "retmil/pooling.hpp"
#include "retmil/tensor.hpp"

namespace retmil {

struct BenchConfig {
    std::vector<std::size_t> lengths{2048, 4096, 8192, 16384, 32768};
    std::size_t repeats = 5;
    std::size_t warmup = 2;
    std::size_t d = 64;
    std::size_t heads = 4;
    std::size_t subseq_len = 512;
    std::size_t pool_hidden = 128;
    std::size_t num_classes = 2;
    bool streaming = true;
    // Points whose tensors would exceed this are reported as failures.
    std::size_t memory_limit_bytes = std::size_t{4} << 30;
    std::uint64_t seed = 0;

    void validate() const;
};

struct BenchRecord {
    std::string method;
    std::size_t n_tokens = 0;
    double latency_ms_median = 0.0;
    double throughput_tokens_per_s = 0.0;
    std::size_t peak_bytes = 0;
};

struct BenchFailure {
    std::string method;
    std::size_t n_tokens = 0;
    std::string reason;
};

struct BenchReport {
    std::vector<BenchRecord> records;
    std::vector<BenchFailure> failures;
};

inline constexpr const char* kRetMILMethod = "retmil";
inline constexpr const char* kSoftmaxBaselineMethod = "softmax_attention";

// Full RetMIL forward (split -> hierarchy -> logits) per length, metered.
template <typename T>
BenchReport bench_retmil(const BenchConfig& config);

// One multi-head softmax self-attention layer over the whole sequence (full
// N×N scores per head) followed by the same gated pooling head and classifier.
template <typename T>
class SoftmaxAttentionBaseline {
public:
    static SoftmaxAttentionBaseline create(std::size_t d, std::size_t heads, std::size_t pool_hidden,
                                           std::size_t num_classes, std::uint64_t seed);

    Tensor<T> forward(const Tensor<T>& x) const;

private:
    std::size_t d_ = 0, heads_ = 0, classes_ = 0;
    ParamStore<T> params_;
    Tensor<T> w_q_, w_k_, w_v_, w_o_;
    GatedPoolParams<T> pool_;
    Tensor<T> classifier_w_, classifier_b_;
};

template <typename T>
BenchReport bench_softmax_attention_baseline(const BenchConfig& config);

// Header: method,n_tokens,latency_ms_median,throughput_tokens_per_s,peak_bytes
void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records);
void write_bench_csv(const std::filesystem::path& path, const std::vector<BenchRecord>& records);
std::vector<BenchRecord> read_bench_csv(std::istream& in);
std::vector<BenchRecord> read_bench_csv(const std::filesystem::path& path);

}  // namespace retmil
