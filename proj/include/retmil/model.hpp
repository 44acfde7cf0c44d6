#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "retmil/feature_sequence.hpp"
#include "retmil/param_store.hpp"
#include "retmil/pooling.hpp"
#include "retmil/retention.hpp"
#include "retmil/sequencer.hpp"

namespace retmil {

struct ModelConfig {
    std::size_t d = 64;
    std::size_t heads = 4;
    std::size_t subseq_len = 64;
    std::size_t pool_hidden = 128;
    std::size_t num_classes = 2;
    double rope_base = 10000.0;
    double norm_eps = 1e-5;
    std::vector<double> gammas;  // empty: default schedule
    bool scale_keys = true;
    bool residual = false;

    RetentionConfig retention() const;
    void validate() const;
};

// split -> local MSR -> local pool -> global MSR -> global pool -> linear classifier.
// Parameter handles in the sub-structs share storage with `params`, so the
// model is move-only; use clone() for an independent copy.
template <typename T>
class RetMILModel {
public:
    static RetMILModel create(const ModelConfig& config, std::uint64_t seed);

    RetMILModel(RetMILModel&&) noexcept = default;
    RetMILModel& operator=(RetMILModel&&) noexcept = default;
    RetMILModel(const RetMILModel&) = delete;
    RetMILModel& operator=(const RetMILModel&) = delete;

    RetMILModel clone() const;

    const ModelConfig& config() const { return config_; }
    ParamStore<T>& params() { return params_; }
    const ParamStore<T>& params() const { return params_; }

    const MSRLayer<T>& local_msr() const { return local_msr_; }
    const MSRLayer<T>& global_msr() const { return global_msr_; }
    const GatedPoolParams<T>& local_pool() const { return local_pool_; }
    const GatedPoolParams<T>& global_pool() const { return global_pool_; }
    const Tensor<T>& classifier_weight() const { return classifier_w_; }
    const Tensor<T>& classifier_bias() const { return classifier_b_; }

private:
    RetMILModel() = default;

    ModelConfig config_;
    ParamStore<T> params_;
    MSRLayer<T> local_msr_;
    GatedPoolParams<T> local_pool_;
    MSRLayer<T> global_msr_;
    GatedPoolParams<T> global_pool_;
    Tensor<T> classifier_w_;  // C×d
    Tensor<T> classifier_b_;  // C
};

template <typename T>
struct ForwardTrace {
    Tensor<T> logits;      // C
    std::vector<T> alpha;  // rows × subseq_len, local weights
    std::vector<T> beta;   // rows, global weights
    Provenance provenance;

    std::size_t rows() const { return provenance.rows; }
};

struct ForwardOptions {
    // Process subsequences one at a time and keep only their pooled vectors.
    // Requires gradient recording to be off; outputs equal the batched path.
    bool streaming = false;
};

template <typename T>
ForwardTrace<T> forward(const RetMILModel<T>& model, const FeatureSequence<T>& seq, ForwardOptions options = {});

// Per-token attention α_{i,k}·β_i scattered through the provenance map;
// duplicated slots add up.
template <typename T>
std::vector<T> attention_scores(const ForwardTrace<T>& trace);

template <typename T>
struct Prediction {
    std::size_t label = 0;
    std::vector<T> probabilities;
};

// argmax of softmax(logits); ties go to the lowest index.
template <typename T>
Prediction<T> predict_from_logits(std::span<const T> logits);

template <typename T>
Prediction<T> predict(const RetMILModel<T>& model, const FeatureSequence<T>& seq);

}  // namespace retmil
