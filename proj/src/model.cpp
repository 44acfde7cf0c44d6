#include "retmil/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "retmil/error.hpp"
#include "retmil/ops.hpp"

namespace retmil {

RetentionConfig ModelConfig::retention() const {
    RetentionConfig r;
    r.d = d;
    r.heads = heads;
    r.gammas = gammas;
    r.rope_base = rope_base;
    r.norm_eps = norm_eps;
    r.scale_keys = scale_keys;
    r.residual = residual;
    return r;
}

void ModelConfig::validate() const {
    retention().validate();
    if (subseq_len < 1) throw ConfigError("model: subseq_len must be at least 1");
    if (pool_hidden < 1) throw ConfigError("model: pool_hidden must be at least 1");
    if (num_classes < 2) throw ConfigError("model: num_classes must be at least 2");
}

template <typename T>
RetMILModel<T> RetMILModel<T>::create(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    RetMILModel m;
    m.config_ = config;
    std::mt19937_64 rng(seed);
    const auto rc = config.retention();
    m.local_msr_ = MSRLayer<T>::create(rc, m.params_, "local_msr", rng);
    m.local_pool_ = GatedPoolParams<T>::create(config.d, config.pool_hidden, m.params_, "local_pool", rng);
    m.global_msr_ = MSRLayer<T>::create(rc, m.params_, "global_msr", rng);
    m.global_pool_ = GatedPoolParams<T>::create(config.d, config.pool_hidden, m.params_, "global_pool", rng);
    m.classifier_w_ = m.params_.add("classifier.weight", xavier_uniform<T>(config.num_classes, config.d, rng));
    m.classifier_b_ = m.params_.add("classifier.bias", Tensor<T>::zeros({config.num_classes}));
    return m;
}

template <typename T>
RetMILModel<T> RetMILModel<T>::clone() const {
    RetMILModel copy = create(config_, 0);
    copy.params_.restore(params_.snapshot());
    return copy;
}

namespace {

template <typename T>
Tensor<T> classify(const RetMILModel<T>& model, const Tensor<T>& global_feature) {
    const std::size_t d = model.config().d, c = model.config().num_classes;
    Tensor<T> projected = matmul(model.classifier_weight(), reshape(global_feature, {d, 1}));
    return add(reshape(projected, {c}), model.classifier_bias());
}

template <typename T>
void append(std::vector<T>& out, const Tensor<T>& t) {
    auto v = t.values();
    out.insert(out.end(), v.begin(), v.end());
}

}  // namespace

template <typename T>
ForwardTrace<T> forward(const RetMILModel<T>& model, const FeatureSequence<T>& seq, ForwardOptions options) {
    const auto& cfg = model.config();
    if (seq.dim() != cfg.d) {
        throw ConfigError("forward: sequence width " + std::to_string(seq.dim()) + " does not match model width " +
                          std::to_string(cfg.d));
    }
    ForwardTrace<T> trace;
    std::vector<Tensor<T>> pooled;

    if (options.streaming) {
        if (grad_enabled()) throw StateError("forward: streaming mode needs gradient recording disabled");
        trace.provenance = plan_subsequences(seq.tokens(), cfg.subseq_len);
        pooled.reserve(trace.provenance.rows);
        for (std::size_t row = 0; row < trace.provenance.rows; ++row) {
            PoolResult<T> local;
            {
                Tensor<T> updated = msr_forward_sequence(gather_row(seq, trace.provenance, row), model.local_msr());
                local = pool(updated, model.local_pool());
            }
            append(trace.alpha, local.weights);
            pooled.push_back(local.feature);
        }
    } else {
        auto batch = split_and_pad(seq, cfg.subseq_len);
        trace.provenance = std::move(batch.provenance);
        Tensor<T> updated = msr_forward(batch.stack, model.local_msr());
        pooled.reserve(trace.provenance.rows);
        for (std::size_t row = 0; row < trace.provenance.rows; ++row) {
            PoolResult<T> local = pool(select(updated, row), model.local_pool());
            append(trace.alpha, local.weights);
            pooled.push_back(local.feature);
        }
    }

    Tensor<T> global_feature;
    {
        Tensor<T> local_matrix = stack(pooled);
        pooled.clear();
        Tensor<T> updated = msr_forward_sequence(local_matrix, model.global_msr());
        PoolResult<T> global = pool(updated, model.global_pool());
        append(trace.beta, global.weights);
        global_feature = global.feature;
    }
    trace.logits = classify(model, global_feature);
    return trace;
}

template <typename T>
std::vector<T> attention_scores(const ForwardTrace<T>& trace) {
    const auto& p = trace.provenance;
    if (trace.alpha.size() != p.rows * p.length || trace.beta.size() != p.rows) {
        throw StateError("attention_scores: trace is incomplete");
    }
    std::vector<T> per_slot(trace.alpha.size());
    for (std::size_t i = 0; i < p.rows; ++i)
        for (std::size_t k = 0; k < p.length; ++k) per_slot[i * p.length + k] = trace.alpha[i * p.length + k] * trace.beta[i];
    return provenance_scatter<T>(p, per_slot);
}

template <typename T>
Prediction<T> predict_from_logits(std::span<const T> logits) {
    if (logits.empty()) throw DimensionError("predict: empty logits");
    Prediction<T> out;
    const T top = *std::max_element(logits.begin(), logits.end());
    out.label = static_cast<std::size_t>(std::find(logits.begin(), logits.end(), top) - logits.begin());
    out.probabilities.resize(logits.size());
    T total = 0;
    for (std::size_t c = 0; c < logits.size(); ++c) total += out.probabilities[c] = std::exp(logits[c] - top);
    for (auto& p : out.probabilities) p /= total;
    return out;
}

template <typename T>
Prediction<T> predict(const RetMILModel<T>& model, const FeatureSequence<T>& seq) {
    NoGradGuard no_grad;
    auto trace = forward(model, seq);
    return predict_from_logits<T>(trace.logits.values());
}

#define RETMIL_INSTANTIATE_MODEL(T)                                                                     \
    template class RetMILModel<T>;                                                                      \
    template ForwardTrace<T> forward<T>(const RetMILModel<T>&, const FeatureSequence<T>&, ForwardOptions); \
    template std::vector<T> attention_scores<T>(const ForwardTrace<T>&);                                \
    template Prediction<T> predict_from_logits<T>(std::span<const T>);                                  \
    template Prediction<T> predict<T>(const RetMILModel<T>&, const FeatureSequence<T>&);

RETMIL_INSTANTIATE_MODEL(float)
RETMIL_INSTANTIATE_MODEL(double)

}  // namespace retmil
