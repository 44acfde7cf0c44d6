#include "retmil/sequencer.hpp"

#include <algorithm>
#include <string>

#include "retmil/error.hpp"

namespace retmil {

template <typename T>
FeatureSequence<T>::FeatureSequence(Tensor<T> features) : features_(std::move(features)) {
    if (!features_.defined() || features_.rank() != 2) throw InputError("feature sequence must be an N×d matrix");
    if (features_.dim(0) == 0 || features_.dim(1) == 0) throw InputError("feature sequence must be non-empty");
    detail::require_finite<T>(features_.values(), "feature sequence");
}

SplitLayout describe_split(std::size_t tokens, std::size_t length) {
    if (length < 1) throw InputError("subsequence length must be at least 1");
    if (tokens < 1) throw InputError("cannot split an empty sequence");
    SplitLayout s;
    s.tokens = tokens;
    s.length = length;
    s.full_rows = tokens / length;
    s.remainder = tokens % length;
    if (s.remainder == 0) {
        s.remainder_case = RemainderCase::none;
    } else if (2 * s.remainder < length) {
        s.remainder_case = RemainderCase::repeat;
        s.repeats = (length - s.remainder) / s.remainder;
        s.tail = (length - s.remainder) % s.remainder;
    } else {
        s.remainder_case = RemainderCase::prefix;
    }
    return s;
}

Provenance plan_subsequences(std::size_t tokens, std::size_t length) {
    const SplitLayout s = describe_split(tokens, length);
    Provenance p;
    p.rows = s.rows();
    p.length = length;
    p.tokens = tokens;
    p.index.reserve(p.rows * length);
    for (std::size_t i = 1; i <= s.full_rows * length; ++i) p.index.push_back(i);
    if (s.remainder == 0) return p;

    const std::size_t first = s.full_rows * length + 1;  // x_{ql+1}
    for (std::size_t i = 0; i < s.remainder; ++i) p.index.push_back(first + i);
    if (s.remainder_case == RemainderCase::repeat) {
        for (std::size_t rep = 0; rep < s.repeats; ++rep)
            for (std::size_t i = 0; i < s.remainder; ++i) p.index.push_back(first + i);
        for (std::size_t i = 0; i < s.tail; ++i) p.index.push_back(first + i);
    } else {
        for (std::size_t i = 0; i < length - s.remainder; ++i) p.index.push_back(first + i);
    }
    return p;
}

template <typename T>
Tensor<T> gather_row(const FeatureSequence<T>& seq, const Provenance& provenance, std::size_t row) {
    if (row >= provenance.rows) throw DimensionError("gather_row: row " + std::to_string(row) + " out of range");
    if (provenance.tokens != seq.tokens()) throw DimensionError("gather_row: provenance was planned for another sequence");
    const std::size_t d = seq.dim();
    auto src = seq.features().values();
    Buffer<T> out(provenance.length * d);
    for (std::size_t slot = 0; slot < provenance.length; ++slot) {
        const std::size_t token = provenance.at(row, slot) - 1;
        std::copy_n(src.data() + token * d, d, out.data() + slot * d);
    }
    return Tensor<T>::from({provenance.length, d}, std::move(out));
}

template <typename T>
SubsequenceBatch<T> split_and_pad(const FeatureSequence<T>& seq, std::size_t length) {
    SubsequenceBatch<T> batch;
    batch.provenance = plan_subsequences(seq.tokens(), length);
    const std::size_t d = seq.dim();
    auto src = seq.features().values();
    Buffer<T> out(batch.provenance.index.size() * d);
    for (std::size_t s = 0; s < batch.provenance.index.size(); ++s) {
        std::copy_n(src.data() + (batch.provenance.index[s] - 1) * d, d, out.data() + s * d);
    }
    batch.stack = Tensor<T>::from({batch.provenance.rows, length, d}, std::move(out));
    return batch;
}

template <typename T>
std::vector<T> provenance_scatter(const Provenance& provenance, std::span<const T> per_slot) {
    if (per_slot.size() != provenance.index.size()) {
        throw DimensionError("provenance_scatter: expected " + std::to_string(provenance.index.size()) +
                             " slot scores, got " + std::to_string(per_slot.size()));
    }
    std::vector<T> out(provenance.tokens, T(0));
    for (std::size_t s = 0; s < per_slot.size(); ++s) out[provenance.index[s] - 1] += per_slot[s];
    return out;
}

#define RETMIL_INSTANTIATE_SEQUENCER(T)                                                              \
    template class FeatureSequence<T>;                                                               \
    template SubsequenceBatch<T> split_and_pad<T>(const FeatureSequence<T>&, std::size_t);           \
    template Tensor<T> gather_row<T>(const FeatureSequence<T>&, const Provenance&, std::size_t);     \
    template std::vector<T> provenance_scatter<T>(const Provenance&, std::span<const T>);

RETMIL_INSTANTIATE_SEQUENCER(float)
RETMIL_INSTANTIATE_SEQUENCER(double)

}  // namespace retmil
