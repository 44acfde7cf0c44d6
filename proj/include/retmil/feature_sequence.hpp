#pragma once

#include <cstddef>

#include "retmil/tensor.hpp"

namespace retmil {

// One bag: N instance embeddings of width d, in crop order.
template <typename T>
class FeatureSequence {
public:
    FeatureSequence() = default;
    // Requires a finite rank-2 tensor with at least one row and one column.
    explicit FeatureSequence(Tensor<T> features);

    std::size_t tokens() const { return features_.dim(0); }
    std::size_t dim() const { return features_.dim(1); }
    const Tensor<T>& features() const { return features_; }

private:
    Tensor<T> features_;
};

}  // namespace retmil
