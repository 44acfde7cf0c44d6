#pragma once

#include <cstddef>
#include <random>
#include <string>

#include "retmil/param_store.hpp"
#include "retmil/tensor.hpp"

namespace retmil {

// Gated attention pooling: score_k = Γ·(tanh(W f_k) ⊙ sigm(U f_k)),
// weights = softmax over k. No bias terms.
template <typename T>
struct GatedPoolParams {
    Tensor<T> gamma;  // 1×M
    Tensor<T> w;      // M×d
    Tensor<T> u;      // M×d

    std::size_t hidden() const { return w.dim(0); }
    std::size_t dim() const { return w.dim(1); }

    static GatedPoolParams create(std::size_t d, std::size_t hidden, ParamStore<T>& store, const std::string& prefix,
                                  std::mt19937_64& rng);
};

template <typename T>
struct PoolResult {
    Tensor<T> feature;  // d
    Tensor<T> weights;  // n
};

template <typename T>
Tensor<T> gated_attention_weights(const Tensor<T>& rows, const GatedPoolParams<T>& params);

// feature = Σ_k weights_k · rows_k
template <typename T>
PoolResult<T> pool(const Tensor<T>& rows, const GatedPoolParams<T>& params);

}  // namespace retmil
