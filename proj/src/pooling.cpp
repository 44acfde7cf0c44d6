#include "retmil/pooling.hpp"

#include <string>

#include "retmil/error.hpp"
#include "retmil/ops.hpp"
#include "retmil/retention.hpp"

namespace retmil {

template <typename T>
GatedPoolParams<T> GatedPoolParams<T>::create(std::size_t d, std::size_t hidden, ParamStore<T>& store,
                                              const std::string& prefix, std::mt19937_64& rng) {
    if (d == 0 || hidden == 0) throw ConfigError("gated pooling: d and hidden width must be positive");
    GatedPoolParams p;
    p.gamma = store.add(prefix + ".gamma", xavier_uniform<T>(1, hidden, rng));
    p.w = store.add(prefix + ".w", xavier_uniform<T>(hidden, d, rng));
    p.u = store.add(prefix + ".u", xavier_uniform<T>(hidden, d, rng));
    return p;
}

template <typename T>
Tensor<T> gated_attention_weights(const Tensor<T>& rows, const GatedPoolParams<T>& params) {
    if (rows.rank() != 2) throw DimensionError("gated pooling: expected n×d rows, got " + shape_str(rows.shape()));
    if (rows.dim(0) == 0) throw InputError("gated pooling: no rows to pool");
    if (rows.dim(1) != params.dim()) {
        throw ConfigError("gated pooling: rows of width " + std::to_string(rows.dim(1)) + " but parameters expect " +
                          std::to_string(params.dim()));
    }
    Tensor<T> content = tanh(matmul_nt(rows, params.w));
    Tensor<T> gate = sigmoid(matmul_nt(rows, params.u));
    Tensor<T> scores = matmul_nt(mul(content, gate), params.gamma);  // n×1
    return softmax(reshape(scores, {rows.dim(0)}));
}

template <typename T>
PoolResult<T> pool(const Tensor<T>& rows, const GatedPoolParams<T>& params) {
    Tensor<T> weights = gated_attention_weights(rows, params);
    const std::size_t n = rows.dim(0), d = rows.dim(1);
    Tensor<T> feature = reshape(matmul(reshape(weights, {1, n}), rows), {d});
    return {feature, weights};
}

#define RETMIL_INSTANTIATE_POOLING(T)                                                            \
    template struct GatedPoolParams<T>;                                                          \
    template Tensor<T> gated_attention_weights<T>(const Tensor<T>&, const GatedPoolParams<T>&);  \
    template PoolResult<T> pool<T>(const Tensor<T>&, const GatedPoolParams<T>&);

RETMIL_INSTANTIATE_POOLING(float)
RETMIL_INSTANTIATE_POOLING(double)

}  // namespace retmil
