#pragma once

#include <cstddef>
#include <vector>

#include "retmil/tensor.hpp"

namespace retmil {

// Differentiable tensor operations. Binary elementwise ops accept two tensors
// of identical shape, or one single-element tensor broadcast against the other.
// Every forward result is checked for NaN/Inf.

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
// Hadamard product.
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> hadamard(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);

template <typename T> Tensor<T> tanh(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
// x * sigmoid(x)
template <typename T> Tensor<T> swish(const Tensor<T>& x);
template <typename T> Tensor<T> exp(const Tensor<T>& x);

// [m×k]·[k×n] -> [m×n]
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
// [m×k]·[n×k]ᵀ -> [m×n]
template <typename T> Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> transpose(const Tensor<T>& a);

template <typename T> Tensor<T> reshape(const Tensor<T>& a, const Shape& shape);
// Columns [begin, end) of a rank-2 tensor.
template <typename T> Tensor<T> slice_cols(const Tensor<T>& a, std::size_t begin, std::size_t end);
// Concatenates rank-2 tensors with equal row counts along the column axis.
template <typename T> Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts);
// Index the leading axis: rank 3 -> rank 2, rank 2 -> rank 1.
template <typename T> Tensor<T> select(const Tensor<T>& a, std::size_t index);
// Inverse of select: stacks equal-shape tensors along a new leading axis.
template <typename T> Tensor<T> stack(const std::vector<Tensor<T>>& parts);

// Sum of all elements, shape {1}.
template <typename T> Tensor<T> sum(const Tensor<T>& a);

// Softmax of a rank-1 tensor, with max subtraction.
template <typename T> Tensor<T> softmax(const Tensor<T>& x);
// Row-wise softmax of a rank-2 tensor.
template <typename T> Tensor<T> softmax_rows(const Tensor<T>& x);

// Per row of x [n×d], normalises each of `groups` contiguous column groups to
// zero mean and unit variance ((x-μ)/√(σ²+eps), biased σ²), then applies
// gain ⊙ · + bias with gain, bias of shape {d}.
template <typename T>
Tensor<T> group_norm(const Tensor<T>& x, std::size_t groups, T eps, const Tensor<T>& gain, const Tensor<T>& bias);

// -log softmax(logits)[label], shape {1}.
template <typename T> Tensor<T> cross_entropy_logits(const Tensor<T>& logits, std::size_t label);

namespace kernels {

// C[m×n] += A[m×k]·B[k×n], row-major, accumulation in k order.
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);
// C[m×n] += A[k×m]ᵀ·B[k×n]
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);
// C[m×n] += A[m×k]·B[n×k]ᵀ
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);

}  // namespace kernels

}  // namespace retmil
