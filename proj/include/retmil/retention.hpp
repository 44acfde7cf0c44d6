#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "retmil/param_store.hpp"
#include "retmil/tensor.hpp"

namespace retmil {

struct RetentionConfig {
    std::size_t d = 64;
    std::size_t heads = 4;
    // Per-head decay rates in (0, 1). Empty means 1 - 2^(-5-h).
    std::vector<double> gammas;
    double rope_base = 10000.0;
    double norm_eps = 1e-5;
    // Scales keys by 1/√d_head before the score product.
    bool scale_keys = true;
    // Adds the layer input to its output.
    bool residual = false;
    // Admits γ = 0 (identity decay). Only for degenerate-decay tests.
    bool allow_zero_gamma = false;

    std::size_t head_dim() const { return d / heads; }
    double gamma(std::size_t head) const;
    void validate() const;
};

std::vector<double> default_gammas(std::size_t heads);

// One multi-head retention layer over a d-wide sequence.
template <typename T>
struct MSRLayer {
    RetentionConfig config;
    Tensor<T> w_q, w_k, w_v;  // d×d, head h owns columns [h·d_head, (h+1)·d_head)
    Tensor<T> w_g, w_o;       // d×d
    Tensor<T> norm_gain, norm_bias;  // d

    // Xavier-uniform projections, unit gain, zero bias; registered under `prefix`.
    static MSRLayer create(const RetentionConfig& config, ParamStore<T>& store, const std::string& prefix,
                           std::mt19937_64& rng);
};

// D[n][m] = γ^(n-m) for n >= m, else 0.
template <typename T>
Tensor<T> decay_matrix(double gamma, std::size_t n, bool allow_zero = false);

// Rotates pairs (x[2j], x[2j+1]) of every row i by positions[i]·θ_j,
// θ_j = base^(-2j/d_head). Differentiable in x.
template <typename T>
Tensor<T> rope_apply(const Tensor<T>& x, std::span<const double> positions, double base);

// 0, 1, ..., n-1
std::vector<double> sequence_positions(std::size_t n);

// Rotated (and, if configured, scaled) query/key and the value block of one head.
template <typename T>
struct HeadProjection {
    Tensor<T> query;
    Tensor<T> key;
    Tensor<T> value;
};

template <typename T>
HeadProjection<T> project_head(const MSRLayer<T>& layer, std::size_t head, const Tensor<T>& x);

// (Q̃ K̃ᵀ ⊙ D) V for one head of x [n×d]; returns n×d_head.
template <typename T>
Tensor<T> retention_parallel(const MSRLayer<T>& layer, std::size_t head, const Tensor<T>& x);

// Same contract via S_t = γ S_{t-1} + k̃_tᵀ v_t, out_t = q̃_t S_t. Keeps one
// d_head×d_head state per step and records no gradient history.
template <typename T>
Tensor<T> retention_recurrent(const MSRLayer<T>& layer, std::size_t head, const Tensor<T>& x);

// Concatenated heads -> GroupNorm (one group per head) -> swish(x·W_G) gate -> ·W_O.
template <typename T>
Tensor<T> msr_forward_sequence(const Tensor<T>& x, const MSRLayer<T>& layer);

// Applies msr_forward_sequence to every row of a B×n×d batch independently.
template <typename T>
Tensor<T> msr_forward(const Tensor<T>& batch, const MSRLayer<T>& layer);

template <typename T>
Tensor<T> xavier_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

}  // namespace retmil
