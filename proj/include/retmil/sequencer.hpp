#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "retmil/feature_sequence.hpp"
#include "retmil/tensor.hpp"

namespace retmil {

enum class RemainderCase {
    none,       // r = 0, the extension is empty and dropped
    repeat,     // 0 < r < l/2, the remainder is tiled
    prefix,     // r >= l/2, the remainder is topped up with its own prefix
};

// N = q·l + r. In the repeat case l - r = a·r + b with 0 <= b < r.
struct SplitLayout {
    std::size_t tokens = 0;
    std::size_t length = 0;
    std::size_t full_rows = 0;  // q
    std::size_t remainder = 0;  // r
    std::size_t repeats = 0;    // a
    std::size_t tail = 0;       // b
    RemainderCase remainder_case = RemainderCase::none;

    std::size_t rows() const { return full_rows + (remainder > 0 ? 1 : 0); }
};

SplitLayout describe_split(std::size_t tokens, std::size_t length);

// Maps every (row, slot) of the padded stack to a 1-based token index.
struct Provenance {
    std::size_t rows = 0;
    std::size_t length = 0;
    std::size_t tokens = 0;
    std::vector<std::size_t> index;  // rows × length, row-major

    std::size_t at(std::size_t row, std::size_t slot) const { return index[row * length + slot]; }
    std::span<const std::size_t> row(std::size_t r) const { return {index.data() + r * length, length}; }
};

Provenance plan_subsequences(std::size_t tokens, std::size_t length);

template <typename T>
struct SubsequenceBatch {
    Tensor<T> stack;  // rows × length × d
    Provenance provenance;
};

template <typename T>
SubsequenceBatch<T> split_and_pad(const FeatureSequence<T>& seq, std::size_t length);

// Materialises one row of the padded stack as a length × d tensor.
template <typename T>
Tensor<T> gather_row(const FeatureSequence<T>& seq, const Provenance& provenance, std::size_t row);

// Sums per-slot values (rows × length, row-major) back onto the tokens they came from.
template <typename T>
std::vector<T> provenance_scatter(const Provenance& provenance, std::span<const T> per_slot);

}  // namespace retmil
