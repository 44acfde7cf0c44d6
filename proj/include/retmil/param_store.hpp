#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "retmil/tensor.hpp"

namespace retmil {

// Named trainable leaves plus their Adam moments. Iteration is lexicographic
// by name, which fixes the update order and the checkpoint layout.
template <typename T>
class ParamStore {
public:
    struct Moments {
        Buffer<T> first;
        Buffer<T> second;
        std::uint64_t step = 0;
    };

    // Registers `value` as a leaf that requires grad. Returns the stored handle,
    // which shares storage with `value`.
    Tensor<T> add(const std::string& name, Tensor<T> value);

    bool contains(const std::string& name) const { return params_.count(name) != 0; }
    const Tensor<T>& get(const std::string& name) const;
    std::size_t size() const { return params_.size(); }
    std::size_t scalar_count() const;

    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    void zero_grad();

    Moments& moments(const std::string& name);

    using Snapshot = std::map<std::string, std::vector<T>>;
    Snapshot snapshot() const;
    void restore(const Snapshot& snapshot);

private:
    std::map<std::string, Tensor<T>> params_;
    std::map<std::string, Moments> moments_;
};

struct AdamConfig {
    double lr = 1e-4;
    // Added to the gradient as wd·θ before the moment updates (L2, not decoupled).
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// One bias-corrected Adam update of every parameter. Throws StateError when
// a parameter has no gradient.
template <typename T>
void adam_step(ParamStore<T>& store, const AdamConfig& config);

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::string worst_parameter;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t coordinates = 0;
};

// Compares reverse-mode gradients of the scalar f against central differences
// (f(θ+h) - f(θ-h)) / 2h over every coordinate of every parameter. The error of
// a coordinate is |analytic - numeric| / max(|analytic|, |numeric|, floor).
// Leaves the parameter values unchanged and the gradients cleared.
template <typename T>
GradCheckResult finite_diff_check(const std::function<Tensor<T>(ParamStore<T>&)>& f, ParamStore<T>& store,
                                  double h = 1e-5, double floor = 1e-8);

}  // namespace retmil
