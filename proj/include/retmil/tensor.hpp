#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "retmil/memory.hpp"

namespace retmil {

// Dimension sizes, outermost first. Tensors are rank 1 to 3; scalars are {1}.
using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Reverse-mode recording is on by default and can be suspended per thread.
bool grad_enabled() noexcept;

class NoGradGuard {
public:
    NoGradGuard() noexcept;
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

namespace detail {

template <typename T>
struct Node {
    Shape shape;
    Buffer<T> value;
    Buffer<T> grad;
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> inputs;
    // Reads this node's grad and accumulates into the grads of `inputs`.
    std::function<void(Node&)> backward;

    // Zero-initialised on first use.
    std::span<T> grad_buffer();
};

}  // namespace detail

template <typename T>
class Tensor {
public:
    using value_type = T;
    using NodePtr = std::shared_ptr<detail::Node<T>>;

    Tensor() = default;
    explicit Tensor(NodePtr node) : node_(std::move(node)) {}

    static Tensor zeros(const Shape& shape, bool requires_grad = false);
    static Tensor full(const Shape& shape, T value, bool requires_grad = false);
    static Tensor from(const Shape& shape, std::span<const T> values, bool requires_grad = false);
    static Tensor from(const Shape& shape, std::initializer_list<T> values, bool requires_grad = false);
    static Tensor from(const Shape& shape, Buffer<T>&& values, bool requires_grad = false);
    static Tensor scalar(T value, bool requires_grad = false);

    bool defined() const noexcept { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
    std::size_t numel() const { return node_->value.size(); }

    std::span<const T> values() const { return {node_->value.data(), node_->value.size()}; }
    // In-place access for optimizers, checkpoint loading and perturbation oracles.
    // Does not record anything on the tape.
    std::span<T> mutable_values() { return {node_->value.data(), node_->value.size()}; }
    std::vector<T> to_vector() const { return {node_->value.begin(), node_->value.end()}; }

    T item() const;
    T at(std::size_t i) const;
    T at(std::size_t i, std::size_t j) const;
    T at(std::size_t i, std::size_t j, std::size_t k) const;

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const T> grad() const { return {node_->grad.data(), node_->grad.size()}; }
    void clear_grad() { node_->grad = Buffer<T>(); }

    // Seeds d(self)/d(self) = 1 and propagates through the recorded graph.
    // Requires a single-element tensor.
    void backward() const;

    // Copy of the values with no history.
    Tensor detach() const;

    const NodePtr& node() const noexcept { return node_; }

private:
    NodePtr node_;
};

namespace detail {

// Throws NumericError naming `op` if any value is NaN or infinite.
template <typename T>
void require_finite(std::span<const T> values, const char* op);

// Wraps a freshly computed value into a tensor. When recording is enabled and
// any input requires a gradient, the result joins the graph with `backward`.
template <typename T>
Tensor<T> make_result(const char* op, Shape shape, Buffer<T>&& value, std::vector<Tensor<T>> inputs,
                      std::function<void(Node<T>&)> backward);

}  // namespace detail

}  // namespace retmil
