#include "retmil/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "retmil/error.hpp"

namespace retmil {

namespace {
thread_local bool t_grad_enabled = true;
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

bool grad_enabled() noexcept { return t_grad_enabled; }

NoGradGuard::NoGradGuard() noexcept : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

namespace detail {

template <typename T>
std::span<T> Node<T>::grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return {grad.data(), grad.size()};
}

template <typename T>
void require_finite(std::span<const T> values, const char* op) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw NumericError(std::string("non-finite value in output of ") + op + " at element " +
                               std::to_string(i));
        }
    }
}

namespace {

void validate_shape(const Shape& shape) {
    if (shape.empty() || shape.size() > 3) {
        throw DimensionError("tensor rank must be 1..3, got shape " + shape_str(shape));
    }
}

}  // namespace

template <typename T>
Tensor<T> make_result(const char* op, Shape shape, Buffer<T>&& value, std::vector<Tensor<T>> inputs,
                      std::function<void(Node<T>&)> backward) {
    validate_shape(shape);
    require_finite<T>({value.data(), value.size()}, op);
    auto node = std::make_shared<Node<T>>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->op = op;
    if (grad_enabled()) {
        const bool any = std::any_of(inputs.begin(), inputs.end(),
                                     [](const Tensor<T>& t) { return t.requires_grad(); });
        if (any) {
            node->requires_grad = true;
            node->inputs.reserve(inputs.size());
            for (auto& t : inputs) node->inputs.push_back(t.node());
            node->backward = std::move(backward);
        }
    }
    return Tensor<T>(std::move(node));
}

}  // namespace detail

template <typename T>
Tensor<T> Tensor<T>::from(const Shape& shape, Buffer<T>&& values, bool requires_grad) {
    detail::validate_shape(shape);
    if (shape_numel(shape) != values.size()) {
        throw DimensionError("shape " + shape_str(shape) + " does not match " + std::to_string(values.size()) +
                             " values");
    }
    detail::require_finite<T>({values.data(), values.size()}, "from");
    auto node = std::make_shared<detail::Node<T>>();
    node->shape = shape;
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::zeros(const Shape& shape, bool requires_grad) {
    return full(shape, T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(const Shape& shape, T value, bool requires_grad) {
    detail::validate_shape(shape);
    return from(shape, Buffer<T>(shape_numel(shape), value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from(const Shape& shape, std::span<const T> values, bool requires_grad) {
    return from(shape, Buffer<T>(values.begin(), values.end()), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from(const Shape& shape, std::initializer_list<T> values, bool requires_grad) {
    return from(shape, Buffer<T>(values.begin(), values.end()), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
    return full({1}, value, requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
    if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
}

template <typename T>
T Tensor<T>::at(std::size_t i) const {
    if (rank() != 1 || i >= dim(0)) throw DimensionError("index out of range for " + shape_str(shape()));
    return node_->value[i];
}

template <typename T>
T Tensor<T>::at(std::size_t i, std::size_t j) const {
    if (rank() != 2 || i >= dim(0) || j >= dim(1)) {
        throw DimensionError("index out of range for " + shape_str(shape()));
    }
    return node_->value[i * dim(1) + j];
}

template <typename T>
T Tensor<T>::at(std::size_t i, std::size_t j, std::size_t k) const {
    if (rank() != 3 || i >= dim(0) || j >= dim(1) || k >= dim(2)) {
        throw DimensionError("index out of range for " + shape_str(shape()));
    }
    return node_->value[(i * dim(1) + j) * dim(2) + k];
}

template <typename T>
void Tensor<T>::backward() const {
    if (numel() != 1) throw DimensionError("backward() needs a single-element tensor, got " + shape_str(shape()));
    if (!requires_grad()) throw StateError("backward() on a tensor that does not require grad");

    // Iterative post-order DFS; reversed, it visits every node after all of its consumers.
    std::vector<detail::Node<T>*> order;
    std::unordered_set<const detail::Node<T>*> visited;
    std::vector<std::pair<detail::Node<T>*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            detail::Node<T>* child = node->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    node_->grad_buffer()[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node<T>& node = **it;
        if (node.backward && !node.grad.empty()) node.backward(node);
    }
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
    return from(shape(), Buffer<T>(node_->value.begin(), node_->value.end()), false);
}

#define RETMIL_INSTANTIATE_TENSOR(T)                                                                        \
    template struct detail::Node<T>;                                                                        \
    template class Tensor<T>;                                                                               \
    template void detail::require_finite<T>(std::span<const T>, const char*);                               \
    template Tensor<T> detail::make_result<T>(const char*, Shape, Buffer<T>&&, std::vector<Tensor<T>>,      \
                                              std::function<void(detail::Node<T>&)>);

RETMIL_INSTANTIATE_TENSOR(float)
RETMIL_INSTANTIATE_TENSOR(double)

}  // namespace retmil
