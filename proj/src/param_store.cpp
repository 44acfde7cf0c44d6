#include "retmil/param_store.hpp"

#include <algorithm>
#include <cmath>

#include "retmil/error.hpp"

namespace retmil {

template <typename T>
Tensor<T> ParamStore<T>::add(const std::string& name, Tensor<T> value) {
    if (!value.defined()) throw StateError("parameter '" + name + "' is undefined");
    if (!value.node()->inputs.empty()) throw StateError("parameter '" + name + "' must be a leaf tensor");
    if (params_.count(name)) throw StateError("parameter '" + name + "' registered twice");
    value.node()->requires_grad = true;
    params_.emplace(name, value);
    return value;
}

template <typename T>
const Tensor<T>& ParamStore<T>::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw StateError("unknown parameter '" + name + "'");
    return it->second;
}

template <typename T>
std::size_t ParamStore<T>::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, p] : params_) n += p.numel();
    return n;
}

template <typename T>
void ParamStore<T>::zero_grad() {
    for (auto& [name, p] : params_) {
        Tensor<T> handle = p;
        handle.clear_grad();
    }
}

template <typename T>
typename ParamStore<T>::Moments& ParamStore<T>::moments(const std::string& name) {
    const auto& p = get(name);
    auto& m = moments_[name];
    if (m.first.size() != p.numel()) {
        m.first.assign(p.numel(), T(0));
        m.second.assign(p.numel(), T(0));
        m.step = 0;
    }
    return m;
}

template <typename T>
typename ParamStore<T>::Snapshot ParamStore<T>::snapshot() const {
    Snapshot out;
    for (const auto& [name, p] : params_) out.emplace(name, p.to_vector());
    return out;
}

template <typename T>
void ParamStore<T>::restore(const Snapshot& snapshot) {
    for (auto& [name, p] : params_) {
        auto it = snapshot.find(name);
        if (it == snapshot.end()) throw StateError("snapshot lacks parameter '" + name + "'");
        if (it->second.size() != p.numel()) throw DimensionError("snapshot size mismatch for '" + name + "'");
        Tensor<T> handle = p;
        std::copy(it->second.begin(), it->second.end(), handle.mutable_values().begin());
    }
}

template <typename T>
void adam_step(ParamStore<T>& store, const AdamConfig& config) {
    for (const auto& [name, p] : store) {
        if (!p.has_grad()) throw StateError("adam_step: parameter '" + name + "' has no gradient");
    }
    for (const auto& [name, p] : store) {
        auto& m = store.moments(name);
        ++m.step;
        const T b1 = T(config.beta1), b2 = T(config.beta2);
        const T correction1 = T(1) - T(std::pow(config.beta1, static_cast<double>(m.step)));
        const T correction2 = T(1) - T(std::pow(config.beta2, static_cast<double>(m.step)));
        const T lr = T(config.lr), wd = T(config.weight_decay), eps = T(config.eps);
        Tensor<T> handle = p;
        auto theta = handle.mutable_values();
        auto grad = p.grad();
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const T g = grad[i] + wd * theta[i];
            m.first[i] = b1 * m.first[i] + (T(1) - b1) * g;
            m.second[i] = b2 * m.second[i] + (T(1) - b2) * g * g;
            const T m_hat = m.first[i] / correction1;
            const T v_hat = m.second[i] / correction2;
            theta[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

template <typename T>
GradCheckResult finite_diff_check(const std::function<Tensor<T>(ParamStore<T>&)>& f, ParamStore<T>& store,
                                  double h, double floor) {
    if (!(h > 0.0)) throw ConfigError("finite_diff_check: step must be positive");
    store.zero_grad();
    {
        Tensor<T> loss = f(store);
        if (!std::isfinite(static_cast<double>(loss.item()))) throw NumericError("finite_diff_check: f is not finite");
        loss.backward();
    }
    GradCheckResult result;
    NoGradGuard no_grad;
    for (const auto& [name, p] : store) {
        Tensor<T> handle = p;
        auto theta = handle.mutable_values();
        std::vector<T> analytic(theta.size(), T(0));
        if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), analytic.begin());
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const T original = theta[i];
            theta[i] = original + T(h);
            const double plus = static_cast<double>(f(store).item());
            theta[i] = original - T(h);
            const double minus = static_cast<double>(f(store).item());
            theta[i] = original;
            if (!std::isfinite(plus) || !std::isfinite(minus)) {
                throw NumericError("finite_diff_check: f is not finite near '" + name + "'[" + std::to_string(i) + "]");
            }
            const double numeric = (plus - minus) / (2.0 * h);
            const double a = static_cast<double>(analytic[i]);
            const double denom = std::max({std::abs(a), std::abs(numeric), floor});
            const double err = std::abs(a - numeric) / denom;
            ++result.coordinates;
            if (result.worst_parameter.empty() || err > result.max_relative_error) {
                result.max_relative_error = err;
                result.worst_parameter = name;
                result.worst_index = i;
                result.analytic = a;
                result.numeric = numeric;
            }
        }
    }
    store.zero_grad();
    return result;
}

#define RETMIL_INSTANTIATE_PARAMS(T)                                                                          \
    template class ParamStore<T>;                                                                             \
    template void adam_step<T>(ParamStore<T>&, const AdamConfig&);                                            \
    template GradCheckResult finite_diff_check<T>(const std::function<Tensor<T>(ParamStore<T>&)>&, ParamStore<T>&, \
                                                  double, double);

RETMIL_INSTANTIATE_PARAMS(float)
RETMIL_INSTANTIATE_PARAMS(double)

}  // namespace retmil
