#include "retmil/retention.hpp"

#include <cmath>
#include <string>

#include "retmil/error.hpp"
#include "retmil/ops.hpp"

namespace retmil {

double RetentionConfig::gamma(std::size_t head) const {
    return gammas.empty() ? 1.0 - std::pow(2.0, -5.0 - static_cast<double>(head)) : gammas.at(head);
}

std::vector<double> default_gammas(std::size_t heads) {
    std::vector<double> out(heads);
    for (std::size_t h = 0; h < heads; ++h) out[h] = 1.0 - std::pow(2.0, -5.0 - static_cast<double>(h));
    return out;
}

void RetentionConfig::validate() const {
    if (d == 0 || heads == 0 || d % heads != 0) {
        throw ConfigError("retention: d=" + std::to_string(d) + " must be a positive multiple of heads=" +
                          std::to_string(heads));
    }
    if (head_dim() % 2 != 0) throw ConfigError("retention: rotary encoding needs an even head width");
    if (!gammas.empty() && gammas.size() != heads) throw ConfigError("retention: need one gamma per head");
    for (std::size_t h = 0; h < heads; ++h) {
        const double g = gamma(h);
        const bool ok = allow_zero_gamma ? (g >= 0.0 && g < 1.0) : (g > 0.0 && g < 1.0);
        if (!ok) throw ConfigError("retention: gamma " + std::to_string(g) + " outside (0, 1)");
    }
    if (!(rope_base > 1.0)) throw ConfigError("retention: rope_base must exceed 1");
    if (!(norm_eps > 0.0)) throw ConfigError("retention: norm_eps must be positive");
}

template <typename T>
Tensor<T> xavier_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Buffer<T> values(rows * cols);
    for (auto& v : values) v = static_cast<T>(dist(rng));
    return Tensor<T>::from({rows, cols}, std::move(values));
}

template <typename T>
MSRLayer<T> MSRLayer<T>::create(const RetentionConfig& config, ParamStore<T>& store, const std::string& prefix,
                                std::mt19937_64& rng) {
    config.validate();
    MSRLayer layer;
    layer.config = config;
    const std::size_t d = config.d;
    layer.w_q = store.add(prefix + ".w_q", xavier_uniform<T>(d, d, rng));
    layer.w_k = store.add(prefix + ".w_k", xavier_uniform<T>(d, d, rng));
    layer.w_v = store.add(prefix + ".w_v", xavier_uniform<T>(d, d, rng));
    layer.w_g = store.add(prefix + ".w_g", xavier_uniform<T>(d, d, rng));
    layer.w_o = store.add(prefix + ".w_o", xavier_uniform<T>(d, d, rng));
    layer.norm_gain = store.add(prefix + ".norm_gain", Tensor<T>::full({d}, T(1)));
    layer.norm_bias = store.add(prefix + ".norm_bias", Tensor<T>::zeros({d}));
    return layer;
}

template <typename T>
Tensor<T> decay_matrix(double gamma, std::size_t n, bool allow_zero) {
    const bool ok = allow_zero ? (gamma >= 0.0 && gamma < 1.0) : (gamma > 0.0 && gamma < 1.0);
    if (!ok) throw ConfigError("decay_matrix: gamma " + std::to_string(gamma) + " outside (0, 1)");
    if (n < 1) throw DimensionError("decay_matrix: length must be at least 1");
    std::vector<T> powers(n);
    for (std::size_t k = 0; k < n; ++k) powers[k] = static_cast<T>(std::pow(gamma, static_cast<double>(k)));
    Buffer<T> values(n * n, T(0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
#ifdef RETMIL_FAULT_TRANSPOSED_DECAY
            values[j * n + i] = powers[i - j];
#else
            values[i * n + j] = powers[i - j];
#endif
        }
    }
    return Tensor<T>::from({n, n}, std::move(values));
}

std::vector<double> sequence_positions(std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(i);
    return out;
}

template <typename T>
Tensor<T> rope_apply(const Tensor<T>& x, std::span<const double> positions, double base) {
    if (x.rank() != 2) throw DimensionError("rope_apply: expected n×d_head, got " + shape_str(x.shape()));
    const std::size_t n = x.dim(0), width = x.dim(1);
    if (width % 2 != 0) throw ConfigError("rope_apply: head width " + std::to_string(width) + " is odd");
    if (positions.size() != n) throw DimensionError("rope_apply: need one position per row");
    const std::size_t pairs = width / 2;
    auto cosines = std::make_shared<std::vector<T>>(n * pairs);
    auto sines = std::make_shared<std::vector<T>>(n * pairs);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < pairs; ++j) {
            const double theta = std::pow(base, -2.0 * static_cast<double>(j) / static_cast<double>(width));
            const double angle = positions[i] * theta;
            (*cosines)[i * pairs + j] = static_cast<T>(std::cos(angle));
            (*sines)[i * pairs + j] = static_cast<T>(std::sin(angle));
        }
    }
    auto xv = x.values();
    Buffer<T> out(n * width);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < pairs; ++j) {
            const T c = (*cosines)[i * pairs + j], s = (*sines)[i * pairs + j];
            const T a = xv[i * width + 2 * j], b = xv[i * width + 2 * j + 1];
            out[i * width + 2 * j] = a * c - b * s;
            out[i * width + 2 * j + 1] = a * s + b * c;
        }
    }
    return detail::make_result<T>("rope_apply", x.shape(), std::move(out), {x},
                                  [n, width, pairs, cosines, sines](detail::Node<T>& o) {
                                      auto g = o.inputs[0]->grad_buffer();
                                      for (std::size_t i = 0; i < n; ++i) {
                                          for (std::size_t j = 0; j < pairs; ++j) {
                                              const T c = (*cosines)[i * pairs + j], s = (*sines)[i * pairs + j];
                                              const T ga = o.grad[i * width + 2 * j];
                                              const T gb = o.grad[i * width + 2 * j + 1];
                                              g[i * width + 2 * j] += ga * c + gb * s;
                                              g[i * width + 2 * j + 1] += -ga * s + gb * c;
                                          }
                                      }
                                  });
}

namespace {

template <typename T>
void require_width(const Tensor<T>& x, const RetentionConfig& config, const char* op) {
    if (x.rank() != 2 || x.dim(1) != config.d) {
        throw ConfigError(std::string(op) + ": input " + shape_str(x.shape()) + " does not match layer width " +
                          std::to_string(config.d));
    }
    if (x.dim(0) < 1) throw InputError(std::string(op) + ": empty sequence");
}

}  // namespace

template <typename T>
HeadProjection<T> project_head(const MSRLayer<T>& layer, std::size_t head, const Tensor<T>& x) {
    const auto& cfg = layer.config;
    require_width(x, cfg, "retention");
    if (head >= cfg.heads) throw ConfigError("retention: head " + std::to_string(head) + " out of range");
    const std::size_t dh = cfg.head_dim();
    const std::size_t lo = head * dh, hi = lo + dh;
    const auto positions = sequence_positions(x.dim(0));
    Tensor<T> q = matmul(x, slice_cols(layer.w_q, lo, hi));
    Tensor<T> k = matmul(x, slice_cols(layer.w_k, lo, hi));
    if (cfg.scale_keys) k = scale(k, static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh))));
    Tensor<T> v = matmul(x, slice_cols(layer.w_v, lo, hi));
    return {rope_apply(q, positions, cfg.rope_base), rope_apply(k, positions, cfg.rope_base), v};
}

template <typename T>
Tensor<T> retention_parallel(const MSRLayer<T>& layer, std::size_t head, const Tensor<T>& x) {
    auto proj = project_head(layer, head, x);
    const Tensor<T> decay = decay_matrix<T>(layer.config.gamma(head), x.dim(0), layer.config.allow_zero_gamma);
    return matmul(mul(matmul_nt(proj.query, proj.key), decay), proj.value);
}

template <typename T>
Tensor<T> retention_recurrent(const MSRLayer<T>& layer, std::size_t head, const Tensor<T>& x) {
    NoGradGuard no_grad;
    auto proj = project_head(layer, head, x);
    const std::size_t n = x.dim(0), dh = layer.config.head_dim();
    const T gamma = static_cast<T>(layer.config.gamma(head));
    auto q = proj.query.values();
    auto k = proj.key.values();
    auto v = proj.value.values();
    Buffer<T> state(dh * dh, T(0));
    Buffer<T> out(n * dh, T(0));
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t a = 0; a < dh; ++a) {
            const T ka = k[t * dh + a];
            for (std::size_t b = 0; b < dh; ++b) state[a * dh + b] = gamma * state[a * dh + b] + ka * v[t * dh + b];
        }
        for (std::size_t a = 0; a < dh; ++a) {
            const T qa = q[t * dh + a];
            for (std::size_t b = 0; b < dh; ++b) out[t * dh + b] += qa * state[a * dh + b];
        }
    }
    return detail::make_result<T>("retention_recurrent", {n, dh}, std::move(out), {}, {});
}

template <typename T>
Tensor<T> msr_forward_sequence(const Tensor<T>& x, const MSRLayer<T>& layer) {
    const auto& cfg = layer.config;
    require_width(x, cfg, "msr_forward");
    std::vector<Tensor<T>> heads;
    heads.reserve(cfg.heads);
    for (std::size_t h = 0; h < cfg.heads; ++h) heads.push_back(retention_parallel(layer, h, x));
    Tensor<T> normed = group_norm(concat_cols(heads), cfg.heads, static_cast<T>(cfg.norm_eps), layer.norm_gain,
                                  layer.norm_bias);
    heads.clear();
    Tensor<T> gate = swish(matmul(x, layer.w_g));
    Tensor<T> out = matmul(mul(gate, normed), layer.w_o);
    if (cfg.residual) out = add(out, x);
    return out;
}

template <typename T>
Tensor<T> msr_forward(const Tensor<T>& batch, const MSRLayer<T>& layer) {
    if (batch.rank() != 3 || batch.dim(2) != layer.config.d) {
        throw ConfigError("msr_forward: batch " + shape_str(batch.shape()) + " does not match layer width " +
                          std::to_string(layer.config.d));
    }
    std::vector<Tensor<T>> rows;
    rows.reserve(batch.dim(0));
    for (std::size_t b = 0; b < batch.dim(0); ++b) rows.push_back(msr_forward_sequence(select(batch, b), layer));
    return stack(rows);
}

#define RETMIL_INSTANTIATE_RETENTION(T)                                                                      \
    template struct MSRLayer<T>;                                                                             \
    template Tensor<T> xavier_uniform<T>(std::size_t, std::size_t, std::mt19937_64&);                        \
    template Tensor<T> decay_matrix<T>(double, std::size_t, bool);                                           \
    template Tensor<T> rope_apply<T>(const Tensor<T>&, std::span<const double>, double);                     \
    template HeadProjection<T> project_head<T>(const MSRLayer<T>&, std::size_t, const Tensor<T>&);           \
    template Tensor<T> retention_parallel<T>(const MSRLayer<T>&, std::size_t, const Tensor<T>&);             \
    template Tensor<T> retention_recurrent<T>(const MSRLayer<T>&, std::size_t, const Tensor<T>&);            \
    template Tensor<T> msr_forward_sequence<T>(const Tensor<T>&, const MSRLayer<T>&);                        \
    template Tensor<T> msr_forward<T>(const Tensor<T>&, const MSRLayer<T>&);

RETMIL_INSTANTIATE_RETENTION(float)
RETMIL_INSTANTIATE_RETENTION(double)

}  // namespace retmil
