#include "retmil/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "retmil/error.hpp"

namespace retmil {

namespace kernels {

template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        T* crow = c + i * n;
        const T* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const T aip = arow[p];
            const T* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t p = 0; p < k; ++p) {
        const T* arow = a + p * m;
        const T* brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const T api = arow[i];
            T* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
        }
    }
}

template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    Buffer<T> bt(k * n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
    }
    gemm_nn(a, bt.data(), c, m, k, n);
}

}  // namespace kernels

namespace {

template <typename T>
using NodeT = detail::Node<T>;

template <typename T>
bool wants_grad(const NodeT<T>& out, std::size_t input) {
    return out.inputs[input]->requires_grad;
}

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* op) {
    if (!t.defined()) throw DimensionError(std::string(op) + ": undefined tensor");
    if (t.rank() != rank) {
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                             shape_str(t.shape()));
    }
}

enum class Broadcast { same, scalar_a, scalar_b };

template <typename T>
Broadcast classify(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() == b.shape()) return Broadcast::same;
    if (b.numel() == 1) return Broadcast::scalar_b;
    if (a.numel() == 1) return Broadcast::scalar_a;
    throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
}

// Shared driver for add/sub/mul: `f` computes the value, `da`/`db` the local
// partial derivatives given (x, y).
template <typename T, typename F, typename DA, typename DB>
Tensor<T> binary(const char* op, const Tensor<T>& a, const Tensor<T>& b, F f, DA da, DB db) {
    const Broadcast mode = classify(a, b, op);
    const Shape shape = mode == Broadcast::scalar_a ? b.shape() : a.shape();
    const std::size_t n = shape_numel(shape);
    auto av = a.values();
    auto bv = b.values();
    auto x_at = [=](std::size_t i) { return mode == Broadcast::scalar_a ? av[0] : av[i]; };
    auto y_at = [=](std::size_t i) { return mode == Broadcast::scalar_b ? bv[0] : bv[i]; };
    Buffer<T> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = f(x_at(i), y_at(i));
    return detail::make_result<T>(op, shape, std::move(out), {a, b}, [mode, n, da, db](NodeT<T>& o) {
        auto& an = *o.inputs[0];
        auto& bn = *o.inputs[1];
        auto x_at = [&](std::size_t i) { return mode == Broadcast::scalar_a ? an.value[0] : an.value[i]; };
        auto y_at = [&](std::size_t i) { return mode == Broadcast::scalar_b ? bn.value[0] : bn.value[i]; };
        if (an.requires_grad) {
            auto g = an.grad_buffer();
            for (std::size_t i = 0; i < n; ++i) {
                g[mode == Broadcast::scalar_a ? 0 : i] += o.grad[i] * da(x_at(i), y_at(i));
            }
        }
        if (bn.requires_grad) {
            auto g = bn.grad_buffer();
            for (std::size_t i = 0; i < n; ++i) {
                g[mode == Broadcast::scalar_b ? 0 : i] += o.grad[i] * db(x_at(i), y_at(i));
            }
        }
    });
}

// Unary elementwise op whose derivative is expressed through input x and output y.
template <typename T, typename F, typename D>
Tensor<T> unary(const char* op, const Tensor<T>& a, F f, D d) {
    auto av = a.values();
    Buffer<T> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
    return detail::make_result<T>(op, a.shape(), std::move(out), {a}, [d](NodeT<T>& o) {
        auto& an = *o.inputs[0];
        auto g = an.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * d(an.value[i], o.value[i]);
    });
}

template <typename T>
T stable_sigmoid(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return binary<T>(
        "add", a, b, [](T x, T y) { return x + y; }, [](T, T) { return T(1); }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return binary<T>(
        "sub", a, b, [](T x, T y) { return x - y; }, [](T, T) { return T(1); }, [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return binary<T>(
        "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; }, [](T x, T) { return x; });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
    return unary<T>(
        "scale", a, [factor](T x) { return x * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
    return unary<T>(
        "tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    return unary<T>(
        "sigmoid", x, [](T v) { return stable_sigmoid(v); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> swish(const Tensor<T>& x) {
    return unary<T>(
        "swish", x, [](T v) { return v * stable_sigmoid(v); },
        [](T v, T) {
            const T s = stable_sigmoid(v);
            return s + v * s * (T(1) - s);
        });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
    return unary<T>(
        "exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " · " +
                             shape_str(b.shape()));
    }
    Buffer<T> out(m * n, T(0));
    kernels::gemm_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
    return detail::make_result<T>("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](NodeT<T>& o) {
        auto& an = *o.inputs[0];
        auto& bn = *o.inputs[1];
        if (an.requires_grad) kernels::gemm_nt(o.grad.data(), bn.value.data(), an.grad_buffer().data(), m, n, k);
        if (bn.requires_grad) kernels::gemm_tn(an.value.data(), o.grad.data(), bn.grad_buffer().data(), k, m, n);
    });
}

template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
    require_rank(a, 2, "matmul_nt");
    require_rank(b, 2, "matmul_nt");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    if (b.dim(1) != k) {
        throw DimensionError("matmul_nt: inner dimensions disagree, " + shape_str(a.shape()) + " · " +
                             shape_str(b.shape()) + "ᵀ");
    }
    Buffer<T> out(m * n, T(0));
    kernels::gemm_nt(a.values().data(), b.values().data(), out.data(), m, k, n);
    return detail::make_result<T>("matmul_nt", {m, n}, std::move(out), {a, b}, [m, k, n](NodeT<T>& o) {
        auto& an = *o.inputs[0];
        auto& bn = *o.inputs[1];
        if (an.requires_grad) kernels::gemm_nn(o.grad.data(), bn.value.data(), an.grad_buffer().data(), m, n, k);
        if (bn.requires_grad) kernels::gemm_tn(o.grad.data(), an.value.data(), bn.grad_buffer().data(), n, m, k);
    });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
    require_rank(a, 2, "transpose");
    const std::size_t r = a.dim(0), c = a.dim(1);
    auto av = a.values();
    Buffer<T> out(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
    return detail::make_result<T>("transpose", {c, r}, std::move(out), {a}, [r, c](NodeT<T>& o) {
        auto g = o.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) g[i * c + j] += o.grad[j * r + i];
    });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, const Shape& shape) {
    if (shape_numel(shape) != a.numel()) {
        throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    }
    auto av = a.values();
    return detail::make_result<T>("reshape", shape, Buffer<T>(av.begin(), av.end()), {a}, [](NodeT<T>& o) {
        auto g = o.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    });
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& a, std::size_t begin, std::size_t end) {
    require_rank(a, 2, "slice_cols");
    const std::size_t rows = a.dim(0), cols = a.dim(1);
    if (begin >= end || end > cols) {
        throw DimensionError("slice_cols: invalid range [" + std::to_string(begin) + ", " + std::to_string(end) +
                             ") for " + shape_str(a.shape()));
    }
    const std::size_t width = end - begin;
    auto av = a.values();
    Buffer<T> out(rows * width);
    for (std::size_t i = 0; i < rows; ++i)
        std::copy_n(av.data() + i * cols + begin, width, out.data() + i * width);
    return detail::make_result<T>("slice_cols", {rows, width}, std::move(out), {a},
                                  [rows, cols, begin, width](NodeT<T>& o) {
                                      auto g = o.inputs[0]->grad_buffer();
                                      for (std::size_t i = 0; i < rows; ++i)
                                          for (std::size_t j = 0; j < width; ++j)
                                              g[i * cols + begin + j] += o.grad[i * width + j];
                                  });
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no inputs");
    const std::size_t rows = parts.front().dim(0);
    std::vector<std::size_t> offsets;
    std::size_t cols = 0;
    for (const auto& p : parts) {
        require_rank(p, 2, "concat_cols");
        if (p.dim(0) != rows) throw DimensionError("concat_cols: row counts disagree");
        offsets.push_back(cols);
        cols += p.dim(1);
    }
    Buffer<T> out(rows * cols);
    for (std::size_t q = 0; q < parts.size(); ++q) {
        const std::size_t w = parts[q].dim(1);
        auto pv = parts[q].values();
        for (std::size_t i = 0; i < rows; ++i) std::copy_n(pv.data() + i * w, w, out.data() + i * cols + offsets[q]);
    }
    return detail::make_result<T>("concat_cols", {rows, cols}, std::move(out), parts,
                                  [rows, cols, offsets](NodeT<T>& o) {
                                      for (std::size_t q = 0; q < o.inputs.size(); ++q) {
                                          auto& in = *o.inputs[q];
                                          if (!in.requires_grad) continue;
                                          const std::size_t w = in.shape[1];
                                          auto g = in.grad_buffer();
                                          for (std::size_t i = 0; i < rows; ++i)
                                              for (std::size_t j = 0; j < w; ++j)
                                                  g[i * w + j] += o.grad[i * cols + offsets[q] + j];
                                      }
                                  });
}

template <typename T>
Tensor<T> select(const Tensor<T>& a, std::size_t index) {
    if (a.rank() < 2) throw DimensionError("select: needs rank 2 or 3, got " + shape_str(a.shape()));
    if (index >= a.dim(0)) {
        throw DimensionError("select: index " + std::to_string(index) + " out of range for " + shape_str(a.shape()));
    }
    Shape inner(a.shape().begin() + 1, a.shape().end());
    const std::size_t stride = shape_numel(inner);
    auto av = a.values();
    Buffer<T> out(av.begin() + index * stride, av.begin() + (index + 1) * stride);
    return detail::make_result<T>("select", inner, std::move(out), {a}, [index, stride](NodeT<T>& o) {
        auto g = o.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < stride; ++i) g[index * stride + i] += o.grad[i];
    });
}

template <typename T>
Tensor<T> stack(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw DimensionError("stack: no inputs");
    const Shape inner = parts.front().shape();
    if (inner.size() >= 3) throw DimensionError("stack: result would exceed rank 3");
    for (const auto& p : parts) {
        if (p.shape() != inner) throw DimensionError("stack: shapes disagree");
    }
    const std::size_t stride = shape_numel(inner);
    Buffer<T> out(parts.size() * stride);
    for (std::size_t q = 0; q < parts.size(); ++q) {
        auto pv = parts[q].values();
        std::copy(pv.begin(), pv.end(), out.begin() + q * stride);
    }
    Shape shape{parts.size()};
    shape.insert(shape.end(), inner.begin(), inner.end());
    return detail::make_result<T>("stack", shape, std::move(out), parts, [stride](NodeT<T>& o) {
        for (std::size_t q = 0; q < o.inputs.size(); ++q) {
            auto& in = *o.inputs[q];
            if (!in.requires_grad) continue;
            auto g = in.grad_buffer();
            for (std::size_t i = 0; i < stride; ++i) g[i] += o.grad[q * stride + i];
        }
    });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
    T total = 0;
    for (T v : a.values()) total += v;
    return detail::make_result<T>("sum", {1}, Buffer<T>(1, total), {a}, [](NodeT<T>& o) {
        auto g = o.inputs[0]->grad_buffer();
        const T seed = o.grad[0];
        for (auto& gi : g) gi += seed;
    });
}

namespace {

template <typename T>
void softmax_span(std::span<const T> x, std::span<T> y) {
    const T peak = *std::max_element(x.begin(), x.end());
    T total = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = std::exp(x[i] - peak);
        total += y[i];
    }
    for (auto& v : y) v /= total;
}

template <typename T>
void softmax_backward_span(std::span<const T> y, std::span<const T> dy, std::span<T> dx) {
    T dot = 0;
    for (std::size_t i = 0; i < y.size(); ++i) dot += dy[i] * y[i];
    for (std::size_t i = 0; i < y.size(); ++i) dx[i] += y[i] * (dy[i] - dot);
}

}  // namespace

template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
    require_rank(x, 1, "softmax");
    if (x.numel() == 0) throw DimensionError("softmax: empty input");
    Buffer<T> out(x.numel());
    softmax_span<T>(x.values(), out);
    return detail::make_result<T>("softmax", x.shape(), std::move(out), {x}, [](NodeT<T>& o) {
        softmax_backward_span<T>(o.value, o.grad, o.inputs[0]->grad_buffer());
    });
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
    require_rank(x, 2, "softmax_rows");
    const std::size_t rows = x.dim(0), cols = x.dim(1);
    if (cols == 0) throw DimensionError("softmax_rows: empty rows");
    Buffer<T> out(rows * cols);
    auto xv = x.values();
    for (std::size_t i = 0; i < rows; ++i) {
        softmax_span<T>(xv.subspan(i * cols, cols), std::span<T>(out).subspan(i * cols, cols));
    }
    return detail::make_result<T>("softmax_rows", x.shape(), std::move(out), {x}, [rows, cols](NodeT<T>& o) {
        auto g = o.inputs[0]->grad_buffer();
        std::span<const T> y(o.value), dy(o.grad);
        for (std::size_t i = 0; i < rows; ++i) {
            softmax_backward_span<T>(y.subspan(i * cols, cols), dy.subspan(i * cols, cols), g.subspan(i * cols, cols));
        }
    });
}

template <typename T>
Tensor<T> group_norm(const Tensor<T>& x, std::size_t groups, T eps, const Tensor<T>& gain, const Tensor<T>& bias) {
    require_rank(x, 2, "group_norm");
    const std::size_t rows = x.dim(0), d = x.dim(1);
    if (groups == 0 || d % groups != 0) {
        throw ConfigError("group_norm: width " + std::to_string(d) + " is not divisible into " +
                          std::to_string(groups) + " groups");
    }
    if (!(eps > T(0))) throw ConfigError("group_norm: eps must be positive");
    if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
        throw DimensionError("group_norm: affine parameters must have shape [" + std::to_string(d) + "]");
    }
    const std::size_t width = d / groups;
    auto xv = x.values();
    auto gv = gain.values();
    auto bv = bias.values();
    auto normed = std::make_shared<Buffer<T>>(rows * d);
    auto inv_std = std::make_shared<Buffer<T>>(rows * groups);
    Buffer<T> out(rows * d);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t g = 0; g < groups; ++g) {
            const std::size_t base = i * d + g * width;
            T mean = 0;
            for (std::size_t j = 0; j < width; ++j) mean += xv[base + j];
            mean /= T(width);
            T var = 0;
            for (std::size_t j = 0; j < width; ++j) {
                const T c = xv[base + j] - mean;
                var += c * c;
            }
            var /= T(width);
            const T inv = T(1) / std::sqrt(var + eps);
            (*inv_std)[i * groups + g] = inv;
            for (std::size_t j = 0; j < width; ++j) {
                const std::size_t col = g * width + j;
                const T xhat = (xv[base + j] - mean) * inv;
                (*normed)[base + j] = xhat;
                out[base + j] = gv[col] * xhat + bv[col];
            }
        }
    }
    return detail::make_result<T>(
        "group_norm", x.shape(), std::move(out), {x, gain, bias},
        [rows, d, groups, width, normed, inv_std](NodeT<T>& o) {
            auto& xn = *o.inputs[0];
            auto& gn = *o.inputs[1];
            auto& bn = *o.inputs[2];
            if (gn.requires_grad) {
                auto g = gn.grad_buffer();
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t c = 0; c < d; ++c) g[c] += o.grad[i * d + c] * (*normed)[i * d + c];
            }
            if (bn.requires_grad) {
                auto g = bn.grad_buffer();
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t c = 0; c < d; ++c) g[c] += o.grad[i * d + c];
            }
            if (xn.requires_grad) {
                auto g = xn.grad_buffer();
                for (std::size_t i = 0; i < rows; ++i) {
                    for (std::size_t grp = 0; grp < groups; ++grp) {
                        const std::size_t base = i * d + grp * width;
                        T mean_dxhat = 0, mean_dxhat_xhat = 0;
                        for (std::size_t j = 0; j < width; ++j) {
                            const T dxhat = o.grad[base + j] * gn.value[grp * width + j];
                            mean_dxhat += dxhat;
                            mean_dxhat_xhat += dxhat * (*normed)[base + j];
                        }
                        mean_dxhat /= T(width);
                        mean_dxhat_xhat /= T(width);
                        const T inv = (*inv_std)[i * groups + grp];
                        for (std::size_t j = 0; j < width; ++j) {
                            const T dxhat = o.grad[base + j] * gn.value[grp * width + j];
                            g[base + j] += inv * (dxhat - mean_dxhat - (*normed)[base + j] * mean_dxhat_xhat);
                        }
                    }
                }
            }
        });
}

template <typename T>
Tensor<T> cross_entropy_logits(const Tensor<T>& logits, std::size_t label) {
    require_rank(logits, 1, "cross_entropy_logits");
    const std::size_t classes = logits.numel();
    if (label >= classes) {
        throw InputError("cross_entropy_logits: label " + std::to_string(label) + " out of range for " +
                         std::to_string(classes) + " classes");
    }
    auto lv = logits.values();
    const std::size_t top = static_cast<std::size_t>(std::max_element(lv.begin(), lv.end()) - lv.begin());
    T rest = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        if (c != top) rest += std::exp(lv[c] - lv[top]);
    }
    // log Σ exp(x - max) = log1p(Σ_{c≠top} exp(x_c - max)); keeps tiny losses accurate.
    const T loss = (lv[top] - lv[label]) + std::log1p(rest);
    return detail::make_result<T>("cross_entropy_logits", {1}, Buffer<T>(1, loss), {logits},
                                  [label, classes](NodeT<T>& o) {
                                      auto& in = *o.inputs[0];
                                      Buffer<T> p(classes);
                                      softmax_span<T>(in.value, p);
                                      auto g = in.grad_buffer();
                                      for (std::size_t c = 0; c < classes; ++c) {
                                          g[c] += o.grad[0] * (p[c] - (c == label ? T(1) : T(0)));
                                      }
                                  });
}

#define RETMIL_INSTANTIATE_OPS(T)                                                                        \
    template void kernels::gemm_nn<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t);    \
    template void kernels::gemm_tn<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t);    \
    template void kernels::gemm_nt<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t);    \
    template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                                       \
    template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                                       \
    template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                                       \
    template Tensor<T> scale<T>(const Tensor<T>&, T);                                                    \
    template Tensor<T> tanh<T>(const Tensor<T>&);                                                        \
    template Tensor<T> sigmoid<T>(const Tensor<T>&);                                                     \
    template Tensor<T> swish<T>(const Tensor<T>&);                                                       \
    template Tensor<T> exp<T>(const Tensor<T>&);                                                         \
    template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                                    \
    template Tensor<T> matmul_nt<T>(const Tensor<T>&, const Tensor<T>&);                                 \
    template Tensor<T> transpose<T>(const Tensor<T>&);                                                   \
    template Tensor<T> reshape<T>(const Tensor<T>&, const Shape&);                                       \
    template Tensor<T> slice_cols<T>(const Tensor<T>&, std::size_t, std::size_t);                        \
    template Tensor<T> concat_cols<T>(const std::vector<Tensor<T>>&);                                    \
    template Tensor<T> select<T>(const Tensor<T>&, std::size_t);                                         \
    template Tensor<T> stack<T>(const std::vector<Tensor<T>>&);                                          \
    template Tensor<T> sum<T>(const Tensor<T>&);                                                         \
    template Tensor<T> softmax<T>(const Tensor<T>&);                                                     \
    template Tensor<T> softmax_rows<T>(const Tensor<T>&);                                                \
    template Tensor<T> group_norm<T>(const Tensor<T>&, std::size_t, T, const Tensor<T>&, const Tensor<T>&); \
    template Tensor<T> cross_entropy_logits<T>(const Tensor<T>&, std::size_t);

RETMIL_INSTANTIATE_OPS(float)
RETMIL_INSTANTIATE_OPS(double)

}  // namespace retmil
