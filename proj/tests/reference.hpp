#pragma once

// Plain-loop re-implementations of the layers, used as oracles. Nothing here
// touches the tensor engine beyond reading parameter values.

#include <cmath>
#include <cstddef>
#include <vector>

#include "retmil/model.hpp"

namespace retmil::reference {

using Mat = std::vector<std::vector<double>>;

template <typename T>
Mat to_mat(const Tensor<T>& t) {
    Mat m(t.dim(0), std::vector<double>(t.dim(1)));
    for (std::size_t i = 0; i < t.dim(0); ++i) {
        for (std::size_t j = 0; j < t.dim(1); ++j) m[i][j] = static_cast<double>(t.at(i, j));
    }
    return m;
}

inline Mat matmul(const Mat& a, const Mat& b) {
    Mat c(a.size(), std::vector<double>(b[0].size(), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b[0].size(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < b.size(); ++k) s += a[i][k] * b[k][j];
            c[i][j] = s;
        }
    }
    return c;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline std::vector<double> softmax(const std::vector<double>& z) {
    double mx = z[0];
    for (double v : z) mx = std::max(mx, v);
    std::vector<double> p(z.size());
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) total += p[i] = std::exp(z[i] - mx);
    for (auto& v : p) v /= total;
    return p;
}

inline Mat columns(const Mat& m, std::size_t begin, std::size_t end) {
    Mat out(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) out[i].assign(m[i].begin() + begin, m[i].begin() + end);
    return out;
}

inline void rotate(Mat& x, double base) {
    const std::size_t w = x[0].size();
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = 0; j < w / 2; ++j) {
            const double angle = static_cast<double>(i) * std::pow(base, -2.0 * j / w);
            const double a = x[i][2 * j], b = x[i][2 * j + 1];
            x[i][2 * j] = a * std::cos(angle) - b * std::sin(angle);
            x[i][2 * j + 1] = a * std::sin(angle) + b * std::cos(angle);
        }
    }
}

// out_n = Σ_{m<=n} γ^(n-m) (q̃_n·k̃_m) v_m
template <typename T>
Mat retention_head(const MSRLayer<T>& layer, std::size_t h, const Mat& x) {
    const auto& cfg = layer.config;
    const std::size_t dh = cfg.head_dim();
    Mat q = columns(matmul(x, to_mat(layer.w_q)), h * dh, (h + 1) * dh);
    Mat k = columns(matmul(x, to_mat(layer.w_k)), h * dh, (h + 1) * dh);
    const Mat v = columns(matmul(x, to_mat(layer.w_v)), h * dh, (h + 1) * dh);
    if (cfg.scale_keys) {
        for (auto& row : k) {
            for (auto& e : row) e /= std::sqrt(static_cast<double>(dh));
        }
    }
    rotate(q, cfg.rope_base);
    rotate(k, cfg.rope_base);
    const double gamma = cfg.gamma(h);
    Mat out(x.size(), std::vector<double>(dh, 0.0));
    for (std::size_t n = 0; n < x.size(); ++n) {
        for (std::size_t m = 0; m <= n; ++m) {
            const double w = std::pow(gamma, static_cast<double>(n - m)) * dot(q[n], k[m]);
            for (std::size_t j = 0; j < dh; ++j) out[n][j] += w * v[m][j];
        }
    }
    return out;
}

template <typename T>
Mat msr(const MSRLayer<T>& layer, const Mat& x) {
    const auto& cfg = layer.config;
    const std::size_t dh = cfg.head_dim();
    Mat cat(x.size(), std::vector<double>(cfg.d));
    for (std::size_t h = 0; h < cfg.heads; ++h) {
        const Mat o = retention_head(layer, h, x);
        for (std::size_t i = 0; i < x.size(); ++i) {
            for (std::size_t j = 0; j < dh; ++j) cat[i][h * dh + j] = o[i][j];
        }
    }
    for (auto& row : cat) {
        for (std::size_t h = 0; h < cfg.heads; ++h) {
            double mean = 0.0, var = 0.0;
            for (std::size_t j = 0; j < dh; ++j) mean += row[h * dh + j];
            mean /= dh;
            for (std::size_t j = 0; j < dh; ++j) var += (row[h * dh + j] - mean) * (row[h * dh + j] - mean);
            var /= dh;
            for (std::size_t j = 0; j < dh; ++j) {
                const std::size_t c = h * dh + j;
                row[c] = (row[c] - mean) / std::sqrt(var + cfg.norm_eps) * layer.norm_gain.at(c) + layer.norm_bias.at(c);
            }
        }
    }
    Mat gate = matmul(x, to_mat(layer.w_g));
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = 0; j < cfg.d; ++j) gate[i][j] = gate[i][j] * sigm(gate[i][j]) * cat[i][j];
    }
    Mat out = matmul(gate, to_mat(layer.w_o));
    if (cfg.residual) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            for (std::size_t j = 0; j < cfg.d; ++j) out[i][j] += x[i][j];
        }
    }
    return out;
}

// score_k = Σ_m Γ_m tanh(W_m·f_k) sigm(U_m·f_k), weights = softmax(score)
template <typename T>
std::vector<double> pool_weights(const GatedPoolParams<T>& p, const Mat& f) {
    const Mat w = to_mat(p.w), u = to_mat(p.u), g = to_mat(p.gamma);
    std::vector<double> score(f.size(), 0.0);
    for (std::size_t k = 0; k < f.size(); ++k) {
        for (std::size_t m = 0; m < w.size(); ++m) score[k] += g[0][m] * std::tanh(dot(w[m], f[k])) * sigm(dot(u[m], f[k]));
    }
    return softmax(score);
}

inline std::vector<double> weighted_sum(const std::vector<double>& weights, const Mat& f) {
    std::vector<double> out(f[0].size(), 0.0);
    for (std::size_t k = 0; k < f.size(); ++k) {
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += weights[k] * f[k][j];
    }
    return out;
}

struct Trace {
    std::vector<double> logits;
    Mat alpha;
    std::vector<double> beta;
};

template <typename T>
Trace forward(const RetMILModel<T>& model, const Mat& x) {
    const std::size_t l = model.config().subseq_len;
    const Provenance prov = plan_subsequences(x.size(), l);
    Trace t;
    Mat pooled;
    for (std::size_t r = 0; r < prov.rows; ++r) {
        Mat row;
        for (std::size_t s = 0; s < l; ++s) row.push_back(x[prov.at(r, s) - 1]);
        const Mat y = msr(model.local_msr(), row);
        t.alpha.push_back(pool_weights(model.local_pool(), y));
        pooled.push_back(weighted_sum(t.alpha.back(), y));
    }
    const Mat g = msr(model.global_msr(), pooled);
    t.beta = pool_weights(model.global_pool(), g);
    const auto f = weighted_sum(t.beta, g);
    const Mat w = to_mat(model.classifier_weight());
    for (std::size_t c = 0; c < w.size(); ++c) t.logits.push_back(dot(w[c], f) + model.classifier_bias().at(c));
    return t;
}

}  // namespace retmil::reference
