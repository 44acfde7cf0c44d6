#include "retmil/check.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "retmil/model.hpp"
#include "retmil/ops.hpp"
#include "retmil/retention.hpp"
#include "retmil/sequencer.hpp"

namespace retmil {

namespace {

template <typename T>
Tensor<T> random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Buffer<T> v(rows * cols);
    for (auto& x : v) x = static_cast<T>(normal(rng));
    return Tensor<T>::from({rows, cols}, std::move(v));
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(3);
    s << std::scientific << v;
    return s.str();
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        worst = std::max(worst, std::abs(static_cast<double>(a.values()[i]) - static_cast<double>(b.values()[i])));
    }
    return worst;
}

struct RetentionCase {
    RetentionConfig config;
    std::size_t n = 0;
    std::uint64_t seed = 0;
};

RetentionCase draw_case(std::mt19937_64& rng) {
    static constexpr std::size_t kHeadDims[] = {2, 4, 8, 16, 32};
    RetentionCase c;
    const std::size_t heads = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
    const std::size_t head_dim = kHeadDims[std::uniform_int_distribution<std::size_t>(0, 4)(rng)];
    c.config.heads = heads;
    c.config.d = heads * head_dim;
    c.n = std::uniform_int_distribution<std::size_t>(1, 256)(rng);
    c.seed = rng();
    return c;
}

template <typename T>
double case_error(const RetentionCase& c) {
    ParamStore<T> store;
    std::mt19937_64 rng(c.seed);
    const auto layer = MSRLayer<T>::create(c.config, store, "m", rng);
    const auto x = random_matrix<T>(c.n, c.config.d, rng);
    double worst = 0.0;
    for (std::size_t h = 0; h < c.config.heads; ++h) {
        worst = std::max(worst, max_abs_diff(retention_parallel(layer, h, x), retention_recurrent(layer, h, x)));
    }
    return worst;
}

}  // namespace

CheckResult check_retention_equivalence(std::size_t cases, std::uint64_t seed) {
    NoGradGuard no_grad;
    std::mt19937_64 rng(seed);
    double worst64 = 0.0, worst32 = 0.0;
    for (std::size_t i = 0; i < cases; ++i) {
        const auto c = draw_case(rng);
        worst64 = std::max(worst64, case_error<double>(c));
        worst32 = std::max(worst32, case_error<float>(c));
    }
    CheckResult r{"retention parallel/recurrent equivalence", worst64 <= 1e-10 && worst32 <= 1e-3, ""};
    r.detail = std::to_string(cases) + " cases, max |diff| f64 " + fmt(worst64) + " (<= 1e-10), f32 " + fmt(worst32) +
               " (<= 1e-3)";
    return r;
}

CheckResult check_decay_matrix() {
    CheckResult r{"decay matrix exactness", true, ""};
    const auto small = decay_matrix<double>(0.5, 3);
    const double expected[9] = {1, 0, 0, 0.5, 1, 0, 0.25, 0.5, 1};
    for (std::size_t i = 0; i < 9; ++i) {
        if (small.values()[i] != expected[i]) {
            r.passed = false;
            r.detail = "gamma=0.5, n=3 differs at entry " + std::to_string(i);
            return r;
        }
    }
    for (double gamma : default_gammas(8)) {
        for (std::size_t n : {1u, 2u, 17u, 128u, 512u}) {
            const auto m = decay_matrix<double>(gamma, n);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    const double v = m.values()[i * n + j];
                    const bool ok = j > i ? v == 0.0 : (j == i ? v == 1.0 : v > 0.0 && v < 1.0);
                    if (!ok) {
                        r.passed = false;
                        r.detail = "not lower-triangular with unit diagonal at (" + std::to_string(i) + "," +
                                   std::to_string(j) + "), n=" + std::to_string(n);
                        return r;
                    }
                }
            }
        }
    }
    r.detail = "gamma=0.5 n=3 bit-exact; triangular for n <= 512";
    return r;
}

CheckResult check_causality(std::uint64_t seed) {
    NoGradGuard no_grad;
    std::mt19937_64 rng(seed);
    RetentionConfig config;
    config.d = 16;
    config.heads = 4;
    ParamStore<double> store;
    const auto layer = MSRLayer<double>::create(config, store, "m", rng);
    const std::size_t n = 24;
    const auto x = random_matrix<double>(n, config.d, rng);
    const auto base = msr_forward_sequence(x, layer);
    for (std::size_t m = 0; m < n; ++m) {
        auto perturbed = x.detach();
        for (std::size_t j = 0; j < config.d; ++j) perturbed.mutable_values()[m * config.d + j] += 1.0;
        const auto out = msr_forward_sequence(perturbed, layer);
        for (std::size_t i = 0; i < m * config.d; ++i) {
            if (out.values()[i] != base.values()[i]) {
                return {"causality", false,
                        "causality violation: perturbing token " + std::to_string(m) + " changed output at position " +
                            std::to_string(i / config.d)};
            }
        }
    }
    return {"causality", true, "outputs before a perturbed token stay bit-identical (n=24)"};
}

CheckResult check_padding(std::size_t max_tokens) {
    for (std::size_t l : {2u, 4u, 8u, 512u}) {
        for (std::size_t n = 1; n <= max_tokens; ++n) {
            const auto layout = describe_split(n, l);
            const auto prov = plan_subsequences(n, l);
            auto fail = [&](const std::string& why) {
                return CheckResult{"padding sweep", false,
                                   why + " at N=" + std::to_string(n) + ", l=" + std::to_string(l)};
            };
            if (prov.length != l || prov.index.size() != prov.rows * l) return fail("row length");
            if (prov.rows != layout.rows()) return fail("row count");
            const std::size_t q = n / l, r = n % l;
            std::vector<std::size_t> count(n + 1, 0);
            for (std::size_t row = 0; row < prov.rows; ++row) {
                for (std::size_t t : prov.row(row)) {
                    if (t < 1 || t > n) return fail("index out of range");
                    if (t > q * l && row + 1 != prov.rows) return fail("remainder token outside last row");
                    ++count[t];
                }
            }
            for (std::size_t t = 1; t <= n; ++t) {
                if (t <= q * l && count[t] != 1) return fail("token " + std::to_string(t) + " not exactly once");
                if (t > q * l && count[t] == 0) return fail("remainder token " + std::to_string(t) + " missing");
            }
            if (layout.remainder_case == RemainderCase::repeat &&
                r + layout.repeats * r + layout.tail != l) {
                return fail("length identity r + a*r + b = l");
            }
        }
    }
    return {"padding sweep", true, "N in [1, " + std::to_string(max_tokens) + "], l in {2, 4, 8, 512}"};
}

CheckResult check_gradients(std::uint64_t seed) {
    ModelConfig config;
    config.d = 8;
    config.heads = 2;
    config.subseq_len = 4;
    config.pool_hidden = 8;
    config.num_classes = 2;
    auto model = RetMILModel<double>::create(config, seed);
    std::mt19937_64 rng(seed + 1);
    const FeatureSequence<double> seq(random_matrix<double>(10, config.d, rng));
    std::function<Tensor<double>(ParamStore<double>&)> loss = [&](ParamStore<double>&) {
        return cross_entropy_logits(forward(model, seq).logits, 1);
    };
    const auto res = finite_diff_check(loss, model.params(), 1e-5);
    CheckResult r{"end-to-end gradient check", res.max_relative_error < 1e-4, ""};
    r.detail = std::to_string(res.coordinates) + " coordinates, max relative error " + fmt(res.max_relative_error) +
               " at " + res.worst_parameter + "[" + std::to_string(res.worst_index) + "] (< 1e-4)";
    return r;
}

CheckResult check_probability_conservation(std::size_t bags, std::uint64_t seed) {
    NoGradGuard no_grad;
    ModelConfig config;
    config.d = 16;
    config.heads = 2;
    config.subseq_len = 16;
    config.pool_hidden = 16;
    const auto model = RetMILModel<double>::create(config, seed);
    std::mt19937_64 rng(seed + 7);
    double worst = 0.0;
    for (std::size_t b = 0; b < bags; ++b) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 300)(rng);
        const auto trace = forward(model, FeatureSequence<double>(random_matrix<double>(n, config.d, rng)));
        for (std::size_t i = 0; i < trace.rows(); ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k < config.subseq_len; ++k) s += trace.alpha[i * config.subseq_len + k];
            worst = std::max(worst, std::abs(s - 1.0));
        }
        double sb = 0.0;
        for (double v : trace.beta) sb += v;
        worst = std::max(worst, std::abs(sb - 1.0));
        double st = 0.0;
        for (double v : attention_scores(trace)) st += v;
        worst = std::max(worst, std::abs(st - 1.0));
    }
    return {"probability conservation", worst <= 1e-6,
            std::to_string(bags) + " bags, max |sum - 1| " + fmt(worst) + " (<= 1e-6)"};
}

std::vector<CheckResult> run_checks(const CheckOptions& o) {
    std::vector<CheckResult> out;
    out.push_back(check_retention_equivalence(o.retention_cases, o.seed));
    out.push_back(check_decay_matrix());
    out.push_back(check_causality(o.seed));
    out.push_back(check_padding(o.padding_max_tokens));
    out.push_back(check_gradients(o.seed));
    out.push_back(check_probability_conservation(o.conservation_bags, o.seed));
    return out;
}

}  // namespace retmil
