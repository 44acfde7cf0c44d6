#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "reference.hpp"
#include "retmil/checkpoint.hpp"
#include "retmil/error.hpp"
#include "retmil/ops.hpp"
#include "retmil/train.hpp"
#include "test_support.hpp"

using namespace retmil;
using test_util::random_tensor;
using T64 = Tensor<double>;

namespace {

ModelConfig tiny(std::size_t d = 8, std::size_t heads = 2, std::size_t l = 4) {
    ModelConfig c;
    c.d = d;
    c.heads = heads;
    c.subseq_len = l;
    c.pool_hidden = 6;
    c.num_classes = 2;
    return c;
}

FeatureSequence<double> random_bag(std::size_t n, std::size_t d, std::mt19937_64& rng) {
    return FeatureSequence<double>(random_tensor({n, d}, rng));
}

double sum_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

// Two well-separated classes of short bags.
std::vector<BagRecord<double>> toy_bags(std::size_t count, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<BagRecord<double>> out;
    for (std::size_t i = 0; i < count; ++i) {
        auto x = random_tensor({6, d}, rng, 0.5);
        if (i % 2 == 1) {
            for (std::size_t j = 0; j < d; ++j) x.mutable_values()[2 * d + j] += 3.0;
        }
        out.push_back({"bag" + std::to_string(i), FeatureSequence<double>(x), i % 2});
    }
    return out;
}

std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("retmil_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace

TEST(ModelConfig, Validation) {
    auto c = tiny();
    c.num_classes = 1;
    EXPECT_THROW(c.validate(), ConfigError);
    c = tiny();
    c.subseq_len = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = tiny();
    c.heads = 3;
    EXPECT_THROW(c.validate(), ConfigError);
    EXPECT_NO_THROW(tiny().validate());
}

TEST(Model, ParameterNames) {
    const auto m = RetMILModel<double>::create(tiny(), 0);
    for (const char* name : {"local_msr.w_q", "local_pool.gamma", "global_msr.w_o", "global_pool.u",
                             "classifier.weight", "classifier.bias"}) {
        EXPECT_TRUE(m.params().contains(name)) << name;
    }
    EXPECT_EQ(m.params().size(), 7u * 2 + 3 * 2 + 2);
}

TEST(Model, ZeroClassifierGivesUniformPrediction) {
    auto m = RetMILModel<double>::create(tiny(), 1);
    for (const char* name : {"classifier.weight", "classifier.bias"}) {
        auto t = m.params().get(name);
        for (auto& v : t.mutable_values()) v = 0.0;
    }
    std::mt19937_64 rng(2);
    const auto trace = forward(m, random_bag(9, 8, rng));
    for (double z : trace.logits.values()) EXPECT_EQ(z, 0.0);
    EXPECT_NEAR(cross_entropy_logits(trace.logits, 1).item(), std::log(2.0), 1e-15);
}

TEST(Model, SingleSubsequenceMatchesScalarPipeline) {
    auto cfg = tiny(2, 1, 8);
    const auto m = RetMILModel<double>::create(cfg, 3);
    std::mt19937_64 rng(4);
    const auto bag = random_bag(5, 2, rng);
    const auto trace = forward(m, bag);
    EXPECT_EQ(trace.rows(), 1u);
    EXPECT_EQ(trace.beta, std::vector<double>{1.0});
    const auto ref = reference::forward(m, reference::to_mat(bag.features()));
    for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(trace.logits.at(c), ref.logits[c], 1e-12);
}

TEST(Model, MatchesScalarPipelineOnManyRows) {
    const auto m = RetMILModel<double>::create(tiny(8, 2, 4), 5);
    std::mt19937_64 rng(6);
    for (std::size_t n : {1u, 3u, 4u, 10u, 17u, 33u}) {
        const auto bag = random_bag(n, 8, rng);
        const auto trace = forward(m, bag);
        const auto ref = reference::forward(m, reference::to_mat(bag.features()));
        for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(trace.logits.at(c), ref.logits[c], 1e-10) << "n=" << n;
        ASSERT_EQ(trace.beta.size(), ref.beta.size());
        for (std::size_t i = 0; i < ref.beta.size(); ++i) {
            EXPECT_NEAR(trace.beta[i], ref.beta[i], 1e-12);
            for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(trace.alpha[i * 4 + k], ref.alpha[i][k], 1e-12);
        }
    }
}

TEST(Model, EndToEndGradientCheck) {
    auto cfg = tiny();
    cfg.pool_hidden = 8;
    auto m = RetMILModel<double>::create(cfg, 7);
    std::mt19937_64 rng(8);
    const auto bag = random_bag(10, 8, rng);
    const auto res = finite_diff_check<double>(
        [&](ParamStore<double>&) { return cross_entropy_logits(forward(m, bag).logits, 0); }, m.params(), 1e-5);
    EXPECT_EQ(res.coordinates, m.params().scalar_count());
    EXPECT_LT(res.max_relative_error, 1e-4) << res.worst_parameter << "[" << res.worst_index << "]";
}

TEST(Model, WeightsAndScoresAreProbabilities) {
    const auto m = RetMILModel<double>::create(tiny(8, 2, 8), 9);
    std::mt19937_64 rng(10);
    for (std::size_t n : {1u, 5u, 8u, 20u, 77u}) {
        const auto trace = forward(m, random_bag(n, 8, rng));
        for (std::size_t i = 0; i < trace.rows(); ++i) {
            EXPECT_NEAR(std::accumulate(trace.alpha.begin() + i * 8, trace.alpha.begin() + (i + 1) * 8, 0.0), 1.0, 1e-6);
        }
        EXPECT_NEAR(sum_of(trace.beta), 1.0, 1e-6);
        const auto s = attention_scores(trace);
        EXPECT_EQ(s.size(), n);
        EXPECT_NEAR(sum_of(s), 1.0, 1e-6);
    }
}

TEST(Model, SingleRowScoresAreLocalWeights) {
    const auto m = RetMILModel<double>::create(tiny(8, 2, 8), 11);
    std::mt19937_64 rng(12);
    const auto trace = forward(m, random_bag(8, 8, rng));
    ASSERT_EQ(trace.rows(), 1u);
    EXPECT_EQ(attention_scores(trace), trace.alpha);
}

TEST(Model, DuplicatedSlotScoresAddUp) {
    const auto m = RetMILModel<double>::create(tiny(8, 2, 2), 13);
    std::mt19937_64 rng(14);
    const auto trace = forward(m, random_bag(3, 8, rng));
    ASSERT_EQ(trace.rows(), 2u);
    const auto s = attention_scores(trace);
    EXPECT_EQ(s[2], trace.beta[1] * trace.alpha[2] + trace.beta[1] * trace.alpha[3]);
    EXPECT_EQ(s[0], trace.alpha[0] * trace.beta[0]);
}

TEST(Model, StreamingMatchesBatched) {
    const auto m = RetMILModel<double>::create(tiny(8, 2, 4), 15);
    const auto m32 = RetMILModel<float>::create(tiny(8, 2, 4), 15);
    std::mt19937_64 rng(16);
    for (std::size_t n : {1u, 4u, 11u, 50u}) {
        const auto bag = random_bag(n, 8, rng);
        NoGradGuard no_grad;
        const auto a = forward(m, bag), b = forward(m, bag, {.streaming = true});
        EXPECT_EQ(a.logits.to_vector(), b.logits.to_vector());
        EXPECT_EQ(a.alpha, b.alpha);
        EXPECT_EQ(a.beta, b.beta);
        const FeatureSequence<float> bag32(Tensor<float>::from(
            {n, 8}, std::vector<float>(bag.features().values().begin(), bag.features().values().end())));
        EXPECT_EQ(forward(m32, bag32).logits.to_vector(), forward(m32, bag32, {.streaming = true}).logits.to_vector());
    }
}

TEST(Model, StreamingNeedsNoGrad) {
    const auto m = RetMILModel<double>::create(tiny(), 17);
    std::mt19937_64 rng(18);
    EXPECT_THROW(forward(m, random_bag(5, 8, rng), {.streaming = true}), StateError);
}

TEST(Model, WidthMismatch) {
    const auto m = RetMILModel<double>::create(tiny(), 19);
    std::mt19937_64 rng(20);
    EXPECT_THROW(forward(m, random_bag(5, 6, rng)), ConfigError);
}

TEST(Model, TokenOrderMatters) {
    const auto m = RetMILModel<double>::create(tiny(8, 2, 4), 21);
    std::mt19937_64 rng(22);
    const auto bag = random_bag(8, 8, rng);
    Buffer<double> reversed;
    for (std::size_t i = 8; i-- > 0;) {
        for (std::size_t j = 0; j < 8; ++j) reversed.push_back(bag.features().at(i, j));
    }
    const auto a = forward(m, bag).logits;
    const auto b = forward(m, FeatureSequence<double>(T64::from({8, 8}, std::move(reversed)))).logits;
    EXPECT_NE(a.to_vector(), b.to_vector());
}

TEST(Model, SeedDeterminesParametersAndCloneIsIndependent) {
    const auto a = RetMILModel<double>::create(tiny(), 23);
    const auto b = RetMILModel<double>::create(tiny(), 23);
    const auto c = RetMILModel<double>::create(tiny(), 24);
    EXPECT_EQ(a.params().snapshot(), b.params().snapshot());
    EXPECT_NE(a.params().snapshot(), c.params().snapshot());
    auto d = a.clone();
    EXPECT_EQ(d.params().snapshot(), a.params().snapshot());
    auto w = d.params().get("classifier.bias");
    w.mutable_values()[0] += 1.0;
    EXPECT_NE(d.params().snapshot(), a.params().snapshot());
}

TEST(Predict, TieBreaksLow) {
    const std::vector<double> tie{2.0, 2.0};
    EXPECT_EQ(predict_from_logits<double>(tie).label, 0u);
    const std::vector<double> z{0.0, 5.0};
    const auto p = predict_from_logits<double>(z);
    EXPECT_EQ(p.label, 1u);
    EXPECT_NEAR(p.probabilities[1], 1.0 / (1.0 + std::exp(-5.0)), 1e-15);
    EXPECT_NEAR(p.probabilities[1], 0.9933, 1e-4);
    EXPECT_NEAR(sum_of(p.probabilities), 1.0, 1e-6);
}

TEST(TrainConfig, Validation) {
    TrainConfig c;
    c.patience = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.max_epochs = 10;
    c.patience = 11;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.batch_size = 2;
    EXPECT_THROW(c.validate(), ConfigError);
    EXPECT_NO_THROW(TrainConfig{}.validate());
}

TEST(Train, EmptySplitsAreRejected) {
    auto m = RetMILModel<double>::create(tiny(), 25);
    const auto bags = toy_bags(4, 8, 26);
    EXPECT_THROW(train(m, {}, bags, TrainConfig{}), InputError);
    EXPECT_THROW(train(m, bags, {}, TrainConfig{}), InputError);
}

TEST(Train, MemorisesToySet) {
    auto m = RetMILModel<double>::create(tiny(), 27);
    const auto bags = toy_bags(4, 8, 28);
    TrainConfig cfg;
    cfg.lr = 1e-2;
    cfg.max_epochs = 60;
    cfg.patience = 60;
    const auto result = train(m, bags, bags, cfg);
    EXPECT_EQ(result.history.size(), 60u);
    const auto ev = evaluate(m, bags);
    EXPECT_EQ(ev.predictions, ev.labels);
    EXPECT_LT(result.best_val_loss, result.history.front().val_loss);
}

TEST(Train, DeterministicHistoryAndParameters) {
    const auto bags = toy_bags(6, 8, 29);
    auto run = [&] {
        auto m = RetMILModel<double>::create(tiny(), 30);
        TrainConfig cfg;
        cfg.lr = 1e-3;
        cfg.max_epochs = 5;
        cfg.patience = 5;
        cfg.seed = 31;
        const auto r = train(m, bags, bags, cfg);
        std::vector<double> losses;
        for (const auto& e : r.history) losses.insert(losses.end(), {e.train_loss, e.val_loss, e.val_bacc});
        return std::make_pair(losses, m.params().snapshot());
    };
    EXPECT_EQ(run(), run());
}

TEST(Train, EarlyStoppingRestoresBestEpoch) {
    auto m = RetMILModel<double>::create(tiny(), 32);
    const auto train_set = toy_bags(6, 8, 33);
    auto val_set = toy_bags(4, 8, 34);
    for (auto& b : val_set) b.label = 1 - b.label;  // validation disagrees with training
    TrainConfig cfg;
    cfg.lr = 1e-2;
    cfg.max_epochs = 40;
    cfg.patience = 3;
    const auto r = train(m, train_set, val_set, cfg);
    EXPECT_TRUE(r.stopped_early);
    EXPECT_EQ(r.history.size(), r.best_epoch + cfg.patience);
    EXPECT_NEAR(evaluate(m, val_set).mean_loss, r.best_val_loss, 1e-12);
}

TEST(Train, DivergenceReportsEpochContext) {
    auto m = RetMILModel<double>::create(tiny(), 35);
    const auto bags = toy_bags(4, 8, 36);
    TrainConfig cfg;
    cfg.lr = 1e200;
    cfg.max_epochs = 5;
    cfg.patience = 5;
    try {
        train(m, bags, bags, cfg);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos) << e.what();
    }
}

TEST(Evaluate, WorkersKeepOrderAndValues) {
    const auto m = RetMILModel<double>::create(tiny(), 37);
    const auto bags = toy_bags(9, 8, 38);
    const auto a = evaluate(m, bags, 1), b = evaluate(m, bags, 4);
    EXPECT_EQ(a.predictions, b.predictions);
    EXPECT_EQ(a.probabilities, b.probabilities);
    EXPECT_EQ(a.mean_loss, b.mean_loss);
}

TEST(Checkpoint, RoundTrip) {
    const auto dir = temp_dir("ckpt");
    const auto m = RetMILModel<float>::create(tiny(), 39);
    save_checkpoint(dir / "m.bin", m);
    EXPECT_TRUE(std::filesystem::exists(dir / "m.bin.json"));
    const auto back = load_checkpoint<float>(dir / "m.bin");
    EXPECT_EQ(back.params().snapshot(), m.params().snapshot());
    EXPECT_EQ(read_checkpoint_config(dir / "m.bin").subseq_len, 4u);
    const auto wide = load_checkpoint<double>(dir / "m.bin");
    EXPECT_EQ(wide.params().get("classifier.bias").at(0), static_cast<double>(m.params().get("classifier.bias").at(0)));
}

TEST(Checkpoint, CorruptFilesAreFormatErrors) {
    const auto dir = temp_dir("ckpt_bad");
    const auto m = RetMILModel<float>::create(tiny(), 40);
    save_checkpoint(dir / "m.bin", m);
    std::string bytes;
    {
        std::ifstream in(dir / "m.bin", std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    {
        std::ofstream out(dir / "m.bin", std::ios::binary);
        out << bytes.substr(0, bytes.size() - 3);
    }
    EXPECT_THROW(load_checkpoint<float>(dir / "m.bin"), FormatError);
    {
        std::ofstream out(dir / "m.bin", std::ios::binary);
        out << "XXXX" << bytes.substr(4);
    }
    EXPECT_THROW(load_checkpoint<float>(dir / "m.bin"), FormatError);
    std::filesystem::remove(dir / "m.bin.json");
    EXPECT_THROW(load_checkpoint<float>(dir / "m.bin"), IoError);
}
