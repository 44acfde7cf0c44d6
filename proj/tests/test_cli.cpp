#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "process.hpp"
#include "retmil/bench.hpp"
#include "retmil/dataset.hpp"
#include "retmil/features_io.hpp"

using namespace retmil;
using test_util::quoted;
using test_util::run_process;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = RETMIL_CLI_PATH;
const std::string kFaultyCli = RETMIL_FAULTY_CLI_PATH;

fs::path temp_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / ("retmil_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void write_json(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2); }

test_util::ProcessResult cli(const std::string& args) { return run_process(quoted(kCli) + " " + args); }

// Separable toy bags: class c has every coordinate near c. The same files
// serve as train, val and test so a memorizing model is perfect.
fs::path make_toy(const fs::path& dir, std::size_t classes, std::size_t per_class) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> noise(0.0, 0.05);
    Manifest m;
    m.num_classes = classes;
    m.d = 4;
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t b = 0; b < per_class; ++b) {
            const std::size_t n = 3 + 2 * b;
            Buffer<float> v(n * 4);
            for (auto& x : v) x = static_cast<float>(static_cast<double>(c) + noise(rng));
            const std::string name = "c" + std::to_string(c) + "_" + std::to_string(b);
            write_features(dir / (name + ".rmil"), FeatureSequence<float>(Tensor<float>::from({n, 4}, std::move(v))));
            for (Split s : {Split::train, Split::val, Split::test}) {
                m.entries.push_back({name + "_" + to_string(s), name + ".rmil", c, s});
            }
        }
    }
    write_manifest(dir / "manifest.json", m);
    return dir / "manifest.json";
}

json toy_config(std::size_t classes, std::size_t epochs) {
    return {{"model", {{"d", 4}, {"heads", 1}, {"subseq_len", 2}, {"pool_hidden", 4}, {"num_classes", classes}}},
            {"train", {{"lr", 1e-2}, {"max_epochs", epochs}, {"patience", epochs}}}};
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(cli("").exit_code, 2);
    EXPECT_EQ(cli("frobnicate").exit_code, 2);
    EXPECT_EQ(cli("--precision f16 check").exit_code, 2);
    EXPECT_EQ(cli("eval --manifest m.json").exit_code, 2);
    EXPECT_EQ(cli("--help").exit_code, 0);
}

TEST(Cli, MissingConfigNamesThePath) {
    const auto r = cli("--config /nonexistent/run.json split --tokens 4");
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.output.find("/nonexistent/run.json"), std::string::npos) << r.output;
}

TEST(Cli, BadConfigKeyExitsTwo) {
    const auto dir = temp_dir("badcfg");
    write_json(dir / "c.json", {{"modle", json::object()}});
    const auto r = cli("--config " + quoted((dir / "c.json").string()) + " split --tokens 4");
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.output.find("modle"), std::string::npos) << r.output;
}

TEST(Cli, GenSyntheticIsReproducible) {
    const auto dir = temp_dir("gen");
    write_json(dir / "c.json", {{"synthetic", {{"train_bags", 4}, {"val_bags", 2}, {"test_bags", 2}}}});
    const std::string cfg = "--config " + quoted((dir / "c.json").string());
    ASSERT_EQ(cli(cfg + " --seed 3 gen-synthetic --out " + quoted((dir / "a").string())).exit_code, 0);
    ASSERT_EQ(cli(cfg + " --seed 3 gen-synthetic --out " + quoted((dir / "b").string())).exit_code, 0);
    const auto m = read_manifest(dir / "a" / "manifest.json");
    EXPECT_EQ(m.entries.size(), 8u);
    for (const auto& e : m.entries) EXPECT_EQ(slurp(dir / "a" / e.path), slurp(dir / "b" / e.path));
    EXPECT_EQ(slurp(dir / "a" / "manifest.json"), slurp(dir / "b" / "manifest.json"));
}

TEST(Cli, TrainEvalScoreOnToyBags) {
    const auto dir = temp_dir("toy");
    const auto manifest = make_toy(dir, 2, 2);
    write_json(dir / "c.json", toy_config(2, 60));
    const std::string cfg = "--config " + quoted((dir / "c.json").string());
    const auto tr = cli(cfg + " train --manifest " + quoted(manifest.string()) + " --out " + quoted((dir / "run").string()));
    ASSERT_EQ(tr.exit_code, 0) << tr.output;
    EXPECT_TRUE(fs::exists(dir / "run" / "model.bin.json"));
    EXPECT_NE(tr.output.find("epoch 1 "), std::string::npos);

    const std::string ckpt = quoted((dir / "run" / "model.bin").string());
    ASSERT_EQ(cli("eval --checkpoint " + ckpt + " --manifest " + quoted(manifest.string()) + " --out " +
                  quoted((dir / "m.json").string()))
                  .exit_code,
              0);
    const json metrics = json::parse(slurp(dir / "m.json"));
    EXPECT_EQ(metrics["split"], "test");
    EXPECT_EQ(metrics["bags"], 4);
    EXPECT_EQ(metrics["bacc"], 1.0);
    EXPECT_EQ(metrics["weighted_f1"], 1.0);
    EXPECT_EQ(metrics["auc"], 1.0);

    const fs::path bag = dir / "c1_1.rmil";
    ASSERT_EQ(cli("score --checkpoint " + ckpt + " --input " + quoted(bag.string()) + " --out " +
                  quoted((dir / "s.csv").string()))
                  .exit_code,
              0);
    std::istringstream csv(slurp(dir / "s.csv"));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "token_index,score");
    double total = 0.0;
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
        const auto comma = line.find(',');
        EXPECT_EQ(std::stoul(line.substr(0, comma)), ++rows);
        total += std::stod(line.substr(comma + 1));
    }
    EXPECT_EQ(rows, read_feature_header(bag).tokens);
    EXPECT_NEAR(total, 1.0, 1e-6);

    write_features(dir / "wide.rmil", FeatureSequence<float>(Tensor<float>::zeros({3, 5})));
    const auto wide = cli("score --checkpoint " + ckpt + " --input " + quoted((dir / "wide.rmil").string()) +
                          " --out " + quoted((dir / "w.csv").string()));
    EXPECT_EQ(wide.exit_code, 2);
    EXPECT_NE(wide.output.find("width"), std::string::npos) << wide.output;
}

TEST(Cli, MultiClassEvalOmitsAuc) {
    const auto dir = temp_dir("three");
    const auto manifest = make_toy(dir, 3, 1);
    write_json(dir / "c.json", toy_config(3, 1));
    const std::string cfg = "--config " + quoted((dir / "c.json").string());
    ASSERT_EQ(cli(cfg + " train --manifest " + quoted(manifest.string()) + " --out " + quoted((dir / "run").string()))
                  .exit_code,
              0);
    const auto r = cli("eval --checkpoint " + quoted((dir / "run" / "model.bin").string()) + " --manifest " +
                       quoted(manifest.string()) + " --split val");
    ASSERT_EQ(r.exit_code, 0) << r.output;
    const json metrics = json::parse(r.output);
    EXPECT_EQ(metrics["split"], "val");
    EXPECT_FALSE(metrics.contains("auc"));
    EXPECT_TRUE(metrics.contains("auc_omitted"));
    EXPECT_EQ(metrics["confusion_matrix"].size(), 3u);
}

TEST(Cli, TrainRejectsMismatchedManifest) {
    const auto dir = temp_dir("mismatch");
    const auto manifest = make_toy(dir, 2, 1);
    auto cfg = toy_config(2, 1);
    cfg["model"]["d"] = 8;
    cfg["model"]["heads"] = 2;
    write_json(dir / "c.json", cfg);
    const auto r = cli("--config " + quoted((dir / "c.json").string()) + " train --manifest " +
                       quoted(manifest.string()) + " --out " + quoted((dir / "run").string()));
    EXPECT_EQ(r.exit_code, 2) << r.output;
}

TEST(Cli, SplitDescribesAndDumps) {
    const auto dir = temp_dir("split");
    const auto r = cli("split --tokens 1100 --subseq-len 512 --dump-provenance " + quoted((dir / "p.csv").string()));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    const json j = json::parse(r.output.substr(r.output.find('{')));
    EXPECT_EQ(j["rows"], 3);
    std::istringstream csv(slurp(dir / "p.csv"));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "row,slot,token_index");
    std::size_t rows = 0;
    while (std::getline(csv, line)) ++rows;
    EXPECT_EQ(rows, 3u * 512u);
}

TEST(Cli, BenchWritesParsableCsv) {
    const auto dir = temp_dir("bench");
    write_json(dir / "c.json", {{"bench",
                                 {{"lengths", {32, 64}},
                                  {"repeats", 5},
                                  {"warmup", 0},
                                  {"d", 8},
                                  {"heads", 2},
                                  {"subseq_len", 16},
                                  {"pool_hidden", 4}}}});
    const auto r = cli("--config " + quoted((dir / "c.json").string()) + " bench --out " +
                       quoted((dir / "b.csv").string()) + " --summary " + quoted((dir / "s.json").string()));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    const auto records = read_bench_csv(dir / "b.csv");
    EXPECT_EQ(records.size(), 4u);
    EXPECT_TRUE(json::parse(slurp(dir / "s.json")).is_object());
}

TEST(Cli, CheckPassesAndFaultyBuildIsCaught) {
    const auto good = cli("check --cases 50");
    EXPECT_EQ(good.exit_code, 0) << good.output;
    const auto bad = run_process(quoted(kFaultyCli) + " check --cases 50");
    EXPECT_EQ(bad.exit_code, 1) << bad.output;
    EXPECT_NE(bad.output.find("causality violation"), std::string::npos) << bad.output;
}

TEST(Cli, TrainIsDeterministicInDoublePrecision) {
    const auto dir = temp_dir("determinism");
    const auto manifest = make_toy(dir, 2, 2);
    write_json(dir / "c.json", toy_config(2, 5));
    const std::string base = "--config " + quoted((dir / "c.json").string()) + " --precision f64 --workers 1 train --manifest " +
                             quoted(manifest.string()) + " --out ";
    ASSERT_EQ(cli(base + quoted((dir / "a").string())).exit_code, 0);
    ASSERT_EQ(cli(base + quoted((dir / "b").string())).exit_code, 0);
    EXPECT_EQ(slurp(dir / "a" / "model.bin"), slurp(dir / "b" / "model.bin"));
    EXPECT_EQ(slurp(dir / "a" / "history.csv"), slurp(dir / "b" / "history.csv"));
    EXPECT_FALSE(slurp(dir / "a" / "history.csv").empty());
}
