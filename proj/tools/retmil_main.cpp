// retmil: dataset generation, training, evaluation, scoring, split inspection,
// benchmarking and the oracle suite behind one binary.
//
// Exit codes: 0 success, 1 check failure, 2 usage/config/IO error, 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "retmil/bench.hpp"
#include "retmil/check.hpp"
#include "retmil/checkpoint.hpp"
#include "retmil/dataset.hpp"
#include "retmil/error.hpp"
#include "retmil/features_io.hpp"
#include "retmil/metrics.hpp"
#include "retmil/run_config.hpp"
#include "retmil/sequencer.hpp"
#include "retmil/synthetic.hpp"
#include "retmil/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace retmil;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheck = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct GlobalFlags {
    std::string config;
    std::string precision;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
};

// Config file first, then flags on top.
RunConfig resolve_config(const GlobalFlags& flags, fs::path* config_dir = nullptr) {
    RunConfig cfg;
    if (!flags.config.empty()) {
        if (!fs::exists(flags.config)) throw IoError("config file not found: " + flags.config);
        cfg = load_run_config(flags.config);
        if (config_dir) *config_dir = fs::absolute(flags.config).parent_path();
    }
    if (!flags.precision.empty()) cfg.precision = parse_precision(flags.precision);
    if (flags.seed) cfg.set_seed(*flags.seed);
    if (flags.workers) cfg.workers = *flags.workers;
    cfg.validate();
    return cfg;
}

fs::path anchored(const fs::path& p, const fs::path& base) {
    return p.is_absolute() || base.empty() ? p : base / p;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("short write to " + path.string());
}

int cmd_gen_synthetic(const GlobalFlags& flags, const std::string& out_dir) {
    fs::path base;
    RunConfig cfg = resolve_config(flags, &base);
    fs::path dir = out_dir;
    if (dir.empty() && !cfg.paths.manifest.empty()) dir = anchored(cfg.paths.manifest, base).parent_path();
    if (dir.empty()) throw ConfigError("no output directory: pass --out or set paths.manifest");
    const Manifest m = generate_synthetic(cfg.synthetic, dir);
    validate_manifest(m, true);
    std::cout << "wrote " << m.entries.size() << " bags to " << dir.string() << "\n";
    return kExitOk;
}

template <typename T>
int run_train(const RunConfig& cfg, const fs::path& manifest_path, const fs::path& out_dir) {
    const Manifest manifest = read_manifest(manifest_path);
    validate_manifest(manifest, true);
    if (manifest.d != cfg.model.d) {
        throw ConfigError("model.d = " + std::to_string(cfg.model.d) + " but the manifest has d = " +
                          std::to_string(manifest.d));
    }
    if (manifest.num_classes != cfg.model.num_classes) {
        throw ConfigError("model.num_classes = " + std::to_string(cfg.model.num_classes) +
                          " but the manifest has " + std::to_string(manifest.num_classes));
    }
    const auto train_set = load_split<T>(manifest, Split::train);
    const auto val_set = load_split<T>(manifest, Split::val);
    auto model = RetMILModel<T>::create(cfg.model, cfg.seed);
    const TrainResult result = train(model, train_set, val_set, cfg.train, [](const EpochRecord& e) {
        std::fprintf(stderr, "epoch %zu train_loss %.6f val_loss %.6f val_bacc %.4f\n", e.epoch, e.train_loss,
                     e.val_loss, e.val_bacc);
    });
    fs::create_directories(out_dir);
    save_checkpoint(out_dir / "model.bin", model, json{{"run", to_json(cfg)}});
    write_history_csv(out_dir / "history.csv", result.history);
    std::cout << "best epoch " << result.best_epoch << " val_loss " << result.best_val_loss << "\n";
    std::cout << "checkpoint " << (out_dir / "model.bin").string() << "\n";
    return kExitOk;
}

int cmd_train(const GlobalFlags& flags, const std::string& manifest_flag, const std::string& out_flag) {
    fs::path base;
    RunConfig cfg = resolve_config(flags, &base);
    const fs::path manifest = manifest_flag.empty() ? anchored(cfg.paths.manifest, base) : fs::path(manifest_flag);
    const fs::path out = out_flag.empty() ? anchored(cfg.paths.output_dir, base) : fs::path(out_flag);
    if (manifest.empty()) throw ConfigError("no manifest: pass --manifest or set paths.manifest");
    if (out.empty()) throw ConfigError("no output directory: pass --out or set paths.output_dir");
    return cfg.precision == Precision::f32 ? run_train<float>(cfg, manifest, out) : run_train<double>(cfg, manifest, out);
}

template <typename T>
json run_eval(const fs::path& checkpoint, const Manifest& manifest, Split split, std::size_t workers) {
    const auto model = load_checkpoint<T>(checkpoint);
    if (model.config().d != manifest.d) throw ConfigError("checkpoint d does not match the manifest");
    const auto bags = load_split<T>(manifest, split);
    if (bags.empty()) throw InputError("split '" + to_string(split) + "' is empty");
    const Evaluation ev = evaluate(model, bags, workers);
    const std::size_t c = model.config().num_classes;
    json out = {{"split", to_string(split)},
                {"bags", bags.size()},
                {"mean_loss", ev.mean_loss},
                {"bacc", balanced_accuracy(ev.labels, ev.predictions, c)},
                {"weighted_f1", weighted_f1(ev.labels, ev.predictions, c)},
                {"confusion_matrix", confusion_matrix(ev.labels, ev.predictions, c)}};
    const auto zero = f1_zero_division_classes(ev.labels, ev.predictions, c);
    out["f1_zero_division_classes"] = zero;
    if (c == 2) {
        std::vector<double> scores;
        for (const auto& p : ev.probabilities) scores.push_back(p[1]);
        bool both = false;
        for (std::size_t y : ev.labels) both = both || y != ev.labels.front();
        if (both) {
            out["auc"] = roc_auc(ev.labels, scores);
        } else {
            out["auc_omitted"] = "only one class present in the split";
        }
    } else {
        out["auc_omitted"] = "AUC is reported for binary tasks only; this model has " + std::to_string(c) + " classes";
    }
    return out;
}

int cmd_eval(const GlobalFlags& flags, const std::string& checkpoint, const std::string& manifest_path,
             const std::string& split, const std::string& out_path) {
    const RunConfig cfg = resolve_config(flags);
    const Manifest manifest = read_manifest(manifest_path);
    validate_manifest(manifest, false);
    const Split s = parse_split(split);
    const json metrics = cfg.precision == Precision::f32 ? run_eval<float>(checkpoint, manifest, s, cfg.workers)
                                                         : run_eval<double>(checkpoint, manifest, s, cfg.workers);
    if (out_path.empty()) {
        std::cout << metrics.dump(2) << "\n";
    } else {
        write_text(out_path, metrics.dump(2) + "\n");
    }
    return kExitOk;
}

template <typename T>
int run_score(const fs::path& checkpoint, const fs::path& input, const fs::path& out_path) {
    const auto model = load_checkpoint<T>(checkpoint);
    const FeatureHeader header = read_feature_header(input);
    if (header.dim != model.config().d) {
        throw InputError("feature width " + std::to_string(header.dim) + " in " + input.string() +
                         " does not match the model width " + std::to_string(model.config().d));
    }
    const auto seq = read_features<T>(input);
    NoGradGuard no_grad;
    const auto scores = attention_scores(forward(model, seq));
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + out_path.string());
    out << "token_index,score\n";
    char buf[64];
    for (std::size_t i = 0; i < scores.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i + 1, static_cast<double>(scores[i]));
        out << buf;
    }
    if (!out) throw IoError("short write to " + out_path.string());
    return kExitOk;
}

int cmd_score(const GlobalFlags& flags, const std::string& checkpoint, const std::string& input,
              const std::string& out_path) {
    const RunConfig cfg = resolve_config(flags);
    return cfg.precision == Precision::f32 ? run_score<float>(checkpoint, input, out_path)
                                           : run_score<double>(checkpoint, input, out_path);
}

int cmd_split(const GlobalFlags& flags, const std::string& input, std::size_t tokens, std::size_t length,
              const std::string& dump) {
    const RunConfig cfg = resolve_config(flags);
    if (!input.empty()) tokens = read_feature_header(input).tokens;
    if (tokens == 0) throw ConfigError("pass --input or a positive --tokens");
    if (length == 0) length = cfg.model.subseq_len;
    const SplitLayout layout = describe_split(tokens, length);
    const char* names[] = {"none", "repeat", "prefix"};
    json summary = {{"tokens", layout.tokens},
                    {"length", layout.length},
                    {"rows", layout.rows()},
                    {"full_rows", layout.full_rows},
                    {"remainder", layout.remainder},
                    {"case", names[static_cast<int>(layout.remainder_case)]}};
    if (layout.remainder_case == RemainderCase::repeat) {
        summary["repeats"] = layout.repeats;
        summary["tail"] = layout.tail;
    }
    std::cout << summary.dump(2) << "\n";
    if (!dump.empty()) {
        const Provenance prov = plan_subsequences(tokens, length);
        std::ofstream out(dump, std::ios::trunc);
        if (!out) throw IoError("cannot write " + dump);
        out << "row,slot,token_index\n";
        for (std::size_t r = 0; r < prov.rows; ++r) {
            for (std::size_t s = 0; s < prov.length; ++s) out << r << ',' << s << ',' << prov.at(r, s) << '\n';
        }
    }
    return kExitOk;
}

template <typename T>
BenchReport run_bench(const BenchConfig& b, const std::string& method) {
    BenchReport report;
    auto merge = [&report](BenchReport part) {
        report.records.insert(report.records.end(), part.records.begin(), part.records.end());
        report.failures.insert(report.failures.end(), part.failures.begin(), part.failures.end());
    };
    if (method == "all" || method == kRetMILMethod) merge(bench_retmil<T>(b));
    if (method == "all" || method == kSoftmaxBaselineMethod) merge(bench_softmax_attention_baseline<T>(b));
    return report;
}

int cmd_bench(const GlobalFlags& flags, const std::string& out_path, const std::string& summary_path,
              const std::string& method) {
    const RunConfig cfg = resolve_config(flags);
    if (method != "all" && method != kRetMILMethod && method != kSoftmaxBaselineMethod) {
        throw ConfigError("--method must be all, retmil or softmax_attention");
    }
    const BenchReport report = cfg.precision == Precision::f32 ? run_bench<float>(cfg.bench, method)
                                                               : run_bench<double>(cfg.bench, method);
    write_bench_csv(fs::path(out_path), report.records);
    for (const auto& f : report.failures) {
        std::fprintf(stderr, "bench: %s at N=%zu failed: %s\n", f.method.c_str(), f.n_tokens, f.reason.c_str());
    }
    if (!summary_path.empty()) {
        json records = json::array(), failures = json::array();
        for (const auto& r : report.records) {
            records.push_back({{"method", r.method},
                               {"n_tokens", r.n_tokens},
                               {"latency_ms_median", r.latency_ms_median},
                               {"throughput_tokens_per_s", r.throughput_tokens_per_s},
                               {"peak_bytes", r.peak_bytes}});
        }
        for (const auto& f : report.failures) {
            failures.push_back({{"method", f.method}, {"n_tokens", f.n_tokens}, {"reason", f.reason}});
        }
        json env = {{"precision", to_string(cfg.precision)},
                    {"workers", 1},
                    {"hardware_threads", std::thread::hardware_concurrency()},
                    {"memory_metric", "tensor allocator peak bytes above the live baseline"},
                    {"caveat", "CPU frequency scaling is not controlled"}};
        write_text(summary_path, json{{"environment", env},
                                      {"config", to_json(cfg.bench)},
                                      {"records", records},
                                      {"failures", failures}}
                                         .dump(2) +
                                     "\n");
    }
    return kExitOk;
}

int cmd_check(const GlobalFlags& flags, const CheckOptions& base) {
    const RunConfig cfg = resolve_config(flags);
    CheckOptions options = base;
    options.seed = cfg.seed;
    bool all = true;
    std::printf("%-44s %-6s %s\n", "property", "result", "detail");
    for (const auto& r : run_checks(options)) {
        all = all && r.passed;
        std::printf("%-44s %-6s %s\n", r.name.c_str(), r.passed ? "PASS" : "FAIL", r.detail.c_str());
    }
    std::fflush(stdout);
    if (!all) {
        std::fprintf(stderr, "check: one or more properties failed\n");
        return kExitCheck;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RetMIL: hierarchical retentive multiple-instance learning over feature sequences"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalFlags flags;
    app.add_option("--config", flags.config, "JSON run configuration");
    app.add_option("--precision", flags.precision, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));
    app.add_option("--seed", flags.seed, "overrides the config seed");
    app.add_option("--workers", flags.workers, "evaluation threads")->check(CLI::PositiveNumber);

    std::string out, manifest, checkpoint, input, split = "test", summary, dump, method = "all";
    std::size_t tokens = 0, length = 0;
    CheckOptions check_options;

    auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic MIL dataset and its manifest");
    gen->add_option("--out", out, "output directory");

    auto* tr = app.add_subcommand("train", "train a model; writes model.bin, model.bin.json and history.csv");
    tr->add_option("--manifest", manifest, "dataset manifest");
    tr->add_option("--out", out, "output directory");

    auto* ev = app.add_subcommand("eval", "metrics JSON for one split");
    ev->add_option("--checkpoint", checkpoint)->required();
    ev->add_option("--manifest", manifest)->required();
    ev->add_option("--split", split, "train, val or test");
    ev->add_option("--out", out, "metrics file (default: stdout)");

    auto* sc = app.add_subcommand("score", "per-token attention scores as CSV");
    sc->add_option("--checkpoint", checkpoint)->required();
    sc->add_option("--input", input, "feature file")->required();
    sc->add_option("--out", out, "CSV path")->required();

    auto* sp = app.add_subcommand("split", "describe how a bag is cut into subsequences");
    sp->add_option("--input", input, "feature file");
    sp->add_option("--tokens", tokens, "token count when no file is given");
    sp->add_option("--subseq-len", length, "defaults to model.subseq_len");
    sp->add_option("--dump-provenance", dump, "CSV of row,slot,token_index");

    auto* be = app.add_subcommand("bench", "latency, throughput and peak allocation versus sequence length");
    be->add_option("--out", out, "CSV path")->required();
    be->add_option("--summary", summary, "JSON summary with environment metadata");
    be->add_option("--method", method, "all, retmil or softmax_attention");

    auto* ck = app.add_subcommand("check", "run the oracle suites");
    ck->add_option("--cases", check_options.retention_cases, "randomized retention cases");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*gen) return cmd_gen_synthetic(flags, out);
        if (*tr) return cmd_train(flags, manifest, out);
        if (*ev) return cmd_eval(flags, checkpoint, manifest, split, out);
        if (*sc) return cmd_score(flags, checkpoint, input, out);
        if (*sp) return cmd_split(flags, input, tokens, length, dump);
        if (*be) return cmd_bench(flags, out, summary, method);
        if (*ck) return cmd_check(flags, check_options);
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return kExitNumeric;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    }
    return kExitUsage;
}
