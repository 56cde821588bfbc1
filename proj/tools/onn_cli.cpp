// Command-line driver: corpus, prepare, spm, train, gradcheck, report.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "onn/commands.hpp"
#include "onn/config.hpp"
#include "onn/errors.hpp"
#include "onn/runtime.hpp"

namespace {

// Flag value -> config key, applied only when the flag was given.
struct Override {
    std::string key;
    std::string value;
};

void add_override(CLI::App* app, std::vector<Override>& list, const std::string& flag, const std::string& key,
                  const std::string& help) {
    list.push_back({key, {}});
    const std::size_t index = list.size() - 1;
    app->add_option_function<std::string>(
        flag, [&list, index](const std::string& v) { list[index].value = v; }, help + " (" + key + ")");
}

}  // namespace

int main(int argc, char** argv) {
    onn::tune_allocator();
    CLI::App app{"Operational neural network denoising experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::size_t workers = 0;
    std::string out;
    std::vector<std::string> sets;
    app.add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "base seed (run.seed)");
    app.add_option("--workers", workers, "worker threads; default ONN_WORKERS or all cores");
    app.add_option("--out", out, "output directory (run.out)");
    app.add_option("--set", sets, "extra override, section.key=value (repeatable)");

    std::vector<Override> overrides;
    overrides.reserve(64);

    auto* corpus = app.add_subcommand("corpus", "write procedural grayscale images");
    std::string corpus_dir;
    std::size_t corpus_count = 1000, corpus_rows = 60, corpus_cols = 60;
    std::uint64_t corpus_seed = 0;
    corpus->add_option("dir", corpus_dir, "target directory")->required();
    corpus->add_option("--count", corpus_count, "number of images");
    corpus->add_option("--rows", corpus_rows, "image rows");
    corpus->add_option("--cols", corpus_cols, "image cols");
    corpus->add_option("--corpus-seed", corpus_seed, "scene seed");

    auto* prepare = app.add_subcommand("prepare", "write clean/noisy pairs and a manifest");
    auto* spm = app.add_subcommand("spm", "rank operator sets and write the elite assignment");
    auto* train = app.add_subcommand("train", "cross-validated ONN vs CNN training");
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every operator set");
    auto* report = app.add_subcommand("report", "aggregate a run directory");

    for (auto* cmd : {prepare, spm, train}) {
        add_override(cmd, overrides, "--data", "data.path", "image directory; empty for the procedural corpus");
        add_override(cmd, overrides, "--images", "data.images", "image count");
        add_override(cmd, overrides, "--noise", "noise.kind", "impulse or speckle");
        add_override(cmd, overrides, "--p", "noise.p", "impulse probability");
        add_override(cmd, overrides, "--shape", "noise.shape", "speckle shape M");
    }
    for (auto* cmd : {spm, train}) {
        add_override(cmd, overrides, "--hidden", "network.hidden", "hidden widths, comma separated");
        add_override(cmd, overrides, "--kernel", "network.kernel", "kernel size, e.g. 3 or 3x5");
        add_override(cmd, overrides, "--library", "library.sets", "operator sets, comma separated");
        add_override(cmd, overrides, "--gamma", "spm.gamma", "monitoring interval");
        add_override(cmd, overrides, "--runs", "spm.runs", "probe runs");
        add_override(cmd, overrides, "--top-k", "spm.top_k", "sets kept per layer");
        add_override(cmd, overrides, "--confinement", "spm.confinement", "random runs before guided draws");
        add_override(cmd, overrides, "--iterations", "spm.iterations", "iterations per probe run");
        add_override(cmd, overrides, "--window", "spm.window", "last or all");
        add_override(cmd, overrides, "--probe", "spm.probe", "probe images");
        add_override(cmd, overrides, "--lr", "onn.lr", "ONN learning rate");
    }
    std::string assignment;
    train->add_option("--assignment", assignment, "elite assignment JSON; default: SPM per fold")
        ->check(CLI::ExistingFile);
    add_override(train, overrides, "--epochs", "protocol.epochs", "epochs per restart");
    add_override(train, overrides, "--folds", "protocol.folds", "folds to run");
    add_override(train, overrides, "--plan-folds", "protocol.plan_folds", "fold partition size");
    add_override(train, overrides, "--restarts", "protocol.restarts", "restarts per model");
    add_override(train, overrides, "--models", "protocol.models", "both, onn or cnn");
    add_override(train, overrides, "--cnn-lr", "cnn.lr", "CNN learning rate");
    add_override(gradcheck, overrides, "--library", "library.sets", "operator sets, comma separated");
    add_override(gradcheck, overrides, "--configs", "gradcheck.configs", "configurations per set");
    add_override(gradcheck, overrides, "--tolerance", "gradcheck.tolerance", "relative error bound");

    std::string run_dir;
    std::string baseline;
    std::size_t expected_folds = 0;
    report->add_option("run_dir", run_dir, "directory holding report.csv")->required()->check(CLI::ExistingDirectory);
    report->add_option("--baseline", baseline, "CSV with a fold column and external test PSNR columns")
        ->check(CLI::ExistingFile);
    report->add_option("--expected-folds", expected_folds, "folds that must be present; default from the manifest");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? onn::kExitOk : onn::kExitConfig;
    }

    try {
        onn::set_workers(onn::resolve_workers(workers));
        if (corpus->parsed())
            return onn::cmd_corpus(corpus_dir, corpus_count, corpus_rows, corpus_cols, corpus_seed, std::cout);
        if (report->parsed())
            return onn::cmd_report(run_dir, baseline.empty() ? std::nullopt : std::optional<std::filesystem::path>(baseline),
                                   expected_folds, std::cout);

        auto doc = config_path.empty() ? onn::IniDocument() : onn::IniDocument::load(config_path);
        if (seed) doc.set("run.seed", std::to_string(*seed));
        if (!out.empty()) doc.set("run.out", out);
        for (const auto& o : overrides)
            if (!o.value.empty()) doc.set(o.key, o.value);
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw onn::ConfigError("--set expects section.key=value, got '" + s + "'");
            doc.set(s.substr(0, eq), s.substr(eq + 1));
        }
        const auto config = onn::ExperimentConfig::from_ini(doc);
        if (config.workers > 0 && workers == 0) onn::set_workers(config.workers);

        if (prepare->parsed()) return onn::cmd_prepare(config, std::cout);
        if (spm->parsed()) return onn::cmd_spm(config, std::cout);
        if (train->parsed())
            return onn::cmd_train(config,
                                  assignment.empty() ? std::nullopt : std::optional<std::filesystem::path>(assignment),
                                  std::cout);
        if (gradcheck->parsed()) return onn::cmd_gradcheck(config, std::cout);
    } catch (const std::exception& e) {
        return onn::report_error(e, std::cerr);
    }
    return onn::kExitOk;
}
