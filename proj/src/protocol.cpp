#include "onn/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "onn/checkpoint.hpp"
#include "onn/errors.hpp"
#include "onn/trainer.hpp"

namespace onn {

namespace fs = std::filesystem;

std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::size_t epochs_to_reach(const std::vector<double>& curve, double target) {
    for (std::size_t e = 0; e < curve.size(); ++e)
        if (curve[e] >= target) return e + 1;
    return curve.size() + 1;
}

double percent_improvement(double onn, double cnn) { return 100.0 * (onn - cnn) / cnn; }

void ProtocolConfig::validate(const Architecture& arch, std::size_t images) const {
    if (plan_folds < 2) throw ConfigError("protocol needs at least 2 folds in the plan");
    if (folds < 1 || folds > plan_folds) throw ConfigError("folds to run must be between 1 and plan_folds");
    if (images < plan_folds) throw DataError("fewer images than folds");
    if (restarts < 1) throw ConfigError("restarts must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!run_onn && !run_cnn) throw ConfigError("nothing to train: both models disabled");
    if (arch.hidden.empty()) throw ConfigError("architecture needs at least one hidden layer");
    if (run_onn) {
        if (assignment) {
            if (assignment->size() != arch.hidden.size())
                throw ConfigError("assignment has " + std::to_string(assignment->size()) +
                                  " layers, architecture has " + std::to_string(arch.hidden.size()));
            for (std::size_t l = 0; l < arch.hidden.size(); ++l)
                if ((*assignment)[l].size() != arch.hidden[l])
                    throw ConfigError("assignment layer " + std::to_string(l + 1) + " has the wrong neuron count");
        } else {
            spm.validate(library);
            if (spm_probe < 1) throw ConfigError("spm probe set must hold at least one image");
        }
    }
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f << text;
    if (!f) throw DataError("write failed for " + path.string());
}

const char* kSchema =
    "report.csv\n"
    "  fold        fold index, 0-based\n"
    "  model       onn | cnn\n"
    "  restart     restart index within the fold\n"
    "  seed        training seed (fold seed + restart)\n"
    "  status      ok | diverged\n"
    "  train_psnr  mean PSNR in dB over the fold's training images after the last epoch\n"
    "  test_psnr   mean PSNR in dB over the fold's test images\n"
    "  selected    1 for the restart with the highest train_psnr, else 0\n"
    "curves.csv\n"
    "  fold, model, restart  as above\n"
    "  epoch       1-based\n"
    "  train_psnr  running mean PSNR of the pre-update predictions during the epoch\n"
    "folds.csv\n"
    "  fold                 fold index\n"
    "  status               ok | failed\n"
    "  input_test_psnr      noisy test inputs against clean\n"
    "  onn_train_psnr, onn_test_psnr, cnn_train_psnr, cnn_test_psnr  selected restarts\n"
    "  improvement_pct      100 (onn_test - cnn_test) / cnn_test\n"
    "  onn_epochs_to_reach  first epoch where the ONN curve reaches the CNN's final curve value\n"
    "  cnn_epochs_to_reach  same for the CNN itself; epochs + 1 means never reached\n"
    "fold<k>_spm.csv\n"
    "  layer, rank, nodal, pool, activation, score (accumulated health), probability, runs_scored\n"
    "PSNR uses peak 1.0 on images in [0, 1]; inf marks an exact reconstruction.\n";

std::string manifest(const Architecture& arch, const NoiseModel& noise, const ProtocolConfig& c, std::size_t images) {
    std::ostringstream os;
    os << "[data]\nimages = " << images << "\nrows = " << arch.rows << "\ncols = " << arch.cols << "\n";
    os << "\n[noise]\nkind = " << to_string(noise.kind) << "\np = " << format_number(noise.p)
       << "\nshape = " << noise.shape << "\nseed = per fold (fold seed)\n";
    os << "\n[network]\nhidden =";
    for (auto h : arch.hidden) os << ' ' << h;
    os << "\nkernel = " << arch.kernel.rows << "x" << arch.kernel.cols << "\n";
    os << "\n[protocol]\nseed = " << c.seed << "\nplan_folds = " << c.plan_folds << "\nfolds = " << c.folds
       << "\nrestarts = " << c.restarts << "\nepochs = " << c.epochs << "\nfold_seed = seed + fold"
       << "\nrestart_seed = fold_seed + restart\n";
    auto opt = [&](const char* name, const OptimizerConfig& o) {
        os << name << " = " << to_string(o.kind) << " lr=" << format_number(o.lr) << " beta1=" << format_number(o.beta1)
           << " beta2=" << format_number(o.beta2) << " eps=" << format_number(o.eps) << "\n";
    };
    opt("onn_optimizer", c.onn_optimizer);
    opt("cnn_optimizer", c.cnn_optimizer);
    os << "cnn_activation = " << to_string(c.cnn_activation) << "\n";
    os << "\n[elite]\n";
    if (c.assignment) {
        os << "source = fixed assignment\n";
    } else {
        os << "source = spm per fold\ngamma = " << c.spm.gamma << "\nruns = " << c.spm.runs << "\ntop_k = " << c.spm.top_k
           << "\nconfinement = " << c.spm.confinement << "\niterations = " << c.spm.iterations
           << "\nwindow = " << to_string(c.spm.window) << "\nprobe_images = " << c.spm_probe
           << "\nspm_seed = fold_seed\nlibrary =";
        for (const auto& s : c.library.sets()) os << ' ' << s.name();
        os << "\n";
    }
    return os.str();
}

struct Job {
    bool onn;
    std::size_t restart;
};

}  // namespace

ProtocolResult run_protocol(const std::vector<Tensor>& clean, const Architecture& arch, const NoiseModel& noise,
                            const ProtocolConfig& config, const fs::path& out_dir, const ProtocolLog& log) {
    noise.validate();
    config.validate(arch, clean.size());
    for (const auto& img : clean)
        if (img.rows() != arch.rows || img.cols() != arch.cols) throw DataError("image size does not match the architecture");
    fs::create_directories(out_dir);
    write_text(out_dir / "manifest.txt", manifest(arch, noise, config, clean.size()));
    write_text(out_dir / "schema.txt", kSchema);

    auto say = [&](const std::string& m) {
        if (log) log(m);
    };

    const auto plan = FoldPlan::create(clean.size(), config.plan_folds, config.seed);
    const NetworkSpec cnn_spec = make_convolutional(arch, config.cnn_activation);
    ProtocolResult result;

    for (std::size_t f = 0; f < config.folds; ++f) {
        const std::uint64_t fold_seed = config.seed + f;
        NoiseModel fold_noise = noise;
        fold_noise.seed = fold_seed;
        const auto train = make_samples(clean, plan.folds[f].train, fold_noise);
        const auto test = make_samples(clean, plan.folds[f].test, fold_noise);

        FoldSummary summary;
        summary.fold = f;
        summary.input_test = mean_input_psnr(test);

        NetworkSpec onn_spec;
        if (config.run_onn) {
            if (config.assignment) {
                summary.onn_assignment = *config.assignment;
            } else {
                const std::size_t probe = std::min(config.spm_probe, train.size());
                say("fold " + std::to_string(f) + ": spm on " + std::to_string(probe) + " images");
                const std::string stem = "fold" + std::to_string(f) + "_spm";
                SpmHooks hooks;
                hooks.on_run = [&](std::size_t, const HealthLedger& partial) {
                    write_text(out_dir / (stem + "_partial.csv"), ledger_csv(partial));
                };
                const auto spm = run_spm(arch, config.library, config.spm,
                                         std::span<const Sample>(train.data(), probe), fold_seed, hooks);
                for (const auto& d : spm.diagnostics) result.diagnostics.push_back("fold " + std::to_string(f) + ": " + d);
                fs::remove(out_dir / (stem + "_partial.csv"));
                write_text(out_dir / (stem + ".csv"), ledger_csv(spm.ledger));
                write_text(out_dir / (stem + ".txt"), ledger_report(spm.ledger));
                summary.onn_assignment = configure_elite(arch, spm.ledger, config.spm.top_k);
            }
            write_text(out_dir / ("fold" + std::to_string(f) + "_assignment.json"),
                       assignment_to_string(summary.onn_assignment));
            onn_spec = make_network(arch, summary.onn_assignment);
        }

        std::vector<Job> jobs;
        for (std::size_t r = 0; r < config.restarts; ++r) {
            if (config.run_onn) jobs.push_back({true, r});
            if (config.run_cnn) jobs.push_back({false, r});
        }
        std::vector<RestartRecord> records(jobs.size());
        say("fold " + std::to_string(f) + ": training " + std::to_string(jobs.size()) + " models");
        const auto n_jobs = static_cast<std::ptrdiff_t>(jobs.size());
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t j = 0; j < n_jobs; ++j) {
            const auto& job = jobs[static_cast<std::size_t>(j)];
            auto& rec = records[static_cast<std::size_t>(j)];
            rec.fold = f;
            rec.model = job.onn ? "onn" : "cnn";
            rec.restart = job.restart;
            rec.seed = fold_seed + job.restart;
            const NetworkSpec& spec = job.onn ? onn_spec : cnn_spec;
            TrainOptions options;
            options.epochs = config.epochs;
            options.optimizer = job.onn ? config.onn_optimizer : config.cnn_optimizer;
            options.seed = rec.seed;
            auto trained = train_network(spec, train, options);
            rec.diverged = trained.diverged;
            rec.curve = std::move(trained.epoch_psnr);
            if (!rec.diverged) {
                rec.train_psnr = trained.train_psnr;
                rec.test_psnr = mean_psnr(spec, trained.params, test);
                rec.params = std::move(trained.params);
            }
        }

        // Restarts are listed onn first, then cnn, each by restart index.
        std::stable_sort(records.begin(), records.end(), [](const RestartRecord& a, const RestartRecord& b) {
            return a.model > b.model;
        });
        auto select = [&](const std::string& model) -> RestartRecord* {
            RestartRecord* best = nullptr;
            for (auto& r : records)
                if (r.model == model && !r.diverged && (best == nullptr || r.train_psnr > best->train_psnr)) best = &r;
            if (best != nullptr) best->selected = true;
            return best;
        };
        for (const auto& r : records)
            if (r.diverged)
                result.diagnostics.push_back("fold " + std::to_string(f) + ": " + r.model + " restart " +
                                             std::to_string(r.restart) + " diverged");
        RestartRecord* onn = config.run_onn ? select("onn") : nullptr;
        RestartRecord* cnn = config.run_cnn ? select("cnn") : nullptr;
        if ((config.run_onn && onn == nullptr) || (config.run_cnn && cnn == nullptr)) {
            summary.failed = true;
            result.diagnostics.push_back("fold " + std::to_string(f) + ": failed, every restart of a model diverged");
        }
        if (onn != nullptr) {
            summary.onn_train = onn->train_psnr;
            summary.onn_test = onn->test_psnr;
            save_checkpoint(out_dir / ("fold" + std::to_string(f) + "_onn.ckpt"), onn_spec, onn->params);
        }
        if (cnn != nullptr) {
            summary.cnn_train = cnn->train_psnr;
            summary.cnn_test = cnn->test_psnr;
            save_checkpoint(out_dir / ("fold" + std::to_string(f) + "_cnn.ckpt"), cnn_spec, cnn->params);
        }
        if (onn != nullptr && cnn != nullptr) {
            summary.improvement_pct = percent_improvement(onn->test_psnr, cnn->test_psnr);
            const double target = cnn->curve.back();
            summary.onn_epochs_to_reach = epochs_to_reach(onn->curve, target);
            summary.cnn_epochs_to_reach = epochs_to_reach(cnn->curve, target);
            say("fold " + std::to_string(f) + ": onn test " + format_number(onn->test_psnr) + " dB, cnn test " +
                format_number(cnn->test_psnr) + " dB");
        }
        for (auto& r : records) {
            r.params = Parameters();
            result.records.push_back(std::move(r));
        }
        result.folds.push_back(std::move(summary));
    }

    std::ostringstream report;
    report << "fold,model,restart,seed,status,train_psnr,test_psnr,selected\n";
    std::ostringstream curves;
    curves << "fold,model,restart,epoch,train_psnr\n";
    for (const auto& r : result.records) {
        report << r.fold << ',' << r.model << ',' << r.restart << ',' << r.seed << ','
               << (r.diverged ? "diverged" : "ok") << ',' << (r.diverged ? "" : format_number(r.train_psnr)) << ','
               << (r.diverged ? "" : format_number(r.test_psnr)) << ',' << (r.selected ? 1 : 0) << '\n';
        for (std::size_t e = 0; e < r.curve.size(); ++e)
            curves << r.fold << ',' << r.model << ',' << r.restart << ',' << e + 1 << ',' << format_number(r.curve[e])
                   << '\n';
    }
    std::ostringstream folds;
    folds << "fold,status,input_test_psnr,onn_train_psnr,onn_test_psnr,cnn_train_psnr,cnn_test_psnr,"
             "improvement_pct,onn_epochs_to_reach,cnn_epochs_to_reach\n";
    const bool both = config.run_onn && config.run_cnn;
    for (const auto& s : result.folds) {
        auto num = [&](bool have, double v) { return have && !s.failed ? format_number(v) : std::string(); };
        folds << s.fold << ',' << (s.failed ? "failed" : "ok") << ',' << format_number(s.input_test) << ','
              << num(config.run_onn, s.onn_train) << ',' << num(config.run_onn, s.onn_test) << ','
              << num(config.run_cnn, s.cnn_train) << ',' << num(config.run_cnn, s.cnn_test) << ','
              << num(both, s.improvement_pct) << ',' << (both && !s.failed ? std::to_string(s.onn_epochs_to_reach) : "")
              << ',' << (both && !s.failed ? std::to_string(s.cnn_epochs_to_reach) : "") << '\n';
    }
    write_text(out_dir / "report.csv", report.str());
    write_text(out_dir / "curves.csv", curves.str());
    write_text(out_dir / "folds.csv", folds.str());
    std::string diag;
    for (const auto& d : result.diagnostics) diag += d + "\n";
    write_text(out_dir / "diagnostics.txt", diag);
    return result;
}

}  // namespace onn
