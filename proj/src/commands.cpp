#include "onn/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "onn/checkpoint.hpp"
#include "onn/dataset.hpp"
#include "onn/errors.hpp"
#include "onn/image_io.hpp"

namespace onn {

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f << text;
    if (!f) throw DataError("write failed for " + path.string());
}

std::string read_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.emplace_back();
        rows.push_back(std::move(cells));
    }
    return rows;
}

double parse_cell(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError(what + ": not a number '" + s + "'");
    }
}

std::size_t column(const std::vector<std::string>& header, const std::string& name, const std::string& file) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(file + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    sd = v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0;
}

std::vector<Sample> probe_samples(const ExperimentConfig& config, const std::vector<Tensor>& images) {
    const auto plan = FoldPlan::create(images.size(), config.protocol.plan_folds, config.seed);
    std::vector<std::size_t> idx = plan.folds[0].train;
    if (idx.size() > config.spm_probe) idx.resize(config.spm_probe);
    NoiseModel noise = config.noise;
    noise.seed = config.seed;
    return make_samples(images, idx, noise);
}

}  // namespace

std::vector<Tensor> load_images(const ExperimentConfig& config, std::ostream& log) {
    if (config.dataset.empty()) {
        log << "using " << config.images << " procedural images (corpus seed " << config.corpus_seed << ")\n";
        return synthetic_corpus(config.images, config.arch.rows, config.arch.cols, config.corpus_seed);
    }
    std::vector<std::string> warnings;
    auto images = load_dataset(config.dataset, {config.images, config.arch.rows, config.arch.cols}, &warnings);
    for (const auto& w : warnings) log << "warning: " << w << "\n";
    log << "loaded " << images.size() << " images from " << config.dataset.string() << "\n";
    return images;
}

int cmd_corpus(const fs::path& dir, std::size_t count, std::size_t rows, std::size_t cols, std::uint64_t seed,
               std::ostream& log) {
    if (count == 0 || rows == 0 || cols == 0) throw ConfigError("corpus needs a positive count and size");
    write_images(dir, synthetic_corpus(count, rows, cols, seed));
    log << "wrote " << count << " images to " << dir.string() << "\n";
    return kExitOk;
}

int cmd_prepare(const ExperimentConfig& config, std::ostream& log) {
    const auto images = load_images(config, log);
    fs::create_directories(config.out);
    std::size_t replaced = 0;
    std::vector<Tensor> noisy;
    noisy.reserve(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        Tensor n = corrupt(images[i], config.noise, i, &replaced);
        for (double& v : n.values()) v = std::clamp(v, 0.0, 1.0);
        noisy.push_back(std::move(n));
    }
    write_images(config.out / "clean", images);
    write_images(config.out / "noisy", noisy);

    std::size_t pixels = 0;
    double mse = 0.0;
    for (std::size_t i = 0; i < images.size(); ++i) {
        pixels += images[i].size();
        for (std::size_t k = 0; k < images[i].size(); ++k) mse += (noisy[i][k] - images[i][k]) * (noisy[i][k] - images[i][k]);
    }
    std::ostringstream m;
    m << "[prepare]\nimages = " << images.size() << "\nrows = " << config.arch.rows << "\ncols = " << config.arch.cols
      << "\nsource = " << (config.dataset.empty() ? "procedural corpus" : config.dataset.string())
      << "\ncorpus_seed = " << config.corpus_seed << "\n\n[noise]\nkind = " << to_string(config.noise.kind)
      << "\nseed = " << config.noise.seed << "\nstream = (seed, image index)\n";
    if (config.noise.kind == NoiseKind::Impulse)
        m << "p = " << format_number(config.noise.p) << "\nreplaced_pixels = " << replaced
          << "\nempirical_rate = " << format_number(static_cast<double>(replaced) / static_cast<double>(pixels)) << "\n";
    else
        m << "shape = " << config.noise.shape << "\nstored = clamped to [0, 1]\n";
    m << "pixels = " << pixels << "\nnoisy_mse = " << format_number(mse / static_cast<double>(pixels)) << "\n";
    write_file(config.out / "manifest.txt", m.str());
    log << m.str();
    return kExitOk;
}

int cmd_spm(const ExperimentConfig& config, std::ostream& log) {
    const auto images = load_images(config, log);
    const auto probe = probe_samples(config, images);
    fs::create_directories(config.out);
    SpmHooks hooks;
    hooks.on_run = [&](std::size_t run, const HealthLedger& partial) {
        write_file(config.out / "spm_ledger_partial.csv", ledger_csv(partial));
        log << "spm run " << run + 1 << "/" << config.spm.runs << " done\n" << std::flush;
    };
    SpmConfig spm = config.spm;
    spm.optimizer = config.protocol.onn_optimizer;
    const auto result = run_spm(config.arch, config.library, spm, probe, config.seed, hooks);
    const auto elite = configure_elite(config.arch, result.ledger, spm.top_k);
    write_file(config.out / "spm_ledger.csv", ledger_csv(result.ledger));
    write_file(config.out / "spm_ledger.txt", ledger_report(result.ledger));
    write_file(config.out / "elite_assignment.json", assignment_to_string(elite));
    std::string diag;
    for (const auto& d : result.diagnostics) diag += d + "\n";
    write_file(config.out / "spm_diagnostics.txt", diag);
    write_file(config.out / "config.ini", config.to_ini());
    fs::remove(config.out / "spm_ledger_partial.csv");
    log << ledger_report(result.ledger);
    return kExitOk;
}

int cmd_train(const ExperimentConfig& config, const std::optional<fs::path>& assignment_file, std::ostream& log) {
    ProtocolConfig protocol = config.protocol;
    if (assignment_file) {
        Assignment a;
        try {
            a = assignment_from_string(read_file(*assignment_file));
        } catch (const DataError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError("assignment file " + assignment_file->string() + ": " + e.what());
        }
        protocol.assignment = std::move(a);
    }
    protocol.validate(config.arch, config.images);
    const auto images = load_images(config, log);
    fs::create_directories(config.out);
    write_file(config.out / "config.ini", config.to_ini());
    const auto result = run_protocol(images, config.arch, config.noise, protocol, config.out,
                                     [&](const std::string& m) { log << m << "\n" << std::flush; });
    log << read_file(config.out / "folds.csv");
    for (const auto& f : result.folds)
        if (f.failed) return kExitNumerical;
    return kExitOk;
}

int cmd_gradcheck(const ExperimentConfig& config, std::ostream& log) {
    const auto report = run_gradcheck(config.library, config.gradcheck);
    log << report.text();
    return report.passed() ? kExitOk : kExitCheckFailed;
}

ReportSummary summarize_report(const std::string& report_csv, std::size_t expected_folds, const std::string& baseline_csv) {
    const auto rows = parse_csv(report_csv);
    if (rows.empty()) throw DataError("report.csv is empty");
    const auto& h = rows.front();
    const auto c_fold = column(h, "fold", "report.csv"), c_model = column(h, "model", "report.csv"),
               c_train = column(h, "train_psnr", "report.csv"), c_test = column(h, "test_psnr", "report.csv"),
               c_sel = column(h, "selected", "report.csv");

    ReportSummary out;
    std::map<std::string, std::vector<double>> train, test;
    std::map<std::string, std::set<std::size_t>> seen;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != h.size()) throw DataError("report.csv row " + std::to_string(r + 1) + " has the wrong width");
        if (row[c_sel] != "1") continue;
        const auto fold = static_cast<std::size_t>(parse_cell(row[c_fold], "fold"));
        const auto& model = row[c_model];
        if (!seen[model].insert(fold).second)
            throw DataError("report.csv: two selected " + model + " rows for fold " + std::to_string(fold));
        train[model].push_back(parse_cell(row[c_train], "train_psnr"));
        test[model].push_back(parse_cell(row[c_test], "test_psnr"));
        out.fold_test[fold][model] = test[model].back();
    }
    for (const auto& [model, v] : train) {
        auto& s = out.models[model];
        s.folds = v.size();
        mean_std(v, s.train_mean, s.train_std);
        mean_std(test[model], s.test_mean, s.test_std);
    }
    for (std::size_t f = 0; f < expected_folds; ++f)
        for (const auto& [model, folds] : seen)
            if (!folds.count(f)) {
                out.missing_folds.push_back(f);
                break;
            }
    if (seen.empty())
        for (std::size_t f = 0; f < expected_folds; ++f) out.missing_folds.push_back(f);

    if (!baseline_csv.empty()) {
        const auto b = parse_csv(baseline_csv);
        if (b.empty()) throw DataError("baseline csv is empty");
        const auto b_fold = column(b.front(), "fold", "baseline csv");
        for (std::size_t c = 0; c < b.front().size(); ++c)
            if (c != b_fold) out.baseline_columns.push_back(b.front()[c]);
        std::map<std::string, std::vector<double>> base;
        for (std::size_t r = 1; r < b.size(); ++r) {
            if (b[r].size() != b.front().size()) throw DataError("baseline csv row " + std::to_string(r + 1) + " has the wrong width");
            const auto fold = static_cast<std::size_t>(parse_cell(b[r][b_fold], "baseline fold"));
            for (std::size_t c = 0; c < b[r].size(); ++c) {
                if (c == b_fold || b[r][c].empty()) continue;
                const double v = parse_cell(b[r][c], "baseline " + b.front()[c]);
                out.fold_test[fold][b.front()[c]] = v;
                base[b.front()[c]].push_back(v);
            }
        }
        for (const auto& [name, v] : base) {
            auto& s = out.models[name];
            s.folds = v.size();
            mean_std(v, s.test_mean, s.test_std);
            s.train_mean = s.train_std = NAN;
        }
    }
    return out;
}

std::string ReportSummary::text() const {
    std::ostringstream os;
    char line[200];
    std::snprintf(line, sizeof line, "%-16s %5s %22s %22s\n", "model", "folds", "train psnr (dB)", "test psnr (dB)");
    os << line;
    for (const auto& [name, s] : models) {
        const std::string tr = std::isnan(s.train_mean) ? std::string("-")
                                                        : format_number(s.train_mean) + " +- " + format_number(s.train_std);
        std::snprintf(line, sizeof line, "%-16s %5zu %22s %22s\n", name.c_str(), s.folds, tr.c_str(),
                      (format_number(s.test_mean) + " +- " + format_number(s.test_std)).c_str());
        os << line;
    }
    const auto onn = models.find("onn");
    if (onn != models.end()) {
        os << "\ntest psnr improvement of onn over:\n";
        for (const auto& [name, s] : models) {
            if (name == "onn") continue;
            os << "  " << name << ": " << format_number(percent_improvement(onn->second.test_mean, s.test_mean))
               << " %\n";
        }
    }
    if (!missing_folds.empty()) {
        os << "\nINCOMPLETE: missing folds";
        for (auto f : missing_folds) os << ' ' << f;
        os << "\n";
    }
    return os.str();
}

std::string ReportSummary::csv() const {
    std::ostringstream os;
    os << "model,folds,train_mean,train_std,test_mean,test_std,onn_improvement_pct\n";
    const auto onn = models.find("onn");
    for (const auto& [name, s] : models) {
        os << name << ',' << s.folds << ',' << (std::isnan(s.train_mean) ? "" : format_number(s.train_mean)) << ','
           << (std::isnan(s.train_std) ? "" : format_number(s.train_std)) << ',' << format_number(s.test_mean) << ','
           << format_number(s.test_std) << ','
           << (onn != models.end() && name != "onn" ? format_number(percent_improvement(onn->second.test_mean, s.test_mean))
                                                    : "")
           << '\n';
    }
    return os.str();
}

int cmd_report(const fs::path& run_dir, const std::optional<fs::path>& baseline, std::size_t expected_folds,
               std::ostream& log) {
    if (expected_folds == 0 && fs::exists(run_dir / "manifest.txt")) {
        const auto doc = IniDocument::load(run_dir / "manifest.txt");
        const auto it = doc.values().find("protocol.folds");
        if (it != doc.values().end()) expected_folds = static_cast<std::size_t>(parse_cell(it->second, "manifest folds"));
    }
    const auto summary = summarize_report(read_file(run_dir / "report.csv"), expected_folds,
                                          baseline ? read_file(*baseline) : std::string());
    write_file(run_dir / "summary.txt", summary.text());
    write_file(run_dir / "summary.csv", summary.csv());
    log << summary.text();
    return summary.complete() ? kExitOk : kExitData;
}

int report_error(const std::exception& e, std::ostream& err) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const std::invalid_argument*>(&e)) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    }
    if (dynamic_cast<const NumericalError*>(&e)) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    }
    err << "error: " << e.what() << "\n";
    return kExitCheckFailed;
}

}  // namespace onn
