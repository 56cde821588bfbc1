#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "onn/config.hpp"

namespace onn {

enum ExitCode : int {
    kExitOk = 0,
    kExitCheckFailed = 1,  // gradcheck mismatch, or an unexpected error
    kExitConfig = 2,
    kExitData = 3,
    kExitNumerical = 4,
};

/// Images from the configured directory, or the procedural corpus when none is set.
std::vector<Tensor> load_images(const ExperimentConfig& config, std::ostream& log);

int cmd_corpus(const std::filesystem::path& dir, std::size_t count, std::size_t rows, std::size_t cols,
               std::uint64_t seed, std::ostream& log);
int cmd_prepare(const ExperimentConfig& config, std::ostream& log);
int cmd_spm(const ExperimentConfig& config, std::ostream& log);
int cmd_train(const ExperimentConfig& config, const std::optional<std::filesystem::path>& assignment_file,
              std::ostream& log);
int cmd_gradcheck(const ExperimentConfig& config, std::ostream& log);

struct ModelStats {
    std::size_t folds = 0;
    double train_mean = 0.0, train_std = 0.0;
    double test_mean = 0.0, test_std = 0.0;
};

struct ReportSummary {
    std::map<std::string, ModelStats> models;          // selected restarts only
    std::map<std::size_t, std::map<std::string, double>> fold_test;  // fold -> column -> test PSNR
    std::vector<std::size_t> missing_folds;            // expected but without a selected row per model
    std::vector<std::string> baseline_columns;
    bool complete() const { return missing_folds.empty(); }
    std::string text() const;
    std::string csv() const;
};

/// Aggregates a report.csv body. Baseline CSV: a fold column plus one test PSNR column per method.
/// std is the sample standard deviation (n - 1).
ReportSummary summarize_report(const std::string& report_csv, std::size_t expected_folds,
                               const std::string& baseline_csv = {});

/// Reads run_dir/report.csv (folds from run_dir/manifest.txt when expected_folds is 0),
/// writes summary.txt and summary.csv next to it.
int cmd_report(const std::filesystem::path& run_dir, const std::optional<std::filesystem::path>& baseline,
               std::size_t expected_folds, std::ostream& log);

/// Maps an exception to an exit code and prints it.
int report_error(const std::exception& e, std::ostream& err);

}  // namespace onn
