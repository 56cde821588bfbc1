#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "onn/dataset.hpp"
#include "onn/network.hpp"
#include "onn/noise.hpp"
#include "onn/optim.hpp"
#include "onn/spm.hpp"

namespace onn {

struct ProtocolConfig {
    std::size_t plan_folds = 10;  // partition size: each fold trains on images/plan_folds
    std::size_t folds = 10;       // folds actually run, first n of the plan
    std::size_t restarts = 3;
    std::size_t epochs = 100;
    std::uint64_t seed = 0;
    bool run_onn = true;
    bool run_cnn = true;
    OptimizerConfig onn_optimizer{OptimizerKind::VarianceAdam};
    OptimizerConfig cnn_optimizer{OptimizerKind::Adam};
    ActivationKind cnn_activation = ActivationKind::Tanh;

    // Elite ONN: a fixed assignment, or an SPM search on each fold's training images.
    std::optional<Assignment> assignment;
    OperatorLibrary library;
    SpmConfig spm;
    std::size_t spm_probe = 30;  // training images of the fold used as the probe set

    void validate(const Architecture& arch, std::size_t images) const;
};

struct RestartRecord {
    std::size_t fold = 0;
    std::string model;  // "onn" | "cnn"
    std::size_t restart = 0;
    std::uint64_t seed = 0;
    bool diverged = false;
    bool selected = false;
    double train_psnr = 0.0;
    double test_psnr = 0.0;
    std::vector<double> curve;  // running train PSNR per epoch
    Parameters params;
};

struct FoldSummary {
    std::size_t fold = 0;
    bool failed = false;  // some model had every restart diverge
    double onn_train = 0.0, onn_test = 0.0;
    double cnn_train = 0.0, cnn_test = 0.0;
    double input_test = 0.0;  // noisy input vs clean
    double improvement_pct = 0.0;
    // Epochs until the running train PSNR first reaches the CNN's final running value;
    // epochs + 1 when never reached.
    std::size_t onn_epochs_to_reach = 0;
    std::size_t cnn_epochs_to_reach = 0;
    Assignment onn_assignment;
};

struct ProtocolResult {
    std::vector<RestartRecord> records;
    std::vector<FoldSummary> folds;
    std::vector<std::string> diagnostics;
};

using ProtocolLog = std::function<void(const std::string&)>;

/// Cross-validated ONN vs equivalent-CNN comparison. Writes report.csv, curves.csv,
/// folds.csv, per-fold assignment and ledger files, manifest.txt and schema.txt into out_dir.
ProtocolResult run_protocol(const std::vector<Tensor>& clean, const Architecture& arch, const NoiseModel& noise,
                            const ProtocolConfig& config, const std::filesystem::path& out_dir,
                            const ProtocolLog& log = {});

/// First epoch (1-based) whose value reaches target; curve.size() + 1 when none does.
std::size_t epochs_to_reach(const std::vector<double>& curve, double target);

/// 100 (onn - cnn) / cnn.
double percent_improvement(double onn, double cnn);

std::string format_number(double v);

}  // namespace onn
