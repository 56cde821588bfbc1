#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "onn/dataset.hpp"
#include "onn/network.hpp"
#include "onn/noise.hpp"
#include "onn/operators.hpp"
#include "onn/optim.hpp"
#include "onn/trainer.hpp"

namespace onn {

/// Which gamma-windows of a run feed the health factor.
enum class HealthWindow { Last, All };

std::string_view to_string(HealthWindow window);
HealthWindow parse_window(std::string_view name);

struct SpmConfig {
    std::size_t gamma = 80;        // monitoring interval, in training iterations (one sample each)
    std::size_t runs = 4;          // R
    std::size_t top_k = 3;         // K, heterogeneity factor
    std::size_t confinement = 2;   // runs with random assignment before guided draws start
    std::size_t iterations = 320;  // M_iters per run
    HealthWindow window = HealthWindow::Last;
    OptimizerConfig optimizer{OptimizerKind::VarianceAdam};
    std::size_t max_redraws = 3;  // per run, after a diverged attempt

    /// Throws ConfigError when the settings are inconsistent with the library.
    void validate(const OperatorLibrary& library) const;
};

/// Per hidden layer, per operator set: the rho samples of every run that used the set.
class HealthLedger {
public:
    HealthLedger() = default;
    HealthLedger(std::size_t layers, OperatorLibrary library);

    struct LayerCredit {
        std::size_t set;  // index into the library
        double rho;
    };

    /// Adds one run: per layer, the mean rho of each operator set that run used.
    void add_run(const std::vector<std::vector<LayerCredit>>& credits, std::size_t degenerate = 0);

    /// Accumulated efficacy: sum over runs, added in ascending order so the result
    /// does not depend on the order runs were merged.
    double score(std::size_t layer, std::size_t set) const;
    std::span<const double> samples(std::size_t layer, std::size_t set) const { return samples_[layer][set]; }
    bool scored(std::size_t layer, std::size_t set) const { return !samples_[layer][set].empty(); }

    /// score / sum of scores in the layer; uniform when the layer total is zero.
    std::vector<double> probabilities(std::size_t layer) const;
    /// Scored sets by descending score, ties in lexicographic operator-id order.
    std::vector<std::size_t> ranking(std::size_t layer) const;

    std::size_t layers() const { return samples_.size(); }
    std::size_t runs() const { return runs_; }
    std::size_t degenerate_baselines() const { return degenerate_; }
    const OperatorLibrary& library() const { return library_; }

private:
    OperatorLibrary library_;
    std::vector<std::vector<std::vector<double>>> samples_;  // [layer][set][run]
    std::size_t runs_ = 0;
    std::size_t degenerate_ = 0;
};

Assignment assign_random(const Architecture& arch, const OperatorLibrary& library, Rng& rng);
/// Per layer, draws each neuron's set with probability score / layer total
/// (uniform over the library when the layer has no credit yet).
Assignment assign_guided(const Architecture& arch, const HealthLedger& ledger, Rng& rng);

inline constexpr double kHealthFloor = 1e-12;

struct HealthFactor {
    double rho = 0.0;
    bool degenerate = false;  // zero baseline power; rho = sigma2(t) / kHealthFloor
};

/// Relative change of kernel power between two snapshots. Each entry of before/after is
/// one outgoing kernel of the neuron; its variance over the kernel elements is averaged
/// across the fan-out before the ratio is taken.
HealthFactor health_factor(std::span<const std::span<const double>> before,
                           std::span<const std::span<const double>> after);

/// Population variance of a kernel.
double kernel_variance(std::span<const double> kernel);

/// Gradient mask that zeroes every outgoing kernel of neurons assigned `frozen`.
GradientMask freeze_outgoing(const NetworkSpec& spec, const OperatorSet& frozen);

struct SpmHooks {
    /// Optional mask applied in every run (built from that run's network).
    std::function<GradientMask(const NetworkSpec&)> mask;
    /// Called after each completed run with the ledger so far.
    std::function<void(std::size_t run, const HealthLedger&)> on_run;
};

struct SpmRun {
    Assignment assignment;
    std::size_t attempts = 1;
    bool guided = false;
};

struct SpmResult {
    HealthLedger ledger;
    std::vector<SpmRun> runs;
    std::vector<std::string> diagnostics;
};

/// R probe trainings of M_iters iterations each over `samples`, crediting each hidden
/// neuron's operator set with the health factor of its outgoing weights.
SpmResult run_spm(const Architecture& arch, const OperatorLibrary& library, const SpmConfig& config,
                  std::span<const Sample> samples, std::uint64_t seed, const SpmHooks& hooks = {});

/// Top-K sets per layer with neurons allocated in proportion to their scores
/// (largest remainder; each chosen set gets at least one neuron when there are enough).
Assignment configure_elite(const Architecture& arch, const HealthLedger& ledger, std::size_t top_k);

/// Neuron counts per set for one layer, in ranking order.
std::vector<std::size_t> allocate_neurons(std::span<const double> scores, std::size_t neurons);

std::string ledger_report(const HealthLedger& ledger);
std::string ledger_csv(const HealthLedger& ledger);

}  // namespace onn
