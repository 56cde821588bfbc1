#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "onn/network.hpp"
#include "onn/operators.hpp"

namespace onn {

struct GradcheckConfig {
    std::size_t configs_per_set = 20;
    std::size_t max_extent = 8;   // input rows/cols drawn from [3, max_extent]
    double step = 1e-5;           // five-point stencil step
    double tolerance = 1e-5;      // on the relative error
    double scale_floor = 1e-3;    // denominator floor for gradients near zero
    double tie_margin = 0.0;       // optional: also exclude draws with pool candidates or LinCut kinks this close
    std::size_t max_draws = 2000;  // per set, including excluded draws
    std::uint64_t seed = 0;
};

/// Two-layer network with every neuron assigned `set` (channel counts and image size as given).
NetworkSpec gradcheck_network(const OperatorSet& set, std::size_t inputs, std::size_t hidden, std::size_t outputs,
                              std::size_t rows, std::size_t cols);

/// True when a Median/Max pool has two distinct candidates within margin of the pooled
/// value, or a LinCut pre-activation lies within margin of a kink. Zero-padding taps tie
/// structurally and are ignored.
bool near_tie(const NetworkSpec& spec, const Parameters& params, std::span<const Tensor> inputs, double margin);

/// Sets every bias so the neuron's pre-activation has zero mean on `inputs`, layer by layer,
/// keeping LinCut and saturating nonlinearities away from their flat regions.
void center_biases(const NetworkSpec& spec, Parameters& params, std::span<const Tensor> inputs);

struct ParameterCheck {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    bool regime_changed = false;  // some +-step evaluation switched a pool selection or LinCut region
};

/// Compares network_backward against five-point differences of L = sum_k <R_k, out_k>.
/// A check whose perturbations switch a pool selection or a LinCut region (a tie point) is
/// flagged and abandoned rather than trusted.
ParameterCheck check_parameters(const NetworkSpec& spec, const Parameters& params, std::span<const Tensor> inputs,
                                std::span<const Tensor> projections, const GradcheckConfig& config);

struct SetReport {
    OperatorSet set;
    std::size_t target = 0;
    std::size_t checked = 0;
    std::size_t excluded = 0;  // draws rejected as tie points or kink crossings
    std::size_t failures = 0;
    double max_rel_error = 0.0;
    std::string worst;  // description of the worst parameter
    bool passed() const { return failures == 0 && checked > 0 && checked >= target; }
};

struct GradcheckReport {
    std::vector<SetReport> sets;
    bool passed() const;
    std::string text() const;
};

/// Throws ConfigError on an empty library.
GradcheckReport run_gradcheck(const OperatorLibrary& library, const GradcheckConfig& config);

}  // namespace onn
