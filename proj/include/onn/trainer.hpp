#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "onn/dataset.hpp"
#include "onn/network.hpp"
#include "onn/optim.hpp"

namespace onn {

/// Called with the gradient buffer before each update; may zero entries to freeze them.
using GradientMask = std::function<void(Parameters& grads)>;

/// One-sample-per-iteration training loop state.
class Trainer {
public:
    Trainer(const NetworkSpec& spec, Parameters params, const OptimizerConfig& optimizer);

    struct Step {
        double loss;
        double psnr;  // of the pre-update prediction against the clean image
    };

    /// Throws NumericalError when the loss or the updated parameters are not finite.
    Step step(const Sample& sample);

    void set_gradient_mask(GradientMask mask) { mask_ = std::move(mask); }
    const Parameters& params() const { return params_; }
    const NetworkSpec& spec() const { return spec_; }
    std::uint64_t iterations() const { return iterations_; }

private:
    NetworkSpec spec_;
    Parameters params_;
    Optimizer optimizer_;
    GradientMask mask_;
    std::uint64_t iterations_ = 0;
};

Tensor denoise(const NetworkSpec& spec, const Parameters& params, const Tensor& network_input);

/// Mean PSNR (dB, [0, 1] range) of the network's outputs against the clean images.
double mean_psnr(const NetworkSpec& spec, const Parameters& params, std::span<const Sample> samples);
/// Mean PSNR of the (clamped) noisy inputs against the clean images.
double mean_input_psnr(std::span<const Sample> samples);

struct TrainOptions {
    std::size_t epochs = 100;
    OptimizerConfig optimizer;
    std::uint64_t seed = 0;
};

struct TrainResult {
    Parameters params;
    std::vector<double> epoch_psnr;  // running train PSNR per epoch
    double train_psnr = 0.0;         // full pass over the train set after the last epoch
    bool diverged = false;
};

/// Initialises from seed, trains for options.epochs over shuffled samples.
TrainResult train_network(const NetworkSpec& spec, std::span<const Sample> samples, const TrainOptions& options);

/// Sample visiting order for one epoch, derived from (seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, std::uint64_t epoch);

}  // namespace onn
