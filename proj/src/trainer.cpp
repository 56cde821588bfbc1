#include "onn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "onn/errors.hpp"

namespace onn {

Trainer::Trainer(const NetworkSpec& spec, Parameters params, const OptimizerConfig& optimizer)
    : spec_(spec), params_(std::move(params)), optimizer_(optimizer, params_.size()) {
    if (!Parameters(spec_).same_layout(params_)) throw std::invalid_argument("Trainer: parameters do not match spec");
}

Trainer::Step Trainer::step(const Sample& sample) {
    auto fwd = network_forward(sample.input, spec_, params_, Pass::Training);
    const auto loss = mse_loss(fwd.output, sample.target);
    if (!std::isfinite(loss.value)) throw NumericalError("non-finite training loss");
    const double p = psnr(to_image_range(fwd.output), sample.clean);

    auto grads = network_backward(fwd.trace, spec_, params_, std::span<const Tensor>(&loss.grad, 1));
    if (mask_) mask_(grads.params);
    optimizer_.step(params_.mutable_values(), grads.params.values());
    if (!params_.all_finite()) throw NumericalError("non-finite parameters after update");
    ++iterations_;
    return {loss.value, p};
}

Tensor denoise(const NetworkSpec& spec, const Parameters& params, const Tensor& network_input) {
    return to_image_range(network_forward(network_input, spec, params, Pass::Inference).output);
}

double mean_psnr(const NetworkSpec& spec, const Parameters& params, std::span<const Sample> samples) {
    if (samples.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& s : samples) sum += psnr(denoise(spec, params, s.input), s.clean);
    return sum / static_cast<double>(samples.size());
}

double mean_input_psnr(std::span<const Sample> samples) {
    if (samples.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& s : samples) sum += psnr(to_image_range(s.input), s.clean);
    return sum / static_cast<double>(samples.size());
}

std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, std::uint64_t epoch) {
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_rng(seed, {0x73687566ULL, epoch});
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

TrainResult train_network(const NetworkSpec& spec, std::span<const Sample> samples, const TrainOptions& options) {
    if (samples.empty()) throw DataError("no training samples");
    auto init_rng = make_rng(options.seed, {0x696e6974ULL});
    Trainer trainer(spec, initialize_parameters(spec, init_rng), options.optimizer);

    TrainResult result;
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        double sum = 0.0;
        try {
            for (auto i : epoch_order(samples.size(), options.seed, epoch)) sum += trainer.step(samples[i]).psnr;
        } catch (const NumericalError&) {
            result.diverged = true;
            break;
        }
        result.epoch_psnr.push_back(sum / static_cast<double>(samples.size()));
    }
    result.params = trainer.params();
    if (!result.diverged) result.train_psnr = mean_psnr(spec, result.params, samples);
    return result;
}

}  // namespace onn
