#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "onn/operators.hpp"
#include "onn/tensor.hpp"

namespace onn {

struct NeuronSpec {
    OperatorSet operators;
    KernelShape kernel;
    friend bool operator==(const NeuronSpec&, const NeuronSpec&) = default;
};

struct LayerSpec {
    std::vector<NeuronSpec> neurons;
    std::size_t input_count = 1;
    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetworkSpec {
    std::vector<LayerSpec> layers;
    std::size_t input_rows = 60;
    std::size_t input_cols = 60;

    std::size_t input_count() const { return layers.empty() ? 0 : layers.front().input_count; }
    std::size_t output_count() const { return layers.empty() ? 0 : layers.back().neurons.size(); }
    /// Throws std::invalid_argument on empty layers, even kernels or fan-in/fan-out mismatch.
    void validate() const;
    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Operator sets per hidden layer, per neuron.
using Assignment = std::vector<std::vector<OperatorSet>>;

/// Shape-only description of a denoising network: hidden widths plus a linear single-map output.
struct Architecture {
    std::vector<std::size_t> hidden{12, 12};
    KernelShape kernel{3, 3};
    std::size_t rows = 60;
    std::size_t cols = 60;
};

NetworkSpec make_network(const Architecture& arch, const Assignment& hidden_sets);
/// Every hidden neuron (mul, sum, activation); linear output.
NetworkSpec make_convolutional(const Architecture& arch, ActivationKind hidden_activation = ActivationKind::Tanh);
Assignment assignment_of(const NetworkSpec& spec);  // hidden layers only

std::size_t parameter_count(const NetworkSpec& spec);

/// Flat parameter buffer: all kernels w_l^(a,b) of a layer (input-major), then that layer's biases.
class Parameters {
public:
    Parameters() = default;
    explicit Parameters(const NetworkSpec& spec);

    std::size_t size() const { return values_.size(); }
    std::span<const double> values() const { return values_; }
    /// Mutable access invalidates any forward trace taken on these parameters.
    std::span<double> mutable_values() {
        ++generation_;
        return values_;
    }
    std::uint64_t generation() const { return generation_; }

    std::span<const double> weight(std::size_t layer, std::size_t input, std::size_t output) const;
    std::span<double> weight(std::size_t layer, std::size_t input, std::size_t output);
    double bias(std::size_t layer, std::size_t output) const;
    double& bias(std::size_t layer, std::size_t output);

    std::size_t weight_offset(std::size_t layer, std::size_t input, std::size_t output) const;
    std::size_t bias_offset(std::size_t layer, std::size_t output) const;
    std::size_t layer_count() const { return outputs_.size(); }
    std::size_t inputs(std::size_t layer) const { return inputs_[layer]; }
    std::size_t outputs(std::size_t layer) const { return outputs_[layer]; }

    void fill(double v);
    bool all_finite() const;
    bool same_layout(const Parameters& other) const;

private:
    std::vector<double> values_;
    std::vector<std::vector<std::size_t>> weight_offsets_;  // [layer][a*out+b]
    std::vector<std::vector<std::size_t>> weight_sizes_;
    std::vector<std::size_t> bias_offsets_;
    std::vector<std::size_t> inputs_;
    std::vector<std::size_t> outputs_;
    std::uint64_t generation_ = 0;
};

/// Uniform init in [-s, s] with s = sqrt(1 / (fan_in * m * n)); biases start at zero.
Parameters initialize_parameters(const NetworkSpec& spec, std::mt19937_64& rng);

/// Per-connection record kept between forward and backward. Per-tap arrays are tap-major.
struct ConnectionTrace {
    std::vector<std::uint32_t> selected;  // Median/Max: pooled tap per pixel
    std::vector<double> dg;               // builtin non-separable Sum: g'(s) per tap and pixel
    std::vector<double> d_dy;             // custom nodal Sum: cached partials
    std::vector<double> d_dw;
};

struct LayerTrace {
    std::vector<Tensor> patches;                 // tap-major patches, [slot*inputs + a]
    std::vector<KernelShape> kernels;            // distinct kernel shapes of the layer
    std::vector<std::size_t> kernel_slot;        // neuron -> index into kernels
    std::vector<std::vector<double>> separable;  // [(slot*inputs + a)*kinds + kind] h(Y), filled on demand
    std::vector<std::vector<double>> pre_activation;  // per neuron
    std::vector<ConnectionTrace> connections;         // [a*out+b]
    std::size_t rows = 0;
    std::size_t cols = 0;

    const Tensor& patch(std::size_t input, std::size_t neuron) const {
        return patches[kernel_slot[neuron] * (patches.size() / kernels.size()) + input];
    }
};

struct ForwardTrace {
    std::vector<LayerTrace> layers;
    const Parameters* params = nullptr;
    std::uint64_t generation = 0;
    bool valid() const { return params != nullptr; }
};

enum class Pass { Inference, Training };

struct LayerOutput {
    std::vector<Tensor> maps;
    LayerTrace trace;
};

LayerOutput layer_forward(std::span<const Tensor> inputs, const LayerSpec& layer, const Parameters& params,
                          std::size_t layer_index, Pass pass = Pass::Training);

struct LayerGrads {
    std::vector<Tensor> input_grads;
};

/// Backward through one layer. Weight and bias gradients are accumulated into grads.
LayerGrads layer_backward(const LayerTrace& trace, const LayerSpec& layer, const Parameters& params,
                          std::size_t layer_index, std::span<const Tensor> upstream, Parameters& grads,
                          bool need_input_grads = true);

struct NetworkOutput {
    Tensor output;  // first output map
    std::vector<Tensor> maps;
    ForwardTrace trace;
};

NetworkOutput network_forward(const Tensor& input, const NetworkSpec& spec, const Parameters& params,
                              Pass pass = Pass::Training);
NetworkOutput network_forward(std::span<const Tensor> inputs, const NetworkSpec& spec, const Parameters& params,
                              Pass pass = Pass::Training);

struct NetworkGrads {
    Parameters params;
    std::vector<Tensor> input_grads;
};

/// Requires the trace of the immediately preceding Training forward on the same, unmodified params.
NetworkGrads network_backward(const ForwardTrace& trace, const NetworkSpec& spec, const Parameters& params,
                              std::span<const Tensor> output_grads, bool need_input_grads = false);

struct Loss {
    double value = 0.0;
    Tensor grad;
};

Loss mse_loss(const Tensor& prediction, const Tensor& target);

}  // namespace onn
