#include "onn/network.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "onn/kernels.hpp"

namespace onn {

void NetworkSpec::validate() const {
    if (layers.empty()) throw std::invalid_argument("network has no layers");
    if (input_rows == 0 || input_cols == 0) throw std::invalid_argument("network input shape must be positive");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        const std::string where = "layer " + std::to_string(l);
        if (layer.neurons.empty()) throw std::invalid_argument(where + " has no neurons");
        if (layer.input_count == 0) throw std::invalid_argument(where + " has no inputs");
        if (l > 0 && layer.input_count != layers[l - 1].neurons.size())
            throw std::invalid_argument(where + " fan-in does not match previous layer width");
        for (const auto& n : layer.neurons)
            if (n.kernel.rows % 2 == 0 || n.kernel.cols % 2 == 0 || n.kernel.rows == 0 || n.kernel.cols == 0)
                throw std::invalid_argument(where + " has a kernel with even or zero extent");
    }
}

NetworkSpec make_network(const Architecture& arch, const Assignment& hidden_sets) {
    if (hidden_sets.size() != arch.hidden.size())
        throw std::invalid_argument("assignment has " + std::to_string(hidden_sets.size()) +
                                    " layers, architecture has " + std::to_string(arch.hidden.size()));
    NetworkSpec spec;
    spec.input_rows = arch.rows;
    spec.input_cols = arch.cols;
    std::size_t fan_in = 1;
    for (std::size_t l = 0; l < arch.hidden.size(); ++l) {
        if (hidden_sets[l].size() != arch.hidden[l])
            throw std::invalid_argument("assignment for hidden layer " + std::to_string(l) + " has " +
                                        std::to_string(hidden_sets[l].size()) + " neurons, expected " +
                                        std::to_string(arch.hidden[l]));
        LayerSpec layer;
        layer.input_count = fan_in;
        for (const auto& set : hidden_sets[l]) layer.neurons.push_back({set, arch.kernel});
        spec.layers.push_back(std::move(layer));
        fan_in = arch.hidden[l];
    }
    LayerSpec output;
    output.input_count = fan_in;
    output.neurons.push_back({convolution_set(ActivationKind::Identity), arch.kernel});
    spec.layers.push_back(std::move(output));
    spec.validate();
    return spec;
}

NetworkSpec make_convolutional(const Architecture& arch, ActivationKind hidden_activation) {
    Assignment sets;
    for (auto width : arch.hidden) sets.emplace_back(width, convolution_set(hidden_activation));
    return make_network(arch, sets);
}

Assignment assignment_of(const NetworkSpec& spec) {
    Assignment out;
    for (std::size_t l = 0; l + 1 < spec.layers.size(); ++l) {
        out.emplace_back();
        for (const auto& n : spec.layers[l].neurons) out.back().push_back(n.operators);
    }
    return out;
}

std::size_t parameter_count(const NetworkSpec& spec) {
    std::size_t count = 0;
    for (const auto& layer : spec.layers)
        for (const auto& n : layer.neurons) count += layer.input_count * n.kernel.size() + 1;
    return count;
}

Parameters::Parameters(const NetworkSpec& spec) {
    spec.validate();
    std::size_t offset = 0;
    for (const auto& layer : spec.layers) {
        const std::size_t n_out = layer.neurons.size();
        inputs_.push_back(layer.input_count);
        outputs_.push_back(n_out);
        weight_offsets_.emplace_back();
        weight_sizes_.emplace_back();
        for (std::size_t a = 0; a < layer.input_count; ++a) {
            for (std::size_t b = 0; b < n_out; ++b) {
                weight_offsets_.back().push_back(offset);
                weight_sizes_.back().push_back(layer.neurons[b].kernel.size());
                offset += layer.neurons[b].kernel.size();
            }
        }
        bias_offsets_.push_back(offset);
        offset += n_out;
    }
    values_.assign(offset, 0.0);
}

std::size_t Parameters::weight_offset(std::size_t layer, std::size_t input, std::size_t output) const {
    if (layer >= outputs_.size() || input >= inputs_[layer] || output >= outputs_[layer])
        throw std::out_of_range("parameter index out of range");
    return weight_offsets_[layer][input * outputs_[layer] + output];
}

std::size_t Parameters::bias_offset(std::size_t layer, std::size_t output) const {
    if (layer >= outputs_.size() || output >= outputs_[layer]) throw std::out_of_range("bias index out of range");
    return bias_offsets_[layer] + output;
}

std::span<const double> Parameters::weight(std::size_t layer, std::size_t input, std::size_t output) const {
    const auto off = weight_offset(layer, input, output);
    return {values_.data() + off, weight_sizes_[layer][input * outputs_[layer] + output]};
}

std::span<double> Parameters::weight(std::size_t layer, std::size_t input, std::size_t output) {
    const auto off = weight_offset(layer, input, output);
    ++generation_;
    return {values_.data() + off, weight_sizes_[layer][input * outputs_[layer] + output]};
}

double Parameters::bias(std::size_t layer, std::size_t output) const { return values_[bias_offset(layer, output)]; }

double& Parameters::bias(std::size_t layer, std::size_t output) {
    ++generation_;
    return values_[bias_offset(layer, output)];
}

void Parameters::fill(double v) {
    ++generation_;
    std::fill(values_.begin(), values_.end(), v);
}

bool Parameters::all_finite() const {
    for (double v : values_)
        if (!std::isfinite(v)) return false;
    return true;
}

bool Parameters::same_layout(const Parameters& other) const {
    return values_.size() == other.values_.size() && weight_offsets_ == other.weight_offsets_ &&
           bias_offsets_ == other.bias_offsets_;
}

Parameters initialize_parameters(const NetworkSpec& spec, std::mt19937_64& rng) {
    Parameters p(spec);
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const auto& layer = spec.layers[l];
        for (std::size_t a = 0; a < layer.input_count; ++a) {
            for (std::size_t b = 0; b < layer.neurons.size(); ++b) {
                const double fan = static_cast<double>(layer.input_count * layer.neurons[b].kernel.size());
                std::uniform_real_distribution<double> dist(-std::sqrt(1.0 / fan), std::sqrt(1.0 / fan));
                for (double& w : p.weight(l, a, b)) w = dist(rng);
            }
        }
    }
    return p;
}

LayerOutput layer_forward(std::span<const Tensor> inputs, const LayerSpec& layer, const Parameters& params,
                          std::size_t layer_index, Pass pass) {
    return kernels::layer_forward(inputs, layer, params, layer_index, pass);
}

LayerGrads layer_backward(const LayerTrace& trace, const LayerSpec& layer, const Parameters& params,
                          std::size_t layer_index, std::span<const Tensor> upstream, Parameters& grads,
                          bool need_input_grads) {
    return kernels::layer_backward(trace, layer, params, layer_index, upstream, grads, need_input_grads);
}

NetworkOutput network_forward(const Tensor& input, const NetworkSpec& spec, const Parameters& params, Pass pass) {
    return network_forward(std::span<const Tensor>(&input, 1), spec, params, pass);
}

NetworkOutput network_forward(std::span<const Tensor> inputs, const NetworkSpec& spec, const Parameters& params,
                              Pass pass) {
    spec.validate();
    for (const auto& in : inputs)
        if (in.rank() != 2 || in.rows() != spec.input_rows || in.cols() != spec.input_cols)
            throw std::invalid_argument("network_forward: input shape does not match network input shape");
    NetworkOutput out;
    std::vector<Tensor> current(inputs.begin(), inputs.end());
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        auto r = layer_forward(current, spec.layers[l], params, l, pass);
        current = std::move(r.maps);
        out.trace.layers.push_back(std::move(r.trace));
    }
    if (pass == Pass::Training) {
        out.trace.params = &params;
        out.trace.generation = params.generation();
    }
    out.output = current.front();
    out.maps = std::move(current);
    return out;
}

NetworkGrads network_backward(const ForwardTrace& trace, const NetworkSpec& spec, const Parameters& params,
                              std::span<const Tensor> output_grads, bool need_input_grads) {
    if (!trace.valid()) throw std::logic_error("network_backward: no training trace (run a Training forward first)");
    if (trace.params != &params || trace.generation != params.generation())
        throw std::logic_error("network_backward: stale trace, parameters changed since forward");
    if (trace.layers.size() != spec.layers.size()) throw std::logic_error("network_backward: trace/spec mismatch");

    NetworkGrads out{Parameters(spec), {}};
    std::vector<Tensor> upstream(output_grads.begin(), output_grads.end());
    for (std::size_t l = spec.layers.size(); l-- > 0;) {
        const bool want_inputs = l > 0 || need_input_grads;
        auto g = layer_backward(trace.layers[l], spec.layers[l], params, l, upstream, out.params, want_inputs);
        upstream = std::move(g.input_grads);
    }
    if (need_input_grads) out.input_grads = std::move(upstream);
    return out;
}

Loss mse_loss(const Tensor& prediction, const Tensor& target) {
    if (!prediction.same_shape(target)) throw std::invalid_argument("mse_loss: shape mismatch");
    if (prediction.empty()) throw std::invalid_argument("mse_loss: empty tensors");
    Loss out{0.0, Tensor(prediction.shape())};
    const double n = static_cast<double>(prediction.size());
    for (std::size_t i = 0; i < prediction.size(); ++i) {
        const double d = prediction[i] - target[i];
        out.value += d * d;
        out.grad[i] = 2.0 * d / n;
    }
    out.value /= n;
    return out;
}

}  // namespace onn
