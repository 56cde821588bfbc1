#include "onn/reference.hpp"

#include <stdexcept>

namespace onn::reference {

LayerResult layer_forward(std::span<const Tensor> inputs, const LayerSpec& layer, const Parameters& params,
                          std::size_t layer_index) {
    if (inputs.size() != layer.input_count) throw std::invalid_argument("reference::layer_forward: input count");
    const std::size_t n_in = inputs.size();
    const std::size_t n_out = layer.neurons.size();
    const Shape map_shape = inputs[0].shape();

    LayerResult out;
    auto& tr = out.trace;
    tr.patches.resize(n_in * n_out);
    tr.weights.resize(n_in * n_out);
    tr.nodal.resize(n_in * n_out);
    tr.pooled.resize(n_in * n_out);

    for (std::size_t b = 0; b < n_out; ++b) {
        const auto& neuron = layer.neurons[b];
        std::vector<double> x;
        for (std::size_t a = 0; a < n_in; ++a) {
            const std::size_t c = a * n_out + b;
            tr.patches[c] = im2col(inputs[a], neuron.kernel);
            const auto w = params.weight(layer_index, a, b);
            const Tensor kernel({neuron.kernel.rows, neuron.kernel.cols}, std::vector<double>(w.begin(), w.end()));
            tr.weights[c] = broadcast_weights(kernel, tr.patches[c].rows());
            tr.nodal[c] = nodal_forward(neuron.operators.nodal, tr.patches[c].values, tr.weights[c]);
            tr.pooled[c] = pool_forward(neuron.operators.pool, tr.nodal[c]);
            if (x.empty()) x.assign(tr.pooled[c].values.size(), 0.0);
            for (std::size_t i = 0; i < x.size(); ++i) x[i] += tr.pooled[c].values[i];
        }
        const double bias = params.bias(layer_index, b);
        for (double& v : x) v += bias;
        const auto y = activation_forward(neuron.operators.activation, x);
        out.maps.push_back(vec_inverse(Tensor({y.size()}, y), map_shape));
        tr.pre_activation.push_back(std::move(x));
    }
    return out;
}

std::vector<Tensor> layer_backward(const LayerTrace& tr, const LayerSpec& layer, const Parameters& params,
                                   std::size_t layer_index, std::span<const Tensor> upstream, Parameters& grads) {
    const std::size_t n_in = layer.input_count;
    const std::size_t n_out = layer.neurons.size();
    if (upstream.size() != n_out) throw std::invalid_argument("reference::layer_backward: upstream count");
    (void)params;

    std::vector<Tensor> input_grads(n_in);
    for (std::size_t b = 0; b < n_out; ++b) {
        const auto& neuron = layer.neurons[b];
        const auto dx = activation_backward(neuron.operators.activation, tr.pre_activation[b], upstream[b].values());
        double bias_grad = 0.0;
        for (double v : dx) bias_grad += v;
        grads.bias(layer_index, b) += bias_grad;

        for (std::size_t a = 0; a < n_in; ++a) {
            const std::size_t c = a * n_out + b;
            const Tensor dz = pool_backward(neuron.operators.pool, tr.nodal[c], tr.pooled[c], dx);
            const auto g = nodal_backward(neuron.operators.nodal, tr.patches[c].values, tr.weights[c], dz);

            // Weight entry m collects every row's column m (m = i mod |w|).
            auto dw = grads.weight(layer_index, a, b);
            for (std::size_t i = 0; i < g.d_weight.rows(); ++i)
                for (std::size_t j = 0; j < g.d_weight.cols(); ++j) dw[j] += g.d_weight(i, j);

            const auto& pm = tr.patches[c];
            Tensor dy = col2im_accumulate(g.d_input, pm.index_map, pm.source_rows, pm.source_cols);
            if (input_grads[a].empty()) input_grads[a] = Tensor::matrix(pm.source_rows, pm.source_cols);
            for (std::size_t i = 0; i < dy.size(); ++i) input_grads[a][i] += dy[i];
        }
    }
    return input_grads;
}

NetworkResult network_forward(std::span<const Tensor> inputs, const NetworkSpec& spec, const Parameters& params) {
    spec.validate();
    NetworkResult out;
    std::vector<Tensor> current(inputs.begin(), inputs.end());
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        auto r = reference::layer_forward(current, spec.layers[l], params, l);
        out.layers.push_back(std::move(r.trace));
        current = std::move(r.maps);
    }
    out.maps = std::move(current);
    return out;
}

Parameters network_backward(const NetworkResult& forward, const NetworkSpec& spec, const Parameters& params,
                            std::span<const Tensor> output_grads, std::vector<Tensor>* input_grads) {
    Parameters grads(spec);
    std::vector<Tensor> upstream(output_grads.begin(), output_grads.end());
    for (std::size_t l = spec.layers.size(); l-- > 0;)
        upstream = layer_backward(forward.layers[l], spec.layers[l], params, l, upstream, grads);
    if (input_grads != nullptr) *input_grads = std::move(upstream);
    return grads;
}

}  // namespace onn::reference
