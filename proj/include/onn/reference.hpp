#pragma once

// Serial reference path. Each layer is computed literally as
// im2col -> broadcast -> nodal -> row pool -> sum over inputs -> activation,
// and differentiated through the same chain with col2im for the input
// gradient and column sums of the nodal weight derivative for dE/dw. Kept
// for cross-checking the parallel kernels; not used for training.

#include <span>
#include <vector>

#include "onn/network.hpp"

namespace onn::reference {

struct LayerTrace {
    std::vector<PatchMatrix> patches;  // [a*out+b]
    std::vector<Tensor> weights;       // broadcast W, [a*out+b]
    std::vector<Tensor> nodal;         // Z, [a*out+b]
    std::vector<PoolResult> pooled;    // [a*out+b]
    std::vector<std::vector<double>> pre_activation;
};

struct LayerResult {
    std::vector<Tensor> maps;
    LayerTrace trace;
};

LayerResult layer_forward(std::span<const Tensor> inputs, const LayerSpec& layer, const Parameters& params,
                          std::size_t layer_index);

std::vector<Tensor> layer_backward(const LayerTrace& trace, const LayerSpec& layer, const Parameters& params,
                                   std::size_t layer_index, std::span<const Tensor> upstream, Parameters& grads);

struct NetworkResult {
    std::vector<Tensor> maps;
    std::vector<LayerTrace> layers;
};

NetworkResult network_forward(std::span<const Tensor> inputs, const NetworkSpec& spec, const Parameters& params);

/// Returns parameter gradients; input gradients are written to input_grads when non-null.
Parameters network_backward(const NetworkResult& forward, const NetworkSpec& spec, const Parameters& params,
                            std::span<const Tensor> output_grads, std::vector<Tensor>* input_grads = nullptr);

}  // namespace onn::reference
