#pragma once

// Data-parallel layer kernels over tap-major patch matrices (one row per
// kernel tap, one column per pixel). Parallel loops run over output neurons in
// the forward pass and over input maps in the backward pass; every reduction
// is carried out by a single thread in a fixed order, so results do not depend
// on the thread count.

#include <span>

#include "onn/network.hpp"

namespace onn::kernels {

/// h(Y) for separable nodal kinds (psi = w * h(y)).
void separable_table(NodalKind kind, std::span<const double> patches, std::span<double> out);

/// Adds pool(nodal(Y, w)) of one connection into x and fills the connection trace.
/// patches is tap-major; h_table is h(patches) for Cubic and SignedLog, else unused.
void forward_connection(const OperatorSet& ops, const Tensor& patches, std::span<const double> kernel,
                        const double* h_table, Pass pass, std::span<double> x, ConnectionTrace& trace);

/// Backward of one connection given dE/dx (post-pool). Adds into patch_grad (may be empty) and dw.
void backward_connection(const OperatorSet& ops, const Tensor& patches, std::span<const double> kernel,
                         const double* h_table, const ConnectionTrace& trace, std::span<const double> upstream,
                         std::span<double> patch_grad, std::span<double> dw);

/// Per pixel, the tap index chosen by a Median or Max pool over tap-major values z.
void select_taps(PoolKind kind, const double* z, std::size_t taps, std::size_t pixels, std::uint32_t* out);

LayerOutput layer_forward(std::span<const Tensor> inputs, const LayerSpec& layer, const Parameters& params,
                          std::size_t layer_index, Pass pass);

LayerGrads layer_backward(const LayerTrace& trace, const LayerSpec& layer, const Parameters& params,
                          std::size_t layer_index, std::span<const Tensor> upstream, Parameters& grads,
                          bool need_input_grads);

/// Number of nodal kinds with a cached separable table slot.
inline constexpr std::size_t kTableKinds = 9;

}  // namespace onn::kernels
